"""Command-line driver for data synthesis, training, evaluation and sweeps.

Exit codes: 0 success, 2 configuration/validation problem, 3 numerical
failure, 4 I/O problem.  Every command is deterministic for a fixed seed;
``OPTCHARGE_SEED`` overrides the config seeds when no ``--seed`` is given.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import gradcheck as gradcheck_mod
from .config import ExperimentConfig, load_config
from .learner import (
    ComparisonCellError,
    compare_runs,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train_e2e,
    train_two_step,
    write_trace_csv,
)
from .model import ValidationError, build_qp, with_selling_prices
from .pbdr import (
    generate_dataset,
    generate_population,
    read_dataset_csv,
    write_dataset_csv,
    write_population_json,
)
from .qpsolver import solve_qp

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ValueError) as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except OSError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except RuntimeError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)
    return wrapper


def _load(config_path: str | None, seed: int | None) -> ExperimentConfig:
    config = load_config(config_path)
    if seed is None and "OPTCHARGE_SEED" in os.environ:
        seed = int(os.environ["OPTCHARGE_SEED"])
    if seed is not None:
        config = config.with_seed(seed)
    return config


def _out_dir(config: ExperimentConfig, out: str | None) -> Path:
    path = Path(out) if out is not None else Path(config.paths.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing input file {path}; run gen-data first")
    return path


@click.group()
def main():
    """Decision-focused learning experiments for EV charging scheduling."""


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="Override config seeds")
@click.option("--out", type=click.Path(), default=None, help="Output directory")
@_handled
def cmd_gen_data(config_path, seed, out):
    """Synthesize the customer population and the train/test datasets."""
    config = _load(config_path, seed)
    pc = config.pbdr
    out_dir = _out_dir(config, out)

    population = generate_population(
        seed=pc.seed, n_utility=pc.n_utility, n_quadratic=pc.n_quadratic,
        price_low=pc.price_low, price_high=pc.price_high,
        demand_low=pc.demand_low, demand_high=pc.demand_high)
    train = generate_dataset(population, pc.n_train, pc.price_low,
                             pc.price_high, seed=pc.train_seed, noise=pc.noise)
    test = generate_dataset(population, pc.n_test, pc.price_low,
                            pc.price_high, seed=pc.test_seed, noise=pc.noise)

    write_population_json(population, out_dir / "population.json")
    write_dataset_csv(train, out_dir / "train.csv")
    write_dataset_csv(test, out_dir / "test.csv")

    click.echo(f"population: {len(population)} patterns -> {out_dir / 'population.json'}")
    click.echo(f"train: {len(train)} samples, demand range "
               f"[{train.demands.min():.2f}, {train.demands.max():.2f}] kWh")
    click.echo(f"test: {len(test)} samples, prices in "
               f"[{test.prices.min():.3f}, {test.prices.max():.3f}] $/kWh")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(["two-step", "e2e"]), required=True)
@click.option("--samples", type=int, default=None,
              help="Train on the first K rows only")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_handled
def cmd_train(config_path, mode, samples, seed, out):
    """Train the forecaster in one regime and write checkpoint plus trace."""
    config = _load(config_path, seed)
    out_dir = _out_dir(config, out)
    mode_key = mode.replace("-", "_")
    train_cfg = replace(config.train, mode=mode_key)

    dataset = read_dataset_csv(_require(out_dir / "train.csv"))
    if samples is not None:
        dataset = dataset.subset(samples)

    if mode_key == "two_step":
        result = train_two_step(dataset, train_cfg)
    else:
        result = train_e2e(dataset, config.station, config.sessions, train_cfg)

    ckpt = out_dir / f"checkpoint_{mode_key}.json"
    trace = out_dir / f"trace_{mode_key}.csv"
    save_checkpoint(ckpt, result.params, train_cfg)
    write_trace_csv(trace, result.trace)
    final = result.trace[-1]["loss"] if result.trace else float("nan")
    click.echo(f"trained {mode_key} on {len(dataset)} samples "
               f"({train_cfg.iterations} iterations, final loss {final:.4f})")
    click.echo(f"checkpoint -> {ckpt}")
    click.echo(f"trace -> {trace}")


@main.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), default=None)
@click.option("--oracle", is_flag=True, default=False,
              help="Score the ground-truth forecaster instead of a checkpoint")
@click.option("--station-power/--no-station-power", default=False,
              help="Also dump per-hour station power for the first test sample")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_handled
def cmd_eval(config_path, checkpoint_path, oracle, station_power, seed, out):
    """Evaluate a checkpoint (or the oracle) on the test dataset."""
    config = _load(config_path, seed)
    out_dir = _out_dir(config, out)
    test = read_dataset_csv(_require(out_dir / "test.csv"))

    params = None
    if not oracle:
        if checkpoint_path is None:
            raise ValidationError("need --checkpoint or --oracle")
        params, _ = load_checkpoint(_require(Path(checkpoint_path)))

    report = evaluate(params, test, config.station, config.sessions,
                      oracle=oracle)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    click.echo(f"mean cost {report.mean_cost:.4f} +- {report.std_cost:.4f} $ "
               f"(ground truth {report.mean_ground_truth:.4f})")
    click.echo(f"profit {report.mean_profit:.4f}  completion "
               f"{report.mean_completion:.4f}  smooth {report.mean_smooth:.6f}  "
               f"rmse {report.rmse:.4f} kWh")
    click.echo(f"report -> {report_path}")

    if station_power:
        from .learner import forecast

        c = test.prices[0]
        e_true = test.demands[0]
        priced = with_selling_prices(config.sessions, c)
        e_hat = e_true if oracle else forecast(params, c)
        sol = solve_qp(build_qp(config.station, priced, e_hat))
        sol_gt = solve_qp(build_qp(config.station, priced, e_true))
        hourly = sol.x_star.reshape(config.station.N, config.station.T).sum(axis=0)
        hourly_gt = sol_gt.x_star.reshape(config.station.N, config.station.T).sum(axis=0)
        power_path = out_dir / "station_power.csv"
        lines = ["hour,power_forecast,power_ground_truth"]
        for t in range(config.station.T):
            lines.append(f"{t},{hourly[t]!r},{hourly_gt[t]!r}")
        power_path.write_text("\n".join(lines) + "\n")
        click.echo(f"station power -> {power_path}")


@main.command("compare")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--sizes", type=str, default="200,400,600,800",
              help="Comma-separated training sizes")
@click.option("--seeds", "n_seeds", type=int, default=5, help="Runs per cell")
@click.option("--jobs", type=int, default=1)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_handled
def cmd_compare(config_path, sizes, n_seeds, jobs, seed, out):
    """Run the full two-regime sweep over training sizes and seeds."""
    config = _load(config_path, seed)
    out_dir = _out_dir(config, out)
    size_list = tuple(int(s) for s in sizes.split(","))

    train_set = read_dataset_csv(_require(out_dir / "train.csv"))
    test_set = read_dataset_csv(_require(out_dir / "test.csv"))

    try:
        result = compare_runs(train_set, test_set, config.station,
                              config.sessions, config.train,
                              sizes=size_list, n_seeds=n_seeds, jobs=jobs)
    except ComparisonCellError as exc:
        partial_path = out_dir / "partial_results.json"
        partial_path.write_text(json.dumps(
            {"failures": [list(f) for f in exc.failures],
             "completed": [list(o) for o in exc.partial]}, indent=2) + "\n")
        click.echo(f"partial results -> {partial_path}", err=True)
        raise

    t1 = ["size,mode,cost_mean,cost_std,improvement"]
    t2 = ["size,mode,profit_mean,completion_mean,smooth_mean,rmse_mean"]
    for row in result.rows:
        imp = result.improvements[row.size]
        t1.append(f"{row.size},{row.mode},{row.cost_mean!r},{row.cost_std!r},{imp!r}")
        t2.append(f"{row.size},{row.mode},{row.profit_mean!r},"
                  f"{row.completion_mean!r},{row.smooth_mean!r},{row.rmse_mean!r}")
    (out_dir / "table1.csv").write_text("\n".join(t1) + "\n")
    (out_dir / "table2.csv").write_text("\n".join(t2) + "\n")
    summary = {
        "ground_truth_cost": result.ground_truth,
        "improvements": {str(k): v for k, v in result.improvements.items()},
        "sizes": list(size_list),
        "n_seeds": n_seeds,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    click.echo(f"{'size':>6} {'mode':>9} {'cost':>10} {'std':>8} {'improvement':>12}")
    for row in result.rows:
        click.echo(f"{row.size:>6} {row.mode:>9} {row.cost_mean:>10.3f} "
                   f"{row.cost_std:>8.3f} {result.improvements[row.size]:>12.3f}")
    click.echo(f"ground-truth cost {result.ground_truth:.3f}")
    click.echo(f"tables -> {out_dir / 'table1.csv'}, {out_dir / 'table2.csv'}")


@main.command("gradcheck")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--instances", type=int, default=100)
@click.option("--seed", type=int, default=None)
@_handled
def cmd_gradcheck(config_path, instances, seed):
    """Verify analytic gradients against finite differences."""
    config = _load(config_path, seed)
    report = gradcheck_mod.run_gradcheck(seed=config.train.seed,
                                         n_instances=instances)
    click.echo(f"instances: {report.n_instances}  pass rate: "
               f"{100.0 * report.pass_rate:.1f}%")
    click.echo(f"worst relative error, demand gradient: {report.worst_err_demand:.2e}")
    click.echo(f"worst relative error, parameter gradient: {report.worst_err_theta:.2e}")
    click.echo(f"zero-coupling gradient exactly zero: {report.zero_coupling_ok}")
    if report.pass_rate < 0.95 or not report.zero_coupling_ok:
        click.echo("gradcheck FAILED", err=True)
        sys.exit(EXIT_NUMERICAL)
    click.echo("gradcheck passed")


if __name__ == "__main__":
    main()
