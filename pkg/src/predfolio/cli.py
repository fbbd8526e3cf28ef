"""Command-line pipeline: ingest -> predict -> risk -> metrics -> tune ->
optimize -> frontier -> report.

Stages read and write plain artifacts under one output directory so
expensive steps are cached; every artifact is tracked in a manifest with
the config hash and seed that produced it. Runs are deterministic for a
fixed config and seed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import eval_metrics, frontier, market_data, predictor, risk_model, taguchi
from .errors import ConfigError, PredfolioError
from .ga_solver import GAConfig, evolve
from .objective import Bounds, ObjectiveParams
from .predictor import PredictionRecord, PredictorConfig

STAGE_ARTIFACTS = {
    "ingest": "returns.csv",
    "predict": "predictions.json",
    "risk": "risk_model.json",
}

CONFIG_DEFAULTS = {
    "out_dir": "runs/out",
    "seed": "0",
    "sampling_weekday": "monday",
    "min_length": "",
    "delay": "41",
    "hidden_units": "5",
    "max_epochs": "1000",
    "train_frac": "0.70",
    "val_frac": "0.15",
    "test_frac": "0.15",
    "lm_initial_damping": "1e-3",
    "lm_damping_factor": "10",
    "mu_mode": "one-step",
    "centered_covariance": "false",
    "mape_floor": "1e-12",
    "ks_alpha": "0.05",
    "ks_lilliefors": "true",
    "epsilon": "0.1",
    "delta": "0.3",
    "k": "5",
    "lambda": "0.5",
    "theta": "0.0",
    "lambda_grid": "1,0.8,0.2,0",
    "theta_grid": "0,0.2,0.8",
    "skew_mode": "weighted",
    "population_size": "200",
    "crossover_fraction": "0.8",
    "crossover_kind": "single-point",
    "selection_kind": "roulette",
    "penalty_factor": "10",
    "stall_generations": "50",
    "function_tolerance": "1e-6",
    "time_limit_seconds": "1000",
    "generation_cap": "500",
    "mutation_swap_rate": "0.1",
    "tournament_size": "2",
    "tune_replicates": "3",
    "tune_lambda": "0.8",
    "tune_theta": "0.2",
    "frontier_repeats": "3",
}


class RunConfig:
    """Flat key=value configuration with typed accessors."""

    def __init__(self, values: dict[str, str]):
        unknown = set(values) - set(CONFIG_DEFAULTS) - {"prices_path"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        self.values = dict(CONFIG_DEFAULTS)
        self.values.update(values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = stripped.split("=", 1)
                values[key.strip()] = value.strip()
        return cls(values)

    def override(self, key: str, value) -> None:
        if value is not None:
            self.values[key] = str(value)

    def str_(self, key: str) -> str:
        return self.values[key]

    def int_(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {self.values[key]!r}")

    def float_(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {self.values[key]!r}")

    def bool_(self, key: str) -> bool:
        raw = self.values[key].strip().lower()
        if raw in ("true", "yes", "1", "on"):
            return True
        if raw in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"config key {key!r} must be boolean, got {self.values[key]!r}")

    def float_list(self, key: str) -> list[float]:
        raw = self.values[key]
        try:
            return [float(part) for part in raw.split(",") if part.strip() != ""]
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a comma list of numbers, got {raw!r}")

    def optional_int(self, key: str) -> int | None:
        return self.int_(key) if self.values[key].strip() else None

    def hash(self) -> str:
        # hash the semantic parameters only, so relocating inputs/outputs
        # does not change the recorded provenance of identical numbers
        skip = {"out_dir", "prices_path"}
        canon = "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values) if k not in skip)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def out_dir(self) -> Path:
        return Path(self.str_("out_dir"))

    def predictor_config(self, seed) -> PredictorConfig:
        return PredictorConfig(
            delay=self.int_("delay"),
            hidden_units=self.int_("hidden_units"),
            max_epochs=self.int_("max_epochs"),
            train_frac=self.float_("train_frac"),
            val_frac=self.float_("val_frac"),
            test_frac=self.float_("test_frac"),
            lm_initial_damping=self.float_("lm_initial_damping"),
            lm_damping_factor=self.float_("lm_damping_factor"),
            seed=seed,
        )

    def bounds(self) -> Bounds:
        def parse(key):
            parts = self.float_list(key)
            return parts[0] if len(parts) == 1 else np.array(parts)

        return Bounds(epsilon=parse("epsilon"), delta=parse("delta"))

    def ga_config(self, seed) -> GAConfig:
        return GAConfig(
            population_size=self.int_("population_size"),
            crossover_fraction=self.float_("crossover_fraction"),
            crossover_kind=self.str_("crossover_kind"),
            selection_kind=self.str_("selection_kind"),
            penalty_factor=self.float_("penalty_factor"),
            stall_generations=self.int_("stall_generations"),
            function_tolerance=self.float_("function_tolerance"),
            time_limit_seconds=self.float_("time_limit_seconds"),
            generation_cap=self.int_("generation_cap"),
            mutation_swap_rate=self.float_("mutation_swap_rate"),
            tournament_size=self.int_("tournament_size"),
            seed=seed,
        )


def _asset_seed(master: int, asset: str) -> tuple[int, int]:
    return (master, zlib.crc32(asset.encode()))


def _write_json(path: Path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _update_manifest(out: Path, config: RunConfig, artifacts: list[str]) -> None:
    manifest_path = out / "manifest.json"
    manifest = _read_json(manifest_path) if manifest_path.exists() else {}
    for name in artifacts:
        manifest[name] = {"config_hash": config.hash(), "seed": config.int_("seed")}
    _write_json(manifest_path, manifest)


def _require_stage(out: Path, stage: str) -> Path:
    artifact = out / STAGE_ARTIFACTS[stage]
    if not artifact.exists():
        raise ConfigError(
            f"missing {artifact.name}; run the `{stage}` stage first"
        )
    return artifact


def _read_returns_csv(path: Path) -> tuple[list[str], list[dt.date], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        assets = header[1:]
        dates, rows = [], []
        for row in reader:
            dates.append(dt.date.fromisoformat(row[0]))
            rows.append([float(v) for v in row[1:]])
    return assets, dates, np.array(rows)


def cmd_ingest(config: RunConfig) -> int:
    if "prices_path" not in config.values:
        raise ConfigError("config key 'prices_path' is required for ingest")
    prices_path = Path(config.str_("prices_path"))
    if not prices_path.exists():
        raise ConfigError(f"prices file not found: {prices_path}")
    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)

    table = market_data.load_prices(prices_path, config.str_("sampling_weekday"))
    series = []
    skipped: list[tuple[str, str]] = [(a, "no sampled weeks") for a in table.excluded]
    for asset, points in table.points.items():
        if len(points) < 2:
            skipped.append((asset, "fewer than 2 sampled weeks"))
            continue
        series.append(market_data.compute_returns(points))
    universe, report = market_data.align_universe(series, config.optional_int("min_length"))
    report.dropped = skipped + report.dropped

    matrix = universe.returns_matrix()
    with open(out / "returns.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + universe.assets)
        for i, date in enumerate(universe.dates):
            writer.writerow([date.isoformat()] + [repr(float(v)) for v in matrix[i]])
    (out / "alignment_report.txt").write_text(report.as_text(), encoding="utf-8")
    _update_manifest(out, config, ["returns.csv", "alignment_report.txt"])
    print(f"{universe.n_assets} assets, {universe.n_weeks} weeks")
    return 0


def cmd_predict(config: RunConfig) -> int:
    out = config.out_dir()
    assets, _, matrix = _read_returns_csv(_require_stage(out, "ingest"))
    master = config.int_("seed")

    predictor_dumps = {}
    prediction_dumps = {}
    for j, asset in enumerate(assets):
        pconfig = config.predictor_config(seed=_asset_seed(master, asset))
        split = predictor.split_series(matrix[:, j], pconfig)
        trained = predictor.train_arnn(split, pconfig, asset=asset)
        record = predictor.rolling_predict(trained, matrix[:, j], pconfig)
        predictor_dumps[asset] = trained.to_dict()
        prediction_dumps[asset] = record.to_dict()
    _write_json(out / "predictors.json", {"version": 1, "predictors": predictor_dumps})
    _write_json(out / "predictions.json", {"version": 1, "records": prediction_dumps})
    _update_manifest(out, config, ["predictors.json", "predictions.json"])
    print(f"trained {len(assets)} predictors")
    return 0


def _load_records(out: Path) -> dict[str, PredictionRecord]:
    data = _read_json(_require_stage(out, "predict"))
    return {
        asset: PredictionRecord.from_dict(record)
        for asset, record in data["records"].items()
    }


def cmd_risk(config: RunConfig) -> int:
    out = config.out_dir()
    assets, _, matrix = _read_returns_csv(_require_stage(out, "ingest"))
    records = _load_records(out)
    ordered = [records[a] for a in assets]
    returns_by_asset = {a: matrix[:, j] for j, a in enumerate(assets)}
    model = risk_model.build_risk_model(
        ordered,
        returns_by_asset,
        mu_mode=config.str_("mu_mode"),
        centered=config.bool_("centered_covariance"),
    )
    model.to_json(out / "risk_model.json")
    _update_manifest(out, config, ["risk_model.json"])
    print(f"risk model over {model.n_assets} assets, window {model.estimation_window}")
    return 0


def cmd_metrics(config: RunConfig) -> int:
    out = config.out_dir()
    records = _load_records(out)
    floor = config.float_("mape_floor")
    alpha = config.float_("ks_alpha")
    lilliefors = config.bool_("ks_lilliefors")

    reports = {}
    ks_rows = {}
    for asset, record in records.items():
        reports[asset] = eval_metrics.evaluate(record.real, record.predicted, mape_floor=floor)
        try:
            ks = eval_metrics.ks_normality_test(record.errors, alpha=alpha, lilliefors=lilliefors)
            ks_rows[asset] = ks.to_dict()
        except PredfolioError as exc:
            ks_rows[asset] = {"error": str(exc)}

    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["asset", "n", "me", "signed_me", "rmse", "mape", "mape_skipped",
             "hr", "hr_plus", "hr_minus"]
        )
        for asset in sorted(reports):
            rep = reports[asset]
            writer.writerow(
                [asset, rep.n]
                + [
                    "" if v is None else repr(float(v))
                    for v in (rep.me, rep.signed_me, rep.rmse, rep.mape)
                ]
                + [rep.mape_skipped]
                + ["" if v is None else repr(float(v)) for v in (rep.hr, rep.hr_plus, rep.hr_minus)]
            )
    with open(out / "metrics_summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mean", "variance", "std"])
        for name, mean, var, std in eval_metrics.summarize_reports(reports):
            writer.writerow([name, repr(mean), repr(var), repr(std)])
    _write_json(
        out / "metrics.json",
        {
            "version": 1,
            "per_asset": {a: reports[a].to_dict() for a in sorted(reports)},
            "ks_errors": {a: ks_rows[a] for a in sorted(ks_rows)},
        },
    )
    _update_manifest(out, config, ["metrics.csv", "metrics_summary.csv", "metrics.json"])
    print(f"metrics for {len(reports)} assets")
    return 0


def cmd_tune(config: RunConfig) -> int:
    out = config.out_dir()
    model = risk_model.RiskModel.from_json(_require_stage(out, "risk"))
    params = ObjectiveParams(
        lam=config.float_("tune_lambda"),
        theta=config.float_("tune_theta"),
        skew_mode=config.str_("skew_mode"),
    )
    base = config.ga_config(seed=config.int_("seed"))
    runner = taguchi.ga_runner(model, params, config.bounds(), config.int_("k"), base)
    array = taguchi.build_array()
    runs = taguchi.run_experiments(
        array, runner, replicates=config.int_("tune_replicates"), seed=config.int_("seed")
    )
    result = taguchi.analyze_means(runs, array=array)

    _write_json(out / "tune_result.json", {"version": 1, **result.to_dict()})
    with open(out / "tune_runs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row"] + taguchi.DEFAULT_FACTORS.names + ["replicate", "cost"])
        for run in runs:
            assignment = taguchi.DEFAULT_FACTORS.assignment(run.levels)
            for rep, cost in enumerate(run.costs):
                writer.writerow(
                    [run.row]
                    + [assignment[name] for name in taguchi.DEFAULT_FACTORS.names]
                    + [rep, repr(cost)]
                )
    with open(out / "tune_response.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["factor", "level_1", "level_2", "level_3", "best_level", "tie"])
        for name in taguchi.DEFAULT_FACTORS.names:
            writer.writerow(
                [name]
                + [repr(v) for v in result.response_table[name]]
                + [result.best_levels[name], result.ties[name]]
            )
    lines = [f"{name} = {value}" for name, value in result.best_levels.items()]
    (out / "tuned_ga.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _update_manifest(
        out, config,
        ["tune_result.json", "tune_runs.csv", "tune_response.csv", "tuned_ga.cfg"],
    )
    print("best levels: " + ", ".join(f"{k}={v}" for k, v in result.best_levels.items()))
    return 0


def cmd_optimize(config: RunConfig) -> int:
    out = config.out_dir()
    model = risk_model.RiskModel.from_json(_require_stage(out, "risk"))
    params = ObjectiveParams(
        lam=config.float_("lambda"),
        theta=config.float_("theta"),
        skew_mode=config.str_("skew_mode"),
    )
    ga_config = config.ga_config(seed=config.int_("seed"))
    result = evolve(model, params, config.bounds(), config.int_("k"), ga_config)

    dump = result.to_dict(assets=model.assets)
    dump.update({"lambda": params.lam, "theta": params.theta, "skew_mode": params.skew_mode})
    _write_json(out / "portfolio.json", dump)
    with open(out / "ga_trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_cost", "mean_cost"])
        for gen, (best, mean) in enumerate(zip(result.cost_history, result.mean_history)):
            writer.writerow([gen, repr(best), repr(mean)])
    _update_manifest(out, config, ["portfolio.json", "ga_trace.csv"])
    print(
        f"best cost {result.best_cost:.6g} after {result.generations} generations"
        f" ({result.stop_reason})"
    )
    return 0


def cmd_frontier(config: RunConfig) -> int:
    out = config.out_dir()
    model = risk_model.RiskModel.from_json(_require_stage(out, "risk"))
    ga_config = config.ga_config(seed=config.int_("seed"))
    result = frontier.sweep(
        model,
        config.bounds(),
        config.int_("k"),
        ga_config,
        lambda_grid=config.float_list("lambda_grid"),
        theta_grid=config.float_list("theta_grid"),
        skew_mode=config.str_("skew_mode"),
        repeats=config.int_("frontier_repeats"),
    )
    curve = frontier.efficient_filter(result.points)

    with open(out / "frontier.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["lambda", "theta"] + list(model.assets)
            + ["mu_p", "sigma_p", "cost", "stop_reason", "seed"]
        )
        for point in result.points:
            writer.writerow(
                [repr(point.lam), repr(point.theta)]
                + [repr(float(w)) for w in point.portfolio.weights]
                + [repr(point.mu_p), repr(point.sigma_p), repr(point.cost),
                   point.stop_reason, "-".join(str(s) for s in point.seed)]
            )
    with open(out / "frontier_curve.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma_p", "mu_p"])
        for point in curve:
            writer.writerow([repr(point.sigma_p), repr(point.mu_p)])
    _write_json(
        out / "frontier.json",
        {
            "version": 1,
            "points": [p.to_dict(model.assets) for p in result.points],
            "failures": result.failures,
            "ga_config": ga_config.to_dict(),
        },
    )
    _update_manifest(out, config, ["frontier.csv", "frontier_curve.csv", "frontier.json"])
    print(f"{len(result.points)} frontier points, {len(result.failures)} failures")
    if result.failures:
        for failure in result.failures:
            print(
                f"failed at lambda={failure['lambda']} theta={failure['theta']}: "
                f"{failure['error']}",
                file=sys.stderr,
            )
        return 1
    return 0


def cmd_report(config: RunConfig) -> int:
    out = config.out_dir()
    manifest_path = out / "manifest.json"
    summary: dict = {"artifacts": {}}
    if manifest_path.exists():
        summary["artifacts"] = _read_json(manifest_path)
    returns_path = out / "returns.csv"
    if returns_path.exists():
        assets, dates, _ = _read_returns_csv(returns_path)
        summary["universe"] = {"assets": len(assets), "weeks": len(dates)}
    model_path = out / "risk_model.json"
    if model_path.exists():
        model = risk_model.RiskModel.from_json(model_path)
        summary["risk_model"] = {
            "assets": model.n_assets,
            "estimation_window": model.estimation_window,
        }
    portfolio_path = out / "portfolio.json"
    if portfolio_path.exists():
        dump = _read_json(portfolio_path)
        summary["portfolio"] = {
            "best_cost": dump["best_cost"],
            "lambda": dump["lambda"],
            "theta": dump["theta"],
            "stop_reason": dump["stop_reason"],
        }
    frontier_path = out / "frontier.json"
    if frontier_path.exists():
        dump = _read_json(frontier_path)
        summary["frontier"] = {
            "points": len(dump["points"]),
            "failures": len(dump["failures"]),
        }
    _write_json(out / "report.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "predict": cmd_predict,
    "risk": cmd_risk,
    "metrics": cmd_metrics,
    "tune": cmd_tune,
    "optimize": cmd_optimize,
    "frontier": cmd_frontier,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predfolio",
        description="Prediction-driven mean-variance-skewness portfolio pipeline.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="path to a key=value run config file")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--lambda", dest="lam", type=float, help="override lambda")
    parser.add_argument("--theta", type=float, help="override theta")
    parser.add_argument("--k", type=int, help="override the subset size K")
    parser.add_argument(
        "--time-limit", type=float, help="override the GA time limit in seconds"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_file(args.config) if args.config else RunConfig({})
        config.override("seed", args.seed)
        config.override("out_dir", args.out)
        config.override("lambda", args.lam)
        config.override("theta", args.theta)
        config.override("k", args.k)
        config.override("time_limit_seconds", args.time_limit)
        return COMMANDS[args.command](config)
    except PredfolioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
