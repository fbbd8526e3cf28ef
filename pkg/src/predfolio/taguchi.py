"""Orthogonal-array experiment design over the five GA factors.

Runs a 27-row three-level fractional factorial, then picks the level with
the lowest mean cost per factor. The run loop takes any ``runner`` callable
so the GA can be swapped for a stub when calibrating the analysis itself.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ExperimentError, PredfolioError
from .ga_solver import GAConfig, evolve
from .objective import Bounds, ObjectiveParams
from .risk_model import RiskModel


@dataclass(frozen=True)
class FactorGrid:
    """Ordered (name, three levels) factors."""

    factors: tuple[tuple[str, tuple], ...]

    def __post_init__(self):
        if len(self.factors) != 5:
            raise ConfigError(f"expected 5 factors, got {len(self.factors)}")
        for name, levels in self.factors:
            if len(levels) != 3:
                raise ConfigError(f"factor {name!r} must have exactly 3 levels")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.factors]

    def assignment(self, level_indices: Sequence[int]) -> dict:
        return {
            name: levels[level_indices[i]]
            for i, (name, levels) in enumerate(self.factors)
        }


DEFAULT_FACTORS = FactorGrid(
    factors=(
        ("population_size", (50, 100, 200)),
        ("selection_kind", ("uniform", "roulette", "tournament")),
        ("crossover_fraction", (0.9, 0.6, 0.8)),
        ("crossover_kind", ("scattered", "single-point", "two-point")),
        ("penalty_factor", (10, 50, 100)),
    )
)


@dataclass
class ExperimentRun:
    row: int
    levels: tuple[int, ...]
    costs: list[float]


@dataclass
class TuneResult:
    best_levels: dict[str, object]
    best_level_indices: dict[str, int]
    response_table: dict[str, list[float]]
    ties: dict[str, bool]
    runs: list[ExperimentRun]

    def to_dict(self) -> dict:
        return {
            "best_levels": dict(self.best_levels),
            "best_level_indices": dict(self.best_level_indices),
            "response_table": {k: list(v) for k, v in self.response_table.items()},
            "ties": dict(self.ties),
            "runs": [
                {"row": r.row, "levels": list(r.levels), "costs": list(r.costs)}
                for r in self.runs
            ],
        }


def build_array(grid: FactorGrid = DEFAULT_FACTORS) -> np.ndarray:
    """First five columns of the standard 27-row three-level array.

    Rows enumerate (a, b, c) over GF(3)^3 in lexicographic order; the
    columns are the functionals a, b, a+b, a+2b, c (mod 3), so every level
    appears 9 times per column and every ordered level pair 3 times for
    any two columns.
    """
    if len(grid.factors) != 5:
        raise ConfigError(f"array supports exactly 5 factors, got {len(grid.factors)}")
    rows = []
    for a in range(3):
        for b in range(3):
            for c in range(3):
                rows.append([a, b, (a + b) % 3, (a + 2 * b) % 3, c])
    return np.array(rows, dtype=int)


def run_experiments(
    array: np.ndarray,
    runner: Callable[[dict, object], float],
    grid: FactorGrid = DEFAULT_FACTORS,
    replicates: int = 3,
    seed: int = 0,
) -> list[ExperimentRun]:
    """Execute every array row ``replicates`` times with derived seeds.

    ``runner(assignment, seed)`` must return a final cost; failures are
    re-raised with the offending row identified.
    """
    if replicates < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    runs: list[ExperimentRun] = []
    for row_idx, levels in enumerate(array):
        assignment = grid.assignment(levels)
        costs = []
        for rep in range(replicates):
            derived_seed = (seed, row_idx, rep)
            try:
                costs.append(float(runner(assignment, derived_seed)))
            except PredfolioError as exc:
                raise ExperimentError(f"array row {row_idx} failed: {exc}") from exc
        runs.append(ExperimentRun(row=row_idx, levels=tuple(int(v) for v in levels), costs=costs))
    return runs


def ga_runner(
    model: RiskModel,
    params: ObjectiveParams,
    bounds: Bounds,
    k: int,
    base_config: GAConfig,
) -> Callable[[dict, object], float]:
    """Build a runner that applies a factor assignment onto a base GA config."""

    def run(assignment: dict, seed) -> float:
        config = replace(
            base_config,
            population_size=int(assignment["population_size"]),
            selection_kind=str(assignment["selection_kind"]),
            crossover_fraction=float(assignment["crossover_fraction"]),
            crossover_kind=str(assignment["crossover_kind"]),
            penalty_factor=float(assignment["penalty_factor"]),
            seed=tuple(seed) if isinstance(seed, (tuple, list)) else seed,
        )
        return evolve(model, params, bounds, k, config).best_cost

    return run


def analyze_means(
    runs: list[ExperimentRun],
    grid: FactorGrid = DEFAULT_FACTORS,
    array: np.ndarray | None = None,
    use_sn: bool = False,
) -> TuneResult:
    """Mean response per (factor, level); the best level minimizes it.

    With ``use_sn`` the response is the smaller-is-better signal-to-noise
    ratio ``-10 log10(mean(cost^2))`` (costs must be strictly positive)
    and the best level maximizes it. Ties break toward the lower-index
    level and are flagged.
    """
    if array is None:
        array = build_array(grid)
    if len(runs) != len(array):
        raise ExperimentError(f"expected {len(array)} runs, got {len(runs)}")
    by_row = {run.row: run for run in runs}
    if sorted(by_row) != list(range(len(array))):
        raise ExperimentError("run table is missing rows or has duplicates")
    if any(not run.costs for run in runs):
        raise ExperimentError("every run needs at least one replicate cost")

    if use_sn:
        all_costs = [c for run in runs for c in run.costs]
        if any(c <= 0 for c in all_costs):
            raise ExperimentError("signal-to-noise response requires strictly positive costs")

    response_table: dict[str, list[float]] = {}
    best_levels: dict[str, object] = {}
    best_level_indices: dict[str, int] = {}
    ties: dict[str, bool] = {}
    for f, (name, levels) in enumerate(grid.factors):
        means = []
        for level in range(3):
            costs = [
                c
                for row_idx in range(len(array))
                if array[row_idx, f] == level
                for c in by_row[row_idx].costs
            ]
            if use_sn:
                means.append(-10.0 * np.log10(np.mean(np.square(costs))))
            else:
                means.append(float(np.mean(costs)))
        response_table[name] = means
        target = max(means) if use_sn else min(means)
        winners = [i for i, v in enumerate(means) if v == target]
        best_level_indices[name] = winners[0]
        best_levels[name] = levels[winners[0]]
        ties[name] = len(winners) > 1
    return TuneResult(
        best_levels=best_levels,
        best_level_indices=best_level_indices,
        response_table=response_table,
        ties=ties,
        runs=runs,
    )
