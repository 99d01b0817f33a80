"""Counter ranking via ensemble orthogonal matching pursuit.

Given a run-by-counter matrix and a target metric (e.g. runtime), find the
sparse set of counters that best explains the target: minimize
``||t - D a||^2`` subject to at most kappa nonzero entries of ``a``.  The
greedy solver picks the column most correlated with the residual at each
step; the ensemble variant instead samples from the top-tau candidates in
proportion to |correlation| and aggregates selections across passes.

Columns are z-scored and the target centered here, so correlation-based
selection is scale-free.  The residual stopping tolerance is relative to
||t||, which keeps rankings invariant under positive rescaling of the
target.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _omp_kernels
from .errors import ConfigError, DegenerateMatrixWarning, OpalWarning
from .ingest import CounterDataset, CounterDictionary

DEFAULT_KAPPA = 5
DEFAULT_TAU = 3
DEFAULT_ENSEMBLE_SIZE = 32
DEFAULT_RESIDUAL_TOL = 1e-8
DEFAULT_TOP_K = 5

MISSING_DESCRIPTION = "no description available for {name}"


@dataclass(frozen=True)
class OmpConfig:
    kappa: int = DEFAULT_KAPPA
    tau: int = DEFAULT_TAU
    ensemble_size: int = DEFAULT_ENSEMBLE_SIZE
    seed: int = 0
    residual_tol: float = DEFAULT_RESIDUAL_TOL

    def __post_init__(self):
        if self.kappa < 1:
            raise ConfigError(f"kappa must be >= 1, got {self.kappa}")
        if self.tau < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if self.ensemble_size < 1:
            raise ConfigError(f"ensemble_size must be >= 1, got {self.ensemble_size}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if not self.residual_tol > 0:
            raise ConfigError(f"residual_tol must be > 0, got {self.residual_tol}")


@dataclass(frozen=True)
class RankedCounter:
    counter_name: str
    score: float
    mean_coefficient: float
    selection_frequency: float


@dataclass
class ImportanceResult:
    ranked: list[RankedCounter]
    top_k: list[RankedCounter]
    residual_norm: float

    def to_dict(self) -> dict:
        return {
            "ranked": [
                {
                    "counter": r.counter_name,
                    "score": r.score,
                    "mean_coefficient": r.mean_coefficient,
                    "selection_frequency": r.selection_frequency,
                }
                for r in self.ranked
            ],
            "residual_norm": self.residual_norm,
        }


def standardize(values: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Z-score columns and center the target; zero-variance columns become 0."""
    values = np.asarray(values, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return (values - mean) / std, target - target.mean()


def _run_pass(values, target, kappa, tau, residual_tol, uniforms):
    dt = np.ascontiguousarray(values.T)
    support, coef, n_sel, dropped, n_drop, residual_norm = _omp_kernels.greedy_pass(
        dt, np.ascontiguousarray(target), kappa, tau, residual_tol, uniforms
    )
    if n_drop:
        warnings.warn(
            f"rank-deficient column(s) {dropped[:n_drop].tolist()} dropped during pursuit",
            DegenerateMatrixWarning,
            stacklevel=3,
        )
    return support[:n_sel].copy(), coef[:n_sel].copy(), residual_norm


def omp_solve(
    values: np.ndarray,
    target: np.ndarray,
    kappa: int,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic greedy pursuit (argmax correlation at each step).

    Expects standardized columns and a centered target (see ``standardize``).
    Returns the selected column indices in selection order and the
    least-squares coefficients restricted to them.  Stops early once the
    residual norm falls to ``residual_tol * ||t||``.
    """
    values = np.asarray(values, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if values.ndim != 2 or target.ndim != 1 or values.shape[0] != target.shape[0]:
        raise ConfigError("values must be N x C and target length N")
    if not 1 <= kappa <= values.shape[1]:
        raise ConfigError(f"kappa must be in [1, {values.shape[1]}], got {kappa}")
    uniforms = np.zeros(values.shape[1])
    support, coef, _ = _run_pass(values, target, kappa, 1, residual_tol, uniforms)
    return support, coef


def ensemble_omp(
    values: np.ndarray,
    target: np.ndarray,
    config: OmpConfig = OmpConfig(),
    counter_names: list[str] | None = None,
    top_k: int = DEFAULT_TOP_K,
) -> ImportanceResult:
    """Randomized pursuit ensemble; ranks every counter by explanatory weight.

    Runs ``ensemble_size`` passes with per-pass seeds ``seed + pass_index``.
    Each counter's score is its selection frequency times its mean absolute
    coefficient (normalized by the largest), min-max scaled to [0, 1]; ties
    rank alphabetically.  Deterministic given the config seed.
    """
    values = np.asarray(values, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if values.ndim != 2 or target.ndim != 1 or values.shape[0] != target.shape[0]:
        raise ConfigError("values must be N x C and target length N")
    n_counters = values.shape[1]
    if config.kappa > n_counters:
        raise ConfigError(f"kappa {config.kappa} exceeds counter count {n_counters}")
    if counter_names is None:
        counter_names = [f"c{j}" for j in range(n_counters)]
    if len(counter_names) != n_counters:
        raise ConfigError("counter_names length must match the number of columns")

    z_values, z_target = standardize(values, target)

    selections = np.zeros(n_counters, dtype=np.int64)
    abs_coef_sums = np.zeros(n_counters)
    coef_sums = np.zeros(n_counters)
    for e in range(config.ensemble_size):
        rng = np.random.default_rng(config.seed + e)
        uniforms = rng.random(n_counters)
        support, coef, _ = _run_pass(
            z_values, z_target, config.kappa, config.tau, config.residual_tol, uniforms
        )
        for idx, j in enumerate(support):
            selections[j] += 1
            abs_coef_sums[j] += abs(coef[idx])
            coef_sums[j] += coef[idx]

    frequency = selections / config.ensemble_size
    mean_abs = np.where(selections > 0, abs_coef_sums / np.maximum(selections, 1), 0.0)
    mean_coef = np.where(selections > 0, coef_sums / np.maximum(selections, 1), 0.0)
    max_abs = mean_abs.max() if n_counters else 0.0
    normalized_abs = mean_abs / max_abs if max_abs > 0 else np.zeros(n_counters)
    raw_scores = frequency * normalized_abs

    lo, hi = raw_scores.min(), raw_scores.max()
    if hi > lo:
        scores = (raw_scores - lo) / (hi - lo)
    else:
        scores = np.full(n_counters, 1.0 if hi > 0 else 0.0)

    ranked = sorted(
        (
            RankedCounter(
                counter_name=counter_names[j],
                score=float(scores[j]),
                mean_coefficient=float(mean_coef[j]),
                selection_frequency=float(frequency[j]),
            )
            for j in range(n_counters)
        ),
        key=lambda r: (-r.score, r.counter_name),
    )

    # residual of the deterministic greedy fit, for the serialized report
    _, _, residual_norm = _run_pass(
        z_values, z_target, config.kappa, 1, config.residual_tol, np.zeros(n_counters)
    )
    return ImportanceResult(
        ranked=ranked, top_k=ranked[: max(top_k, 0)], residual_norm=float(residual_norm)
    )


def rank_counters(
    dataset: CounterDataset, config: OmpConfig = OmpConfig(), top_k: int = DEFAULT_TOP_K
) -> ImportanceResult:
    """Rank a parsed counter dataset (clamps kappa to the column count)."""
    kappa = min(config.kappa, dataset.n_counters)
    if kappa != config.kappa:
        config = OmpConfig(
            kappa=kappa,
            tau=config.tau,
            ensemble_size=config.ensemble_size,
            seed=config.seed,
            residual_tol=config.residual_tol,
        )
    return ensemble_omp(
        dataset.values, dataset.target, config, counter_names=dataset.counter_names, top_k=top_k
    )


def summarize_counters(
    result: ImportanceResult,
    dictionary: CounterDictionary,
    k: int = DEFAULT_TOP_K,
) -> list[tuple[str, str, float]]:
    """Attach one-line descriptions to the top-k selected counters.

    Counters the ensemble never selected carry no signal and are skipped.
    A counter missing from the dictionary gets a fallback line and a warning.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    top = [r for r in result.ranked if r.selection_frequency > 0][:k]
    out: list[tuple[str, str, float]] = []
    for entry in top:
        description = dictionary.describe(entry.counter_name)
        if description is None:
            description = MISSING_DESCRIPTION.format(name=entry.counter_name)
            warnings.warn(
                f"counter {entry.counter_name!r} missing from the dictionary",
                OpalWarning,
                stacklevel=2,
            )
        out.append((entry.counter_name, description, entry.score))
    return out
