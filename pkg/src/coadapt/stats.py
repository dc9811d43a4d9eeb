"""Run aggregation: interquartile mean, bootstrap intervals, probability of improvement."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from coadapt.exceptions import DomainError

__all__ = ["RunScores", "iqm", "percentile_bootstrap_ci", "prob_improvement"]


@dataclass(frozen=True)
class RunScores:
    """Per-task tuples of per-seed scores."""

    scores: dict

    def __post_init__(self):
        clean = {}
        for task, vals in self.scores.items():
            arr = tuple(float(v) for v in vals)
            if not arr:
                raise DomainError(f"task {task!r} has no scores")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"task {task!r} has non-finite scores")
            clean[task] = arr
        if not clean:
            raise DomainError("need at least one task")
        object.__setattr__(self, "scores", clean)

    @property
    def tasks(self):
        return tuple(sorted(self.scores, key=str))

    def all_scores(self):
        return [v for t in self.tasks for v in self.scores[t]]


def _trimmed_sorted(sorted_vals):
    n = sorted_vals.shape[-1]
    k = n // 4
    return sorted_vals[..., k:n - k]


def iqm(values):
    """Mean after dropping ``floor(n/4)`` values from each end of the sorted sample."""
    vals = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if vals.size == 0:
        raise DomainError("iqm of an empty sample")
    kept = _trimmed_sorted(vals)
    # Clipping keeps constant samples exact despite summation rounding.
    return float(np.clip(kept.mean(), kept[0], kept[-1]))


def percentile_bootstrap_ci(values, resamples=10_000, level=0.95, rng=None):
    """Percentile interval for the IQM from ``resamples`` draws with replacement.

    Parameters
    ----------
    values : array_like
        Pooled scores.
    resamples : int
        At least 100.
    level : float
        Coverage in (0, 1).
    rng : numpy.random.Generator or int
        Seeded generator (or seed); required so results are reproducible.
    """
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.size == 0:
        raise DomainError("bootstrap of an empty sample")
    if resamples < 100:
        raise DomainError("need at least 100 resamples")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    if rng is None:
        raise DomainError("a seeded generator is required")
    rng = np.random.default_rng(rng)
    n = vals.size
    stats = np.empty(resamples)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, resamples, chunk):
        stop = min(resamples, start + chunk)
        draw = np.sort(vals[rng.integers(0, n, size=(stop - start, n))], axis=1)
        stats[start:stop] = _trimmed_sorted(draw).mean(axis=1)
    lo, hi = np.percentile(stats, [50.0 * (1.0 - level), 50.0 * (1.0 + level)])
    bounds = (vals.min(), vals.max())
    return float(np.clip(lo, *bounds)), float(np.clip(hi, *bounds))


def _as_scores(x):
    return x if isinstance(x, RunScores) else RunScores(dict(x))


def _pairwise_fraction(xs, ys):
    x = np.asarray(xs)[:, None]
    y = np.asarray(ys)[None, :]
    twice = 2 * int(np.sum(y < x)) + int(np.sum(y == x))
    return Fraction(twice, 2 * x.size * y.size)


def prob_improvement(x, y):
    """Probability that a run of ``x`` beats a run of ``y``, averaged over tasks.

    Per task this is the Mann-Whitney statistic with ties counted as one
    half. The average is formed exactly in rationals and the smaller of
    ``p`` and ``1 - p`` is rounded first, so swapping the arguments gives
    values that sum to exactly 1.
    """
    x = _as_scores(x)
    y = _as_scores(y)
    if set(x.scores) != set(y.scores):
        raise DomainError("both score sets must cover the same tasks")
    total = sum((_pairwise_fraction(x.scores[t], y.scores[t]) for t in x.tasks), Fraction(0))
    p = total / len(x.tasks)
    if p <= Fraction(1, 2):
        return float(p)
    return 1.0 - float(1 - p)
