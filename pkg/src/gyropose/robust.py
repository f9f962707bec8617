"""RANSAC over the minimal solvers, plus histogram voting for distortion.

Scoring uses squared Sampson distances on division-model-undistorted
normalized points; the pixel threshold is converted with norm_scale.  The
translation sign of each candidate is fixed by a cheirality vote and
candidates whose inliers fail the cheirality fraction are rejected.  Results
are bitwise deterministic for a fixed seed and input order (per-trial
generators are derived from (seed, trial_index)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyInput, NoModelFound, TooFewCorrespondences
from .geom import PoseSolution, cheirality_inliers, sampson_sq
from .solvers import MIN_SAMPLE, MinimalProblem, solve
from .errors import DegenerateSample


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 1000
    threshold_px: float = 1.0          # Sampson distance threshold, pixels
    seed: int = 0
    solver_kind: str = "3pt"
    min_cheirality_fraction: float = 0.5
    adaptive: bool = False             # optional early exit (inlier-ratio rule)
    confidence: float = 0.9999         # only used when adaptive
    polish: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.threshold_px <= 0:
            raise ValueError("threshold_px must be > 0")
        if self.solver_kind not in MIN_SAMPLE:
            raise ValueError(f"unknown solver kind {self.solver_kind!r}")


@dataclass(frozen=True)
class RansacResult:
    best: PoseSolution
    inlier_mask: np.ndarray
    score: int
    trials_run: int


def _flip_t(sol: PoseSolution) -> PoseSolution:
    return replace(sol, t=-sol.t, F=-sol.F)


def ransac_estimate(x1, x2, R, norm_scale: float, config: RansacConfig,
                    f_px: float | None = None, lam_known: float = 0.0,
                    sample_pool: int | None = None) -> RansacResult:
    """Robust relative-pose estimate over all correspondences.

    ``sample_pool`` restricts minimal samples to the first N correspondences
    while scoring all of them (used by invariance tests); default is all.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    n = x1.shape[0]
    k = MIN_SAMPLE[config.solver_kind]
    if n < k:
        raise TooFewCorrespondences(f"{config.solver_kind} needs >= {k} correspondences, got {n}")
    pool = n if sample_pool is None else min(sample_pool, n)
    if pool < k:
        raise TooFewCorrespondences(f"sample pool {pool} smaller than minimal sample {k}")
    thr2 = (config.threshold_px / norm_scale) ** 2

    best_sol: PoseSolution | None = None
    best_mask = None
    best_score = -1
    best_mean = math.inf
    trials = 0
    needed = config.iterations

    for trial in range(config.iterations):
        if config.adaptive and trial >= needed:
            break
        trials += 1
        rng = np.random.default_rng((config.seed, trial))
        idx = rng.choice(pool, size=k, replace=False)
        prob = MinimalProblem(x1[idx], x2[idx], R, norm_scale)
        try:
            out = solve(config.solver_kind, prob, f_px=f_px, lam=lam_known,
                        polish=config.polish)
        except DegenerateSample:
            continue
        for sol in out.solutions:
            d = sampson_sq(sol, x1, x2, norm_scale)
            mask = d <= thr2
            score = int(np.count_nonzero(mask))
            if score == 0 or score < best_score:
                continue
            inl_mean = float(d[mask].mean())
            if score == best_score and inl_mean >= best_mean:
                continue
            # sign disambiguation + cheirality gate, on the inliers only
            pos = cheirality_inliers(sol, x1[mask], x2[mask], norm_scale)
            neg = cheirality_inliers(_flip_t(sol), x1[mask], x2[mask], norm_scale)
            if neg > pos:
                sol, pos = _flip_t(sol), neg
            if pos < config.min_cheirality_fraction * score:
                continue
            best_sol, best_mask, best_score, best_mean = sol, mask, score, inl_mean
            if config.adaptive:
                ratio = best_score / n
                if ratio >= 1.0:
                    needed = trial + 1
                else:
                    fail = 1.0 - ratio ** k
                    if fail <= 0.0:
                        needed = trial + 1
                    elif fail < 1.0:
                        est = math.log(1.0 - config.confidence) / math.log(fail)
                        needed = min(config.iterations, max(trial + 1, int(math.ceil(est))))
    if best_sol is None:
        raise NoModelFound("no RANSAC trial produced an acceptable model")
    return RansacResult(best=best_sol, inlier_mask=best_mask, score=best_score,
                        trials_run=trials)


# ---------------------------------------------------------------------------
# histogram voting for the distortion parameter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaHistogram:
    bin_width: float
    bin_start: float
    counts: np.ndarray
    mode_lambda: float

    @property
    def centers(self) -> np.ndarray:
        return self.bin_start + (np.arange(self.counts.size) + 0.5) * self.bin_width


def histogram_vote_lambda(lambdas, bin_width: float = 0.02) -> LambdaHistogram:
    """Mode of per-pair distortion estimates over fixed-width bins.

    Bins cover [min, max] of the inputs; ties between maximal bins are broken
    toward the center with the smaller |lambda|.
    """
    vals = np.asarray(list(lambdas), dtype=float)
    if vals.size == 0:
        raise EmptyInput("histogram voting needs at least one estimate")
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    lo = float(vals.min())
    hi = float(vals.max())
    n_bins = max(1, int(math.ceil((hi - lo) / bin_width - 1e-12)))
    idx = np.clip(((vals - lo) / bin_width).astype(int), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    top = counts.max()
    centers = lo + (np.arange(n_bins) + 0.5) * bin_width
    tied = np.nonzero(counts == top)[0]
    mode_bin = min(tied, key=lambda i: (abs(centers[i]), centers[i]))
    return LambdaHistogram(bin_width=bin_width, bin_start=lo, counts=counts,
                           mode_lambda=float(centers[mode_bin]))
