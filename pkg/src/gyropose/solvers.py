"""Minimal relative-pose solvers for a known (IMU-derived) rotation.

With the relative rotation fixed, the epipolar constraint is linear in the
translation, so each correspondence contributes one row
``(R K f(x, lam)) x (K f(x', lam))`` with ``K = diag(1, 1, focal)`` acting on
division-model homogeneous points.  Stacking rows gives ``M t = 0``:

* 2 correspondences, known intrinsics: ``M`` is numeric, ``t`` spans its
  null space (both signs are returned).
* 3 correspondences, unknown focal: ``M(w)`` is 3x3 with quadratic entries;
  ``det M(w) = 0`` is generically a quartic in the focal parameter, solved in
  closed form, and ``t`` is the null direction at each root.
* 4 correspondences, unknown focal + distortion: ``M(w, lam)`` is 4x3; all
  four 3x3 subdeterminants must vanish, giving a bivariate system solved by
  resultant elimination with verification (see :mod:`gyropose.polyroots`).

All solvers work in normalized image coordinates (pixels / norm_scale) and
return focal lengths in that frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSample, ZeroResultant
from .geom import PoseSolution, apply_division, fundamental_from_params
from .polyroots import BiPoly, bivariate_roots, quartic_roots, real_roots_any, trim_coeffs

MIN_SAMPLE = {"2pt": 2, "3pt": 3, "4pt": 4}

# noise-free contract: minimal-sample residuals of returned solutions
SOLVER_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class MinimalProblem:
    """Minimal sample: matched pixel points (principal point at origin) and
    the relative rotation from the IMU."""

    x1: np.ndarray          # (k, 2) pixels, view 1
    x2: np.ndarray          # (k, 2) pixels, view 2
    R: np.ndarray           # (3, 3) relative rotation cam1 -> cam2
    norm_scale: float       # max(image_width, image_height)

    def __post_init__(self):
        object.__setattr__(self, "x1", np.atleast_2d(np.asarray(self.x1, dtype=float)))
        object.__setattr__(self, "x2", np.atleast_2d(np.asarray(self.x2, dtype=float)))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))


@dataclass(frozen=True)
class SolverOutput:
    """Solutions ordered by minimal-sample residual, plus diagnostics."""

    solutions: tuple[PoseSolution, ...]
    residuals: tuple[float, ...]        # max |epipolar residual| on the sample
    nullspace_gaps: tuple[float, ...]   # conditioning of the t recovery
    n_real_roots: int = 0               # real roots of the polynomial system
                                        # before the positive-focal filter


def _canonical_sign(t: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(t)))
    return -t if t[k] < 0 else t


def _normalized_points(p: MinimalProblem) -> tuple[np.ndarray, np.ndarray]:
    s = float(p.norm_scale)
    return p.x1 / s, p.x2 / s


def _sample_residuals(sol: PoseSolution, h1: np.ndarray, h2: np.ndarray) -> float:
    """Max |h2^T F h1| over the minimal sample (points already lifted)."""
    return float(np.abs(np.einsum("ni,ij,nj->n", h2, sol.F, h1)).max())


# ---------------------------------------------------------------------------
# 2-point, calibrated
# ---------------------------------------------------------------------------

def solve_2pt_calibrated(p: MinimalProblem, f_px: float, lam: float = 0.0) -> SolverOutput:
    """Translation direction from two correspondences with known intrinsics.

    Rows (R x_hat_i) x x_hat_i' span the plane orthogonal to t; both signs of
    the null direction are returned and cheirality is left to the caller.
    """
    if p.x1.shape[0] != 2:
        raise DegenerateSample(f"2pt solver needs exactly 2 correspondences, got {p.x1.shape[0]}")
    focal = f_px / p.norm_scale
    n1, n2 = _normalized_points(p)
    K = np.diag([1.0, 1.0, focal])
    h1 = apply_division(n1, lam) @ K      # rows K @ f(x, lam); K diagonal
    h2 = apply_division(n2, lam) @ K
    rows = np.cross(h1 @ p.R.T, h2)
    n = np.cross(rows[0], rows[1])
    row_scale = np.linalg.norm(rows[0]) * np.linalg.norm(rows[1])
    if np.linalg.norm(n) < 1e-12 * max(row_scale, 1e-300):
        raise DegenerateSample("epipolar rows are parallel: translation not unique")
    t = n / np.linalg.norm(n)
    sols = []
    res = []
    for sign in (1.0, -1.0):
        sol = fundamental_from_params(focal, p.R, sign * t, lam)
        sols.append(sol)
        res.append(_sample_residuals(sol, apply_division(n1, lam), apply_division(n2, lam)))
    gap = float(np.linalg.norm(n) / max(row_scale, 1e-300))
    return SolverOutput(tuple(sols), tuple(res), (gap, gap), n_real_roots=1)


# ---------------------------------------------------------------------------
# 3-point, unknown focal
# ---------------------------------------------------------------------------

def build_M_3pt(p: MinimalProblem) -> np.ndarray:
    """Constraint matrix M(w) as an array (row, column, w-power).

    Row i of M(w) is (R diag(1,1,w) x_i) x (diag(1,1,w) x_i') with x the
    normalized homogeneous points, so each entry is a quadratic in w.
    """
    n1, n2 = _normalized_points(p)
    k = n1.shape[0]
    d = p.R[:, 2]                                  # R @ e3
    e3 = np.array([0.0, 0.0, 1.0])
    M = np.zeros((k, 3, 3))
    for i in range(k):
        c = p.R @ np.array([n1[i, 0], n1[i, 1], 0.0])
        cp = np.array([n2[i, 0], n2[i, 1], 0.0])
        M[i, :, 0] = np.cross(c, cp)
        M[i, :, 1] = np.cross(c, e3) + np.cross(d, cp)
        M[i, :, 2] = np.cross(d, e3)
    return M


def det_poly_3pt(M: np.ndarray) -> np.ndarray:
    """Ascending coefficients of det M(w), degree <= 6 before trimming."""
    # cross product of rows 1 and 2 as a vector polynomial, then dot with row 0
    cr = np.zeros((5, 3))
    for a in range(3):
        for b in range(3):
            cr[a + b] += np.cross(M[1, :, a], M[2, :, b])
    det = np.zeros(7)
    for a in range(3):
        for m in range(5):
            det[a + m] += M[0, :, a] @ cr[m]
    return det


def _eval_M(M: np.ndarray, w: float) -> np.ndarray:
    return M[:, :, 0] + w * M[:, :, 1] + w * w * M[:, :, 2]


def _null_from_rows(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Null direction of a rank-2 3x3 matrix via its best row pair."""
    c01 = np.cross(A[0], A[1])
    c02 = np.cross(A[0], A[2])
    c12 = np.cross(A[1], A[2])
    cands = np.stack([c01, c02, c12])
    norms = np.linalg.norm(cands, axis=1)
    k = int(np.argmax(norms))
    if norms[k] == 0.0:
        return np.zeros(3), 0.0
    row_norms = np.linalg.norm(A, axis=1)
    pairs = [(0, 1), (0, 2), (1, 2)]
    a, b = pairs[k]
    gap = norms[k] / max(row_norms[a] * row_norms[b], 1e-300)
    return cands[k] / norms[k], float(gap)


def solve_3pt_focal(p: MinimalProblem) -> SolverOutput:
    """Focal length + translation from three correspondences.

    det M(w) = 0 is solved with the closed-form quartic; positive roots give
    candidate focals, t is the null direction of M at each root, and
    solutions are ordered by their residual on the minimal sample.
    """
    if p.x1.shape[0] != 3:
        raise DegenerateSample(f"3pt solver needs exactly 3 correspondences, got {p.x1.shape[0]}")
    M = build_M_3pt(p)
    det = det_poly_3pt(M)
    entry_scale = max(float(np.abs(M).max()), 1e-300)
    if np.abs(det).max() < 1e-12 * entry_scale ** 3:
        raise DegenerateSample("det M(w) vanishes identically")
    det = trim_coeffs(det, rel_tol=1e-12)
    if det.size - 1 <= 4:
        padded = np.zeros(5)
        padded[: det.size] = det
        roots = quartic_roots(padded)
    else:
        roots = real_roots_any(det)
    n_real = len(roots)

    n1, n2 = _normalized_points(p)
    h1 = apply_division(n1, 0.0)
    h2 = apply_division(n2, 0.0)
    found = []
    for w in roots:
        if w <= 0.0:
            continue
        t, gap = _null_from_rows(_eval_M(M, w))
        if gap == 0.0:
            continue
        sol = fundamental_from_params(w, p.R, _canonical_sign(t))
        found.append((_sample_residuals(sol, h1, h2), gap, sol))
    if not found:
        raise DegenerateSample("no positive real focal root")
    found.sort(key=lambda item: item[0])
    return SolverOutput(
        tuple(s for _, _, s in found),
        tuple(r for r, _, _ in found),
        tuple(g for _, g, _ in found),
        n_real_roots=n_real,
    )


# ---------------------------------------------------------------------------
# 4-point, unknown focal + distortion
# ---------------------------------------------------------------------------

def build_M_4pt(p: MinimalProblem) -> np.ndarray:
    """Constraint matrix M(w, lam) as an array (row, column, w-power, lam-power).

    Row i is (R diag(1,1,w) f(x_i, lam)) x (diag(1,1,w) f(x_i', lam)); every
    entry has degree <= 2 in w and <= 2 in lam, and the lam = 0 slice equals
    the 3-point rows.
    """
    n1, n2 = _normalized_points(p)
    k = n1.shape[0]
    d = p.R[:, 2]
    e3 = np.array([0.0, 0.0, 1.0])
    z = np.cross(d, e3)
    M = np.zeros((k, 3, 3, 3))
    r2 = np.sum(n1 * n1, axis=1)
    rp2 = np.sum(n2 * n2, axis=1)
    for i in range(k):
        c = p.R @ np.array([n1[i, 0], n1[i, 1], 0.0])
        cp = np.array([n2[i, 0], n2[i, 1], 0.0])
        c_e3 = np.cross(c, e3)
        d_cp = np.cross(d, cp)
        M[i, :, 0, 0] = np.cross(c, cp)
        M[i, :, 1, 0] = c_e3 + d_cp
        M[i, :, 1, 1] = rp2[i] * c_e3 + r2[i] * d_cp
        M[i, :, 2, 0] = z
        M[i, :, 2, 1] = (r2[i] + rp2[i]) * z
        M[i, :, 2, 2] = (r2[i] * rp2[i]) * z
    return M


def _conv2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            v = a[i, j]
            if v != 0.0:
                out[i: i + b.shape[0], j: j + b.shape[1]] += v * b
    return out


def subdeterminants_4pt(M: np.ndarray) -> list[BiPoly]:
    """The four 3x3 subdeterminant polynomials of the 4x3 matrix M(w, lam)."""
    # cofactor expansion along the first remaining row, on raw grids; the
    # needed 2x2 row-pair minors are shared between subdeterminants
    minors = {}

    def minor(a, b, c0, c1):
        key = (a, b, c0, c1)
        if key not in minors:
            minors[key] = _conv2(M[a, c0], M[b, c1]) - _conv2(M[a, c1], M[b, c0])
        return minors[key]

    dets = []
    for drop in range(M.shape[0]):
        r = [i for i in range(M.shape[0]) if i != drop]
        d = (_conv2(M[r[0], 0], minor(r[1], r[2], 1, 2))
             - _conv2(M[r[0], 1], minor(r[1], r[2], 0, 2))
             + _conv2(M[r[0], 2], minor(r[1], r[2], 0, 1)))
        dets.append(BiPoly(d).trimmed(rel_tol=1e-12))
    return dets


def _eval_M_4pt(M: np.ndarray, w: float, lam: float) -> np.ndarray:
    pw = np.array([1.0, w, w * w])
    pl = np.array([1.0, lam, lam * lam])
    return np.einsum("rcwl,w,l->rc", M, pw, pl)


def _polish_pair(dets: list[BiPoly], w: float, lam: float) -> tuple[float, float]:
    """One Newton step on (w, lam) against the two best-conditioned subdets."""
    f0, f1 = dets[0], dets[1]
    F = np.array([
        float(np.polynomial.polynomial.polyval2d(w, lam, f0.c)),
        float(np.polynomial.polynomial.polyval2d(w, lam, f1.c)),
    ])
    J = np.array([
        [float(np.polynomial.polynomial.polyval2d(w, lam, f0.d_dw().c)),
         float(np.polynomial.polynomial.polyval2d(w, lam, f0.d_dlam().c))],
        [float(np.polynomial.polynomial.polyval2d(w, lam, f1.d_dw().c)),
         float(np.polynomial.polynomial.polyval2d(w, lam, f1.d_dlam().c))],
    ])
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if abs(det) < 1e-300:
        return w, lam
    dw = (J[1, 1] * F[0] - J[0, 1] * F[1]) / det
    dl = (J[0, 0] * F[1] - J[1, 0] * F[0]) / det
    return w - dw, lam - dl


def solve_4pt_focal_distortion(p: MinimalProblem, polish: bool = False) -> SolverOutput:
    """Focal length, distortion and translation from four correspondences.

    The four subdeterminants of M(w, lam) are solved jointly by resultant
    elimination with w = 0 saturation; positive-focal roots are kept, t is the
    least-squares null direction of the full 4x3 M at each root, and solutions
    are ordered by minimal-sample residual.  ``polish`` applies one Newton
    step on (w, lam) before recovering t (off by default).
    """
    if p.x1.shape[0] != 4:
        raise DegenerateSample(f"4pt solver needs exactly 4 correspondences, got {p.x1.shape[0]}")
    M = build_M_4pt(p)
    dets = subdeterminants_4pt(M)
    norms = [d.max_abs for d in dets]
    if max(norms) < 1e-14 * max(float(np.abs(M).max()), 1e-300) ** 3:
        raise DegenerateSample("all subdeterminants vanish identically")
    order = sorted(range(4), key=lambda i: -norms[i])
    # primary pair: largest coefficient norms; fall back to the other pairs
    # when elimination degenerates on a particular choice
    pair_choices = [(a, b) for k, a in enumerate(order) for b in order[k + 1:]]
    pairs: list[tuple[float, float]] = []
    last_error: Exception | None = None
    for primary in pair_choices:
        try:
            pairs = bivariate_roots(dets, primary_pair=primary)
        except ZeroResultant as e:
            last_error = e
            continue
        if pairs:
            break
    if not pairs:
        raise DegenerateSample(f"elimination found no roots ({last_error or 'empty system'})")
    n_real = len(pairs)

    n1, n2 = _normalized_points(p)
    found = []
    for w, lam in pairs:
        if polish:
            w, lam = _polish_pair([dets[primary[0]], dets[primary[1]]], w, lam)
        if w <= 0.0:
            continue
        A = _eval_M_4pt(M, w, lam)
        _, s, vt = np.linalg.svd(A)
        t = _canonical_sign(vt[-1])
        gap = float(s[2] / max(s[1], 1e-300))
        sol = fundamental_from_params(w, p.R, t, lam)
        h1 = apply_division(n1, lam)
        h2 = apply_division(n2, lam)
        found.append((_sample_residuals(sol, h1, h2), gap, sol))
    if not found:
        raise DegenerateSample("no verified root with positive focal length")
    found.sort(key=lambda item: item[0])
    return SolverOutput(
        tuple(s for _, _, s in found),
        tuple(r for r, _, _ in found),
        tuple(g for _, g, _ in found),
        n_real_roots=n_real,
    )


def solve(kind: str, p: MinimalProblem, f_px: float | None = None,
          lam: float = 0.0, polish: bool = False) -> SolverOutput:
    """Dispatch by solver kind ("2pt" needs f_px; lam optional)."""
    if kind == "2pt":
        if f_px is None:
            raise ValueError("2pt solver requires a known focal length")
        return solve_2pt_calibrated(p, f_px, lam)
    if kind == "3pt":
        return solve_3pt_focal(p)
    if kind == "4pt":
        return solve_4pt_focal_distortion(p, polish=polish)
    raise ValueError(f"unknown solver kind {kind!r}")
