"""Two-view geometry core: rotations, division-model lens, epipolar algebra.

Conventions used throughout the package:

* Image points are pixel coordinates with the principal point at the origin
  (callers subtract the image center).  All solver math runs on points
  divided by ``norm_scale = max(image_width, image_height)``.
* ``focal`` always means the focal length in those normalized units,
  i.e. ``f_pixels / norm_scale``.
* The radial distortion coefficient ``lam`` of the one-parameter division
  model is expressed in the normalized frame; ``lambda_norm_to_px`` converts.
* The relative rotation ``R`` maps camera-1 coordinates into camera-2
  coordinates, and the epipolar geometry is ``x2^T F x1 = 0`` with
  ``F = diag(1,1,focal) [t]x R diag(1,1,focal)`` acting on homogeneous
  division-model points ``(x, y, 1 + lam r^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroFocal, ZeroTranslation

# Gradient magnitude below which a Sampson score is meaningless.
DEGENERATE_JACOBIAN_TOL = 1e-14


# ---------------------------------------------------------------------------
# rotations / quaternions
# ---------------------------------------------------------------------------

def skew(t) -> np.ndarray:
    """Cross-product matrix: skew(t) @ v == cross(t, v)."""
    t = np.asarray(t, dtype=float)
    return np.array([
        [0.0, -t[2], t[1]],
        [t[2], 0.0, -t[0]],
        [-t[1], t[0], 0.0],
    ])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product; quat_to_mat(quat_mul(a, b)) == quat_to_mat(a) @ quat_to_mat(b)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_exp(rotvec) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle, radians)."""
    v = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-300:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    s = np.sin(half) / angle
    return np.array([np.cos(half), v[0] * s, v[1] * s, v[2] * s])


def quat_to_mat(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (normalized Gaussian quaternion)."""
    q = rng.standard_normal(4)
    return quat_to_mat(q)


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("zero rotation axis")
    return quat_to_mat(quat_exp(axis * (angle_rad / n)))


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (np.abs(R.T @ R - np.eye(3)).max() < tol
            and abs(np.linalg.det(R) - 1.0) < tol)


def relative_rotation(R1, R2) -> np.ndarray:
    """Relative rotation R2 @ R1.T (both world->camera)."""
    return np.asarray(R2, dtype=float) @ np.asarray(R1, dtype=float).T


def rotation_angle_deg(Ra, Rb=None) -> float:
    """Geodesic angle between two rotations (or of one, vs identity), degrees."""
    R = np.asarray(Ra, dtype=float)
    if Rb is not None:
        R = R @ np.asarray(Rb, dtype=float).T
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


# ---------------------------------------------------------------------------
# division model
# ---------------------------------------------------------------------------

def apply_division(xy, lam: float) -> np.ndarray:
    """Homogeneous lift (x, y) -> (x, y, 1 + lam*(x^2+y^2)); vectorized over (..., 2)."""
    xy = np.asarray(xy, dtype=float)
    r2 = np.sum(xy * xy, axis=-1, keepdims=True)
    return np.concatenate([xy, 1.0 + lam * r2], axis=-1)


def undistort_division(xy, lam: float) -> np.ndarray:
    """Map observed (distorted) points to pinhole points, same units."""
    xy = np.asarray(xy, dtype=float)
    r2 = np.sum(xy * xy, axis=-1, keepdims=True)
    return xy / (1.0 + lam * r2)


def distort_division(xy, lam: float, tol: float = 1e-14, max_iter: int = 8) -> np.ndarray:
    """Inverse of :func:`undistort_division`: pinhole points -> observed points.

    Solves the scalar radial equation r_d / (1 + lam r_d^2) = r_u per point:
    the stable branch of the quadratic seeds a Newton refinement to 1e-14.
    For barrel distortion (lam <= 0) every pinhole radius has a preimage
    below the model's pole; pincushion radii past the fold come back as inf.
    """
    xy = np.asarray(xy, dtype=float)
    if lam == 0.0:
        return xy.copy()
    ru = np.sqrt(np.sum(xy * xy, axis=-1))
    disc = 1.0 - 4.0 * lam * ru * ru
    invalid = disc < 0.0
    rd = 2.0 * ru / (1.0 + np.sqrt(np.maximum(disc, 0.0)))
    for _ in range(max_iter):
        denom = 1.0 + lam * rd * rd
        g = rd / denom - ru
        dg = (1.0 - lam * rd * rd) / (denom * denom)
        safe = np.abs(dg) > 1e-300
        step = np.where(safe, g / np.where(safe, dg, 1.0), 0.0)
        rd = rd - step
        if np.all(np.abs(step) <= tol * np.maximum(1.0, np.abs(rd))):
            break
    scale = np.where(ru > 0, rd / np.where(ru > 0, ru, 1.0), 1.0)
    out = xy * scale[..., None]
    if np.any(invalid):
        out = np.where(invalid[..., None], np.inf, out)
    return out


def lambda_norm_to_px(lam_norm: float, norm_scale: float) -> float:
    """Distortion coefficient from normalized frame to pixel frame."""
    return lam_norm / (norm_scale * norm_scale)


def lambda_px_to_norm(lam_px: float, norm_scale: float) -> float:
    return lam_px * norm_scale * norm_scale


# ---------------------------------------------------------------------------
# pose solutions and epipolar algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseSolution:
    """Candidate relative-pose model in the normalized image frame.

    focal: focal length / norm_scale; lam: division-model coefficient
    (None for calibrated models); t: unit translation direction; R: the
    relative rotation the model was built with; F: fundamental matrix for
    normalized homogeneous points.
    """

    focal: float
    t: np.ndarray
    R: np.ndarray
    F: np.ndarray
    lam: float | None = None

    @property
    def lam_or_zero(self) -> float:
        return 0.0 if self.lam is None else self.lam

    def focal_px(self, norm_scale: float) -> float:
        return self.focal * norm_scale


def fundamental_from_params(focal: float, R, t, lam: float | None = None) -> PoseSolution:
    """Assemble F = diag(1,1,focal) [t]x R diag(1,1,focal) with unit t."""
    if abs(focal) < 1e-14:
        raise ZeroFocal(f"focal {focal} too small")
    t = np.asarray(t, dtype=float)
    n = np.linalg.norm(t)
    if n < 1e-14:
        raise ZeroTranslation("translation norm below 1e-14")
    t = t / n
    R = np.asarray(R, dtype=float)
    Q = np.diag([1.0, 1.0, float(focal)])
    F = Q @ skew(t) @ R @ Q
    return PoseSolution(focal=float(focal), t=t, R=R, F=F, lam=lam)


def _normalized(points_px, norm_scale: float) -> np.ndarray:
    return np.asarray(points_px, dtype=float) / float(norm_scale)


def epipolar_residuals(sol: PoseSolution, x1_px, x2_px, norm_scale: float) -> np.ndarray:
    """Algebraic residuals f(x2,lam)^T F f(x1,lam), one per correspondence."""
    lam = sol.lam_or_zero
    h1 = apply_division(_normalized(np.atleast_2d(x1_px), norm_scale), lam)
    h2 = apply_division(_normalized(np.atleast_2d(x2_px), norm_scale), lam)
    return np.einsum("ni,ij,nj->n", h2, sol.F, h1)


def epipolar_residual(sol: PoseSolution, x1_px, x2_px, norm_scale: float) -> float:
    return float(epipolar_residuals(sol, x1_px, x2_px, norm_scale)[0])


def sampson_sq(sol: PoseSolution, x1_px, x2_px, norm_scale: float) -> np.ndarray:
    """Squared Sampson distances (normalized units^2) on undistorted points.

    First-order geometric error eps^2 / ||grad||^2.  Points whose four
    epipolar-line gradient terms all vanish cannot be scored and get +inf.
    """
    lam = sol.lam_or_zero
    p1 = undistort_division(_normalized(np.atleast_2d(x1_px), norm_scale), lam)
    p2 = undistort_division(_normalized(np.atleast_2d(x2_px), norm_scale), lam)
    h1 = np.concatenate([p1, np.ones((len(p1), 1))], axis=1)
    h2 = np.concatenate([p2, np.ones((len(p2), 1))], axis=1)
    Fx1 = h1 @ sol.F.T          # rows: F @ h1
    Ftx2 = h2 @ sol.F           # rows: F.T @ h2
    eps = np.sum(h2 * Fx1, axis=1)
    denom = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    bad = denom < DEGENERATE_JACOBIAN_TOL ** 2
    out = np.empty(len(eps))
    out[bad] = np.inf
    good = ~bad
    out[good] = eps[good] ** 2 / denom[good]
    return out


def triangulate_midpoint(sol: PoseSolution, x1_px, x2_px, norm_scale: float):
    """Midpoint triangulation; returns (depths in cam1, depths in cam2)."""
    lam = sol.lam_or_zero
    p1 = undistort_division(_normalized(np.atleast_2d(x1_px), norm_scale), lam)
    p2 = undistort_division(_normalized(np.atleast_2d(x2_px), norm_scale), lam)
    f = sol.focal
    d1 = np.concatenate([p1, np.full((len(p1), 1), f)], axis=1)
    d2 = np.concatenate([p2, np.full((len(p2), 1), f)], axis=1)
    R, t = sol.R, sol.t
    c2 = -R.T @ t                     # camera-2 center in cam1 coordinates
    m = d2 @ R                        # rows: R.T @ d2
    # least-squares s1*d1 - s2*m ~= c2, one 2x2 system per point
    a11 = np.sum(d1 * d1, axis=1)
    a12 = -np.sum(d1 * m, axis=1)
    a22 = np.sum(m * m, axis=1)
    b1 = d1 @ c2
    b2 = -(m @ c2)
    det = a11 * a22 - a12 * a12
    det = np.where(np.abs(det) < 1e-300, np.nan, det)
    s1 = (b1 * a22 - a12 * b2) / det
    s2 = (a11 * b2 - a12 * b1) / det
    X = 0.5 * (s1[:, None] * d1 + c2[None, :] + s2[:, None] * m)
    z1 = X[:, 2]
    z2 = X @ R[2] + t[2]
    return z1, z2


def cheirality_inliers(sol: PoseSolution, x1_px, x2_px, norm_scale: float) -> int:
    """Number of correspondences triangulating in front of both cameras."""
    x1 = np.atleast_2d(np.asarray(x1_px, dtype=float))
    if x1.size == 0:
        return 0
    z1, z2 = triangulate_midpoint(sol, x1_px, x2_px, norm_scale)
    ok = (z1 > 0) & (z2 > 0)
    return int(np.count_nonzero(ok & np.isfinite(z1) & np.isfinite(z2)))
