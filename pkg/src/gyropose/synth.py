"""Synthetic scenes, noise models, error metrics and experiment runners.

Scene generation mirrors the standard minimal-solver benchmark: scene points
uniform in a box with lateral extent [-3, 3] and depth [3, 8], focal length
uniform in [300, 3000] px, cameras with random orientations facing the scene,
and observed pixels produced by forward projection followed by the inverse
division-model map.  Every generated instance satisfies its own epipolar
constraints to machine precision, which is what the solver tests are built
on.  All runners are deterministic given (seed, config): per-trial generators
are derived from (seed, solver_tag, trial_index).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateSample, GenerationFailed
from .geom import (
    PoseSolution,
    apply_division,
    distort_division,
    fundamental_from_params,
    quat_exp,
    quat_to_mat,
    rotation_about_axis,
    rotation_angle_deg,
)
from .solvers import MIN_SAMPLE, MinimalProblem, solve

SOLVER_TAGS = {"2pt": 2, "3pt": 3, "4pt": 4}
PIXEL_NOISE_REF = 1080.0   # sigma = 1080 / f pixels, relative-noise model


@dataclass(frozen=True)
class SceneConfig:
    x_range: tuple[float, float] = (-3.0, 3.0)
    z_range: tuple[float, float] = (-3.0, 3.0)
    y_range: tuple[float, float] = (3.0, 8.0)        # depth band of the scene
    f_range: tuple[float, float] = (300.0, 3000.0)   # pixels
    lambda_range: tuple[float, float] = (-0.9, 0.0)  # normalized frame
    baseline_range: tuple[float, float] = (0.1, 2.0)
    n_points: int = 100
    image_size: int = 1080                           # square image, pixels
    seed: int = 0

    @property
    def norm_scale(self) -> float:
        return float(self.image_size)


@dataclass(frozen=True)
class NoiseConfig:
    pixel_sigma_mode: str = "none"      # "none" | "relative" (sigma = 1080/f px)
    imu_angle_sigma_deg: float = 0.0    # applied to all three axes

    def __post_init__(self):
        if self.pixel_sigma_mode not in ("none", "relative"):
            raise ValueError(f"unknown pixel_sigma_mode {self.pixel_sigma_mode!r}")
        if self.imu_angle_sigma_deg < 0:
            raise ValueError("imu_angle_sigma_deg must be >= 0")


@dataclass(frozen=True)
class Instance:
    """Ground-truth two-view instance with observed (distorted) pixels."""

    x1: np.ndarray           # (n, 2) observed pixels, view 1 (center origin)
    x2: np.ndarray
    R_rel: np.ndarray        # cam1 -> cam2
    t_rel: np.ndarray        # unit translation direction
    focal_px: float
    lam: float               # normalized-frame division coefficient
    norm_scale: float
    points_w: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray

    @property
    def focal_norm(self) -> float:
        return self.focal_px / self.norm_scale

    def gt_solution(self) -> PoseSolution:
        return fundamental_from_params(self.focal_norm, self.R_rel, self.t_rel, self.lam)


def look_at(center, target, roll_rad: float = 0.0) -> np.ndarray:
    """World->camera rotation with the optical axis toward target."""
    center = np.asarray(center, dtype=float)
    z = np.asarray(target, dtype=float) - center
    nz = np.linalg.norm(z)
    if nz == 0.0:
        raise ValueError("camera center coincides with target")
    z = z / nz
    up = np.array([0.0, 0.0, 1.0])
    if abs(z @ up) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    x = np.cross(up, z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    if roll_rad != 0.0:
        R = rotation_about_axis([0.0, 0.0, 1.0], roll_rad) @ R
    return R


def _project(R, C, f_px, lam, norm_scale, pts_w):
    """Project world points; returns (observed px, depths) or None if outside."""
    pc = (pts_w - C) @ R.T
    z = pc[:, 2]
    if np.any(z <= 1e-6):
        return None
    pinhole_norm = (f_px / norm_scale) * pc[:, :2] / z[:, None]
    obs_norm = distort_division(pinhole_norm, lam)
    obs_px = obs_norm * norm_scale
    half = norm_scale / 2.0
    if np.any(np.abs(obs_px) > half):
        return None
    return obs_px, z


def generate_instance(cfg: SceneConfig, rng: np.random.Generator,
                      lam: float | None = None, n_points: int | None = None,
                      max_attempts: int = 1000) -> Instance:
    """Random instance with all points visible and in front of both cameras.

    Cameras sit on a random shell around the scene whose radius scales with
    the focal length (a narrow field of view needs distance for the point box
    to fit the image) and face a jittered scene centroid with random roll;
    the baseline between them is drawn from cfg.baseline_range.
    """
    n = cfg.n_points if n_points is None else n_points
    f_px = rng.uniform(*cfg.f_range)
    lam_val = rng.uniform(*cfg.lambda_range) if lam is None else float(lam)
    s = cfg.norm_scale
    f_norm = f_px / s
    centroid = np.array([
        0.5 * (cfg.x_range[0] + cfg.x_range[1]),
        0.5 * (cfg.y_range[0] + cfg.y_range[1]),
        0.5 * (cfg.z_range[0] + cfg.z_range[1]),
    ])
    half = np.array([
        0.5 * (cfg.x_range[1] - cfg.x_range[0]),
        0.5 * (cfg.y_range[1] - cfg.y_range[0]),
        0.5 * (cfg.z_range[1] - cfg.z_range[0]),
    ])
    radius = float(np.linalg.norm(half))
    # distance at which the whole box fits the image with ~10% margin
    d_fit = radius + f_norm * radius / 0.45
    for _ in range(max_attempts):
        pts = centroid + rng.uniform(-1.0, 1.0, size=(n, 3)) * half
        dir1 = rng.standard_normal(3)
        dir1 /= np.linalg.norm(dir1)
        C1 = centroid + d_fit * rng.uniform(1.0, 1.1) * dir1
        b_dir = rng.standard_normal(3)
        b_dir /= np.linalg.norm(b_dir)
        C2 = C1 + rng.uniform(*cfg.baseline_range) * b_dir
        jitter = 0.05 * radius
        try:
            R1 = look_at(C1, centroid + rng.uniform(-jitter, jitter, 3),
                         rng.uniform(0.0, 2.0 * np.pi))
            R2 = look_at(C2, centroid + rng.uniform(-jitter, jitter, 3),
                         rng.uniform(0.0, 2.0 * np.pi))
        except ValueError:
            continue
        view1 = _project(R1, C1, f_px, lam_val, s, pts)
        if view1 is None:
            continue
        view2 = _project(R2, C2, f_px, lam_val, s, pts)
        if view2 is None:
            continue
        t = R2 @ (C1 - C2)
        nt = np.linalg.norm(t)
        if nt < 1e-9:
            continue
        return Instance(
            x1=view1[0], x2=view2[0],
            R_rel=R2 @ R1.T, t_rel=t / nt,
            focal_px=float(f_px), lam=lam_val, norm_scale=s,
            points_w=pts, R1=R1, R2=R2, C1=C1, C2=C2,
        )
    raise GenerationFailed(f"no valid camera placement in {max_attempts} attempts")


def perturb_rotation(R, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Compose R with a random-axis rotation of angle |N(0, sigma_deg)|."""
    if sigma_deg < 0:
        raise ValueError("sigma_deg must be >= 0")
    R = np.asarray(R, dtype=float)
    if sigma_deg == 0.0:
        return R.copy()
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = abs(rng.normal(0.0, np.radians(sigma_deg)))
    return quat_to_mat(quat_exp(axis * angle)) @ R


def add_pixel_noise(x1, x2, f_px: float, mode: str, rng: np.random.Generator):
    """Gaussian pixel noise with sigma = 1080/f on both views ("relative")."""
    if mode == "none":
        return np.array(x1, dtype=float), np.array(x2, dtype=float)
    if mode != "relative":
        raise ValueError(f"unknown pixel noise mode {mode!r}")
    if f_px <= 0:
        raise ValueError("focal length must be positive")
    sigma = PIXEL_NOISE_REF / f_px
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (x1 + rng.normal(0.0, sigma, size=x1.shape),
            x2 + rng.normal(0.0, sigma, size=x2.shape))


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------

E_F_FLOOR = -16.0   # log10 floor for exactly matching matrices


def compute_metrics(gt: Instance, sol: PoseSolution, r_est=None) -> dict:
    """Pose-reconstruction errors vs ground truth.

    e_R/e_t in degrees (e_t folded over the +-t ambiguity), e_f relative,
    e_F = log10 of the sign-folded Frobenius distance of the normalized
    fundamental matrices.
    """
    r_est = gt.R_rel if r_est is None else np.asarray(r_est, dtype=float)
    e_r = rotation_angle_deg(gt.R_rel, r_est)
    dot = abs(float(gt.t_rel @ sol.t) / (np.linalg.norm(gt.t_rel) * np.linalg.norm(sol.t)))
    e_t = float(np.degrees(np.arccos(np.clip(dot, -1.0, 1.0))))
    e_f = abs(gt.focal_norm - sol.focal) / gt.focal_norm
    F_gt = gt.gt_solution().F
    F_gt = F_gt / np.linalg.norm(F_gt)
    F_est = sol.F / np.linalg.norm(sol.F)
    dist = min(np.linalg.norm(F_est - F_gt), np.linalg.norm(F_est + F_gt))
    e_F = float(np.log10(dist)) if dist > 0.0 else E_F_FLOOR
    return {"e_R": e_r, "e_t": e_t, "e_f": float(e_f), "e_F": max(e_F, E_F_FLOOR)}


@dataclass(frozen=True)
class TrialRecord:
    solver: str
    trial: int
    f_gt_px: float
    lambda_gt: float
    e_R: float
    e_t: float
    e_f: float
    e_F: float
    lambda_est: float
    n_solutions: int
    n_real_roots: int
    wall_time_us: float = 0.0   # kept in memory only; never written to files


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def _trial_rng(seed: int, solver: str, trial: int) -> np.random.Generator:
    return np.random.default_rng((seed, SOLVER_TAGS[solver], trial))


def _failed_record(solver, trial, inst, e_r) -> TrialRecord:
    return TrialRecord(solver=solver, trial=trial, f_gt_px=inst.focal_px,
                       lambda_gt=inst.lam, e_R=e_r, e_t=180.0, e_f=1e9,
                       e_F=0.0, lambda_est=float("nan"), n_solutions=0,
                       n_real_roots=0)


def _solve_and_record(solver: str, trial: int, inst: Instance, x1, x2, R_in,
                      best_by: str = "e_F") -> TrialRecord:
    prob = MinimalProblem(x1[: MIN_SAMPLE[solver]], x2[: MIN_SAMPLE[solver]],
                          R_in, inst.norm_scale)
    e_r = rotation_angle_deg(inst.R_rel, R_in)
    t_start = time.perf_counter_ns()
    try:
        out = solve(solver, prob, f_px=inst.focal_px if solver == "2pt" else None,
                    lam=inst.lam if solver == "2pt" else 0.0)
    except DegenerateSample:
        return _failed_record(solver, trial, inst, e_r)
    elapsed_us = (time.perf_counter_ns() - t_start) / 1000.0
    metrics = [compute_metrics(inst, s, R_in) for s in out.solutions]
    if best_by == "per_metric":
        e_t = min(m["e_t"] for m in metrics)
        e_f = min(m["e_f"] for m in metrics)
        e_F = min(m["e_F"] for m in metrics)
        lam_est = out.solutions[int(np.argmin([m["e_F"] for m in metrics]))].lam_or_zero
    else:
        k = int(np.argmin([m["e_F"] for m in metrics]))
        e_t, e_f, e_F = metrics[k]["e_t"], metrics[k]["e_f"], metrics[k]["e_F"]
        lam_est = out.solutions[k].lam_or_zero
    return TrialRecord(solver=solver, trial=trial, f_gt_px=inst.focal_px,
                       lambda_gt=inst.lam, e_R=e_r, e_t=e_t, e_f=e_f, e_F=e_F,
                       lambda_est=lam_est, n_solutions=len(out.solutions),
                       n_real_roots=out.n_real_roots, wall_time_us=elapsed_us)


def run_stability(n_trials: int, solvers: tuple[str, ...], cfg: SceneConfig,
                  lam_override: float | None = None) -> list[TrialRecord]:
    """Noise-free stability experiment: best-e_F solution per trial.

    The 4-point solver sees instances drawn from cfg.lambda_range; the other
    solvers see distortion-free instances (they cannot model it).
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    records = []
    for solver in solvers:
        lam = lam_override if lam_override is not None else (None if solver == "4pt" else 0.0)
        for trial in range(n_trials):
            rng = _trial_rng(cfg.seed, solver, trial)
            inst = generate_instance(cfg, rng, lam=lam, n_points=MIN_SAMPLE[solver])
            records.append(_solve_and_record(solver, trial, inst, inst.x1, inst.x2,
                                             inst.R_rel))
    return records


def stability_histogram(records: list[TrialRecord], lo: float = -16.0,
                        hi: float = 0.0, width: float = 0.5) -> dict:
    """Binned log10 e_F histogram and summary quantiles, per solver."""
    out = {}
    edges = np.arange(lo, hi + width, width)
    for solver in sorted({r.solver for r in records}):
        vals = np.array([r.e_F for r in records if r.solver == solver])
        counts, _ = np.histogram(np.clip(vals, lo, hi - 1e-9), bins=edges)
        q = np.quantile(vals, [0.25, 0.5, 0.75])
        out[solver] = {
            "bin_edges": edges.tolist(),
            "counts": counts.tolist(),
            "q1": float(q[0]), "median": float(q[1]), "q3": float(q[2]),
            "frac_above_minus4": float(np.mean(vals > -4.0)),
            "n": int(vals.size),
        }
    return out


def run_noise_sweep(levels_deg, n_per_level: int, solvers: tuple[str, ...],
                    cfg: SceneConfig,
                    pixel_mode: str = "relative") -> list[dict]:
    """Error quartiles per (IMU noise level, solver); lambda fixed at 0."""
    levels = list(levels_deg)
    if not levels:
        raise ValueError("levels must be nonempty")
    rows = []
    for level in levels:
        per_solver: dict[str, list[TrialRecord]] = {s: [] for s in solvers}
        for solver in solvers:
            for trial in range(n_per_level):
                rng = _trial_rng(cfg.seed, solver, trial * 1000 + int(round(level * 100)))
                inst = generate_instance(cfg, rng, lam=0.0,
                                         n_points=MIN_SAMPLE[solver])
                x1, x2 = add_pixel_noise(inst.x1, inst.x2, inst.focal_px,
                                         pixel_mode, rng)
                R_in = perturb_rotation(inst.R_rel, level, rng)
                per_solver[solver].append(
                    _solve_and_record(solver, trial, inst, x1, x2, R_in,
                                      best_by="per_metric"))
        for solver in solvers:
            recs = per_solver[solver]
            row = {"level_deg": float(level), "solver": solver, "n": len(recs)}
            for name in ("e_R", "e_t", "e_f", "e_F"):
                vals = np.array([getattr(r, name) for r in recs])
                q = np.quantile(vals, [0.25, 0.5, 0.75])
                row[f"{name}_q1"] = float(q[0])
                row[f"{name}_median"] = float(q[1])
                row[f"{name}_q3"] = float(q[2])
            rows.append(row)
    return rows


def run_timing(n_trials: int, solvers: tuple[str, ...], cfg: SceneConfig,
               warmup: int = 50) -> list[dict]:
    """Wall-time statistics per solver over pre-generated instances."""
    if n_trials < 100:
        raise ValueError("timing needs n_trials >= 100")
    rows = []
    for solver in solvers:
        lam = None if solver == "4pt" else 0.0
        problems = []
        for trial in range(warmup + n_trials):
            rng = _trial_rng(cfg.seed, solver, trial)
            inst = generate_instance(cfg, rng, lam=lam, n_points=MIN_SAMPLE[solver])
            problems.append((inst, MinimalProblem(inst.x1, inst.x2, inst.R_rel,
                                                  inst.norm_scale)))
        times = []
        n_sols = []
        n_roots = []
        for i, (inst, prob) in enumerate(problems):
            t0 = time.perf_counter_ns()
            try:
                out = solve(solver, prob,
                            f_px=inst.focal_px if solver == "2pt" else None,
                            lam=inst.lam if solver == "2pt" else 0.0)
                ns, nr = len(out.solutions), out.n_real_roots
            except DegenerateSample:
                ns, nr = 0, 0
            dt_us = (time.perf_counter_ns() - t0) / 1000.0
            if i >= warmup:
                times.append(dt_us)
                n_sols.append(ns)
                n_roots.append(nr)
        times_arr = np.array(times)
        rows.append({
            "solver": solver,
            "n": len(times),
            "mean_us": float(times_arr.mean()),
            "median_us": float(np.median(times_arr)),
            "p99_us": float(np.quantile(times_arr, 0.99)),
            "mean_solutions": float(np.mean(n_sols)),
            "max_solutions": int(np.max(n_sols)),
            "mean_real_roots": float(np.mean(n_roots)),
            "max_real_roots": int(np.max(n_roots)),
        })
    return rows


# ---------------------------------------------------------------------------
# synthetic gyro trajectories (oracle for the pre-integration module)
# ---------------------------------------------------------------------------

def synthesize_gyro_track(rng: np.random.Generator, duration: float = 1.0,
                          rate_hz: float = 500.0, amplitude: float = 1.0,
                          fine_substeps: int = 64):
    """Smooth random angular-rate profile with a finely integrated attitude.

    Returns (t, omega, attitudes) where attitudes[k] is the body->world
    rotation at t[k], integrated with piecewise-constant substeps well below
    the sample interval so it serves as ground truth for the integrator.
    """
    n = int(round(duration * rate_hz)) + 1
    t = np.arange(n) / rate_hz
    freqs = rng.uniform(0.3, 2.0, size=(3, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, 2))
    amps = rng.uniform(0.2, 1.0, size=(3, 2)) * amplitude

    def omega_at(tt):
        tt = np.atleast_1d(tt)
        w = np.zeros((tt.size, 3))
        for axis in range(3):
            for h in range(2):
                w[:, axis] += amps[axis, h] * np.sin(
                    2.0 * np.pi * freqs[axis, h] * tt + phases[axis, h])
        return w

    omega = omega_at(t)
    attitudes = [np.eye(3)]
    R = np.eye(3)
    for k in range(n - 1):
        dt = (t[k + 1] - t[k]) / fine_substeps
        sub = t[k] + (np.arange(fine_substeps) + 0.5) * dt
        w_sub = omega_at(sub)
        for ws in w_sub:
            R = R @ quat_to_mat(quat_exp(ws * dt))
        attitudes.append(R.copy())
    return t, omega, attitudes
