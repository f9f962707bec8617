"""Command-line interface: solve from files, RANSAC, and benchmark runners.

File formats owned here:

* correspondences: CSV with header ``u1,v1,u2,v2`` (pixels, origin top-left
  or any fixed frame; the image center from --width/--height is subtracted),
  ``#`` starts a comment;
* gyro stream: CSV with header ``t,wx,wy,wz`` (seconds, rad/s);
* rotations on flags: ``--quat qw,qx,qy,qz`` (also ``--cam-imu``);
* benchmark configs and all reports: JSON (schema_version 1); benchmark
  results additionally as CSV next to a RunManifest that replays them
  byte-for-byte (``bench --from-manifest``).

Exit codes: 0 success, 1 malformed input/config, 2 no solution found.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .errors import DegenerateSample, GyroposeError, NoModelFound
from .geom import (
    cheirality_inliers,
    lambda_norm_to_px,
    quat_to_mat,
    sampson_sq,
)
from .imu import estimate_bias, relative_rotation_for_pair
from .robust import RansacConfig, histogram_vote_lambda, ransac_estimate
from .solvers import MIN_SAMPLE, MinimalProblem, solve
from .synth import (
    NoiseConfig,
    SceneConfig,
    run_noise_sweep,
    run_stability,
    run_timing,
    stability_histogram,
)

SCHEMA_VERSION = 1
OUT_DIR_ENV = "GYROPOSE_OUT_DIR"


class CliError(Exception):
    """Input problem reportable to the user; exits with code 1."""


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _parse_float_list(text: str, n: int, what: str) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != n:
        raise CliError(f"{what}: expected {n} comma-separated numbers, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as e:
        raise CliError(f"{what}: {e}") from None


def read_correspondences(path: str) -> np.ndarray:
    """Parse the u1,v1,u2,v2 CSV; returns (n, 4) float array."""
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if fields == ["u1", "v1", "u2", "v2"]:
                continue
            if len(fields) != 4:
                raise CliError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise CliError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise CliError(f"{path}:1: no correspondence rows found")
    return np.array(rows)


def read_gyro(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse the t,wx,wy,wz CSV; returns (t, omega)."""
    t = []
    w = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if fields == ["t", "wx", "wy", "wz"]:
                continue
            if len(fields) != 4:
                raise CliError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise CliError(f"{path}:{lineno}: non-numeric field") from None
            t.append(vals[0])
            w.append(vals[1:])
    if not t:
        raise CliError(f"{path}:1: no gyro samples found")
    return np.array(t), np.array(w)


def _resolve_rotation(args) -> np.ndarray:
    if args.quat is not None:
        q = _parse_float_list(args.quat, 4, "--quat")
        return quat_to_mat(q)
    if args.gyro is None:
        raise CliError("a rotation source is required: --quat or --gyro with --t0/--t1")
    if args.t0 is None or args.t1 is None:
        raise CliError("--gyro requires --t0 and --t1")
    t, omega = read_gyro(args.gyro)
    if args.bias is not None:
        bias = _parse_float_list(args.bias, 3, "--bias")
    elif args.bias_window is not None:
        mask = t <= t[0] + args.bias_window
        try:
            bias = estimate_bias(omega[mask])
        except GyroposeError as e:
            raise CliError(f"--bias-window: {e}") from None
    else:
        bias = np.zeros(3)
    r_ci = None
    if args.cam_imu is not None:
        r_ci = quat_to_mat(_parse_float_list(args.cam_imu, 4, "--cam-imu"))
    try:
        return relative_rotation_for_pair(t, omega, bias, args.t0, args.t1, r_ci)
    except GyroposeError as e:
        raise CliError(f"gyro integration: {e}") from None


def _center_points(corrs: np.ndarray, width: float, height: float):
    center = np.array([width / 2.0, height / 2.0])
    return corrs[:, 0:2] - center, corrs[:, 2:4] - center


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: str, data: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(args, payload: dict):
    text = _json_dumps(payload)
    if getattr(args, "out", None):
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _csv_text(fieldnames: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                         for k, v in row.items()})
    return buf.getvalue()


def _solution_report(sol, x1, x2, norm_scale: float, threshold_px: float) -> dict:
    d = sampson_sq(sol, x1, x2, norm_scale)
    inliers = int(np.count_nonzero(d <= (threshold_px / norm_scale) ** 2))
    return {
        "focal_norm": sol.focal,
        "focal_px": sol.focal * norm_scale,
        "lambda_norm": sol.lam,
        "lambda_px": None if sol.lam is None else lambda_norm_to_px(sol.lam, norm_scale),
        "t": sol.t.tolist(),
        "F_norm": sol.F.tolist(),
        "cheirality": cheirality_inliers(sol, x1, x2, norm_scale),
        "sampson_inliers": inliers,
    }


# ---------------------------------------------------------------------------
# solve command
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    corrs = read_correspondences(args.corrs)
    x1, x2 = _center_points(corrs, args.width, args.height)
    norm_scale = float(max(args.width, args.height))
    R = _resolve_rotation(args)
    k = MIN_SAMPLE[args.solver]
    if len(x1) > k:
        print(f"warning: {len(x1)} correspondences given, "
              f"{args.solver} uses the first {k}", file=sys.stderr)
    if len(x1) < k:
        raise CliError(f"{args.solver} needs {k} correspondences, file has {len(x1)}")
    prob = MinimalProblem(x1[:k], x2[:k], R, norm_scale)
    try:
        out = solve(args.solver, prob, f_px=args.focal, lam=args.lam,
                    polish=args.polish)
    except DegenerateSample as e:
        print(f"no solution: {e}", file=sys.stderr)
        return 2
    sols = []
    for sol, res in zip(out.solutions, out.residuals):
        rep = _solution_report(sol, x1, x2, norm_scale, args.threshold)
        rep["sample_residual"] = res
        sols.append(rep)
    order = sorted(range(len(sols)),
                   key=lambda i: (-sols[i]["cheirality"], -sols[i]["sampson_inliers"],
                                  sols[i]["sample_residual"]))
    _emit(args, {
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "solver": args.solver,
        "norm_scale": norm_scale,
        "n_solutions": len(sols),
        "best_index": order[0],
        "solutions": sols,
    })
    return 0


# ---------------------------------------------------------------------------
# ransac command
# ---------------------------------------------------------------------------

def cmd_ransac(args) -> int:
    corrs = read_correspondences(args.corrs)
    x1, x2 = _center_points(corrs, args.width, args.height)
    norm_scale = float(max(args.width, args.height))
    R = _resolve_rotation(args)
    config = RansacConfig(iterations=args.iterations, threshold_px=args.threshold,
                          seed=args.seed, solver_kind=args.solver,
                          min_cheirality_fraction=args.min_cheirality,
                          adaptive=args.adaptive)
    try:
        result = ransac_estimate(x1, x2, R, norm_scale, config,
                                 f_px=args.focal, lam_known=args.lam)
    except NoModelFound as e:
        print(f"no model: {e}", file=sys.stderr)
        return 2
    except GyroposeError as e:
        raise CliError(str(e)) from None
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "ransac",
        "solver": args.solver,
        "norm_scale": norm_scale,
        "iterations": config.iterations,
        "threshold_px": config.threshold_px,
        "seed": config.seed,
        "best": _solution_report(result.best, x1, x2, norm_scale, args.threshold),
        "score": result.score,
        "trials_run": result.trials_run,
        "inlier_mask": [bool(b) for b in result.inlier_mask],
    }
    if args.lambda_histogram:
        lam_est = result.best.lam if result.best.lam is not None else 0.0
        hist = _update_lambda_histogram(args.lambda_histogram, lam_est,
                                        args.histogram_bin_width)
        report["lambda_histogram"] = hist
    _emit(args, report)
    return 0


def _update_lambda_histogram(path: str, lam: float, bin_width: float) -> dict:
    estimates = []
    if os.path.exists(path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
            estimates = list(data.get("estimates", []))
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"{path}: cannot read histogram file ({e})") from None
    estimates.append(float(lam))
    hist = histogram_vote_lambda(estimates, bin_width)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "bin_width": bin_width,
        "estimates": estimates,
        "counts": hist.counts.tolist(),
        "bin_start": hist.bin_start,
        "mode_lambda": hist.mode_lambda,
    }
    _atomic_write(path, _json_dumps(payload))
    return {"mode_lambda": hist.mode_lambda, "n_estimates": len(estimates)}


# ---------------------------------------------------------------------------
# bench command
# ---------------------------------------------------------------------------

_SCENE_FIELDS = {
    "x_range", "z_range", "y_range", "f_range", "lambda_range",
    "baseline_range", "n_points", "image_size", "seed",
}
_VALID_SOLVERS = ("2pt", "3pt", "4pt")


def _validate_config(sub: str, cfg: dict) -> dict:
    """Fill defaults and validate; raises CliError with field paths."""
    out = dict(cfg)
    out.setdefault("seed", 0)
    out.setdefault("solvers", ["3pt", "4pt"])
    if not isinstance(out["seed"], int):
        raise CliError("config.seed: expected an integer")
    if (not isinstance(out["solvers"], list) or not out["solvers"]
            or any(s not in _VALID_SOLVERS for s in out["solvers"])):
        raise CliError(f"config.solvers: expected a nonempty list from {_VALID_SOLVERS}")
    scene = dict(out.get("scene", {}))
    unknown = set(scene) - _SCENE_FIELDS
    if unknown:
        raise CliError(f"config.scene.{sorted(unknown)[0]}: unknown field")
    if sub == "stability":
        out.setdefault("n_trials", 10000)
        if not isinstance(out["n_trials"], int) or out["n_trials"] < 1:
            raise CliError("config.n_trials: expected an integer >= 1")
    elif sub == "noise":
        out.setdefault("levels_deg", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
        out.setdefault("n_per_level", 1000)
        if (not isinstance(out["levels_deg"], list) or not out["levels_deg"]
                or any(not isinstance(v, (int, float)) or v < 0 for v in out["levels_deg"])):
            raise CliError("config.levels_deg: expected a nonempty list of sigmas >= 0")
        if not isinstance(out["n_per_level"], int) or out["n_per_level"] < 1:
            raise CliError("config.n_per_level: expected an integer >= 1")
    elif sub == "timing":
        out.setdefault("n_trials", 10000)
        if not isinstance(out["n_trials"], int) or out["n_trials"] < 100:
            raise CliError("config.n_trials: timing requires an integer >= 100")
    else:
        raise CliError(f"unknown bench subcommand {sub!r}")
    out["scene"] = scene
    return out


def _scene_from_config(cfg: dict) -> SceneConfig:
    scene = dict(cfg.get("scene", {}))
    for key in ("x_range", "z_range", "y_range", "f_range", "lambda_range",
                "baseline_range"):
        if key in scene:
            scene[key] = tuple(scene[key])
    scene["seed"] = cfg["seed"]
    return SceneConfig(**scene)


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _run_bench(sub: str, cfg: dict, out_dir: str) -> list[str]:
    scene = _scene_from_config(cfg)
    solvers = tuple(cfg["solvers"])
    started = _utcnow()
    if sub == "stability":
        records = run_stability(cfg["n_trials"], solvers, scene)
        fields = ["solver", "trial", "f_gt_px", "lambda_gt", "e_R", "e_t",
                  "e_f", "e_F", "lambda_est", "n_solutions", "n_real_roots"]
        rows = [{k: getattr(r, k) for k in fields} for r in records]
        files = {
            "stability.csv": _csv_text(fields, rows),
            "stability_summary.json": _json_dumps(
                {"schema_version": SCHEMA_VERSION,
                 "histogram": stability_histogram(records)}),
        }
    elif sub == "noise":
        rows = run_noise_sweep(cfg["levels_deg"], cfg["n_per_level"], solvers, scene)
        fields = list(rows[0].keys())
        files = {
            "noise.csv": _csv_text(fields, rows),
            "noise.json": _json_dumps({"schema_version": SCHEMA_VERSION, "rows": rows}),
        }
    else:
        rows = run_timing(cfg["n_trials"], solvers, scene)
        fields = list(rows[0].keys())
        files = {
            "timing.csv": _csv_text(fields, rows),
            "timing.json": _json_dumps({"schema_version": SCHEMA_VERSION, "rows": rows}),
        }
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        _atomic_write(os.path.join(out_dir, name), text)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "command": "bench",
        "subcommand": sub,
        "config": cfg,
        "seed": cfg["seed"],
        "outputs": sorted(files),
        "started_at": started,
        "finished_at": _utcnow(),
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"), _json_dumps(manifest))
    return sorted(files) + ["manifest.json"]


def cmd_bench(args) -> int:
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    if args.from_manifest:
        try:
            with open(args.from_manifest, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"{args.from_manifest}: {e}") from None
        sub = manifest.get("subcommand")
        cfg = _validate_config(sub, manifest.get("config", {}))
    else:
        if not args.subcommand:
            raise CliError("bench requires a subcommand (stability|noise|timing) "
                           "or --from-manifest")
        sub = args.subcommand
        cfg = {}
        if args.config:
            try:
                with open(args.config, "r", encoding="utf-8") as fh:
                    cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise CliError(f"{args.config}: {e}") from None
            if not isinstance(cfg, dict):
                raise CliError("config: expected a JSON object")
        cfg = _validate_config(sub, cfg)
    written = _run_bench(sub, cfg, out_dir)
    for name in written:
        print(os.path.join(out_dir, name))
    return 0


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def _add_rotation_flags(p: argparse.ArgumentParser):
    p.add_argument("--quat", help="relative rotation as qw,qx,qy,qz")
    p.add_argument("--gyro", help="gyro CSV (t,wx,wy,wz) to integrate")
    p.add_argument("--t0", type=float, help="first frame timestamp (with --gyro)")
    p.add_argument("--t1", type=float, help="second frame timestamp (with --gyro)")
    p.add_argument("--bias", help="gyro bias bx,by,bz (rad/s)")
    p.add_argument("--bias-window", type=float, dest="bias_window",
                   help="estimate bias from the first SECONDS of the stream")
    p.add_argument("--cam-imu", dest="cam_imu",
                   help="camera-IMU extrinsic rotation qw,qx,qy,qz")


def _add_image_flags(p: argparse.ArgumentParser):
    p.add_argument("--width", type=float, required=True, help="image width, pixels")
    p.add_argument("--height", type=float, required=True, help="image height, pixels")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gyropose",
                                 description="IMU-aided minimal relative-pose solvers")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run a minimal solver on a correspondence file")
    ps.add_argument("--corrs", required=True, help="correspondence CSV (u1,v1,u2,v2)")
    ps.add_argument("--solver", choices=_VALID_SOLVERS, default="3pt")
    _add_image_flags(ps)
    _add_rotation_flags(ps)
    ps.add_argument("--focal", type=float, help="known focal length in px (2pt)")
    ps.add_argument("--lam", type=float, default=0.0,
                    help="known distortion, normalized frame (2pt)")
    ps.add_argument("--threshold", type=float, default=1.0,
                    help="Sampson threshold in px for the inlier report")
    ps.add_argument("--polish", action="store_true",
                    help="one Newton step on (w, lambda) in the 4pt solver")
    ps.add_argument("-o", "--out", help="write the JSON report here instead of stdout")
    ps.set_defaults(func=cmd_solve)

    pr = sub.add_parser("ransac", help="robust estimation over a correspondence file")
    pr.add_argument("--corrs", required=True)
    pr.add_argument("--solver", choices=_VALID_SOLVERS, default="3pt")
    _add_image_flags(pr)
    _add_rotation_flags(pr)
    pr.add_argument("--focal", type=float, help="known focal length in px (2pt)")
    pr.add_argument("--lam", type=float, default=0.0)
    pr.add_argument("--iterations", type=int, default=1000)
    pr.add_argument("--threshold", type=float, default=1.0,
                    help="Sampson inlier threshold, pixels")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--min-cheirality", type=float, default=0.5, dest="min_cheirality")
    pr.add_argument("--adaptive", action="store_true",
                    help="inlier-ratio early exit instead of fixed iterations")
    pr.add_argument("--lambda-histogram", dest="lambda_histogram",
                    help="accumulate the per-pair lambda estimate in this JSON file")
    pr.add_argument("--histogram-bin-width", type=float, default=0.02,
                    dest="histogram_bin_width")
    pr.add_argument("-o", "--out")
    pr.set_defaults(func=cmd_ransac)

    pb = sub.add_parser("bench", help="synthetic experiment runners")
    pb.add_argument("subcommand", nargs="?", choices=["stability", "noise", "timing"])
    pb.add_argument("--config", help="JSON config file")
    pb.add_argument("--out-dir", dest="out_dir",
                    help=f"output directory (default: ${OUT_DIR_ENV} or .)")
    pb.add_argument("--from-manifest", dest="from_manifest",
                    help="replay a previous run from its manifest")
    pb.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
