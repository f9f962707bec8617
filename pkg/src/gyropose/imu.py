"""Gyroscope-only pre-integration between camera timestamps.

A gyro stream is a pair of arrays: strictly increasing timestamps (seconds)
and body-frame angular velocities (rad/s, shape (N, 3)).  Integration uses
the midpoint rule on bias-corrected rates, with the boundary rates linearly
interpolated, and deliberately ignores the accelerometer: over the short
inter-frame intervals used here the gyro drift is negligible.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyStream, OutOfRange, TooFewSamples
from .geom import quat_conj, quat_exp, quat_mul, quat_normalize, quat_to_mat

MIN_BIAS_SAMPLES = 10


def estimate_bias(omega: np.ndarray) -> np.ndarray:
    """Gyro bias from a stationary window: componentwise mean of the rates."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    if omega.shape[0] < MIN_BIAS_SAMPLES:
        raise TooFewSamples(
            f"bias estimation needs >= {MIN_BIAS_SAMPLES} samples, got {omega.shape[0]}")
    return omega.mean(axis=0)


def _check_stream(t: np.ndarray, omega: np.ndarray):
    if t.size == 0:
        raise EmptyStream("gyro stream is empty")
    if omega.shape != (t.size, 3):
        raise ValueError(f"omega shape {omega.shape} does not match {t.size} timestamps")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("gyro timestamps must be strictly increasing")


def integrate_gyro(t, omega, bias, t0: float, t1: float) -> np.ndarray:
    """Quaternion mapping frame(t0) coordinates into frame(t1) coordinates.

    Per interval between consecutive grid times (stream samples inside
    [t0, t1] plus linearly interpolated boundary rates) the attitude is
    advanced by exp of the bias-corrected midpoint rate times dt, with a
    renormalization each step.
    """
    t = np.asarray(t, dtype=float)
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    _check_stream(t, omega)
    if not (t0 < t1):
        raise OutOfRange(f"need t0 < t1, got [{t0}, {t1}]")
    if t0 < t[0] - 1e-12 or t1 > t[-1] + 1e-12:
        raise OutOfRange(f"[{t0}, {t1}] not covered by stream span [{t[0]}, {t[-1]}]")
    bias = np.asarray(bias, dtype=float)

    inside = (t > t0) & (t < t1)
    grid_t = np.concatenate(([t0], t[inside], [t1]))
    w0 = np.array([np.interp(t0, t, omega[:, k]) for k in range(3)])
    w1 = np.array([np.interp(t1, t, omega[:, k]) for k in range(3)])
    grid_w = np.vstack([w0[None, :], omega[inside], w1[None, :]])

    q = np.array([1.0, 0.0, 0.0, 0.0])
    for k in range(grid_t.size - 1):
        dt = grid_t[k + 1] - grid_t[k]
        if dt <= 0.0:
            continue
        wm = 0.5 * (grid_w[k] + grid_w[k + 1]) - bias
        q = quat_normalize(quat_mul(q, quat_exp(wm * dt)))
    # accumulated q maps frame(t1) into frame(t0); callers want the inverse
    return quat_conj(q)


def relative_rotation_for_pair(t, omega, bias, t_frame_a: float, t_frame_b: float,
                               R_cam_imu=None) -> np.ndarray:
    """Relative camera rotation between two frame timestamps.

    Conjugates the integrated body rotation with the camera-IMU extrinsic:
    R_cam_imu @ integrate_gyro(...) @ R_cam_imu.T, as a matrix.  This is the
    rotation consumed by the solvers (camera-1 coordinates -> camera-2).
    """
    q = integrate_gyro(t, omega, bias, t_frame_a, t_frame_b)
    Q = quat_to_mat(q)
    if R_cam_imu is None:
        return Q
    R_ci = np.asarray(R_cam_imu, dtype=float)
    return R_ci @ Q @ R_ci.T
