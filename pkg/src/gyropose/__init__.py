"""Gyro-aided minimal relative-pose solvers with intrinsic auto-calibration."""

__version__ = "0.1.0"

from .geom import (
    PoseSolution,
    apply_division,
    cheirality_inliers,
    epipolar_residual,
    epipolar_residuals,
    fundamental_from_params,
    lambda_norm_to_px,
    lambda_px_to_norm,
    relative_rotation,
    sampson_sq,
    skew,
    undistort_division,
)
from .imu import estimate_bias, integrate_gyro, relative_rotation_for_pair
from .polyroots import BiPoly, bipoly_eval, bivariate_roots, quartic_roots, sylvester_resultant, uni_roots
from .robust import LambdaHistogram, RansacConfig, RansacResult, histogram_vote_lambda, ransac_estimate
from .solvers import (
    MinimalProblem,
    SolverOutput,
    build_M_3pt,
    build_M_4pt,
    solve_2pt_calibrated,
    solve_3pt_focal,
    solve_4pt_focal_distortion,
)
from .synth import (
    Instance,
    NoiseConfig,
    SceneConfig,
    add_pixel_noise,
    compute_metrics,
    generate_instance,
    perturb_rotation,
    run_noise_sweep,
    run_stability,
    run_timing,
)

__all__ = [name for name in dir() if not name.startswith("_")]
