"""Small-degree polynomial machinery for the minimal solvers.

Univariate polynomials are plain 1-D float arrays of coefficients in
ascending degree.  Bivariate polynomials (in the focal parameter ``w`` and
the distortion parameter ``lam``) are dense coefficient grids wrapped in
:class:`BiPoly`.

The two-unknown systems produced by the 4-point solver are eliminated with a
Sylvester resultant whose determinant is recovered by evaluation at Chebyshev
nodes and interpolation; spurious roots that resultants introduce are removed
by verifying every candidate against all input polynomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial import polynomial as _npoly

from .errors import AllZeroPolynomial, ZeroResultant

TRIM_REL_TOL = 1e-10
SATURATION_REL_TOL = 1e-12
VERIFY_REL_TOL = 1e-6
DEFAULT_W_MIN_ABS = 1e-8


def trim_coeffs(coeffs, rel_tol: float = TRIM_REL_TOL) -> np.ndarray:
    """Drop high-order coefficients that are negligible vs the largest one."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    top = np.abs(c).max() if c.size else 0.0
    if top == 0.0:
        return np.zeros(1)
    keep = np.nonzero(np.abs(c) >= rel_tol * top)[0]
    return c[: keep[-1] + 1].copy()


def _horner(c: list[float], x: float) -> float:
    r = 0.0
    for v in reversed(c):
        r = r * x + v
    return r


def polish_root(coeffs, x: float, steps: int = 2) -> float:
    """Guarded Newton refinement of a real root of an ascending-coeff poly."""
    c = [float(v) for v in coeffs]
    dc = [k * c[k] for k in range(1, len(c))]
    fx = _horner(c, x)
    for _ in range(steps):
        dfx = _horner(dc, x)
        if dfx == 0.0 or not math.isfinite(dfx):
            break
        x_new = x - fx / dfx
        f_new = _horner(c, x_new)
        if not math.isfinite(x_new) or abs(f_new) >= abs(fx):
            break
        x, fx = x_new, f_new
    return float(x)


# ---------------------------------------------------------------------------
# closed-form real roots up to degree 4
# ---------------------------------------------------------------------------

def _linear_real(c0: float, c1: float) -> list[float]:
    return [-c0 / c1]


def _quadratic_real(c0: float, c1: float, c2: float) -> list[float]:
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    # stable split: avoid cancellation in the -b +- sqrt(disc) numerator
    q = -0.5 * (c1 + math.copysign(s, c1)) if c1 != 0.0 else 0.5 * s
    if q == 0.0:
        return [0.0, 0.0]
    r1 = q / c2
    r2 = c0 / q
    return [r1, r2]


def _cubic_real(c0: float, c1: float, c2: float, c3: float) -> list[float]:
    a = c2 / c3
    b = c1 / c3
    c = c0 / c3
    # depressed: t^3 + p t + q, x = t - a/3
    p = b - a * a / 3.0
    q = c - a * b / 3.0 + 2.0 * a * a * a / 27.0
    shift = -a / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        s = math.sqrt(disc)
        u = math.copysign(abs(-q / 2.0 + s) ** (1.0 / 3.0), -q / 2.0 + s)
        v = math.copysign(abs(-q / 2.0 - s) ** (1.0 / 3.0), -q / 2.0 - s)
        return [u + v + shift]
    if p == 0.0 and q == 0.0:
        return [shift, shift, shift]
    # three real roots (trigonometric form)
    m = 2.0 * math.sqrt(max(-p / 3.0, 0.0))
    if m == 0.0:
        return [shift]
    arg = max(-1.0, min(1.0, 3.0 * q / (p * m)))
    theta = math.acos(arg) / 3.0
    return [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]


def quartic_roots(coeffs) -> list[float]:
    """Real roots (with multiplicity) of c0 + c1 x + ... + c4 x^4.

    Closed form (factorization into two quadratics via the resolvent cubic)
    with a guarded Newton polish; near-zero leading coefficients fall through
    to the cubic/quadratic/linear formulas.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (5,):
        raise ValueError("quartic_roots expects 5 coefficients")
    top = np.abs(c).max()
    if top == 0.0:
        raise AllZeroPolynomial("all quartic coefficients are zero")
    cn = c / top
    drop_tol = 1e-13
    if abs(cn[4]) < drop_tol:
        if abs(cn[3]) < drop_tol:
            if abs(cn[2]) < drop_tol:
                if abs(cn[1]) < drop_tol:
                    return []
                roots = _linear_real(cn[0], cn[1])
            else:
                roots = _quadratic_real(cn[0], cn[1], cn[2])
        else:
            roots = _cubic_real(cn[0], cn[1], cn[2], cn[3])
        return sorted(polish_root(c, r) for r in roots)

    a = cn[3] / cn[4]
    b = cn[2] / cn[4]
    cc = cn[1] / cn[4]
    d = cn[0] / cn[4]
    # depressed quartic y^4 + p y^2 + q y + r, x = y - a/4
    p = b - 3.0 * a * a / 8.0
    q = cc - a * b / 2.0 + a * a * a / 8.0
    r = d - a * cc / 4.0 + a * a * b / 16.0 - 3.0 * a ** 4 / 256.0
    shift = -a / 4.0
    scale_dep = max(1.0, abs(p), abs(q), abs(r))
    ys: list[float] = []
    if abs(q) < 1e-14 * scale_dep:
        # biquadratic: z^2 + p z + r with z = y^2
        for z in _quadratic_real(r, p, 1.0):
            if z >= 0.0:
                s = math.sqrt(z)
                ys.extend([s, -s])
    else:
        # resolvent cubic z^3 - p z^2 - 4 r z + (4 p r - q^2); any root with
        # z >= p splits the quartic into two real-coefficient quadratics
        zs = _cubic_real(4.0 * p * r - q * q, -4.0 * r, -p, 1.0)
        z0 = max(zs)
        s2 = z0 - p
        if s2 <= 0.0:
            s2 = 0.0
        s = math.sqrt(s2)
        if s == 0.0:
            for z in _quadratic_real(r, p, 1.0):
                if z >= 0.0:
                    sq = math.sqrt(z)
                    ys.extend([sq, -sq])
        else:
            u = 0.5 * (z0 - q / s)
            v = 0.5 * (z0 + q / s)
            ys.extend(_quadratic_real(u, s, 1.0))
            ys.extend(_quadratic_real(v, -s, 1.0))
    return sorted(polish_root(c, y + shift) for y in ys)


def uni_roots(coeffs) -> np.ndarray:
    """Real roots of an arbitrary-degree polynomial via companion eigenvalues.

    Eigenvalues with imaginary part below 1e-8 * (1 + |real|) are accepted as
    real.  Raises AllZeroPolynomial when the effective degree is < 1.
    """
    c = trim_coeffs(coeffs)
    if c.size < 2:
        raise AllZeroPolynomial("polynomial has no degree after trimming")
    roots = _npoly.polyroots(c)
    real = roots.real[np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))]
    return np.sort(real)


def real_roots_any(coeffs) -> list[float]:
    """Real roots via the cheapest adequate method (closed form up to deg 4)."""
    c = trim_coeffs(coeffs)
    deg = c.size - 1
    if deg < 1:
        return []
    if deg <= 4:
        padded = np.zeros(5)
        padded[: c.size] = c
        try:
            return quartic_roots(padded)
        except AllZeroPolynomial:
            return []
    return [float(r) for r in uni_roots(c)]


# ---------------------------------------------------------------------------
# bivariate polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiPoly:
    """Dense bivariate polynomial: c[i, j] is the coefficient of w^i lam^j."""

    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", np.atleast_2d(np.asarray(self.c, dtype=float)))

    @property
    def deg_w(self) -> int:
        return self.c.shape[0] - 1

    @property
    def deg_lam(self) -> int:
        return self.c.shape[1] - 1

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.c).max())

    def trimmed(self, rel_tol: float = TRIM_REL_TOL) -> "BiPoly":
        a = np.abs(self.c)
        top = a.max()
        if top == 0.0:
            return BiPoly(np.zeros((1, 1)))
        rows = np.nonzero(a.max(axis=1) >= rel_tol * top)[0]
        cols = np.nonzero(a.max(axis=0) >= rel_tol * top)[0]
        return BiPoly(self.c[: rows[-1] + 1, : cols[-1] + 1].copy())

    def scaled(self, s: float) -> "BiPoly":
        return BiPoly(self.c * s)

    def normalized(self) -> "BiPoly":
        top = self.max_abs
        return self if top == 0.0 else BiPoly(self.c / top)

    def __add__(self, other: "BiPoly") -> "BiPoly":
        nw = max(self.c.shape[0], other.c.shape[0])
        nl = max(self.c.shape[1], other.c.shape[1])
        out = np.zeros((nw, nl))
        out[: self.c.shape[0], : self.c.shape[1]] += self.c
        out[: other.c.shape[0], : other.c.shape[1]] += other.c
        return BiPoly(out)

    def __sub__(self, other: "BiPoly") -> "BiPoly":
        return self + other.scaled(-1.0)

    def __mul__(self, other: "BiPoly") -> "BiPoly":
        a, b = self.c, other.c
        out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                v = a[i, j]
                if v != 0.0:
                    out[i: i + b.shape[0], j: j + b.shape[1]] += v * b
        return BiPoly(out)

    def lam_slice(self, w: float) -> np.ndarray:
        """Coefficients in lam of the restriction to a fixed w."""
        powers = w ** np.arange(self.c.shape[0])
        return powers @ self.c

    def d_dw(self) -> "BiPoly":
        if self.c.shape[0] == 1:
            return BiPoly(np.zeros((1, self.c.shape[1])))
        return BiPoly(self.c[1:] * np.arange(1, self.c.shape[0])[:, None])

    def d_dlam(self) -> "BiPoly":
        if self.c.shape[1] == 1:
            return BiPoly(np.zeros((self.c.shape[0], 1)))
        return BiPoly(self.c[:, 1:] * np.arange(1, self.c.shape[1])[None, :])


def bipoly_eval(p: BiPoly, w, lam):
    """Evaluate p at (w, lam); accepts scalars or broadcastable arrays."""
    return _npoly.polyval2d(w, lam, p.c)


# ---------------------------------------------------------------------------
# Sylvester resultant via evaluation-interpolation
# ---------------------------------------------------------------------------

def _coeff_rows(p: BiPoly, eliminate: str) -> np.ndarray:
    """Coefficient polys of the eliminated variable, as rows in the kept one.

    Returns an array (deg_elim+1, deg_kept+1): row j holds the ascending
    kept-variable coefficients of the degree-j term in the eliminated one.
    """
    if eliminate == "lam":
        return p.c.T
    if eliminate == "w":
        return p.c
    raise ValueError(f"unknown variable {eliminate!r}")


def _resultant_cheb(p: BiPoly, q: BiPoly, eliminate: str,
                    halfwidth: float) -> np.ndarray:
    """Chebyshev series (on [-halfwidth, halfwidth]) of the resultant.

    Evaluates the Sylvester determinant at deg_bound+1 Chebyshev nodes of the
    kept variable and fits the series.  Raises ZeroResultant when the
    determinant is rounding noise at every node (common-factor inputs).
    """
    p = p.normalized().trimmed()
    q = q.normalized().trimmed()
    pa = _coeff_rows(p, eliminate)
    qa = _coeff_rows(q, eliminate)
    m = pa.shape[0] - 1
    n = qa.shape[0] - 1
    if m < 1 or n < 1:
        raise ValueError("both polynomials need positive degree in the eliminated variable")
    deg_bound = n * (pa.shape[1] - 1) + m * (qa.shape[1] - 1)
    n_nodes = deg_bound + 1
    xi = np.cos(np.pi * (2.0 * np.arange(n_nodes) + 1.0) / (2.0 * n_nodes))
    nodes = halfwidth * xi

    vp = nodes[:, None] ** np.arange(pa.shape[1])[None, :]
    vq = nodes[:, None] ** np.arange(qa.shape[1])[None, :]
    pvals = vp @ pa.T      # (n_nodes, m+1): value of each coeff poly per node
    qvals = vq @ qa.T

    size = m + n
    syl = np.zeros((n_nodes, size, size))
    prow = pvals[:, ::-1]  # descending: A_m ... A_0
    qrow = qvals[:, ::-1]
    for r in range(n):
        syl[:, r, r: r + m + 1] = prow
    for r in range(m):
        syl[:, n + r, r: r + n + 1] = qrow
    dets = np.linalg.det(syl)

    # a genuine common factor leaves only rounding noise in the determinant
    # at every node; the Hadamard bound makes the test scale-aware (measured
    # noise floor ~1e-16 of the bound, generic systems sit >= 2e-14 of it)
    hadamard = np.exp(np.sum(np.log(np.maximum(
        np.linalg.norm(syl, axis=2), 1e-300)), axis=1))
    if np.abs(dets).max() < 3e-15 * max(hadamard.max(), 1e-300):
        raise ZeroResultant("resultant vanishes identically: inputs share a factor")

    cv = _cheb.chebfit(xi, dets, deg_bound)
    top = np.abs(cv).max()
    if top > 0.0:
        keep = np.nonzero(np.abs(cv) >= 1e-14 * top)[0]
        cv = cv[: keep[-1] + 1]
    return cv


def sylvester_resultant(p: BiPoly, q: BiPoly, eliminate: str = "lam",
                        halfwidth: float = 2.0) -> np.ndarray:
    """Resultant of p and q w.r.t. one variable, as ascending coeffs in the other.

    Evaluation-interpolation at Chebyshev nodes over [-halfwidth, halfwidth];
    the returned coefficients are trimmed and scale-invariant up to an overall
    constant (inputs are normalized to unit max coefficient first).
    """
    cv = _resultant_cheb(p, q, eliminate, halfwidth)
    coeffs_xi = _cheb.cheb2poly(cv)
    coeffs = coeffs_xi / (halfwidth ** np.arange(coeffs_xi.size))
    return trim_coeffs(coeffs)


def _cheb_real_roots(cv: np.ndarray, halfwidth: float, polish_steps: int = 2,
                     imag_rel_tol: float = 1e-8) -> list[float]:
    """Real roots of a Chebyshev series via the colleague matrix + polish.

    A generous imag_rel_tol admits near-real pairs that rounding pushed off
    the axis; roots well outside the fit interval come back inaccurate.
    Callers are expected to verify candidates independently either way.
    """
    cv = np.asarray(cv, dtype=float)
    if cv.size < 2:
        return []
    roots = _cheb.chebroots(cv)
    real = roots.real[np.abs(roots.imag) <= imag_rel_tol * (1.0 + np.abs(roots.real))]
    dcv = _cheb.chebder(cv)
    out = []
    for x in real:
        fx = _cheb.chebval(x, cv)
        for _ in range(polish_steps):
            dfx = _cheb.chebval(x, dcv)
            if dfx == 0.0 or not math.isfinite(dfx):
                break
            x_new = x - fx / dfx
            f_new = _cheb.chebval(x_new, cv)
            if not math.isfinite(x_new) or abs(f_new) >= abs(fx):
                break
            x, fx = x_new, f_new
        out.append(float(x) * halfwidth)
    return sorted(out)


def _dedup_sorted(values: list[float], rel_tol: float) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > rel_tol * max(1.0, abs(v)):
            out.append(v)
    return out


def _balance_scales(polys: list[BiPoly]) -> tuple[float, float]:
    """Substitution scale for lam that flattens the coefficient decay.

    Fits log|column max| ~ alpha + j*v over the lam degrees and returns
    (1, e^-v): the geometry makes the lam columns decay sharply when the
    image points sit near the center, which would otherwise starve the
    resultant.  The kept variable w is left alone so its roots stay inside
    the Chebyshev node interval.
    """
    rows = []
    rhs = []
    for p in polys:
        col_max = np.abs(p.normalized().c).max(axis=0)
        for j, v in enumerate(col_max):
            if v > 1e-300:
                rows.append([1.0, float(j)])
                rhs.append(np.log(v))
    A = np.asarray(rows)
    if A.shape[0] < 2 or np.linalg.matrix_rank(A) < 2:
        return 1.0, 1.0
    sol, *_ = np.linalg.lstsq(A, np.asarray(rhs), rcond=None)
    bl = float(np.exp(np.clip(-sol[1], np.log(1e-3), np.log(1e6))))
    return 1.0, bl


def _scale_vars(p: BiPoly, bw: float, bl: float) -> BiPoly:
    c = p.c * (bw ** np.arange(p.c.shape[0]))[:, None]
    c = c * (bl ** np.arange(p.c.shape[1]))[None, :]
    return BiPoly(c)


def _stack_grids(polys: list[BiPoly]) -> np.ndarray:
    """Pad coefficient grids to a common shape and stack them (k, I, J)."""
    I = max(p.c.shape[0] for p in polys)
    J = max(p.c.shape[1] for p in polys)
    out = np.zeros((len(polys), I, J))
    for k, p in enumerate(polys):
        out[k, : p.c.shape[0], : p.c.shape[1]] = p.c
    return out


def _horner2d_stack(grids: np.ndarray, W: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Evaluate k stacked bivariate grids at n points; returns (k, n)."""
    k, I, J = grids.shape
    wp = W[None, :] ** np.arange(I)[:, None]                # (I, n)
    lp = L[None, :] ** np.arange(J)[:, None]                # (J, n)
    rows = grids.reshape(k * I, J) @ lp
    return (rows.reshape(k, I, W.size) * wp[None, :, :]).sum(axis=1)


def _batched_real_roots(coeff_rows: np.ndarray, imag_rel_tol: float = 1e-6):
    """Real roots of many ascending-coefficient polynomials at once.

    Rows are grouped by effective degree and solved with batched companion
    eigenvalues.  Returns (row_index, root) pairs; meant for seed generation,
    where moderate accuracy suffices.
    """
    c = np.asarray(coeff_rows, dtype=float)
    scale = np.abs(c).max(axis=1)
    ok = scale > 0
    cn = np.zeros_like(c)
    cn[ok] = c[ok] / scale[ok, None]
    signif = np.abs(cn) > 1e-12
    degs = np.where(signif.any(axis=1),
                    c.shape[1] - 1 - np.argmax(signif[:, ::-1], axis=1), 0)
    out_idx: list[np.ndarray] = []
    out_roots: list[np.ndarray] = []
    for d in range(1, c.shape[1]):
        rows = np.nonzero(degs == d)[0]
        if rows.size == 0:
            continue
        block = cn[rows][:, : d + 1]
        lead = block[:, d]
        comp = np.zeros((rows.size, d, d))
        comp[:, 1:, :-1] = np.eye(d - 1)
        comp[:, :, -1] = -block[:, :d] / lead[:, None]
        ev = np.linalg.eigvals(comp)
        mask = np.abs(ev.imag) <= imag_rel_tol * (1.0 + np.abs(ev.real))
        ridx = np.repeat(rows, d).reshape(rows.size, d)
        out_idx.append(ridx[mask])
        out_roots.append(ev.real[mask])
    if not out_idx:
        return np.empty(0, dtype=int), np.empty(0)
    return np.concatenate(out_idx), np.concatenate(out_roots)


def _gauss_newton_batch(polys: list[BiPoly], grads: list[tuple[BiPoly, BiPoly]],
                        w0: np.ndarray, lam0: np.ndarray,
                        steps: int = 9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Guarded Gauss-Newton refinement of many joint-root seeds at once.

    The resultant only locates roots to within its interpolation accuracy;
    evaluating the (low-degree, well-scaled) system itself is exact enough
    for quadratic convergence from there, and using every equation pulls
    seeds onto the true variety instead of a pair's spurious intersections.
    Seeds freeze as soon as no (possibly halved) step improves.  Returns
    (w, lam, worst absolute residual over the system).
    """
    W = np.asarray(w0, dtype=float).copy()
    L = np.asarray(lam0, dtype=float).copy()
    P = _stack_grids(polys)
    G = _stack_grids([g for pair in grads for g in pair])   # (2k, I, J)
    k = len(polys)

    r = _horner2d_stack(P, W, L)
    err = np.abs(r).max(axis=0)
    idx = np.nonzero(err > 1e-15)[0]
    for _ in range(steps):
        if idx.size == 0:
            break
        Wa, La, ra = W[idx], L[idx], r[:, idx]
        err_before = err[idx]
        jac = _horner2d_stack(G, Wa, La)
        jw, jl = jac[0::2], jac[1::2]
        a = np.sum(jw * jw, axis=0)
        b = np.sum(jw * jl, axis=0)
        c = np.sum(jl * jl, axis=0)
        r0 = np.sum(jw * ra, axis=0)
        r1 = np.sum(jl * ra, axis=0)
        det = a * c - b * b
        safe = np.abs(det) > 1e-300
        det_s = np.where(safe, det, 1.0)
        dw = np.where(safe, (c * r0 - b * r1) / det_s, 0.0)
        dl = np.where(safe, (a * r1 - b * r0) / det_s, 0.0)
        erra = err[idx]
        improved = np.zeros(idx.size, dtype=bool)
        scale = 1.0
        for _ in range(4):   # step halving for overshooting seeds
            trial = safe & ~improved
            if not trial.any():
                break
            Wt = np.where(trial, Wa - scale * dw, Wa)
            Lt = np.where(trial, La - scale * dl, La)
            rt = _horner2d_stack(P, Wt, Lt)
            errt = np.abs(rt).max(axis=0)
            good = trial & np.isfinite(errt) & (errt < erra)
            Wa = np.where(good, Wt, Wa)
            La = np.where(good, Lt, La)
            ra = np.where(good[None, :], rt, ra)
            erra = np.where(good, errt, erra)
            improved |= good
            scale *= 0.5
        W[idx], L[idx], r[:, idx], err[idx] = Wa, La, ra, erra
        # drop seeds that improve too slowly to ever reach convergence
        # within the budget (the stalled shadows of roots at infinity)
        progress = erra < 0.9 * err_before
        idx = idx[improved & (erra > 1e-15) & (progress | (erra < 1e-9))]
    return W, L, err


def bivariate_roots(
    polys: list[BiPoly],
    primary_pair: tuple[int, int] = (0, 1),
    w_min_abs: float = DEFAULT_W_MIN_ABS,
    verify_rel_tol: float = VERIFY_REL_TOL,
    halfwidth: float = 4.0,
    converged_tol: float = 1e-11,
) -> list[tuple[float, float]]:
    """Common real roots (w, lam) of a polynomial system.

    Eliminates lam between the primary pair by resultant (Chebyshev form, so
    high-degree roots stay well conditioned inside the node interval),
    recovers lam seeds from the polynomials' slices at each resultant root,
    refines every seed by Gauss-Newton on the full system, saturates away
    the w ~ 0 variety via the |w| >= w_min_abs filter, and keeps only pairs
    at which *every* input polynomial is below verify_rel_tol (relative to
    its own max coefficient).  Refined candidates must additionally converge
    to converged_tol: genuine affine roots reach machine level, while
    shadows of the system's solutions at infinity stall around 1e-7 and are
    dropped.  An empty list is a valid outcome; ZeroResultant propagates.
    """
    if len(polys) < 2:
        raise ValueError("need at least two polynomials")
    i, j = primary_pair
    if i == j:
        raise ValueError("primary_pair indices must differ")
    normed = [p.normalized().trimmed() for p in polys]
    bw, bl = _balance_scales([normed[i], normed[j]])
    work = [_scale_vars(p, bw, bl).normalized() for p in normed]
    cv = _resultant_cheb(work[i], work[j], "lam", halfwidth)
    # raw colleague-matrix roots seed the 2x2 Newton below; polishing them on
    # the (noisy) interpolated resultant only moves seeds across basins
    w_roots = _cheb_real_roots(cv, halfwidth, polish_steps=0, imag_rel_tol=0.05)
    if not w_roots:
        return []

    grads = [(p.d_dw(), p.d_dlam()) for p in work]
    # lam seeds: real roots of every polynomial's slice at every w root,
    # found with batched companion eigenvalues (generous tolerances; the
    # Gauss-Newton pass below is what establishes accuracy)
    wr = np.asarray(w_roots)
    width = max(s.c.shape[1] for s in work)
    slice_rows = []
    slice_w = []
    for s in work:
        pw = wr[:, None] ** np.arange(s.c.shape[0])[None, :]
        block = np.zeros((wr.size, width))
        block[:, : s.c.shape[1]] = pw @ s.c
        slice_rows.append(block)
        slice_w.append(wr)
    rows = np.vstack(slice_rows)
    row_w = np.concatenate(slice_w)
    ridx, lroots = _batched_real_roots(rows, imag_rel_tol=1e-2)
    if ridx.size == 0:
        return []
    # all four slices at one w share their lam roots: dedup seeds before
    # refining (w identity = same root index modulo the stacking)
    seed_w = row_w[ridx]
    widx = ridx % wr.size
    order_seed = np.lexsort((lroots, widx))
    sw, sl, si = seed_w[order_seed], lroots[order_seed], widx[order_seed]
    keep = np.ones(sw.size, dtype=bool)
    keep[1:] = (np.diff(si) != 0) | (np.abs(np.diff(sl)) > 1e-6 * (1.0 + np.abs(sl[1:])))
    W, L, err = _gauss_newton_batch(work, grads, sw[keep], sl[keep])

    accept = min(verify_rel_tol, converged_tol)
    cands = sorted(
        (float(e), float(w), float(lam))
        for w, lam, e in zip(W, L, err)
        if e <= accept and abs(w * bw) >= w_min_abs
    )
    # keep the best-converged representative of each root cluster (the same
    # root is reached through several slices and smears under refinement)
    kept: list[tuple[float, float]] = []
    for _, w, lam in cands:
        dup = any(
            abs(w - w0) <= 1e-2 * max(1.0, abs(w0))
            and abs(lam - l0) <= 1e-2 * max(1.0, abs(l0))
            for w0, l0 in kept
        )
        if not dup:
            kept.append((w, lam))
    return sorted((w * bw, lam * bl) for w, lam in kept)
