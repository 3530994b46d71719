"""Energy of a plantation, two-bubble interactions, curvature integrals and symmetric cancellations."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bubbles import bubble_eval
from .config import BubbleParams, Configuration, CurvatureModel, OutOfTubeError, curvature_eval
from .constants import bubble_mass
from .quadrature import BubbleMixture, QuadratureSpec, gauss_kronrod, integrate_axisym, integrate_mc, sphere_area


@dataclass(frozen=True)
class IntegralReport:
    value: float
    error_estimate: float
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be nonnegative")

    def to_dict(self) -> dict:
        return {"value": self.value, "error_estimate": self.error_estimate, "method": self.method,
                "metadata": self.metadata}


def _log_breaks(hi: float, start: float = 1.0) -> list[float]:
    out, b = [], start
    while b < hi:
        out.append(b)
        b *= 10.0
    return out


def interaction_integral(b1: BubbleParams, b2: BubbleParams, n: int,
                         spec: QuadratureSpec = QuadratureSpec()) -> IntegralReport:
    """Integral of V1^((n+2)/(n-2)) V2 over R^n, reduced to (r, theta) about xi_1.

    With z = (y - xi_1)/lam_1 the integral is lam_1^((n-2)/2) times the integral of
    (1+|z|^2)^(-(n+2)/2) V2(xi_1 + lam_1 z). V2 is normalized by its far-field size
    so the quadrature works on an O(1) integrand.
    """
    D = float(np.linalg.norm(b1.center - b2.center))
    if D == 0:
        raise ValueError("interaction integral needs distinct centers")
    l1, l2 = b1.lam, b2.lam
    e = 0.5 * (n - 2)
    far = (l2 / (D * D)) ** e

    def g(s, th):
        # |y - xi_2|^2 written without cancellation near xi_2
        dist2 = (D - l1 * s) ** 2 + 4.0 * l1 * s * D * np.sin(0.5 * th) ** 2
        return (1 + s * s) ** (-0.5 * (n + 2)) * (D * D / (l2 * l2 + dist2)) ** e

    sc = D / l1
    w = l2 / l1
    r_breaks = set(_log_breaks(sc))
    r_breaks.update(x for x in (sc - 10 * w, sc - w, sc, sc + w, sc + 10 * w) if x > 0)
    th_breaks = [t for t in (l2 / D, 10 * l2 / D, 100 * l2 / D) if t < 0.5 * np.pi]
    val, err = integrate_axisym(g, n, spec, r_breaks=sorted(r_breaks), theta_breaks=th_breaks,
                                return_error=True)
    factor = l1**e * far
    return IntegralReport(val * factor, err * factor, "axisym",
                          {"lambda1": l1, "lambda2": l2, "distance": D, "qh_distance": D / math.sqrt(l1 * l2)})


def _axis_geometry(b: BubbleParams, model: CurvatureModel, rho: float):
    """Axis through xi normal to H, signed offset of xi from H, and the kink curve of eta."""
    xi = b.center
    n = len(xi)
    if model.kind == "hyperplane":
        axis = np.zeros(n)
        axis[-1] = 1.0
        offset = float(xi[-1])

        def eta(s, th):
            return np.abs(offset + b.lam * s * np.cos(th))

        def split(s):
            r = b.lam * s
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(r > abs(offset), np.arccos(np.clip(-offset / r, -1, 1)), np.nan)

        kink_r = abs(offset)
    else:
        R0 = float(np.linalg.norm(xi))
        if R0 == 0:
            raise ValueError("projection onto the sphere is not unique at the origin")
        if rho >= R0:
            raise OutOfTubeError("cut-off ball contains the origin")
        axis = xi / R0
        offset = R0 - 1.0

        def eta(s, th):
            r = b.lam * s
            return np.abs(np.sqrt(R0 * R0 + r * r + 2 * R0 * r * np.cos(th)) - 1.0)

        def split(s):
            r = b.lam * s
            with np.errstate(divide="ignore", invalid="ignore"):
                c = (1.0 - R0 * R0 - r * r) / (2 * R0 * r)
                return np.where(np.abs(c) <= 1, np.arccos(np.clip(c, -1, 1)), np.nan)

        kink_r = abs(offset)
    if abs(offset) + rho > model.tube_radius:
        raise OutOfTubeError("cut-off ball escapes the validity tube of the model")
    return axis, offset, eta, split, kink_r


_KERNELS = ("energy", "lambda", "xi_normal", "xi_tangent")


def _kernel_integral(b: BubbleParams, model: CurvatureModel, rho: float, which: str,
                     spec: QuadratureSpec) -> IntegralReport:
    if which not in _KERNELS:
        raise ValueError(f"unknown kernel {which!r}")
    if not model.constant_amplitude or model.remainder is not None:
        raise ValueError("axisymmetric reduction needs a constant amplitude and the default remainder")
    n = len(b.xi)
    axis, offset, eta, split, kink_r = _axis_geometry(b, model, rho)
    C = float(model.amplitude)
    lam, ell = b.lam, model.ell
    norm = C * lam**ell  # keeps the quadrature integrand of order one

    def deficit(s, th):
        e = eta(s, th)
        return (C * e**ell - model.remainder_bound * e ** (ell + 1)) / norm

    if which == "energy":
        def g(s, th):
            return deficit(s, th) * (1 + s * s) ** (-float(n))
    elif which == "lambda":
        def g(s, th):
            return deficit(s, th) * (1 - s * s) / (1 + s * s) * (1 + s * s) ** (-float(n))
    elif which == "xi_normal":
        # (lam/(lam^2+r^2))^(n+1) (y - xi).axis dy = (1+s^2)^(-n-1) s cos(theta) dz
        def g(s, th):
            return deficit(s, th) * (1 + s * s) ** (-float(n + 1)) * s * np.cos(th)
    else:
        def g(s, th):
            return deficit(s, th) * (1 + s * s) ** (-float(n + 1)) * s * np.sin(th)

    smax = rho / lam
    breaks = _log_breaks(smax) + ([kink_r / lam] if 0 < kink_r / lam < smax else [])
    val, err = integrate_axisym(g, n, spec, r_breaks=breaks, r_max=smax, scale=1.0,
                                theta_split=split, return_error=True)
    if which == "xi_tangent":
        # integral of w_1 over the unit sphere of the orthogonal complement, done in the
        # angle phi between w and the tangent direction; it cancels left against right
        if n < 3:
            raise ValueError("tangent directions need n >= 3")
        phi_int, phi_err = gauss_kronrod(lambda p: np.cos(p) * np.sin(p) ** (n - 3), 0.0, np.pi,
                                         QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16))
        ang = (sphere_area(n - 2) if n > 3 else 2.0) * phi_int / sphere_area(n - 1)
        err = abs(ang) * err + abs(val) * phi_err
        val = val * ang
    meta = {"lambda": lam, "rho_nu": rho, "offset": offset, "eta": abs(offset), "kernel": which,
            "axis": axis.tolist()}
    return IntegralReport(val * norm, err * norm, "axisym", meta)


def curvature_integral(b: BubbleParams, model: CurvatureModel, rho_nu: float,
                       spec: QuadratureSpec = QuadratureSpec()) -> IntegralReport:
    """Integral over the ball B_xi(rho_nu) of [n(n-2) - c_n K] (lam/(lam^2+|y-xi|^2))^n."""
    return _kernel_integral(b, model, rho_nu, "energy", spec)


def curvature_gradient_integral(b: BubbleParams, model: CurvatureModel, rho_nu: float, which: str,
                                spec: QuadratureSpec = QuadratureSpec()) -> IntegralReport:
    """Same ball integral against the lambda-kernel or one component of the xi-kernel.

    lambda: factor (lam^2 - r^2)/(lam^2 + r^2) (lam/(lam^2+r^2))^n.
    xi_normal / xi_tangent: (lam/(lam^2+r^2))^(n+1) (y - xi)_j, with j along the normal
    of H through xi (pointing away from H's reference side: e_n, or xi/|xi| for the sphere)
    or along a direction orthogonal to it.
    """
    if which not in ("lambda", "xi_normal", "xi_tangent"):
        raise ValueError(f"unknown kernel {which!r}")
    return _kernel_integral(b, model, rho_nu, which, spec)


def odd_moment_integral(alpha, f_radial, R: float, n: int, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral of f(|y|) y^alpha over the ball of radius R, in hyperspherical angles.

    The monomial splits into a product of one-dimensional angular integrals; one of
    them has an odd power of a cosine and cancels.
    """
    alpha = [int(a) for a in alpha]
    if len(alpha) != n:
        raise ValueError("multi-index length must equal n")
    if all(a % 2 == 0 for a in alpha):
        raise ValueError("odd_moment_integral needs at least one odd exponent")
    return radial_moment(alpha, f_radial, R, n, spec) * sphere_moment(alpha, spec)


def radial_moment(alpha, f_radial, R: float, n: int, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral over [0, R] of |f(r)| r^(|alpha| + n - 1)."""
    k = sum(alpha)
    val, _ = gauss_kronrod(lambda r: np.abs(f_radial(r)) * r ** (k + n - 1), 0.0, R, spec)
    return val


def sphere_moment(alpha, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Integral of u^alpha over the unit sphere in R^n, as a product of angular quadratures.

    u_k = cos(phi_k) prod_{i<k} sin(phi_i) for k < n-1, and the last two coordinates
    use the full-circle angle.
    """
    n = len(alpha)
    tight = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=spec.max_subdivisions)
    out = 1.0
    for k in range(n - 2):
        a = alpha[k]
        b = sum(alpha[k + 1:]) + (n - 2 - k)
        v, _ = gauss_kronrod(lambda p: np.cos(p) ** a * np.sin(p) ** b, 0.0, np.pi, tight)
        out *= v
    a, b = alpha[n - 2], alpha[n - 1]
    v, _ = gauss_kronrod(lambda p: np.cos(p) ** a * np.sin(p) ** b, 0.0, 2 * np.pi, tight,
                         breakpoints=(0.5 * np.pi, np.pi, 1.5 * np.pi))
    return out * v


def stereographic(direction: str, point):
    """Projection from the north pole: y_i = x_i/(1 - x_{n+1}), and its inverse."""
    p = np.asarray(point, dtype=float)
    if direction == "to_plane":
        denom = 1.0 - p[..., -1]
        if np.any(denom <= 0):
            raise ValueError("the north pole has no image in the plane")
        return p[..., :-1] / denom[..., None]
    if direction == "to_sphere":
        r2 = np.sum(p * p, axis=-1)[..., None]
        return np.concatenate([2 * p / (1 + r2), (r2 - 1) / (r2 + 1)], axis=-1)
    raise ValueError(f"unknown direction {direction!r}")


def conformal_factor(y) -> float:
    """Factor 4/(1+|y|^2)^2 relating the round metric to the flat one."""
    y = np.asarray(y, dtype=float)
    return 4.0 / (1.0 + np.sum(y * y, axis=-1)) ** 2


def energy(cfg: Configuration, model: CurvatureModel | None = None, spec: QuadratureSpec = QuadratureSpec(),
           stderr_tol: float | None = None, control_variate: bool = False) -> IntegralReport:
    """Energy of the plantation W = sum of the bubbles of cfg.

    The gradient part uses the bubble equation: (1/2) int |grad W|^2 equals
    (n(n-2)/2) times the sum over all ordered (l, k) of int V_l^((n+2)/(n-2)) V_k;
    self terms are V(n) and cross terms come from the axisymmetric interaction
    integral. The curvature part is a Monte Carlo estimate with a bubble-mixture
    importance density. model=None means the flat case c_n K = n(n-2).

    With control_variate, the exactly known integrals n(n-2) V(n) of the single
    bubbles are subtracted inside the Monte Carlo integrand.
    """
    n = cfg.n
    p_exp = 2 * n / (n - 2)
    vn = bubble_mass(n)
    flat = cfg.flat
    pair_sum, pair_err = 0.0, 0.0
    for l in range(flat):
        for k in range(flat):
            if l != k:
                rep = interaction_integral(cfg.bubbles[l], cfg.bubbles[k], n, spec)
                pair_sum += rep.value
                pair_err += rep.error_estimate
    grad_term = 0.5 * n * (n - 2) * (flat * vn + pair_sum)

    def ck(y):
        if model is None:
            return n * (n - 2.0)
        return curvature_eval(model, y)

    def integrand(y):
        vals = [bubble_eval(b, y, n) for b in cfg.bubbles]
        W = np.maximum(sum(vals), 0.0)  # positive part; W > 0 already
        out = ck(y) * W**p_exp
        if control_variate:
            out = out - n * (n - 2.0) * sum(v**p_exp for v in vals)
        return out

    sampler = BubbleMixture(cfg.lambdas, cfg.centers)
    mc = integrate_mc(integrand, n, sampler, spec)
    curv = mc.value + (n * (n - 2.0) * flat * vn if control_variate else 0.0)
    coef = (n - 2) / (2.0 * n)
    value = grad_term - coef * curv
    stderr = coef * mc.stderr
    meta = {"flat": flat, "gradient_term": grad_term, "curvature_term": curv, "mc_stderr": stderr,
            "mc_samples": mc.samples, "interaction_sum": pair_sum, "control_variate": control_variate}
    if stderr_tol is not None and stderr > stderr_tol:
        meta["warning"] = f"Monte Carlo standard error {stderr:.3g} exceeds requested {stderr_tol:.3g}"
        warnings.warn(meta["warning"])
    return IntegralReport(value, stderr + 0.5 * n * (n - 2) * pair_err, "mc", meta)

