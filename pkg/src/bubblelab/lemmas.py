"""Empirical checks of three decay inequalities used to control bubble interactions.

Each suite samples points, evaluates the left side and the constant-free right
side, and records the largest ratio at several separation scales. A bounded
ratio that does not grow with the scale is what the inequality predicts.

  separation:   P_a(Y - X1) P_b(Y - X2) <= C |X1 - X2|^-s (P_{a+b-s}(Y - X1) + P_{a+b-s}(Y - X2))
  condensation: int P_c(Z) |Y - Z|^(2-n) dZ <= C P_{c-2}(Y)
  downgrade:    int [sum_l P_{e+k}(Z - X_l)] |Y - Z|^(2-n) W(Z)^(4/(n-2)) dZ <= C sum_l P_{e+k+t}(Y - X_l)

with P_a(x) = (1 + |x|)^-a, e = (n-2)/2 and W the sum of unit bubbles at the X_l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import QuadratureSpec, gauss_kronrod, sphere_area

DEFAULT_SCALES = {"separation": (10.0, 100.0, 1000.0), "condensation": (1.0, 10.0, 100.0),
                  "downgrade": (10.0, 100.0, 1000.0)}


@dataclass(frozen=True)
class LemmaReport:
    name: str
    params: dict
    scales: tuple[float, ...]
    sups: tuple[float, ...]
    samples: int
    stderr: tuple[float, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return all(math.isfinite(s) for s in self.sups)

    @property
    def nonincreasing(self) -> bool:
        """Each sup no larger than the previous one, up to two combined standard errors when
        the sups are Monte Carlo estimates (stderr nonempty); exact comparison otherwise."""
        errs = self.stderr or (0.0,) * len(self.sups)
        return all(b <= a + 2.0 * math.hypot(ea, eb)
                   for a, b, ea, eb in zip(self.sups, self.sups[1:], errs, errs[1:]))

    @property
    def strictly_nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.sups, self.sups[1:]))

    @property
    def fitted_constant(self) -> float:
        return max(self.sups)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "scales": list(self.scales), "sups": list(self.sups),
                "stderr": list(self.stderr), "samples": self.samples, "finite": self.finite,
                "nonincreasing": self.nonincreasing,
                "strictly_nonincreasing": self.strictly_nonincreasing, "fitted_constant": self.fitted_constant, **self.extra}


def _directions(rng, m, n):
    d = rng.standard_normal((m, n))
    return d / np.linalg.norm(d, axis=1)[:, None]


def _decay(x, a):
    return (1.0 + np.linalg.norm(x, axis=-1)) ** (-a)


def separation_ratio(Y, xi1, xi2, alpha: float, beta: float, sigma: float):
    """Left side over the constant-free right side of the separation inequality."""
    xi1, xi2 = np.asarray(xi1, float), np.asarray(xi2, float)
    D = float(np.linalg.norm(xi1 - xi2))
    if D == 0:
        raise ValueError("separation inequality needs distinct centers")
    lhs = _decay(Y - xi1, alpha) * _decay(Y - xi2, beta)
    c = alpha + beta - sigma
    rhs = D ** (-sigma) * (_decay(Y - xi1, c) + _decay(Y - xi2, c))
    return lhs / rhs


def _sample_points_near(rng, centers, D, m):
    """Points near the centers at log-uniform radii, plus points around the joining segment."""
    n = centers.shape[1]
    k = len(centers)
    near = (2 * m) // 3
    which = rng.integers(0, k, near)
    rad = np.exp(rng.uniform(math.log(1e-2), math.log(10 * D), near))
    pts_near = centers[which] + rad[:, None] * _directions(rng, near, n)
    rest = m - near
    u = rng.uniform(0, 1, rest)
    i, j = rng.integers(0, k, rest), rng.integers(0, k, rest)
    seg = centers[i] + u[:, None] * (centers[j] - centers[i]) + 0.1 * D * rng.standard_normal((rest, n))
    return np.vstack([pts_near, seg])


def _separated_centers(rng, n, flat, D):
    """flat centers, the first at the origin, with consecutive distance D along random directions."""
    while True:
        centers = np.zeros((flat, n))
        for l in range(1, flat):
            centers[l] = centers[l - 1] + D * _directions(rng, 1, n)[0]
        dist = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
        if np.all(dist[np.triu_indices(flat, 1)] > 0.5 * D):  # degenerate draws are resampled
            return centers


def _separation_suite(params, samples, seed, scales):
    n = int(params.get("n", 6))
    a, b, s = (float(params.get(k)) for k in ("alpha", "beta", "sigma"))
    if not 0 < s <= min(a, b):
        raise ValueError("need 0 < sigma <= min(alpha, beta)")
    sups = []
    for D in scales:
        rng = np.random.default_rng(seed)  # same stream at every scale: common random numbers
        centers = _separated_centers(rng, n, 2, D)
        Y = _sample_points_near(rng, centers, D, samples)
        sups.append(float(np.max(separation_ratio(Y, centers[0], centers[1], a, b, s))))
    return sups, [], {}


# ------------------------------------------------------------------ condensation

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _composite_cumulative(f, edges):
    """Integrals of f over consecutive panels [edges[i], edges[i+1]] by 20-point Gauss-Legendre."""
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_X
    return (0.5 * (hi - lo) * f(x) * _GL_W).sum(axis=1)


def _partial(f, a, b):
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X
    return (0.5 * (b - a)[:, None] * f(x) * _GL_W).sum(axis=1)


def newton_potential_radial(f, R, n: int, spec: QuadratureSpec = QuadratureSpec(rel_tol=1e-12)):
    """Integral of f(|Z|) |Y - Z|^(2-n) over R^n, as a function of R = |Y|.

    The sphere average of |Y - Z|^(2-n) over |Z| = r is max(R, r)^(2-n), giving
    omega_n [R^(2-n) int_0^R f r^(n-1) dr + int_R^inf f r dr]. Both parts use a
    composite rule on a logarithmic grid; the far tail uses an adaptive rule in t = 1/r.
    """
    R = np.atleast_1d(np.asarray(R, dtype=float))
    edges = np.concatenate([[0.0], np.logspace(-6, 8, 281)])
    inner = lambda r: f(r) * r ** (n - 1)  # noqa: E731
    outer = lambda r: f(r) * r  # noqa: E731
    cum_in = np.concatenate([[0.0], np.cumsum(_composite_cumulative(inner, edges))])
    top, _ = gauss_kronrod(lambda t: f(1.0 / t) / t**3, 0.0, 1.0 / edges[-1], spec)
    cum_out = np.concatenate([np.cumsum(_composite_cumulative(outer, edges)[::-1])[::-1], [0.0]]) + top
    idx = np.clip(np.searchsorted(edges, R, side="right") - 1, 0, len(edges) - 2)
    left = edges[idx]
    right = edges[idx + 1]
    A = cum_in[idx] + _partial(inner, left, R)
    B = cum_out[idx + 1] + _partial(outer, R, right)
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.where(R > 0, R ** (2 - n) * A, 0.0)  # the inner mass vanishes faster than R^(n-2)
    return sphere_area(n) * (near + B)


def _condensation_suite(params, samples, seed, scales):
    n = int(params.get("n", 6))
    c = float(params.get("varsigma"))
    if not 2 < c < n:
        raise ValueError("need 2 < varsigma < n")
    f = lambda r: (1.0 + r) ** (-c)  # noqa: E731
    sups = []
    for s in scales:
        rng = np.random.default_rng(seed)
        R = s * np.exp(rng.uniform(0, math.log(10.0), samples))
        lhs = newton_potential_radial(f, R, n)
        sups.append(float(np.max(lhs / (1.0 + R) ** (2 - c))))
    return sups, [], {}


# ------------------------------------------------------------------ downgrade

class _DowngradeEstimator:
    """Importance sampling of the downgrade integral at many points Y with common random numbers.

    Half the Z draws are centered at Y with |Z - Y| distributed as s (1+s)^-4 ds,
    which cancels the Newton kernel singularity; the other half are centered at the
    X_l with density proportional to (1+|Z - X_l|)^-(n+1), a tail heavier than the
    integrand's. Every Y sees the same base draws.
    """

    q = 4.0

    def __init__(self, centers, kappa, rng, m):
        self.centers = centers
        self.n = centers.shape[1]
        self.a = 0.5 * (self.n - 2) + kappa
        n = self.n
        half = m // 2
        t = rng.beta(2.0, self.q - 2.0, half)
        self.w = (t / (1 - t))[:, None] * _directions(rng, half, n)
        t = rng.beta(float(n), 1.0, m - half)
        self.zc = centers[np.arange(m - half) % len(centers)] + (t / (1 - t))[:, None] * _directions(rng, m - half, n)
        self.m = m

    def _f(self, Z):
        dist = np.linalg.norm(Z[..., None, :] - self.centers, axis=-1)
        weight = np.sum((1.0 + dist) ** (-self.a), axis=-1)
        W = np.sum((1.0 + dist * dist) ** (-0.5 * (self.n - 2)), axis=-1)
        return weight * W ** (4.0 / (self.n - 2))

    def _density(self, Z, Y):
        n, q = self.n, self.q
        s = np.linalg.norm(Z - Y[:, None, :], axis=-1)
        pA = (q - 1) * (q - 2) * s * (1 + s) ** (-q) / (sphere_area(n) * s ** (n - 1))
        dist = np.linalg.norm(Z[..., None, :] - self.centers, axis=-1)
        pB = np.mean(n * (1 + dist) ** (-(n + 1.0)), axis=-1) / sphere_area(n)
        return 0.5 * pA + 0.5 * pB, s

    def estimate(self, Y, chunk=64):
        est, err = np.empty(len(Y)), np.empty(len(Y))
        for i in range(0, len(Y), chunk):
            y = Y[i:i + chunk]
            Z = np.concatenate([y[:, None, :] + self.w[None], np.broadcast_to(self.zc, (len(y),) + self.zc.shape)],
                               axis=1)
            p, s = self._density(Z, y)
            vals = self._f(Z) * s ** (2.0 - self.n) / p
            est[i:i + chunk] = vals.mean(axis=1)
            err[i:i + chunk] = vals.std(axis=1, ddof=1) / math.sqrt(vals.shape[1])
        return est, err


def _downgrade_suite(params, samples, seed, scales):
    n = int(params.get("n", 6))
    kappa = float(params.get("kappa"))
    theta = float(params.get("theta", 0.1))
    flat = int(params.get("flat", 2))
    inner = int(params.get("inner_samples", 256))
    stages = params.get("refine_stages", ((200, 8192), (10, 200_000)))
    if not 0 < kappa < 2:
        raise ValueError("need kappa in (0, 2)")
    if not theta > 0:
        raise ValueError("need theta > 0")
    if flat < 2:
        raise ValueError("the downgrade inequality is stated for at least two bubbles")
    e = 0.5 * (n - 2)
    sups, errs = [], []
    for D in scales:
        rng = np.random.default_rng(seed)
        centers = _separated_centers(rng, n, flat, D)
        Y = _sample_points_near(rng, centers, D, samples)
        rhs = np.sum((1.0 + np.linalg.norm(Y[:, None] - centers, axis=-1)) ** (-(e + kappa + theta)), axis=1)
        est, err = _DowngradeEstimator(centers, kappa, rng, inner).estimate(Y)
        idx = np.arange(len(Y))
        # re-estimate the most extreme candidates with fresh, larger draws so the
        # maximum is not driven by the noise of the previous pass
        for keep, m in stages:
            idx = idx[np.argsort(est / rhs[idx])[-keep:]]
            est, err = _DowngradeEstimator(centers, kappa, rng, m).estimate(Y[idx], chunk=max(1, 2**16 // m))
        ratio = est / rhs[idx]
        k = int(np.argmax(ratio))
        sups.append(float(ratio[k]))
        errs.append(float(err[k] / rhs[idx][k]))
    return sups, errs, {"theta": theta}


_SUITES = {"separation": _separation_suite, "condensation": _condensation_suite, "downgrade": _downgrade_suite}


def lemma_suite(name: str, params: dict, samples: int, seed: int, scales=None) -> LemmaReport:
    """Largest sampled ratio of left side to constant-free right side at each scale."""
    if name not in _SUITES:
        raise ValueError(f"unknown lemma {name!r}")
    if int(samples) < 1:
        raise ValueError("samples must be positive")
    scales = tuple(float(s) for s in (scales or DEFAULT_SCALES[name]))
    sups, errs, extra = _SUITES[name](dict(params), int(samples), seed, scales)
    return LemmaReport(name, dict(params), scales, tuple(sups), int(samples), tuple(errs), extra)
