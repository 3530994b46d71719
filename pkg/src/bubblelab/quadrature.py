"""Adaptive Gauss-Kronrod quadrature for radial and axisymmetric integrals, plus seeded Monte Carlo.

Radial and axial reductions turn the n-dimensional integrals of this package into
1D and 2D ones. Half-line integrals are mapped so that r in [s, inf) becomes
t = s/r in (0, 1], which is exact for the rational integrands used here.
"""

from __future__ import annotations

import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import gammaln

# 15-point Kronrod nodes on [-1, 1] (nonnegative half) and the embedded 7-point Gauss weights.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS = np.zeros(15)
GAUSS[1:7:2] = _WG[:3]
GAUSS[7] = _WG[3]
GAUSS[9:14:2] = _WG[2::-1]


class QuadratureError(RuntimeError):
    """Raised when the error target is not met; carries the best value found."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(f"{message} (partial value {value:.6g}, error {error:.3g})")
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-15
    max_subdivisions: int = 4000
    truncation_radius: float = math.inf
    mc_samples: int = 10**6
    seed: int = 0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be at least 1000")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")
        if not self.truncation_radius > 0:
            raise ValueError("truncation radius must be positive")

    def target(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


def sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n."""
    if n < 1:
        raise ValueError("n must be positive")
    return float(2.0 * np.exp(0.5 * n * np.log(np.pi) - gammaln(0.5 * n)))


def ball_volume(n: int, radius: float = 1.0) -> float:
    return sphere_area(n) * radius**n / n


def gauss_kronrod(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                  spec: QuadratureSpec = QuadratureSpec(), breakpoints=()) -> tuple[float, float]:
    """Globally adaptive 15-point Kronrod quadrature of a vectorized f over [a, b].

    The error of a panel is |K15 - G7|; the worst panel is bisected until the
    summed error is below the tolerance.
    """
    cuts = np.unique(np.concatenate([[a, b], [p for p in breakpoints if a < p < b]]))

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        fx = np.asarray(f(0.5 * (lo + hi) + half * NODES), dtype=float)
        k = half * float(KRONROD @ fx)
        return k, abs(k - half * float(GAUSS @ fx))

    heap = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        k, e = panel(lo, hi)
        heap.append((-e, lo, hi, k))
    heapq.heapify(heap)
    splits = 0
    while True:
        value = math.fsum(h[3] for h in heap)
        error = math.fsum(-h[0] for h in heap)
        if error <= spec.target(value):
            return value, error
        if splits >= spec.max_subdivisions:
            raise QuadratureError("1D quadrature did not converge", value, error)
        _, lo, hi, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for l, h in ((lo, mid), (mid, hi)):
            k, e = panel(l, h)
            heapq.heappush(heap, (-e, l, h, k))
        splits += 1


class _HalfLine:
    """Map u in [0, 2] onto r in [0, inf): linear up to the scale s, then r = s/(2-u)."""

    def __init__(self, scale: float, r_max: float = math.inf):
        self.s = float(scale)
        self.finite = math.isfinite(r_max)
        self.r_max = r_max
        self.u_max = 1.0 if self.finite else 2.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.finite:
            return self.r_max * u, np.full_like(u, self.r_max)
        t = np.where(u <= 1.0, 1.0, 2.0 - u)
        r = np.where(u <= 1.0, self.s * u, self.s / t)
        dr = np.where(u <= 1.0, self.s, self.s / t**2)
        return r, dr

    def to_u(self, r: float) -> float:
        if self.finite:
            return r / self.r_max
        return r / self.s if r <= self.s else 2.0 - self.s / r


def _radial_map(spec: QuadratureSpec, breakpoints, scale=None, r_max=None):
    breaks = sorted(float(b) for b in breakpoints if b > 0)
    if r_max is None:
        r_max = spec.truncation_radius
    if scale is None:
        scale = breaks[-1] if breaks else 1.0
    hl = _HalfLine(scale, r_max)
    ubreaks = [hl.to_u(b) for b in breaks if b < r_max]
    if not hl.finite:
        ubreaks.append(1.0)
    return hl, ubreaks


def integrate_radial(g: Callable[[np.ndarray], np.ndarray], n: int, spec: QuadratureSpec = QuadratureSpec(),
                     breakpoints=(), scale: float | None = None, r_max: float | None = None,
                     return_error: bool = False):
    """omega_n times the integral of g(r) r^(n-1) over [0, inf), or over [0, truncation_radius]."""
    hl, ubreaks = _radial_map(spec, breakpoints, scale, r_max)

    def integrand(u):
        r, dr = hl(u)
        with np.errstate(over="ignore", invalid="ignore"):
            val = np.asarray(g(r), dtype=float) * r ** (n - 1) * dr
        return np.where(np.isfinite(val), val, 0.0)

    area = sphere_area(n)
    value, err = gauss_kronrod(integrand, 0.0, hl.u_max, _scaled(spec, area), ubreaks)
    if return_error:
        return area * value, area * err
    return area * value


def _scaled(spec: QuadratureSpec, factor: float) -> QuadratureSpec:
    # tolerances apply to the final value, so the absolute target is rescaled
    # for the un-multiplied integral
    return replace(spec, abs_tol=spec.abs_tol / factor)


def _product_rule(G, u0, u1, v0, v1):
    hu, hv = 0.5 * (u1 - u0), 0.5 * (v1 - v0)
    U = 0.5 * (u0 + u1) + hu * NODES
    V = 0.5 * (v0 + v1) + hv * NODES
    F = np.asarray(G(U[:, None], V[None, :]), dtype=float)
    scale = hu * hv
    kk = scale * KRONROD @ F @ KRONROD
    gu = scale * GAUSS @ F @ KRONROD
    gv = scale * KRONROD @ F @ GAUSS
    return float(kk), abs(float(kk - gu)), abs(float(kk - gv))


def adaptive_2d(G, ucuts, vcuts, spec: QuadratureSpec) -> tuple[float, float]:
    """Adaptive tensor-product Kronrod rule on a rectangle split by the given cuts.

    Each rectangle gets separate error estimates per direction and is bisected
    along the direction with the larger one.
    """
    heap = []
    for u0, u1 in zip(ucuts[:-1], ucuts[1:]):
        for v0, v1 in zip(vcuts[:-1], vcuts[1:]):
            k, eu, ev = _product_rule(G, u0, u1, v0, v1)
            heap.append((-(eu + ev), u0, u1, v0, v1, k, eu, ev))
    heapq.heapify(heap)
    splits = 0
    while True:
        value = math.fsum(h[5] for h in heap)
        error = math.fsum(-h[0] for h in heap)
        if error <= spec.target(value):
            return value, error
        if splits >= spec.max_subdivisions:
            raise QuadratureError("2D quadrature did not converge", value, error)
        _, u0, u1, v0, v1, _, eu, ev = heapq.heappop(heap)
        if eu >= ev:
            um = 0.5 * (u0 + u1)
            parts = ((u0, um, v0, v1), (um, u1, v0, v1))
        else:
            vm = 0.5 * (v0 + v1)
            parts = ((u0, u1, v0, vm), (u0, u1, vm, v1))
        for p in parts:
            k, a, b = _product_rule(G, *p)
            heapq.heappush(heap, (-(a + b), *p, k, a, b))
        splits += 1


def integrate_axisym(g: Callable[[np.ndarray, np.ndarray], np.ndarray], n: int,
                     spec: QuadratureSpec = QuadratureSpec(), r_breaks=(), theta_breaks=(),
                     r_max: float | None = None, theta_split: Callable | None = None,
                     scale: float | None = None, return_error: bool = False):
    """Integral over R^n of a function of r = |y| and the polar angle theta.

    Returns omega_{n-1} times the double integral of g(r, theta) sin^(n-2)(theta) r^(n-1),
    where omega_{n-1} is the area of the unit sphere in R^(n-1). A theta_split(r)
    callable marks a curve theta = theta_k(r) across which g has a kink; the theta
    range is then mapped so that the curve is a panel boundary.
    """
    hl, ucuts = _radial_map(spec, r_breaks, scale, r_max)
    ucuts = np.unique(np.concatenate([[0.0, hl.u_max], ucuts]))

    if theta_split is None:
        vcuts = np.unique(np.concatenate([[0.0, np.pi], [t for t in theta_breaks if 0 < t < np.pi]]))

        def G(u, th):
            r, dr = hl(u)
            with np.errstate(over="ignore", invalid="ignore"):
                val = np.asarray(g(r, th), dtype=float) * (r ** (n - 1) * dr) * np.sin(th) ** (n - 2)
            return np.where(np.isfinite(val), val, 0.0)
    else:
        vcuts = np.array([0.0, 1.0, 2.0])

        def G(u, v):
            r, dr = hl(u)
            tk = np.asarray(theta_split(r), dtype=float)
            tk = np.where(np.isfinite(tk), np.clip(tk, 0.0, np.pi), 0.5 * np.pi)
            lower = v <= 1.0
            th = np.where(lower, tk * v, tk + (np.pi - tk) * (v - 1.0))
            dth = np.where(lower, tk, np.pi - tk)
            with np.errstate(over="ignore", invalid="ignore"):
                val = np.asarray(g(r, th), dtype=float) * (r ** (n - 1) * dr) * np.sin(th) ** (n - 2) * dth
            return np.where(np.isfinite(val), val, 0.0)

    area = sphere_area(n - 1)
    value, err = adaptive_2d(G, ucuts, vcuts, _scaled(spec, area))
    if return_error:
        return area * value, area * err
    return area * value


# ---------------------------------------------------------------- Monte Carlo

def _sample_bubble_shape(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Draws with density proportional to (1+|z|^2)^(-n): a Gaussian over an independent chi_n."""
    g = rng.standard_normal((m, n))
    chi = np.sqrt(rng.chisquare(n, size=m))
    return g / chi[:, None]


def log_bubble_mass(n: int) -> float:
    """log of the integral of (1+|z|^2)^(-n) over R^n."""
    return math.log(sphere_area(n)) + math.log(0.5) + 2 * gammaln(0.5 * n) - gammaln(n)


class UniformBall:
    def __init__(self, radius: float, center=None):
        self.radius = float(radius)
        self.center = None if center is None else np.asarray(center, dtype=float)

    def sample(self, rng: np.random.Generator, n: int, m: int):
        d = rng.standard_normal((m, n))
        d /= np.linalg.norm(d, axis=1)[:, None]
        r = self.radius * rng.random(m) ** (1.0 / n)
        y = d * r[:, None]
        if self.center is not None:
            y += self.center
        return y, np.full(m, 1.0 / ball_volume(n, self.radius))


class BubbleMixture:
    """Mixture of bubble-shaped densities (one per bubble) plus a broad component.

    Each component has density lam^n (lam^2 + |y - xi|^2)^(-n) / V(n), with the
    same tail as the bubble energy densities, so importance weights stay bounded.
    """

    def __init__(self, lambdas, centers, broad_weight: float = 0.1, broad_scale: float | None = None,
                 broad_center=None):
        self.lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if len(self.lambdas) != len(self.centers):
            raise ValueError("one scale per center is required")
        if not 0 < broad_weight < 1:
            raise ValueError("broad weight must be in (0, 1)")
        self.broad_weight = broad_weight
        spread = np.max(np.ptp(self.centers, axis=0)) if len(self.centers) > 1 else 0.0
        self.broad_scale = float(broad_scale) if broad_scale else max(1.0, spread, float(np.max(self.lambdas)))
        self.broad_center = self.centers.mean(axis=0) if broad_center is None else np.asarray(broad_center, float)

    def _components(self):
        k = len(self.lambdas)
        w = np.append(np.full(k, (1 - self.broad_weight) / k), self.broad_weight)
        lam = np.append(self.lambdas, self.broad_scale)
        xi = np.vstack([self.centers, self.broad_center])
        return w, lam, xi

    def density(self, y: np.ndarray) -> np.ndarray:
        n = y.shape[-1]
        w, lam, xi = self._components()
        logv = log_bubble_mass(n)
        out = np.zeros(y.shape[:-1])
        for wl, l, c in zip(w, lam, xi):
            r2 = np.sum((y - c) ** 2, axis=-1)
            out += wl * np.exp(n * math.log(l) - n * np.log(l * l + r2) - logv)
        return out

    def sample(self, rng: np.random.Generator, n: int, m: int):
        w, lam, xi = self._components()
        comp = rng.choice(len(w), size=m, p=w)
        z = _sample_bubble_shape(rng, n, m)
        y = xi[comp] + lam[comp, None] * z
        return y, self.density(y)


@dataclass(frozen=True)
class MCResult:
    value: float
    stderr: float
    samples: int


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("BRL_THREADS", "1")))
    except ValueError:
        return 1


def integrate_mc(g: Callable[[np.ndarray], np.ndarray], n: int, sampler, spec: QuadratureSpec = QuadratureSpec(),
                 batch_size: int = 100_000) -> MCResult:
    """Importance-sampling estimate of the integral of g over R^n.

    Batches use child seeds of spec.seed and are combined in a fixed order, so the
    result does not depend on the number of worker threads.
    """
    total = spec.mc_samples
    sizes = [batch_size] * (total // batch_size)
    if total % batch_size:
        sizes.append(total % batch_size)
    seeds = np.random.SeedSequence(spec.seed).spawn(len(sizes))

    def run(args):
        seq, m = args
        rng = np.random.default_rng(seq)
        y, p = sampler.sample(rng, n, m)
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("sampler produced a point of zero density")
        w = np.asarray(g(y), dtype=float) / p
        mean = float(np.mean(w))
        return m, mean, float(np.sum((w - mean) ** 2))

    threads = min(thread_count(), len(sizes))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, zip(seeds, sizes)))
    else:
        parts = [run(a) for a in zip(seeds, sizes)]
    count, mean, m2 = 0, 0.0, 0.0
    for m, mu, s2 in parts:
        delta = mu - mean
        tot = count + m
        mean += delta * m / tot
        m2 += s2 + delta * delta * count * m / tot
        count = tot
    var = m2 / (count - 1)
    return MCResult(mean, math.sqrt(var / count), count)
