"""Critical points of the leading-order reduced functional: G_l = 0 and H_l = 0.

Damped Newton in the unknowns (log lam_l, xi_l) with a central-difference
Jacobian. The symmetric modes solve only for a common scale and a common offset
from H, which is how circle-symmetric roots are found.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import Configuration, CurvatureModel, validate_configuration
from .constants import ConstantTable
from .reduced import _gradients, model_residual

SYMMETRIES = (None, "circle", "circle_eta0")


@dataclass(frozen=True)
class CriticalPointResult:
    configuration: Configuration
    residual_norm: float
    iterations: int
    converged: bool
    trace: tuple[float, ...]
    full_residual_norm: float
    symmetry: str | None = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"residual_norm": self.residual_norm, "full_residual_norm": self.full_residual_norm,
                "iterations": self.iterations, "converged": self.converged, "trace": list(self.trace),
                "symmetry": self.symmetry, "message": self.message, "lambdas": self.configuration.lambdas.tolist(),
                **self.extra}


def _sphere_sum(flat: int, n: int, radius: float) -> float:
    """Sum over k != l of |xi_l - xi_k|^(2-n) for flat points evenly spaced on a circle."""
    j = np.arange(1, flat)
    return float(np.sum((2.0 * radius * np.sin(np.pi * j / flat)) ** (-(n - 2.0))))


def balance_scale(flat: int, model: CurvatureModel, table: ConstantTable, radius: float = 1.0) -> float:
    """Common scale at which G_l = 0 for flat equal bubbles evenly spaced on a circle on H."""
    n, ell = table.n, table.ell
    if not n - 2 > ell:
        raise ValueError("balance needs n - 2 > ell")
    if flat < 2:
        raise ValueError("balance needs at least two bubbles")
    if not model.constant_amplitude:
        raise ValueError("balance scale needs a constant amplitude")
    S = _sphere_sum(flat, n, radius)
    return (table.C11 * float(model.amplitude) / (table.C12 * S)) ** (1.0 / (n - 2 - ell))


class _Full:
    """All bubble parameters free."""

    def __init__(self, cfg: Configuration):
        self.cfg = cfg
        self.flat, self.n = cfg.flat, cfg.n

    def pack(self, cfg):
        return np.concatenate([np.log(cfg.lambdas), cfg.centers.ravel()])

    def unpack(self, x):
        lam = np.exp(x[: self.flat])
        cen = x[self.flat:].reshape(self.flat, self.n)
        return lam, cen

    def steps(self, x):
        lam = np.exp(x[: self.flat])
        return np.concatenate([np.ones(self.flat), np.repeat(lam, self.n)])

    def residual(self, lam, cen, model, table):
        G, H = _gradients(lam, cen, model, table)
        return np.concatenate([G, H.ravel()])


class _Circle:
    """Common scale and common offset t along each bubble's normal reference direction.

    Sphere: xi_l = (1 + t) u_l with u_l on the sphere. Hyperplane: xi_l = p_l + t e_n.
    Only G_1 and the normal component of H_1 are solved; the rest follow by symmetry.
    """

    def __init__(self, cfg: Configuration, model: CurvatureModel, free_offset: bool):
        lam = cfg.lambdas
        if not np.allclose(lam, lam[0], rtol=1e-12, atol=0):
            raise ValueError("symmetric solve needs equal scales")
        cen = cfg.centers
        if model.kind == "sphere":
            r = np.linalg.norm(cen, axis=1)
            if not np.allclose(r, r[0], rtol=1e-12, atol=1e-15):
                raise ValueError("symmetric solve needs a common distance to the origin")
            self.base = cen / r[:, None]
            self.dirs = self.base
            t0 = float(r[0] - 1.0)
        else:
            if not np.allclose(cen[:, -1], cen[0, -1], rtol=0, atol=1e-15):
                raise ValueError("symmetric solve needs a common offset from H")
            self.base = cen.copy()
            self.base[:, -1] = 0.0
            self.dirs = np.zeros_like(cen)
            self.dirs[:, -1] = 1.0
            t0 = float(cen[0, -1])
        self.cfg = cfg
        self.flat = cfg.flat
        self.free_offset = free_offset
        self.t0 = t0

    def pack(self, cfg):
        x = [math.log(cfg.lambdas[0])]
        if self.free_offset:
            x.append(self.t0)
        return np.array(x)

    def unpack(self, x):
        lam = np.full(self.flat, math.exp(x[0]))
        t = x[1] if self.free_offset else self.t0
        return lam, self.base + t * self.dirs

    def steps(self, x):
        return np.array([1.0, math.exp(x[0])][: len(x)])

    def residual(self, lam, cen, model, table):
        G, H = _gradients(lam, cen, model, table)
        if not self.free_offset:
            return G[:1]
        return np.array([G[0], H[0] @ self.dirs[0]])


def _jacobian(sys_, x, r0, model, table, rel_step):
    h = rel_step * sys_.steps(x)
    J = np.empty((len(r0), len(x)))
    for j in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        J[:, j] = (sys_.residual(*sys_.unpack(xp), model, table) - sys_.residual(*sys_.unpack(xm), model, table)) \
            / (2 * h[j])
    return J


def _project(sys_, x, box):
    """Clip centers back into the box; warn when that changes the iterate."""
    lam, cen = sys_.unpack(x)
    clipped = np.array([box.clip(c) for c in cen])
    if np.allclose(clipped, cen, rtol=0, atol=0):
        return x, False
    warnings.warn("Newton iterate left the box; centers projected back")
    if isinstance(sys_, _Full):
        return np.concatenate([np.log(lam), clipped.ravel()]), True
    return x, True  # circle modes keep every center on a fixed ray and are checked at the start


def find_critical(cfg0: Configuration, model: CurvatureModel, table: ConstantTable, tol: float = 1e-12,
                  max_iter: int = 100, damping: float = 1.0, symmetry: str | None = None,
                  rel_step: float = 1e-6, max_halvings: int = 30) -> CriticalPointResult:
    """Damped Newton for the reduced system, starting from cfg0.

    The linear step is a least-squares solve, since rotations about the model's
    symmetry axis leave the system invariant and make the Jacobian singular. A step
    is halved until the residual decreases; if that fails, one Levenberg-Marquardt
    step is tried before giving up. residual_norm is the norm of the solved system;
    full_residual_norm is the norm of all (G_l, H_l) at the returned configuration.
    """
    if symmetry not in SYMMETRIES:
        raise ValueError(f"unknown symmetry {symmetry!r}")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    sys_ = _Full(cfg0) if symmetry is None else _Circle(cfg0, model, symmetry == "circle")
    x = sys_.pack(cfg0)
    res = lambda z: sys_.residual(*sys_.unpack(z), model, table)  # noqa: E731
    r = res(x)
    norm = float(np.linalg.norm(r))
    trace = [norm]
    best_x, best = x, norm
    message = ""
    it = 0
    projections = 0
    while it < max_iter and norm > tol:
        J = _jacobian(sys_, x, r, model, table, rel_step)
        dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        accepted = False
        for attempt in ("newton", "levenberg"):
            t = damping
            for _ in range(max_halvings + 1):
                xn, moved = _project(sys_, x + t * dx, cfg0.box)
                projections += moved
                try:
                    rn = res(xn)
                except ValueError:
                    rn = None
                if rn is not None and np.all(np.isfinite(rn)) and np.linalg.norm(rn) < norm:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
            A = J.T @ J
            mu = 1e-6 * max(np.trace(A) / len(A), np.finfo(float).tiny)
            dx = np.linalg.solve(A + mu * np.eye(len(A)), -J.T @ r)
        it += 1
        if not accepted:
            message = "no decrease after damped and regularized steps"
            break
        x, r = xn, rn
        norm = float(np.linalg.norm(r))
        trace.append(norm)
        if norm < best:
            best_x, best = x, norm
    lam, cen = sys_.unpack(best_x)
    cfg = cfg0.with_params(lam, cen)
    converged = best <= tol
    if not converged and not message:
        message = f"residual {best:.3g} above tolerance after {it} iterations"
    full = float(np.linalg.norm(model_residual(cfg, model, table)))
    return CriticalPointResult(cfg, best, it, converged, tuple(trace), full, symmetry, message,
                               {"projections": int(projections),
                                "admissible": validate_configuration(cfg, model).passed})
