"""Bubble configurations, regime exponents, curvature models and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


class InfeasibleRegimeError(RuntimeError):
    """No admissible configuration could be produced for the requested regime."""


class OutOfTubeError(ValueError):
    """A point lies outside the validity tube of a curvature model."""


def ctilde(n: int) -> float:
    """The constant (n-2)/(4(n-1)) multiplying the scalar curvature."""
    return (n - 2) / (4.0 * (n - 1))


@dataclass(frozen=True)
class BubbleParams:
    lam: float
    xi: tuple[float, ...]

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"bubble scale must be positive, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.xi, dtype=float)


@dataclass(frozen=True)
class AsymptoticRegime:
    """Exponents governing how scales, separations and offsets shrink together.

    The cut-off radius around each bubble is rho_nu = lambda_bar**nu.
    """

    gamma: float = 0.75
    nu: float = 0.6
    kappa: float = 0.5
    sigma: float = 0.2
    tau: float = 1.1
    ell: float = 2.0

    def __post_init__(self):
        if not (1.0 > self.gamma > self.nu > 0.5):
            raise ValueError("need 1 > gamma > nu > 1/2")
        if not self.gamma + self.nu > 1.0:
            raise ValueError("need gamma + nu > 1")
        if not (0.0 < self.kappa < 1.0):
            raise ValueError("kappa must lie in (0, 1)")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not self.tau > 1.0:
            raise ValueError("tau must exceed 1")
        if not self.ell >= 2.0:
            raise ValueError("ell must be at least 2")

    def theorem_flags(self, n: int) -> dict[str, bool]:
        """Two extra conditions needed for the existence theorem (recorded only)."""
        lhs = min(0.5 * n * (1.0 - self.nu), self.ell * self.nu)
        return {
            "decay_vs_count": lhs > (n + 10) / 8.0 * self.sigma,
            "separation_vs_count": self.gamma > self.sigma / (n - 2),
        }

    def rho(self, lambda_bar: float) -> float:
        return lambda_bar**self.nu


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners differ in dimension")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box must have lo < hi in every coordinate")

    @classmethod
    def cube(cls, n: int, half_width: float = 2.0) -> "Box":
        return cls((-half_width,) * n, (half_width,) * n)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lo) and np.all(y <= self.hi))

    def clip(self, y) -> np.ndarray:
        return np.clip(np.asarray(y, dtype=float), self.lo, self.hi)


@dataclass(frozen=True)
class Configuration:
    n: int
    bubbles: tuple[BubbleParams, ...]
    box: Box
    regime: AsymptoticRegime = field(default_factory=AsymptoticRegime)
    c_bar1: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "bubbles", tuple(self.bubbles))
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        if not self.bubbles:
            raise ValueError("configuration needs at least one bubble")
        if self.box.dim != self.n:
            raise ValueError("box dimension does not match n")
        for b in self.bubbles:
            if len(b.xi) != self.n:
                raise ValueError("bubble center has wrong dimension")
            if not self.box.contains(b.xi):
                raise ValueError(f"center {b.xi} lies outside the box")
        if not self.regime.ell < self.n - 2:
            raise ValueError("ell must be below n - 2")

    @property
    def flat(self) -> int:
        return len(self.bubbles)

    @property
    def ell(self) -> float:
        return self.regime.ell

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([b.lam for b in self.bubbles])

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.xi for b in self.bubbles])

    @property
    def lambda_bar(self) -> float:
        return float(np.exp(np.mean(np.log(self.lambdas))))

    @property
    def rho_nu(self) -> float:
        return self.regime.rho(self.lambda_bar)

    def with_params(self, lambdas, centers) -> "Configuration":
        bubbles = tuple(BubbleParams(float(l), tuple(c)) for l, c in zip(lambdas, centers))
        return replace(self, bubbles=bubbles)


ScalarField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CurvatureModel:
    """Curvature flat of order ell across a hyperplane or the unit sphere.

    c_n K(y) = n(n-2) - C(p) eta**ell + R(y), with p the projection of y onto H
    and eta the distance. The default remainder is R = remainder_bound * eta**(ell+1).
    """

    kind: str = "hyperplane"
    ell: float = 2.0
    amplitude: float | ScalarField = 1.0
    remainder: ScalarField | None = None
    remainder_bound: float = 0.0
    tube_radius: float = 0.5
    integer_ell: bool = False

    def __post_init__(self):
        if self.kind not in ("hyperplane", "sphere"):
            raise ValueError(f"unknown curvature model kind {self.kind!r}")
        if self.ell < 2:
            raise ValueError("ell must be at least 2")
        if self.integer_ell and float(self.ell) != int(self.ell):
            raise ValueError("integer-only mode needs an integer ell")
        if not callable(self.amplitude) and not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if self.remainder_bound < 0:
            raise ValueError("remainder bound must be nonnegative")
        if not self.tube_radius > 0:
            raise ValueError("tube radius must be positive")

    @property
    def constant_amplitude(self) -> bool:
        return not callable(self.amplitude)

    def amplitude_at(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if callable(self.amplitude):
            c = np.asarray(self.amplitude(p), dtype=float)
            if np.any(c <= 0):
                raise ValueError("amplitude must be positive on H")
            return c
        return np.full(p.shape[:-1], float(self.amplitude))

    def remainder_at(self, y, eta) -> np.ndarray:
        if self.remainder is not None:
            return np.asarray(self.remainder(np.asarray(y, dtype=float)), dtype=float)
        return self.remainder_bound * np.asarray(eta) ** (self.ell + 1)


def project_to_H(model: CurvatureModel, y):
    """Nearest point of H and the distance to it. Works on arrays of points."""
    y = np.asarray(y, dtype=float)
    if model.kind == "hyperplane":
        p = y.copy()
        p[..., -1] = 0.0
        eta = np.abs(y[..., -1])
    else:
        r = np.linalg.norm(y, axis=-1)
        if np.any(r == 0):
            raise ValueError("projection onto the sphere is not unique at the origin")
        p = y / r[..., None]
        eta = np.abs(r - 1.0)
    return p, eta


def normal_direction(model: CurvatureModel, y) -> np.ndarray:
    """Unit vector (y - p)/|y - p|; zero where y lies on H."""
    p, eta = project_to_H(model, y)
    d = np.asarray(y, dtype=float) - p
    safe = np.where(eta > 0, eta, 1.0)
    return np.where((eta > 0)[..., None], d / safe[..., None], 0.0)


def curvature_eval(model: CurvatureModel, y):
    """Value of ctilde(n) K(y) inside the validity tube around H."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    p, eta = project_to_H(model, y)
    if np.any(eta > model.tube_radius):
        raise OutOfTubeError(f"point at distance {np.max(eta):.3g} from H exceeds tube radius {model.tube_radius}")
    return n * (n - 2) - model.amplitude_at(p) * eta**model.ell + model.remainder_at(y, eta)


def curvature_K(model: CurvatureModel, y):
    y = np.asarray(y, dtype=float)
    return curvature_eval(model, y) / ctilde(y.shape[-1])


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    theorem_flags: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
            "theorem_flags": dict(self.theorem_flags),
        }


def separation_sums(lambdas: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """For each bubble l, the sum over k != l of 1/d_{l,k}."""
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    scale = np.sqrt(lambdas[:, None] * lambdas[None, :])
    return np.sum(scale / dist, axis=1)


def validate_configuration(cfg: Configuration, model: CurvatureModel | None = None) -> ValidationReport:
    """Check the standing hypotheses; the offset bound is checked only when a model is given."""
    lam = cfg.lambdas
    centers = cfg.centers
    if cfg.flat > 1:
        dist = np.linalg.norm(centers[:, None] - centers[None, :], axis=-1)
        if np.any(dist[np.triu_indices(cfg.flat, 1)] == 0):
            raise ValueError("configuration has coincident centers")
    lbar = cfg.lambda_bar
    reg = cfg.regime
    ratio = float(max(np.max(lam / lbar), np.max(lbar / lam)))
    checks = [Check("lambda_ratio", ratio, cfg.c_bar1, ratio <= cfg.c_bar1)]
    sep = float(np.max(separation_sums(lam, centers))) if cfg.flat > 1 else 0.0
    checks.append(Check("separation", sep, lbar**reg.gamma, sep <= lbar**reg.gamma))
    count_bound = lbar ** (-reg.sigma)
    checks.append(Check("count", float(cfg.flat), count_bound, cfg.flat <= count_bound))
    ell_ok = 2 <= reg.ell < cfg.n - 2
    checks.append(Check("ell_range", reg.ell, cfg.n - 2, ell_ok))
    if model is not None:
        _, eta = project_to_H(model, centers)
        eta_max = float(np.max(eta))
        bound = lbar ** (1.0 + reg.kappa)
        checks.append(Check("eta", eta_max, bound, eta_max <= bound))
        checks.append(Check("model_ell", model.ell, reg.ell, model.ell == reg.ell))
    return ValidationReport(tuple(checks), reg.theorem_flags(cfg.n))


def gen_circle_configuration(flat: int, lam: float, eta: float = 0.0, seed: int = 0, n: int = 6,
                             regime: AsymptoticRegime | None = None, box: Box | None = None,
                             random_phase: bool = False) -> Configuration:
    """Equal bubbles evenly spaced on the circle of radius 1+eta in the (y1, y2)-plane.

    The seed only matters with random_phase, which rotates the whole circle.
    """
    if flat < 1:
        raise ValueError("need at least one bubble")
    radius = 1.0 + eta
    phase = np.random.default_rng(seed).uniform(0, 2 * np.pi) if random_phase else 0.0
    ang = phase + 2 * np.pi * np.arange(flat) / flat
    centers = np.zeros((flat, n))
    centers[:, 0] = radius * np.cos(ang)
    centers[:, 1] = radius * np.sin(ang)
    regime = regime or AsymptoticRegime()
    box = box or Box.cube(n)
    return Configuration(n, tuple(BubbleParams(lam, tuple(c)) for c in centers), box, regime)


def _regime_with_gamma(gamma: float, regime: AsymptoticRegime | None) -> AsymptoticRegime:
    if regime is not None:
        return replace(regime, gamma=gamma)
    base = AsymptoticRegime()
    nu = base.nu if base.nu < gamma else 0.5 * (0.5 + gamma)
    nu = max(nu, 1.0 - gamma + 1e-3)
    return replace(base, gamma=gamma, nu=nu)


def gen_random_separated(flat: int, lambda_bar: float, gamma: float, box: Box, seed: int,
                         regime: AsymptoticRegime | None = None, max_attempts: int = 50,
                         tries_per_point: int = 200) -> Configuration:
    """Random equal-scale configuration satisfying the separation condition.

    Centers are placed one at a time; a candidate is kept only if every partial
    separation sum stays below the bound. Partial sums only grow, so the final
    configuration satisfies the condition exactly.
    """
    regime = _regime_with_gamma(gamma, regime)
    n = box.dim
    bound = lambda_bar ** (gamma - 1.0)  # sum of 1/|xi_l - xi_k| allowed per bubble
    # every pair is at most a box diameter apart, so the sum is at least (flat-1)/diam
    if flat > 1 and (flat - 1) / box.diameter > bound:
        raise InfeasibleRegimeError(
            f"{flat} bubbles cannot satisfy the separation bound {bound:.3g} in a box of diameter {box.diameter:.3g}")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box.lo), np.asarray(box.hi)
    for _ in range(max_attempts):
        centers = np.empty((0, n))
        sums = np.empty(0)
        for _ in range(flat):
            cand = rng.uniform(lo, hi, size=(tries_per_point, n))
            if len(centers) == 0:
                centers, sums = cand[:1], np.zeros(1)
                continue
            dist = np.linalg.norm(cand[:, None, :] - centers[None], axis=-1)
            inv = 1.0 / np.maximum(dist, 1e-300)
            ok = (inv.sum(axis=1) <= bound) & np.all(sums[None] + inv <= bound, axis=1)
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                break
            j = idx[0]
            sums = np.append(sums + inv[j], inv[j].sum())
            centers = np.vstack([centers, cand[j]])
        if len(centers) == flat:
            bubbles = tuple(BubbleParams(lambda_bar, tuple(c)) for c in centers)
            return Configuration(n, bubbles, box, regime)
    raise InfeasibleRegimeError(f"no admissible placement of {flat} bubbles after {max_attempts} attempts")


def configuration_to_dict(cfg: Configuration, model: CurvatureModel | None = None) -> dict:
    reg = cfg.regime
    doc = {
        "n": cfg.n,
        "ell": reg.ell,
        "flat": cfg.flat,
        "lambdas": [b.lam for b in cfg.bubbles],
        "xis": [list(b.xi) for b in cfg.bubbles],
        "box": {"lo": list(cfg.box.lo), "hi": list(cfg.box.hi)},
        "regime": {"gamma": reg.gamma, "nu": reg.nu, "kappa": reg.kappa, "sigma": reg.sigma, "tau": reg.tau},
    }
    if model is not None:
        if callable(model.amplitude) or model.remainder is not None:
            raise ValueError("only constant-amplitude models with the default remainder serialize")
        doc["model"] = {"kind": model.kind, "C": float(model.amplitude), "remainder_bound": model.remainder_bound}
    return doc


def configuration_from_dict(doc: dict) -> tuple[Configuration, CurvatureModel | None]:
    n = int(doc["n"])
    ell = float(doc["ell"])
    lambdas, xis = doc["lambdas"], doc["xis"]
    if len(lambdas) != len(xis):
        raise ValueError("lambdas and xis differ in length")
    if "flat" in doc and int(doc["flat"]) != len(lambdas):
        raise ValueError("flat does not match the number of bubbles")
    lo, hi = doc["box"]["lo"], doc["box"]["hi"]
    lo = [float(lo)] * n if np.isscalar(lo) else lo
    hi = [float(hi)] * n if np.isscalar(hi) else hi
    regime = AsymptoticRegime(ell=ell, **{k: float(v) for k, v in doc["regime"].items()})
    bubbles = tuple(BubbleParams(float(l), tuple(x)) for l, x in zip(lambdas, xis))
    cfg = Configuration(n, bubbles, Box(lo, hi), regime)
    model = None
    if doc.get("model") is not None:
        m = doc["model"]
        model = CurvatureModel(kind=m["kind"], ell=ell, amplitude=float(m["C"]),
                               remainder_bound=float(m.get("remainder_bound", 0.0)))
    return cfg, model


def save_configuration(path, cfg: Configuration, model: CurvatureModel | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(configuration_to_dict(cfg, model), fh, indent=2)
        fh.write("\n")


def load_configuration(path) -> tuple[Configuration, CurvatureModel | None]:
    with open(path) as fh:
        return configuration_from_dict(json.load(fh))

