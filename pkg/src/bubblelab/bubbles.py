"""Pointwise bubbles, their scaled derivatives, plantations and weighted sup-norms.

Evaluation uses plain arithmetic only, so object arrays of mpmath numbers pass
through unchanged (useful for finite-difference checks in extended precision).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import BubbleParams, Configuration


def _offsets(b: BubbleParams, y):
    y = np.asarray(y)
    if y.dtype != object:
        y = y.astype(float)
    d = y - np.asarray(b.xi)
    return d, (d * d).sum(axis=-1)


def bubble_eval(b: BubbleParams, y, n: int | None = None):
    """(lam / (lam^2 + |y - xi|^2))^((n-2)/2) at one point or an array of points."""
    n = n or np.shape(y)[-1]
    _, r2 = _offsets(b, y)
    return (b.lam / (b.lam * b.lam + r2)) ** ((n - 2) / 2)


def bubble_grad_qh(b: BubbleParams, y, n: int | None = None):
    """lam * dV/dlam and lam * grad_xi V."""
    n = n or np.shape(y)[-1]
    d, r2 = _offsets(b, y)
    lam = b.lam
    s = lam * lam + r2
    dlam = -0.5 * (n - 2) * lam ** ((n - 2) / 2) * (lam * lam - r2) / s ** (n / 2)
    dxi = (n - 2) * ((lam / s) ** (n / 2))[..., None] * d
    return dlam, dxi


def qh_distance(bj: BubbleParams, bk: BubbleParams) -> float:
    """|xi_j - xi_k| / sqrt(lam_j lam_k)."""
    dist = float(np.linalg.norm(bj.center - bk.center))
    if dist == 0:
        raise ValueError("quasi-hyperbolic distance needs distinct centers")
    return dist / float(np.sqrt(bj.lam * bk.lam))


def rescaled_bubbles(cfg: Configuration) -> list[BubbleParams]:
    """Bubbles in the variable Y = y / lambda_bar: scales lam/lambda_bar, centers xi/lambda_bar."""
    lb = cfg.lambda_bar
    return [BubbleParams(b.lam / lb, tuple(np.asarray(b.xi) / lb)) for b in cfg.bubbles]


def plantation_eval(cfg: Configuration, y, rescaled: bool = False):
    """Sum of the bubbles of cfg; with rescaled=True, y is read in the variable Y = y / lambda_bar."""
    bubbles = rescaled_bubbles(cfg) if rescaled else cfg.bubbles
    return sum(bubble_eval(b, y, cfg.n) for b in bubbles)


@dataclass(frozen=True)
class WeightedNormKind:
    kind: str = "star"
    tau: float = 1.1

    def __post_init__(self):
        if self.kind not in ("star", "starstar"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if not self.tau > 1:
            raise ValueError("tau must exceed 1")

    def exponent(self, n: int) -> float:
        return 0.5 * (n - 2) + self.tau + (2.0 if self.kind == "starstar" else 0.0)


def norm_weight(points, cfg: Configuration, kind: WeightedNormKind) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dist = np.linalg.norm(points[:, None, :] - cfg.centers[None], axis=-1)
    return np.sum((1.0 + dist) ** (-kind.exponent(cfg.n)), axis=1)


def weighted_norm(values, points, cfg: Configuration, kind: WeightedNormKind = WeightedNormKind()) -> float:
    """Largest ratio |f| / weight over the sample set.

    This is a lower estimate of the true supremum over R^n; adding samples can
    only raise it.
    """
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ValueError("empty sample set")
    w = norm_weight(points, cfg, kind)
    if len(w) != len(values):
        raise ValueError("one value per point is required")
    return float(np.max(np.abs(values) / w))


def load_sampled_field(path) -> tuple[np.ndarray, np.ndarray]:
    """Read rows of point coordinates followed by the field value; a header row is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:
                    raise
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("expected columns y_1..y_n, value")
    return data[:, :-1], data[:, -1]
