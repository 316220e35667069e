"""Uniform-grid epsilon-nets over boxes, and the cardinality formulas built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .games import ContractError

# Largest integer we are willing to hand back as a plain count. Anything beyond
# this is reported as an OverflowError rather than returned.
MAX_REPRESENTABLE = 2**4096


@dataclass(frozen=True)
class EpsNet:
    """Implicit grid with spacing ``lam`` over ``[lo, hi]^dim``.

    Points per axis are ``lo + k*lam`` for ``k = 0 .. ceil((hi-lo)/lam)-1`` plus
    the endpoint ``hi``, so the last cell may be narrower than ``lam``.
    """

    dim: int
    lam: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError("dim must be positive")
        if not self.lam > 0:
            raise ContractError("spacing lam must be positive")
        if not self.hi > self.lo:
            raise ContractError("need hi > lo")

    @property
    def alpha(self) -> float:
        """Euclidean covering radius lam*sqrt(D)/2."""
        return self.lam * math.sqrt(self.dim) / 2.0

    @property
    def alpha_inf(self) -> float:
        """Max-norm covering radius."""
        return self.lam / 2.0

    @property
    def points_per_axis(self) -> int:
        return math.ceil((self.hi - self.lo) / self.lam - 1e-12) + 1

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    def axis_points(self) -> np.ndarray:
        k = self.points_per_axis
        pts = self.lo + self.lam * np.arange(k, dtype=float)
        pts[-1] = self.hi
        return pts

    def point(self, index) -> np.ndarray:
        return self.axis_points()[np.asarray(index, dtype=int)]

    def snap(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Nearest grid point per axis (ties round up). Returns (index, point)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ContractError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        tol = 1e-12 * max(1.0, abs(self.hi), abs(self.lo))
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            raise ContractError(f"coordinate outside [{self.lo}, {self.hi}]")
        k = self.points_per_axis
        idx = np.floor((x - self.lo) / self.lam + 0.5).astype(int)
        idx = np.clip(idx, 0, k - 1)
        pts = self.axis_points()
        # the shortened last cell: snap to whichever of the two last points is nearer
        last = idx == k - 2
        if np.any(last):
            up = last & (np.abs(x - pts[k - 1]) <= np.abs(x - pts[k - 2]))
            idx = np.where(up, k - 1, idx)
        return idx, pts[idx]

    def encode(self, index) -> int:
        """Mixed-radix integer code of a grid index vector (arbitrary precision)."""
        k = self.points_per_axis
        code = 0
        for i in np.asarray(index, dtype=int).tolist():
            if not 0 <= i < k:
                raise ContractError("grid index out of range")
            code = code * k + i
        return code

    def decode(self, code: int) -> np.ndarray:
        k = self.points_per_axis
        if not 0 <= code < self.size:
            raise ContractError("grid code out of range")
        out = []
        for _ in range(self.dim):
            code, r = divmod(code, k)
            out.append(r)
        return np.array(out[::-1], dtype=int)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # str() gives the shortest decimal that round-trips, so 0.1 becomes 1/10
    return Fraction(str(float(x)))


def grid_base(radius: float, lam: float) -> Fraction:
    """The per-axis count ``2R/lam + 1`` as an exact rational where possible.

    Ratios within 1e-9 of an integer are snapped, so e.g. R = lam = sqrt(2)
    gives exactly 3 despite float rounding.
    """
    if not lam > 0:
        raise ContractError("lam must be positive")
    ratio = 2.0 * float(radius) / float(lam)
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, abs(ratio)):
        return Fraction(nearest + 1)
    return _as_fraction(ratio) + 1


def cardinality_bound(dim: int, radius: float, lam: float) -> int:
    """ceil(2R/lam + 1) ** D, computed with exact integer powers."""
    if dim < 1:
        raise ContractError("dim must be positive")
    base = math.ceil(grid_base(radius, lam))
    if dim * math.log2(max(base, 2)) > math.log2(MAX_REPRESENTABLE):
        raise OverflowError(f"cardinality {base}^{dim} exceeds representable range")
    return base**dim


def action_space_bound(card_sa: int, lam: float) -> int:
    """Grid size for one agent's Q-table: D = |S||A|, R = sqrt(|S||A|)."""
    return cardinality_bound(card_sa, math.sqrt(card_sa), lam)


def policy_state_bound(n: int, card_sa: int, lam: float) -> int:
    """Grid size for all agents' Q-tables: D = n|S||A|, R = sqrt(n|S||A|)."""
    d = n * card_sa
    return cardinality_bound(d, math.sqrt(d), lam)


def trajectory_state_count(n: int, card_sa: int, h: int) -> int:
    """Number of trajectory meta-states, (|S||A|)^(n h)."""
    if n < 1 or card_sa < 1 or h < 0:
        raise ContractError("need n, card_sa >= 1 and h >= 0")
    if n * h * math.log2(max(card_sa, 2)) > math.log2(MAX_REPRESENTABLE):
        raise OverflowError("trajectory state count exceeds representable range")
    return card_sa ** (n * h)
