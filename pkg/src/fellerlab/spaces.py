"""Open state spaces U in R^d and their compact exhaustions.

A state space here is an open box (possibly unbounded in any direction),
which covers all of R^d, open intervals and the positive half line.  The
exhaustion member K_n is the set of points at distance at least 1/n from
the complement and with Euclidean norm at most n; these sets increase to U
and are the basis for first-exit detection and explosion bookkeeping.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError

__all__ = ["StateSpace", "CompactSet"]


def as_point(x, dim):
    """Coerce x to a (dim,) float array."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.shape[0] != dim:
        raise ArgumentError(f"expected a point in R^{dim}, got shape {np.shape(x)}")
    return p


@dataclass(frozen=True)
class CompactSet:
    """Axis-aligned box intersected with a closed Euclidean ball."""

    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    radius: float

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo) or np.any(x > self.hi):
            return False
        if np.isfinite(self.radius):
            return float(np.linalg.norm(x - self.center)) <= self.radius
        return True

    def contains_many(self, X):
        """Vectorized membership for X of shape (n, d)."""
        X = np.asarray(X, dtype=float)
        ok = np.all(X >= self.lo, axis=-1) & np.all(X <= self.hi, axis=-1)
        if np.isfinite(self.radius):
            ok &= np.linalg.norm(X - self.center, axis=-1) <= self.radius
        return ok

    def is_empty(self):
        return bool(np.any(self.lo > self.hi)) or self.radius < 0


@dataclass(frozen=True)
class StateSpace:
    """Open box {x : lo < x < hi} with +-inf bounds allowed."""

    dim: int
    lo: np.ndarray
    hi: np.ndarray
    kind: str = field(default="box")

    @classmethod
    def rd(cls, dim=1):
        d = int(dim)
        return cls(d, np.full(d, -np.inf), np.full(d, np.inf), kind="all-of-Rd")

    @classmethod
    def interval(cls, a, b):
        if not a < b:
            raise ArgumentError(f"empty interval ({a}, {b})")
        return cls(1, np.array([float(a)]), np.array([float(b)]), kind="open-interval")

    @classmethod
    def halfline(cls):
        return cls(1, np.array([0.0]), np.array([np.inf]), kind="positive-halfline")

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ArgumentError("box bounds must satisfy lo < hi componentwise")
        return cls(lo.shape[0], lo, hi, kind="open-box")

    # -- membership -----------------------------------------------------

    def contains(self, x):
        try:
            x = as_point(x, self.dim)
        except ArgumentError:
            return False
        if not np.all(np.isfinite(x)):
            return False
        return bool(np.all(x > self.lo) and np.all(x < self.hi))

    def contains_many(self, X):
        X = np.asarray(X, dtype=float)
        return (
            np.all(np.isfinite(X), axis=-1)
            & np.all(X > self.lo, axis=-1)
            & np.all(X < self.hi, axis=-1)
        )

    def require(self, x):
        x = as_point(x, self.dim)
        if not self.contains(x):
            raise DomainError(f"point {x} is not in the open state space")
        return x

    def dist_to_complement(self, x):
        """Distance from x to U^c (inf for U = R^d)."""
        x = as_point(x, self.dim)
        gaps = []
        for j in range(self.dim):
            if np.isfinite(self.lo[j]):
                gaps.append(x[j] - self.lo[j])
            if np.isfinite(self.hi[j]):
                gaps.append(self.hi[j] - x[j])
        return float(min(gaps)) if gaps else np.inf

    # -- exhaustion ------------------------------------------------------

    def exhaustion(self, n):
        """Compact K_n = {x : dist(x, U^c) >= 1/n, |x| <= n}, K_n up to U."""
        if n < 1:
            raise ArgumentError("exhaustion index must be >= 1")
        margin = 1.0 / float(n)
        lo = np.where(np.isfinite(self.lo), self.lo + margin, -np.inf)
        hi = np.where(np.isfinite(self.hi), self.hi - margin, np.inf)
        return CompactSet(lo, hi, np.zeros(self.dim), float(n))

    def difference_set_radius(self):
        """Supremum of |y| over y in U - U (may be inf)."""
        widths = self.hi - self.lo
        if np.all(np.isfinite(widths)):
            return float(np.linalg.norm(widths))
        return np.inf
