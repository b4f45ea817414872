"""Bravais lattice geometry: coefficient norms, wedge product, centered boxes.

All distances are measured in lattice coefficients (the integer
coordinates w.r.t. the basis a1, a2), never in Cartesian embedding.
Every bound downstream assumes this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LatticeBasis",
    "Box",
    "wedge",
    "norm",
    "norm_inf",
    "japanese_bracket",
    "box_sites",
    "inner_boundary",
    "core_sites",
]


@dataclass(frozen=True)
class LatticeBasis:
    """Two real basis vectors spanning the lattice, in Cartesian units."""

    a1: tuple[float, float]
    a2: tuple[float, float]

    def __post_init__(self) -> None:
        det = self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0]
        if abs(det) <= 1e-15:
            raise ValueError("basis vectors must be linearly independent")

    def cartesian(self, g1: float, g2: float) -> np.ndarray:
        return g1 * np.asarray(self.a1, dtype=float) + g2 * np.asarray(self.a2, dtype=float)


def wedge(gamma, xi) -> int:
    """Wedge of two coefficient pairs: g2*x1 - g1*x2.

    Sign convention: wedge((1,0), (0,1)) == -1.
    """
    return gamma[1] * xi[0] - gamma[0] * xi[1]


def norm(gamma) -> float:
    return float(np.hypot(gamma[0], gamma[1]))


def norm_inf(gamma) -> int:
    return max(abs(gamma[0]), abs(gamma[1]))


def japanese_bracket(gamma) -> float:
    """sqrt(1 + g1^2 + g2^2), the weight used by moment observables."""
    return float(np.sqrt(1.0 + gamma[0] ** 2 + gamma[1] ** 2))


@dataclass(frozen=True)
class Box:
    """Centered box of side L: coefficients in {0,...,L-1} - floor(L/2).

    Sites are ordered row-major in (g1, g2), g1 outermost. All dense
    matrices downstream index sites in exactly this order.
    """

    L: int
    sites: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError(f"box side must be >= 1, got {self.L}")

    @property
    def size(self) -> int:
        return self.L * self.L

    def index_of(self, g1: int, g2: int) -> int:
        """Rank of the site in the row-major ordering; -1 if outside."""
        off = self.L // 2
        i, j = g1 + off, g2 + off
        if 0 <= i < self.L and 0 <= j < self.L:
            return i * self.L + j
        return -1

    def contains(self, g1: int, g2: int) -> bool:
        return self.index_of(g1, g2) >= 0


def box_sites(L: int) -> Box:
    """Build the centered box of side L (L^2 sites)."""
    if L < 1:
        raise ValueError(f"box side must be >= 1, got {L}")
    off = L // 2
    vals = np.arange(L) - off
    g1, g2 = np.meshgrid(vals, vals, indexing="ij")
    sites = np.stack([g1.ravel(), g2.ravel()], axis=1).astype(np.int64)
    return Box(L=L, sites=sites)


def inner_boundary(box: Box, r: int) -> np.ndarray:
    """Sites of the box with some complement site within sup-distance r.

    A site is in the r-shell iff its sup-distance margin to the box edge
    is < r (the nearest outside site then sits at margin+1 <= r).
    Returns the (m, 2) coefficient array in box site order.
    """
    if r < 1:
        raise ValueError(f"shell thickness must be >= 1, got {r}")
    off = box.L // 2
    lo, hi = -off, box.L - 1 - off
    g = box.sites
    margin = np.minimum.reduce(
        [g[:, 0] - lo, hi - g[:, 0], g[:, 1] - lo, hi - g[:, 1]]
    )
    return box.sites[margin < r]


def core_sites(box: Box, r: int) -> Box:
    """Core box of side (L+2r)/3 used by the suitability criterion.

    Requires L = 3k + 4r with k a positive integer, so the core nests
    inside the box with symmetric margins k + r on all four edges.
    """
    if r < 1:
        raise ValueError(f"range must be >= 1, got {r}")
    L = box.L
    k, rem = divmod(L - 4 * r, 3)
    if rem != 0 or k < 1:
        raise ValueError(f"{L} not admissible for range {r}: need L = 3k + {4 * r} with k a positive integer")
    return box_sites((L + 2 * r) // 3)
