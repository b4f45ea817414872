"""Finite-volume restrictions, spectra, projections, Green functions.

One dense Hermitian eigendecomposition per operator is the single
spectral primitive; projections, resolvents, and time evolution all
reuse it. Gap-membership arguments should use the periodic restriction:
open boundaries of a topologically nontrivial model carry in-gap edge
modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import pi

import numpy as np

from .disorder import DisorderSample
from .lattice import Box
from .model import HoppingModel, build_dense

__all__ = [
    "FiniteOperator",
    "ProjectionMatrix",
    "restrict_simple",
    "restrict_periodic",
    "spectral_projection",
    "green_function",
]

_HERM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteOperator:
    matrix: np.ndarray
    box: Box
    n: int
    bc: str
    lam: float
    sample_ref: str

    def __post_init__(self) -> None:
        N = self.n * self.box.size
        if self.matrix.shape != (N, N):
            raise ValueError(f"matrix must be {N}x{N}")
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > _HERM_TOL:
            raise ValueError("matrix is not Hermitian")
        if self.bc not in ("simple", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        self.matrix.flags.writeable = False

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        w, v = np.linalg.eigh(self.matrix)
        w.flags.writeable = False
        v.flags.writeable = False
        return w, v

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]


@dataclass(frozen=True)
class ProjectionMatrix:
    matrix: np.ndarray
    fermi_energy: float
    operator_ref: str
    rank: int = field(default=-1)

    def __post_init__(self) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("projection is not Hermitian")
        if np.max(np.abs(m @ m - m)) > 1e-9:
            raise ValueError("projection is not idempotent")
        self.matrix.flags.writeable = False


def _sample_ref(sample: DisorderSample | None) -> str:
    if sample is None:
        return "clean"
    return f"seed={sample.seed},realization={sample.realization_index}"


def _with_potential(H: np.ndarray, sample: DisorderSample | None, lam: float,
                    N: int) -> np.ndarray:
    if lam < 0:
        raise ValueError("disorder strength must be >= 0")
    if sample is not None and lam != 0.0:
        vals = np.asarray(sample.values, dtype=float)
        if vals.shape != (N,):
            raise ValueError(f"sample has {vals.shape[0]} values, operator needs {N}")
        H = H + np.diag(lam * vals)
    return H


def restrict_simple(model: HoppingModel, sample: DisorderSample | None,
                    lam: float, box: Box) -> FiniteOperator:
    """Compression chi_Box (H0 + lam V) chi_Box, open boundaries."""
    N = model.n * box.size
    H = _with_potential(build_dense(model, box, periodic=False), sample, lam, N)
    return FiniteOperator(matrix=H, box=box, n=model.n, bc="simple", lam=lam,
                          sample_ref=_sample_ref(sample))


def _flux_denominator(flux: float, L: int) -> int:
    ratio = flux / (2.0 * pi)
    frac = Fraction(ratio).limit_denominator(max(2 * L, 64))
    if abs(ratio - float(frac)) > 1e-12:
        raise ValueError("flux is not 2*pi*(p/q) with small q; periodic wrap undefined")
    return frac.denominator


def restrict_periodic(model: HoppingModel, sample: DisorderSample | None,
                      lam: float, box: Box) -> FiniteOperator:
    """Wrapped-kernel restriction: rows sum the plane kernel over L-translates.

    Requires the clean kernel to be q-periodic with q dividing L, and
    hopping range below L/2 so each wrap direction contributes at most
    one image.
    """
    q = _flux_denominator(model.flux, box.L)
    if box.L % q != 0:
        raise ValueError(f"box side {box.L} is not a multiple of the flux period {q}")
    if 2 * model.r >= box.L:
        raise ValueError(f"hopping range {model.r} needs box side > {2 * model.r}")
    N = model.n * box.size
    H = _with_potential(build_dense(model, box, periodic=True), sample, lam, N)
    return FiniteOperator(matrix=H, box=box, n=model.n, bc="periodic", lam=lam,
                          sample_ref=_sample_ref(sample))


def spectral_projection(op: FiniteOperator, E: float) -> ProjectionMatrix:
    """P = chi_(-inf, E] of the operator; E exactly at an eigenvalue is included."""
    w, v = op._eig
    k = int(np.searchsorted(w, E, side="right"))
    if k == 0:
        P = np.zeros_like(op.matrix)
    else:
        vk = v[:, :k]
        P = vk @ vk.conj().T
        P = 0.5 * (P + P.conj().T)
    return ProjectionMatrix(matrix=P, fermi_energy=float(E),
                            operator_ref=f"{op.bc};lam={op.lam};{op.sample_ref}",
                            rank=k)


def green_function(op: FiniteOperator, z: complex) -> np.ndarray:
    """(H - z)^(-1) through the eigendecomposition."""
    w, v = op._eig
    gap = np.min(np.abs(w - z))
    if gap <= 1e-12:
        raise ValueError(f"resonant energy: dist(z, spectrum) = {gap:.3e}")
    G = (v / (w - z)) @ v.conj().T
    G.flags.writeable = False
    return G
