"""Finite-range tight-binding Hamiltonians on l2(Gamma; C^n).

A model stores the zero-flux hopping matrices H0(0, delta) for each
displacement delta with sup-norm at most r, plus a flux parameter B.
Kernels at nonzero flux carry the covariance phase exp(iB (gamma ^ xi)),
which is the unique wedge-linear gauge commuting with the magnetic
translations T_gamma: (T_gamma psi)(xi) = exp(-iB (gamma ^ xi)) psi(xi - gamma).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .lattice import Box, LatticeBasis, box_sites, norm_inf, wedge

__all__ = [
    "HoppingModel",
    "HaldaneParams",
    "haldane_model",
    "honeycomb_basis",
    "kernel",
    "build_dense",
    "check_magnetic_periodicity",
    "hopping_norm_sum",
    "model_from_json",
]

_HERMITICITY_TOL = 1e-12

# Cartesian honeycomb data: nearest-neighbor bonds d1, d2, d3 and the
# Bravais vectors a1 = d2 - d3, a2 = d3 - d1 (a3 = -a1 - a2).
_D1 = (0.5, -np.sqrt(3.0) / 2.0)
_D2 = (0.5, np.sqrt(3.0) / 2.0)
_D3 = (-1.0, 0.0)

# Displacements in lattice coefficients.
_A1 = (1, 0)
_A2 = (0, 1)
_A3 = (-1, -1)


def honeycomb_basis() -> LatticeBasis:
    return LatticeBasis(a1=(1.5, np.sqrt(3.0) / 2.0), a2=(-1.5, np.sqrt(3.0) / 2.0))


@dataclass(frozen=True)
class HoppingModel:
    """Hopping data H0(0, delta) keyed by coefficient displacement."""

    basis: LatticeBasis
    n: int
    r: int
    hoppings: Mapping[tuple[int, int], np.ndarray]
    flux: float = 0.0
    _zero: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1 or self.r < 1:
            raise ValueError("need n >= 1 and r >= 1")
        clean: dict[tuple[int, int], np.ndarray] = {}
        for delta, mat in self.hoppings.items():
            delta = (int(delta[0]), int(delta[1]))
            if norm_inf(delta) > self.r:
                raise ValueError(f"displacement {delta} exceeds hopping range {self.r}")
            m = np.asarray(mat, dtype=complex)
            if m.shape != (self.n, self.n):
                raise ValueError(f"hopping matrix for {delta} must be {self.n}x{self.n}")
            m = m.copy()
            m.flags.writeable = False
            clean[delta] = m
        for delta, m in clean.items():
            neg = (-delta[0], -delta[1])
            if neg not in clean:
                raise ValueError(f"missing reverse hopping for {delta}")
            if np.max(np.abs(m - clean[neg].conj().T)) > _HERMITICITY_TOL:
                raise ValueError(f"hoppings for {delta} and {neg} are not Hermitian partners")
        object.__setattr__(self, "hoppings", clean)
        zero = np.zeros((self.n, self.n), dtype=complex)
        zero.flags.writeable = False
        object.__setattr__(self, "_zero", zero)

    @property
    def displacements(self) -> list[tuple[int, int]]:
        return sorted(self.hoppings.keys())


@dataclass(frozen=True)
class HaldaneParams:
    t1: float = 1.0
    t2: float = 1.0 / (3.0 * np.sqrt(3.0))
    phi: float = np.pi / 2.0
    M: float = 0.0
    dimerization: str = "d3"

    def __post_init__(self) -> None:
        if self.t1 <= 0.0:
            raise ValueError("t1 must be positive")
        if self.t2 < 0.0:
            raise ValueError("t2 must be nonnegative")
        if not (-np.pi <= self.phi <= np.pi):
            raise ValueError("phi must lie in [-pi, pi]")
        if self.dimerization not in ("d1", "d2", "d3"):
            raise ValueError("dimerization must be one of d1, d2, d3")


def haldane_model(p: HaldaneParams) -> HoppingModel:
    """Honeycomb model with complex next-nearest hops and staggered mass.

    Orbital 0 is sublattice A (on-site +M), orbital 1 is B (-M). The
    next-nearest block is the same for every displacement a_i and every
    dimerization: diag(t2 e^{-i phi}, t2 e^{i phi}). The dimerization
    only moves where the three t1 bonds land: the in-cell bond goes to
    the on-site block, the other two to a cyclic pair of a_i blocks.
    """
    w = p.t2 * np.exp(-1j * p.phi)
    nnn = np.diag([w, np.conj(w)])
    # (block with t1 at [0,1], block with t1 at [1,0], block left diagonal)
    slots = {
        "d3": (_A1, _A2, _A3),
        "d1": (_A2, _A3, _A1),
        "d2": (_A3, _A1, _A2),
    }[p.dimerization]
    up, dn, dg = slots
    h_up = nnn.copy()
    h_up[0, 1] = p.t1
    h_dn = nnn.copy()
    h_dn[1, 0] = p.t1
    onsite = np.array([[p.M, p.t1], [p.t1, -p.M]], dtype=complex)
    hop = {
        (0, 0): onsite,
        up: h_up,
        dn: h_dn,
        dg: nnn,
        (-up[0], -up[1]): h_up.conj().T,
        (-dn[0], -dn[1]): h_dn.conj().T,
        (-dg[0], -dg[1]): nnn.conj().T,
    }
    return HoppingModel(basis=honeycomb_basis(), n=2, r=1, hoppings=hop, flux=0.0)


def kernel(model: HoppingModel, gamma, xi) -> np.ndarray:
    """H0(gamma, xi) including the flux phase exp(iB (gamma ^ xi))."""
    delta = (xi[0] - gamma[0], xi[1] - gamma[1])
    h = model.hoppings.get(delta)
    if h is None:
        return model._zero
    if model.flux == 0.0:
        return h
    return np.exp(1j * model.flux * wedge(gamma, xi)) * h


def build_dense(model: HoppingModel, box: Box, periodic: bool = False) -> np.ndarray:
    """Assemble the dense matrix of H0 on the box, site-major ordering.

    With ``periodic`` the displacement wraps modulo L in each direction
    (the flux phase is still evaluated at the unwrapped coefficients of
    the stored displacement, applied to the wrapped pair).
    """
    n, L = model.n, box.L
    N = box.size
    H = np.zeros((N * n, N * n), dtype=complex)
    off = L // 2
    g1 = box.sites[:, 0]
    g2 = box.sites[:, 1]
    for delta, mat in model.hoppings.items():
        t1c, t2c = g1 + delta[0], g2 + delta[1]
        if periodic:
            t1w = (t1c + off) % L - off
            t2w = (t2c + off) % L - off
            cols = (t1w + off) * L + (t2w + off)
            rows_ok = np.arange(N)
        else:
            ok = (t1c >= -off) & (t1c <= L - 1 - off) & (t2c >= -off) & (t2c <= L - 1 - off)
            rows_ok = np.nonzero(ok)[0]
            cols = (t1c[ok] + off) * L + (t2c[ok] + off)
        if model.flux != 0.0:
            # phase at (gamma, gamma + delta): exp(iB (gamma ^ delta))
            ph = np.exp(1j * model.flux * (g2[rows_ok] * delta[0] - g1[rows_ok] * delta[1]))
        else:
            ph = np.ones(len(rows_ok))
        for a in range(n):
            for b in range(n):
                if mat[a, b] != 0.0:
                    H[rows_ok * n + a, cols * n + b] += ph * mat[a, b]
    return H


def check_magnetic_periodicity(model: HoppingModel, L: int, matrix: np.ndarray | None = None) -> bool:
    """Check flux-twisted translation covariance of the dense kernel on a box.

    For each generator shift s in {a1, a2} and every site pair staying in
    the box after the shift, the kernel must satisfy
    H(gamma, xi) = exp(iB (s ^ (gamma - xi))) H(gamma + s, xi + s).
    Pass an explicit ``matrix`` (in box ordering) to check a perturbed or
    externally built operator; default is the model's own dense kernel.
    """
    box = box_sites(L)
    H = build_dense(model, box) if matrix is None else np.asarray(matrix)
    n = model.n
    if H.shape != (box.size * n, box.size * n):
        raise ValueError("matrix shape does not match the box")
    worst = 0.0
    for s in (_A1, _A2):
        keep = []
        shifted = []
        for i, (g1, g2) in enumerate(box.sites):
            j = box.index_of(g1 + s[0], g2 + s[1])
            if j >= 0:
                keep.append(i)
                shifted.append(j)
        keep = np.asarray(keep)
        shifted = np.asarray(shifted)
        g = box.sites[keep]
        # wedge(s, gamma - xi) = s2 (g1a - g1b) - s1 (g2a - g2b) over all kept pairs
        w = np.subtract.outer(g[:, 0], g[:, 0]) * s[1]
        w = w - np.subtract.outer(g[:, 1], g[:, 1]) * s[0]
        phase = np.exp(1j * model.flux * w)
        rows0 = (keep[:, None] * n + np.arange(n)[None, :]).ravel()
        rows1 = (shifted[:, None] * n + np.arange(n)[None, :]).ravel()
        lhs = H[np.ix_(rows0, rows0)]
        rhs = H[np.ix_(rows1, rows1)]
        ph = np.kron(phase, np.ones((n, n)))
        dev = np.max(np.abs(lhs - ph * rhs)) if len(rows0) else 0.0
        worst = max(worst, float(dev))
    return worst < 1e-12


def hopping_norm_sum(model: HoppingModel, weight=None) -> float:
    """sup_gamma sum_xi w(|gamma-xi|) ||H0(gamma,xi)|| for translation-covariant H0.

    ``weight`` maps the coefficient norm |delta| to a scalar; default 1.
    Spectral norms, computed per stored block.
    """
    total = 0.0
    for delta, mat in model.hoppings.items():
        if delta == (0, 0):
            continue
        nrm = float(np.linalg.norm(mat, ord=2))
        wt = 1.0 if weight is None else float(weight(float(np.hypot(*delta))))
        total += wt * nrm
    return total


def _parse_complex_matrix(rows, n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    if len(rows) != n:
        raise ValueError(f"matrix must have {n} rows")
    for i, row in enumerate(rows):
        if len(row) != n:
            raise ValueError(f"matrix row {i} must have {n} entries")
        for j, entry in enumerate(row):
            re, im = entry
            m[i, j] = complex(re, im)
    return m


def model_from_json(doc) -> HoppingModel:
    """Build a model from a JSON document (dict or JSON text).

    Two forms: {"type": "haldane", "t1": .., "t2": .., "phi": .., "M": ..,
    "dimerization": "d3"} or {"type": "custom", "n": .., "r": .., "B": ..,
    "hoppings": [{"dg1": .., "dg2": .., "matrix": [[[re, im], ..], ..]}, ..]}.
    Custom hoppings may omit the reversed displacement; it is filled in
    as the Hermitian transpose.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    kind = doc.get("type")
    if kind == "haldane":
        p = HaldaneParams(
            t1=float(doc.get("t1", 1.0)),
            t2=float(doc.get("t2", 1.0 / (3.0 * np.sqrt(3.0)))),
            phi=float(doc.get("phi", np.pi / 2.0)),
            M=float(doc.get("M", 0.0)),
            dimerization=str(doc.get("dimerization", "d3")),
        )
        return haldane_model(p)
    if kind == "custom":
        n = int(doc["n"])
        r = int(doc["r"])
        flux = float(doc.get("B", 0.0))
        hop: dict[tuple[int, int], np.ndarray] = {}
        for item in doc["hoppings"]:
            delta = (int(item["dg1"]), int(item["dg2"]))
            hop[delta] = _parse_complex_matrix(item["matrix"], n)
        for delta in list(hop.keys()):
            neg = (-delta[0], -delta[1])
            if neg not in hop:
                hop[neg] = hop[delta].conj().T
        return HoppingModel(basis=LatticeBasis(a1=(1.0, 0.0), a2=(0.0, 1.0)), n=n, r=r, hoppings=hop, flux=flux)
    raise ValueError(f"unknown model type: {kind!r}")
