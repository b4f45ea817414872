import math

import numpy as np
import pytest

from chernlab.finite_volume import (
    ProjectionMatrix,
    restrict_periodic,
    restrict_simple,
    spectral_projection,
)
from chernlab.lattice import box_sites
from chernlab.model import HaldaneParams, haldane_model
from chernlab.topology import (
    chern_marker,
    chern_marker_triple,
    flux_unitary,
    index_pair,
)

T2 = 1.0 / (3.0 * math.sqrt(3.0))
BOX16 = box_sites(16)


def _gap_projection(phi, box):
    m = haldane_model(HaldaneParams(t1=1.0, t2=T2, phi=phi, M=0.0))
    return spectral_projection(restrict_periodic(m, None, 0.0, box), 0.0)


@pytest.fixture(scope="module")
def proj_plus():
    return _gap_projection(math.pi / 2, BOX16)


@pytest.fixture(scope="module")
def proj_minus():
    return _gap_projection(-math.pi / 2, BOX16)


def test_marker_trivial_projections():
    box = box_sites(6)
    N = 2 * box.size
    zero = ProjectionMatrix(np.zeros((N, N), dtype=complex), -99.0, "zero", 0)
    one = ProjectionMatrix(np.eye(N, dtype=complex), 99.0, "one", N)
    assert chern_marker(zero, box, 4).value == 0.0
    assert chern_marker(one, box, 4).value == 0.0
    assert chern_marker_triple(one, box, 4) == 0.0


def test_marker_haldane_signs(proj_plus, proj_minus):
    rp = chern_marker(proj_plus, BOX16, 6)
    rm = chern_marker(proj_minus, BOX16, 6)
    assert rp.value == pytest.approx(-1.0, abs=0.15)
    assert rm.value == pytest.approx(+1.0, abs=0.15)
    assert rp.imag_residual < 1e-8 and rm.imag_residual < 1e-8


def test_marker_center_translation_stability(proj_plus):
    base = chern_marker(proj_plus, BOX16, 6).value
    for center in ((1, 0), (0, 1), (-1, -1)):
        assert abs(chern_marker(proj_plus, BOX16, 6, center).value - base) < 0.05


def test_marker_rank_one_localized_vanishes():
    rng = np.random.default_rng(0)
    g = BOX16.sites
    amp = np.exp(-np.hypot(g[:, 0], g[:, 1]) / 1.5)
    psi = (amp[:, None] * np.exp(2j * math.pi * rng.random((BOX16.size, 2)))).ravel()
    psi /= np.linalg.norm(psi)
    P = ProjectionMatrix(np.outer(psi, psi.conj()), 0.0, "rank1", 1)
    assert abs(chern_marker(P, BOX16, 4).value) < 0.05


def test_marker_window_validation(proj_plus):
    with pytest.raises(ValueError):
        chern_marker(proj_plus, BOX16, 17)
    with pytest.raises(ValueError):
        # window legal by size but pushed out of the box by its center
        chern_marker(proj_plus, BOX16, 8, center=(7, 0))


def test_marker_equals_triple_full_box():
    # full-box sums of both forms telescope to zero; the identity is
    # that they agree, checked here on open boundaries where no wrap
    # could hide a discrepancy
    box = box_sites(10)
    m = haldane_model(HaldaneParams(t1=1.0, t2=T2, phi=math.pi / 2, M=0.0))
    P = spectral_projection(restrict_simple(m, None, 0.0, box), 0.0)
    a = chern_marker(P, box, 10).value
    b = chern_marker_triple(P, box, 10)
    assert abs(a - b) < 1e-6


def test_marker_equals_triple_windowed(proj_plus):
    a = chern_marker(proj_plus, BOX16, 6).value
    b = chern_marker_triple(proj_plus, BOX16, 6)
    assert abs(a - b) < 1e-6
    assert b == pytest.approx(-1.0, abs=0.15)


def test_flux_unitary_phases():
    box = box_sites(10)
    fu = flux_unitary((0.5, 0.5), box, 2)
    i = box.index_of(1, 1)
    assert -np.angle(fu.phases[2 * i]) == pytest.approx(math.pi / 4, abs=1e-12)
    assert np.allclose(np.abs(fu.phases), 1.0, atol=1e-15)
    U = fu.phases
    assert np.allclose(U * np.conj(U), 1.0, atol=1e-15)


def test_flux_unitary_rejects_lattice_point():
    with pytest.raises(ValueError):
        flux_unitary((1.0, -2.0), box_sites(6), 2)


def test_index_diagonal_projection_zero():
    box = box_sites(10)
    N = 2 * box.size
    P = np.zeros((N, N), dtype=complex)
    P[::2, ::2] = np.eye(box.size)
    assert index_pair(ProjectionMatrix(P, 0.0, "diag", box.size), box, (0.3, 0.2)) == 0


def test_index_matches_chern_sign(proj_plus, proj_minus):
    assert index_pair(proj_plus, BOX16, (0.1, 0.1)) == -1
    assert index_pair(proj_minus, BOX16, (0.1, 0.1)) == +1


def test_index_stable_under_flux_point_shift(proj_plus):
    assert index_pair(proj_plus, BOX16, (0.2, 0.03)) == -1
    assert index_pair(proj_plus, BOX16, (0.5, 0.5)) == -1


def test_index_trivial_phase_zero():
    m = haldane_model(HaldaneParams(t1=1.0, t2=0.0, phi=0.0, M=1.0))
    P = spectral_projection(restrict_periodic(m, None, 0.0, BOX16), 0.0)
    assert index_pair(P, BOX16, (0.1, 0.1)) == 0


def test_index_ambiguous_window_errors(proj_plus):
    # pick the tolerance so a real eigenvalue of the windowed difference
    # lands exactly on the window edge
    u = flux_unitary((0.1, 0.1), BOX16, 2).phases
    m = proj_plus.matrix
    D = (u[:, None] * m) * np.conj(u)[None, :] - m
    rows = np.array([2 * i + o for i, (a, b) in enumerate(BOX16.sites)
                     if -4 <= a <= 3 and -4 <= b <= 3 for o in range(2)])
    ev = np.linalg.eigvalsh(D[np.ix_(rows, rows)])
    mid = ev[(ev > 0.05) & (ev < 0.95)][0]
    with pytest.raises(ValueError, match="ambiguous"):
        index_pair(proj_plus, BOX16, (0.1, 0.1), tol_window=float(1.0 - mid))
