from __future__ import annotations

import csv
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlseno import stability as stab


def _closed_form(theta):
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    return 16 / 15 * s**6 + 1j * (np.sin(2 * theta) / 6 - 4 / 3 * np.sin(theta) - 16 / 15 * s**5 * c)


def test_five_cell_flux_difference():
    sc = stab.five_cell_scheme()
    assert sc.offsets == (-3, -2, -1, 0, 1, 2)
    assert sc.coefficients == tuple(Fraction(k, 60) for k in (-2, 15, -60, 20, 30, -3))


@pytest.mark.parametrize("make", [stab.five_cell_scheme, stab.seven_cell_scheme])
def test_consistency(make):
    assert sum(make().coefficients) == 0


def test_symbol_closed_form():
    theta = np.linspace(0.0, 2 * np.pi, 64)
    np.testing.assert_allclose(stab.fourier_symbol(stab.five_cell_scheme(), theta), _closed_form(theta), atol=1e-12)


def test_symbol_at_pi_and_zero():
    sc = stab.five_cell_scheme()
    assert stab.fourier_symbol(sc, np.pi).real == pytest.approx(16 / 15, abs=1e-13)
    assert abs(stab.fourier_symbol(sc, 0.0)) < 1e-14


@settings(max_examples=50)
@given(theta=st.floats(0.0, 2 * np.pi))
def test_conjugate_symmetry(theta):
    for sc in (stab.five_cell_scheme(), stab.seven_cell_scheme()):
        z1 = stab.fourier_symbol(sc, 2 * np.pi - theta)
        z2 = np.conj(stab.fourier_symbol(sc, theta))
        assert abs(z1 - z2) < 1e-12
        assert stab.fourier_symbol(sc, theta).real >= -1e-13


def test_max_cfl_values():
    assert stab.max_cfl(stab.five_cell_scheme()) == pytest.approx(1.44, abs=0.01)
    assert stab.max_cfl(stab.seven_cell_scheme()) == pytest.approx(1.67, abs=0.01)


def test_max_cfl_rescaling():
    sc = stab.five_cell_scheme()
    scaled = stab.LinearScheme(sc.offsets, tuple(2 * c for c in sc.coefficients))
    assert stab.max_cfl(scaled) == pytest.approx(stab.max_cfl(sc) / 2, abs=1e-3)


def test_trivial_scheme_hits_cap():
    assert stab.max_cfl(stab.LinearScheme((0,), (0.0,))) == 4.0


def test_unstable_scheme_reports_zero():
    # downwind differencing: spectrum in the right half plane
    assert stab.max_cfl(stab.LinearScheme((0, 1), (-1.0, 1.0))) == 0.0


def test_boundary_roots_on_unit_circle():
    phi, roots = stab.stability_boundary(256)
    assert roots.shape == (256, 3)
    np.testing.assert_allclose(np.abs(stab.amplification(roots)), 1.0, atol=1e-10)
    assert np.min(np.abs(roots[0])) < 1e-12  # phi = 0 has z = 0


def test_real_axis_limit():
    assert stab.real_axis_limit() == pytest.approx(-2.5127, abs=1e-3)


def test_rk3_amplification_matches_step():
    from wlseno.solver import rk3_step

    lam, dt = -0.7 + 1.3j, 0.4
    out = rk3_step(lambda v: lam * v, np.array([1.0 + 0j]), dt)
    assert out[0] == pytest.approx(stab.amplification(lam * dt), abs=1e-15)


def test_points_csv(tmp_path):
    theta, spec = stab.discrete_spectrum(stab.five_cell_scheme(), 16)
    path = tmp_path / "s.csv"
    stab.write_points_csv(path, theta, spec)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["theta_or_phi", "re", "im"]
    assert len(rows) == 18
    assert float(rows[1][1]) == pytest.approx(0.0, abs=1e-15)


def test_rank_deficient_symbolic_system():
    with pytest.raises(stab.RankDeficientError):
        stab.face_weights_from_wls(4, None, 4)
