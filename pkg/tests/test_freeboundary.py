"""Tests for the planar free boundary (tip location) solver."""

import warnings

import numpy as np
import pytest

from slitkit import (
    FreeBoundaryResult,
    MultipleRoots,
    NoBracket,
    TipProblem,
    TruncationWarning,
    solve_disc_2d,
    solve_free_boundary,
    tip_coefficient,
)


def phi_u0(t):
    return np.abs(np.cos(t / 2.0))


class TestTipCoefficient:
    def test_centered_u0_data_gives_one(self):
        assert abs(tip_coefficient(0.0, phi_u0) - 1.0) < 1e-10

    def test_linearity_in_data(self):
        a1 = tip_coefficient(0.2, phi_u0)
        a2 = tip_coefficient(0.2, lambda t: 3.0 * phi_u0(t))
        assert abs(a2 - 3.0 * a1) < 1e-9

    def test_methods_agree(self):
        af = tip_coefficient(0.3, phi_u0, method="fixed")
        aq = tip_coefficient(0.3, phi_u0, method="quad")
        assert abs(af - aq) < 1e-9

    def test_monotone_increasing_in_gamma(self):
        # moving the tip toward the data's mass increases the flux
        a = [tip_coefficient(g, phi_u0) for g in (-0.3, 0.0, 0.3)]
        assert a[0] < a[1] < a[2]

    def test_against_grid_oracle(self):
        # independent 5-point finite-difference disc solve, quotient
        # u/sqrt(t) extrapolated at the shifted tip
        gamma = 0.3
        a_series = tip_coefficient(gamma, phi_u0)
        a_fd, _ = solve_disc_2d(gamma, phi_u0, h=2**-8)
        assert abs(a_series - a_fd) / a_series < 0.01

    def test_tip_outside_disc_rejected(self):
        with pytest.raises(ValueError):
            tip_coefficient(1.0, phi_u0)


class TestTipProblem:
    def test_validates_bracket(self):
        with pytest.raises(ValueError):
            TipProblem(phi=phi_u0, G=lambda g: 1.0 + 0 * g, bracket=(-1.5, 0.5))

    def test_validates_positive_G(self):
        with pytest.raises(ValueError):
            TipProblem(phi=phi_u0, G=lambda g: np.asarray(g) - 0.5)

    def test_validates_nonnegative_phi(self):
        with pytest.raises(ValueError):
            TipProblem(phi=lambda t: np.cos(t), G=lambda g: 1.0 + 0 * g)

    def test_validates_phi_vanishes_at_slit_meeting(self):
        with pytest.raises(ValueError):
            TipProblem(phi=lambda t: 1.0 + 0 * np.asarray(t),
                       G=lambda g: 1.0 + 0 * g)


class TestSolveFreeBoundary:
    def test_unit_flux_root_at_origin(self):
        prob = TipProblem(phi=phi_u0, G=lambda g: 1.0 + 0.0 * np.asarray(g),
                          bracket=(-0.5, 0.5))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            res = solve_free_boundary(prob)
        assert isinstance(res, FreeBoundaryResult)
        assert abs(res.gamma) < 1e-6
        assert abs(res.a - 1.0) < 1e-8
        assert res.residual < 1e-9

    def test_supercritical_flux_moves_tip_forward(self):
        # a(gamma) increases with gamma for this data, so G slightly
        # above 1 puts the root at positive gamma
        prob = TipProblem(phi=phi_u0, G=lambda g: 1.05 + 0.0 * np.asarray(g),
                          bracket=(-0.5, 0.5))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            res = solve_free_boundary(prob)
        assert res.gamma > 0.05
        assert abs(res.a - 1.05) < 1e-8

    def test_no_bracket(self):
        prob = TipProblem(phi=phi_u0, G=lambda g: 5.0 + 0.0 * np.asarray(g),
                          bracket=(-0.5, 0.5))
        with pytest.raises(NoBracket), warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            solve_free_boundary(prob)

    def test_multiple_roots_reported(self):
        # a(gamma) is increasing (0.82 at -0.4, 1.0 at 0, 1.27 at 0.4);
        # an inverted parabola above a at 0 and below it at +-0.4
        # crosses twice
        def G(g):
            g = np.asarray(g, dtype=float)
            return 1.05 - 2.0 * g**2

        prob = TipProblem(phi=phi_u0, G=G, bracket=(-0.45, 0.45))
        with pytest.raises(MultipleRoots) as ei, warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            solve_free_boundary(prob)
        assert len(ei.value.roots) == 2
        assert ei.value.roots[0] < 0 < ei.value.roots[1]
