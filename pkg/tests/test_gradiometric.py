import math

import numpy as np
import pytest

from dsfq.circuit import CircuitSpec, Variant
from dsfq.gradiometric import (
    GeometryError,
    LoopGeometry,
    compensated_operating_flux,
    compensation_delta,
    flux_phases,
    global_flux_slope,
    omega_q_at_global_flux,
    vc_vs,
)

GRAD = CircuitSpec(variant=Variant.GRADIOMETRIC, ej=10.0, ec=0.1,
                   alpha1=1.0, alpha2=1.0, cutoff=10)


def test_flux_phases_half_quantum():
    # A1 = A2 = A, b = 0, per-loop flux = Phi_0/2 -> (pi, -pi)
    geom = LoopGeometry(a1=1.0, a2=1.0, b_global=1.0, b_gradient=0.0)
    pe1, pe2 = flux_phases(geom)
    assert pe1 == pytest.approx(math.pi)
    assert pe2 == pytest.approx(-math.pi)


def test_flux_phases_area_ratio():
    geom = LoopGeometry(a1=1.01, a2=0.99, b_global=0.77)
    pe1, pe2 = flux_phases(geom)
    assert abs(pe1) != pytest.approx(abs(pe2))
    assert abs(pe1) / abs(pe2) == pytest.approx(1.01 / 0.99)


def test_flux_phases_product_invariance():
    g1 = LoopGeometry(a1=2.0, a2=2.0, b_global=0.35)
    g2 = LoopGeometry(a1=0.7, a2=0.7, b_global=0.35 * 2.0 / 0.7)
    assert flux_phases(g1) == pytest.approx(flux_phases(g2))


def test_vc_vs_symmetric():
    vc, vs = vc_vs(0.8, 0.8, 0.3, 0.3)
    assert vc == pytest.approx(2 * 0.8 * math.cos(0.3))
    assert vs == pytest.approx(2 * 0.8 * math.sin(0.3))


def test_vs_cancellation_opposite_phases():
    _, vs = vc_vs(0.9, 0.9, 1.234, -1.234)
    assert vs == pytest.approx(0.0, abs=1e-15)


def test_compensation_delta_values():
    exact0, approx0, diff0 = compensation_delta(0.0)
    assert exact0 == 0.0 and approx0 == 0.0 and diff0 == 0.0
    exact, approx, diff = compensation_delta(0.01)
    assert approx == pytest.approx(0.02)
    assert abs(exact - 2 * 0.01) < 1e-3
    assert diff == pytest.approx(exact - approx)


def test_compensation_delta_out_of_range():
    with pytest.raises(GeometryError):
        compensation_delta(0.25)


def test_sweet_spot_conditions_exact():
    # substitute delta(r) into the two stationarity conditions
    r = 0.05
    delta, _, _ = compensation_delta(r)
    u_star = compensated_operating_flux(r)
    geom = LoopGeometry(a1=1 + r, a2=1 - r).at_global_flux(u_star)
    pe1, pe2 = flux_phases(geom)
    # condition 1: sin(phi_ext2) = 0 (V_s insensitive to delta for all delta)
    assert math.sin(pe2) == pytest.approx(0.0, abs=1e-9)
    # condition 2: dV_s/dB = 0, via numerical derivative over the global field
    def vs_of_b(b):
        g = LoopGeometry(a1=1 + r, a2=1 - r, b_global=b)
        p1, p2 = flux_phases(g)
        return vc_vs(1.0, 1.0 + delta, p1, p2)[1]
    b0 = geom.b_global
    h = 1e-7
    dvs_db = (vs_of_b(b0 + h) - vs_of_b(b0 - h)) / (2 * h)
    scale = abs((vs_of_b(b0 + 0.01) - vs_of_b(b0 - 0.01)) / 0.02) + 1.0
    assert abs(dvs_db) < 1e-9 * max(scale, 1.0) * 1e3


def test_vs_independent_of_delta_at_operating_point():
    r = 0.03
    u_star = compensated_operating_flux(r)
    geom = LoopGeometry(a1=1 + r, a2=1 - r).at_global_flux(u_star)
    pe1, pe2 = flux_phases(geom)
    ref = vc_vs(1.0, 1.0, pe1, pe2)[1]
    for delta in np.linspace(0.0, 0.1, 6):
        vs = vc_vs(1.0, 1.0 + delta, pe1, pe2)[1]
        assert vs == pytest.approx(ref, abs=1e-12)


def test_junction_area_balance_at_compensation():
    # A1*alpha1*cos(pe1) = A2*alpha2*cos(pe2) holds exactly at the
    # compensated point (the dV_s/dB = 0 condition); the bare products
    # A1*alpha1 and A2*alpha2 agree to O(r^2).
    r = 0.01
    delta, _, _ = compensation_delta(r)
    u_star = compensated_operating_flux(r)
    geom = LoopGeometry(a1=1 + r, a2=1 - r).at_global_flux(u_star)
    pe1, pe2 = flux_phases(geom)
    lhs = (1 + r) * 1.0 * math.cos(pe1)
    rhs = (1 - r) * (1 + delta) * math.cos(pe2)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    imbalance = abs((1 + r) * 1.0 - (1 - r) * (1 + delta)) / (1 + r)
    assert imbalance < (2 * math.pi * r / (1 - r)) ** 2


def test_identical_loops_zero_slope_at_half_flux():
    slope = global_flux_slope(GRAD, LoopGeometry(), 1.0)
    assert abs(slope) < 1e-6


def test_area_asymmetry_breaks_sweet_spot():
    geom = LoopGeometry(a1=1.01, a2=0.99)
    slope = global_flux_slope(GRAD, geom, 1.0)
    assert abs(slope) > 100 * 1e-6


def test_compensation_restores_flat_dispersion():
    r = 0.01
    delta, _, _ = compensation_delta(r)
    geom = LoopGeometry(a1=1 + r, a2=1 - r)
    broken = abs(global_flux_slope(GRAD, geom, 1.0))
    u_star = compensated_operating_flux(r)
    # the analytic sweet spot kills the well-asymmetry channel; the
    # residual slope through the barrier-height channel is stationary
    # slightly off u*, so locate the true extremum nearby
    us = np.linspace(u_star - 0.004, u_star + 0.004, 9)
    slopes = [abs(global_flux_slope(GRAD, geom, u, delta=delta)) for u in us]
    assert min(slopes) < broken / 100


def test_degeneracy_split_small_at_compensation():
    r = 0.01
    delta, _, _ = compensation_delta(r)
    geom = LoopGeometry(a1=1 + r, a2=1 - r)
    om0 = omega_q_at_global_flux(GRAD, geom, 1.0, delta=0.0)
    om_c = omega_q_at_global_flux(GRAD, geom, 1.0, delta=delta)
    assert abs(om_c - om0) / om0 < 0.10


def test_geometry_validation():
    with pytest.raises(GeometryError):
        LoopGeometry(a1=-1.0)
