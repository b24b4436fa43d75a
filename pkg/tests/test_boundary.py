import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kinslab.boundary import (ConstantAccommodation, FluxDependentAccommodation, WallSpec,
                              boundary_entropy_flux, dg_information, diffuse_reflect, entropy_flux_gap,
                              h, incoming_flux, local_reflect, maxwell_reflect, outgoing_flux)
from kinslab.grid import LEFT, RIGHT, WallQuadrature, build_velocity_grid, wall_maxwellian

from conftest import LAWS

GRID = build_velocity_grid(8.0, 128)
WQ = {w: wall_maxwellian(GRID, 1.0, wall=w) for w in (LEFT, RIGHT)}
HALF = GRID.node_count // 2

traces = arrays(np.float64, HALF, elements=st.floats(0.0, 50.0))


def test_flux_of_wall_maxwellian_is_one():
    wq = WQ[LEFT]
    assert abs(outgoing_flux(wq.maxwellian, wq) - 1.0) < 1e-14
    assert outgoing_flux(np.zeros(HALF), wq) == 0.0


def test_flux_of_perturbed_maxwellian(rng):
    wq = WQ[RIGHT]
    psi = rng.random(HALF)
    expected = 2.0 + math.fsum(psi * wq.speeds * wq.weights)
    assert abs(outgoing_flux(2 * wq.maxwellian + psi, wq) - expected) < 1e-13


def test_flux_two_forms_agree(rng):
    wq = WQ[LEFT]
    phi = rng.random(HALF) * 3
    assert math.isclose(outgoing_flux(phi, wq), math.fsum(phi / wq.maxwellian * wq.measure), rel_tol=1e-13)


def test_negative_trace_rejected():
    with pytest.raises(ValueError, match="negative"):
        outgoing_flux(-np.ones(HALF), WQ[LEFT])


def test_local_reflection_is_velocity_flip():
    wq = WQ[LEFT]
    phi = np.zeros(HALF)
    phi[5] = 1.0
    out = local_reflect(phi, wq)
    full = np.zeros(GRID.node_count)
    full[wq.incoming] = out
    assert np.flatnonzero(full).tolist() == [GRID.mirror(wq.outgoing[5])]
    np.testing.assert_array_equal(local_reflect(wq.maxwellian, wq), wq.maxwellian)


@given(traces)
def test_local_reflection_preserves_flux(phi):
    wq = WQ[RIGHT]
    assert abs(incoming_flux(local_reflect(phi, wq), wq) - outgoing_flux(phi, wq)) <= 1e-14 * max(
        1.0, outgoing_flux(phi, wq))


def test_diffuse_reflection_examples():
    wq = WQ[LEFT]
    np.testing.assert_allclose(diffuse_reflect(wq.maxwellian, wq), wq.maxwellian, rtol=1e-14)
    assert not np.any(diffuse_reflect(np.zeros(HALF), wq))
    phi = np.zeros(HALF)
    phi[3] = 2.5
    out = diffuse_reflect(phi, wq)
    load = 2.5 * wq.speeds[3] * wq.weights[3]
    np.testing.assert_allclose(out, wq.maxwellian * load, rtol=1e-15)
    assert abs(incoming_flux(out, wq) - load) <= 1e-14 * load


@pytest.mark.parametrize("law", LAWS, ids=repr)
@given(phi=traces)
@settings(max_examples=50)
def test_maxwell_reflection_conserves_flux_and_positivity(law, phi):
    spec = WallSpec(WQ[LEFT], law)
    out, alpha = maxwell_reflect(phi, spec)
    flux = outgoing_flux(phi, spec.quadrature)
    assert np.all(out >= 0)
    assert abs(incoming_flux(out, spec.quadrature) - flux) <= 1e-13 * max(flux, 1e-30)
    assert law.lower_bound <= alpha <= 1.0


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_maxwellian_is_fixed_point(law):
    for wq in WQ.values():
        out, _ = maxwell_reflect(wq.maxwellian, WallSpec(wq, law))
        assert np.max(np.abs(out - wq.maxwellian)) <= 1e-13


def test_unit_accommodation_is_diffuse(rng):
    wq = WQ[RIGHT]
    phi = rng.random(HALF)
    out, alpha = maxwell_reflect(phi, WallSpec(wq, ConstantAccommodation(1.0)))
    assert alpha == 1.0
    np.testing.assert_array_equal(out, diffuse_reflect(phi, wq))


def test_flux_dependent_law_value():
    law = FluxDependentAccommodation(0.3, 1.0)
    assert abs(law(2.0) - (0.3 + 0.7 * math.exp(-2.0))) < 1e-15
    assert abs(law(2.0) - 0.39473) < 1e-5


@given(st.floats(0.0, 1e6), st.floats(1e-6, 1.0), st.floats(0.0, 50.0))
def test_accommodation_bounds(s, abar, c):
    law = FluxDependentAccommodation(abar, c)
    assert abar <= law(s) <= 1.0


@pytest.mark.parametrize("bad", [0.0, 1.5, -0.1])
def test_accommodation_validation(bad):
    with pytest.raises(ValueError, match=r"must lie in \(0,1\]"):
        ConstantAccommodation(bad)
    with pytest.raises(ValueError):
        FluxDependentAccommodation(bad)


def test_unknown_local_kind_rejected():
    with pytest.raises(ValueError):
        WallSpec(WQ[LEFT], ConstantAccommodation(1.0), "mirror")


def test_h_convention():
    assert h(0.0) == 0.0
    assert h(1.0) == 0.0
    np.testing.assert_allclose(h(np.array([0.0, 2.0])), [0.0, 2 * math.log(2)])


def _two_point_quadrature():
    ones = np.ones(2)
    return WallQuadrature(LEFT, 1.0, np.arange(2), np.arange(2), ones, 1.0, ones, ones, ones, 0.5 * ones)


def test_dg_two_point_case():
    assert abs(dg_information(np.array([2.0, 0.0]), _two_point_quadrature()) - math.log(2)) < 1e-12


def test_dg_constant_vanishes():
    wq = WQ[LEFT]
    for c in (0.0, 0.3, 1.0, 7.5):
        assert abs(dg_information(np.full(HALF, c), wq)) < 1e-14


@given(traces)
@settings(max_examples=300)
def test_dg_is_nonnegative(phi):
    assert dg_information(phi, WQ[RIGHT]) >= -1e-12


def test_gap_vanishes_at_maxwellian_and_for_diffuse_walls(rng):
    wq = WQ[LEFT]
    assert abs(entropy_flux_gap(wq.maxwellian, WallSpec(wq, ConstantAccommodation(0.4)))) < 1e-13
    spec = WallSpec(wq, ConstantAccommodation(1.0))
    for _ in range(100):
        g = rng.random(HALF) * rng.choice([1e-3, 1.0, 30.0])
        assert abs(entropy_flux_gap(g, spec)) <= 1e-12


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
@given(g=traces)
@settings(max_examples=100)
def test_gap_nonnegative(alpha, g):
    assert entropy_flux_gap(g, WallSpec(WQ[RIGHT], ConstantAccommodation(alpha))) >= -1e-10


def test_entropy_flux_of_local_reflection_vanishes(rng):
    wq = WQ[LEFT]
    g = rng.random(HALF)
    assert abs(boundary_entropy_flux(g, local_reflect(g, wq), wq)) < 1e-14


@given(g=traces, alpha=st.floats(1e-3, 1.0))
@settings(max_examples=100)
def test_gap_matches_direct_difference(g, alpha):
    # the termwise convexity form against outflow minus alpha times the Jensen gap
    wq = WQ[LEFT]
    spec = WallSpec(wq, ConstantAccommodation(alpha))
    inc, a = maxwell_reflect(g, spec)
    r = g / wq.maxwellian
    jensen = float(np.sum(h(r) * wq.measure) - h(np.sum(r * wq.measure)))
    direct = boundary_entropy_flux(g, inc, wq) - a * jensen
    scale = max(1.0, float(np.sum(np.abs(h(r)) * wq.measure)))
    assert abs(entropy_flux_gap(g, spec) - direct) <= 1e-12 * scale


@given(traces)
@settings(max_examples=100)
def test_dg_matches_jensen_gap(g):
    wq = WQ[RIGHT]
    r = g / wq.maxwellian
    jensen = float(np.sum(h(r) * wq.measure) - h(np.sum(r * wq.measure)))
    scale = max(1.0, float(np.sum(np.abs(h(r)) * wq.measure)))
    assert abs(dg_information(r, wq) - jensen) <= 1e-12 * scale
