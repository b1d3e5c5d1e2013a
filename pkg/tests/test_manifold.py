"""Invariant-measure lifts, closed forms vs quadrature, limit profiles.

Closed-form oracles used below, all hand integrals of
F_z(x, y) = alpha * int_0^inf theta([x+u/z, inf) x [y+u, inf)) du:

* product exp(1) x exp(1):  F(0, y) = z e^{-y} / (1+z) for y >= 0.
* lead cdf, det(1) lead:    mass((-inf, 0]) = int_{u<=-1} e^u du = e^{-1}.
* time in queue, exp(1):    z * exp(-y/z) (the equilibrium law of exp
  is exp again).
* linear deadlines, z > c:  z + (c-z) * excess_survival(y/(c-z)) for
  y <= 0, survival extended by 1 on nonpositive arguments.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psdl import (
    ConfigError,
    Deterministic,
    Exponential,
    HyperExponential,
    LinearJoint,
    PointMassZero,
    ProductJoint,
    Uniform,
    ht_params,
    lead_profile_product,
    lift,
    linear_deadline_profile,
    sojourn_limit_cdf,
    time_in_queue_profile,
)

EXP1 = Exponential(1.0)


# --- mass law ------------------------------------------------------------


@pytest.mark.parametrize("z", [0.0, 0.5, 2.0])
@pytest.mark.parametrize(
    "joint",
    [
        ProductJoint(EXP1, PointMassZero()),
        ProductJoint(EXP1, Deterministic(1.0)),
        LinearJoint(EXP1, 1.0),
        ProductJoint(Uniform(0.5, 1.5), Uniform(0.0, 2.0)),
    ],
    ids=["exp-x-d0", "exp-x-det", "linear", "unif-x-unif"],
)
def test_lift_mass_law(joint, z):
    m = lift(joint, 1.0, z)
    assert abs(m.eval(0.0, -math.inf) - z) <= 1e-6
    assert m.total_mass == pytest.approx(z, abs=1e-9)


def test_lift_zero_mass_is_zero_function():
    m = lift(ProductJoint(EXP1, EXP1), 1.0, 0.0)
    assert m.eval(0.0, -math.inf) == 0.0
    assert m.eval(1.0, 0.5) == 0.0


# --- closed forms against hand integrals ---------------------------------


def test_product_exp_exp_closed_form():
    z = 1.5
    m = lift(ProductJoint(EXP1, EXP1), 1.0, z)
    assert m.method == "closed_form_product"
    for y in (0.0, 0.5, 2.0):
        assert m.eval(0.0, y) == pytest.approx(z * math.exp(-y) / (1 + z), abs=1e-12)
    # residual marginal is the equilibrium (here exp) law scaled by z
    assert m.eval(0.7, -math.inf) == pytest.approx(z * math.exp(-0.7), abs=1e-12)


def test_lead_profile_product_values():
    # immediate deadlines put every limiting lead at or below 0
    assert lead_profile_product(EXP1, PointMassZero(), 1.0, 1.0, 0.0) == pytest.approx(1.0)
    # deterministic(1) lead: hand integral gives e^{-1}
    assert lead_profile_product(EXP1, Deterministic(1.0), 1.0, 1.0, 0.0) == pytest.approx(
        math.exp(-1.0), abs=1e-9
    )
    # y -> inf recovers the total mass
    assert lead_profile_product(EXP1, EXP1, 1.0, 2.0, 50.0) == pytest.approx(2.0, abs=1e-9)
    assert lead_profile_product(EXP1, EXP1, 1.0, 0.0, 1.0) == 0.0


def test_time_in_queue_profile_values():
    assert time_in_queue_profile(EXP1, 2.0, 0.0) == pytest.approx(2.0)
    assert time_in_queue_profile(EXP1, 2.0, 1.0) == pytest.approx(2.0 * math.exp(-0.5))
    assert time_in_queue_profile(EXP1, 0.0, 3.0) == 0.0
    with pytest.raises(ConfigError):
        time_in_queue_profile(EXP1, 1.0, -0.5)


def test_sojourn_limit_cdf_values():
    assert sojourn_limit_cdf(EXP1, 2.0, 0.0) == 0.0
    assert sojourn_limit_cdf(EXP1, 2.0, 2.0) == pytest.approx(1.0 - math.exp(-1.0))
    assert sojourn_limit_cdf(EXP1, 2.0, 200.0) == pytest.approx(1.0)
    # the interval is open on the right: a point mass exactly at y/z is excluded
    assert sojourn_limit_cdf(Deterministic(1.0), 1.0, 1.0) == 0.0
    with pytest.raises(ConfigError):
        sojourn_limit_cdf(EXP1, 0.0, 1.0)


def test_linear_profile_no_lateness_below_capacity():
    for z in (0.1, 0.5, 1.0):
        total = linear_deadline_profile(EXP1, 1.0, z, 0.0)
        assert total == pytest.approx(z, abs=1e-12)
        # mass strictly below lead 0 is the jump across y=0, which is none
        assert linear_deadline_profile(EXP1, 1.0, z, -1e-9) == pytest.approx(z, abs=1e-12)


def test_linear_profile_overloaded_branch():
    # z=2 > c=1, y=-1: z + (c-z) * excess_survival(1) with exp equilibrium
    v = linear_deadline_profile(EXP1, 1.0, 2.0, -1.0)
    assert v == pytest.approx(2.0 - math.exp(-1.0), abs=1e-12)
    # positive-lead side uses the c-scaled equilibrium tail
    v2 = linear_deadline_profile(EXP1, 1.0, 2.0, 0.5)
    assert v2 == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_linear_profile_matches_lift():
    c, z = 1.0, 2.0
    m = lift(LinearJoint(EXP1, c), 1.0, z)
    for y in (-2.0, -1.0, -0.25, 0.0, 0.5, 1.5):
        assert linear_deadline_profile(EXP1, c, z, y) == pytest.approx(
            m.eval(0.0, y), abs=1e-6
        )


# --- generic quadrature agreement ----------------------------------------


@pytest.mark.parametrize(
    "joint,z",
    [
        (ProductJoint(EXP1, EXP1), 1.0),
        (ProductJoint(EXP1, Deterministic(1.0)), 2.0),
        (ProductJoint(Deterministic(1.0), EXP1), 0.7),
        (ProductJoint(EXP1, HyperExponential((0.3, 0.7), (0.5, 2.0))), 1.3),
        (LinearJoint(EXP1, 0.8), 1.7),
    ],
    ids=["exp-exp", "exp-det", "det-exp", "exp-hyper", "linear"],
)
def test_closed_form_vs_quadrature(joint, z):
    closed = lift(joint, 1.0, z)
    assert closed.method.startswith("closed_form")
    quad = lift(joint, 1.0, z, method="quadrature")
    for x in (0.0, 0.4, 1.1):
        for y in (-math.inf, -1.0, 0.0, 0.6, 2.0):
            assert abs(closed.eval(x, y) - quad.eval(x, y)) <= 1e-4


def test_quadrature_refinement_consistency():
    joint = ProductJoint(Uniform(0.5, 1.5), Uniform(0.0, 2.0))
    coarse = lift(joint, 1.0, 1.2, method="quadrature", tol=1e-6)
    fine = lift(joint, 1.0, 1.2, method="quadrature", tol=5e-7)
    for x in (0.0, 0.6):
        for y in (-1.0, 0.3, 1.1):
            assert abs(coarse.eval(x, y) - fine.eval(x, y)) < 1e-6


def test_explicit_method_mismatch():
    with pytest.raises(ConfigError):
        lift(ProductJoint(Uniform(0.5, 1.5), EXP1), 1.0, 1.0, method="closed_form_tiq")
    with pytest.raises(ConfigError):
        lift(ProductJoint(EXP1, EXP1), 1.0, -1.0)


def test_eval_grid_matches_pointwise():
    m = lift(ProductJoint(EXP1, EXP1), 1.0, 1.4)
    xs = np.array([0.0, 0.5, 2.0])
    ys = np.array([-math.inf, -0.5, 0.0, 1.0])
    table = m.eval_grid(xs, ys)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            assert table[i, j] == pytest.approx(m.eval(float(x), float(y)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-2.0, 3.0),
    st.floats(0.0, 2.0),
)
def test_profile_monotone_in_y_and_x(y, dy):
    m = lift(ProductJoint(EXP1, EXP1), 1.0, 1.0)
    assert m.eval(0.0, y + dy) <= m.eval(0.0, y) + 1e-12
    assert m.eval(0.5, y) <= m.eval(0.0, y) + 1e-12


def test_equilibrium_density_identity():
    # the reflected lead density at u <= 0 is alpha * survival(-u/z); at
    # u = -wz that equals the equilibrium density of the service law at w
    for nu in (EXP1, Uniform(0.5, 1.5)):
        alpha = 1.0 / nu.mean()
        for w in (0.1, 0.6, 1.2):
            h = 1e-6
            dens = (nu.excess_survival(w - h) - nu.excess_survival(w + h)) / (2 * h)
            assert dens == pytest.approx(alpha * nu.survival(w), abs=1e-4)


# --- heavy-traffic constants ----------------------------------------------


def test_ht_params_mm1():
    p = ht_params(1.0, 1.0, 1.0, 0.5)
    assert p.queue_workload_ratio == pytest.approx(1.0)
    assert p.workload_drift == -0.5
    assert p.workload_var == pytest.approx(2.0)
    assert p.queue_drift == pytest.approx(-0.5)
    assert p.queue_var == pytest.approx(2.0)


def test_ht_params_md1():
    p = ht_params(1.0, 1.0, 0.0, 0.25)
    assert p.queue_workload_ratio == pytest.approx(2.0)
    assert p.workload_var == pytest.approx(1.0)
    assert p.queue_var == pytest.approx(4.0)
    # identities relating queue and workload diffusions
    assert p.queue_drift == pytest.approx(p.queue_workload_ratio * p.workload_drift)
    assert p.queue_var == pytest.approx(p.queue_workload_ratio**2 * p.workload_var)


def test_ht_params_zero_drift():
    assert ht_params(1.0, 1.0, 1.0, 0.0).queue_drift == 0.0
