import cmath

import numpy as np
import pytest

from almostconv.aclimit import Status
from almostconv.errors import PreconditionUnmet, UnboundedConstruct
from almostconv.hardy import (HalfPlaneFunction, boundary_vs_interior, cluster_sample, interior_band,
                              multiplicativity_check, poisson_extend)
from almostconv.sigdsl import parse_signal


@pytest.mark.parametrize("text", ["z", "exp(z)", "z/(z-1)", "exp(i*z)", "exp(-i*z)", "z*exp(-z)"])
def test_whitelist_rejects_unbounded(text):
    with pytest.raises(UnboundedConstruct):
        HalfPlaneFunction.parse(text)


CLOSED = [
    ("exp(-z)", lambda z: cmath.exp(-z)),
    ("z/(1+z)", lambda z: z / (1 + z)),
    ("1/(z+2)", lambda z: 1 / (z + 2)),
    ("2-i", lambda z: 2 - 1j),
    ("exp(-2*z)*z/(z+1)", lambda z: cmath.exp(-2 * z) * z / (z + 1)),
    ("(z/(z+1+0.5i))^2+0.3*exp(-0.5*z)", lambda z: (z / (z + 1 + 0.5j)) ** 2 + 0.3 * cmath.exp(-0.5 * z)),
]


@pytest.mark.parametrize("text, ref", CLOSED)
@pytest.mark.parametrize("z", [0.3 + 0j, 2 + 3j, 1.5 - 4j])
def test_closed_form_matches_python(text, ref, z):
    assert abs(HalfPlaneFunction.parse(text)(z) - ref(z)) <= 1e-12


def test_trace_value_oracle():
    # mpmath: z/(1+z) at 2+3i
    assert HalfPlaneFunction.parse("z/(1+z)")(2 + 3j) == pytest.approx(0.8333333333333333 + 0.16666666666666667j)


@pytest.mark.parametrize("text", ["exp(-z)", "z/(1+z)", "1/(z+2)", "exp(-2*z)*z/(z+1)"])
@pytest.mark.parametrize("z", [0.5 + 0.2j, 2 - 1j])
def test_poisson_integral_reproduces_closed_form(text, z):
    hpf = HalfPlaneFunction.parse(text)
    assert abs(poisson_extend(hpf.boundary, z.real, z.imag, 1e-9) - hpf(z)) <= 1e-7


def test_boundary_only_function_uses_poisson_integral():
    hpf = HalfPlaneFunction.from_boundary("sign(t)")
    assert not hpf.has_closed_form
    # harmonic measure: (2/pi) arctan(y/x)
    assert hpf(1 + 1j).real == pytest.approx(0.5, abs=1e-7)


def test_from_boundary_recognises_traces():
    assert HalfPlaneFunction.from_boundary("cis(-t)").has_closed_form
    assert not HalfPlaneFunction.from_boundary("cis(t)").has_closed_form


def test_evaluation_needs_right_half_plane():
    with pytest.raises(ValueError):
        HalfPlaneFunction.parse("exp(-z)")(0.0 + 1j)
    with pytest.raises(ValueError):
        poisson_extend(parse_signal("1"), -1.0, 0.0)


def test_interior_band_of_constant():
    rungs = interior_band(HalfPlaneFunction.parse("3"), [1.0, 10.0])
    assert all(r.F_bar == pytest.approx(3) and r.F_under == pytest.approx(3) for r in rungs)
    with pytest.raises(ValueError):
        interior_band(HalfPlaneFunction.parse("3"), [10.0, 1.0])


@pytest.mark.parametrize("text, alpha", [("exp(-z)", 0.0), ("1.5-2i", 1.5 - 2j), ("z/(1+z)", 1.0),
                                         ("exp(-2*z)*z/(1+z)", 0.0)])
def test_boundary_and_interior_agree(text, alpha):
    rep = boundary_vs_interior(HalfPlaneFunction.parse(text))
    assert rep.agree
    assert rep.boundary.status == rep.interior_status == Status.ALMOST_CONVERGENT
    assert abs(rep.interior_alpha - alpha) <= 1e-3
    assert abs(rep.boundary.alpha - rep.interior_alpha) <= 1e-3


def test_blocks_extension_diverges_on_both_sides():
    rep = boundary_vs_interior(HalfPlaneFunction.from_boundary("blocks(base=4)"))
    assert rep.boundary.status == rep.interior_status == Status.DIVERGENT
    assert rep.agree


def test_multiplicative_on_bounded_analytic_pair():
    rep = multiplicativity_check(HalfPlaneFunction.parse("z/(1+z)"), HalfPlaneFunction.parse("2+exp(-z)"))
    assert rep.multiplicative and rep.in_hinf and not rep.hypothesis_violated
    assert abs(rep.product_alpha - 2.0) <= 1e-3


def test_counterexample_off_hinf():
    rep = multiplicativity_check(HalfPlaneFunction.parse("3"), HalfPlaneFunction.parse("1"))
    ce = rep.counterexample
    assert ce.product_status == Status.ALMOST_CONVERGENT
    assert abs(ce.product_alpha - 1.0) <= 1e-3
    assert abs(ce.alpha) <= 1e-3 and abs(ce.beta) <= 1e-3
    assert ce.hypothesis_violated and not ce.multiplicative
    assert "counterexample" in rep.as_dict()


def test_precondition():
    with pytest.raises(PreconditionUnmet):
        multiplicativity_check(HalfPlaneFunction.from_boundary("blocks(base=4)"), HalfPlaneFunction.parse("1"),
                               include_counterexample=False)


def test_cluster_of_convergent_sequence():
    rep = cluster_sample(HalfPlaneFunction.parse("z/(1+z)"), np.arange(1, 51) * 100.0, 0.0, eps=1e-2)
    assert len(rep.clusters) == 1
    assert abs(rep.clusters[0][0] - 1.0) <= 1e-2


def test_cluster_separates_oscillating_values():
    # exp(-z) tends to 0 along x -> inf; along x = 1 the phase of e^{-iy} cycles.
    hpf = HalfPlaneFunction.parse("exp(-z)")
    ys = np.where(np.arange(40) % 2 == 0, 0.0, np.pi)
    rep = cluster_sample(hpf, 1 + 1e-3 * np.arange(40), ys, eps=0.05)
    centers = sorted(c.real for c, _ in rep.clusters)
    assert len(centers) == 2
    assert centers[0] == pytest.approx(-np.exp(-1), abs=0.01) and centers[1] == pytest.approx(np.exp(-1), abs=0.01)


@pytest.mark.parametrize("xs", [[], [2.0, 1.0], [0.0, 1.0]])
def test_cluster_validation(xs):
    with pytest.raises(ValueError):
        cluster_sample(HalfPlaneFunction.parse("1"), xs, 0.0)
