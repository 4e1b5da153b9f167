import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad as scipy_quad

from almostconv.convolve import (HorizonPolicy, convolve_at, convolve_many, sup_inf_over_translates)
from almostconv.errors import HorizonUnsupported
from almostconv.kernels import Box, Custom, Gauss, Poisson, dilate
from almostconv.sigdsl import parse_signal

from conftest import CORPUS


@pytest.mark.parametrize("x", [-2.0, 0.3, 1.5707963267948966, 40.0])
@pytest.mark.parametrize("r", [0.01, 1.0, 7.0, 1e4])
def test_sin_closed_forms(x, r):
    sig = parse_signal("sin(t)")
    assert convolve_at(dilate(Box(), r), sig, x).value == pytest.approx(math.sin(x) * math.sin(r) / r, abs=1e-12)
    assert convolve_at(dilate(Poisson(), r), sig, x).value == pytest.approx(math.exp(-r) * math.sin(x), abs=1e-12)
    assert convolve_at(dilate(Gauss(0.5), r), sig, x).value == pytest.approx(
        math.exp(-0.125 * r * r) * math.sin(x), abs=1e-12)


@pytest.mark.parametrize("kernel, text, x, r, expected", [
    # mpmath quadrature of int phi(x - t) f_r(t) dt
    (Poisson(), "ratio(1)", 0.5, 2.0, 0.67567567567567568 + 0.054054054054054054j),
    (Gauss(0.5), "samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])", 0.6, 0.8, 0.16441997088483281),
    (Box(), "1/(t+i)", 0.3, 2.0, 0.060068989135249277 - 0.54993531144737416j),
])
def test_against_mpmath(kernel, text, x, r, expected):
    est = convolve_at(dilate(kernel, r), parse_signal(text), x, 1e-10)
    assert est.value == pytest.approx(expected, abs=1e-9)
    assert est.err <= 1e-10


def test_poisson_of_conjugate_rational_matches_quadrature():
    # 1/(t+i) has its pole in the wrong half-plane for the direct formula.
    sig = parse_signal("1/(t+i)")
    x, r = 0.4, 1.3
    f = lambda t, part: getattr(complex(sig(x - t)), part) * float(dilate(Poisson(), r).density(t))
    ref = complex(*(scipy_quad(f, -np.inf, np.inf, args=(p,), epsabs=1e-12)[0] for p in ("real", "imag")))
    assert convolve_at(dilate(Poisson(), r), sig, x).value == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("text, kernel, method", [
    ("sin(t)", Box(), "ClosedForm"),
    ("ratio(1)", Poisson(), "ClosedForm"),
    ("blocks(base=4)", Poisson(), "ExactOverlap"),
    ("sign(t)", Gauss(1.0), "ExactOverlap"),
    ("samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])", Poisson(), "Quadrature"),
])
def test_method_dispatch(text, kernel, method):
    assert convolve_at(dilate(kernel, 2.0), parse_signal(text), 0.3).method == method


# Poisson is left out: its slowly decaying tails defeat a generic scipy
# reference on oscillating signals. The mpmath values above and the
# Mellin-form cross-check cover it.
@pytest.mark.parametrize("text", [s for s, _ in CORPUS])
@pytest.mark.parametrize("kernel", [Box(), Gauss(1.0), Custom("piecewise(0,-1,0.5,1,0)")],
                         ids=lambda k: k.spec)
def test_matches_scipy_reference(text, kernel):
    sig = parse_signal(text)
    x, r = 0.7, 2.5
    dk = dilate(kernel, r)
    # Beyond 12 sigma r the Gaussian mass is below 1e-30.
    R = dk.support_radius if math.isfinite(dk.support_radius) else 12 * r
    pts = sorted({x - b for b in sig.expr.breakpoints(x - R, x + R)} | {-r, r})
    pts = [p for p in pts if -R < p < R]

    def part(name):
        g = lambda t: getattr(complex(sig(x - t)), name) * float(dk.density(t))
        return scipy_quad(g, -R, R, points=pts or None, limit=500, epsabs=1e-12)[0]

    ref = part("real") + 1j * part("imag")
    est = convolve_at(dk, sig, x, 1e-9)
    assert abs(est.value - ref) <= 1e-7


def test_convolve_many_agrees_with_convolve_at():
    sig = parse_signal("blocks(base=4, mirror=1)+0.5*sin(t)")
    xs = np.linspace(-30, 30, 13)
    vals, errs, _ = convolve_many(dilate(Poisson(), 3.0), sig, xs, 1e-9)
    for x, v in zip(xs, vals):
        assert v == pytest.approx(convolve_at(dilate(Poisson(), 3.0), sig, x, 1e-9).value, abs=2e-9)
    assert np.all(errs <= 1e-9)


def test_rejects_nonpositive_tolerance():
    with pytest.raises(ValueError):
        convolve_at(dilate(Box(), 1.0), parse_signal("1"), 0.0, tol=0.0)


@pytest.mark.parametrize("r", [1.0, 10.0, 100.0, 1e6])
def test_box_sup_over_translates_of_sine(r):
    est = sup_inf_over_translates(dilate(Box(), r), parse_signal("sin(t)"), tol=1e-8)
    assert est.F_bar == pytest.approx(abs(math.sin(r)) / r, abs=est.slack + 1e-9)
    assert est.F_under == pytest.approx(-abs(math.sin(r)) / r, abs=est.slack + 1e-9)
    assert est.slack <= 1e-8


def test_blocks_band_at_moderate_dilation():
    est = sup_inf_over_translates(dilate(Box(), 10.0), parse_signal("blocks(base=4)"))
    assert est.F_bar >= 0.99 and est.F_under <= 0.01


def test_generic_signal_needs_a_horizon():
    with pytest.raises(HorizonUnsupported):
        sup_inf_over_translates(dilate(Box(), 1.0), parse_signal("ratio(1)"))
    est = sup_inf_over_translates(dilate(Box(), 1.0), parse_signal("ratio(1)"), HorizonPolicy.parse("4r"))
    assert est.horizon_limited


@pytest.mark.parametrize("text, horizon", [CORPUS[i] for i in (0, 3, 4, 7, 9, 10, 11)])
@pytest.mark.parametrize("kernel", [Box(), Poisson()], ids=lambda k: k.spec)
def test_slack_covers_dense_sampling(text, horizon, kernel):
    sig = parse_signal(text)
    pol = HorizonPolicy.parse(horizon)
    r = 3.0
    dk = dilate(kernel, r)
    est = sup_inf_over_translates(dk, sig, pol, tol=1e-6)
    lo, hi = pol.windows(sig, r)[0][-1]
    xs = np.random.default_rng(3).uniform(lo, hi, 400)
    vals, errs, _ = convolve_many(dk, sig, xs, 1e-9)
    assert np.all(vals.real <= est.F_bar + est.slack + errs)
    assert np.all(vals.real >= est.F_under - est.slack - errs)


@pytest.mark.parametrize("text, horizon", CORPUS)
@pytest.mark.parametrize("kernel", [Box(), Poisson()], ids=lambda k: k.spec)
def test_reflection_and_norm_bound(text, horizon, kernel):
    sig = parse_signal(text)
    pol = HorizonPolicy.parse(horizon)
    dk = dilate(kernel, 5.0)
    est = sup_inf_over_translates(dk, sig, pol)
    neg = sup_inf_over_translates(dk, -sig, pol)
    assert est.F_under == pytest.approx(-neg.F_bar, abs=1e-12)
    assert est.F_bar == pytest.approx(-neg.F_under, abs=1e-12)
    assert -sig.sup_bound - est.slack <= est.F_under <= est.F_bar <= sig.sup_bound + est.slack


@pytest.mark.parametrize("a, b", [("sin(t)", "blocks(base=4)"), ("cis(t)", "sin(3*t)"),
                                  ("sign(t)", "1/(t+i)")])
def test_sublinearity(a, b):
    pol = HorizonPolicy.parse("8r") if a in ("sign(t)",) else HorizonPolicy()
    pa, pb = parse_signal(a), parse_signal(b)
    dk = dilate(Box(), 2.0)
    ea = sup_inf_over_translates(dk, pa, pol)
    eb = sup_inf_over_translates(dk, pb, pol)
    es = sup_inf_over_translates(dk, pa + pb, pol)
    assert es.F_bar <= ea.F_bar + eb.F_bar + ea.slack + eb.slack + es.slack
    assert es.F_under >= ea.F_under + eb.F_under - ea.slack - eb.slack - es.slack


@settings(max_examples=15, deadline=None)
@given(st.floats(-50, 50))
def test_periodic_band_is_translation_invariant(s):
    sig = parse_signal("0.5*sin(3*t)+cos(t/2)")
    dk = dilate(Poisson(), 0.7)
    a = sup_inf_over_translates(dk, sig)
    b = sup_inf_over_translates(dk, sig.shifted(s))
    assert abs(a.F_bar - b.F_bar) <= a.slack + b.slack
    assert abs(a.F_under - b.F_under) <= a.slack + b.slack


def test_imaginary_part_scan():
    est = sup_inf_over_translates(dilate(Box(), 1.0), parse_signal("cis(t)"), part="im", tol=1e-9)
    assert est.F_bar == pytest.approx(math.sin(1.0), abs=est.slack + 1e-9)


@pytest.mark.parametrize("text, kind, desc", [
    ("auto", "auto", "auto"),
    ("-5:5", "absolute", None),
    ("4r", "relative", None),
])
def test_horizon_parsing(text, kind, desc):
    pol = HorizonPolicy.parse(text)
    assert pol.kind == kind
    assert HorizonPolicy.parse(pol.describe()) == pol


@pytest.mark.parametrize("text", ["5:-5", "r", "abc", "-2r"])
def test_bad_horizons(text):
    with pytest.raises(ValueError):
        HorizonPolicy.parse(text)
