import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad as scipy_quad

from almostconv.errors import SignalSyntaxError, UnboundedConstruct
from almostconv.sigdsl import (BlockStructured, Generic, Periodic, eval_signal, parse_signal, tokenize,
                               window_integral)

from conftest import CORPUS


@pytest.mark.parametrize("text, t, expected", [
    ("sin(t)", math.pi / 2, 1.0),
    ("3+4i", 17.0, 3 + 4j),
    ("cis(t)", math.pi, -1.0),
    ("exp(2i*t)", math.pi / 4, 1j),
    ("1/(t+i)", 0.0, -1j),
    ("ratio(1)", 1.0, 0.5 + 0.5j),
    ("sign(t)", -2.0, -1.0),
    ("sign(t)", 0.0, 1.0),  # pieces are right-continuous
    ("ind(-1, 1)", 0.5, 1.0),
    ("ind(-1, 1)", 1.5, 0.0),
    ("shift(sin(t), 1)", -1.0, 0.0),
    ("piecewise(0, 1, 2, 3, 5)", 2.0, 2.0),
    ("samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])", 0.75, 0.0),
    ("samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])", 9.0, 0.5),
    ("blocks(base=4)", 5.0, 1.0),
    ("blocks(base=4)", 9.0, 0.0),
    ("blocks(base=4, mirror=1)", -5.0, 1.0),
    ("blocks(intervals=[0, 5])", 4.9, 1.0),
    ("sin(t)^2 + cos(t)^2", 0.37, 1.0),
    ("2*pi", 0.0, 2 * math.pi),
])
def test_eval(text, t, expected):
    assert eval_signal(parse_signal(text), t) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("text, position, expects", [
    ("sin(t", 5, ")"),
    ("sin(t))", 6, "end of input"),
    ("foo(t)", 0, "sin"),
    ("2**3", 2, "number"),
    ("3+", 2, "number"),
    ("sin(t)/0", 7, None),
])
def test_syntax_errors_carry_position(text, position, expects):
    with pytest.raises(SignalSyntaxError) as info:
        parse_signal(text)
    assert info.value.position == position
    if expects is not None:
        assert expects in info.value.expected


@pytest.mark.parametrize("text", ["t", "exp(t)", "1/t", "1/(t+2)", "t^2"])
def test_unbounded_constructs_rejected(text):
    with pytest.raises(UnboundedConstruct):
        parse_signal(text)


def test_tokenize_imaginary_literal():
    toks = tokenize("2i*t+1.5e-3")
    assert toks[0].value == 2j
    assert toks[4].value == pytest.approx(1.5e-3)


@pytest.mark.parametrize("text, tag", [
    ("sin(t)", Periodic(2 * math.pi)),
    ("sin(t)^2", Periodic(math.pi)),
    ("0.5*sin(3*t)+cos(t/2)", Periodic(4 * math.pi)),
    ("7", Periodic(1.0)),
    ("blocks(base=4)", BlockStructured()),
    ("sin(t)+blocks(base=4, mirror=1)", BlockStructured()),
    ("ratio(1)", Generic()),
    ("sign(t)", Generic()),
])
def test_structure_tags(text, tag):
    got = parse_signal(text).structure
    assert type(got) is type(tag)
    if isinstance(tag, Periodic):
        assert got.period == pytest.approx(tag.period)


@pytest.mark.parametrize("text", [s for s, _ in CORPUS])
def test_sup_bound_and_ranges_are_certificates(text):
    sig = parse_signal(text)
    t = np.linspace(-300, 300, 200001)
    v = sig(t)
    assert np.max(np.abs(v)) <= sig.sup_bound + 1e-12
    lo, hi = sig.re_range
    assert lo - 1e-12 <= v.real.min() and v.real.max() <= hi + 1e-12
    lo, hi = sig.im_range
    assert lo - 1e-12 <= v.imag.min() and v.imag.max() <= hi + 1e-12


@pytest.mark.parametrize("text", [s for s, _ in CORPUS])
def test_source_round_trip(text):
    sig = parse_signal(text)
    again = parse_signal(sig.source)
    t = np.linspace(-50, 50, 1001)
    assert np.allclose(sig(t), again(t), atol=1e-12)


@pytest.mark.parametrize("text", ["sin(t)", "cis(-2*t)*ratio(1)", "1/(t+i)", "0.5*sin(3*t)+cos(t/2)",
                                  "samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])"])
def test_lipschitz_constant_bounds_difference_quotients(text):
    sig = parse_signal(text)
    t = np.linspace(-40, 40, 400001)
    slopes = np.abs(np.diff(sig(t))) / np.diff(t)
    assert slopes.max() <= sig.expr.lipschitz * (1 + 1e-9)


def test_jumps_have_no_lipschitz_constant():
    assert math.isinf(parse_signal("sign(t)").expr.lipschitz)


def _reference_window(sig, a, b):
    pts = sig.expr.breakpoints(a, b)
    f_re = lambda t: float(np.real(sig(t)))
    f_im = lambda t: float(np.imag(sig(t)))
    opts = dict(points=list(pts)[:100] or None, limit=2000, epsabs=1e-11, epsrel=0)
    return scipy_quad(f_re, a, b, **opts)[0] + 1j * scipy_quad(f_im, a, b, **opts)[0]


@pytest.mark.parametrize("text", [s for s, _ in CORPUS])
@pytest.mark.parametrize("a, b", [(-3.0, 2.5), (0.1, 40.0), (-70.0, -20.0)])
def test_window_integral_matches_scipy(text, a, b):
    sig = parse_signal(text)
    value, err = window_integral(sig, a, b)
    assert abs(value - _reference_window(sig, a, b)) <= 1e-8
    assert err <= 1e-9


def test_window_integral_of_blocks_counts_covered_length():
    # Blocks [1, 2), [4, 8), [16, 32), [64, 128) meet [0, 70] in 1 + 4 + 16 + 6.
    value, _ = window_integral(parse_signal("blocks(base=4)"), 0.0, 70.0)
    assert value == pytest.approx(27.0, abs=1e-10)


def test_window_integral_rejects_bad_input():
    sig = parse_signal("sin(t)")
    with pytest.raises(ValueError):
        window_integral(sig, 1.0, 0.0)
    with pytest.raises(ValueError):
        window_integral(sig, 0.0, 1.0, tol=0.0)


@pytest.mark.parametrize("text", ["sin(t)", "0.5*sin(3*t)+cos(t/2)+2", "cis(-2*t)*ratio(1)", "ratio(1)",
                                  "samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])", "sign(t)+cos(t)"])
def test_tail_profile_bounds_far_window_integrals(text):
    sig = parse_signal(text)
    prof = sig.expr.tail_profile()
    assert prof is not None
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = prof.T + max(1.0, prof.T) * rng.uniform(0, 50)
        b = a + rng.uniform(0, 200)
        for lo, hi, mean in ((a, b, prof.mean_plus), (-b, -a, prof.mean_minus)):
            value, _ = window_integral(sig, lo, hi)
            residual = abs(value - mean * (hi - lo))
            decay = prof.D * math.log(max(abs(hi), abs(lo)) / min(abs(hi), abs(lo)))
            assert residual <= prof.W + decay + 1e-8


def test_sums_of_blocks_have_no_tail_profile():
    assert parse_signal("blocks(base=4)").expr.tail_profile() is None


def test_samples_from_csv(tmp_path):
    (tmp_path / "s.csv").write_text("t,re,im\n0,0,1\n0.5,1,0\n1.0,-1,0\n", encoding="utf-8")
    sig = parse_signal('samples("s.csv")', base_dir=tmp_path)
    assert eval_signal(sig, 0.25) == pytest.approx(0.5 + 0.5j)
    assert eval_signal(sig, 5.0) == pytest.approx(-1.0)


@pytest.mark.parametrize("body", ["x,y\n0,0\n1,1\n", "t,re\n0,0\n0.5,1\n1.2,0\n"])
def test_samples_csv_validation(tmp_path, body):
    (tmp_path / "s.csv").write_text(body, encoding="utf-8")
    with pytest.raises(ValueError):
        parse_signal('samples("s.csv")', base_dir=tmp_path)


def test_signal_algebra():
    a, b = parse_signal("sin(t)"), parse_signal("cos(t)")
    t = np.linspace(-5, 5, 11)
    assert np.allclose((a + b)(t), np.sin(t) + np.cos(t))
    assert np.allclose((-a)(t), -np.sin(t))
    assert np.allclose(a.shifted(1.0)(t), np.sin(t + 1.0))
    assert np.allclose(a.scaled(2j)(t), 2j * np.sin(t))
    assert a.is_real and not parse_signal("cis(t)").is_real


coef = st.floats(-3, 3, allow_nan=False)
freq = st.floats(0.1, 5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(coef, freq, st.sampled_from(["sin", "cos", "cis"])), min_size=1, max_size=4),
       st.floats(-2, 2), st.floats(0.1, 3))
def test_random_trig_sums_respect_bound(terms, c0, rc):
    text = "+".join(f"({a})*{fn}({w}*t)" for a, w, fn in terms) + f"+({c0})*ratio({rc})"
    sig = parse_signal(text)
    t = np.linspace(-100, 100, 20001)
    assert np.max(np.abs(sig(t))) <= sig.sup_bound + 1e-9
