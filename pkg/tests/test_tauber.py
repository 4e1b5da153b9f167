import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostconv.aclimit import ACConfig
from almostconv.convolve import convolve_at
from almostconv.errors import InadmissibleKernel, NonpositiveDilation
from almostconv.kernels import Box, Custom, Gauss, Poisson, dilate
from almostconv.sigdsl import parse_signal
from almostconv.tauber import (R_MIN, MellinSignal, fatou_small_r, kernel_transfer_check, mellin_convolution,
                               mellin_convolution_estimate, point_ladder, pointwise_radii, radial_vs_symmetric,
                               tilde_mellin)

from conftest import CONTINUOUS

TWO_BOX = "0.25*ind(-1,1) + (0.25/exp(pi/3))*ind(-exp(pi/3),exp(pi/3))"
KERNELS = [Box(), Poisson(), Gauss(1.0), Gauss(0.3)]


@pytest.mark.parametrize("x, r, expected", [
    (0.0, math.pi / 2, 0.0),
    (math.pi / 2, math.pi / 2, 2 / math.pi),
])
def test_box_sine_examples(x, r, expected):
    assert abs(mellin_convolution(Box(), parse_signal("sin(t)"), x, r) - expected) <= 1e-9


@pytest.mark.parametrize("x, r", [(0.0, 1.0), (3.0, 0.01), (-7.0, 250.0)])
def test_poisson_constant(x, r):
    assert abs(mellin_convolution(Poisson(), parse_signal("2-0.5i"), x, r) - (2 - 0.5j)) <= 1e-9


def test_mellin_signal_pair():
    ms = MellinSignal(Gauss(1.0), parse_signal("sin(t)"), 0.4)
    t = np.array([0.3, 2.0, 11.0])
    assert np.allclose(ms.sharp(t), np.sin(0.4 - t) + np.sin(0.4 + t))
    assert np.allclose(ms.f_tilde(t), Gauss(1.0).density(1 / t) / t)
    assert ms.sharp_bound == pytest.approx(2.0)


def test_f_tilde_has_unit_mass():
    # Over the whole multiplicative group the even kernel contributes both half lines.
    for k in KERNELS:
        assert 2 * tilde_mellin(k, 0.0).real == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.spec)
@pytest.mark.parametrize("xi", [-3.0, -0.5, 0.0, 1.0, 2.0, 7.5])
def test_tilde_mellin_identity(kernel, xi):
    assert abs(tilde_mellin(kernel, xi) - kernel.mellin(-xi)) <= 1e-8


@pytest.mark.parametrize("text", CONTINUOUS + ["sign(t)", "blocks(base=4)"])
@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.spec)
def test_identity_with_direct_convolution(text, kernel):
    sig = parse_signal(text)
    tol = 1e-6
    for x, r in [(0.3, 0.5), (-2.0, 7.0), (1.7, 40.0)]:
        m = mellin_convolution(kernel, sig, x, r, tol)
        d = convolve_at(dilate(kernel, r), sig, x, tol).value
        assert abs(m - d) <= 2 * tol, (x, r)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-20, 20), logr=st.floats(-2, 2), k=st.sampled_from(range(len(KERNELS))))
def test_identity_property(x, logr, k):
    sig = parse_signal("0.5*sin(3*t)+cos(t/2)+0.25")
    r = 10.0 ** logr
    m = mellin_convolution(KERNELS[k], sig, x, r, 1e-7)
    d = convolve_at(dilate(KERNELS[k], r), sig, x, 1e-7).value
    assert abs(m - d) <= 2e-7


def test_estimate_reports_error():
    val, err = mellin_convolution_estimate(Poisson(), parse_signal("ratio(1)"), 0.5, 2.0, 1e-8)
    # mpmath oracle
    assert abs(val - (0.67567567567567568 + 0.054054054054054054j)) <= 1e-8
    assert 0 <= err <= 1e-8


def test_mellin_preconditions():
    sig = parse_signal("1")
    with pytest.raises(NonpositiveDilation):
        mellin_convolution(Box(), sig, 0.0, 0.0)
    with pytest.raises(ValueError):
        mellin_convolution(Custom("ind(0,1)"), sig, 0.0, 1.0)


def test_pointwise_radii():
    assert pointwise_radii(1.0, 10.0, 3, "inf") == [1.0, 10.0, 100.0, 1000.0]
    down = pointwise_radii(1.0, 10.0, 9, "zero")
    assert down[-1] == R_MIN and len(down) == 7
    assert all(b < a for a, b in zip(down, down[1:]))
    with pytest.raises(ValueError):
        pointwise_radii(1.0, 10.0, 3, "up")


def test_point_ladder_needs_three_rungs():
    with pytest.raises(ValueError):
        point_ladder(Box(), parse_signal("1"), 0.0, [1.0, 0.1])


@pytest.mark.parametrize("kernel", [Box(), Poisson(), Gauss(1.0)], ids=lambda k: k.spec)
def test_fatou_examples(kernel):
    lim, ok = fatou_small_r(kernel, parse_signal("sin(t)"), math.pi / 2)
    assert ok and abs(lim - 1.0) <= 1e-4
    lim, ok = fatou_small_r(kernel, parse_signal("-2+i"), 5.0)
    assert ok and abs(lim - (-2 + 1j)) <= 1e-9


@pytest.mark.parametrize("kernel", [Box(), Poisson()], ids=lambda k: k.spec)
def test_fatou_midpoint_at_jump(kernel):
    lim, ok = fatou_small_r(kernel, parse_signal("sign(t)"), 0.0)
    assert ok and abs(lim) <= 1e-6
    lim, ok = fatou_small_r(kernel, parse_signal("ind(0,1)"), 1.0)
    assert ok and abs(lim - 0.5) <= 1e-4


@pytest.mark.parametrize("text", CONTINUOUS)
def test_fatou_consistency(text):
    sig = parse_signal(text)
    rng = np.random.default_rng(len(text))
    for x in rng.uniform(-30, 30, 4):
        lim, ok = fatou_small_r(Box(), sig, float(x))
        assert ok and abs(lim - complex(sig(x))) <= 1e-4


@pytest.mark.parametrize("f, g, text, x, gamma, alpha", [
    (Box(), Gauss(1.0), "sin(t)", 0.0, "inf", 0.0),
    (Box(), Poisson(), "3+4i", 1.3, "inf", 3 + 4j),
    (Box(), Poisson(), "3+4i", 1.3, "zero", 3 + 4j),
    (Box(), Poisson(), "sin(t)", math.pi / 2, "zero", 1.0),
])
def test_transfer_examples(f, g, text, x, gamma, alpha):
    rep = kernel_transfer_check(f, g, parse_signal(text), x, gamma)
    assert rep.transfer_ok
    assert abs(rep.f.limit - alpha) <= 1e-3 and abs(rep.g.limit - alpha) <= 1e-3


@pytest.mark.parametrize("text, x", [("sin(t)", 0.0), ("ratio(1)", 2.0), ("cos(t)*cos(1.41421356*t)", -1.0)])
def test_transfer_symmetry(text, x):
    sig = parse_signal(text)
    a = kernel_transfer_check(Box(), Poisson(), sig, x)
    b = kernel_transfer_check(Poisson(), Box(), sig, x)
    assert a.transfer_ok and b.transfer_ok
    assert abs(a.f.limit - b.g.limit) <= 1e-12 and abs(a.g.limit - b.f.limit) <= 1e-12


def test_transfer_unsettled_source():
    # Window averages of blocks at 0 keep swinging between 0 and 1 as r grows.
    rep = kernel_transfer_check(Box(), Poisson(), parse_signal("blocks(base=4)"), 0.0, "inf", ACConfig(K=4))
    assert rep.transfer_ok is None


def test_transfer_rejects_inadmissible_source():
    with pytest.raises(InadmissibleKernel, match="admissible kernel"):
        kernel_transfer_check(Custom(TWO_BOX), Box(), parse_signal("1"), 0.0)


def test_transfer_needs_even_kernels():
    with pytest.raises(ValueError):
        kernel_transfer_check(Box(), Custom("ind(0,1)"), parse_signal("1"), 0.0)


@pytest.mark.parametrize("text, y, value", [
    ("sin(t)", math.pi / 2, 1.0),
    ("sign(t)", 0.0, 0.0),
    ("3", -4.0, 3.0),
    ("1/(t+i)", 0.5, 1 / (0.5 + 1j)),
])
def test_radial_examples(text, y, value):
    rep = radial_vs_symmetric(parse_signal(text), y)
    assert rep.existence_agree and rep.value_agree
    assert rep.radial.stable and rep.symmetric.stable
    assert abs(rep.radial.limit - value) <= 1e-3
