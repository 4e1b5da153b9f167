import numpy as np
import pytest

from almostconv import aclimit
from almostconv.aclimit import (ACConfig, LadderResult, Status, ac_verdict, alpha_close, band_ladder,
                                estimate_Fu, ladder_radii)
from almostconv.convolve import HorizonPolicy, SupInfEstimate
from almostconv.errors import InadmissibleKernel, QuadratureBudgetExceeded
from almostconv.kernels import Box, Custom, Gauss, Poisson
from almostconv.sigdsl import parse_signal

TWO_BOX = "0.25*ind(-1,1) + (0.25/exp(pi/3))*ind(-exp(pi/3),exp(pi/3))"


def rung(r, hi, lo, slack=0.0):
    return SupInfEstimate(r=r, F_bar=hi, F_under=lo, slack=slack, horizon="test", spacing=0.1, n_points=10)


def test_ladder_radii():
    assert ladder_radii(2.0, 10.0, 3) == [2.0, 20.0, 200.0, 2000.0]


@pytest.mark.parametrize("kwargs", [dict(r0=0.0), dict(rho=1.0), dict(K=2), dict(K=3.5), dict(tol=-1.0),
                                    dict(eps_conv=0.0), dict(eps_div=-1e-3)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ACConfig(**kwargs)


def test_estimate_uses_last_three_rungs():
    lad = LadderResult("box", "re", (rung(1, 0.9, -0.9), rung(10, 0.2, 0.1), rung(100, 0.21, 0.1),
                                     rung(1000, 0.2, 0.11)))
    est = estimate_Fu(lad, 1e-3)
    assert est.F_bar_u == 0.21 and est.F_under_u == 0.1
    assert est.drift == pytest.approx(0.01)
    assert not est.stable
    assert est.width == pytest.approx(0.11)
    assert est.midpoint == pytest.approx(0.155)


def test_slack_widens_stability_allowance():
    lad = LadderResult("box", "re", (rung(1, 0.5, 0.5, 0.004), rung(10, 0.505, 0.5, 0.004),
                                     rung(100, 0.5, 0.5, 0.004)))
    assert estimate_Fu(lad, 1e-3).stable


@pytest.mark.parametrize("rungs, state", [
    ([(0.5, 0.4999), (0.5, 0.5), (0.5, 0.5)], "collapsed"),
    ([(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)], "wide"),
    ([(0.505, 0.5), (0.505, 0.5), (0.505, 0.5)], "undecided"),
    ([(1.0, 0.0), (0.5, 0.4), (0.45, 0.45)], "undecided"),
])
def test_component_classification(rungs, state):
    lad = LadderResult("box", "re", tuple(rung(10.0 ** k, hi, lo) for k, (hi, lo) in enumerate(rungs)))
    assert aclimit._classify(lad, ACConfig()).state == state


def test_failed_rung_keeps_earlier_rungs(monkeypatch):
    real = aclimit.sup_inf_over_translates

    def flaky(dk, *args, **kwargs):
        if dk.r >= 1000:
            raise QuadratureBudgetExceeded(0.0, 1.0, 1e-6)
        return real(dk, *args, **kwargs)

    monkeypatch.setattr(aclimit, "sup_inf_over_translates", flaky)
    lad = band_ladder(Box(), parse_signal("sin(t)"), K=4)
    assert not lad.complete
    assert lad.failed_rung == 3 and len(lad.rungs) == 3
    verdict = ac_verdict(parse_signal("sin(t)"), [Box()], ACConfig(K=4))
    assert verdict.status == Status.INCONCLUSIVE
    assert "failed at rung 3" in verdict.reason


@pytest.mark.parametrize("text, alpha", [
    ("sin(t)", 0.0),
    ("3+4i", 3 + 4j),
    ("cis(t)", 0.0),
    ("0.5*sin(3*t)+cos(t/2)+0.25", 0.25),
    ("sin(t)^2", 0.5),
])
def test_almost_convergent_periodic(text, alpha):
    v = ac_verdict(parse_signal(text), [Box(), Poisson()])
    assert v.status == Status.ALMOST_CONVERGENT
    assert abs(v.alpha - alpha) <= 1e-4
    assert set(v.kernel_alphas) == {"box", "poisson"}


def test_blocks_diverge_with_full_band():
    v = ac_verdict(parse_signal("blocks(base=4)"), [Box(), Poisson()])
    assert v.status == Status.DIVERGENT
    lo, hi, _ = v.band["re"]
    assert lo <= 0.05 and hi >= 0.95
    assert v.alpha is None


def test_finite_block_is_almost_convergent():
    v = ac_verdict(parse_signal("1+blocks(intervals=[0,5])"), [Box()])
    assert v.status == Status.ALMOST_CONVERGENT
    assert abs(v.alpha - 1.0) <= 1e-3


def test_generic_signal_runs_with_explicit_horizon():
    v = ac_verdict(parse_signal("sign(t)"), [Box()], ACConfig(horizon=HorizonPolicy.parse("4r")))
    assert v.status == Status.DIVERGENT
    assert v.horizon_limited
    assert v.band["re"][0] <= -0.99 and v.band["re"][1] >= 0.99


def test_short_ladder_is_inconclusive():
    # Rungs r = 10, 100, 1000 still drift by about |sin 10| / 10.
    v = ac_verdict(parse_signal("sin(t)"), [Box()], ACConfig(K=3))
    assert v.status == Status.INCONCLUSIVE
    assert "drift" in v.reason


def test_kernel_disagreement_is_inconclusive():
    # An absurdly tight eps_agree turns tiny kernel-dependent residues into disagreement.
    v = ac_verdict(parse_signal("ratio(1)"), [Box(), Poisson()],
                   ACConfig(horizon=HorizonPolicy.parse("4r"), eps_agree=1e-9))
    assert v.status == Status.INCONCLUSIVE
    assert v.reason.startswith("KernelDisagreement")


def test_admissibility_check():
    with pytest.raises(InadmissibleKernel):
        ac_verdict(parse_signal("sin(t)"), [Custom(TWO_BOX)], ACConfig(check_admissible=True))


def test_needs_a_kernel():
    with pytest.raises(ValueError):
        ac_verdict(parse_signal("1"), [])


def test_workers_do_not_change_the_verdict():
    sig = parse_signal("blocks(base=4, mirror=1)+0.5*sin(t)")
    a = ac_verdict(sig, [Box(), Gauss(1.0)], ACConfig(workers=1))
    b = ac_verdict(sig, [Box(), Gauss(1.0)], ACConfig(workers=4))
    assert a.as_dict() == b.as_dict()


@pytest.mark.parametrize("seed", range(10))
def test_verdicts_are_translation_invariant(seed):
    s = float(np.random.default_rng(seed).uniform(-1e3, 1e3))
    for text, alpha in (("sin(t)", 0.0), ("blocks(base=4)", None)):
        sig = parse_signal(text)
        a = ac_verdict(sig, [Box()])
        b = ac_verdict(sig.shifted(s), [Box()])
        assert a.status == b.status
        assert alpha_close(a.alpha, b.alpha, 1e-6) or (a.alpha is None and b.alpha is None)


def test_alpha_close():
    assert alpha_close(1.0, 1.0 + 1e-4, 1e-3)
    assert not alpha_close(None, 1.0, 1.0)
    assert not alpha_close(0.0, 1.0, 1e-3)


def test_report_dict_shape():
    d = ac_verdict(parse_signal("cis(t)"), [Box()]).as_dict()
    assert d["status"] == "AlmostConvergent"
    assert set(d["band"]) == {"re", "im"}
    assert all("slack" in b for b in d["band"].values())


def test_large_inverse_tail_needs_longer_ladder():
    # Im of 3/(1+it) has window extremes near 3 log(r) / (2r); at r = 1e4 that
    # is still above eps_conv.
    sig = parse_signal("3/(1+i*t)")
    cfg = dict(horizon=HorizonPolicy.parse("8r"))
    assert ac_verdict(sig, [Box()], ACConfig(**cfg)).status == Status.INCONCLUSIVE
    v = ac_verdict(sig, [Box()], ACConfig(K=7, **cfg))
    assert v.status == Status.ALMOST_CONVERGENT and abs(v.alpha) <= 1e-4
