import dataclasses
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sckyber.analysis import (
    DfrMethod,
    DfrResult,
    NoiseModel,
    binomial_tail,
    capacity_bound,
    dfr_coded,
    dfr_convolution,
    dfr_gaussian,
    gaussian_tail,
    marcum_q_half,
    noise_model,
    noise_pmf,
    raw_bit_error_rate,
    sigma_g,
    u_error_pmf,
    v_error_pmf,
)
from sckyber.params import CodeSpec, builtin_param_sets, get_param_set
from sckyber.quantization import ErrorPmf

KYBER_NAMES = ("KYBER512", "KYBER768", "KYBER1024")


# ---------------------------------------------------------------------------
# Variance


def test_sigma_g_lloyd_max_kyber1024():
    nm = noise_model(get_param_set("KYBER1024-LM"))
    assert nm.sigma_g2 == 1024 + 1024 * (1 + Fraction(1281, 6658)) + 1
    assert round(float(nm.sigma_g2), 4) == 2246.0177


def test_sigma_g_matches_symbolic_evaluation():
    k, n, e1, e2, mse = sympy.symbols("k n eta1 eta2 mse")
    formula = k * n * e1 ** 2 / 4 + k * n * e1 / 2 * (e2 / 2 + mse) + e2 / 2
    ps = get_param_set("KYBER512")
    mse_value = u_error_pmf(ps).mse()
    exact = formula.subs({k: 2, n: 256, e1: 3, e2: 2,
                          mse: sympy.Rational(mse_value.numerator, mse_value.denominator)})
    got = sigma_g(ps, mse_value)
    assert sympy.Rational(got.numerator, got.denominator) == sympy.nsimplify(exact)


def test_sigma_g_without_quantization_error():
    ps = get_param_set("KYBER1024")
    assert sigma_g(ps, 0) == Fraction(1024 * 4, 4) + Fraction(1024 * 2, 2) * 1 + 1
    with pytest.raises(ValueError):
        sigma_g(ps, -1)


def test_error_pmfs_have_zero_mean_for_lloyd_max():
    ps = get_param_set("KYBER1024-LM")
    assert u_error_pmf(ps).mean() == 0
    assert v_error_pmf(ps).mean() == 0
    assert v_error_pmf(get_param_set("SC-KYBER1024")) == ErrorPmf.zero()


# ---------------------------------------------------------------------------
# Tail functions


def test_marcum_identities():
    with mpmath.workprec(256):
        for b in (0.5, 3, 10, 30):
            assert abs(marcum_q_half(0, b) - 2 * gaussian_tail(b)) < mpmath.mpf(10) ** -70
    for a in (0, 1, 7):
        assert marcum_q_half(a, 0) == 1


def noncentral_chi_tail(a, b):
    """P(chi > b) for one degree of freedom, by numerical integration of the density."""
    with mpmath.workdps(60):
        c = 1 / mpmath.sqrt(2 * mpmath.pi)
        pdf = lambda x: c * (mpmath.exp(-(x - a) ** 2 / 2) + mpmath.exp(-(x + a) ** 2 / 2))
        h = 1 / max(b - a, 1)
        cuts = [b + h * w for w in (0, 0.25, 0.5, 1, 2, 4, 8, 16, 32, 64)]
        return mpmath.quad(pdf, cuts + [mpmath.inf])


@pytest.mark.parametrize("a", [0, 0.3, 2, 8])
@pytest.mark.parametrize("b", [0.1, 1, 5, 15])
def test_marcum_matches_quadrature(a, b):
    got = marcum_q_half(a, b)
    want = noncentral_chi_tail(a, b)
    assert abs(got - want) <= mpmath.mpf(10) ** -12 * want


def test_marcum_against_scipy_noncentral_chi2():
    for a, b in ((1, 2), (3, 4), (0.5, 0.5)):
        assert math.isclose(float(marcum_q_half(a, b)), stats.ncx2.sf(b * b, 1, a * a),
                            rel_tol=1e-9)


def test_marcum_rejects_negative_arguments():
    with pytest.raises(ValueError):
        marcum_q_half(-1, 2)
    with pytest.raises(ValueError):
        marcum_q_half(1, -2)


def test_binomial_tail_against_scipy():
    for n, t, p in ((768, 13, 1e-3), (768, 5, 1e-2), (100, 3, 0.05)):
        assert math.isclose(float(binomial_tail(n, t, p)), stats.binom.sf(t, n, p), rel_tol=1e-9)


def test_binomial_tail_degenerate():
    assert binomial_tail(768, 13, 0) == 0
    assert binomial_tail(768, 768, 0.3) == 0


# ---------------------------------------------------------------------------
# Gaussian failure rate


@pytest.mark.parametrize("name, expected", [("KYBER512-LM", -150), ("KYBER768-LM", -177),
                                            ("KYBER1024-LM", -196)])
def test_lloyd_max_rates(name, expected):
    ps = get_param_set(name)
    got = float(dfr_gaussian(noise_model(ps), ps.q, ps.n).log2_dfr)
    assert abs(got - expected) <= 3


@pytest.mark.parametrize("ps", [p for p in builtin_param_sets() if p.code is None],
                         ids=lambda p: p.name)
def test_precision_stability(ps):
    nm = noise_model(ps)
    a = dfr_gaussian(nm, ps.q, ps.n, prec=256).log2_dfr
    b = dfr_gaussian(nm, ps.q, ps.n, prec=512).log2_dfr
    assert abs(a - b) < 1e-6


def test_zero_noise_means_no_failures():
    nm = NoiseModel(Fraction(0), ErrorPmf.zero())
    assert dfr_gaussian(nm, 3329, 256).log2_dfr == mpmath.mpf("-inf")
    ps = get_param_set("SC-KYBER1024")
    assert raw_bit_error_rate(ps, nm) == 0
    assert dfr_coded(ps, nm).log2_dfr == mpmath.mpf("-inf")


@settings(max_examples=30, deadline=None)
@given(st.integers(100, 20_000), st.integers(1, 2000))
def test_rate_grows_with_variance(var, extra):
    a = dfr_gaussian(NoiseModel(Fraction(var), ErrorPmf.zero()), 3329, 256, prec=128)
    b = dfr_gaussian(NoiseModel(Fraction(var + extra), ErrorPmf.zero()), 3329, 256, prec=128)
    assert b.log2_dfr > a.log2_dfr


def test_rate_shrinks_with_threshold():
    nm = noise_model(get_param_set("KYBER512"))
    rates = [dfr_gaussian(nm, 3329, 256, threshold=z).log2_dfr for z in (500, 700, 832)]
    assert rates[0] > rates[1] > rates[2]


def test_result_validation():
    with pytest.raises(ValueError):
        DfrResult(mpmath.mpf(1), DfrMethod.GAUSSIAN, 64)
    r = DfrResult(mpmath.mpf(-3), DfrMethod.GAUSSIAN, 64)
    assert r.dfr == mpmath.mpf(1) / 8 and float(r) == -3.0


# ---------------------------------------------------------------------------
# Coded failure rate


def test_coded_rate_without_u_error_term():
    ps = get_param_set("SC-KYBER1024")
    got = float(dfr_coded(ps, noise_model(ps, include_u_mse=False)).log2_dfr)
    assert abs(got + 174) <= 2


def test_coded_rate_with_u_error_term_is_higher():
    ps = get_param_set("SC-KYBER1024")
    with_mse = dfr_coded(ps, noise_model(ps)).log2_dfr
    without = dfr_coded(ps, noise_model(ps, include_u_mse=False)).log2_dfr
    assert with_mse > without
    assert abs(float(with_mse) + 155) <= 1


def test_coded_rate_bit_error_variants():
    ps = get_param_set("SC-KYBER1024")
    nm = noise_model(ps)
    bound = raw_bit_error_rate(ps, nm, mode="bound")
    mixed = raw_bit_error_rate(ps, nm, mode="mixed")
    assert abs(mixed / bound - mpmath.mpf(7) / 8) < mpmath.mpf(10) ** -60
    with pytest.raises(ValueError):
        raw_bit_error_rate(ps, nm, mode="exact")


def test_more_correction_lowers_the_rate():
    ps = get_param_set("SC-KYBER1024")
    nm = noise_model(ps)
    weaker = dataclasses.replace(ps, code=CodeSpec(768, 718, 5, 10))
    assert dfr_coded(weaker, nm).log2_dfr > dfr_coded(ps, nm).log2_dfr


def test_coded_rate_needs_a_code():
    ps = get_param_set("KYBER1024")
    with pytest.raises(ValueError):
        dfr_coded(ps, noise_model(ps))


# ---------------------------------------------------------------------------
# Capacity bound


def test_capacity_grows_with_order():
    ps = get_param_set("SC-KYBER1024")
    nm = noise_model(ps)
    bounds = [capacity_bound(ps, nm, p) for p in (2, 4, 8, 16, 32)]
    assert all(a.k_ub_real < b.k_ub_real for a, b in zip(bounds, bounds[1:]))
    assert all(b.k_ub_real <= ps.n * math.log2(b.p) for b in bounds)
    assert all(b.k_ub == math.ceil(b.k_ub_real) for b in bounds)


def test_capacity_vanishes_at_low_snr():
    ps = get_param_set("SC-KYBER1024")
    tiny = capacity_bound(ps, NoiseModel(Fraction(10 ** 12), ErrorPmf.zero()), 8)
    assert tiny.gamma < 1e-6 and tiny.k_ub_real < 1e-3


def test_capacity_argument_checks():
    ps = get_param_set("SC-KYBER1024")
    with pytest.raises(ValueError):
        capacity_bound(ps, noise_model(ps), 6)
    with pytest.raises(ValueError):
        capacity_bound(ps, NoiseModel(Fraction(0), ErrorPmf.zero()), 8)


# ---------------------------------------------------------------------------
# Exact convolution


@pytest.mark.parametrize("name", ["KYBER512", "KYBER1024-LM", "WEAK-LM-K3-DU8-DV2"])
def test_convolved_noise_moments(name):
    ps = get_param_set(name)
    den, offset, probs = noise_pmf(ps)
    values = (offset + np.arange(len(probs))) / den
    assert math.isclose(math.fsum(probs), 1, rel_tol=1e-12)
    assert math.isclose(np.dot(values, probs), float(v_error_pmf(ps).mean()), abs_tol=1e-9)
    # Independent terms: the variance is the model variance plus the v error.
    want = float(noise_model(ps).sigma_g2 + v_error_pmf(ps).mse())
    assert math.isclose(float(np.dot(values ** 2, probs)), want, rel_tol=1e-9)


@pytest.mark.parametrize("name, expected", [("KYBER512", -139), ("KYBER768", -164),
                                            ("KYBER1024", -174)])
def test_convolution_rates_for_compression(name, expected):
    got = float(dfr_convolution(get_param_set(name)).log2_dfr)
    assert abs(got - expected) <= 3


def test_convolution_agrees_with_gaussian_when_rate_is_large():
    ps = get_param_set("WEAK-LM-K3-DU8-DV2")
    conv = float(dfr_convolution(ps).dfr)
    gauss = float(dfr_gaussian(noise_model(ps), ps.q, ps.n).dfr)
    assert 1e-4 < gauss < 1e-2
    assert abs(conv / gauss - 1) < 0.05


def test_convolution_rejects_coded_sets():
    with pytest.raises(ValueError):
        dfr_convolution(get_param_set("SC-KYBER1024"))
