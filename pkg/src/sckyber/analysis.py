"""Decoding-noise model and decryption-failure analysis.

The decoding noise of one coefficient is modelled as a Gaussian part of
variance ``sigma_g2`` plus the (independent) quantization error of ``v``:

    sigma_g2 = k n eta1^2 / 4 + k n eta1 / 2 * (eta2 / 2 + MSE_u) + eta2 / 2

where ``MSE_u`` is the mean squared quantization error of a ``u`` coefficient.
From it follow

* :func:`dfr_gaussian`: per-coefficient failure as a mixture of Gaussian
  two-sided tails, raised to the ``n`` coefficients;
* :func:`dfr_coded`: a binomial tail over raw bit errors for the BCH-coded
  variant;
* :func:`capacity_bound`: the PAM mutual-information bound on plaintext bits.

:func:`dfr_convolution` is an independent numerical cross-check that skips the
Gaussian approximation and convolves the exact per-term distributions.

Tails are evaluated with ``mpmath`` (default 256-bit working precision) and
reported as ``log2`` so values near ``2**-300`` stay representable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from sckyber.params import RAW_BITS, ParamSet, Variant
from sckyber.quantization import (
    DiscretePmf,
    ErrorPmf,
    error_pmf,
    error_pmf_compress,
    uniform_codebook,
)

DEFAULT_PREC = 256


class DfrMethod(enum.Enum):
    GAUSSIAN = "gaussian"  # Gaussian noise plus v quantization error
    CODED_BINOMIAL = "coded-binomial"  # binomial tail over BCH bit errors
    MONTE_CARLO = "monte-carlo"
    CONVOLUTION = "convolution"  # exact per-term distributions, convolved


@dataclass(frozen=True)
class DfrResult:
    log2_dfr: mpmath.mpf
    method: DfrMethod
    precision_bits: int

    def __post_init__(self):
        if self.log2_dfr > 0:
            raise ValueError("a failure rate cannot exceed 1")

    @property
    def dfr(self) -> mpmath.mpf:
        with mpmath.workprec(self.precision_bits):
            return mpmath.power(2, self.log2_dfr)

    def __float__(self):
        return float(self.log2_dfr)


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian variance and the PMF of the additive ``v`` quantization error."""

    sigma_g2: Fraction
    e_lv: ErrorPmf

    def __post_init__(self):
        if self.sigma_g2 < 0:
            raise ValueError("variance must be non-negative")

    @property
    def sigma_g(self) -> float:
        return math.sqrt(self.sigma_g2)


def rounded_div(a: int, b: int) -> int:
    """``round(a / b)`` for positive integers, ties up."""
    return (2 * a + b) // (2 * b)


# ---------------------------------------------------------------------------
# Noise model


def sigma_g(ps: ParamSet, mse_lu) -> Fraction:
    """Variance of the Gaussian part of one decoding-noise coefficient."""
    mse_lu = Fraction(mse_lu)
    if mse_lu < 0:
        raise ValueError("MSE must be non-negative")
    kn = ps.k * ps.n
    return (
        Fraction(kn * ps.eta1 ** 2, 4)
        + Fraction(kn * ps.eta1, 2) * (Fraction(ps.eta2, 2) + mse_lu)
        + Fraction(ps.eta2, 2)
    )


def u_error_pmf(ps: ParamSet) -> ErrorPmf:
    """Quantization error of one ``u`` coefficient (uniform input on Z_q)."""
    if ps.variant is Variant.ORIGINAL:
        return error_pmf_compress(ps.d_u, ps.q)
    return error_pmf(uniform_codebook(ps.q, 1 << ps.d_u), DiscretePmf.uniform(ps.q))


def v_error_pmf(ps: ParamSet) -> ErrorPmf:
    if ps.variant is Variant.ORIGINAL:
        return error_pmf_compress(ps.d_v, ps.q)
    if ps.variant is Variant.LLOYD_MAX:
        return error_pmf(uniform_codebook(ps.q, 1 << ps.d_v), DiscretePmf.uniform(ps.q))
    return ErrorPmf.zero()


def noise_model(ps: ParamSet, include_u_mse: bool = True) -> NoiseModel:
    """Noise model for ``ps``; ``include_u_mse=False`` drops the ``u`` error term."""
    mse = u_error_pmf(ps).mse() if include_u_mse else Fraction(0)
    return NoiseModel(sigma_g(ps, mse), v_error_pmf(ps))


# ---------------------------------------------------------------------------
# Gaussian tails


def gaussian_tail(x) -> mpmath.mpf:
    """``Q(x) = P(Z > x)`` for a standard normal ``Z``."""
    return mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2


def marcum_q_half(a, b, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    """Marcum Q-function of order 1/2: ``P(|a + Z| > b)`` for standard normal ``Z``."""
    if a < 0 or b < 0:
        raise ValueError("Marcum Q arguments must be non-negative")
    with mpmath.workprec(prec):
        a, b = mpmath.mpf(a), mpmath.mpf(b)
        return +(gaussian_tail(b - a) + gaussian_tail(b + a))


def _log2_one_minus_power(p, n: int) -> mpmath.mpf:
    """``log2(1 - (1 - p)^n)`` without cancellation for tiny ``p``."""
    if p <= 0:
        return mpmath.mpf("-inf")
    if p >= 1:
        return mpmath.mpf(0)
    return mpmath.log(-mpmath.expm1(n * mpmath.log1p(-p)), 2)


def dfr_gaussian(nm: NoiseModel, q: int, n: int, prec: int = DEFAULT_PREC,
                 threshold: int | None = None) -> DfrResult:
    """Failure rate of an uncoded 2-PAM ciphertext under the Gaussian noise model.

    A coefficient fails when ``|x + e| > z`` with ``x ~ N(0, sigma_g2)``,
    ``e`` drawn from the ``v`` error PMF and ``z = round(q/4)`` unless
    ``threshold`` overrides it.
    """
    z = rounded_div(q, 4) if threshold is None else threshold
    with mpmath.workprec(prec):
        if nm.sigma_g2 == 0:
            p = sum((mpmath.mpf(pr.numerator) / pr.denominator
                     for e, pr in nm.e_lv.items() if abs(e) > z), mpmath.mpf(0))
        else:
            sigma = mpmath.sqrt(mpmath.mpf(nm.sigma_g2.numerator) / nm.sigma_g2.denominator)
            p = mpmath.mpf(0)
            for e, pr in nm.e_lv.items():
                a = abs(mpmath.mpf(e.numerator) / e.denominator) / sigma
                p += mpmath.mpf(pr.numerator) / pr.denominator * marcum_q_half(a, z / sigma, prec)
        return DfrResult(_log2_one_minus_power(p, n), DfrMethod.GAUSSIAN, prec)


def raw_bit_error_rate(ps: ParamSet, nm: NoiseModel, prec: int = DEFAULT_PREC,
                       mode: str = "bound") -> mpmath.mpf:
    """Raw bit error rate of Gray-mapped p-PAM under Gaussian noise.

    ``mode="bound"`` charges every symbol both neighbours, ``2 Q(z/sigma)``;
    ``mode="mixed"`` gives the two end points of the constellation one
    neighbour, ``2 (p-1)/p Q(z/sigma)``. Either is divided by ``log2 p``.
    """
    z = rounded_div(ps.q, 2 * ps.p)
    bits = ps.p.bit_length() - 1
    with mpmath.workprec(prec):
        if nm.sigma_g2 == 0:
            return mpmath.mpf(0)
        sigma = mpmath.sqrt(mpmath.mpf(nm.sigma_g2.numerator) / nm.sigma_g2.denominator)
        tail = gaussian_tail(z / sigma)
        if mode == "bound":
            rser = 2 * tail
        elif mode == "mixed":
            rser = 2 * mpmath.mpf(ps.p - 1) / ps.p * tail
        else:
            raise ValueError(f"unknown RBER mode {mode!r}")
        return rser / bits


def binomial_tail(length: int, t: int, rate, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    """``P(Binomial(length, rate) > t)`` with exact binomial coefficients."""
    with mpmath.workprec(prec):
        rate = mpmath.mpf(rate)
        if rate <= 0 or t >= length:
            return mpmath.mpf(0)
        log_r, log_1r = mpmath.log(rate), mpmath.log1p(-rate)
        terms = [
            mpmath.log(math.comb(length, j)) + j * log_r + (length - j) * log_1r
            for j in range(t + 1, length + 1)
        ]
        top = max(terms)
        return mpmath.exp(top) * mpmath.fsum(mpmath.exp(x - top) for x in terms)


def dfr_coded(ps: ParamSet, nm: NoiseModel, prec: int = DEFAULT_PREC,
              rber: str = "bound") -> DfrResult:
    """Failure rate of the BCH-coded variant: more than ``t`` raw bit errors."""
    if ps.code is None:
        raise ValueError(f"{ps.name} has no error-correcting code")
    with mpmath.workprec(prec):
        p = raw_bit_error_rate(ps, nm, prec, rber)
        delta = binomial_tail(ps.code.length, ps.code.t, p, prec)
        log2 = mpmath.log(delta, 2) if delta > 0 else mpmath.mpf("-inf")
        return DfrResult(min(log2, mpmath.mpf(0)), DfrMethod.CODED_BINOMIAL, prec)


# ---------------------------------------------------------------------------
# Capacity bound


@dataclass(frozen=True)
class CapacityBound:
    p: int
    gamma: float
    k_ub_real: float
    k_ub: int  # rounded up to whole bits
    cer_lb: Fraction


def capacity_bound(ps: ParamSet, nm: NoiseModel, p: int | None = None) -> CapacityBound:
    """Upper bound on plaintext bits for p-PAM over ``n`` Gaussian channel uses.

    ``p`` defaults to the set's PAM order. The ciphertext-rate bound uses raw
    ``v`` (12 bits per coefficient) and the bound rounded up to whole bits.
    """
    p = ps.p if p is None else p
    if p < 2 or p & (p - 1):
        raise ValueError(f"p={p} must be a power of two >= 2")
    step = rounded_div(ps.q, p)
    energy = sum(Fraction(2 * i - (p - 1), 2) ** 2 for i in range(p))
    if nm.sigma_g2 == 0:
        raise ValueError("the bound is unbounded for noiseless channels")
    gamma = Fraction(step * step) * energy / (p * nm.sigma_g2)
    g = float(gamma)
    k_real = ps.n / 2 * (math.log2(1 + g) - math.log2(1 + g / (p * p)))
    k_int = math.ceil(k_real)
    cer_lb = Fraction(ps.k * ps.n * ps.d_u + RAW_BITS * ps.n, k_int) if k_int else None
    return CapacityBound(p, g, k_real, k_int, cer_lb)


# ---------------------------------------------------------------------------
# Exact convolution


def _pmf_array(values: dict[Fraction, Fraction], den: int) -> tuple[int, np.ndarray]:
    """Dense float array on the lattice ``(1/den) Z``; returns (offset, probs)."""
    idx = {int(v * den): float(p) for v, p in values.items()}
    lo, hi = min(idx), max(idx)
    arr = np.zeros(hi - lo + 1)
    for i, p in idx.items():
        arr[i - lo] += p
    return lo, arr


def _conv(a, b):
    (oa, pa), (ob, pb) = a, b
    return oa + ob, np.convolve(pa, pb)


def _conv_power(a, times: int):
    out = (0, np.ones(1))
    while times:
        if times & 1:
            out = _conv(out, a)
        times >>= 1
        if times:
            a = _conv(a, a)
    return out


def _cbd_pmf(eta: int) -> dict[Fraction, Fraction]:
    total = 4 ** eta
    return {
        Fraction(x): Fraction(math.comb(2 * eta, x + eta), total)
        for x in range(-eta, eta + 1)
    }


def _product_pmf(a: dict, b: dict) -> dict:
    out: dict = {}
    for x, px in a.items():
        for y, py in b.items():
            out[x * y] = out.get(x * y, 0) + px * py
    return out


def _sum_pmf(a: dict, b: dict) -> dict:
    out: dict = {}
    for x, px in a.items():
        for y, py in b.items():
            out[x + y] = out.get(x + y, 0) + px * py
    return out


def noise_pmf(ps: ParamSet) -> tuple[int, int, np.ndarray]:
    """Distribution of one decoding-noise coefficient, assuming independent terms.

    Returns ``(den, offset, probs)``: ``probs[i]`` is the probability of the
    value ``(offset + i) / den``. Direct (not FFT) convolution keeps the
    relative accuracy of small tail probabilities.
    """
    eu, ev = u_error_pmf(ps), v_error_pmf(ps)
    den = math.lcm(eu.denominator(), ev.denominator())
    s = _cbd_pmf(ps.eta1)
    er = _product_pmf(s, s)
    su = _product_pmf(s, _sum_pmf(_cbd_pmf(ps.eta2), dict(eu.items())))
    kn = ps.k * ps.n
    total = _conv(_conv_power(_pmf_array(er, den), kn), _conv_power(_pmf_array(su, den), kn))
    total = _conv(total, _pmf_array(_sum_pmf(_cbd_pmf(ps.eta2), dict(ev.items())), den))
    offset, probs = total
    return den, offset, probs


def dfr_convolution(ps: ParamSet) -> DfrResult:
    """Failure rate of an uncoded set from the convolved exact noise distribution.

    A coefficient fails when its noise exceeds ``q/4`` in magnitude; the
    ``n`` coefficients are treated as independent.
    """
    if ps.variant is Variant.SEMI_COMPRESSED:
        raise ValueError("convolution analysis covers the uncoded 2-PAM variants")
    den, offset, probs = noise_pmf(ps)
    values = np.arange(offset, offset + len(probs))
    fail = np.abs(4 * values) > den * ps.q  # |x / den| > q / 4
    p = math.fsum(probs[fail]) / math.fsum(probs)
    with mpmath.workprec(64):
        return DfrResult(_log2_one_minus_power(mpmath.mpf(p), ps.n), DfrMethod.CONVOLUTION, 53)
