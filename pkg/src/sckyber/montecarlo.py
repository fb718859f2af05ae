"""Monte-Carlo simulation of decoding noise and decryption failures.

Trial ``i`` draws everything (key seed, encryption coins, message) from
``SHAKE-256(master || i)``, and each trial uses a fresh key pair. Trials are
processed in fixed chunks whose results are concatenated in order, so the
output depends only on the master seed and trial count, never on ``jobs``.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from sckyber import pke, ring
from sckyber.analysis import noise_model
from sckyber.coding import Encoder, gray_demap
from sckyber.errors import DecryptionFailure
from sckyber.params import ParamSet, Variant

CHUNK = 500


def trial_material(master: bytes, index: int) -> tuple[bytes, bytes, bytes]:
    """``(key seed, coins, message seed)`` for one trial."""
    h = hashlib.shake_256(master + index.to_bytes(8, "little")).digest(96)
    return h[:32], h[32:64], h[64:]


def _messages(seeds: list[bytes], bits: int) -> np.ndarray:
    raw = b"".join(hashlib.shake_256(s).digest((bits + 7) // 8) for s in seeds)
    m = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return m.reshape(len(seeds), -1)[:, :bits].astype(np.int64)


@dataclass
class _Batch:
    s: np.ndarray
    u_raw: np.ndarray
    v_raw: np.ndarray
    payload: np.ndarray
    messages: np.ndarray


def _run_chunk(ps: ParamSet, master: bytes, start: int, count: int) -> _Batch:
    material = [trial_material(master, i) for i in range(start, start + count)]
    keys, coins, msg_seeds = zip(*material)
    _, A, t, s, _ = pke.keygen_arrays(ps, list(keys))
    r, e1, e2 = pke.sample_coins(ps, list(coins))
    m = _messages(list(msg_seeds), ps.message_bits)
    if ps.variant is Variant.SEMI_COMPRESSED:
        payload = Encoder(ps.code, ps.p).encode_many(m)
    else:
        payload = m
    u_raw, v_raw = pke.raw_ciphertext(ps, A, t, r, e1, e2, payload)
    return _Batch(s, u_raw, v_raw, payload, m)


def _centered(x, mod: int) -> np.ndarray:
    x = np.mod(x, mod)
    return np.where(2 * x > mod, x - mod, x)


def _chunks(trials: int):
    return [(start, min(CHUNK, trials - start)) for start in range(0, trials, CHUNK)]


def _map_chunks(fn, ps, master, trials, jobs):
    args = [(ps, master, a, b) for a, b in _chunks(trials)]
    if jobs <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args)))


# ---------------------------------------------------------------------------
# Noise


@dataclass(frozen=True)
class NoiseSample:
    """Simulated noise, scaled by ``denominator`` to exact integers.

    ``y`` excludes the ``v`` quantization error, ``n_e`` includes it.
    Row ``i`` holds the first few coefficients of trial ``i``.
    """

    y: np.ndarray
    n_e: np.ndarray
    denominator: int

    def y_values(self) -> np.ndarray:
        return self.y / self.denominator

    def n_e_values(self) -> np.ndarray:
        return self.n_e / self.denominator


def _noise_chunk(ps, master, start, count, coefficients=1):
    b = _run_chunk(ps, master, start, count)
    codec = pke.codec_for(ps)
    den = codec.denominator
    mod = den * ps.q
    u_hat = codec.restore_u(codec.quantize_u(b.u_raw))
    su = ring.inner_product_int(b.s, u_hat)
    shift = den * pke.message_scale(ps) * b.payload
    y = _centered(den * b.v_raw - su - shift, mod)
    n_e = _centered(codec.restore_v(codec.quantize_v(b.v_raw)) - su - shift, mod)
    return y[:, :coefficients], n_e[:, :coefficients]


def _noise_chunk_first(ps, master, start, count):
    return _noise_chunk(ps, master, start, count, 1)


def _noise_chunk_all(ps, master, start, count):
    return _noise_chunk(ps, master, start, count, ps.n)


def simulate_noise(ps: ParamSet, trials: int, seed: bytes, jobs: int = 1,
                   all_coefficients: bool = False) -> NoiseSample:
    """Decoding noise of ``trials`` fresh encryptions.

    By default only the first coefficient of each trial is kept, so samples
    are independent; ``all_coefficients`` keeps all ``n`` per trial.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    fn = _noise_chunk_all if all_coefficients else _noise_chunk_first
    parts = _map_chunks(fn, ps, bytes(seed), trials, jobs)
    y = np.concatenate([p[0] for p in parts]).ravel()
    n_e = np.concatenate([p[1] for p in parts]).ravel()
    return NoiseSample(y, n_e, pke.codec_for(ps).denominator)


@dataclass(frozen=True)
class KsResult:
    statistic: float  # against the normal discretized to the sample lattice
    raw_statistic: float  # against the continuous normal
    raw_pvalue: float
    samples: int


def ks_normal(y_scaled, denominator: int, sigma: float) -> KsResult:
    """Kolmogorov-Smirnov distance of lattice samples ``y_scaled / denominator`` to N(0, sigma^2).

    The samples live on ``(1/denominator) Z``, so the continuous-normal
    statistic is bounded below by half the largest atom. ``statistic``
    compares instead with the normal rounded to the same lattice, whose CDF
    at atom ``x`` is ``Phi((x + h/2) / sigma)`` with ``h = 1/denominator``.
    """
    y = np.sort(np.asarray(y_scaled, dtype=np.int64))
    count = len(y)
    atoms = np.arange(y[0], y[-1] + 1)
    emp = np.searchsorted(y, atoms, side="right") / count
    model = stats.norm.cdf((atoms + 0.5) / (denominator * sigma))
    below = stats.norm.cdf((y[0] - 0.5) / (denominator * sigma))
    stat = max(float(np.abs(emp - model).max()), float(below), float(1 - model[-1]))
    raw = stats.kstest(y / (denominator * sigma), "norm")
    return KsResult(stat, float(raw.statistic), float(raw.pvalue), count)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    pvalue: float
    bins: int


def chi_square_normal(y_scaled, denominator: int, sigma: float, bins: int = 100) -> ChiSquareResult:
    """Pearson test of binned lattice samples against the lattice-rounded normal.

    Bin edges sit half-way between lattice points near the normal quantiles,
    with open outer bins.
    """
    y = np.asarray(y_scaled, dtype=np.int64)
    scale = denominator * sigma
    qs = stats.norm.ppf(np.linspace(0, 1, bins + 1)[1:-1]) * scale
    edges = np.unique(np.floor(qs).astype(np.int64)) + 0.5
    cdf = np.concatenate([[0.0], stats.norm.cdf(edges / scale), [1.0]])
    expected = np.diff(cdf) * len(y)
    observed = np.bincount(np.searchsorted(edges, y), minlength=len(edges) + 1)
    res = stats.chisquare(observed, expected)
    return ChiSquareResult(float(res.statistic), float(res.pvalue), len(expected))


# ---------------------------------------------------------------------------
# Failure rate


def wilson_interval(failures: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    ci = stats.binomtest(failures, trials).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class EmpiricalDfr:
    failures: int
    trials: int
    ci_low: float
    ci_high: float
    confidence: float

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    @property
    def log2_rate(self) -> float:
        return math.log2(self.rate) if self.failures else float("-inf")


def _failure_chunk(ps, master, start, count) -> int:
    b = _run_chunk(ps, master, start, count)
    codec = pke.codec_for(ps)
    u, v = codec.quantize_u(b.u_raw), codec.quantize_v(b.v_raw)
    decided = pke.decide_symbols(ps, pke.decode_arrays(ps, b.s, u, v))
    if ps.variant is not Variant.SEMI_COMPRESSED:
        return int(np.any(decided != b.payload, axis=-1).sum())
    # A bounded-distance decoder is guaranteed correct within t bit errors,
    # so only words beyond that are run through the decoder.
    bit_errors = (gray_demap(decided, ps.p) != gray_demap(b.payload, ps.p)).sum(axis=-1)
    enc = Encoder(ps.code, ps.p)
    failures = 0
    for i in np.flatnonzero(bit_errors > ps.code.t):
        try:
            msg, _ = enc.decode_symbols(decided[i])
            failures += int(not np.array_equal(msg, b.messages[i]))
        except DecryptionFailure:
            failures += 1
    return failures


def empirical_dfr(ps: ParamSet, trials: int, seed: bytes, jobs: int = 1,
                  confidence: float = 0.99) -> EmpiricalDfr:
    """Fraction of failed decryptions over ``trials`` fresh key pairs and messages."""
    if trials < 1:
        raise ValueError("need at least one trial")
    failures = sum(_map_chunks(_failure_chunk, ps, bytes(seed), trials, jobs))
    lo, hi = wilson_interval(failures, trials, confidence)
    return EmpiricalDfr(failures, trials, lo, hi, confidence)


def predicted_sigma(ps: ParamSet) -> float:
    return noise_model(ps).sigma_g
