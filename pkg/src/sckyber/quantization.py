"""Scalar quantizers for ciphertext coefficients.

Two families live here:

* Kyber's ``compress``/``decompress`` rounding maps, and
* MMSE codebooks built by the Lloyd-Max iteration over a discrete source.

Codebook arithmetic is exact (:class:`fractions.Fraction`): levels are
conditional means of integer cells, so for sources uniform on Z_q they are
integers or half-integers and every MSE is a rational with denominator q.
"""

from __future__ import annotations

import bisect
import functools
import io
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from sckyber.params import Q

MAGIC = b"LMQC"
_LLOYD_MAX_ITER = 100_000
DP_MAX_WORK = 50_000_000


class ResourceLimitError(RuntimeError):
    """An exact oracle was asked for an instance beyond its work budget."""


# ---------------------------------------------------------------------------
# Kyber compress / decompress


def _check_bits(d: int, q: int):
    if d < 1 or (1 << d) >= q:
        raise ValueError(f"compression needs 1 <= d and 2^d < q (d={d}, q={q})")


def compress(x, d: int, q: int = Q):
    """``round((2^d / q) * x) mod 2^d`` with ties rounded up."""
    _check_bits(d, q)
    x = np.mod(np.asarray(x, dtype=np.int64), q)
    out = ((x << (d + 1)) + q) // (2 * q) % (1 << d)
    return int(out) if out.ndim == 0 else out


def decompress(y, d: int, q: int = Q):
    """``round((q / 2^d) * y)`` with ties rounded up."""
    _check_bits(d, q)
    y = np.asarray(y, dtype=np.int64)
    if np.any((y < 0) | (y >= 1 << d)):
        raise ValueError(f"compressed value out of range [0, 2^{d})")
    out = (2 * q * y + (1 << d)) >> (d + 1)
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Distributions


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class DiscretePmf:
    """A PMF on distinct sorted integers with exact probabilities."""

    support: tuple[int, ...]
    probs: tuple[Fraction, ...]
    label: str = "custom"

    def __post_init__(self):
        if not self.support:
            raise ValueError("empty PMF")
        if len(self.support) != len(self.probs):
            raise ValueError("support and probabilities differ in length")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ValueError("support must be strictly increasing")
        probs = tuple(_as_fraction(p) for p in self.probs)
        if any(p < 0 for p in probs):
            raise ValueError("negative probability")
        if sum(probs) != 1:
            raise ValueError(f"probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, q: int) -> DiscretePmf:
        return cls(tuple(range(q)), (Fraction(1, q),) * q, label=f"uniform-Z{q}")

    @classmethod
    def from_mapping(cls, mapping: dict, label: str = "custom") -> DiscretePmf:
        items = sorted(mapping.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items), label)

    def integer_weights(self) -> tuple[list[int], int]:
        """Probabilities as integers over a common denominator."""
        den = math.lcm(*(p.denominator for p in self.probs))
        return [p.numerator * (den // p.denominator) for p in self.probs], den

    def mean(self) -> Fraction:
        return sum((p * x for x, p in zip(self.support, self.probs)), Fraction(0))


@dataclass(frozen=True)
class ErrorPmf:
    """Distribution of a quantization error ``x - Q(x)`` (rational support)."""

    support: tuple[Fraction, ...]
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise ValueError("support and probabilities differ in length")
        if sum(self.probs) != 1:
            raise ValueError("error PMF does not sum to 1")

    @classmethod
    def from_counts(cls, counts: dict, total) -> ErrorPmf:
        keys = sorted(counts)
        return cls(
            tuple(_as_fraction(k) for k in keys),
            tuple(Fraction(counts[k]) / total for k in keys),
        )

    @classmethod
    def zero(cls) -> ErrorPmf:
        return cls((Fraction(0),), (Fraction(1),))

    def __getitem__(self, e) -> Fraction:
        e = _as_fraction(e)
        for x, p in zip(self.support, self.probs):
            if x == e:
                return p
        return Fraction(0)

    def items(self):
        return zip(self.support, self.probs)

    def mean(self) -> Fraction:
        return sum((x * p for x, p in self.items()), Fraction(0))

    def mse(self) -> Fraction:
        return sum((x * x * p for x, p in self.items()), Fraction(0))

    def denominator(self) -> int:
        return math.lcm(*(x.denominator for x in self.support))

    def rounded(self, places: int = 4) -> dict[float, float]:
        return {float(x): round(float(p), places) for x, p in self.items()}


# ---------------------------------------------------------------------------
# Codebooks


@dataclass(frozen=True, eq=False)
class QuantCodebook:
    """Sorted reconstruction levels and the midpoint decision thresholds.

    Cell ``i`` is ``(thresholds[i-1], thresholds[i]]``: a value sitting exactly
    on a threshold belongs to the lower-index level.
    """

    levels: tuple[Fraction, ...]
    source: str = "custom"
    dropped_levels: int = 0
    mse_trace: tuple[Fraction, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("codebook needs at least one level")
        levels = tuple(_as_fraction(v) for v in self.levels)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)

    def __eq__(self, other):
        if not isinstance(other, QuantCodebook):
            return NotImplemented
        return self.levels == other.levels and self.source == other.source

    def __hash__(self):
        return hash((self.levels, self.source))

    @property
    def size(self) -> int:
        return len(self.levels)

    @functools.cached_property
    def thresholds(self) -> tuple[Fraction, ...]:
        lv = self.levels
        return tuple((lv[i] + lv[i + 1]) / 2 for i in range(len(lv) - 1))

    @functools.cached_property
    def denominator(self) -> int:
        """LCM of the level denominators."""
        return math.lcm(*(v.denominator for v in self.levels))

    @functools.cached_property
    def scaled_levels(self) -> np.ndarray:
        """``denominator * level`` as exact integers."""
        d = self.denominator
        scaled = [int(v * d) for v in self.levels]
        if max(abs(x) for x in scaled) * 4 >= 1 << 62:
            raise ValueError("levels too fine for 64-bit scaled arithmetic; use quantize()")
        return np.array(scaled, dtype=np.int64)

    @functools.cached_property
    def scaled_thresholds(self) -> np.ndarray:
        """``2 * denominator * threshold`` as exact integers."""
        s = self.scaled_levels
        return s[:-1] + s[1:]

    def indices(self, x) -> np.ndarray:
        """Nearest-level indices for integer inputs (binary search)."""
        x = np.asarray(x, dtype=np.int64)
        return np.searchsorted(self.scaled_thresholds, 2 * self.denominator * x, side="left")

    def to_bytes(self) -> bytes:
        label = self.source.encode()
        out = io.BytesIO()
        out.write(MAGIC)
        out.write(struct.pack("<IH", self.size, len(label)))
        out.write(label)
        out.write(struct.pack("<q", self.denominator))
        out.write(self.scaled_levels.astype("<i8").tobytes())
        out.write(self.scaled_thresholds.astype("<i8").tobytes())
        return out.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> QuantCodebook:
        if data[:4] != MAGIC:
            raise ValueError("not a codebook file (bad magic)")
        try:
            size, label_len = struct.unpack_from("<IH", data, 4)
            pos = 10
            label = data[pos:pos + label_len].decode()
            pos += label_len
            (den,) = struct.unpack_from("<q", data, pos)
            pos += 8
            levels = np.frombuffer(data, dtype="<i8", count=size, offset=pos)
            pos += 8 * size
            thr = np.frombuffer(data, dtype="<i8", count=size - 1, offset=pos)
            pos += 8 * (size - 1)
        except (struct.error, ValueError, UnicodeDecodeError) as exc:
            raise ValueError(f"truncated or corrupt codebook file: {exc}") from exc
        if pos != len(data) or den <= 0:
            raise ValueError("corrupt codebook file")
        cb = cls(tuple(Fraction(int(v), den) for v in levels), source=label)
        if not np.array_equal(cb.scaled_thresholds * (den // cb.denominator), thr):
            raise ValueError("codebook thresholds inconsistent with levels")
        return cb


def quantize(x, cb: QuantCodebook) -> tuple[int, Fraction]:
    """Nearest level to a scalar ``x``; ties go to the lower index."""
    i = bisect.bisect_left(cb.thresholds, _as_fraction(x))
    return i, cb.levels[i]


def _prefix_sums(pmf: DiscretePmf):
    w, den = pmf.integer_weights()
    s0, s1, s2 = [0], [0], [0]
    for x, wi in zip(pmf.support, w):
        s0.append(s0[-1] + wi)
        s1.append(s1[-1] + wi * x)
        s2.append(s2[-1] + wi * x * x)
    return s0, s1, s2, den


def _cell_cost(sums, a: int, b: int) -> Fraction:
    """Weighted squared error of support slice ``[a, b)`` around its mean (unnormalised)."""
    s0, s1, s2, _ = sums
    w = s0[b] - s0[a]
    m1 = s1[b] - s1[a]
    return Fraction((s2[b] - s2[a]) * w - m1 * m1, w)


def _initial_levels(pmf: DiscretePmf, size: int) -> list[Fraction]:
    # Centres of `size` equal-width cells tiling [x_min - 1/2, x_max + 1/2].
    lo, hi = pmf.support[0], pmf.support[-1]
    width = hi - lo + 1
    return [lo + Fraction((2 * i + 1) * width, 2 * size) - Fraction(1, 2) for i in range(size)]


def lloyd_max(pmf: DiscretePmf, size: int, init: list | None = None) -> QuantCodebook:
    """MMSE codebook of ``size`` levels by the Lloyd-Max iteration.

    Alternates midpoint thresholds and conditional-mean levels until the
    cell assignment of the support stops changing. The default starting
    levels are the centres of equal-width cells over the source range; pass
    ``init`` to override. Cells that end up empty are dropped.
    """
    if size < 1:
        raise ValueError("codebook size must be >= 1")
    if size > len(pmf.support):
        raise ValueError(f"codebook size {size} exceeds support size {len(pmf.support)}")
    sums = _prefix_sums(pmf)
    s0, s1 = sums[0], sums[1]
    xs = pmf.support
    levels = [_as_fraction(v) for v in (init if init is not None else _initial_levels(pmf, size))]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("initial levels must be strictly increasing")
    dropped = 0
    trace = []
    bounds = None
    for _ in range(_LLOYD_MAX_ITER):
        cuts = [
            bisect.bisect_right(xs, math.floor((a + b) / 2)) for a, b in zip(levels, levels[1:])
        ]
        new_bounds = [0] + cuts + [len(xs)]
        if new_bounds == bounds:
            break
        bounds = new_bounds
        levels, kept = [], [0]
        cost = Fraction(0)
        for a, b in zip(bounds, bounds[1:]):
            w = s0[b] - s0[a]
            if w == 0:
                dropped += 1
                continue
            levels.append(Fraction(s1[b] - s1[a], w))
            kept.append(b)
            cost += _cell_cost(sums, a, b)
        mse = cost / sums[3]
        assert not trace or mse <= trace[-1], "Lloyd-Max MSE increased"
        trace.append(mse)
        bounds = kept if dropped else bounds
    else:
        raise RuntimeError("Lloyd-Max did not converge")
    return QuantCodebook(tuple(levels), source=pmf.label, dropped_levels=dropped,
                         mse_trace=tuple(trace))


def dp_optimal_quantizer(pmf: DiscretePmf, size: int, max_work: int = DP_MAX_WORK) -> QuantCodebook:
    """Globally MSE-optimal codebook by dynamic programming over contiguous cells.

    Exhaustive over all partitions of the support into ``size`` intervals,
    O(|support|^2 * size). Meant as a test oracle for small sources.
    """
    m = len(pmf.support)
    if size < 1 or size > m:
        raise ValueError(f"need 1 <= size <= {m}")
    if m * m * size > max_work:
        raise ResourceLimitError(f"DP over {m} points x {size} cells exceeds the work budget")
    sums = _prefix_sums(pmf)
    cost = [[None] * (m + 1) for _ in range(m + 1)]
    for a in range(m):
        for b in range(a + 1, m + 1):
            cost[a][b] = _cell_cost(sums, a, b)
    best = [Fraction(0)] + [None] * m
    back = [[0] * (m + 1) for _ in range(size + 1)]
    for cells in range(1, size + 1):
        nxt = [None] * (m + 1)
        for b in range(cells, m + 1):
            choice = None
            for a in range(cells - 1, b):
                if best[a] is None:
                    continue
                c = best[a] + cost[a][b]
                if choice is None or c < choice:
                    choice, back[cells][b] = c, a
            nxt[b] = choice
        best = nxt
    cuts = [m]
    for cells in range(size, 0, -1):
        cuts.append(back[cells][cuts[-1]])
    cuts.reverse()
    s0, s1 = sums[0], sums[1]
    levels = tuple(Fraction(s1[b] - s1[a], s0[b] - s0[a]) for a, b in zip(cuts, cuts[1:]))
    return QuantCodebook(levels, source=pmf.label)


def codebook_mse(cb: QuantCodebook, pmf: DiscretePmf) -> Fraction:
    """``E[(x - Q(x))^2]`` under ``pmf``."""
    return error_pmf(cb, pmf).mse()


def error_pmf(cb: QuantCodebook, pmf: DiscretePmf) -> ErrorPmf:
    """Exact distribution of ``x - Q(x)`` for ``x ~ pmf``."""
    idx = cb.indices(np.array(pmf.support, dtype=np.int64))
    counts: dict[Fraction, Fraction] = {}
    for x, p, i in zip(pmf.support, pmf.probs, idx):
        e = x - cb.levels[int(i)]
        counts[e] = counts.get(e, Fraction(0)) + p
    return ErrorPmf.from_counts(counts, 1)


def compress_error(x, d: int, q: int = Q):
    """Centered rounding error ``x - decompress(compress(x))`` mod q."""
    x = np.mod(np.asarray(x, dtype=np.int64), q)
    e = np.mod(x - decompress(compress(x, d, q), d, q), q)
    return np.where(e > q // 2, e - q, e)


def error_pmf_compress(d: int, q: int = Q) -> ErrorPmf:
    """Exact rounding-error distribution of Kyber compression for uniform x in Z_q."""
    vals, counts = np.unique(compress_error(np.arange(q), d, q), return_counts=True)
    return ErrorPmf.from_counts({int(v): int(c) for v, c in zip(vals, counts)}, q)


_UNIFORM_CODEBOOKS: dict[tuple[int, int], QuantCodebook] = {}


def uniform_codebook(q: int, size: int) -> QuantCodebook:
    """Lloyd-Max codebook for the uniform source on Z_q (memoised)."""
    cb = _UNIFORM_CODEBOOKS.get((q, size))
    if cb is None:
        cb = _UNIFORM_CODEBOOKS[(q, size)] = lloyd_max(DiscretePmf.uniform(q), size)
    return cb


def is_fixed_point(cb: QuantCodebook, pmf: DiscretePmf) -> bool:
    """True when every level is the conditional mean of its (non-empty) cell."""
    sums = _prefix_sums(pmf)
    s0, s1 = sums[0], sums[1]
    cuts = [0, *np.searchsorted(np.array(pmf.support, dtype=np.int64) * 2 * cb.denominator,
                                cb.scaled_thresholds, side="right"), len(pmf.support)]
    for level, a, b in zip(cb.levels, cuts, cuts[1:]):
        if s0[b] == s0[a] or Fraction(s1[b] - s1[a], s0[b] - s0[a]) != level:
            return False
    return True


def install_codebook(cb: QuantCodebook, q: int, size: int):
    """Use ``cb`` (e.g. loaded from disk) as the uniform-Z_q codebook of ``size`` levels.

    Raises ``ValueError`` unless it is a Lloyd-Max fixed point for that source.
    """
    if cb.size + cb.dropped_levels != size or cb.source != f"uniform-Z{q}":
        raise ValueError(f"codebook ({cb.source}, {cb.size} levels) is not for uniform Z_{q}, L={size}")
    if not is_fixed_point(cb, DiscretePmf.uniform(q)):
        raise ValueError("codebook is not a Lloyd-Max fixed point for its source")
    _UNIFORM_CODEBOOKS[(q, size)] = cb
