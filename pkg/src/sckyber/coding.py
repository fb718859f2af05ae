"""Plaintext encoding for semi-compressed Kyber: BCH code, Gray mapping, p-PAM.

``enc_pipeline`` turns K message bits into n symbols of Z_p: a systematic,
shortened binary BCH codeword whose bits are grouped log2(p) at a time and
Gray-mapped to PAM symbols. ``dec_pipeline`` rounds noisy scaled
observations back to symbols, demaps and BCH-decodes.

Bit conventions (pinned by tests):

* a codeword is ``message bits || parity bits``; bit ``j`` of an ``N``-bit
  word is the coefficient of ``x^(N-1-j)``;
* within a symbol the first bit is the most significant bit of its Gray label.

GF(2) polynomials are Python ints (bit i = coefficient of x^i).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from sckyber.errors import BchDecodingError
from sckyber.params import CodeSpec

PRIMITIVE_POLYS = {
    2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89,
    8: 0x11D, 9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053,
}


class GF2m:
    """GF(2^m) with log/antilog tables over a primitive modulus."""

    def __init__(self, m: int, modulus: int | None = None):
        if modulus is None:
            modulus = PRIMITIVE_POLYS[m]
        if modulus.bit_length() != m + 1:
            raise ValueError(f"modulus must have degree {m}")
        self.m = m
        self.modulus = modulus
        self.order = (1 << m) - 1
        exp = [0] * (2 * self.order)
        log = [-1] * (1 << m)
        x = 1
        for i in range(self.order):
            if log[x] != -1:
                raise ValueError(f"modulus {modulus:#x} is not primitive")
            exp[i] = x
            log[x] = i
            x <<= 1
            if x >> m:
                x ^= modulus
        if x != 1:
            raise ValueError(f"modulus {modulus:#x} is not primitive")
        exp[self.order:] = exp[: self.order]
        self.exp = exp
        self.log = log
        self.exp_np = np.array(exp, dtype=np.int64)

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero in GF(2^m)")
        return self.exp[self.order - self.log[a]]

    def power(self, e: int) -> int:
        """alpha^e."""
        return self.exp[e % self.order]

    def cyclotomic_coset(self, i: int) -> list[int]:
        coset, e = [], i % self.order
        while e not in coset:
            coset.append(e)
            e = (2 * e) % self.order
        return coset

    def minimal_polynomial(self, i: int) -> int:
        """Minimal polynomial of alpha^i over GF(2), as a bitmask."""
        poly = [1]  # coefficients in GF(2^m), lowest degree first
        for e in self.cyclotomic_coset(i):
            root = self.power(e)
            nxt = [0] * (len(poly) + 1)
            for d, c in enumerate(poly):
                nxt[d + 1] ^= c
                nxt[d] ^= self.mul(c, root)
            poly = nxt
        assert all(c in (0, 1) for c in poly)
        return sum(c << d for d, c in enumerate(poly))


def gf2_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def gf2_mod(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a.bit_length() - 1 >= dg:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


class BchCode:
    """Narrow-sense binary BCH code, shortened to ``spec.length`` bits."""

    def __init__(self, spec: CodeSpec, modulus: int | None = None):
        self.spec = spec
        self.field = gf = GF2m(spec.m, modulus)
        g, used = 1, set()
        for i in range(1, 2 * spec.t + 1):
            rep = min(gf.cyclotomic_coset(i))
            if rep not in used:
                used.add(rep)
                g = gf2_mul(g, gf.minimal_polynomial(i))
        self.generator = g
        r = g.bit_length() - 1
        if r != spec.redundancy:
            raise ValueError(
                f"generator degree {r} does not give {spec}: "
                f"parent code would be ({spec.parent_length},{spec.parent_length - r})"
            )
        n, k = spec.length, spec.dimension
        # Parity rows: x^(r + K-1-j) mod g for message bit j.
        parity = np.zeros((k, r), dtype=np.uint8)
        acc = gf2_mod(1 << r, g)
        for j in range(k - 1, -1, -1):
            parity[j] = [(acc >> (r - 1 - c)) & 1 for c in range(r)]
            acc = gf2_mod(acc << 1, g)
        self._parity = parity.astype(np.float64)
        # Syndrome j (1..2t) at position i is alpha^(j * (N-1-i)); stored as bit planes.
        powers = np.arange(n - 1, -1, -1, dtype=np.int64)
        js = np.arange(1, 2 * spec.t + 1, dtype=np.int64)
        table = gf.exp_np[np.outer(powers, js) % gf.order]  # (N, 2t)
        planes = (table[:, :, None] >> np.arange(spec.m)) & 1  # (N, 2t, m)
        self._syndrome_planes = planes.reshape(n, -1).astype(np.float64)
        self._positions = powers

    @property
    def n(self) -> int:
        return self.spec.length

    @property
    def k(self) -> int:
        return self.spec.dimension

    @property
    def t(self) -> int:
        return self.spec.t

    def generator_bits(self) -> list[int]:
        """Generator coefficients, highest degree first."""
        g = self.generator
        return [(g >> i) & 1 for i in range(g.bit_length() - 1, -1, -1)]

    def encode_many(self, msgs) -> np.ndarray:
        msgs = np.asarray(msgs, dtype=np.uint8)
        if msgs.shape[-1] != self.k:
            raise ValueError(f"message must have {self.k} bits, got {msgs.shape[-1]}")
        if np.any(msgs > 1):
            raise ValueError("message bits must be 0/1")
        par = (msgs.astype(np.float64) @ self._parity).astype(np.int64) & 1
        return np.concatenate([msgs, par.astype(np.uint8)], axis=-1)

    def syndromes_many(self, words) -> np.ndarray:
        """Syndromes S_1..S_2t for words of shape ``(..., N)``."""
        words = np.asarray(words, dtype=np.float64)
        planes = (words @ self._syndrome_planes).astype(np.int64) & 1
        planes = planes.reshape(planes.shape[:-1] + (2 * self.t, self.spec.m))
        return (planes << np.arange(self.spec.m)).sum(axis=-1)

    def _berlekamp_massey(self, synd) -> list[int]:
        """Error locator from 2t syndromes; fixed 2t iterations."""
        gf = self.field
        t2 = 2 * self.t
        c = [1] + [0] * t2
        b = [1] + [0] * t2
        length, shift, last = 0, 1, 1
        for r in range(t2):
            d = synd[r]
            # Every iteration does the same number of field operations.
            for i in range(1, t2 + 1):
                d ^= gf.mul(c[i], synd[r - i] if i <= r else 0)
            coef = gf.mul(d, gf.inv(last))
            upd = c[:]
            for i in range(t2 + 1):
                j = i - shift
                upd[i] ^= gf.mul(coef, b[j] if j >= 0 else 0)
            grow = d != 0 and 2 * length <= r
            if grow:
                b, c = c, upd
                length, last, shift = r + 1 - length, d, 1
            else:
                c = upd
                shift += 1
        return c[: length + 1] if length <= self.t else c

    def _chien(self, locator) -> np.ndarray:
        """Locator evaluated at alpha^(-e) for every codeword position."""
        gf = self.field
        acc = np.zeros(self.n, dtype=np.int64)
        for j in range(self.t + 1):
            cj = locator[j] if j < len(locator) else 0
            term = gf.exp_np[(gf.log[cj] - j * self._positions) % gf.order] if cj else 0
            acc ^= term
        return acc == 0

    def decode(self, word) -> tuple[np.ndarray, int]:
        """Correct up to t bit errors; returns ``(message bits, errors corrected)``.

        Raises :class:`BchDecodingError` when the received word is not within
        distance t of a codeword of the shortened code.
        """
        word = np.asarray(word, dtype=np.uint8)
        if word.shape != (self.n,):
            raise ValueError(f"received word must have {self.n} bits")
        synd = [int(s) for s in self.syndromes_many(word)]
        locator = self._berlekamp_massey(synd)
        degree = len(locator) - 1
        roots = self._chien(locator)
        found = int(roots.sum())
        if degree > self.t or found != degree:
            raise BchDecodingError(
                f"uncorrectable word: locator degree {degree}, {found} roots in range"
            )
        fixed = word ^ roots.astype(np.uint8)
        return fixed[: self.k].copy(), found


@functools.lru_cache(maxsize=None)
def bch_code(spec: CodeSpec) -> BchCode:
    return BchCode(spec)


def bch_encode(m, code: BchCode) -> np.ndarray:
    m = np.asarray(m, dtype=np.uint8)
    if m.shape != (code.k,):
        raise ValueError(f"message must have exactly {code.k} bits")
    return code.encode_many(m)


def bch_decode(r, code: BchCode) -> tuple[np.ndarray, int]:
    return code.decode(r)


# ---------------------------------------------------------------------------
# Gray mapping and PAM


def _bits_per_symbol(p: int) -> int:
    if p < 2 or p & (p - 1):
        raise ValueError(f"p={p} must be a power of two >= 2")
    return p.bit_length() - 1


def gray_encode(s):
    s = np.asarray(s, dtype=np.int64)
    return s ^ (s >> 1)


def gray_decode(g, bits: int):
    g = np.asarray(g, dtype=np.int64)
    s = g.copy()
    shift = 1
    while shift < bits:
        s ^= s >> shift
        shift *= 2
    return s


def gray_map(bits, p: int) -> np.ndarray:
    """Groups of log2(p) bits (MSB first) to PAM symbols in [0, p)."""
    b = _bits_per_symbol(p)
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % b:
        raise ValueError(f"bit length {bits.shape[-1]} is not a multiple of log2(p)={b}")
    groups = bits.reshape(bits.shape[:-1] + (-1, b))
    labels = (groups << np.arange(b - 1, -1, -1)).sum(axis=-1)
    return gray_decode(labels, b)


def gray_demap(symbols, p: int) -> np.ndarray:
    b = _bits_per_symbol(p)
    symbols = np.asarray(symbols, dtype=np.int64)
    if np.any((symbols < 0) | (symbols >= p)):
        raise ValueError("symbol out of range")
    labels = gray_encode(symbols)
    bits = (labels[..., None] >> np.arange(b - 1, -1, -1)) & 1
    return bits.reshape(symbols.shape[:-1] + (-1,)).astype(np.uint8)


def symbols_from_scaled(y_scaled, scale: int, p: int) -> np.ndarray:
    """``round(y) mod p`` (ties up) for ``y = y_scaled / scale`` given as integers."""
    y_scaled = np.asarray(y_scaled, dtype=np.int64)
    return ((2 * y_scaled + scale) // (2 * scale)) % p


@dataclass(frozen=True)
class Encoder:
    """Encoder and decoder pair for one BCH code and PAM order."""

    spec: CodeSpec
    p: int

    def __post_init__(self):
        if self.spec.length % _bits_per_symbol(self.p):
            raise ValueError("code length must be a multiple of log2(p)")

    @property
    def code(self) -> BchCode:
        return bch_code(self.spec)

    @property
    def symbols(self) -> int:
        return self.spec.length // _bits_per_symbol(self.p)

    def encode(self, m) -> np.ndarray:
        return gray_map(bch_encode(m, self.code), self.p)

    def encode_many(self, msgs) -> np.ndarray:
        """Symbol words for messages stacked along the leading axes."""
        return gray_map(self.code.encode_many(msgs), self.p)

    def decode_symbols(self, symbols) -> tuple[np.ndarray, int]:
        return bch_decode(gray_demap(symbols, self.p), self.code)

    def decode(self, y) -> np.ndarray:
        """DEC(y) for exact observations ``y`` (ints or Fractions)."""
        ys = [Fraction(v) for v in y]
        if len(ys) != self.symbols:
            raise ValueError(f"expected {self.symbols} observations")
        den = 1
        for v in ys:
            den = den * v.denominator // np.gcd(den, v.denominator)
        scaled = np.array([int(v * den) for v in ys], dtype=np.int64)
        return self.decode_symbols(symbols_from_scaled(scaled, den, self.p))[0]


def enc_pipeline(m, spec: CodeSpec, p: int) -> np.ndarray:
    return Encoder(spec, p).encode(m)


def dec_pipeline(y, spec: CodeSpec, p: int) -> np.ndarray:
    return Encoder(spec, p).decode(y)
