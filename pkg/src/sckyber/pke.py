"""CPA public-key encryption in three flavours.

* ``ORIGINAL``: Kyber compression of both ciphertext parts.
* ``LLOYD_MAX``: the same ciphertext sizes, but each coefficient is replaced by
  the index of its nearest Lloyd-Max level (codebooks for uniform Z_q).
* ``SEMI_COMPRESSED``: only ``u`` is Lloyd-Max quantized; ``v`` is sent raw and
  carries ``K`` message bits as BCH-coded, Gray-mapped p-PAM symbols.

Decryption reconstructs every coefficient as an integer multiple of ``1/D``
(``D`` the common level denominator) and runs ``v - s^T u`` exactly modulo
``D q``; no floating point touches the decision.

The ``*_arrays`` functions work on stacked trials (leading batch axis) and are
what the simulations use; the key/ciphertext classes wrap single instances.
"""

from __future__ import annotations

import functools
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from sckyber import ring
from sckyber.coding import Encoder
from sckyber.params import RAW_BITS, SEED_BYTES, ParamSet, Variant
from sckyber.quantization import compress, decompress, uniform_codebook
from sckyber.sampling import cbd_vector_many, check_seed, expand_matrix_many

# ---------------------------------------------------------------------------
# Bit packing: fixed-width values, least-significant bit first, little-endian bytes


def pack_bits(values, width: int) -> bytes:
    values = np.asarray(values, dtype=np.int64).ravel()
    if np.any((values < 0) | (values >= 1 << width)):
        raise ValueError(f"value does not fit in {width} bits")
    bits = ((values[:, None] >> np.arange(width)) & 1).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_bits(data: bytes, width: int, count: int) -> np.ndarray:
    if len(data) != (width * count + 7) // 8:
        raise ValueError(f"expected {(width * count + 7) // 8} bytes, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    bits = bits[: width * count].reshape(count, width).astype(np.int64)
    return (bits << np.arange(width)).sum(axis=-1)


# ---------------------------------------------------------------------------
# Keys and ciphertexts


@dataclass(frozen=True, eq=False)
class PublicKey:
    t: np.ndarray  # (k, n), reduced mod q
    rho: bytes

    def __eq__(self, other):
        if not isinstance(other, PublicKey):
            return NotImplemented
        return self.rho == other.rho and np.array_equal(self.t, other.t)

    def to_bytes(self) -> bytes:
        return pack_bits(self.t, RAW_BITS) + self.rho

    @classmethod
    def from_bytes(cls, data: bytes, ps: ParamSet) -> PublicKey:
        if len(data) != ps.public_key_bytes:
            raise ValueError(f"public key must be {ps.public_key_bytes} bytes, got {len(data)}")
        t = unpack_bits(data[:-SEED_BYTES], RAW_BITS, ps.k * ps.n).reshape(ps.k, ps.n)
        if np.any(t >= ps.q):
            raise ValueError("public key coefficient out of range")
        return cls(t, bytes(data[-SEED_BYTES:]))


@dataclass(frozen=True, eq=False)
class SecretKey:
    s: np.ndarray  # (k, n), signed CBD values

    def __eq__(self, other):
        if not isinstance(other, SecretKey):
            return NotImplemented
        return np.array_equal(self.s, other.s)

    def to_bytes(self, q: int) -> bytes:
        return pack_bits(np.mod(self.s, q), RAW_BITS)

    @classmethod
    def from_bytes(cls, data: bytes, ps: ParamSet) -> SecretKey:
        if len(data) != ps.secret_key_bytes:
            raise ValueError(f"secret key must be {ps.secret_key_bytes} bytes, got {len(data)}")
        s = unpack_bits(data, RAW_BITS, ps.k * ps.n).reshape(ps.k, ps.n)
        if np.any(s >= ps.q):
            raise ValueError("secret key coefficient out of range")
        return cls(ring.centered(s, ps.q))


@dataclass(frozen=True, eq=False)
class Ciphertext:
    """``u`` holds ``k x n`` quantizer indices; ``v`` holds ``n`` indices or raw coefficients."""

    variant: Variant
    u: np.ndarray
    v: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Ciphertext):
            return NotImplemented
        return (
            self.variant is other.variant
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )

    def to_bytes(self, ps: ParamSet) -> bytes:
        _check_variant(ps, self.variant)
        return pack_bits(self.u, ps.d_u) + pack_bits(self.v, ps.d_v)

    @classmethod
    def from_bytes(cls, data: bytes, ps: ParamSet) -> Ciphertext:
        if len(data) != ps.ciphertext_bytes:
            raise ValueError(f"ciphertext must be {ps.ciphertext_bytes} bytes, got {len(data)}")
        # Both parts are whole bytes for every supported width since n = 256.
        split = ps.k * ps.n * ps.d_u // 8
        u = unpack_bits(data[:split], ps.d_u, ps.k * ps.n).reshape(ps.k, ps.n)
        v = unpack_bits(data[split:], ps.d_v, ps.n)
        codec = codec_for(ps)
        if np.any(u >= codec.u_levels) or np.any(v >= codec.v_levels):
            raise ValueError("ciphertext index out of range")
        return cls(ps.variant, u, v)


def _check_variant(ps: ParamSet, variant: Variant):
    if ps.variant is not variant:
        raise ValueError(f"{ps.name} is a {ps.variant.value} set, not {variant.value}")


# ---------------------------------------------------------------------------
# Per-variant quantization of the two ciphertext parts


class Codec:
    """Maps raw ``u``/``v`` coefficients to transmitted values and back.

    ``restore_*`` return reconstructions multiplied by :attr:`denominator`,
    so they are exact integers.
    """

    def __init__(self, ps: ParamSet):
        self.ps = ps
        q = ps.q
        if ps.variant is Variant.ORIGINAL:
            self._u_cb = self._v_cb = None
            self.u_levels, self.v_levels = 1 << ps.d_u, 1 << ps.d_v
            self.denominator = 1
        else:
            self._u_cb = uniform_codebook(q, 1 << ps.d_u)
            self.u_levels = self._u_cb.size
            if ps.variant is Variant.LLOYD_MAX:
                self._v_cb = uniform_codebook(q, 1 << ps.d_v)
                self.v_levels = self._v_cb.size
                self.denominator = math.lcm(self._u_cb.denominator, self._v_cb.denominator)
            else:
                self._v_cb = None
                self.v_levels = q
                self.denominator = self._u_cb.denominator

    def quantize_u(self, x) -> np.ndarray:
        if self._u_cb is None:
            return compress(x, self.ps.d_u, self.ps.q)
        return self._u_cb.indices(x)

    def quantize_v(self, x) -> np.ndarray:
        if self.ps.variant is Variant.ORIGINAL:
            return compress(x, self.ps.d_v, self.ps.q)
        if self._v_cb is None:
            return np.mod(np.asarray(x, dtype=np.int64), self.ps.q)
        return self._v_cb.indices(x)

    def _restore(self, idx, cb, d):
        idx = np.asarray(idx, dtype=np.int64)
        if cb is None:
            return self.denominator * (decompress(idx, d, self.ps.q) if d else idx)
        return (self.denominator // cb.denominator) * cb.scaled_levels[idx]

    def restore_u(self, idx) -> np.ndarray:
        return self._restore(idx, self._u_cb, self.ps.d_u)

    def restore_v(self, idx) -> np.ndarray:
        d = self.ps.d_v if self.ps.variant is Variant.ORIGINAL else 0
        return self._restore(idx, self._v_cb, d)


@functools.lru_cache(maxsize=None)
def codec_for(ps: ParamSet) -> Codec:
    return Codec(ps)


def message_scale(ps: ParamSet) -> int:
    """``round(q / p)`` with ties up: 1665 for p = 2, 416 for p = 8."""
    return (2 * ps.q + ps.p) // (2 * ps.p)


# ---------------------------------------------------------------------------
# Batched core


def split_seed(seed: bytes) -> tuple[bytes, bytes]:
    """Public seed ``rho`` and noise seed ``sigma`` from one 32-byte key seed."""
    h = hashlib.sha3_512(check_seed(seed)).digest()
    return h[:SEED_BYTES], h[SEED_BYTES:]


def keygen_arrays(ps: ParamSet, seeds: list[bytes]):
    """Returns ``(rhos, A, t, s, e)`` with a leading batch axis."""
    rhos, sigmas = zip(*(split_seed(x) for x in seeds))
    A = expand_matrix_many(list(rhos), ps.k)
    s = cbd_vector_many(list(sigmas), 0, ps.k, ps.eta1)
    e = cbd_vector_many(list(sigmas), ps.k, ps.k, ps.eta1)
    t = ring.poly_add(ring.matvec(A, s), e)
    return list(rhos), A, t, s, e


def sample_coins(ps: ParamSet, coins: list[bytes]):
    """``(r, e1, e2)`` for each coin seed; ``e2`` has shape ``(batch, n)``."""
    r = cbd_vector_many(coins, 0, ps.k, ps.eta1)
    e1 = cbd_vector_many(coins, ps.k, ps.k, ps.eta2)
    e2 = cbd_vector_many(coins, 2 * ps.k, 1, ps.eta2)[:, 0]
    return r, e1, e2


def raw_ciphertext(ps: ParamSet, A, t, r, e1, e2, payload):
    """Unquantized ``(A^T r + e1, t^T r + e2 + round(q/p) * payload)``."""
    u = ring.poly_add(ring.matvec_t(A, r), e1)
    v = ring.reduce(ring.inner_product(t, r) + e2 + message_scale(ps) * np.asarray(payload))
    return u, v


def encrypt_arrays(ps: ParamSet, A, t, r, e1, e2, payload):
    codec = codec_for(ps)
    u, v = raw_ciphertext(ps, A, t, r, e1, e2, payload)
    return codec.quantize_u(u), codec.quantize_v(v)


def decode_arrays(ps: ParamSet, s, u_idx, v_part) -> np.ndarray:
    """``D * (v - s^T u) mod D q`` from transmitted values, exactly."""
    codec = codec_for(ps)
    mod = codec.denominator * ps.q
    w = codec.restore_v(v_part) - ring.inner_product_int(s, codec.restore_u(u_idx))
    return np.mod(w, mod)


def decide_symbols(ps: ParamSet, y_scaled) -> np.ndarray:
    """Symbol decisions from ``D``-scaled decoding values.

    For p = 2 this is ``Compress_q(y, 1)``; for larger p it is
    ``round(y / round(q/p)) mod p``. Ties round up in both.
    """
    den = codec_for(ps).denominator
    y = np.asarray(y_scaled, dtype=np.int64)
    if ps.variant is Variant.SEMI_COMPRESSED:
        step = den * message_scale(ps)
        return ((2 * y + step) // (2 * step)) % ps.p
    dq = den * ps.q
    return ((4 * y + dq) // (2 * dq)) % 2


# ---------------------------------------------------------------------------
# Public API


def keygen(ps: ParamSet, seed: bytes) -> tuple[PublicKey, SecretKey]:
    rhos, _, t, s, _ = keygen_arrays(ps, [seed])
    return PublicKey(t[0], rhos[0]), SecretKey(s[0])


def _message_array(m, length: int) -> np.ndarray:
    m = np.asarray(m, dtype=np.int64)
    if m.shape != (length,):
        raise ValueError(f"message must have exactly {length} bits, got shape {m.shape}")
    if np.any((m < 0) | (m > 1)):
        raise ValueError("message bits must be 0 or 1")
    return m


def _encrypt(pk: PublicKey, payload, coins: bytes, ps: ParamSet) -> Ciphertext:
    if pk.t.shape != (ps.k, ps.n):
        raise ValueError("public key does not match the parameter set")
    A = expand_matrix_many([pk.rho], ps.k)
    r, e1, e2 = sample_coins(ps, [check_seed(coins)])
    u, v = encrypt_arrays(ps, A, pk.t[None], r, e1, e2, payload[None])
    return Ciphertext(ps.variant, u[0], v[0])


def _decode(sk: SecretKey, ct: Ciphertext, ps: ParamSet, variant: Variant) -> np.ndarray:
    _check_variant(ps, variant)
    if ct.variant is not variant:
        raise ValueError(f"ciphertext is {ct.variant.value}, expected {variant.value}")
    y = decode_arrays(ps, sk.s, ct.u, ct.v)
    return decide_symbols(ps, y)


def encrypt_original(pk: PublicKey, m, coins: bytes, ps: ParamSet) -> Ciphertext:
    _check_variant(ps, Variant.ORIGINAL)
    return _encrypt(pk, _message_array(m, ps.n), coins, ps)


def decrypt_original(sk: SecretKey, ct: Ciphertext, ps: ParamSet) -> np.ndarray:
    return _decode(sk, ct, ps, Variant.ORIGINAL).astype(np.uint8)


def encrypt_lm(pk: PublicKey, m, coins: bytes, ps: ParamSet) -> Ciphertext:
    _check_variant(ps, Variant.LLOYD_MAX)
    return _encrypt(pk, _message_array(m, ps.n), coins, ps)


def decrypt_lm(sk: SecretKey, ct: Ciphertext, ps: ParamSet) -> np.ndarray:
    return _decode(sk, ct, ps, Variant.LLOYD_MAX).astype(np.uint8)


def encrypt_sc(pk: PublicKey, m, coins: bytes, ps: ParamSet) -> Ciphertext:
    _check_variant(ps, Variant.SEMI_COMPRESSED)
    m = _message_array(m, ps.code.dimension)
    return _encrypt(pk, Encoder(ps.code, ps.p).encode(m), coins, ps)


def decrypt_sc(sk: SecretKey, ct: Ciphertext, ps: ParamSet) -> np.ndarray:
    """Raises :class:`~sckyber.errors.DecryptionFailure` when BCH decoding fails."""
    symbols = _decode(sk, ct, ps, Variant.SEMI_COMPRESSED)
    return Encoder(ps.code, ps.p).decode_symbols(symbols)[0]


_ENCRYPT = {
    Variant.ORIGINAL: encrypt_original,
    Variant.LLOYD_MAX: encrypt_lm,
    Variant.SEMI_COMPRESSED: encrypt_sc,
}
_DECRYPT = {
    Variant.ORIGINAL: decrypt_original,
    Variant.LLOYD_MAX: decrypt_lm,
    Variant.SEMI_COMPRESSED: decrypt_sc,
}


def encrypt(pk: PublicKey, m, coins: bytes, ps: ParamSet) -> Ciphertext:
    """Encrypt with whichever variant ``ps`` selects."""
    return _ENCRYPT[ps.variant](pk, m, coins, ps)


def decrypt(sk: SecretKey, ct: Ciphertext, ps: ParamSet) -> np.ndarray:
    return _DECRYPT[ps.variant](sk, ct, ps)
