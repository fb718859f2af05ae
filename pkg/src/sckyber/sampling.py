"""Seed expansion: the uniform public matrix and centered-binomial noise.

Matrix entries come from SHAKE-128 over ``rho || j || i`` with rejection of
12-bit candidates ``>= q``; noise polynomials come from SHAKE-256 over
``sigma || nonce``. Outputs depend only on their inputs, so every key and
ciphertext can be reproduced from its seeds.
"""

from __future__ import annotations

import hashlib

import numpy as np

from sckyber.params import N, Q, SEED_BYTES

_XOF_BYTES = 840  # 560 candidates; at acceptance rate q/4096 falling short of 256 is ~2^-100


def check_seed(seed: bytes) -> bytes:
    seed = bytes(seed)
    if len(seed) != SEED_BYTES:
        raise ValueError(f"seed must be {SEED_BYTES} bytes, got {len(seed)}")
    return seed


def _parse_uniform(buf: bytes) -> np.ndarray | None:
    b = np.frombuffer(buf, dtype=np.uint8).astype(np.int64)
    b = b[: len(b) - len(b) % 3].reshape(-1, 3)
    d1 = b[:, 0] | ((b[:, 1] & 0x0F) << 8)
    d2 = (b[:, 1] >> 4) | (b[:, 2] << 4)
    cand = np.stack([d1, d2], axis=1).ravel()
    cand = cand[cand < Q]
    if len(cand) < N:
        return None
    return cand[:N]


def sample_uniform(rho: bytes, i: int, j: int) -> np.ndarray:
    """Entry ``(i, j)`` of the public matrix."""
    xof = hashlib.shake_128(check_seed(rho) + bytes([j, i]))
    size = _XOF_BYTES
    while True:
        poly = _parse_uniform(xof.digest(size))
        if poly is not None:
            return poly
        size *= 2


def expand_matrix(rho: bytes, k: int) -> np.ndarray:
    """The ``k x k`` public matrix, shape ``(k, k, n)``."""
    rho = check_seed(rho)
    return np.stack(
        [np.stack([sample_uniform(rho, i, j) for j in range(k)]) for i in range(k)]
    )


def _cbd_from_bytes(buf: bytes, eta: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    bits = bits.reshape(N, 2, eta).astype(np.int64).sum(axis=-1)
    return bits[:, 0] - bits[:, 1]


def cbd_signed(sigma: bytes, nonce: int, eta: int) -> np.ndarray:
    """Centered-binomial coefficients in ``[-eta, eta]`` as signed integers."""
    if not 1 <= eta <= 8:
        raise ValueError(f"unsupported CBD width eta={eta}")
    if not 0 <= nonce < 256:
        raise ValueError("nonce must fit in one byte")
    buf = hashlib.shake_256(check_seed(sigma) + bytes([nonce])).digest(64 * eta)
    return _cbd_from_bytes(buf, eta)


def cbd(sigma: bytes, nonce: int, eta: int) -> np.ndarray:
    """Centered-binomial polynomial reduced into ``[0, q)``."""
    return cbd_signed(sigma, nonce, eta) % Q


def cbd_vector(sigma: bytes, first_nonce: int, count: int, eta: int) -> np.ndarray:
    """``count`` signed CBD polynomials with consecutive nonces, shape ``(count, n)``."""
    return np.stack([cbd_signed(sigma, first_nonce + i, eta) for i in range(count)])


# Batched variants: one row per seed, digests gathered first and parsed in numpy.


_BATCH_XOF_BYTES = 576  # 384 candidates; a row comes up short with probability ~1e-13


def _uniform_rows(inputs: list[bytes]) -> np.ndarray:
    # Parses a prefix of each XOF stream; short rows are redone by
    # sample_uniform, which reads the same stream, so results are identical.
    buf = b"".join(hashlib.shake_128(x).digest(_BATCH_XOF_BYTES) for x in inputs)
    b = np.frombuffer(buf, dtype=np.uint8).reshape(len(inputs), -1, 3).astype(np.int32)
    cand = np.empty(b.shape[:2] + (2,), dtype=np.int32)
    cand[..., 0] = b[..., 0] | ((b[..., 1] & 0x0F) << 8)
    cand[..., 1] = (b[..., 1] >> 4) | (b[..., 2] << 4)
    cand = cand.reshape(len(inputs), -1)
    ok = cand < Q
    counts = ok.sum(axis=-1)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    flat = cand[ok]
    rows = flat[np.minimum(starts[:, None] + np.arange(N), len(flat) - 1)].astype(np.int64)
    for r in np.flatnonzero(counts < N):
        seed, (j, i) = inputs[r][:SEED_BYTES], inputs[r][SEED_BYTES:]
        rows[r] = sample_uniform(seed, i, j)
    return rows


def expand_matrix_many(rhos: list[bytes], k: int) -> np.ndarray:
    """:func:`expand_matrix` for several seeds, shape ``(len(rhos), k, k, n)``."""
    inputs = [check_seed(r) + bytes([j, i]) for r in rhos for i in range(k) for j in range(k)]
    return _uniform_rows(inputs).reshape(len(rhos), k, k, N)


def cbd_vector_many(sigmas: list[bytes], first_nonce: int, count: int, eta: int) -> np.ndarray:
    """:func:`cbd_vector` for several seeds, shape ``(len(sigmas), count, n)``."""
    if not 1 <= eta <= 8:
        raise ValueError(f"unsupported CBD width eta={eta}")
    if first_nonce < 0 or first_nonce + count > 256:
        raise ValueError("nonce must fit in one byte")
    buf = b"".join(
        hashlib.shake_256(check_seed(s) + bytes([first_nonce + i])).digest(64 * eta)
        for s in sigmas
        for i in range(count)
    )
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    bits = bits.reshape(len(sigmas), count, N, 2, eta).sum(axis=-1, dtype=np.int64)
    return bits[..., 0] - bits[..., 1]
