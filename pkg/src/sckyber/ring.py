"""Arithmetic in R_q = Z_q[X]/(X^256 + 1).

Polynomials are numpy ``int64`` arrays whose last axis holds the 256
coefficients; a vector of polynomials has shape ``(..., k, 256)`` and a matrix
``(..., k, k, 256)``. Every function broadcasts over leading axes, so the same
code serves single operations and batched simulation.

Multiplication goes through the Kyber number-theoretic transform (incomplete,
down to 128 degree-one factors), applied as a matrix product derived from the
butterfly network. :func:`poly_mul_schoolbook` is the independent O(n^2)
reference it is tested against.
"""

from __future__ import annotations

import numpy as np

from sckyber.params import N, Q

ZETA = 17  # primitive 256-th root of unity mod 3329
_N_INV = pow(128, -1, Q)


def _bitrev7(i: int) -> int:
    return int(f"{i:07b}"[::-1], 2)


_ZETAS = np.array([pow(ZETA, _bitrev7(i), Q) for i in range(128)], dtype=np.int64)
_GAMMAS = np.array([pow(ZETA, 2 * _bitrev7(i) + 1, Q) for i in range(128)], dtype=np.int64)


def zero(*shape: int) -> np.ndarray:
    return np.zeros(shape + (N,), dtype=np.int64)


def reduce(a) -> np.ndarray:
    return np.mod(np.asarray(a, dtype=np.int64), Q)


def centered(a, modulus: int = Q) -> np.ndarray:
    """Representatives in ``(-modulus/2, modulus/2]``."""
    a = np.mod(np.asarray(a, dtype=np.int64), modulus)
    return np.where(a > modulus // 2, a - modulus, a)


def poly_add(a, b) -> np.ndarray:
    return np.mod(np.add(a, b, dtype=np.int64), Q)


def poly_sub(a, b) -> np.ndarray:
    return np.mod(np.subtract(a, b, dtype=np.int64), Q)


def ntt_butterfly(a) -> np.ndarray:
    """Forward transform by Cooley-Tukey butterflies (7 layers)."""
    f = np.array(a, dtype=np.int64, copy=True)
    batch = f.shape[:-1]
    i = 1
    length = 128
    while length >= 2:
        blocks = N // (2 * length)
        g = f.reshape(batch + (blocks, 2, length))
        z = _ZETAS[i:i + blocks].reshape((blocks, 1))
        t = (g[..., 1, :] * z) % Q
        lo = g[..., 0, :]
        g[..., 1, :] = (lo - t) % Q
        g[..., 0, :] = (lo + t) % Q
        i += blocks
        length //= 2
    return f


def intt_butterfly(f) -> np.ndarray:
    """Inverse transform by Gentleman-Sande butterflies."""
    a = np.array(f, dtype=np.int64, copy=True)
    batch = a.shape[:-1]
    i = 127
    length = 2
    while length <= 128:
        blocks = N // (2 * length)
        g = a.reshape(batch + (blocks, 2, length))
        z = _ZETAS[i - blocks + 1:i + 1][::-1].reshape((blocks, 1))
        lo = g[..., 0, :].copy()
        hi = g[..., 1, :]
        g[..., 0, :] = (lo + hi) % Q
        g[..., 1, :] = (z * ((hi - lo) % Q)) % Q
        i -= blocks
        length *= 2
    return (a * _N_INV) % Q


# Both transforms are linear maps on Z_q^256, so the batched fast path is a
# float64 matrix product. Inputs are reduced first: every dot product is below
# 256 * 3328^2 < 2^53 and therefore exact.
_NTT_MATRIX = ntt_butterfly(np.eye(N, dtype=np.int64)).astype(np.float64)
_INTT_MATRIX = intt_butterfly(np.eye(N, dtype=np.int64)).astype(np.float64)


def _linear_mod_q(a, matrix) -> np.ndarray:
    a = np.mod(np.asarray(a, dtype=np.int64), Q).astype(np.float64)
    return np.mod((a @ matrix).astype(np.int64), Q)


def ntt(a) -> np.ndarray:
    return _linear_mod_q(a, _NTT_MATRIX)


def intt(f) -> np.ndarray:
    return _linear_mod_q(f, _INTT_MATRIX)


def ntt_mul(fa, fb) -> np.ndarray:
    """Pointwise product in the NTT domain (128 products mod X^2 - gamma_i)."""
    fa = np.asarray(fa, dtype=np.int64)
    fb = np.asarray(fb, dtype=np.int64)
    a0, a1 = fa[..., 0::2], fa[..., 1::2]
    b0, b1 = fb[..., 0::2], fb[..., 1::2]
    c0 = (a0 * b0 + ((a1 * b1) % Q) * _GAMMAS) % Q
    c1 = (a0 * b1 + a1 * b0) % Q
    out = np.empty(np.broadcast_shapes(fa.shape, fb.shape), dtype=np.int64)
    out[..., 0::2] = c0
    out[..., 1::2] = c1
    return out


def poly_mul(a, b) -> np.ndarray:
    return intt(ntt_mul(ntt(reduce(a)), ntt(reduce(b))))


def poly_mul_schoolbook(a, b) -> np.ndarray:
    """Negacyclic product by direct O(n^2) expansion, for a single pair."""
    a = [int(x) % Q for x in np.asarray(a).ravel()]
    b = [int(x) % Q for x in np.asarray(b).ravel()]
    if len(a) != N or len(b) != N:
        raise ValueError("schoolbook multiplication takes single polynomials")
    c = [0] * N
    for i, ai in enumerate(a):
        if not ai:
            continue
        for j, bj in enumerate(b):
            k = i + j
            if k < N:
                c[k] += ai * bj
            else:
                c[k - N] -= ai * bj
    return np.array([x % Q for x in c], dtype=np.int64)


def _check_vec(a, b):
    if a.shape[-2] != b.shape[-2]:
        raise ValueError(f"dimension mismatch: {a.shape[-2]} vs {b.shape[-2]}")


def inner_product(a, b) -> np.ndarray:
    """``sum_i a_i * b_i`` for polynomial vectors of shape ``(..., k, n)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_vec(a, b)
    return intt(ntt_mul(ntt(reduce(a)), ntt(reduce(b))).sum(axis=-2) % Q)


def matvec_t(A, r) -> np.ndarray:
    """``A^T r`` for ``A`` of shape ``(..., k, k, n)`` and ``r`` of shape ``(..., k, n)``."""
    A = np.asarray(A)
    r = np.asarray(r)
    if A.shape[-3] != A.shape[-2]:
        raise ValueError("matrix must be square")
    _check_vec(A[..., 0, :, :], r)
    prod = ntt_mul(ntt(reduce(A)), ntt(reduce(r))[..., :, None, :])
    return intt(prod.sum(axis=-3) % Q)


def matvec(A, s) -> np.ndarray:
    """``A s`` for ``A`` of shape ``(..., k, k, n)``."""
    A = np.asarray(A)
    s = np.asarray(s)
    if A.shape[-3] != A.shape[-2]:
        raise ValueError("matrix must be square")
    _check_vec(A[..., 0, :, :], s)
    prod = ntt_mul(ntt(reduce(A)), ntt(reduce(s))[..., None, :, :])
    return intt(prod.sum(axis=-2) % Q)


def negacyclic_mul_int(small, big) -> np.ndarray:
    """Exact product over Z[X]/(X^n + 1) of integer polynomials, no modulus.

    Evaluated with a float64 FFT and rounded. Exactness needs the rounding
    error far below 1/2, which holds when ``n * max|small| * max|big| < 2**40``;
    larger operands are rejected.
    """
    small = np.asarray(small, dtype=np.int64)
    big = np.asarray(big, dtype=np.int64)
    bound = N * int(np.abs(small).max(initial=0)) * int(np.abs(big).max(initial=0))
    if bound >= 1 << 40:
        raise ValueError("operands too large for exact FFT multiplication")
    fa = np.fft.rfft(small.astype(np.float64), 2 * N)
    fb = np.fft.rfft(big.astype(np.float64), 2 * N)
    full = np.rint(np.fft.irfft(fa * fb, 2 * N)).astype(np.int64)
    return full[..., :N] - full[..., N:]


def inner_product_int(small, big) -> np.ndarray:
    """Exact ``sum_i small_i * big_i`` over Z[X]/(X^n + 1)."""
    small = np.asarray(small)
    big = np.asarray(big)
    _check_vec(small, big)
    return negacyclic_mul_int(small, big).sum(axis=-2)
