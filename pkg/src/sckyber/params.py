"""Parameter sets for the three Kyber CPA variants and the size/rate arithmetic."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

N = 256
Q = 3329
SEED_BYTES = 32
RAW_BITS = 12  # q = 3329 < 2**12, so an uncompressed coefficient takes 12 bits


class Variant(enum.Enum):
    ORIGINAL = "original"
    LLOYD_MAX = "lloyd-max"
    SEMI_COMPRESSED = "semi-compressed"


def _is_prime(x: int) -> bool:
    if x < 2:
        return False
    f = 2
    while f * f <= x:
        if x % f == 0:
            return False
        f += 1
    return True


@dataclass(frozen=True)
class CodeSpec:
    """A binary BCH code shortened from length ``2**m - 1`` to ``length`` bits.

    ``dimension`` is the number of message bits and ``t`` the number of
    correctable errors (designed distance ``2t + 1``).
    """

    length: int
    dimension: int
    t: int
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"field degree m={self.m} too small")
        if not 0 < self.dimension < self.length <= self.parent_length:
            raise ValueError(
                f"invalid shortened code ({self.length},{self.dimension}) "
                f"from parent length {self.parent_length}"
            )
        if self.t < 1:
            raise ValueError("t must be positive")

    @property
    def parent_length(self) -> int:
        return (1 << self.m) - 1

    @property
    def parent_dimension(self) -> int:
        return self.dimension + self.parent_length - self.length

    @property
    def redundancy(self) -> int:
        return self.length - self.dimension

    def __str__(self):
        return f"BCH({self.length},{self.dimension},{self.t})"


@dataclass(frozen=True)
class ParamSet:
    name: str
    k: int
    eta1: int
    eta2: int
    d_u: int
    d_v: int
    variant: Variant = Variant.ORIGINAL
    p: int = 2
    code: CodeSpec | None = None
    n: int = N
    q: int = Q

    def __post_init__(self):
        if self.n != N:
            raise ValueError(f"ring degree must be {N}, got {self.n}")
        if not _is_prime(self.q):
            raise ValueError(f"q={self.q} is not prime")
        if self.k < 1:
            raise ValueError("module rank k must be >= 1")
        if self.eta1 < 1 or self.eta2 < 1:
            raise ValueError("CBD widths must be >= 1")
        if self.d_u < 1 or (1 << self.d_u) >= self.q:
            raise ValueError(f"d_u={self.d_u} needs 2^d_u < q")
        if self.p < 2 or self.p & (self.p - 1):
            raise ValueError(f"PAM order p={self.p} must be a power of two >= 2")
        if self.variant is Variant.SEMI_COMPRESSED:
            if self.d_v != RAW_BITS:
                raise ValueError("semi-compressed sets carry raw v (d_v = 12)")
            if self.code is None:
                raise ValueError("semi-compressed sets need a code")
            if self.code.length != self.n * self.bits_per_symbol:
                raise ValueError(
                    f"code length {self.code.length} != n*log2(p) = "
                    f"{self.n * self.bits_per_symbol}"
                )
        else:
            if self.d_v < 1 or (1 << self.d_v) >= self.q:
                raise ValueError(f"d_v={self.d_v} needs 2^d_v < q")
            if self.p != 2:
                raise ValueError("uncoded variants use 2-PAM (p = 2)")
            if self.code is not None:
                raise ValueError("uncoded variants take no code")

    @property
    def bits_per_symbol(self) -> int:
        return self.p.bit_length() - 1

    @property
    def message_bits(self) -> int:
        """Plaintext bits carried by one ciphertext."""
        if self.variant is Variant.SEMI_COMPRESSED:
            return self.code.dimension
        return self.n

    @property
    def ciphertext_bits(self) -> int:
        return self.k * self.n * self.d_u + self.n * self.d_v

    @property
    def ciphertext_bytes(self) -> int:
        return (self.ciphertext_bits + 7) // 8

    @property
    def public_key_bytes(self) -> int:
        return self.k * self.n * RAW_BITS // 8 + SEED_BYTES

    @property
    def secret_key_bytes(self) -> int:
        return self.k * self.n * RAW_BITS // 8


def cer(ps: ParamSet, message_bits: int | None = None) -> Fraction:
    """Ciphertext expansion rate: ciphertext bits per plaintext bit.

    The numerator is ``k n d_u + n d_v``; for semi-compressed sets ``d_v`` is
    the raw width 12.
    """
    if message_bits is None:
        message_bits = ps.message_bits
    if message_bits <= 0:
        raise ValueError("message size must be positive")
    d_v = RAW_BITS if ps.variant is Variant.SEMI_COMPRESSED else ps.d_v
    return Fraction(ps.k * ps.n * ps.d_u + ps.n * d_v, message_bits)


BCH_768_638 = CodeSpec(length=768, dimension=638, t=13, m=10)
BCH_768_513 = CodeSpec(length=768, dimension=513, t=26, m=10)


def _kyber(name, k, eta1, d_u, d_v, variant=Variant.ORIGINAL):
    return ParamSet(name=name, k=k, eta1=eta1, eta2=2, d_u=d_u, d_v=d_v, variant=variant)


def _builtin():
    sets = []
    for name, k, eta1, d_u, d_v in (
        ("KYBER512", 2, 3, 10, 4),
        ("KYBER768", 3, 2, 10, 4),
        ("KYBER1024", 4, 2, 11, 5),
    ):
        sets.append(_kyber(name, k, eta1, d_u, d_v))
        sets.append(_kyber(name + "-LM", k, eta1, d_u, d_v, Variant.LLOYD_MAX))
    for code, d_u in ((BCH_768_513, 10), (BCH_768_638, 11)):
        sets.append(
            ParamSet(
                name=f"SC-KYBER1024-B-BCH-{code.dimension}",
                k=4, eta1=2, eta2=2, d_u=d_u, d_v=RAW_BITS,
                variant=Variant.SEMI_COMPRESSED, p=8, code=code,
            )
        )
    return tuple(sets)


def _weakened():
    # Deliberately noisy sets whose failure rate is observable by simulation.
    return (
        ParamSet(name="WEAK-LM-K3-DU8-DV2", k=3, eta1=2, eta2=2, d_u=8, d_v=2,
                 variant=Variant.LLOYD_MAX),
        ParamSet(name="WEAK-SC-K4-DU9-BCH-718", k=4, eta1=2, eta2=2, d_u=9,
                 d_v=RAW_BITS, variant=Variant.SEMI_COMPRESSED, p=8,
                 code=CodeSpec(length=768, dimension=718, t=5, m=10)),
    )


_BUILTIN = _builtin()
_WEAKENED = _weakened()
_REGISTRY = {ps.name: ps for ps in _BUILTIN + _WEAKENED}
_ALIASES = {"SC-KYBER1024": "SC-KYBER1024-B-BCH-638"}


def builtin_param_sets() -> list[ParamSet]:
    """The Kyber sets, their Lloyd-Max twins and the two SC-KYBER1024 rows."""
    return list(_BUILTIN)


def weakened_param_sets() -> list[ParamSet]:
    return list(_WEAKENED)


def get_param_set(name: str) -> ParamSet:
    try:
        return _REGISTRY[_ALIASES.get(name, name)]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY) + sorted(_ALIASES))
        raise KeyError(f"unknown parameter set {name!r}; known: {known}") from None


def param_set_names() -> list[str]:
    return sorted(_REGISTRY) + sorted(_ALIASES)
