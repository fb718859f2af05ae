from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sckyber.params import (
    CodeSpec,
    ParamSet,
    Variant,
    builtin_param_sets,
    cer,
    get_param_set,
    param_set_names,
    weakened_param_sets,
)


@pytest.mark.parametrize("name, k, eta1, d_u, d_v", [
    ("KYBER512", 2, 3, 10, 4),
    ("KYBER768", 3, 2, 10, 4),
    ("KYBER1024", 4, 2, 11, 5),
])
def test_kyber_sets(name, k, eta1, d_u, d_v):
    for suffix, variant in (("", Variant.ORIGINAL), ("-LM", Variant.LLOYD_MAX)):
        ps = get_param_set(name + suffix)
        assert (ps.k, ps.eta1, ps.eta2, ps.d_u, ps.d_v) == (k, eta1, 2, d_u, d_v)
        assert (ps.n, ps.q, ps.p) == (256, 3329, 2)
        assert ps.variant is variant
        assert ps.message_bits == 256


def test_semi_compressed_sets():
    a = get_param_set("SC-KYBER1024-B-BCH-638")
    b = get_param_set("SC-KYBER1024-B-BCH-513")
    assert get_param_set("SC-KYBER1024") is a
    assert (a.d_u, a.d_v, a.p, a.code.t, a.message_bits) == (11, 12, 8, 13, 638)
    assert (b.d_u, b.d_v, b.p, b.code.t, b.message_bits) == (10, 12, 8, 26, 513)
    assert a.code.parent_length == 1023 and a.code.parent_dimension == 893


def test_byte_sizes():
    assert get_param_set("KYBER1024").ciphertext_bytes == 1568
    assert get_param_set("SC-KYBER1024").ciphertext_bytes == 1792
    assert get_param_set("KYBER768").ciphertext_bytes == 1088
    assert get_param_set("KYBER512").public_key_bytes == 800
    assert get_param_set("KYBER1024").secret_key_bytes == 1536


@pytest.mark.parametrize("name, expected", [
    ("KYBER512", Fraction(24)),
    ("KYBER768", Fraction(34)),
    ("KYBER1024", Fraction(49)),
    ("SC-KYBER1024-B-BCH-638", Fraction(14336, 638)),
    ("SC-KYBER1024-B-BCH-513", Fraction(13312, 513)),
])
def test_cer_values(name, expected):
    assert cer(get_param_set(name)) == expected


def test_cer_rejects_empty_message():
    with pytest.raises(ValueError):
        cer(get_param_set("KYBER512"), 0)


@given(st.integers(1, 10_000), st.integers(1, 10_000))
def test_cer_decreases_with_message_size(a, b):
    ps = get_param_set("SC-KYBER1024")
    if a < b:
        assert cer(ps, a) > cer(ps, b)
    assert cer(ps, a) * a == ps.ciphertext_bits


def test_unknown_name():
    with pytest.raises(KeyError):
        get_param_set("KYBER2048")


def test_registry_lists_everything():
    names = set(param_set_names())
    for ps in builtin_param_sets() + weakened_param_sets():
        assert ps.name in names
    assert "SC-KYBER1024" in names


@pytest.mark.parametrize("kwargs", [
    dict(d_u=12),  # 2^12 > q
    dict(d_v=0),
    dict(k=0),
    dict(eta1=0),
    dict(q=3328),
    dict(n=512),
    dict(p=4),  # uncoded sets are binary
    dict(variant=Variant.SEMI_COMPRESSED, p=8, d_v=12),  # missing code
    dict(variant=Variant.SEMI_COMPRESSED, p=8, d_v=5, code=CodeSpec(768, 638, 13, 10)),
    dict(variant=Variant.SEMI_COMPRESSED, p=4, d_v=12, code=CodeSpec(768, 638, 13, 10)),
    dict(variant=Variant.SEMI_COMPRESSED, p=6, d_v=12, code=CodeSpec(768, 638, 13, 10)),
])
def test_invalid_sets_rejected(kwargs):
    base = dict(name="x", k=2, eta1=2, eta2=2, d_u=10, d_v=4)
    base.update(kwargs)
    with pytest.raises(ValueError):
        ParamSet(**base)


@pytest.mark.parametrize("args", [(768, 768, 13, 10), (768, 0, 13, 10), (2000, 100, 5, 10),
                                  (768, 638, 0, 10), (3, 1, 1, 1)])
def test_invalid_codes_rejected(args):
    with pytest.raises(ValueError):
        CodeSpec(*args)
