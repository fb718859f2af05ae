"""Kyber CPA encryption with optimal ciphertext quantization and coded plaintexts.

Three encryption variants share one key generation:

* ``ORIGINAL``: Kyber compress/decompress on both ciphertext parts.
* ``LLOYD_MAX``: both parts quantized with MMSE (Lloyd-Max) codebooks.
* ``SEMI_COMPRESSED``: only ``u`` is quantized; ``v`` is sent raw and the
  plaintext is carried by a BCH code, Gray mapping and p-PAM.

The :mod:`sckyber.analysis` module holds the noise model, DFR formulas and
capacity bound; :mod:`sckyber.montecarlo` validates them by simulation.
"""

from sckyber.params import (
    N,
    Q,
    CodeSpec,
    ParamSet,
    Variant,
    builtin_param_sets,
    cer,
    get_param_set,
)

__all__ = [
    "N",
    "Q",
    "CodeSpec",
    "ParamSet",
    "Variant",
    "builtin_param_sets",
    "cer",
    "get_param_set",
]

__version__ = "0.1.0"
