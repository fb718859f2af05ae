"""Result tables: quantizer MSE and error PMFs, failure rates, capacity bounds, rates."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

from sckyber.analysis import (
    capacity_bound,
    dfr_coded,
    dfr_convolution,
    dfr_gaussian,
    noise_model,
)
from sckyber.params import ParamSet, Variant, builtin_param_sets, cer, get_param_set
from sckyber.quantization import DiscretePmf, error_pmf, error_pmf_compress, uniform_codebook

Q_DEFAULT = 3329


@dataclass
class Table:
    title: str
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def _cells(self):
        return [[_fmt(c) for c in row] for row in self.rows]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self._cells())
        return out.getvalue()

    def to_markdown(self) -> str:
        cells = self._cells()
        widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
                  for i, h in enumerate(self.header)]
        numeric = [all(_is_number(r[i]) for r in cells) for i in range(len(self.header))]
        pad = lambda c, w, num: c.rjust(w) if num else c.ljust(w)
        line = lambda r: "| " + " | ".join(map(pad, r, widths, numeric)) + " |"
        rule = "|" + "|".join(("-" * (w + 1) + ":") if num else (":" + "-" * (w + 1))
                              for w, num in zip(widths, numeric)) + "|"
        return "\n".join([f"**{self.title}**", "", line(self.header), rule]
                         + [line(r) for r in cells]) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "markdown":
            return self.to_markdown()
        raise ValueError(f"unknown table format {fmt!r}")


def _is_number(text: str) -> bool:
    try:
        Fraction(text)
    except ValueError:
        return False
    return True


def _fmt(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    if isinstance(c, float):
        return f"{c:.4f}"
    return str(c)


def mse_table(q: int = Q_DEFAULT, bits=(11, 10)) -> Table:
    """Mean squared error of Kyber compression and of Lloyd-Max, uniform input on Z_q."""
    t = Table("MSE of the quantization error", ["d", "compression", "compression_exact",
                                               "lloyd_max", "lloyd_max_exact"])
    uniform = DiscretePmf.uniform(q)
    for d in bits:
        kc = error_pmf_compress(d, q).mse()
        lm = error_pmf(uniform_codebook(q, 1 << d), uniform).mse()
        t.rows.append([d, float(kc), kc, float(lm), lm])
    return t


def pmf_table(d: int, q: int = Q_DEFAULT) -> Table:
    """Distribution of the quantization error with ``2**d`` levels."""
    t = Table(f"PMF of the quantization error, L = 2^{d}",
              ["method", "error", "probability", "probability_exact"])
    for method, pmf in (
        ("compression", error_pmf_compress(d, q)),
        ("lloyd-max", error_pmf(uniform_codebook(q, 1 << d), DiscretePmf.uniform(q))),
    ):
        for e, p in pmf.items():
            t.rows.append([method, _fmt(e) if e.denominator > 1 else int(e), float(p), p])
    return t


def dfr_table(names=("KYBER512", "KYBER768", "KYBER1024")) -> Table:
    """log2 failure rates, compression vs Lloyd-Max, Gaussian model and exact convolution."""
    t = Table("log2 decryption failure rate",
              ["set", "compression_gaussian", "compression_convolution",
               "lloyd_max_gaussian", "lloyd_max_convolution"])
    for name in names:
        row = [name]
        for ps in (get_param_set(name), get_param_set(name + "-LM")):
            row.append(float(dfr_gaussian(noise_model(ps), ps.q, ps.n).log2_dfr))
            row.append(float(dfr_convolution(ps).log2_dfr))
        t.rows.append(row)
    return t


def coded_dfr_table(sets: list[ParamSet] | None = None) -> Table:
    """Coded variants: rate and log2 failure rate with and without the u-quantization term."""
    if sets is None:
        sets = [ps for ps in builtin_param_sets() if ps.variant is Variant.SEMI_COMPRESSED]
    t = Table("Semi-compressed sets: coded failure rate",
              ["set", "code", "p", "K", "d_u", "d_v", "cer",
               "log2_dfr_with_u_mse", "log2_dfr_without_u_mse",
               "sigma2_with", "sigma2_without"])
    for ps in sets:
        with_mse, without = noise_model(ps, True), noise_model(ps, False)
        t.rows.append([
            ps.name, str(ps.code), ps.p, ps.code.dimension, ps.d_u, ps.d_v,
            float(cer(ps)),
            float(dfr_coded(ps, with_mse).log2_dfr),
            float(dfr_coded(ps, without).log2_dfr),
            float(with_mse.sigma_g2), float(without.sigma_g2),
        ])
    return t


def bound_table(ps: ParamSet, orders=(2, 4, 8, 16)) -> Table:
    """Plaintext-size bound and the implied minimum expansion rate per PAM order."""
    t = Table(f"{ps.name}: plaintext bound by PAM order",
              ["p", "gamma", "k_ub_real", "k_ub", "cer_lb"])
    nm = noise_model(ps)
    for p in orders:
        b = capacity_bound(ps, nm, p)
        t.rows.append([p, b.gamma, b.k_ub_real, b.k_ub, float(b.cer_lb)])
    return t


def cer_table(sets: list[ParamSet] | None = None) -> Table:
    """Ciphertext size and expansion rate of each set."""
    t = Table("Ciphertext expansion rate",
              ["set", "message_bits", "ciphertext_bytes", "cer", "cer_exact"])
    for ps in sets or builtin_param_sets():
        c = cer(ps)
        t.rows.append([ps.name, ps.message_bits, ps.ciphertext_bytes, float(c), c])
    return t
