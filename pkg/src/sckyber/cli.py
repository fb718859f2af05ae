"""``sckyber`` command-line tool.

Exit status: 0 success, 2 usage error, 3 decryption failure, 4 I/O or
malformed input.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import struct
import sys
from pathlib import Path

import numpy as np

from sckyber import montecarlo, pke, tables
from sckyber.analysis import dfr_coded, dfr_gaussian, noise_model
from sckyber.errors import DecryptionFailure
from sckyber.params import SEED_BYTES, Variant, get_param_set, param_set_names
from sckyber.quantization import (
    DiscretePmf,
    QuantCodebook,
    codebook_mse,
    install_codebook,
    lloyd_max,
)

EXIT_OK, EXIT_USAGE, EXIT_DECRYPT, EXIT_IO = 0, 2, 3, 4
CT_MAGIC = b"SCKC"


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# Helpers


def _paramset(name: str):
    try:
        return get_param_set(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _entropy(args, size: int | None = SEED_BYTES) -> bytes:
    """Seed from ``--seed`` or, if explicitly allowed, from the OS."""
    if args.seed is not None:
        try:
            seed = bytes.fromhex(args.seed)
        except ValueError:
            raise UsageError("--seed must be hexadecimal") from None
        if size is not None and len(seed) != size:
            raise UsageError(f"--seed must be {size} bytes ({2 * size} hex digits)")
        if not seed:
            raise UsageError("--seed must not be empty")
        return seed
    if args.system_entropy:
        seed = os.urandom(size or SEED_BYTES)
        print(f"seed: {seed.hex()}", file=sys.stderr)
        return seed
    raise UsageError("randomized command needs --seed HEX or --system-entropy")


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, data: bytes):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _emit(args, text: str):
    if getattr(args, "out", None):
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _cache_dir(args) -> Path:
    if args.cache_dir:
        return Path(args.cache_dir)
    base = os.environ.get("XDG_CACHE_HOME") or Path.home() / ".cache"
    return Path(base) / "sckyber"


def load_codebook(q: int, size: int, args) -> QuantCodebook:
    """Lloyd-Max codebook for uniform Z_q, through the on-disk cache unless disabled."""
    path = _cache_dir(args) / f"uniform-q{q}-L{size}.lmqc"
    if not args.no_cache and path.exists():
        try:
            cb = QuantCodebook.from_bytes(path.read_bytes())
            install_codebook(cb, q, size)
            return cb
        except (OSError, ValueError):
            pass  # stale or corrupt entry: rebuild below
    cb = lloyd_max(DiscretePmf.uniform(q), size)
    install_codebook(cb, q, size)
    if not args.no_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(cb.to_bytes())
        except OSError:
            pass  # caching is best effort
    return cb


def _prepare_codebooks(ps, args):
    if ps.variant is Variant.ORIGINAL:
        return
    load_codebook(ps.q, 1 << ps.d_u, args)
    if ps.variant is Variant.LLOYD_MAX:
        load_codebook(ps.q, 1 << ps.d_v, args)


def _chunk_coins(seed: bytes, index: int) -> bytes:
    return hashlib.shake_256(seed + index.to_bytes(8, "little")).digest(SEED_BYTES)


# ---------------------------------------------------------------------------
# Crypto verbs


def cmd_keygen(args):
    ps = _paramset(args.paramset)
    seed = _entropy(args)
    pk, sk = pke.keygen(ps, seed)
    _write(args.out + ".pk", pk.to_bytes())
    _write(args.out + ".sk", sk.to_bytes(ps.q))


def cmd_encrypt(args):
    """Plaintext bytes are split into message-sized blocks, one ciphertext each.

    Output: magic, plaintext length (u64 LE), then the ciphertexts.
    """
    ps = _paramset(args.paramset)
    _prepare_codebooks(ps, args)
    seed = _entropy(args)
    try:
        pk = pke.PublicKey.from_bytes(_read(args.pk), ps)
    except ValueError as exc:
        raise InputError(f"bad public key: {exc}") from None
    data = _read(args.input)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    block = ps.message_bits
    blocks = max(1, -(-len(bits) // block))
    bits = np.concatenate([bits, np.zeros(blocks * block - len(bits), dtype=np.uint8)])
    out = [CT_MAGIC, struct.pack("<Q", len(data))]
    for i in range(blocks):
        m = bits[i * block:(i + 1) * block]
        out.append(pke.encrypt(pk, m, _chunk_coins(seed, i), ps).to_bytes(ps))
    _write(args.out, b"".join(out))


def cmd_decrypt(args):
    ps = _paramset(args.paramset)
    _prepare_codebooks(ps, args)
    try:
        sk = pke.SecretKey.from_bytes(_read(args.sk), ps)
    except ValueError as exc:
        raise InputError(f"bad secret key: {exc}") from None
    blob = _read(args.input)
    if blob[:4] != CT_MAGIC or len(blob) < 12:
        raise InputError("not a ciphertext file")
    (length,) = struct.unpack_from("<Q", blob, 4)
    body = blob[12:]
    size = ps.ciphertext_bytes
    blocks = max(1, -(-8 * length // ps.message_bits))
    if len(body) != blocks * size:
        raise InputError(f"ciphertext body is {len(body)} bytes, expected {blocks * size}")
    bits = []
    for i in range(blocks):
        try:
            ct = pke.Ciphertext.from_bytes(body[i * size:(i + 1) * size], ps)
        except ValueError as exc:
            raise InputError(f"block {i}: {exc}") from None
        bits.append(pke.decrypt(sk, ct, ps))
    plain = np.packbits(np.concatenate(bits)[: 8 * length], bitorder="little").tobytes()
    _write(args.out, plain)


# ---------------------------------------------------------------------------
# Analysis verbs


def cmd_codebook(args):
    if args.levels < 1:
        raise UsageError("--levels must be positive")
    if args.q < 2 or args.levels > args.q:
        raise UsageError("need 2 <= q and levels <= q")
    cb = load_codebook(args.q, args.levels, args)
    if args.write:
        _write(args.write, cb.to_bytes())
    mse = codebook_mse(cb, DiscretePmf.uniform(args.q))
    t = tables.Table(f"Lloyd-Max codebook, uniform Z_{args.q}",
                     ["levels", "denominator", "mse", "mse_exact"],
                     [[cb.size, cb.denominator, float(mse), mse]])
    _emit(args, t.render(args.format))


def cmd_mse_table(args):
    _emit(args, tables.mse_table().render(args.format))


def cmd_pmf_table(args):
    out = [tables.pmf_table(d).render(args.format) for d in args.d]
    _emit(args, "\n".join(out))


def cmd_dfr_table(args):
    if args.coded:
        t = tables.coded_dfr_table()
    else:
        t = tables.dfr_table()
    _emit(args, t.render(args.format))


def _orders(text: str):
    try:
        orders = [int(x) for x in text.split(",") if x]
    except ValueError:
        raise UsageError("--p takes a comma-separated list of integers") from None
    if not orders or any(p < 2 or p & (p - 1) for p in orders):
        raise UsageError("PAM orders must be powers of two >= 2")
    return orders


def cmd_bound_table(args):
    ps = _paramset(args.paramset)
    _emit(args, tables.bound_table(ps, _orders(args.p)).render(args.format))


def cmd_cer_table(args):
    _emit(args, tables.cer_table().render(args.format))


def _trials(args):
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    if args.jobs < 1:
        raise UsageError("--jobs must be positive")


def cmd_clt_check(args):
    ps = _paramset(args.paramset)
    _trials(args)
    seed = _entropy(args, size=None)
    _prepare_codebooks(ps, args)
    sigma = noise_model(ps).sigma_g
    sample = montecarlo.simulate_noise(ps, args.trials, seed, jobs=args.jobs)
    ks = montecarlo.ks_normal(sample.y, sample.denominator, sigma)
    chi = montecarlo.chi_square_normal(sample.y, sample.denominator, sigma)
    y = sample.y_values()
    t = tables.Table(f"{ps.name}: normality of the decoding noise", ["quantity", "value"], [
        ["samples", len(y)],
        ["sigma2_model", sigma ** 2],
        ["sigma2_empirical", float(y.var())],
        ["mean_empirical", float(y.mean())],
        ["ks_lattice_normal", f"{ks.statistic:.6f}"],
        ["ks_continuous_normal", f"{ks.raw_statistic:.6f}"],
        ["chi_square_pvalue", f"{chi.pvalue:.6f}"],
    ])
    _emit(args, t.render(args.format))


def cmd_empirical_dfr(args):
    ps = _paramset(args.paramset)
    _trials(args)
    seed = _entropy(args, size=None)
    _prepare_codebooks(ps, args)
    res = montecarlo.empirical_dfr(ps, args.trials, seed, jobs=args.jobs)
    nm = noise_model(ps)
    if ps.variant is Variant.SEMI_COMPRESSED:
        predicted = dfr_coded(ps, nm)
    else:
        predicted = dfr_gaussian(nm, ps.q, ps.n)
    pred = float(predicted.dfr)
    t = tables.Table(f"{ps.name}: empirical failure rate", ["quantity", "value"], [
        ["trials", res.trials],
        ["failures", res.failures],
        ["rate", f"{res.rate:.6g}"],
        [f"wilson_{int(res.confidence * 100)}_low", f"{res.ci_low:.6g}"],
        [f"wilson_{int(res.confidence * 100)}_high", f"{res.ci_high:.6g}"],
        ["predicted", f"{pred:.6g}"],
        ["prediction_in_interval", res.contains(pred)],
    ])
    _emit(args, t.render(args.format))


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sckyber", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    def verb(name, fn, help_text, *, seeded=False, table=False, cached=False):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=fn)
        if seeded:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--seed", metavar="HEX", help="seed as hex (reproducible runs)")
            g.add_argument("--system-entropy", action="store_true",
                           help="draw the seed from the OS and print it to stderr")
        if table:
            p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
            p.add_argument("--out", metavar="FILE", help="write to FILE instead of stdout")
        if cached:
            p.add_argument("--cache-dir", metavar="DIR", help="codebook cache directory")
            p.add_argument("--no-cache", action="store_true",
                           help="rebuild codebooks and do not touch the cache")
        return p

    names = ", ".join(param_set_names())
    p = verb("keygen", cmd_keygen, "generate a key pair", seeded=True)
    p.add_argument("--paramset", required=True, help=names)
    p.add_argument("--out", required=True, metavar="BASE", help="writes BASE.pk and BASE.sk")

    p = verb("encrypt", cmd_encrypt, "encrypt a file", seeded=True, cached=True)
    p.add_argument("--paramset", required=True, help=names)
    p.add_argument("--pk", required=True, metavar="FILE")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE")

    p = verb("decrypt", cmd_decrypt, "decrypt a file", cached=True)
    p.add_argument("--paramset", required=True, help=names)
    p.add_argument("--sk", required=True, metavar="FILE")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE")

    p = verb("codebook", cmd_codebook, "build a Lloyd-Max codebook for uniform Z_q",
             table=True, cached=True)
    p.add_argument("--q", type=int, default=3329)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--write", metavar="FILE", help="also write the codebook file here")

    verb("mse-table", cmd_mse_table, "quantizer MSE, compression vs Lloyd-Max", table=True)
    p = verb("pmf-table", cmd_pmf_table, "quantization error distributions", table=True)
    p.add_argument("--d", type=int, nargs="+", default=[11, 10], choices=range(1, 12))
    p = verb("dfr-table", cmd_dfr_table, "analytic failure rates", table=True)
    p.add_argument("--coded", action="store_true", help="semi-compressed coded sets instead")
    p = verb("bound-table", cmd_bound_table, "plaintext-size bound per PAM order", table=True)
    p.add_argument("--paramset", default="SC-KYBER1024", help=names)
    p.add_argument("--p", default="2,4,8,16", metavar="LIST")
    verb("cer-table", cmd_cer_table, "ciphertext expansion rates", table=True)

    for name, fn, text in (
        ("clt-check", cmd_clt_check, "simulate decoding noise and test it for normality"),
        ("empirical-dfr", cmd_empirical_dfr, "simulate decryptions and count failures"),
    ):
        p = verb(name, fn, text, seeded=True, table=True, cached=True)
        p.add_argument("--paramset", required=True, help=names)
        p.add_argument("--trials", type=int, default=10_000)
        p.add_argument("--jobs", type=int, default=1)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has already printed the usage line
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"sckyber {args.verb}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DecryptionFailure as exc:
        print(f"sckyber {args.verb}: decryption failed: {exc}", file=sys.stderr)
        return EXIT_DECRYPT
    except InputError as exc:
        print(f"sckyber {args.verb}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
