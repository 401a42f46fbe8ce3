"""Command line interface: ``sceif {approx,fold,unfold,metrics,baseline-dct,bench}``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import baseline_dct, container, metrics, netpbm
from .folding import FoldError, NotFoldableError, decode, fold, wallclock_seed
from .omp2d import approximate_image

log = logging.getLogger("sceif")

BENCH_COLUMNS = (
    "image", "rows", "cols", "channels", "psnr", "sr_dictionary", "sr_dct",
    "folded_rows", "t_approximation", "t_folding", "t_expanding", "t_total",
)


def _key(text):
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"key must be a decimal integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("key must fit in 64 unsigned bits")
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**32:
        raise argparse.ArgumentTypeError("seed must fit in 32 unsigned bits")
    return value


def _fmt_sr(image_approx):
    try:
        return f"{image_approx.sparsity_ratio:.2f}"
    except ZeroDivisionError:
        return "undefined (zero coefficients)"


def cmd_approx(args):
    image, bits = netpbm.read_image(args.input)
    t0 = time.perf_counter()
    ap = approximate_image(image, args.psnr, bits, args.block, calibrate=not args.no_calibrate,
                           workers=args.threads)
    elapsed = time.perf_counter() - t0
    netpbm.write_image(args.output, ap.plain, bits)
    print(f"SR       {_fmt_sr(ap)}")
    print(f"PSNR     {metrics.psnr(image, ap.plain, bits):.2f} dB")
    if min(image.shape[:2]) >= metrics.SSIM_WINDOW:
        print(f"MSSIM    {metrics.mssim(image, ap.plain, bits):.4f}")
    print(f"atoms    {ap.n_atoms}")
    print(f"rho      {ap.rho:.4f}")
    print(f"elapsed  {elapsed:.2f} s")
    if ap.n_atoms == 0:
        print("note: image is represented with zero coefficients")
    if args.figure:
        from .plotting import plot_approximation

        plot_approximation(image, ap.plain, args.figure, bits, title=Path(args.input).name)
    return 0


def cmd_fold(args):
    image, bits = netpbm.read_image(args.input)
    seed = args.seed if args.seed is not None else wallclock_seed()
    t0 = time.perf_counter()
    ap = approximate_image(image, args.psnr, bits, args.block, workers=args.threads)
    t1 = time.perf_counter()
    folded = fold(image, args.key, seed, bits=bits, block_n=args.block, approximation=ap)
    t2 = time.perf_counter()
    container.write_container(folded, args.output)
    h = folded.header
    rows, cols, z = folded.shape
    print(f"seed        {seed}")
    print(f"plain       {image.shape[0]}x{image.shape[1]}x{z}")
    print(f"folded      {rows}x{cols}x{z}")
    print(f"blocks      Q={h.n_blocks} hosts={h.n_hosts} ad-hoc={h.n_adhoc}")
    print(f"SR          {_fmt_sr(ap)}")
    print(f"PSNR        {metrics.psnr(image, ap.plain, bits):.2f} dB")
    print(f"time        approximation {t1 - t0:.2f} s, folding {t2 - t1:.2f} s")
    if args.plain:
        netpbm.write_image(args.plain, ap.plain, bits)
    if args.figure:
        from .plotting import plot_fold_panels

        recovered = decode(folded, args.key).image
        words = container.from_channels(container.to_words(folded))
        plot_fold_panels(ap.plain, words, recovered, args.figure, bits)
    return 0


def cmd_unfold(args):
    folded = container.read_container(args.input)
    t0 = time.perf_counter()
    result = decode(folded, args.key, strict=args.strict)
    elapsed = time.perf_counter() - t0
    bits = folded.header.bits
    netpbm.write_image(args.output, result.image, bits)
    print(f"recovered   {folded.header.orig_nx}x{folded.header.orig_ny}x{folded.header.channels}")
    print(f"time        expanding {elapsed:.2f} s")
    if result.suspect:
        print("warning: decoded indices are inconsistent; the key is probably wrong")
    return 0


def cmd_metrics(args):
    a, bits_a = netpbm.read_image(args.reference)
    b, bits_b = netpbm.read_image(args.test)
    bits = args.bits or max(bits_a, bits_b)
    for line in metrics.quality_report(a, b, bits).lines():
        print(line)
    return 0


def cmd_baseline_dct(args):
    image, bits = netpbm.read_image(args.input)
    t0 = time.perf_counter()
    res = baseline_dct.dct_approximate(image, args.psnr, args.block, bits)
    elapsed = time.perf_counter() - t0
    if args.output:
        netpbm.write_image(args.output, res.approximation, bits)
    print(f"SR        {res.sr:.2f}")
    print(f"PSNR      {res.psnr:.2f} dB")
    print(f"retained  {res.retained_coeffs}")
    print(f"elapsed   {elapsed:.2f} s")
    return 0


def bench_image(path, key, seed, psnr_target, block_n, threads=1):
    image, bits = netpbm.read_image(path)
    t0 = time.perf_counter()
    ap = approximate_image(image, psnr_target, bits, block_n, workers=threads)
    t1 = time.perf_counter()
    folded = container.parse_container(container.container_bytes(
        fold(image, key, seed, bits=bits, block_n=block_n, approximation=ap)))
    t2 = time.perf_counter()
    decode(folded, key)
    t3 = time.perf_counter()
    dct = baseline_dct.dct_approximate(image, psnr_target, block_n, bits)
    z = 1 if image.ndim == 2 else image.shape[2]
    return {
        "image": Path(path).stem,
        "rows": image.shape[0],
        "cols": image.shape[1],
        "channels": z,
        "psnr": metrics.psnr(image, ap.plain, bits),
        "sr_dictionary": ap.sparsity_ratio if ap.n_atoms else math.inf,
        "sr_dct": dct.sr,
        "folded_rows": folded.shape[0],
        "t_approximation": t1 - t0,
        "t_folding": t2 - t1,
        "t_expanding": t3 - t2,
        "t_total": t3 - t0,
    }


def format_table(rows):
    head = f"{'image':<16}{'size':>14}{'PSNR':>8}{'SR dict':>9}{'SR DCT':>8}{'folded':>8}" \
           f"{'Approx':>9}{'Folding':>9}{'Expand':>9}{'Total':>9}"
    lines = [head, "-" * len(head)]
    for r in rows:
        size = f"{r['rows']}x{r['cols']}x{r['channels']}"
        lines.append(
            f"{r['image']:<16}{size:>14}{r['psnr']:>8.2f}{r['sr_dictionary']:>9.2f}{r['sr_dct']:>8.2f}"
            f"{r['folded_rows']:>8d}{r['t_approximation']:>9.2f}{r['t_folding']:>9.2f}"
            f"{r['t_expanding']:>9.2f}{r['t_total']:>9.2f}"
        )
    if rows:
        lines.append("-" * len(head))
        lines.append(
            f"{'mean':<16}{'':>14}{'':>8}{np.mean([r['sr_dictionary'] for r in rows]):>9.2f}"
            f"{np.mean([r['sr_dct'] for r in rows]):>8.2f}"
        )
    return "\n".join(lines)


def cmd_bench(args):
    corpus = Path(args.corpus)
    files = sorted(p for p in corpus.iterdir() if p.suffix.lower() in (".pgm", ".ppm"))
    if not files:
        print(f"error: no PGM/PPM images in {corpus}", file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else wallclock_seed()
    rows = [bench_image(p, args.key, seed, args.psnr, args.block, args.threads) for p in files]
    print(format_table(rows))
    csv_path = Path(args.csv) if args.csv else corpus / "bench.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    print(f"csv written to {csv_path}")
    if not args.no_figure:
        from .plotting import plot_bench

        fig_path = Path(args.figure) if args.figure else csv_path.with_suffix(".png")
        plot_bench(rows, fig_path)
        print(f"figure written to {fig_path}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="sceif", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threads=True):
        sp.add_argument("--psnr", type=float, default=43.0, help="target PSNR in dB (default 43)")
        sp.add_argument("--block", type=int, default=8, help="block side (default 8)")
        if threads:
            sp.add_argument("--threads", type=int, default=1, help="worker processes for the pursuit")

    sp = sub.add_parser("approx", help="sparse approximation of an image")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--no-calibrate", action="store_true",
                    help="use the per-block budget as is instead of fitting the global target")
    sp.add_argument("--figure", help="write a comparison figure (PNG/PDF)")
    common(sp)
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("fold", help="approximate and fold into an encrypted 16-bit container")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--key", type=_key, required=True)
    sp.add_argument("--seed", type=_seed, help="public 32-bit seed (default: from the clock)")
    sp.add_argument("--plain", help="also write the plain-text approximation")
    sp.add_argument("--figure", help="write a plain/folded/recovered figure")
    common(sp)
    sp.set_defaults(func=cmd_fold)

    sp = sub.add_parser("unfold", help="recover the approximation from a container")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--key", type=_key, required=True)
    sp.add_argument("--strict", action="store_true", help="fail on inconsistent decoded indices")
    sp.set_defaults(func=cmd_unfold)

    sp = sub.add_parser("metrics", help="PSNR, MSE and MSSIM between two images")
    sp.add_argument("reference")
    sp.add_argument("test")
    sp.add_argument("--bits", type=int)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("baseline-dct", help="block DCT thresholding at a target PSNR")
    sp.add_argument("input")
    sp.add_argument("output", nargs="?")
    common(sp, threads=False)
    sp.set_defaults(func=cmd_baseline_dct)

    sp = sub.add_parser("bench", help="sparsity and timing table over a PGM/PPM corpus")
    sp.add_argument("corpus")
    sp.add_argument("--key", type=_key, default=1234567891)
    sp.add_argument("--seed", type=_seed)
    sp.add_argument("--csv", help="CSV output path (default: <corpus>/bench.csv)")
    sp.add_argument("--figure", help="figure path (default: CSV path with .png)")
    sp.add_argument("--no-figure", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, netpbm.NetpbmError, container.ContainerError, NotFoldableError, FoldError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
