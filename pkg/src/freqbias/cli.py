"""Command-line entry point: ``freqbias <subcommand> ...``.

Every subcommand computes its results in memory first and only then creates
the ``--out`` directory, so failed runs leave no partial output. Each run
writes ``run.txt`` with the resolved configuration. Exit codes: 0 success,
1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import os
import sys
from functools import partial

import numpy as np

from . import cnn, datasets, metrics, spectral, theory, transforms

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _threads(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be at least 1")
    return n


def _emit(out, files, args, images=None):
    """Create ``out`` and write ``files`` (name -> writer(path)) plus run.txt.

    ``images``, if given, is a callable that writes a PNG dataset into ``out``.
    """
    os.makedirs(out, exist_ok=True)
    if images is not None:
        images(out)
    for name, writer in files.items():
        writer(os.path.join(out, name))
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    with open(os.path.join(out, "run.txt"), "w") as fh:
        for key, value in config.items():
            fh.write(f"{key}={value!r}\n")


def _write_text(text):
    def writer(path):
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return writer


def _load(directory, minimum=1):
    stack = datasets.load_dataset(directory)
    if len(stack) < minimum:
        raise ValueError(f"{directory}: need at least {minimum} images, found {len(stack)}")
    return stack


def cmd_spectrum(args):
    stack = _load(args.dataset)
    avg = spectral.average_power_spectrum(stack, windowed=args.windowed, n_jobs=args.threads)
    shown = spectral.display_normalize(avg)
    _emit(args.out, {
        "spectrum.csv": lambda p: spectral.write_spectrum_csv(shown, p),
        "spectrum.png": lambda p: spectral.write_heatmap_png(shown, p),
    }, args)


def cmd_corr_verify(args):
    rows = ["k,d,du,dv,analytic_mag,mc_mag,stderr,N,seed,brute_mag"]
    for d in args.d:
        shape = theory.FilterShape(args.k, d)
        analytic = theory.adjacent_diag_corr(shape)
        brute = float(abs(theory.brute_force_corr(1, 1, shape)))
        if abs(analytic - brute) > 1e-9:
            raise RuntimeError(f"closed form and tap sum disagree at k={args.k}, d={d}")
        est = theory.monte_carlo_corr(shape, (1, 1), (0, 0), args.samples, args.seed, args.threads)
        rows.append(f"{args.k},{d},1,1,{analytic!r},{est.magnitude!r},"
                    f"{est.standard_error!r},{args.samples},{args.seed},{brute!r}")
    _emit(args.out, {"corr.csv": _write_text("\n".join(rows) + "\n")}, args)


def _parse_extractor(spec):
    kind, _, rest = spec.partition(":")
    if kind == "pixel":
        return metrics.PixelFeatures(side=int(rest))
    if kind == "tanh":
        side, _, scale = rest.partition(":")
        return metrics.PixelFeatures(side=int(side), squash=float(scale or 1.0))
    if kind == "file":
        return rest
    raise UsageError(f"unknown extractor {spec!r}; use pixel:<p>, tanh:<p>:<s> or file:<dir>")


def _file_curve(directory, cutoffs):
    values = []
    for i in range(len(cutoffs)):
        fa = metrics.read_features(os.path.join(directory, f"a_{i:03d}.fset"))
        fb = metrics.read_features(os.path.join(directory, f"b_{i:03d}.fset"))
        values.append(metrics.frechet_distance(metrics.fit_moments(fa), metrics.fit_moments(fb)))
    return metrics.FidLevelsCurve(np.asarray(cutoffs, dtype=np.float64), np.asarray(values))


def cmd_fid_levels(args):
    try:
        extractor = _parse_extractor(args.extractor)
    except ValueError as exc:
        raise UsageError(f"bad --extractor {args.extractor!r}: {exc}")
    cutoffs = args.cutoffs if args.cutoffs is not None else list(metrics.DEFAULT_CUTOFFS)
    if isinstance(extractor, str):
        if args.true_split or args.datasets:
            raise UsageError("file:<dir> extractor takes no dataset arguments")
        curve = _file_curve(extractor, cutoffs)
    elif args.true_split:
        if len(args.datasets) != 1:
            raise UsageError("--true-split takes exactly one dataset directory")
        stack = _load(args.datasets[0], minimum=4)
        curve = metrics.true_fid_levels(stack, cutoffs, extractor, args.seed, args.threads)
    else:
        if len(args.datasets) != 2:
            raise UsageError("fid-levels needs two dataset directories (or --true-split DIR)")
        a = _load(args.datasets[0], minimum=2)
        b = _load(args.datasets[1], minimum=2)
        curve = metrics.fid_levels(a, b, cutoffs, extractor, args.threads)
    _emit(args.out, {"fid_levels.csv": lambda p: metrics.write_curve_csv(curve, p)}, args)


def cmd_shift(args):
    stack = _load(args.dataset)
    shifted = np.stack([transforms.checkerboard_shift(im) for im in stack])
    _emit(args.out, {}, args,
          images=lambda out: datasets.save_dataset(shifted, out, write_sidecar=True))


def cmd_koch(args):
    params = datasets.KochParams(args.level, args.size, args.count, args.seed, args.margin)
    images = datasets.gen_koch(params)
    _emit(args.out, {}, args, images=lambda out: (
        datasets.save_dataset(images, out, scale=(0.0, 1.0)),
        datasets.write_manifest(params, out),
    ))


def cmd_waves(args):
    params = datasets.WaveParams(args.m, args.n, args.u, args.v, args.amp_mean, args.amp_std,
                                 args.phase, args.count, args.seed)
    images = datasets.gen_planar_wave(params)
    _emit(args.out, {}, args, images=lambda out: (
        datasets.save_dataset(images, out, write_sidecar=True),
        datasets.write_manifest(params, out),
    ))


def cmd_lr(args):
    a = _load(args.datasets[0])
    b = _load(args.datasets[1])
    pa = spectral.average_power_spectrum(a, windowed=args.windowed, n_jobs=args.threads)
    pb = spectral.average_power_spectrum(b, windowed=args.windowed, n_jobs=args.threads)
    lr = metrics.leakage_ratio(pa, pb)
    print(f"{lr:.2f}")
    _emit(args.out, {"lr.csv": _write_text(f"lr\n{lr!r}\n")}, args)


def _stack_and_weights(args):
    stack = cnn.read_stack(args.stack) if args.stack else cnn.default_stack()
    if args.weights:
        weights = cnn.read_weights(args.weights, stack)
    else:
        weights = cnn.init_weights(stack, args.seed)
    latent = np.random.default_rng([args.seed, 1]).standard_normal(stack.input_shape(1))
    return stack, weights, latent


def cmd_effective_filter(args):
    stack, weights, latent = _stack_and_weights(args)
    masks = cnn.record_masks(stack, weights, latent) if args.masks == "recorded" else None
    layers = [args.layer] if args.layer is not None else list(range(1, stack.depth + 1))
    files = {}
    for layer in layers:
        ps = cnn.effective_filter_spectrum(stack, weights, layer, args.channel, masks)
        stem = f"effective_filter_l{layer}_c{args.channel}"
        files[stem + ".csv"] = partial(spectral.write_spectrum_csv, ps)
        try:
            shown = spectral.display_normalize(ps)
        except ValueError:
            # A response masked to zero has no non-DC power to show.
            continue
        files[stem + ".png"] = partial(spectral.write_heatmap_png, shown)
    _emit(args.out, files, args)


def cmd_mask_check(args):
    stack, weights, latent = _stack_and_weights(args)
    report = cnn.mask_stability(stack, weights, latent, args.trials, args.seed)
    print(f"epsilon={report.epsilon:.3g} stable_fraction={report.stable_fraction:.2f}"
          f" measure_zero={report.measure_zero}")
    text = (f"epsilon,stable_fraction,measure_zero\n"
            f"{report.epsilon!r},{report.stable_fraction!r},{int(report.measure_zero)}\n")
    _emit(args.out, {"mask_check.csv": _write_text(text)}, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqbias",
                                     description="Spectral analysis of spatial frequency bias.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=_threads, default=os.cpu_count() or 1)
        p.set_defaults(func=func)
        return p

    p = add("spectrum", cmd_spectrum, "average power spectrum of a PNG directory")
    p.add_argument("dataset")
    p.add_argument("--windowed", action="store_true")

    p = add("corr-verify", cmd_corr_verify, "diagonal-neighbour filter spectrum correlation")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--d", type=_int_list, default=[8, 16, 32, 64, 128])
    p.add_argument("--samples", "--N", type=int, default=100_000, dest="samples")

    p = add("fid-levels", cmd_fid_levels, "FID after a sweep of Gaussian high-pass cutoffs")
    p.add_argument("datasets", nargs="*")
    p.add_argument("--true-split", action="store_true")
    p.add_argument("--cutoffs", type=_float_list, default=None)
    p.add_argument("--extractor", default="pixel:8")

    p = add("shift", cmd_shift, "multiply every image by (-1)^(x+y)")
    p.add_argument("dataset")

    p = add("koch", cmd_koch, "randomly rotated Koch snowflakes")
    p.add_argument("--level", type=int, default=5)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--margin", type=float, default=0.1)

    p = add("waves", cmd_waves, "planar cosine waves with Gaussian amplitude")
    p.add_argument("--m", type=int, default=128)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--u", type=float, default=3 / 128)
    p.add_argument("--v", type=float, default=0.0)
    p.add_argument("--amp-mean", type=float, default=0.0)
    p.add_argument("--amp-std", type=float, default=1.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--count", type=int, default=100)

    p = add("lr", cmd_lr, "leakage ratio between two datasets")
    p.add_argument("datasets", nargs=2)
    p.add_argument("--windowed", action="store_true")

    for name, func, text in (
        ("effective-filter", cmd_effective_filter, "impulse-response spectra per layer"),
        ("mask-check", cmd_mask_check, "ReLU mask stability under weight perturbation"),
    ):
        p = add(name, func, text)
        p.add_argument("--stack", help="stack description file (default: built-in 4-layer stack)")
        p.add_argument("--weights", help="MCNW weight file (default: random from --seed)")
        if name == "effective-filter":
            p.add_argument("--layer", type=int, default=None)
            p.add_argument("--channel", type=int, default=0)
            p.add_argument("--masks", choices=("ones", "recorded"), default="ones")
        else:
            p.add_argument("--trials", type=int, default=100)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"freqbias {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"freqbias {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
