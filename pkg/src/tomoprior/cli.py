"""Command-line entry point: ``tomoprior <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration, 3 I/O error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import dataio
from .fbp import FILTERS, FbpConfig, fbp_reconstruct
from .grid import InvalidArgument, NumericalFailure
from .harness import (METHODS, ExperimentConfig, TuningSweep, add_measurement_noise,
                      ksvd_config, run_experiment, run_table, tune_lambda)
from .patch_dictionary import ksvd_train, save_dictionary, training_patches
from .pca_prior import build_prior
from .projector import MODELS, RadonOperator

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def _angles(values: list[str]) -> int | tuple[float, ...]:
    if len(values) == 1 and "." not in values[0]:
        return int(values[0])
    return tuple(float(v) for v in values)


def _grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    return tuple(float(v) for v in text.split(","))


def _add_experiment_flags(p: argparse.ArgumentParser, need_test: bool = True) -> None:
    p.add_argument("--test-image", required=need_test)
    p.add_argument("--templates-dir")
    p.add_argument("--method", choices=METHODS, default="cs-pca")
    p.add_argument("--angles", nargs="+", default=["12"],
                   help="uniform angle count, or an explicit list of degrees")
    p.add_argument("--noise-fraction", type=float, default=0.02)
    p.add_argument("--lambdas", nargs=3, type=float, metavar=("L1", "L2", "L3"),
                   default=(0.02, 2.0, 0.0))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output-dir")
    p.add_argument("--model", choices=MODELS, default="footprint")
    p.add_argument("--outer-iters", type=int, default=10)
    p.add_argument("--inner-budget", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--prior-k", type=int)
    p.add_argument("--patch-size", type=int)
    p.add_argument("--patch-stride", type=int)
    p.add_argument("--dictionary")
    p.add_argument("--atom-count", type=int)
    p.add_argument("--sparsity", type=int)
    p.add_argument("--ksvd-iterations", type=int)
    p.add_argument("--max-patches", type=int, default=20000)
    p.add_argument("--alpha-mode", choices=("exact", "omp"), default="exact")


def _config(args, **over) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    kw = {k: v for k, v in vars(args).items() if k in names}
    kw["angles"] = _angles(args.angles)
    kw["lambdas"] = tuple(args.lambdas)
    kw.update(over)
    return ExperimentConfig(**kw)


def cmd_project(args) -> int:
    img = dataio.load_image(args.image)
    op = RadonOperator((img.width, img.height), ExperimentConfig(angles=_angles(args.angles)).angle_set(),
                       model=args.model)
    sino = add_measurement_noise(op.forward(img), args.noise_fraction, args.seed)
    dataio.save_sinogram(sino, args.output, (img.width, img.height))
    return EXIT_OK


def cmd_fbp(args) -> int:
    sino, size = dataio.load_sinogram(args.sinogram)
    if args.width and args.height:
        size = (args.width, args.height)
    if size is None:
        raise InvalidArgument("image size unknown: pass --width and --height")
    img = fbp_reconstruct(sino, FbpConfig(size, args.filter))
    out = Path(args.output)
    dataio.save_image_png(img, out.with_suffix(".png"))
    dataio.save_image_raw(img, out.with_suffix(".raw"))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    res = run_experiment(_config(args))
    print(f"relative_mse={res.report.relative_mse!r} ssim={res.report.ssim!r}")
    return EXIT_OK


def cmd_train_dict(args) -> int:
    templates = dataio.load_templates(args.templates_dir)
    if not templates:
        raise InvalidArgument(f"no templates found in {args.templates_dir}")
    cfg = ExperimentConfig(method="cs-dict", seed=args.seed, patch_size=args.patch_size,
                           atom_count=args.atom_count, sparsity=args.sparsity,
                           ksvd_iterations=args.iterations, max_patches=args.max_patches)
    X = training_patches(templates, args.patch_size, args.max_patches, args.seed)
    D = ksvd_train(X, ksvd_config(cfg, args.patch_size))
    save_dictionary(D, args.output)
    print(f"atoms={D.m} final_mse={D.error_trace[-1]!r}")
    return EXIT_OK


def cmd_build_prior(args) -> int:
    templates = dataio.load_templates(args.templates_dir)
    prior = build_prior(templates, args.k)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as fh:
        np.savez(fh, mean=prior.mean.data, basis=prior.basis, eigenvalues=prior.eigenvalues)
    print(f"components={prior.k}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config(args)
    sweep = TuningSweep(args.parameter, _grid(args.grid), args.held_out_index)
    best, table = tune_lambda(sweep, cfg)
    text = f"{args.parameter},relative_mse\n" + "".join(f"{v!r},{e!r}\n" for v, e in table)
    if args.output:
        dataio.atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    print(f"best {args.parameter}={best!r}")
    return EXIT_OK


def cmd_table(args) -> int:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        cfgs = [ExperimentConfig(**row) for row in raw]
    else:
        base = _config(args)
        cfgs = [replace(base, method=m, output_dir=None) for m in args.methods]
    text, ok = run_table(cfgs, output=args.output)
    if not args.output:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tomoprior", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="simulate a (noisy) sinogram from an image")
    p.add_argument("--image", required=True)
    p.add_argument("--angles", nargs="+", default=["12"])
    p.add_argument("--noise-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--model", choices=MODELS, default="footprint")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fbp", help="filtered backprojection of a stored sinogram")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--filter", choices=FILTERS, default="cosine")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fbp)

    p = sub.add_parser("reconstruct", help="run one experiment end to end")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train-dict", help="train a K-SVD patch dictionary")
    p.add_argument("--templates-dir", required=True)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--atom-count", type=int)
    p.add_argument("--sparsity", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--max-patches", type=int, default=20000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train_dict)

    p = sub.add_parser("build-prior", help="build the eigenspace prior (npz)")
    p.add_argument("--templates-dir", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_build_prior)

    p = sub.add_parser("tune", help="sweep one lambda on a held-out template")
    _add_experiment_flags(p, need_test=False)
    p.add_argument("--parameter", choices=("lambda1", "lambda2", "lambda3"), default="lambda2")
    p.add_argument("--grid", default="0:2:0.1")
    p.add_argument("--held-out-index", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("table", help="run several methods and write one CSV")
    _add_experiment_flags(p, need_test=False)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--config", help="JSON list of ExperimentConfig objects")
    p.add_argument("--output")
    p.set_defaults(func=cmd_table)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidArgument, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
