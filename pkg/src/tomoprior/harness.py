"""Experiment driver: simulate measurements, run a method, score it, and write artifacts.

Every stochastic step draws from a generator seeded by ``ExperimentConfig.seed``,
so all numeric outputs except wall-clock timings are reproducible bit for bit.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataio
from .dct import DctBasis
from .fbp import FbpConfig, fbp_reconstruct
from .grid import AngleSet, Image, InvalidArgument, NumericalFailure, Sinogram
from .metrics import MetricReport, relative_mse, ssim
from .patch_dictionary import (KsvdConfig, PatchDictionary, PatchGeometry, ksvd_train,
                               load_dictionary, solve_with_patch_prior, training_patches)
from .pca_prior import TemplateSet, build_prior
from .projector import RadonOperator
from .solver import SolveConfig, solve_plain_cs, solve_with_prior

log = logging.getLogger(__name__)

METHODS = ("fbp", "cs", "cs-pca", "cs-dict")
CSV_FIELDS = ("method", "angles", "noise", "lambda1", "lambda2", "lambda3", "seed",
              "relative_mse", "ssim", "wall_seconds", "status", "message")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one reconstruction run.

    ``angles`` is a uniform count or an explicit tuple of degrees. ``lambdas`` is
    ``(lambda1, lambda2, lambda3)``. Patch and K-SVD fields left as ``None``
    take the defaults of :class:`PatchGeometry` / :class:`KsvdConfig`.
    """

    test_image: str | None = None
    templates_dir: str | None = None
    method: str = "cs-pca"
    angles: int | tuple[float, ...] = 12
    noise_fraction: float = 0.02
    lambdas: tuple[float, float, float] = (0.02, 2.0, 0.0)
    seed: int = 0
    output_dir: str | None = None
    model: str = "footprint"
    outer_iters: int = 10
    inner_budget: int = 2000
    tol: float = 1e-6
    prior_k: int | None = None
    patch_size: int | None = None
    patch_stride: int | None = None
    dictionary: str | None = None
    atom_count: int | None = None
    sparsity: int | None = None
    ksvd_iterations: int | None = None
    max_patches: int = 20000
    alpha_mode: str = "exact"
    label: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.noise_fraction < 0:
            raise InvalidArgument("noise_fraction must be nonnegative")
        lam = tuple(float(v) for v in self.lambdas)
        if len(lam) != 3 or min(lam) < 0:
            raise InvalidArgument("lambdas must be three nonnegative values")
        object.__setattr__(self, "lambdas", lam)
        if not isinstance(self.angles, int):
            object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        self.angle_set()

    def angle_set(self) -> AngleSet:
        if isinstance(self.angles, int):
            return AngleSet(self.angles)
        return AngleSet(len(self.angles), self.angles)

    @property
    def angle_label(self) -> str:
        return str(self.angles) if isinstance(self.angles, int) else " ".join(map(repr, self.angles))

    def solve_config(self) -> SolveConfig:
        l1, l2, l3 = self.lambdas
        if self.method == "cs":
            l2 = l3 = 0.0
        kw = {}
        if self.sparsity is not None:
            kw["sparsity"] = self.sparsity
        return SolveConfig(lambda1=l1, lambda2=l2, lambda3=l3, outer_iters=self.outer_iters,
                           inner_budget=self.inner_budget, tol=self.tol,
                           alpha_mode=self.alpha_mode, **kw)

    def manifest(self) -> dict[str, str]:
        """Flat ``key -> value`` view of every field, for the run manifest."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = " ".join(repr(v) for v in value)
            out[key] = "" if value is None else (repr(value) if isinstance(value, float) else str(value))
        return out


@dataclass(frozen=True)
class TuningSweep:
    parameter: str
    grid: tuple[float, ...]
    held_out_template_index: int = 0

    def __post_init__(self):
        if self.parameter not in ("lambda1", "lambda2", "lambda3"):
            raise InvalidArgument(f"unknown tuning parameter {self.parameter!r}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise InvalidArgument("tuning grid is empty")
        if min(grid) < 0:
            raise InvalidArgument("tuning grid values must be nonnegative")
        object.__setattr__(self, "grid", grid)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: MetricReport
    image: Image
    objective_trace: list[float]
    wall_seconds: float
    files: dict[str, Path] = field(default_factory=dict)


def add_measurement_noise(sino: Sinogram, fraction: float, seed) -> Sinogram:
    """Add iid Gaussian noise with std ``fraction * mean(sino)`` (mean of the clean data)."""
    if fraction < 0:
        raise InvalidArgument("noise fraction must be nonnegative")
    if fraction == 0:
        return sino
    sigma = fraction * float(sino.data.mean())
    rng = np.random.default_rng(seed)
    return Sinogram(sino.angles, sino.data + sigma * rng.standard_normal(sino.data.shape))


def simulate(truth: Image, cfg: ExperimentConfig) -> tuple[RadonOperator, Sinogram]:
    op = RadonOperator((truth.width, truth.height), cfg.angle_set(), model=cfg.model)
    return op, add_measurement_noise(op.forward(truth), cfg.noise_fraction, cfg.seed)


def patch_geometry(cfg: ExperimentConfig, size: tuple[int, int]) -> PatchGeometry:
    p = cfg.patch_size or 8
    return PatchGeometry(p, cfg.patch_stride or max(1, p // 2), size)


def ksvd_config(cfg: ExperimentConfig, patch: int) -> KsvdConfig:
    base = KsvdConfig.for_patch(patch, seed=cfg.seed)
    return replace(base, atom_count=cfg.atom_count or base.atom_count,
                   sparsity=cfg.sparsity or base.sparsity,
                   iterations=cfg.ksvd_iterations or base.iterations)


def train_dictionary(templates: Sequence[Image], cfg: ExperimentConfig,
                     size: tuple[int, int]) -> PatchDictionary:
    geom = patch_geometry(cfg, size)
    X = training_patches(templates, geom.patch, cfg.max_patches, cfg.seed)
    trained = ksvd_train(X, ksvd_config(cfg, geom.patch))
    return PatchDictionary(trained.atoms, geom, trained.error_trace)


def reconstruct(sino: Sinogram, op: RadonOperator, cfg: ExperimentConfig,
                templates: Sequence[Image] = (), dictionary: PatchDictionary | None = None):
    """Dispatch to the configured method; returns ``(image, objective trace)``."""
    if cfg.method == "fbp":
        return fbp_reconstruct(sino, FbpConfig(op.image_size, "cosine", bin_spacing=op.bin_spacing)), []
    basis = DctBasis(*op.image_size)
    scfg = cfg.solve_config()
    if cfg.method == "cs":
        res = solve_plain_cs(sino, op, basis, scfg)
    elif cfg.method == "cs-pca":
        if len(templates) < 2:
            raise InvalidArgument("cs-pca needs at least 2 templates")
        prior = build_prior(TemplateSet(tuple(templates)), cfg.prior_k)
        res = solve_with_prior(sino, op, basis, prior, scfg)
    else:
        if dictionary is None:
            if cfg.dictionary:
                dictionary = load_dictionary(cfg.dictionary, op.image_size, cfg.patch_stride)
            elif templates:
                dictionary = train_dictionary(templates, cfg, op.image_size)
            else:
                raise InvalidArgument("cs-dict needs a dictionary file or templates to train one")
        geom = PatchGeometry(dictionary.geometry.patch,
                             cfg.patch_stride or max(1, dictionary.geometry.patch // 2),
                             op.image_size)
        res = solve_with_patch_prior(sino, op, basis, dictionary, scfg, geom)
    return res.image, res.objective_trace


def _check_prerequisites(cfg: ExperimentConfig, templates) -> None:
    if cfg.method == "cs-pca" and len(templates) < 2:
        raise InvalidArgument("cs-pca needs at least 2 templates")
    if cfg.method == "cs-dict" and not cfg.dictionary and not templates:
        raise InvalidArgument("cs-dict needs a dictionary file or templates to train one")


def run_on_data(cfg: ExperimentConfig, truth: Image, templates: Sequence[Image] = (),
                dictionary: PatchDictionary | None = None, write: bool = True) -> ExperimentResult:
    """Simulate, reconstruct and score ``truth``; write artifacts when ``cfg.output_dir`` is set."""
    _check_prerequisites(cfg, templates)
    op, sino = simulate(truth, cfg)
    t0 = time.perf_counter()
    image, trace = reconstruct(sino, op, cfg, templates, dictionary)
    wall = time.perf_counter() - t0
    report = MetricReport(relative_mse(image, truth), ssim(image, truth))
    result = ExperimentResult(cfg, report, image, list(trace), wall)
    if write and cfg.output_dir:
        result.files = write_artifacts(result, Path(cfg.output_dir))
    return result


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Load the configured inputs from disk and run :func:`run_on_data`."""
    if not cfg.test_image:
        raise InvalidArgument("test_image is required")
    truth = dataio.load_image(cfg.test_image)
    templates = dataio.load_templates(cfg.templates_dir) if cfg.templates_dir else []
    return run_on_data(cfg, truth, templates)


def metrics_row(result: ExperimentResult | None, cfg: ExperimentConfig,
                error: str | None = None) -> dict[str, str]:
    l1, l2, l3 = cfg.lambdas
    row = {"method": cfg.label or cfg.method, "angles": cfg.angle_label,
           "noise": repr(cfg.noise_fraction), "lambda1": repr(l1), "lambda2": repr(l2),
           "lambda3": repr(l3), "seed": str(cfg.seed)}
    if result is None:
        row.update(relative_mse="", ssim="", wall_seconds="", status="error", message=error or "")
    else:
        row.update(relative_mse=repr(result.report.relative_mse), ssim=repr(result.report.ssim),
                   wall_seconds=f"{result.wall_seconds:.3f}", status="ok", message="")
    return row


def format_csv(rows: Sequence[dict[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_artifacts(result: ExperimentResult, out: Path) -> dict[str, Path]:
    cfg = result.config
    stem = cfg.label or cfg.method
    files = {
        "png": dataio.save_image_png(result.image, out / f"{stem}.png"),
        "raw": dataio.save_image_raw(result.image, out / f"{stem}.raw"),
        "metrics": dataio.atomic_write(out / f"{stem}_metrics.csv",
                                       format_csv([metrics_row(result, cfg)])),
        "trace": dataio.atomic_write(
            out / f"{stem}_trace.csv",
            "iteration,objective\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(result.objective_trace))),
        "manifest": dataio.atomic_write(out / f"{stem}_manifest.txt",
                                        dataio.format_keyvalues(cfg.manifest())),
    }
    return files


def run_table(cfgs: Sequence[ExperimentConfig], data: tuple[Image, Sequence[Image]] | None = None,
              output: str | Path | None = None) -> tuple[str, bool]:
    """One metrics row per config, in input order; failures become error rows.

    ``data`` optionally supplies ``(truth, templates)`` in memory instead of
    loading each config's files. Returns the CSV text and whether every row
    succeeded.
    """
    if not cfgs:
        raise InvalidArgument("no experiments given")
    rows, ok = [], True
    for cfg in cfgs:
        try:
            if data is not None:
                result = run_on_data(cfg, data[0], data[1])
            else:
                result = run_experiment(cfg)
            rows.append(metrics_row(result, cfg))
        except (InvalidArgument, NumericalFailure, OSError, ValueError) as exc:
            log.warning("experiment %s failed: %s", cfg.label or cfg.method, exc)
            rows.append(metrics_row(None, cfg, f"{type(exc).__name__}: {exc}"))
            ok = False
    text = format_csv(rows)
    if output is not None:
        dataio.atomic_write(output, text)
    return text, ok


def tune_lambda_on_data(sweep: TuningSweep, base: ExperimentConfig,
                        templates: Sequence[Image]) -> tuple[float, list[tuple[float, float]]]:
    """Reconstruct the held-out template at every grid value using a prior built from the rest.

    Returns the value with the lowest relative MSE (ties go to the smaller
    value) and the ``(value, relative_mse)`` table in grid order.
    """
    if not 0 <= sweep.held_out_template_index < len(templates):
        raise InvalidArgument(f"held-out index {sweep.held_out_template_index} out of range")
    held = templates[sweep.held_out_template_index]
    rest = [t for i, t in enumerate(templates) if i != sweep.held_out_template_index]
    dictionary = None
    if base.method == "cs-dict" and not base.dictionary:
        dictionary = train_dictionary(rest, base, (held.width, held.height))
    table = []
    for value in sweep.grid:
        lam = list(base.lambdas)
        lam[("lambda1", "lambda2", "lambda3").index(sweep.parameter)] = value
        cfg = replace(base, lambdas=tuple(lam), output_dir=None)
        res = run_on_data(cfg, held, rest, dictionary, write=False)
        table.append((value, res.report.relative_mse))
        log.info("%s=%g: relative mse %.6g", sweep.parameter, value, res.report.relative_mse)
    best_value, best_err = None, np.inf
    for value, err in sorted(table, key=lambda r: r[0]):
        if err < best_err:
            best_value, best_err = value, err
    return best_value, table


def tune_lambda(sweep: TuningSweep, base: ExperimentConfig) -> tuple[float, list[tuple[float, float]]]:
    if not base.templates_dir:
        raise InvalidArgument("tuning needs templates_dir")
    return tune_lambda_on_data(sweep, base, dataio.load_templates(base.templates_dir))
