"""Compressive-sensing reconstruction in the DCT domain, with and without the eigenspace prior.

Plain CS minimizes

    E(theta) = ||A theta - y||^2 + lambda1 ||theta||_1,       A = Phi Psi

and the prior-aided variant alternates over

    E(theta, alpha) = ||A theta - y||^2 + lambda1 ||theta||_1
                      + lambda2 ||Psi theta - (mu + V alpha)||^2

with a proximal-gradient theta-step and the closed-form alpha-step
``alpha = V^T (Psi theta - mu)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dct import DctBasis
from .fbp import FbpConfig, fbp_reconstruct
from .grid import CoefVector, Image, InvalidArgument, NumericalFailure, Sinogram
from .pca_prior import EigenPrior
from .projector import RadonOperator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    """Regularization weights and iteration budgets.

    ``lambda3``, ``alpha_mode``, ``alpha_iters`` and ``sparsity`` only affect the
    patch-dictionary solver.
    """

    lambda1: float = 1e-3
    lambda2: float = 0.0
    lambda3: float = 0.0
    outer_iters: int = 10
    inner_budget: int = 2000
    tol: float = 1e-6
    step_safety: float = 0.95
    power_iters: int = 100
    init_filter: str = "cosine"
    alpha_mode: str = "exact"
    alpha_iters: int = 300
    sparsity: int = 8

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda3 < 0:
            raise InvalidArgument("regularization weights must be nonnegative")
        if self.outer_iters < 1 or self.inner_budget < 1:
            raise InvalidArgument("iteration budgets must be >= 1")
        if not 0 < self.step_safety <= 1:
            raise InvalidArgument("step_safety must lie in (0, 1]")
        if self.alpha_mode not in ("exact", "omp"):
            raise InvalidArgument(f"unknown alpha_mode {self.alpha_mode!r}")


@dataclass
class SolveResult:
    image: Image
    theta: CoefVector
    alpha: CoefVector | None
    objective_trace: list[float]
    iterations_used: int
    inner_iterations: list[int] = field(default_factory=list)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass
class InnerStats:
    iterations: int
    trace: list[float]


def proximal_gradient(
    smooth: Callable[[np.ndarray], tuple[float, Callable[[], np.ndarray]]],
    lam1: float,
    x0: np.ndarray,
    step: float,
    max_iter: int,
    tol: float,
    patience: int = 3,
) -> tuple[np.ndarray, float, InnerStats]:
    """Monotone FISTA for ``f(x) + lam1 ||x||_1`` with ``f`` convex and smooth.

    ``smooth(x)`` returns ``(f(x), grad)`` where ``grad()`` lazily evaluates the
    gradient at ``x``. A candidate that does not lower the objective is
    rejected and momentum restarts, so the returned objective never exceeds
    the objective at ``x0``. Stops after ``patience`` consecutive iterations
    whose relative decrease is below ``tol``.
    """

    def total(fx, x):
        return fx + lam1 * np.abs(x).sum()

    x = x0.copy()
    fx, gx = smooth(x)
    best = total(fx, x)
    trace = [best]
    if not math.isfinite(best):
        raise NumericalFailure("non-finite objective at the initial point", trace)

    # zero is optimal iff the gradient there lies inside the l1 ball
    f0, g0 = smooth(np.zeros_like(x))
    if np.abs(g0()).max() <= lam1:
        if f0 <= best:
            return np.zeros_like(x), f0, InnerStats(0, trace + [f0])

    y, gy = x, gx
    t = 1.0
    quiet = 0
    it = 0
    for it in range(1, max_iter + 1):
        z = soft_threshold(y - step * gy(), step * lam1)
        fz, gz = smooth(z)
        cand = total(fz, z)
        if not math.isfinite(cand):
            raise NumericalFailure("non-finite objective in proximal gradient", trace)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        prev = best
        if cand <= best:
            x_prev, x, best, gx = x, z, cand, gz
            y = x + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next
            y_is_x = False
        else:
            # reject and restart momentum from the incumbent
            y, t, y_is_x = x, 1.0, True
        trace.append(best)
        if prev - best <= tol * abs(prev):
            quiet += 1
            if quiet >= patience:
                break
        else:
            quiet = 0
        gy = gx if y_is_x else smooth(y)[1]
    return x, best - lam1 * np.abs(x).sum(), InnerStats(it, trace)


class _Problem:
    """Quadratic data-fit plus optional image-domain tether ``lam2 ||Psi theta - r||^2``."""

    def __init__(self, op: RadonOperator, basis: DctBasis, y: np.ndarray):
        self.op = op
        self.basis = basis
        self.y = y

    def smooth(self, lam2: float = 0.0, r: np.ndarray | None = None):
        op, basis, y = self.op, self.basis, self.y

        def f(theta):
            img = basis.synth(theta)
            res = op.apply(img) - y
            val = float(np.sum(res * res))
            if lam2:
                d = img - r
                val += lam2 * float(np.sum(d * d))

            def grad():
                g = 2.0 * op.apply_adjoint(res)
                if lam2:
                    g = g + 2.0 * lam2 * d
                return basis.anal(g)

            return val, grad

        return f


def _check_geometry(sino: Sinogram, op: RadonOperator, basis: DctBasis) -> None:
    if sino.data.shape != op.sino_shape:
        raise InvalidArgument(
            f"sinogram shape {sino.data.shape} does not match operator {op.sino_shape}")
    if not np.allclose(sino.angles, op.angles.degrees, rtol=0, atol=1e-9):
        raise InvalidArgument("sinogram angles do not match operator angles")
    if basis.shape != op.image_shape:
        raise InvalidArgument(f"basis shape {basis.shape} does not match operator {op.image_shape}")


def initial_image(sino: Sinogram, op: RadonOperator, cfg: SolveConfig) -> np.ndarray:
    """FBP warm start shared by every CS solver."""
    img = fbp_reconstruct(sino, FbpConfig(op.image_size, cfg.init_filter, bin_spacing=op.bin_spacing))
    return img.data


def step_size(op: RadonOperator, cfg: SolveConfig, extra_curvature: float = 0.0) -> float:
    """``safety / L`` with ``L = 2 (||Phi||^2 + extra)``; Psi is orthonormal."""
    lip = 2.0 * (op.norm(cfg.power_iters) ** 2 + extra_curvature)
    return cfg.step_safety / lip


def objective_value(theta: CoefVector, alpha: CoefVector | None, sino: Sinogram,
                    op: RadonOperator, basis: DctBasis, prior: EigenPrior | None,
                    cfg: SolveConfig) -> float:
    """Objective with the eigenspace term included when both ``prior`` and ``alpha`` are given."""
    _check_geometry(sino, op, basis)
    if theta.length != basis.size:
        raise InvalidArgument("theta length does not match the basis")
    img = basis.synth(theta.data)
    res = op.apply(img) - sino.data
    val = float(np.sum(res * res)) + cfg.lambda1 * float(np.abs(theta.data).sum())
    if prior is not None and alpha is not None:
        if prior.shape != basis.shape:
            raise InvalidArgument("prior shape does not match the basis")
        if alpha.length != prior.k:
            raise InvalidArgument("alpha length does not match the prior")
        d = img - prior.expand(alpha.data)
        val += cfg.lambda2 * float(np.sum(d * d))
    return val


def solve_plain_cs(sino: Sinogram, op: RadonOperator, basis: DctBasis,
                   cfg: SolveConfig) -> SolveResult:
    """l1-regularized least squares over DCT coefficients, warm-started from FBP."""
    _check_geometry(sino, op, basis)
    prob = _Problem(op, basis, sino.data)
    theta0 = basis.anal(initial_image(sino, op, cfg))
    theta, _, stats = proximal_gradient(
        prob.smooth(), cfg.lambda1, theta0, step_size(op, cfg), cfg.inner_budget, cfg.tol)
    trace = [stats.trace[0], stats.trace[-1]]
    return SolveResult(Image(basis.synth(theta)), CoefVector(theta), None, trace, 1,
                       [stats.iterations])


def solve_with_prior(sino: Sinogram, op: RadonOperator, basis: DctBasis, prior: EigenPrior,
                     cfg: SolveConfig) -> SolveResult:
    """Alternate the tethered theta-step with the closed-form alpha-step.

    With ``lambda2 == 0`` the prior has no influence and this is exactly
    :func:`solve_plain_cs`.
    """
    _check_geometry(sino, op, basis)
    if prior.shape != op.image_shape:
        raise InvalidArgument(f"prior shape {prior.shape} does not match operator {op.image_shape}")
    if cfg.lambda2 == 0:
        res = solve_plain_cs(sino, op, basis, cfg)
        res.alpha = CoefVector(prior.coefficients(res.image.data))
        return res

    prob = _Problem(op, basis, sino.data)
    lam1, lam2 = cfg.lambda1, cfg.lambda2
    step = step_size(op, cfg, lam2)
    x0 = initial_image(sino, op, cfg)
    theta = basis.anal(x0)
    alpha = prior.coefficients(x0)

    def energy(theta, alpha):
        f, _ = prob.smooth(lam2, prior.expand(alpha))(theta)
        return f + lam1 * float(np.abs(theta).sum())

    trace = [energy(theta, alpha)]
    inner = []
    outer = 0
    for outer in range(1, cfg.outer_iters + 1):
        r = prior.expand(alpha)
        theta, _, stats = proximal_gradient(
            prob.smooth(lam2, r), lam1, theta, step, cfg.inner_budget, cfg.tol)
        inner.append(stats.iterations)
        alpha = prior.coefficients(basis.synth(theta))
        trace.append(energy(theta, alpha))
        if not math.isfinite(trace[-1]):
            raise NumericalFailure("non-finite objective after alpha update", trace)
        log.debug("outer %d: E=%.6g (%d inner)", outer, trace[-1], stats.iterations)
        if trace[-2] - trace[-1] <= cfg.tol * abs(trace[-2]):
            break
    return SolveResult(Image(basis.synth(theta)), CoefVector(theta), CoefVector(alpha),
                       trace, outer, inner)
