"""Global eigenspace prior built from a small set of registered template slices.

The prior is the affine subspace ``mean + span(V)`` where ``V`` holds the
principal directions of the template covariance. With N templates and P
pixels the nonzero spectrum is obtained from the N x N Gram matrix of the
centred templates, so the P x P covariance is never formed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import CoefVector, Image, InvalidArgument

RELATIVE_EIG_CUTOFF = 1e-10


@dataclass(frozen=True)
class TemplateSet:
    templates: tuple[Image, ...]

    def __post_init__(self):
        ts = tuple(t if isinstance(t, Image) else Image(t) for t in self.templates)
        if len(ts) < 2:
            raise InvalidArgument(f"need at least 2 templates, got {len(ts)}")
        shapes = {t.shape for t in ts}
        if len(shapes) != 1:
            raise InvalidArgument(f"templates have mismatched sizes: {sorted(shapes)}")
        object.__setattr__(self, "templates", ts)

    @property
    def count(self) -> int:
        return len(self.templates)

    @property
    def shape(self) -> tuple[int, int]:
        return self.templates[0].shape

    def matrix(self) -> np.ndarray:
        """Templates as rows of an ``(N, P)`` array."""
        return np.stack([t.data.ravel() for t in self.templates])


@dataclass(frozen=True)
class EigenPrior:
    """``basis`` is the ``(P, K)`` matrix of orthonormal eigenvectors as columns."""

    mean: Image
    basis: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.float64).reshape(self.mean.data.size, -1)
        lam = np.asarray(self.eigenvalues, dtype=np.float64).ravel()
        if lam.size != b.shape[1]:
            raise InvalidArgument("eigenvalue count does not match eigenvector count")
        b.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mean.shape

    @property
    def eigenvectors(self) -> list[Image]:
        return [Image(v.reshape(self.shape)) for v in self.basis.T]

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        return self.basis.T @ (np.ravel(x) - self.mean.data.ravel())

    def expand(self, alpha: np.ndarray) -> np.ndarray:
        return self.mean.data + (self.basis @ np.asarray(alpha)).reshape(self.shape)


def build_prior(ts: TemplateSet | Sequence[Image], k: int | None = None) -> EigenPrior:
    """Mean and principal directions of the template set.

    Keeps the ``k`` leading components, or by default every component whose
    eigenvalue exceeds ``1e-10`` times the largest. Eigenvalues are those of
    ``C = 1/(N-1) sum (t_i - mu)(t_i - mu)^T``. Each eigenvector's
    largest-magnitude entry is made positive.
    """
    if not isinstance(ts, TemplateSet):
        ts = TemplateSet(tuple(ts))
    n = ts.count
    if k is not None and not 0 <= k <= n - 1:
        raise InvalidArgument(f"k must lie in [0, {n - 1}], got {k}")
    t = ts.matrix()
    mu = t.mean(axis=0)
    xc = t - mu
    gram = xc @ xc.T / (n - 1)
    lam, u = np.linalg.eigh(gram)
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    u = u[:, order]
    # spectrum at round-off level of the raw templates counts as zero
    floor = 1e-20 * np.sum(t * t) / (n - 1)
    keep = (lam > RELATIVE_EIG_CUTOFF * lam[0]) & (lam > floor)
    keep[n - 1:] = False  # centring removes one degree of freedom
    if k is not None:
        keep[k:] = False
    lam, u = lam[keep], u[:, keep]
    v = xc.T @ u
    if v.shape[1]:
        v, r = np.linalg.qr(v / np.linalg.norm(v, axis=0))
        v *= np.sign(np.diag(r))
        idx = np.argmax(np.abs(v), axis=0)
        v *= np.sign(v[idx, np.arange(v.shape[1])])
    return EigenPrior(Image(mu.reshape(ts.shape)), v, lam)


def project_alpha(prior: EigenPrior, x: Image) -> CoefVector:
    """Eigen coefficients ``V^T (x - mean)``: the least-squares fit of ``x`` in the prior."""
    if x.shape != prior.shape:
        raise InvalidArgument(f"image shape {x.shape} does not match prior {prior.shape}")
    return CoefVector(prior.coefficients(x.data))


def reconstruct_from_alpha(prior: EigenPrior, alpha: CoefVector) -> Image:
    if alpha.length != prior.k:
        raise InvalidArgument(f"alpha length {alpha.length} does not match K={prior.k}")
    return Image(prior.expand(alpha.data))
