"""Patch-dictionary prior: patch extraction, OMP, K-SVD training, and the patch-prior CS solver.

The reconstruction objective is

    E(theta, {a_i}) = ||Phi Psi theta - y||^2 + lambda1 ||theta||_1
                      + lambda2/Np sum_i ||P_i Psi theta - D a_i||^2
                      + lambda3/Np sum_i ||a_i||_1

minimized alternately over theta (proximal gradient) and the per-patch
codes ``a_i``.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dct import DctBasis
from .grid import CoefVector, Image, InvalidArgument, NumericalFailure, Sinogram
from .projector import RadonOperator
from .solver import (SolveConfig, SolveResult, _check_geometry, _Problem, initial_image,
                     proximal_gradient, soft_threshold, solve_plain_cs, step_size)

log = logging.getLogger(__name__)

MAGIC = b"PDCT"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class PatchGeometry:
    """Square ``patch x patch`` windows every ``stride`` pixels; ``image_size`` is ``(width, height)``.

    The last origin on each axis is clamped so the right and bottom edges are covered.
    """

    patch: int
    stride: int
    image_size: tuple[int, int]

    def __post_init__(self):
        w, h = self.image_size
        if not 1 <= self.patch <= min(w, h):
            raise InvalidArgument(f"patch size {self.patch} does not fit image {self.image_size}")
        if not 1 <= self.stride <= self.patch:
            raise InvalidArgument(f"stride must lie in [1, {self.patch}], got {self.stride}")
        object.__setattr__(self, "image_size", (int(w), int(h)))

    @property
    def dim(self) -> int:
        return self.patch * self.patch

    @staticmethod
    def _origins(length: int, p: int, stride: int) -> np.ndarray:
        o = list(range(0, length - p + 1, stride))
        if o[-1] != length - p:
            o.append(length - p)
        return np.array(o)

    @property
    def origins(self) -> list[tuple[int, int]]:
        """Patch origins ``(row, col)`` in row-major order."""
        w, h = self.image_size
        rows = self._origins(h, self.patch, self.stride)
        cols = self._origins(w, self.patch, self.stride)
        return [(int(r), int(c)) for r in rows for c in cols]

    @property
    def count(self) -> int:
        return len(self.origins)

    def index(self) -> np.ndarray:
        """``(count, dim)`` flat pixel indices of every patch."""
        w, _ = self.image_size
        p = self.patch
        org = np.array(self.origins)
        local = (np.arange(p)[:, None] * w + np.arange(p)[None, :]).ravel()
        return (org[:, 0] * w + org[:, 1])[:, None] + local[None, :]


def extract_patches(x: Image, g: PatchGeometry) -> np.ndarray:
    """Patches as rows of a ``(count, patch**2)`` array."""
    if (x.width, x.height) != g.image_size:
        raise InvalidArgument(f"image {x.width}x{x.height} does not match geometry {g.image_size}")
    return x.data.ravel()[g.index()]


def assemble_patches(patches: np.ndarray, g: PatchGeometry) -> tuple[Image, Image]:
    """Adjoint of :func:`extract_patches`: returns ``(sum image, coverage count image)``."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (g.count, g.dim):
        raise InvalidArgument(f"expected patches of shape {(g.count, g.dim)}, got {patches.shape}")
    idx = g.index().ravel()
    w, h = g.image_size
    total = np.bincount(idx, weights=patches.ravel(), minlength=w * h)
    count = np.bincount(idx, minlength=w * h).astype(np.float64)
    return Image(total.reshape(h, w)), Image(count.reshape(h, w))


@dataclass(frozen=True)
class PatchDictionary:
    """Unit-norm atoms as the columns of a ``(patch**2, m)`` matrix."""

    atoms: np.ndarray
    geometry: PatchGeometry
    error_trace: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        a = np.array(self.atoms, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != self.geometry.dim:
            raise InvalidArgument(
                f"atoms shape {a.shape} does not match patch dimension {self.geometry.dim}")
        norms = np.linalg.norm(a, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise InvalidArgument("dictionary atoms must have unit norm")
        a.flags.writeable = False
        object.__setattr__(self, "atoms", a)

    @property
    def m(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class KsvdConfig:
    atom_count: int
    sparsity: int = 8
    iterations: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.sparsity < 1 or self.iterations < 1:
            raise InvalidArgument("sparsity and iterations must be >= 1")

    @classmethod
    def for_patch(cls, patch: int, **kw) -> "KsvdConfig":
        """Defaults: 4x overcomplete, 8 nonzeros, 30 sweeps."""
        return cls(atom_count=4 * patch * patch, **kw)


def omp_batch(D: np.ndarray, X: np.ndarray, T: int, chunk: int = 4096) -> np.ndarray:
    """Orthogonal matching pursuit for every column of ``X``; returns ``(m, N)`` codes.

    Each column stops early once its residual has no correlation with the
    dictionary beyond round-off.
    """
    D = np.asarray(D, dtype=np.float64)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    d, m = D.shape
    if X.shape[0] != d:
        raise InvalidArgument(f"signals have dimension {X.shape[0]}, dictionary {d}")
    T = min(T, d, m)
    n = X.shape[1]
    codes = np.zeros((m, n))
    G = D.T @ D
    for lo in range(0, n, chunk):
        xs = X[:, lo:lo + chunk]
        codes[:, lo:lo + chunk] = _omp_chunk(D, G, xs, T)
    return codes


def _omp_chunk(D, G, X, T):
    d, m = D.shape
    xs = np.ascontiguousarray(X.T)          # (n, d), one signal per row
    n = xs.shape[0]
    corr0 = xs @ D                          # (n, m)
    scale = np.linalg.norm(xs, axis=1)
    support = np.zeros((n, T), dtype=np.int64)
    coef = np.zeros((n, T))
    active = scale > 0
    nsel = np.zeros(n, dtype=np.int64)
    resid = xs.copy()
    rows = np.arange(n)
    for s in range(T):
        c = resid @ D
        if s:
            c[rows[:, None], support[:, :s]] = 0.0
        j = np.argmax(np.abs(c), axis=1)
        cmax = np.abs(c[rows, j])
        active &= cmax > 1e-12 * np.maximum(scale, 1e-300)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        support[idx, s] = j[idx]
        nsel[idx] = s + 1
        S = support[idx, :s + 1]
        gss = G[S[:, :, None], S[:, None, :]]
        rhs = corr0[idx[:, None], S]
        try:
            a = np.linalg.solve(gss, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            a = np.stack([np.linalg.lstsq(g, r, rcond=None)[0] for g, r in zip(gss, rhs)])
        coef[idx, :s + 1] = a
        resid[idx] = xs[idx] - np.einsum("nsd,ns->nd", D.T[S], a)
    out = np.zeros((m, n))
    for s in range(T):
        sel = nsel > s
        np.add.at(out, (support[sel, s], rows[sel]), coef[sel, s])
    return out


def omp_encode(D: PatchDictionary | np.ndarray, v, T: int) -> CoefVector:
    """Sparse code of a single vector with at most ``T`` nonzeros."""
    atoms = D.atoms if isinstance(D, PatchDictionary) else np.asarray(D, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64).ravel()
    if T < 1 or T > atoms.shape[0]:
        raise InvalidArgument(f"sparsity must lie in [1, {atoms.shape[0]}], got {T}")
    return CoefVector(omp_batch(atoms, v[:, None], T)[:, 0])


def _normalize_columns(A, rng):
    norms = np.linalg.norm(A, axis=0)
    dead = norms < 1e-12
    if dead.any():
        A[:, dead] = rng.standard_normal((A.shape[0], int(dead.sum())))
        norms = np.linalg.norm(A, axis=0)
    return A / norms


def _reseed_duplicates(A, rng):
    """Replace columns that duplicate (up to sign) an earlier column."""
    for _ in range(100):
        g = np.abs(A.T @ A)
        np.fill_diagonal(g, 0.0)
        dup = np.flatnonzero(np.triu(g > 1 - 1e-8).any(axis=0))
        if dup.size == 0:
            return A
        A[:, dup] = _normalize_columns(rng.standard_normal((A.shape[0], dup.size)), rng)
    return A


def ksvd_train(patches: np.ndarray, cfg: KsvdConfig, geometry: PatchGeometry | None = None) -> PatchDictionary:
    """Learn an overcomplete dictionary with K-SVD.

    ``patches`` holds one training patch per row. Each sweep sparse-codes all
    patches with OMP (keeping a patch's previous code when OMP does worse),
    then updates each atom and its coefficients from the rank-1 SVD of the
    residual restricted to the patches that use it. Unused atoms are replaced
    by the currently worst-represented patch. The mean squared representation
    error after every sweep is stored in ``error_trace`` (entry 0 is for the
    initial dictionary) and never increases.
    """
    X = np.asarray(patches, dtype=np.float64).T
    d, n = X.shape
    m, T = cfg.atom_count, min(cfg.sparsity, d)
    if n < m:
        raise InvalidArgument(f"need at least {m} patches to train {m} atoms, got {n}")
    if geometry is None:
        p = int(round(math.sqrt(d)))
        if p * p != d:
            raise InvalidArgument("patch dimension is not a square; pass geometry")
        geometry = PatchGeometry(p, 1, (p, p))
    rng = np.random.default_rng(cfg.seed)
    D = _normalize_columns(X[:, rng.choice(n, size=m, replace=False)].copy(), rng)
    D = _reseed_duplicates(D, rng)

    A = omp_batch(D, X, T)
    R = X - D @ A
    trace = [float(np.mean(np.sum(R * R, axis=0)))]
    for sweep in range(cfg.iterations):
        if sweep:
            A_new = omp_batch(D, X, T)
            R_new = X - D @ A_new
            better = np.sum(R_new * R_new, axis=0) < np.sum(R * R, axis=0)
            A[:, better] = A_new[:, better]
            R[:, better] = R_new[:, better]
        for k in range(m):
            users = np.flatnonzero(A[k])
            if users.size == 0:
                err = np.sum(R * R, axis=0)
                worst = int(np.argmax(err))
                atom = R[:, worst] if err[worst] > 1e-24 else rng.standard_normal(d)
                D[:, k] = atom / np.linalg.norm(atom)
                continue
            E = R[:, users] + np.outer(D[:, k], A[k, users])
            # best rank-1 fit: leading left singular vector via the d x d Gram matrix
            _, vecs = np.linalg.eigh(E @ E.T)
            D[:, k] = vecs[:, -1]
            A[k, users] = D[:, k] @ E
            R[:, users] = E - np.outer(D[:, k], A[k, users])
        D = _reseed_duplicates(_normalize_columns(D, rng), rng)
        R = X - D @ A
        trace.append(float(np.mean(np.sum(R * R, axis=0))))
        log.debug("ksvd sweep %d: mse %.6g", sweep + 1, trace[-1])
    return PatchDictionary(D, geometry, tuple(trace))


def save_dictionary(D: PatchDictionary, path) -> None:
    """Write the flat binary format: ``PDCT`` magic, u32 version/d/m/p, then float64 atoms column-major."""
    d, m = D.atoms.shape
    head = MAGIC + struct.pack("<4I", FORMAT_VERSION, d, m, D.geometry.patch)
    body = np.asfortranarray(D.atoms).astype("<f8").tobytes(order="F")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(head + body)
    tmp.replace(path)


def load_dictionary(path, image_size: tuple[int, int] | None = None,
                    stride: int | None = None) -> PatchDictionary:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != MAGIC:
        raise InvalidArgument(f"{path}: not a patch dictionary file")
    version, d, m, p = struct.unpack("<4I", raw[4:20])
    if version != FORMAT_VERSION:
        raise InvalidArgument(f"{path}: unsupported dictionary version {version}")
    if p * p != d or len(raw) != 20 + 8 * d * m:
        raise InvalidArgument(f"{path}: inconsistent dictionary header")
    atoms = np.frombuffer(raw, dtype="<f8", offset=20).reshape((d, m), order="F")
    size = image_size or (p, p)
    geom = PatchGeometry(p, stride or max(1, p // 2), size)
    return PatchDictionary(atoms.astype(np.float64), geom)


def training_patches(images, patch: int, max_patches: int = 20000, seed: int = 0) -> np.ndarray:
    """All stride-1 patches of the templates, randomly subsampled to ``max_patches``."""
    rows = []
    for im in images:
        g = PatchGeometry(patch, 1, (im.width, im.height))
        rows.append(extract_patches(im, g))
    X = np.concatenate(rows)
    if X.shape[0] > max_patches:
        keep = np.sort(np.random.default_rng(seed).choice(X.shape[0], max_patches, replace=False))
        X = X[keep]
    return X


def sparse_code_l1(D: np.ndarray, X: np.ndarray, weight: float, A0: np.ndarray,
                   iterations: int, tol: float = 1e-10) -> np.ndarray:
    """Per-column monotone FISTA for ``||x - D a||^2 + weight ||a||_1``.

    Columns are independent: each keeps its own momentum, acceptance test and
    stopping flag, so a column's result never depends on the others.
    """
    L = 2.0 * np.linalg.norm(D, 2) ** 2
    step = 1.0 / L

    A = A0.copy()
    best = obj_cols(D, X, A, weight)
    Y = A.copy()
    t = np.ones(A.shape[1])
    active = np.ones(A.shape[1], dtype=bool)
    for _ in range(iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ya = Y[:, idx]
        Z = soft_threshold(Ya - step * 2.0 * (D.T @ (D @ Ya - X[:, idx])), step * weight)
        fz = obj_cols(D, X[:, idx], Z, weight)
        acc = fz <= best[idx]
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t[idx] ** 2))
        prev = best[idx].copy()
        A_old = A[:, idx]
        A_new = np.where(acc, Z, A_old)
        mom = np.where(acc, (t[idx] - 1.0) / t_next, 0.0)
        Y[:, idx] = A_new + mom * (A_new - A_old)
        t[idx] = np.where(acc, t_next, 1.0)
        A[:, idx] = A_new
        best[idx] = np.minimum(fz, prev)
        done = (prev - best[idx]) <= tol * np.maximum(prev, 1e-300)
        active[idx[done & acc]] = False
    return A


def obj_cols(D, X, A, weight):
    r = X - D @ A
    return np.sum(r * r, axis=0) + weight * np.abs(A).sum(axis=0)


def patch_objective(theta: np.ndarray, codes: np.ndarray, prob: _Problem, D: np.ndarray,
                    g: PatchGeometry, cfg: SolveConfig) -> float:
    """Full patch-prior objective for DCT coefficients ``theta`` and codes ``(m, Np)``."""
    img = prob.basis.synth(theta)
    res = prob.op.apply(img) - prob.y
    pd = img.ravel()[g.index()].T - D @ codes
    n_p = g.count
    return (float(np.sum(res * res)) + cfg.lambda1 * float(np.abs(theta).sum())
            + cfg.lambda2 / n_p * float(np.sum(pd * pd))
            + cfg.lambda3 / n_p * float(np.abs(codes).sum()))


def patch_smooth(prob: _Problem, D: np.ndarray, g: PatchGeometry, codes: np.ndarray, lam2: float):
    """Smooth part of the theta-step: data fit plus the patch-consistency term."""
    op, basis, y = prob.op, prob.basis, prob.y
    idx = g.index()
    n_p = g.count
    target = D @ codes
    w, h = g.image_size
    flat = idx.ravel()
    count = np.bincount(flat, minlength=w * h).reshape(h, w)
    back = np.bincount(flat, weights=target.T.ravel(), minlength=w * h).reshape(h, w)

    def f(theta):
        img = basis.synth(theta)
        res = op.apply(img) - y
        pd = img.ravel()[idx].T - target
        val = float(np.sum(res * res)) + lam2 / n_p * float(np.sum(pd * pd))

        def grad():
            gimg = 2.0 * op.apply_adjoint(res) + (2.0 * lam2 / n_p) * (count * img - back)
            return basis.anal(gimg)

        return val, grad

    return f, float(count.max())


def solve_with_patch_prior(sino: Sinogram, op: RadonOperator, basis: DctBasis,
                           D: PatchDictionary, cfg: SolveConfig,
                           geometry: PatchGeometry | None = None) -> SolveResult:
    """Alternate a proximal-gradient theta-step with per-patch sparse coding.

    ``cfg.alpha_mode == "exact"`` solves each patch's l1 problem (weight
    ``lambda3 / lambda2``) by warm-started monotone FISTA, which keeps the
    objective trace nonincreasing. ``"omp"`` codes each patch with OMP at
    ``cfg.sparsity`` nonzeros instead; faster, but the trace may rise.
    With ``lambda2 == 0`` the patch term vanishes and this is plain CS.
    """
    _check_geometry(sino, op, basis)
    if geometry is None:
        p = D.geometry.patch
        geometry = PatchGeometry(p, max(1, p // 2), op.image_size)
    if geometry.image_size != op.image_size or geometry.dim != D.atoms.shape[0]:
        raise InvalidArgument("patch geometry is inconsistent with the operator or dictionary")
    if cfg.lambda2 == 0:
        return solve_plain_cs(sino, op, basis, cfg)

    atoms = D.atoms
    prob = _Problem(op, basis, sino.data)
    idx = geometry.index()
    weight = cfg.lambda3 / cfg.lambda2

    def code(img, codes):
        X = img.ravel()[idx].T
        if cfg.alpha_mode == "omp":
            return omp_batch(atoms, X, cfg.sparsity)
        return sparse_code_l1(atoms, X, weight, codes, cfg.alpha_iters)

    x0 = initial_image(sino, op, cfg)
    theta = basis.anal(x0)
    codes = code(x0, np.zeros((atoms.shape[1], geometry.count)))
    trace = [patch_objective(theta, codes, prob, atoms, geometry, cfg)]
    inner = []
    outer = 0
    for outer in range(1, cfg.outer_iters + 1):
        smooth, cmax = patch_smooth(prob, atoms, geometry, codes, cfg.lambda2)
        step = step_size(op, cfg, cfg.lambda2 * cmax / geometry.count)
        theta, _, stats = proximal_gradient(smooth, cfg.lambda1, theta, step,
                                            cfg.inner_budget, cfg.tol)
        inner.append(stats.iterations)
        codes = code(basis.synth(theta), codes)
        trace.append(patch_objective(theta, codes, prob, atoms, geometry, cfg))
        if not math.isfinite(trace[-1]):
            raise NumericalFailure("non-finite objective after patch coding", trace)
        if abs(trace[-2] - trace[-1]) <= cfg.tol * abs(trace[-2]):
            break
    return SolveResult(Image(basis.synth(theta)), CoefVector(theta),
                       CoefVector(codes.T.ravel()), trace, outer, inner)
