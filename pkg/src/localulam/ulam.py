"""Conditional (patch-local) Ulam matrices, their window products and SVDs.

A window starting at ``t`` seeds the patch bins, advects a lattice of ``Q``
test points per bin over ``[t, t+1]``, records landing frequencies, then
re-seeds every bin that was hit and repeats for ``n`` steps.  The window
operator is the left-to-right product of the ``n`` step matrices.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmptyPatchError, TotalEscapeError
from .flow import FlowSpec, advect_points
from .geometry import Grid, Patch, bins_in_patch, bins_of_points, lattice_offsets

__all__ = [
    "TransitionMatrix",
    "ModeWindow",
    "TransitionCache",
    "ShortSVDWarning",
    "step_matrix",
    "build_window",
    "build_windows",
    "compose",
    "truncated_svd",
    "lanczos_svd",
    "dump_matrix",
    "load_matrix",
]

DENSE_SVD_LIMIT = 256


class ShortSVDWarning(UserWarning):
    """Fewer singular triples than requested were attainable."""


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Sparse bin-to-bin matrix with explicit row and column bin ids."""

    row_bins: np.ndarray
    col_bins: np.ndarray
    matrix: sp.csr_matrix

    def __post_init__(self):
        rows = np.asarray(self.row_bins, dtype=np.int64)
        cols = np.asarray(self.col_bins, dtype=np.int64)
        mat = sp.csr_matrix(self.matrix, dtype=float)
        if mat.shape != (rows.size, cols.size):
            raise ValueError(f"matrix shape {mat.shape} does not match index sets "
                             f"({rows.size}, {cols.size})")
        object.__setattr__(self, "row_bins", rows)
        object.__setattr__(self, "col_bins", cols)
        object.__setattr__(self, "matrix", mat)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, vec):
        return self.matrix @ vec


@dataclass(eq=False)
class ModeWindow:
    """One rolling window: its step matrices, their product and leading SVD."""

    t: float
    n: int
    step_matrices: list
    composed: TransitionMatrix
    U: np.ndarray | None = None
    S: np.ndarray | None = None
    V: np.ndarray | None = None

    @property
    def row_bins(self) -> np.ndarray:
        return self.composed.row_bins

    @property
    def col_bins(self) -> np.ndarray:
        return self.composed.col_bins

    @property
    def last_step(self) -> TransitionMatrix:
        return self.step_matrices[-1]

    def with_svd(self, N: int) -> "ModeWindow":
        self.U, self.S, self.V = truncated_svd(self.composed, N)
        return self


class TransitionCache:
    """Memoised one-step landing counts keyed by ``(start time, bin)``.

    A bin's row depends only on where its lattice lands, so overlapping
    windows reuse each other's advection work.  Rows are computed in chunks
    (optionally on a thread pool) and stored in bin order, which keeps the
    results independent of the number of workers.
    """

    def __init__(self, field, grid: Grid, Q: int, spec: FlowSpec, *,
                 backend: str | None = None, workers: int = 1, chunk_points: int = 65536):
        self.field = field
        self.grid = grid
        self.Q = int(Q)
        self.spec = spec
        self.backend = backend
        self.workers = max(1, int(workers))
        self.chunk_bins = max(1, chunk_points // self.Q)
        self._offsets = lattice_offsets(self.Q)
        self._rows: dict[float, dict[int, tuple[np.ndarray, np.ndarray]]] = {}

    def _seed(self, bins: np.ndarray) -> np.ndarray:
        g = self.grid
        i, j = g.ij(bins)
        x0 = g.domain.x_min + i * g.bin_width
        y0 = g.domain.y_min + j * g.bin_height
        px = x0[:, None] + self._offsets[None, :, 0] * g.bin_width
        py = y0[:, None] + self._offsets[None, :, 1] * g.bin_height
        return np.column_stack([px.ravel(), py.ravel()])

    def _landing(self, bins: np.ndarray, t0: float) -> np.ndarray:
        pts = self._seed(bins)
        out = advect_points(self.field, pts, t0, self.spec, self.grid.domain, self.backend)
        return bins_of_points(self.grid, out[:, 0], out[:, 1]).reshape(bins.size, self.Q)

    def landing(self, bins, t0: float) -> np.ndarray:
        """Landing bin of every test point, shape ``(len(bins), Q)``; -1 marks escape."""
        bins = np.asarray(bins, dtype=np.int64)
        chunks = [bins[k:k + self.chunk_bins] for k in range(0, bins.size, self.chunk_bins)]
        if not chunks:
            return np.empty((0, self.Q), dtype=np.int64)
        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(lambda c: self._landing(c, t0), chunks))
        else:
            parts = [self._landing(c, t0) for c in chunks]
        return np.concatenate(parts, axis=0)

    def rows(self, bins, t0: float):
        """``(cols, counts)`` per bin for the step starting at ``t0``."""
        t0 = float(t0)
        table = self._rows.setdefault(t0, {})
        bins = np.asarray(bins, dtype=np.int64)
        todo = np.array([b for b in bins.tolist() if b not in table], dtype=np.int64)
        if todo.size:
            land = self.landing(todo, t0)
            for b, row in zip(todo.tolist(), land):
                row = row[row >= 0]
                cols, counts = np.unique(row, return_counts=True)
                table[b] = (cols, counts)
        return [table[b] for b in bins.tolist()]

    def evict_before(self, t: float) -> None:
        for key in [k for k in self._rows if k < t]:
            del self._rows[key]

    def clear(self) -> None:
        self._rows.clear()


def step_matrix(cache: TransitionCache, row_bins, t0: float) -> TransitionMatrix:
    """One conditional Ulam matrix: rows ``row_bins``, columns every bin hit."""
    row_bins = np.asarray(row_bins, dtype=np.int64)
    rows = cache.rows(row_bins, t0)
    lens = np.array([c.size for c, _ in rows], dtype=np.int64)
    if lens.sum() == 0:
        raise TotalEscapeError(f"all test points escaped the domain on the step from t={t0}")
    cols = np.concatenate([c for c, _ in rows])
    vals = np.concatenate([k for _, k in rows]).astype(float) / cache.Q
    col_bins, local = np.unique(cols, return_inverse=True)
    indptr = np.concatenate([[0], np.cumsum(lens)])
    mat = sp.csr_matrix((vals, local.ravel(), indptr), shape=(row_bins.size, col_bins.size))
    return TransitionMatrix(row_bins, col_bins, mat)


def compose(step_matrices) -> TransitionMatrix:
    """Left-to-right sparse product of a chain of transition matrices."""
    mats = list(step_matrices)
    if not mats:
        raise ValueError("need at least one matrix")
    out = mats[0].matrix
    for a, b in zip(mats, mats[1:]):
        if not np.array_equal(a.col_bins, b.row_bins):
            raise ValueError("index-set mismatch: column bins of one factor differ from "
                             "row bins of the next")
        out = out @ b.matrix
    out = sp.csr_matrix(out)
    out.sort_indices()
    return TransitionMatrix(mats[0].row_bins, mats[-1].col_bins, out)


def build_window(field, grid: Grid, patch: Patch, t: float, n: int, Q: int, spec: FlowSpec,
                 *, cache: TransitionCache | None = None, seed_bins=None) -> ModeWindow:
    """Step matrices and their product for the window starting at ``t``.

    ``seed_bins`` overrides the patch (used for whole-domain runs).
    """
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    if cache is None:
        cache = TransitionCache(field, grid, Q, spec)
    elif cache.Q != Q:
        raise ValueError("cache was built for a different Q")
    bins = bins_in_patch(grid, patch) if seed_bins is None else np.asarray(seed_bins, dtype=np.int64)
    if bins.size == 0:
        raise EmptyPatchError(f"no bin centre lies inside {patch}")
    steps = []
    for k in range(n):
        m = step_matrix(cache, bins, t + k * spec.tau)
        steps.append(m)
        bins = m.col_bins
    return ModeWindow(float(t), int(n), steps, compose(steps))


def build_windows(field, grid: Grid, patch: Patch, times, n: int, Q: int, spec: FlowSpec,
                  N: int, *, cache: TransitionCache | None = None, seed_bins=None,
                  progress=None) -> list[ModeWindow]:
    """Windows with SVDs for every start time in ``times`` (ascending)."""
    if cache is None:
        cache = TransitionCache(field, grid, Q, spec)
    out = []
    for t in times:
        cache.evict_before(t)
        w = build_window(field, grid, patch, t, n, Q, spec, cache=cache, seed_bins=seed_bins)
        out.append(w.with_svd(N))
        if progress is not None:
            progress(w)
    return out


# --------------------------------------------------------------------------
# truncated SVD


def _fix_signs(U, S, V):
    """Largest-magnitude entry of each right vector positive; left vector follows."""
    for k in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, k])))
        if V[i, k] < 0:
            V[:, k] = -V[:, k]
            U[:, k] = -U[:, k]
    return U, S, V


def _orth_against(x, basis, passes=2):
    for _ in range(passes):
        if basis.shape[1]:
            x = x - basis @ (basis.T @ x)
    return x


def _random_orth(rng, basis, size):
    for _ in range(10):
        x = _orth_against(rng.standard_normal(size), basis)
        nx = np.linalg.norm(x)
        if nx > 1e-8:
            return x / nx
    raise ArithmeticError("could not extend orthonormal basis")


def lanczos_svd(A, N: int, *, tol: float = 1e-13, seed: int = 0, k0: int | None = None):
    """Leading ``N`` singular triples by Golub-Kahan-Lanczos bidiagonalisation.

    Full reorthogonalisation is applied to both Lanczos bases.  The
    recurrence is extended until the residual bound of every wanted Ritz
    triple is below ``tol * sigma_1``, or until the Krylov space is full.
    """
    A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float)
    m, n = A.shape
    kmax = min(m, n)
    N = min(N, kmax)
    if N == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0))
    rng = np.random.default_rng(seed)
    k_target = min(kmax, k0 or max(2 * N + 10, 30))
    anorm = float(spla.norm(A, 1)) if sp.issparse(A) else float(np.abs(A).sum(axis=0).max())
    eps = np.finfo(float).eps * max(anorm, 1.0) * max(m, n)

    P = np.zeros((n, kmax + 1))
    Qb = np.zeros((m, kmax))
    alpha = np.zeros(kmax)
    beta = np.zeros(kmax)
    P[:, 0] = _random_orth(rng, P[:, :0], n)
    j = 0
    while True:
        while j < k_target:
            q = A @ P[:, j]
            if j > 0:
                q -= beta[j - 1] * Qb[:, j - 1]
            q = _orth_against(q, Qb[:, :j])
            a = np.linalg.norm(q)
            if a <= eps:
                alpha[j] = 0.0
                Qb[:, j] = _random_orth(rng, Qb[:, :j], m)
            else:
                alpha[j] = a
                Qb[:, j] = q / a
            r = A.T @ Qb[:, j] - alpha[j] * P[:, j]
            r = _orth_against(r, P[:, :j + 1])
            b = np.linalg.norm(r)
            if j + 1 < n:
                if b <= eps:
                    beta[j] = 0.0
                    P[:, j + 1] = _random_orth(rng, P[:, :j + 1], n)
                else:
                    beta[j] = b
                    P[:, j + 1] = r / b
            else:
                beta[j] = b
            j += 1
        k = j
        B = np.diag(alpha[:k]) + np.diag(beta[:k - 1], 1)
        X, s, Yt = np.linalg.svd(B)
        bound = beta[k - 1] * np.abs(X[k - 1, :N])
        if k >= kmax or np.all(bound <= tol * max(s[0], 1e-300)):
            break
        k_target = min(kmax, 2 * k)
    U = Qb[:, :k] @ X[:, :N]
    V = P[:, :k] @ Yt[:N].T
    return U, s[:N].copy(), V


def truncated_svd(matrix, N: int, *, method: str = "auto"):
    """Leading ``N`` singular triples ``(U, S, V)`` with ``S`` descending.

    ``matrix`` may be a :class:`TransitionMatrix`, a sparse matrix or an
    array.  ``method`` is ``"auto"`` (dense when the smaller dimension is
    at most 256, Lanczos otherwise), ``"dense"`` or ``"lanczos"``.  When
    fewer than ``N`` triples exist a :class:`ShortSVDWarning` is issued and
    the attainable ones are returned.
    """
    A = matrix.matrix if isinstance(matrix, TransitionMatrix) else matrix
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    m, n = A.shape
    kmax = min(m, n)
    if N > kmax:
        warnings.warn(f"requested {N} singular triples of a {m}x{n} matrix; returning {kmax}",
                      ShortSVDWarning, stacklevel=2)
    if method == "auto":
        method = "dense" if kmax <= DENSE_SVD_LIMIT else "lanczos"
    if method == "dense":
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        U, S, Vt = np.linalg.svd(dense, full_matrices=False)
        k = min(N, kmax)
        U, S, V = U[:, :k].copy(), S[:k].copy(), Vt[:k].T.copy()
    elif method == "lanczos":
        U, S, V = lanczos_svd(A, N)
    else:
        raise ValueError(f"unknown SVD method {method!r}")
    return _fix_signs(U, S, V)


# --------------------------------------------------------------------------
# text dump


def dump_matrix(tm: TransitionMatrix, path) -> None:
    """Write a matrix as a text header followed by ``row col value`` lines."""
    coo = tm.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# rows {tm.shape[0]} cols {tm.shape[1]} nnz {tm.nnz}\n")
        fh.write("# row_bins " + " ".join(map(str, tm.row_bins.tolist())) + "\n")
        fh.write("# col_bins " + " ".join(map(str, tm.col_bins.tolist())) + "\n")
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}\n")


def load_matrix(path) -> TransitionMatrix:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        m, n = int(head[2]), int(head[4])
        rows = np.array(fh.readline().split()[2:], dtype=np.int64)
        cols = np.array(fh.readline().split()[2:], dtype=np.int64)
        body = np.loadtxt(fh, ndmin=2)
    if body.size == 0:
        mat = sp.csr_matrix((m, n))
    else:
        mat = sp.csr_matrix((body[:, 2], (body[:, 0].astype(int), body[:, 1].astype(int))), shape=(m, n))
    return TransitionMatrix(rows, cols, mat)
