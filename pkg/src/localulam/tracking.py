"""Pairing singular modes of consecutive windows.

Right singular vectors of window ``t`` live on the support reached at
time ``t + n``; so does the last step matrix of window ``t + 1`` applied to
that window's right vectors.  Modes are paired greedily by the smallest
quasi-norm distance between these two, after lifting both onto the union
of their supports and allowing for a sign flip.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ulam import ModeWindow, TransitionMatrix

__all__ = [
    "DEFAULT_P_CANDIDATES",
    "TrackedPaths",
    "quasi_norm",
    "lift",
    "pushforward",
    "pushforward_compare",
    "pairwise_distances",
    "track_modes",
    "score_p",
    "select_p",
    "write_paths_csv",
]

DEFAULT_P_CANDIDATES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0)

# relative tolerance when comparing mean mismatches of different p
_P_TIE_RTOL = 1e-12


def quasi_norm(u, v, p: float) -> float:
    """``(sum |u_i - v_i|**p) ** (1/p)``; a norm for ``p >= 1``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"vectors must have equal length, got {u.shape} and {v.shape}")
    d = np.abs(u - v)
    if p == 2:
        return float(np.sqrt(np.dot(d, d)))
    if p == 1:
        return float(d.sum())
    return float(np.sum(d ** p) ** (1.0 / p))


def _qn_cols(D, p):
    """Quasi-norm of each column of ``D`` (already differences)."""
    D = np.abs(D)
    if p == 2:
        return np.sqrt(np.einsum("ij,ij->j", D, D))
    if p == 1:
        return D.sum(axis=0)
    return np.sum(D ** p, axis=0) ** (1.0 / p)


def lift(a, a_bins, b, b_bins):
    """Re-index two bin-supported vectors onto the sorted union of their supports.

    ``a`` and ``b`` may be 1-D or 2-D (one column per vector).
    Returns ``(a_lifted, b_lifted, union_bins)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a_bins = np.asarray(a_bins, dtype=np.int64)
    b_bins = np.asarray(b_bins, dtype=np.int64)
    if np.array_equal(a_bins, b_bins):
        return a.copy(), b.copy(), a_bins.copy()
    union = np.union1d(a_bins, b_bins)
    ia = np.searchsorted(union, a_bins)
    ib = np.searchsorted(union, b_bins)
    A = np.zeros((union.size,) + a.shape[1:])
    B = np.zeros((union.size,) + b.shape[1:])
    A[ia] = a
    B[ib] = b
    return A, B, union


def pushforward(P_next: TransitionMatrix, v_next):
    """``P_next @ v_next`` normalised per column; zero columns stay zero.

    Returns ``(w, norms)`` with ``w`` indexed over ``P_next.row_bins``.
    """
    w = P_next.matrix @ np.asarray(v_next, dtype=float)
    norms = np.linalg.norm(w, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return w / safe, norms


def pairwise_distances(V_t, bins_t, P_next: TransitionMatrix, V_next, p: float) -> np.ndarray:
    """Distance matrix ``D[a, b]`` between column ``a`` of ``V_t`` and the
    normalised image of column ``b`` of ``V_next`` under ``P_next``.

    Columns whose image vanishes get distance ``+inf``.
    """
    V_t = np.atleast_2d(np.asarray(V_t, dtype=float).T).T
    V_next = np.atleast_2d(np.asarray(V_next, dtype=float).T).T
    if V_next.shape[0] != P_next.shape[1]:
        raise ValueError("v_next must be indexed over the column bins of P_next")
    W, norms = pushforward(P_next, V_next)
    A, B, _ = lift(V_t, bins_t, W, P_next.row_bins)
    D = np.empty((A.shape[1], B.shape[1]))
    for b in range(B.shape[1]):
        if norms[b] == 0:
            D[:, b] = np.inf
            continue
        w = B[:, b:b + 1]
        D[:, b] = np.minimum(_qn_cols(A - w, p), _qn_cols(A + w, p))
    return D


def pushforward_compare(v_t, bins_t, P_next: TransitionMatrix, v_next, p: float) -> float:
    """Sign-minimised quasi-norm distance between ``v_t`` and ``P_next v_next / |P_next v_next|``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    return float(pairwise_distances(np.asarray(v_t)[:, None], bins_t, P_next,
                                    np.asarray(v_next)[:, None], p)[0, 0])


def _greedy_pairs(D: np.ndarray) -> np.ndarray:
    """Slot -> column assignment by repeated global minimum, lexicographic ties."""
    n_slots, n_cols = D.shape
    free_s = list(range(n_slots))
    free_c = list(range(n_cols))
    out = np.full(n_slots, -1, dtype=np.int64)
    while free_s and free_c:
        best = None
        for s in free_s:
            for c in free_c:
                d = D[s, c]
                if best is None or d < best[0]:
                    best = (d, s, c)
        _, s, c = best
        out[s] = c
        free_s.remove(s)
        free_c.remove(c)
    return out


@dataclass(eq=False)
class TrackedPaths:
    """Slot-ordered singular value paths and the vectors behind them.

    ``order[k, j]`` is the raw SVD index that tracked slot ``j`` uses in
    window ``k``; ``values[k, j]`` is its singular value.
    """

    windows: list
    order: np.ndarray
    values: np.ndarray
    p: float

    @property
    def times(self) -> np.ndarray:
        return np.array([w.t for w in self.windows])

    @property
    def n_modes(self) -> int:
        return self.order.shape[1]

    def v(self, k: int, j: int) -> np.ndarray:
        """Tracked right vector of slot ``j`` in window ``k`` (over ``v_bins(k)``)."""
        return self.windows[k].V[:, self.order[k, j]]

    def u(self, k: int, j: int) -> np.ndarray:
        return self.windows[k].U[:, self.order[k, j]]

    def v_bins(self, k: int) -> np.ndarray:
        return self.windows[k].col_bins

    def u_bins(self, k: int) -> np.ndarray:
        return self.windows[k].row_bins

    def V(self, k: int) -> np.ndarray:
        return self.windows[k].V[:, self.order[k]]


def _check_windows(windows):
    if not windows:
        raise ValueError("need at least one window")
    N = None
    for w in windows:
        if w.S is None:
            raise ValueError(f"window t={w.t} has no SVD")
        if N is None:
            N = w.S.size
        elif w.S.size != N or w.V.shape[1] != N:
            raise ValueError(f"window t={w.t} has {w.S.size} modes, expected {N}")
    return N


def track_modes(windows: list[ModeWindow], p: float) -> TrackedPaths:
    """Greedy mode pairing through consecutive windows, then sort by mean value."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    N = _check_windows(windows)
    T = len(windows)
    order = np.empty((T, N), dtype=np.int64)
    order[0] = np.arange(N)
    for k in range(T - 1):
        cur, nxt = windows[k], windows[k + 1]
        D = pairwise_distances(cur.V[:, order[k]], cur.col_bins, nxt.last_step, nxt.V, p)
        order[k + 1] = _greedy_pairs(D)
    values = np.take_along_axis(np.stack([w.S for w in windows]), order, axis=1)
    rank = np.argsort(-values.mean(axis=0), kind="stable")
    return TrackedPaths(list(windows), order[:, rank], values[:, rank], float(p))


def score_p(windows, candidates=DEFAULT_P_CANDIDATES, thresholds=None, *,
            exclude_final: bool = True) -> dict:
    """Mean mismatch over all detected lifespan steps for each candidate ``p``.

    Candidates with no detected lifespan map to ``None``.
    """
    from .lifespans import Thresholds, detect_lifespans, mismatch_paths

    thresholds = thresholds or Thresholds()
    scores = {}
    for p in candidates:
        tracked = track_modes(windows, p)
        sig = mismatch_paths(tracked)
        spans = detect_lifespans(sig, tracked.times[:-1], thresholds, tracked.values[:-1],
                                 exclude_final=exclude_final)
        vals = [x for s in spans for x in s.mismatch]
        scores[float(p)] = float(np.mean(vals)) if vals else None
    return scores


def select_p(windows, candidates=DEFAULT_P_CANDIDATES, thresholds=None, *,
             exclude_final: bool = True):
    """Largest ``p`` attaining the minimal mean lifespan mismatch, or None.

    Returns ``(p, scores)``.
    """
    if not candidates:
        raise ValueError("candidate set is empty")
    scores = score_p(windows, candidates, thresholds, exclude_final=exclude_final)
    valid = {p: s for p, s in scores.items() if s is not None}
    if not valid:
        return None, scores
    best = min(valid.values())
    tied = [p for p, s in valid.items() if math.isclose(s, best, rel_tol=_P_TIE_RTOL, abs_tol=1e-15)]
    return max(tied), scores


def write_paths_csv(tracked: TrackedPaths, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "mode", "singular_value"])
        for k, t in enumerate(tracked.times):
            for j in range(tracked.n_modes):
                wr.writerow([_fmt(t), j + 1, repr(float(tracked.values[k, j]))])


def _fmt(t) -> str:
    t = float(t)
    return str(int(t)) if t.is_integer() else repr(t)
