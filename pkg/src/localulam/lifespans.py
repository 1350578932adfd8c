"""Equivariance mismatch, lifespan detection and characteristic lifespans."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tracking import TrackedPaths, _fmt, pairwise_distances

__all__ = [
    "Thresholds",
    "Lifespan",
    "CharacteristicLifespans",
    "equivariance_mismatch",
    "mismatch_paths",
    "detect_lifespans",
    "characteristic_lifespans",
    "write_mismatch_csv",
    "lifespan_report",
]

SQRT2 = math.sqrt(2.0)
CONSERVATIVE = SQRT2 * math.sin(math.pi / 8)
DOWN = SQRT2 * math.sin(math.pi / 32)
UP = 1.0 - DOWN


@dataclass(frozen=True)
class Thresholds:
    """Lifespan thresholds.

    ``mode="conservative"`` keeps a step while the mismatch stays below
    ``conservative`` (a 45 degree angle).  ``mode="percentage"`` drops a
    step when the mismatch exceeds ``up``, or exceeds ``down`` while
    changing by more than ``percent`` relative to the next step.
    """

    conservative: float = CONSERVATIVE
    up: float = UP
    down: float = DOWN
    percent: float = 0.95
    mode: str = "conservative"

    def __post_init__(self):
        if self.mode not in ("conservative", "percentage"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        if not 0 < self.down < self.up < 1:
            raise ValueError("need 0 < down < up < 1")
        if not 0 < self.conservative < 1:
            raise ValueError("conservative threshold must lie in (0, 1)")
        if not 0 < self.percent <= 1:
            raise ValueError("percent must lie in (0, 1]")


@dataclass(frozen=True)
class Lifespan:
    """A maximal run of consecutive window start times for one tracked mode.

    ``mode`` is zero-based; reports print it one-based.
    """

    mode: int
    birth: float
    death: float
    times: tuple = field(repr=False)
    mismatch: tuple = field(repr=False)
    singular_values: tuple = field(repr=False)

    @property
    def age(self) -> int:
        return len(self.times)

    @property
    def mean_mismatch(self) -> float:
        return float(np.mean(self.mismatch))

    @property
    def sv_variance(self) -> float:
        if self.age < 2:
            return 0.0
        return float(np.var(self.singular_values, ddof=1))

    @property
    def span(self) -> tuple:
        return (self.birth, self.death)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode + 1,
            "z_alpha": _num(self.birth),
            "z_omega": _num(self.death),
            "age": self.age,
            "ME": self.mean_mismatch,
            "SV_var": self.sv_variance,
        }


@dataclass(frozen=True)
class CharacteristicLifespans:
    eldest: Lifespan | None = None
    min_eq: Lifespan | None = None
    max_var_sv: Lifespan | None = None

    def as_dict(self) -> dict:
        return {k: (None if v is None else v.as_dict())
                for k, v in (("eldest", self.eldest), ("min_eq", self.min_eq),
                             ("max_var_sv", self.max_var_sv))}


def equivariance_mismatch(v_t, bins_t, P_next, v_next) -> float:
    """Sign-minimised Euclidean distance of ``v_t`` to the normalised image of
    ``v_next``, divided by sqrt(2); 1 when the image vanishes."""
    d = pairwise_distances(np.asarray(v_t)[:, None], bins_t, P_next,
                           np.asarray(v_next)[:, None], 2.0)[0, 0]
    if not np.isfinite(d):
        return 1.0
    return float(min(d / SQRT2, 1.0))


def mismatch_paths(tracked: TrackedPaths) -> np.ndarray:
    """Mismatch of every tracked slot between each window and the next.

    Shape ``(T - 1, N)``; row ``k`` belongs to window start ``times[k]``.
    """
    T, N = tracked.order.shape
    out = np.empty((max(T - 1, 0), N))
    for k in range(T - 1):
        nxt = tracked.windows[k + 1]
        D = pairwise_distances(tracked.V(k), tracked.v_bins(k), nxt.last_step, tracked.V(k + 1), 2.0)
        d = np.diag(D)
        out[k] = np.where(np.isfinite(d), np.minimum(d / SQRT2, 1.0), 1.0)
    return out


def _exists(sig: np.ndarray, th: Thresholds) -> np.ndarray:
    if th.mode == "conservative":
        return sig < th.conservative
    ok = ~(sig > th.up)
    nxt = np.empty_like(sig)
    nxt[:-1] = sig[1:]
    lo = np.minimum(sig[:-1], nxt[:-1])
    diff = np.abs(sig[:-1] - nxt[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(lo > 0, diff / np.where(lo > 0, lo, 1.0), np.where(diff > 0, np.inf, 0.0))
    jump = np.zeros_like(sig, dtype=bool)
    jump[:-1] = (sig[:-1] > th.down) & (rel > th.percent)
    return ok & ~jump


def detect_lifespans(mismatch, times, thresholds: Thresholds | None = None,
                     singular_values=None, *, exclude_final: bool = False) -> list[Lifespan]:
    """Maximal runs of existing steps for every mode, ordered by mode then birth.

    ``mismatch`` has shape ``(T, N)`` with row ``k`` at start time
    ``times[k]``; ``singular_values`` (same shape) is attached to the spans.
    The percentage rule compares each step with the next one; the final
    row only faces the absolute bounds.  With ``exclude_final`` the final
    row serves solely as the successor of the one before it and never
    belongs to a lifespan.
    """
    th = thresholds or Thresholds()
    sig = np.asarray(mismatch, dtype=float)
    if sig.ndim == 1:
        sig = sig[:, None]
    times = np.asarray(times, dtype=float)
    if times.shape[0] != sig.shape[0]:
        raise ValueError("times and mismatch rows differ in length")
    sv = np.full_like(sig, np.nan) if singular_values is None else np.asarray(singular_values, dtype=float)
    sv = sv.reshape(sig.shape) if sv.ndim == 1 else sv
    out = []
    for j in range(sig.shape[1]):
        if sig.shape[0] == 0:
            continue
        ex = _exists(sig[:, j], th)
        if exclude_final:
            ex = ex[:-1]
        k = 0
        T = ex.size
        while k < T:
            if not ex[k]:
                k += 1
                continue
            e = k
            while e + 1 < T and ex[e + 1]:
                e += 1
            sl = slice(k, e + 1)
            out.append(Lifespan(j, float(times[k]), float(times[e]), tuple(times[sl].tolist()),
                                tuple(sig[sl, j].tolist()), tuple(sv[sl, j].tolist())))
            k = e + 1
    return out


def characteristic_lifespans(lifespans) -> CharacteristicLifespans:
    """Eldest, minimal mean mismatch, and maximal singular-value variance spans.

    Ties go to the earlier birth, then the lower mode; the variance pick
    only considers spans of age two or more.
    """
    spans = list(lifespans)
    if not spans:
        return CharacteristicLifespans()
    eldest = min(spans, key=lambda s: (-s.age, s.birth, s.mode))
    min_eq = min(spans, key=lambda s: (s.mean_mismatch, s.birth, s.mode))
    multi = [s for s in spans if s.age >= 2]
    max_var = min(multi, key=lambda s: (-s.sv_variance, s.birth, s.mode)) if multi else None
    return CharacteristicLifespans(eldest, min_eq, max_var)


def write_mismatch_csv(mismatch, times, path) -> None:
    sig = np.asarray(mismatch, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "mode", "varsigma"])
        for k, t in enumerate(times):
            for j in range(sig.shape[1]):
                wr.writerow([_fmt(t), j + 1, repr(float(sig[k, j]))])


def lifespan_report(lifespans, characteristic: CharacteristicLifespans, n_modes: int,
                    **meta) -> dict:
    """JSON-ready summary: spans per mode plus the characteristic picks."""
    per_mode = {str(j + 1): [s.as_dict() for s in lifespans if s.mode == j] for j in range(n_modes)}
    return {**meta, "n_lifespans": len(lifespans), "modes": per_mode,
            "characteristic": characteristic.as_dict()}


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _num(t):
    t = float(t)
    return int(t) if t.is_integer() else t
