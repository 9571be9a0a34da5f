"""Windowed localization diagnostics for signal maps.

Windows along one feature coordinate are triangular hats centered at
quantile points of the coordinate's values, clamped flat beyond the first
and last centers.  Evaluating a value between two adjacent centers gives the
two linear interpolation weights onto those centers, so the windows form a
partition of unity by construction.  Two window sets can be multiplied into
product windows over coordinate pairs.

The relative-shift diagnostic windows a signal, pushes each windowed piece
through a signal map, and compares per-node energy centroids of input and
output along each windowed coordinate, normalized by the coordinate's
spread.  A map that only reweights phases cannot move the centroid; a map
that transports mass shows up as a nonzero shift in units of the feature's
standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractError,
    DegenerateFeatureError,
    DegenerateSignalError,
)
from .graph_core import NORM_FLOOR, FeatureLocations, Signal


@dataclass(frozen=True)
class WindowSet:
    """Nonnegative node weights per window, for one or two coordinates."""

    coordinates: tuple[int, ...]
    weights: np.ndarray        # (B, N) for one coordinate, (B1*B2, N) for two
    window_ids: tuple[tuple[int, ...], ...]
    centers: tuple[np.ndarray, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "coordinates", tuple(self.coordinates))
        object.__setattr__(self, "window_ids", tuple(
            tuple(wid) for wid in self.window_ids
        ))
        object.__setattr__(self, "centers", tuple(
            np.asarray(c, dtype=np.float64) for c in self.centers
        ))

    @property
    def n_windows(self) -> int:
        return self.weights.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[1]

    def windows(self):
        """Yield (window_id, weight vector) pairs in order."""
        for wid, row in zip(self.window_ids, self.weights):
            yield wid, row

    def product(self, other: "WindowSet") -> "WindowSet":
        """Product windows over the coordinate pair (self, other)."""
        if self.n_nodes != other.n_nodes:
            raise ContractError("window sets disagree on node count")
        if len(self.coordinates) != 1 or len(other.coordinates) != 1:
            raise ContractError("product windows combine single-coordinate sets")
        weights = []
        ids = []
        for (b1,), w1 in zip(self.window_ids, self.weights):
            for (b2,), w2 in zip(other.window_ids, other.weights):
                weights.append(w1 * w2)
                ids.append((b1, b2))
        return WindowSet(
            coordinates=self.coordinates + other.coordinates,
            weights=np.array(weights),
            window_ids=tuple(ids),
            centers=self.centers + other.centers,
        )


def build_windows(f: FeatureLocations, k: int, n_bins: int) -> WindowSet:
    """Triangular-hat windows at quantile centers of feature column ``k``.

    Centers sit at the (b + 0.5)/B quantiles, so for evenly spread values
    every window carries about N/B of the weighted node count.  The first
    and last windows are clamped flat beyond their centers, which keeps the
    hats a partition of unity on the whole value range.
    """
    if n_bins < 2:
        raise ContractError("need at least 2 windows")
    col = f.column(k)
    if float(col.max() - col.min()) == 0.0:
        raise DegenerateFeatureError(
            f"feature column {k} is constant; windows are undefined")
    levels = (np.arange(n_bins) + 0.5) / n_bins
    centers = np.quantile(col, levels)
    if np.any(np.diff(centers) <= 0):
        raise DegenerateFeatureError(
            f"feature column {k} has tied quantile centers; "
            f"reduce n_bins or perturb the feature")
    n = col.size
    weights = np.zeros((n_bins, n))
    # Interpolation weights onto the center grid; clamped at both ends.
    idx = np.searchsorted(centers, col, side="right")
    for v in range(n):
        i = idx[v]
        if i == 0:
            weights[0, v] = 1.0
        elif i == n_bins:
            weights[n_bins - 1, v] = 1.0
        else:
            left, right = centers[i - 1], centers[i]
            lam = (col[v] - left) / (right - left)
            weights[i - 1, v] = 1.0 - lam
            weights[i, v] = lam
    return WindowSet(
        coordinates=(k,),
        weights=weights,
        window_ids=tuple((b,) for b in range(n_bins)),
        centers=(centers,),
    )


def window_signal(g, w: np.ndarray) -> np.ndarray:
    """Window a channel with sqrt-weights and renormalize.

    The sqrt scaling makes the windowed energies split the signal energy
    exactly when the windows form a partition of unity.  Raises when the
    windowed mass is at or below the norm floor.
    """
    vec = np.asarray(g, dtype=np.complex128)
    if vec.ndim != 1:
        raise ContractError("window_signal expects a single channel")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != vec.shape:
        raise ContractError("window weights must match the channel length")
    if np.any(w < 0):
        raise ContractError("window weights must be nonnegative")
    vals = np.sqrt(w) * vec
    mass = float(np.linalg.norm(vals))
    if mass <= NORM_FLOOR:
        raise DegenerateSignalError(
            f"windowed mass {mass:.3e} at or below the norm floor")
    return vals / mass


@dataclass(frozen=True)
class WindowShift:
    """Shift record for one window and coordinate; missing when the window
    carried no usable mass before or after the map."""

    window_id: tuple[int, ...]
    coordinate: int
    missing: bool
    shift: float | None
    pre_mean: float | None
    post_mean: float | None
    pre_variance: float | None
    post_variance: float | None


@dataclass(frozen=True)
class ShiftReport:
    entries: tuple[WindowShift, ...]
    mean_shift: float | None

    def csv_rows(self):
        """Rows of (window_id, coordinate, shift, pre/post mean, pre/post var)."""
        rows = []
        for e in self.entries:
            wid = "|".join(str(b) for b in e.window_id)
            if e.missing:
                rows.append([wid, e.coordinate, "missing", "", "", "", ""])
            else:
                rows.append([
                    wid, e.coordinate, e.shift,
                    e.pre_mean, e.post_mean, e.pre_variance, e.post_variance,
                ])
        return rows


def _energy_profile(values: np.ndarray) -> np.ndarray | None:
    energy = np.abs(values) ** 2
    if energy.ndim == 2:
        energy = energy.sum(axis=1)
    total = float(energy.sum())
    if total <= NORM_FLOOR ** 2:
        return None
    return energy / total


def relative_shift(
    layer_fn,
    g: Signal,
    f: FeatureLocations,
    windows: WindowSet,
) -> ShiftReport:
    """Per-window centroid displacement of a signal map, in feature units.

    Each window is applied to every channel of ``g`` with sqrt-weights and
    jointly renormalized; the map's output localization is compared to the
    input's along every windowed coordinate.  Windows with no usable input
    or output mass are reported missing rather than as zero shifts.
    Rescaling ``layer_fn`` by a positive constant leaves all shifts
    unchanged.
    """
    if g.n_nodes != f.n_nodes or windows.n_nodes != g.n_nodes:
        raise ContractError("signal, features, and windows disagree on size")
    entries = []
    shifts = []
    for wid, w in windows.windows():
        windowed = np.sqrt(w)[:, None] * g.values
        mass = float(np.linalg.norm(windowed))
        if mass <= NORM_FLOOR:
            for k in windows.coordinates:
                entries.append(WindowShift(wid, k, True, None, None, None, None, None))
            continue
        windowed = windowed / mass
        out = layer_fn(Signal(windowed))
        if not isinstance(out, Signal):
            out = Signal(np.asarray(out))
        p_pre = _energy_profile(windowed)
        p_post = _energy_profile(out.values)
        if p_pre is None or p_post is None:
            for k in windows.coordinates:
                entries.append(WindowShift(wid, k, True, None, None, None, None, None))
            continue
        for k in windows.coordinates:
            col = f.column(k)
            spread = float(col.std())
            if spread == 0.0:
                raise DegenerateFeatureError(
                    f"feature column {k} is constant; shifts are undefined")
            pre_mean = float(np.dot(col, p_pre))
            post_mean = float(np.dot(col, p_post))
            pre_var = float(np.dot((col - pre_mean) ** 2, p_pre))
            post_var = float(np.dot((col - post_mean) ** 2, p_post))
            shift = (post_mean - pre_mean) / spread
            shifts.append(shift)
            entries.append(WindowShift(
                wid, k, False, shift, pre_mean, post_mean, pre_var, post_var,
            ))
    mean_shift = float(np.mean(shifts)) if shifts else None
    return ShiftReport(tuple(entries), mean_shift)
