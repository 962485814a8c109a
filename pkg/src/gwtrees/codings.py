"""Lossless conversions between a plane tree and its three path codings.

A tree is stored as its preorder degree sequence (child counts in depth-first
visit order), which makes every transform an O(zeta) array pass:

* walk (Lukasiewicz path): W_0 = 0, W_{i+1} = W_i + c_i - 1, ends at -1;
* height sequence: H_i = depth of the i-th preorder vertex;
* contour: depth profile of the unit-speed boundary traversal, 2*(zeta-1)+1
  integer-time samples (piecewise linear with slopes +-1 in between).

The walk -> height pass uses the ancestor identity
H_i = #{k < i : W_k = min(W_k..W_i)} with a monotone stack; the contour is
assembled from the height sequence via the descending runs between
consecutive preorder visits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Tree",
    "LukasiewiczPath",
    "HeightSeq",
    "ContourSeq",
    "RescaledPath",
    "walk_from_tree",
    "tree_from_walk",
    "height_from_walk",
    "height_from_tree",
    "contour_from_tree",
    "visit_times",
    "rescale",
]


class CodingError(ValueError):
    """Sequence violates the invariants of the requested coding."""


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@dataclass(frozen=True, eq=False)
class Tree:
    """Plane tree as its preorder degree sequence."""

    child_counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.child_counts, dtype=np.int64)
        object.__setattr__(self, "child_counts", c)
        if c.ndim != 1 or c.size == 0:
            raise CodingError("degree sequence must be a nonempty 1-d array")
        if np.any(c < 0):
            raise CodingError("negative child count")
        partial = np.cumsum(c - 1)
        if partial[-1] != -1 or (c.size > 1 and partial[:-1].min() < 0):
            raise CodingError("not a valid preorder degree sequence")
        c.flags.writeable = False

    @property
    def zeta(self) -> int:
        return self.child_counts.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Tree) and np.array_equal(
            self.child_counts, other.child_counts
        )

    def __hash__(self) -> int:
        return hash(self.child_counts.tobytes())


@dataclass(frozen=True, eq=False)
class LukasiewiczPath:
    """Integer path W_0..W_zeta: starts at 0, steps >= -1, first hits -1 at zeta."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", w)
        if w.size < 2 or w[0] != 0 or w[-1] != -1:
            raise CodingError("walk must start at 0 and end at -1")
        if np.diff(w).min() < -1:
            raise CodingError("walk has an increment below -1")
        if w.size > 2 and w[1:-1].min() < 0:
            raise CodingError("walk hits -1 before its final step")
        w.flags.writeable = False

    @property
    def zeta(self) -> int:
        return self.values.size - 1


@dataclass(frozen=True, eq=False)
class HeightSeq:
    """H_0..H_{zeta-1}: depth of each preorder vertex."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.ascontiguousarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", h)
        if h.size == 0 or h[0] != 0 or np.any(h < 0):
            raise CodingError("height sequence must start at 0 and stay >= 0")
        if h.size > 1 and np.diff(h).max() > 1:
            raise CodingError("height climbs by more than 1")
        h.flags.writeable = False

    @property
    def zeta(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class ContourSeq:
    """Integer-time contour samples C_0..C_{2(zeta-1)}; a single 0 for zeta = 1.

    The continuous contour is the linear interpolation (slopes +-1) and is 0 on
    [2(zeta-1), 2*zeta] by convention.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", c)
        if c.size % 2 == 0:
            raise CodingError("contour sample count must be odd (2*(zeta-1)+1)")
        if c[0] != 0 or c[-1] != 0 or np.any(c < 0):
            raise CodingError("contour must start and end at 0 and stay >= 0")
        if c.size > 1 and not np.all(np.abs(np.diff(c)) == 1):
            raise CodingError("contour steps must be +-1")
        c.flags.writeable = False

    @property
    def zeta(self) -> int:
        return (self.values.size - 1) // 2 + 1

    @property
    def duration(self) -> int:
        """Length 2*(zeta-1) of the active window."""
        return self.values.size - 1


@dataclass(frozen=True)
class RescaledPath:
    """Path sampled on a uniform [0,1] grid after the scaling-limit rescaling."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    n: int
    b_n: float
    coding: str
    scale: float

    def __post_init__(self):
        if self.times.size != self.values.size:
            raise CodingError("times/values size mismatch")
        if np.any(np.diff(self.times) <= 0):
            raise CodingError("time grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise CodingError("non-finite rescaled values")


# -- kernels --------------------------------------------------------------------


@njit(cache=True)
def _height_from_walk_kernel(w):  # pragma: no cover - numba path
    zeta = w.size - 1
    h = np.empty(zeta, np.int64)
    stack = np.empty(zeta + 1, np.int64)
    top = 0
    for i in range(zeta):
        wi = w[i]
        while top > 0 and stack[top - 1] > wi:
            top -= 1
        h[i] = top
        stack[top] = wi
        top += 1
    return h


@njit(cache=True)
def _height_from_counts_kernel(c):  # pragma: no cover - numba path
    zeta = c.size
    h = np.empty(zeta, np.int64)
    rem = np.empty(zeta + 1, np.int64)
    top = 0
    for i in range(zeta):
        h[i] = top
        k = c[i]
        if k > 0:
            rem[top] = k
            top += 1
        else:
            while top > 0:
                rem[top - 1] -= 1
                if rem[top - 1] == 0:
                    top -= 1
                else:
                    break
    return h


def _height_from_walk_py(w):
    zeta = w.size - 1
    h = np.empty(zeta, np.int64)
    stack = []
    for i in range(zeta):
        wi = w[i]
        while stack and stack[-1] > wi:
            stack.pop()
        h[i] = len(stack)
        stack.append(wi)
    return h


def _height_from_counts_py(c):
    zeta = c.size
    h = np.empty(zeta, np.int64)
    rem = []
    for i in range(zeta):
        h[i] = len(rem)
        k = c[i]
        if k > 0:
            rem.append(int(k))
        else:
            while rem:
                rem[-1] -= 1
                if rem[-1] == 0:
                    rem.pop()
                else:
                    break
    return h


if not HAVE_NUMBA:  # pragma: no cover
    _height_from_walk_kernel = _height_from_walk_py
    _height_from_counts_kernel = _height_from_counts_py


# -- transforms -------------------------------------------------------------------


def walk_from_tree(tree: Tree) -> LukasiewiczPath:
    """Partial sums of (child count - 1), prefixed with W_0 = 0."""
    w = np.empty(tree.zeta + 1, dtype=np.int64)
    w[0] = 0
    np.cumsum(tree.child_counts - 1, out=w[1:])
    return LukasiewiczPath(w)


def tree_from_walk(walk: LukasiewiczPath) -> Tree:
    """Inverse map: child_counts[i] = W_{i+1} - W_i + 1."""
    return Tree(np.diff(walk.values) + 1)


def height_from_walk(walk: LukasiewiczPath) -> HeightSeq:
    """Heights from the walk alone, via the ancestor-stack identity."""
    return HeightSeq(_height_from_walk_kernel(walk.values))


def height_from_tree(tree: Tree) -> HeightSeq:
    """Heights by direct depth-first traversal of the degree sequence."""
    return HeightSeq(_height_from_counts_kernel(tree.child_counts))


def contour_from_tree(tree: Tree) -> ContourSeq:
    """Euler-tour depth samples at integer times.

    Between preorder visits p and p+1 the contour descends from H_p to
    H_{p+1} - 1 and then steps up; after the last vertex it descends to 0.
    """
    h = height_from_tree(tree).values
    if tree.zeta == 1:
        return ContourSeq(np.zeros(1, dtype=np.int64))
    seg_starts = np.concatenate([h[:-1], h[-1:]])
    seg_lens = np.concatenate([h[:-1] - h[1:] + 2, [h[-1] + 1]])
    total = int(seg_lens.sum())
    offsets = np.repeat(np.cumsum(seg_lens) - seg_lens, seg_lens)
    c = np.repeat(seg_starts, seg_lens) - (np.arange(total) - offsets)
    return ContourSeq(c)


def visit_times(tree: Tree) -> np.ndarray:
    """b_p = 2p - H_p for p < zeta, plus b_zeta = 2*(zeta-1); C_{b_p} = H_p."""
    h = height_from_tree(tree).values
    b = np.empty(tree.zeta + 1, dtype=np.int64)
    b[:-1] = 2 * np.arange(tree.zeta, dtype=np.int64) - h
    b[-1] = 2 * (tree.zeta - 1)
    return b


# -- rescaling ---------------------------------------------------------------------


def rescale(path, n: int, b_n: float, grid_points: int, coding: Optional[str] = None) -> RescaledPath:
    """Sample the rescaled coding on a uniform grid of [0,1].

    walk:    t -> W_{floor(n t)} / B_n            (cadlag step evaluation)
    height:  t -> (B_n / n) * H_{n t}             (linear interpolation, 0-padded)
    contour: t -> (B_n / n) * C_{2 n t}           (linear interpolation, 0-padded)
    """
    if grid_points < 2:
        raise CodingError("grid_points must be >= 2")
    if coding is None:
        coding = {
            LukasiewiczPath: "walk",
            HeightSeq: "height",
            ContourSeq: "contour",
        }.get(type(path))
        if coding is None:
            raise CodingError(f"cannot infer coding for {type(path).__name__}")
    t = np.linspace(0.0, 1.0, grid_points)
    v = path.values.astype(np.float64)
    if coding == "walk":
        idx = np.floor(n * t).astype(np.int64)
        vals = np.zeros(t.size)
        inside = idx < v.size  # W_k = 0 for k > zeta
        vals[inside] = v[idx[inside]]
        vals /= b_n
        scale = 1.0 / b_n
    elif coding == "height":
        grid = np.arange(v.size + 1, dtype=np.float64)  # sentinel H_zeta = 0
        vals = np.interp(n * t, grid, np.append(v, 0.0), right=0.0) * (b_n / n)
        scale = b_n / n
    elif coding == "contour":
        grid = np.arange(v.size, dtype=np.float64)
        vals = np.interp(2.0 * n * t, grid, v, right=0.0) * (b_n / n)
        scale = b_n / n
    else:
        raise CodingError(f"unknown coding {coding!r}")
    return RescaledPath(times=t, values=vals, n=n, b_n=float(b_n), coding=coding, scale=scale)
