"""Convex-hull domains and their k-uniform grids.

A k-uniform point of ``conv(c_1..c_l)`` is ``sum_i (beta_i / k) c_i`` with
non-negative integer counts summing to ``k``.  Counts are enumerated in
colexicographic order: the last count is the most significant, so the first
point is ``(k, 0, ..., 0)`` and the last is ``(0, ..., 0, k)``.

A :class:`Domain` binds each vector variable to its own hull; the joint grid
is the Cartesian product, indexed with the first variable varying fastest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import DimensionError, SchemaError

__all__ = [
    "ConvexHull", "GridPoint", "Domain",
    "simplex_hull", "interval_hull",
    "grid_size", "enumerate_k_uniform", "count_rows", "rank_counts", "unrank_counts",
    "realize", "realize_batch", "nearest_k_uniform", "linf_distance",
    "hull_from_json", "hull_to_json", "domain_from_json", "domain_to_json",
]

# grids up to this many points are kept as whole arrays
_BASE = 1 << 16
# per-variable grids up to this size are realized once and reused across chunks
MATERIALIZE_CAP = 2_000_000


class ConvexHull:
    """``conv(c_1, ..., c_l)`` given by its vertex list."""

    __slots__ = ("vertices", "exact_vertices", "gamma", "_scale")

    def __init__(self, vertices):
        rows = [list(v) for v in vertices]
        if not rows:
            raise ValueError("a hull needs at least one vertex")
        dim = len(rows[0])
        if dim == 0 or any(len(r) != dim for r in rows):
            raise DimensionError("all hull vertices must share a positive dimension")
        self.exact_vertices = tuple(tuple(_frac(v) for v in r) for r in rows)
        arr = np.array([[float(v) for v in r] for r in rows])
        if not np.all(np.isfinite(arr)):
            raise ValueError("hull vertices must be finite")
        arr.setflags(write=False)
        self.vertices = arr
        self.gamma = float(np.max(np.abs(arr)))
        self._scale = self._simplex_scale()

    def _simplex_scale(self):
        l, dim = self.vertices.shape
        if l != dim:
            return None
        scale = self.vertices[0, 0]
        if scale <= 0 or not np.array_equal(self.vertices, scale * np.eye(dim)):
            return None
        return float(scale)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def l(self) -> int:
        return self.vertices.shape[0]

    @property
    def simplex_scale(self):
        """``K`` when the vertices are ``K*e_1 .. K*e_p`` in order, else ``None``."""
        return self._scale

    def __repr__(self):
        return f"ConvexHull(l={self.l}, dim={self.dim}, gamma={self.gamma:g})"


def _frac(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(float(value))


def simplex_hull(p: int, scale=1) -> ConvexHull:
    """Vertices ``scale * e_1 .. scale * e_p``."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if scale <= 0:
        raise ValueError("simplex scale must be positive")
    zero = Fraction(0) if isinstance(scale, Fraction) else 0
    return ConvexHull([[scale if i == j else zero for j in range(p)] for i in range(p)])


def interval_hull(lo, hi) -> ConvexHull:
    """One-dimensional segment ``[lo, hi]``."""
    if lo > hi:
        raise ValueError("interval bounds out of order")
    return ConvexHull([[lo], [hi]])


@dataclass(frozen=True)
class GridPoint:
    counts: tuple
    k: int
    hull: ConvexHull = field(compare=False, repr=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if len(counts) != self.hull.l:
            raise DimensionError(f"expected {self.hull.l} counts, got {len(counts)}")
        if any(c < 0 for c in counts) or sum(counts) != self.k:
            raise ValueError(f"counts {counts} must be non-negative and sum to k={self.k}")

    @property
    def index(self) -> int:
        return rank_counts(self.counts)


# -- colex enumeration ----------------------------------------------------------

@lru_cache(maxsize=None)
def _n(j: int, s: int) -> int:
    """Number of compositions of ``s`` into ``j`` non-negative parts."""
    return math.comb(s + j - 1, j - 1)


def grid_size(l: int, k: int) -> int:
    """``C(l + k - 1, k)``."""
    if l < 1 or k < 0:
        raise ValueError("need l >= 1 and k >= 0")
    return _n(l, k)


@lru_cache(maxsize=1024)
def _comp(j: int, s: int) -> np.ndarray:
    if j == 1:
        arr = np.array([[s]], dtype=np.int64)
    else:
        parts = []
        for v in range(s + 1):
            sub = _comp(j - 1, s - v)
            block = np.empty((sub.shape[0], j), dtype=np.int64)
            block[:, :j - 1] = sub
            block[:, j - 1] = v
            parts.append(block)
        arr = np.concatenate(parts)
    arr.setflags(write=False)
    return arr


def _fill(j, s, lo, hi, out, row):
    """Write compositions ``lo..hi-1`` of ``s`` into ``j`` parts at ``out[row:]``."""
    if _n(j, s) <= _BASE:
        out[row:row + hi - lo, :j] = _comp(j, s)[lo:hi]
        return
    offset = 0
    for v in range(s + 1):
        size = _n(j - 1, s - v)
        a, b = max(lo, offset), min(hi, offset + size)
        if a < b:
            r = row + a - lo
            out[r:r + b - a, j - 1] = v
            _fill(j - 1, s - v, a - offset, b - offset, out, r)
        offset += size
        if offset >= hi:
            break


def count_rows(l: int, k: int, lo: int, hi: int) -> np.ndarray:
    """Counts of grid points ``lo..hi-1`` as an ``(hi - lo, l)`` int array."""
    total = grid_size(l, k)
    if not 0 <= lo <= hi <= total:
        raise IndexError(f"range [{lo}, {hi}) outside grid of size {total}")
    out = np.empty((hi - lo, l), dtype=np.int64)
    if hi > lo:
        _fill(l, k, lo, hi, out, 0)
    return out


def rank_counts(counts: Sequence[int]) -> int:
    """Colex index of a count vector."""
    s = sum(counts)
    index = 0
    for j in range(len(counts), 1, -1):
        v = counts[j - 1]
        index += _n(j, s) - _n(j, s - v)
        s -= v
    return index


def unrank_counts(l: int, k: int, index: int) -> tuple:
    if not 0 <= index < grid_size(l, k):
        raise IndexError(f"index {index} outside grid of size {grid_size(l, k)}")
    counts = [0] * l
    s = k
    for j in range(l, 1, -1):
        v = 0
        while index >= _n(j - 1, s - v):
            index -= _n(j - 1, s - v)
            v += 1
        counts[j - 1] = v
        s -= v
    counts[0] = s
    return tuple(counts)


def enumerate_k_uniform(hull: ConvexHull, k: int, start: int = 0, stop: int | None = None,
                        chunk: int = 4096) -> Iterator[GridPoint]:
    """Stream grid points ``start..stop-1`` of ``hull`` in colex order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    total = grid_size(hull.l, k)
    stop = total if stop is None else min(stop, total)
    for lo in range(start, stop, chunk):
        for row in count_rows(hull.l, k, lo, min(stop, lo + chunk)):
            yield GridPoint(tuple(row.tolist()), k, hull)


# -- realization ------------------------------------------------------------------

def realize_batch(hull: ConvexHull, counts: np.ndarray, k: int) -> np.ndarray:
    """Rows ``sum_i counts[:, i] * c_i / k``; row values never depend on the batch."""
    scale = hull.simplex_scale
    if scale is not None:
        return counts * scale / k
    verts = hull.vertices
    out = np.zeros((counts.shape[0], hull.dim))
    for i in range(hull.l):
        out += counts[:, i, None] * verts[i]
    out /= k
    return out


def realize(gp: GridPoint, exact: bool = False):
    if exact:
        k = Fraction(gp.k)
        return [sum((c * v[d] for c, v in zip(gp.counts, gp.hull.exact_vertices)), Fraction(0)) / k
                for d in range(gp.hull.dim)]
    return realize_batch(gp.hull, np.array([gp.counts], dtype=np.int64), gp.k)[0]


def linf_distance(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def nearest_k_uniform(hull: ConvexHull, x, k: int, barycentric=None,
                      enumerate_limit: int = 1_000_000) -> GridPoint:
    """Closest grid point to ``x`` in the max norm.

    Small grids are searched exhaustively (first minimizer in colex order).
    Larger ones round the barycentric weights of ``x`` by largest
    remainder; the weights are derived automatically only for scaled
    simplices.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (hull.dim,):
        raise DimensionError(f"point has shape {x.shape}, hull dimension is {hull.dim}",
                             expected=hull.dim, got=x.shape)
    total = grid_size(hull.l, k)
    if total <= enumerate_limit:
        best, best_idx = math.inf, 0
        for lo in range(0, total, _BASE):
            rows = count_rows(hull.l, k, lo, min(total, lo + _BASE))
            dist = np.max(np.abs(realize_batch(hull, rows, k) - x), axis=1)
            i = int(np.argmin(dist))
            if dist[i] < best:
                best, best_idx = float(dist[i]), lo + i
        return GridPoint(unrank_counts(hull.l, k, best_idx), k, hull)
    if barycentric is None:
        if hull.simplex_scale is None:
            raise ValueError("barycentric coordinates are required for non-simplex hulls "
                             "when the grid is too large to search")
        barycentric = x / hull.simplex_scale
    return GridPoint(_largest_remainder(np.asarray(barycentric, dtype=float), k), k, hull)


def _largest_remainder(weights: np.ndarray, k: int) -> tuple:
    w = np.clip(weights, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("barycentric weights must have positive mass")
    scaled = w / w.sum() * k
    base = np.floor(scaled).astype(np.int64)
    short = k - int(base.sum())
    frac = scaled - base
    # stable sort keeps lower indices first among equal remainders
    order = np.argsort(-frac, kind="stable")
    base[order[:short]] += 1
    return tuple(int(c) for c in base)


# -- domains ------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Ordered ``(name, hull)`` bindings; the joint grid is their product."""

    variables: tuple
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        items = tuple((str(n), h) for n, h in
                      (self.variables.items() if isinstance(self.variables, Mapping)
                       else self.variables))
        names = [n for n, _ in items]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable in domain: {names}")
        object.__setattr__(self, "variables", items)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.variables)

    def hull(self, name: str) -> ConvexHull:
        for n, h in self.variables:
            if n == name:
                return h
        raise KeyError(name)

    def dims(self) -> dict:
        return {n: h.dim for n, h in self.variables}

    def check_vars(self, var_dims: Mapping[str, int]):
        """Every formula variable must be bound with a hull of matching dimension."""
        for name, dim in var_dims.items():
            if name not in self.names:
                raise DimensionError(f"variable {name!r} has no hull in the domain", variable=name)
            got = self.hull(name).dim
            if got != dim:
                raise DimensionError(f"variable {name!r} has dimension {dim} but its hull has {got}",
                                     variable=name, expected=dim, got=got)

    def resolve_k(self, k) -> dict:
        if isinstance(k, Mapping):
            ks = {n: int(k[n]) for n in self.names}
        elif isinstance(k, (list, tuple)):
            if len(k) != len(self.variables):
                raise ValueError(f"need {len(self.variables)} k values, got {len(k)}")
            ks = dict(zip(self.names, (int(v) for v in k)))
        else:
            ks = {n: int(k) for n in self.names}
        if any(v < 1 for v in ks.values()):
            raise ValueError("every k must be at least 1")
        return ks

    def grid_sizes(self, ks: Mapping[str, int]) -> dict:
        return {n: grid_size(h.l, ks[n]) for n, h in self.variables}

    def total(self, ks: Mapping[str, int]) -> int:
        return math.prod(self.grid_sizes(ks).values())

    def _materialized(self, name, hull, k):
        key = (name, k)
        if key not in self._cache:
            counts = count_rows(hull.l, k, 0, grid_size(hull.l, k))
            points = realize_batch(hull, counts, k)
            counts.setflags(write=False)
            points.setflags(write=False)
            self._cache[key] = (counts, points)
        return self._cache[key]

    def chunks(self, ks: Mapping[str, int], lo: int, hi: int, size: int = 1 << 15):
        """Yield ``(start, counts, points)`` for joint indices ``lo..hi-1``.

        ``counts[name]`` is ``(B, l)`` and ``points[name]`` is ``(B, dim)``.
        """
        sizes = self.grid_sizes(ks)
        single = len(self.variables) == 1
        for start in range(lo, hi, size):
            stop = min(hi, start + size)
            counts, points = {}, {}
            if single:
                name, hull = self.variables[0]
                if sizes[name] <= MATERIALIZE_CAP and hi - lo >= sizes[name] // 4:
                    allc, allp = self._materialized(name, hull, ks[name])
                    counts[name], points[name] = allc[start:stop], allp[start:stop]
                else:
                    rows = count_rows(hull.l, ks[name], start, stop)
                    counts[name], points[name] = rows, realize_batch(hull, rows, ks[name])
                yield start, counts, points
                continue
            joint = np.arange(start, stop, dtype=np.int64)
            stride = 1
            for name, hull in self.variables:
                n_v = sizes[name]
                idx = (joint // stride) % n_v
                if n_v <= MATERIALIZE_CAP:
                    allc, allp = self._materialized(name, hull, ks[name])
                    counts[name], points[name] = allc[idx], allp[idx]
                else:
                    first = (start // stride) % n_v
                    span = min(n_v, (stop - 1) // stride - start // stride + 1)
                    pieces = [count_rows(hull.l, ks[name], first, min(n_v, first + span))]
                    if first + span > n_v:
                        pieces.append(count_rows(hull.l, ks[name], 0, first + span - n_v))
                    rows = np.concatenate(pieces)
                    pos = (idx - first) % n_v
                    counts[name] = rows[pos]
                    points[name] = realize_batch(hull, rows, ks[name])[pos]
                stride *= n_v
            yield start, counts, points

    def point_at(self, ks: Mapping[str, int], index: int) -> dict:
        """``name -> GridPoint`` for one joint index."""
        out = {}
        for name, hull in self.variables:
            n_v = grid_size(hull.l, ks[name])
            index, local = divmod(index, n_v)
            out[name] = GridPoint(unrank_counts(hull.l, ks[name], local), ks[name], hull)
        return out


# -- JSON -----------------------------------------------------------------------------

def hull_from_json(obj, field_name="hull") -> ConvexHull:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", field_name)
    try:
        if "simplex" in obj:
            spec = obj["simplex"]
            scale = spec.get("K", 1)
            return simplex_hull(int(spec["p"]), Fraction(scale) if isinstance(scale, str) else scale)
        if "interval" in obj:
            lo, hi = obj["interval"]
            return interval_hull(lo, hi)
        verts = obj["vertices"]
        hull = ConvexHull(verts)
    except KeyError as exc:
        raise SchemaError("missing key", f"{field_name}.{exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), field_name) from None
    if "dim" in obj and int(obj["dim"]) != hull.dim:
        raise SchemaError(f"dim {obj['dim']} does not match vertex length {hull.dim}", f"{field_name}.dim")
    return hull


def hull_to_json(hull: ConvexHull) -> dict:
    return {"dim": hull.dim, "vertices": hull.vertices.tolist()}


def domain_from_json(obj) -> Domain:
    """``{"vars": [{"name", "hull"}]}``; ``hull`` may also be given as ``simplex``."""
    if not isinstance(obj, dict) or "vars" not in obj:
        raise SchemaError("missing key", "vars")
    items = []
    for i, entry in enumerate(obj["vars"]):
        if "name" not in entry:
            raise SchemaError("missing key", f"vars[{i}].name")
        hobj = entry.get("hull", {k: v for k, v in entry.items() if k != "name"})
        items.append((entry["name"], hull_from_json(hobj, f"vars[{i}].hull")))
    try:
        return Domain(tuple(items))
    except ValueError as exc:
        raise SchemaError(str(exc), "vars") from None


def domain_to_json(domain: Domain) -> dict:
    return {"vars": [{"name": n, "hull": hull_to_json(h)} for n, h in domain.variables]}
