"""Tensor multivariate polynomials over vector variables.

A simple tensor polynomial (STM) contracts one coefficient tensor with each
vector variable ``x_j`` repeated ``d_j`` times and adds a constant.  A tensor
multivariate polynomial (TMV) is a sum of STMs over the same variables.

Axes of an STM tensor are grouped by variable in ``var_names`` order: the
first ``d_1`` axes belong to the first variable, the next ``d_2`` to the
second, and so on.  Every axis of one variable has that variable's
dimension.

Two evaluation paths exist.  The float path contracts a whole batch of
assignments at once with element-wise multiply-accumulate, so the value
computed for a given point never depends on what else is in the batch.  The
exact path runs an odometer over the tensor indices in rational arithmetic
and is meant for oracles on small instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, SchemaError, UnassignedVariableError

__all__ = [
    "DenseTensor",
    "StmPolynomial",
    "TmvPolynomial",
    "PolyStats",
    "eval_stm",
    "eval_tmv",
    "eval_tmv_batch",
    "poly_stats",
    "constant_poly",
    "tensor_from_json",
    "tensor_to_json",
    "stm_from_json",
    "stm_to_json",
    "tmv_from_json",
    "tmv_to_json",
]


def _as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    return Fraction(float(value))


class DenseTensor:
    """Dense coefficient array stored row-major.

    ``p`` is the common axis length.  Axes may have different lengths when
    variables of different dimension share a tensor; ``p`` is then the
    largest axis length.
    """

    __slots__ = ("data", "alpha", "_exact")

    def __init__(self, values, exact=None):
        if exact is None:
            raw = values if isinstance(values, np.ndarray) else np.asarray(values, dtype=object)
            if raw.dtype == object and any(isinstance(v, Fraction) for v in raw.flat):
                exact = raw
        data = np.array(values, dtype=float)
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        data.setflags(write=False)
        self.data = data
        self.alpha = float(np.max(np.abs(data))) if data.size else 0.0
        if exact is not None:
            exact = np.array([_as_fraction(v) for v in np.asarray(exact, dtype=object).flat],
                             dtype=object).reshape(data.shape)
            exact.setflags(write=False)
        self._exact = exact

    @classmethod
    def from_flat(cls, p: int, order: int, entries: Sequence) -> "DenseTensor":
        if len(entries) != p ** order:
            raise DimensionError(
                f"expected p^order = {p ** order} entries, got {len(entries)}",
                expected=p ** order, got=len(entries))
        shape = (p,) * order
        if any(isinstance(e, Fraction) for e in entries):
            arr = np.empty(len(entries), dtype=object)
            arr[:] = list(entries)
            return cls(arr.reshape(shape))
        return cls(np.asarray(entries, dtype=float).reshape(shape))

    @classmethod
    def from_coords(cls, shape: Sequence[int], coords) -> "DenseTensor":
        """Materialize a coordinate list ``[(index_tuple, value), ...]`` (0-based)."""
        shape = tuple(int(s) for s in shape)
        exact = any(isinstance(v, Fraction) for _, v in coords)
        arr = np.zeros(shape, dtype=object if exact else float)
        if exact:
            arr[...] = Fraction(0)
        for index, value in coords:
            index = tuple(int(i) for i in index)
            if len(index) != len(shape) or any(not 0 <= i < s for i, s in zip(index, shape)):
                raise DimensionError(f"coordinate {index} outside tensor of shape {shape}")
            arr[index] = arr[index] + value
        return cls(arr)

    @classmethod
    def scalar(cls, value=0.0) -> "DenseTensor":
        return cls(np.array(value, dtype=object if isinstance(value, Fraction) else float))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def p(self) -> int:
        return max(self.data.shape) if self.data.ndim else 1

    @property
    def entries(self) -> np.ndarray:
        """Flat row-major view of the coefficients."""
        return self.data.reshape(-1)

    def exact_entries(self) -> list:
        if self._exact is not None:
            return list(self._exact.flat)
        return [Fraction(float(v)) for v in self.data.flat]

    def scaled(self, factor) -> "DenseTensor":
        exact = None
        if self._exact is not None or isinstance(factor, Fraction):
            f = _as_fraction(factor)
            exact = np.array([e * f for e in self.exact_entries()], dtype=object).reshape(self.shape)
        return DenseTensor(self.data * float(factor), exact=exact)

    def __repr__(self):
        return f"DenseTensor(shape={self.shape}, alpha={self.alpha:g})"


def _check_name_list(var_names):
    names = tuple(var_names)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate variable names in {names}")
    return names


@dataclass(frozen=True, eq=False)
class StmPolynomial:
    """``sum a(i_1..i_r) * x_1(i_1) ... x_n(i_r) + constant``."""

    tensor: DenseTensor
    exponents: tuple
    constant: float | Fraction = 0.0
    var_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "var_names", _check_name_list(self.var_names))
        exps = tuple(int(e) for e in self.exponents)
        object.__setattr__(self, "exponents", exps)
        if len(exps) != len(self.var_names):
            raise ValueError("one exponent per variable is required")
        if any(e < 0 for e in exps):
            raise ValueError("exponents must be non-negative")
        if self.tensor.order != sum(exps):
            raise DimensionError(
                f"tensor order {self.tensor.order} != sum of exponents {sum(exps)}",
                expected=sum(exps), got=self.tensor.order)
        self.var_dims()  # validates axis grouping

    @property
    def degree(self) -> int:
        return max(self.exponents, default=0)

    def axis_slices(self):
        """Yield ``(name, first_axis, exponent)`` for each variable."""
        start = 0
        for name, e in zip(self.var_names, self.exponents):
            yield name, start, e
            start += e

    def var_dims(self) -> dict:
        dims = {}
        shape = self.tensor.shape
        for name, start, e in self.axis_slices():
            if e == 0:
                continue
            lengths = set(shape[start:start + e])
            if len(lengths) != 1:
                raise DimensionError(
                    f"axes of variable {name!r} have unequal lengths {sorted(lengths)}",
                    variable=name)
            dims[name] = lengths.pop()
        return dims

    def alpha(self) -> float:
        return max(self.tensor.alpha, abs(float(self.constant)))


@dataclass(frozen=True, eq=False)
class TmvPolynomial:
    """Sum of STM terms sharing one variable list."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a TMV polynomial needs at least one term")
        names = terms[0].var_names
        for term in terms[1:]:
            if term.var_names != names:
                raise ValueError(
                    f"all terms must share var_names; got {term.var_names} and {names}")
        object.__setattr__(self, "terms", terms)
        self.var_dims()

    @property
    def var_names(self) -> tuple:
        return self.terms[0].var_names

    @property
    def length(self) -> int:
        return len(self.terms)

    @property
    def degree(self) -> int:
        return max(term.degree for term in self.terms)

    @property
    def constant(self):
        return sum((term.constant for term in self.terms), 0.0)

    def var_dims(self) -> dict:
        dims = {}
        for term in self.terms:
            for name, dim in term.var_dims().items():
                if dims.setdefault(name, dim) != dim:
                    raise DimensionError(
                        f"variable {name!r} used with dimensions {dims[name]} and {dim}",
                        variable=name)
        return dims

    # -- algebra used by the problem builders -------------------------------

    def with_vars(self, var_names) -> "TmvPolynomial":
        """Re-express over a superset of variables (new ones get exponent 0)."""
        var_names = tuple(var_names)
        if var_names == self.var_names:
            return self
        missing = set(self.var_names) - set(var_names)
        if missing:
            raise ValueError(f"cannot drop variables {sorted(missing)}")
        terms = []
        for term in self.terms:
            exps = dict(zip(term.var_names, term.exponents))
            # tensor axes must follow the new variable order
            perm = []
            starts = {name: (start, e) for name, start, e in term.axis_slices()}
            for name in var_names:
                if name in starts:
                    s, e = starts[name]
                    perm.extend(range(s, s + e))
            tensor = term.tensor
            if perm != list(range(len(perm))):
                data = np.transpose(term.tensor.data, perm)
                exact = None
                if term.tensor._exact is not None:
                    exact = np.transpose(term.tensor._exact, perm)
                tensor = DenseTensor(data, exact=exact)
            terms.append(StmPolynomial(tensor, tuple(exps.get(n, 0) for n in var_names),
                                       term.constant, var_names))
        return TmvPolynomial(tuple(terms))

    def __add__(self, other):
        if isinstance(other, (int, float, Fraction)):
            return self.plus_constant(other)
        names = self.var_names + tuple(n for n in other.var_names if n not in self.var_names)
        return TmvPolynomial(self.with_vars(names).terms + other.with_vars(names).terms)

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        if isinstance(other, (int, float, Fraction)):
            return self.plus_constant(-other)
        return self + (-other)

    def scaled(self, factor) -> "TmvPolynomial":
        return TmvPolynomial(tuple(
            StmPolynomial(t.tensor.scaled(factor), t.exponents, t.constant * factor, t.var_names)
            for t in self.terms))

    def plus_constant(self, value) -> "TmvPolynomial":
        first = self.terms[0]
        head = StmPolynomial(first.tensor, first.exponents, first.constant + value,
                             first.var_names)
        return TmvPolynomial((head,) + self.terms[1:])


def constant_poly(value, var_names=()) -> TmvPolynomial:
    """Degree-0 TMV: an order-0 tensor holding 0 plus the constant."""
    names = tuple(var_names)
    return TmvPolynomial((StmPolynomial(DenseTensor.scalar(0.0), (0,) * len(names), value, names),))


class PolyStats(NamedTuple):
    n: int
    p: int
    d: int
    t: int
    alpha: float


def poly_stats(poly: TmvPolynomial | StmPolynomial) -> PolyStats:
    """Parameters that enter the sample-size bounds.

    ``alpha`` includes the absolute constant of every term.
    """
    if isinstance(poly, StmPolynomial):
        poly = TmvPolynomial((poly,))
    dims = poly.var_dims()
    p = max(dims.values(), default=1)
    alpha = max(term.alpha() for term in poly.terms)
    return PolyStats(len(poly.var_names), p, poly.degree, poly.length, alpha)


# -- evaluation ---------------------------------------------------------------

def _factor_list(term: StmPolynomial, lookup, check_dims=True):
    """Per-axis factor vectors in tensor-axis order."""
    factors = []
    shape = term.tensor.shape
    for name, start, e in term.axis_slices():
        if e == 0:
            continue
        vec = lookup(name)
        got = vec.shape[-1] if hasattr(vec, "shape") else len(vec)
        if check_dims and got != shape[start]:
            raise DimensionError(
                f"variable {name!r} has length {got}, tensor expects {shape[start]}",
                variable=name, expected=shape[start], got=got)
        factors.extend([vec] * e)
    return factors


def _contract_batch(data: np.ndarray, factors, nrows: int) -> np.ndarray:
    """Contract every axis of ``data`` with a batch of vectors.

    ``factors[a]`` has shape ``(nrows, data.shape[a])``.  Each output value
    is a fixed sequence of IEEE multiply-adds over its own row, which keeps
    results bit-identical however the batch is sliced.
    """
    if data.ndim == 0:
        return np.full(nrows, float(data))
    x = factors[0]
    acc = None
    tail = (1,) * (data.ndim - 1)
    for i in range(data.shape[0]):
        if not data[i].any():
            continue
        term = x[:, i].reshape((nrows,) + tail) * data[i]
        acc = term if acc is None else acc + term
    if acc is None:
        return np.zeros(nrows)
    for axis in range(1, data.ndim):
        x = factors[axis]
        tail = (1,) * (acc.ndim - 2)
        new = None
        for i in range(acc.shape[1]):
            term = x[:, i].reshape((nrows,) + tail) * acc[:, i]
            new = term if new is None else new + term
        acc = new
    return acc


def eval_tmv_batch(poly: TmvPolynomial, batch: Mapping[str, np.ndarray]) -> np.ndarray:
    """Evaluate at ``B`` points; ``batch[name]`` has shape ``(B, dim)``."""
    nrows = None

    def lookup(name):
        nonlocal nrows
        try:
            arr = batch[name]
        except KeyError:
            raise UnassignedVariableError(name) from None
        if nrows is None:
            nrows = arr.shape[0]
        return arr

    total = None
    for term in poly.terms:
        factors = _factor_list(term, lookup)
        rows = nrows if nrows is not None else _batch_rows(batch)
        value = _contract_batch(term.tensor.data, factors, rows) + float(term.constant)
        total = value if total is None else total + value
    return total


def _batch_rows(batch):
    for arr in batch.values():
        return arr.shape[0]
    return 1


def _contract_exact(term: StmPolynomial, factors) -> Fraction:
    shape = term.tensor.shape
    flat = term.tensor.exact_entries()
    order = len(shape)
    if order == 0:
        return flat[0]
    idx = [0] * order
    total = Fraction(0)
    pos = 0
    while True:
        coef = flat[pos]
        if coef:
            prod = coef
            for axis in range(order):
                prod *= factors[axis][idx[axis]]
            total += prod
        axis = order - 1
        while axis >= 0:
            idx[axis] += 1
            if idx[axis] < shape[axis]:
                break
            idx[axis] = 0
            axis -= 1
        if axis < 0:
            return total
        pos += 1


def _single_lookup(assignment, exact):
    cache = {}

    def lookup(name):
        if name not in cache:
            try:
                vec = assignment[name]
            except KeyError:
                raise UnassignedVariableError(name) from None
            if exact:
                cache[name] = [_as_fraction(v) for v in vec]
            else:
                cache[name] = np.asarray(vec, dtype=float).reshape(1, -1)
        return cache[name]

    return lookup


def eval_stm(poly: StmPolynomial, assignment: Mapping[str, Sequence], exact: bool = False):
    """Value of an STM polynomial at one assignment.

    With ``exact=True`` the result is a :class:`~fractions.Fraction` computed
    from the rational value of every coefficient and coordinate.
    """
    lookup = _single_lookup(assignment, exact)
    factors = _factor_list(poly, lookup)
    if exact:
        return _contract_exact(poly, factors) + _as_fraction(poly.constant)
    return float(_contract_batch(poly.tensor.data, factors, 1)[0] + float(poly.constant))


def eval_tmv(poly: TmvPolynomial, assignment: Mapping[str, Sequence], exact: bool = False):
    if isinstance(poly, StmPolynomial):
        return eval_stm(poly, assignment, exact)
    if exact:
        return sum((eval_stm(t, assignment, exact=True) for t in poly.terms), Fraction(0))
    batch = {}
    for name in poly.var_dims():
        try:
            batch[name] = np.asarray(assignment[name], dtype=float).reshape(1, -1)
        except KeyError:
            raise UnassignedVariableError(name) from None
    if not batch:
        # only order-0 tensors remain; same summation order as the batch path
        total = 0.0
        for i, t in enumerate(poly.terms):
            value = float(t.tensor.data) + float(t.constant)
            total = value if i == 0 else total + value
        return total
    return float(eval_tmv_batch(poly, batch)[0])


# -- JSON ---------------------------------------------------------------------

def _num(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise SchemaError("expected a number", field)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            raise SchemaError(f"cannot parse number {value!r}", field) from None
    return value


def tensor_from_json(obj, field="tensor") -> DenseTensor:
    """Parse ``{"p", "order", "entries" | {"coords": ...}}`` (indices 1-based).

    An optional ``"shape"`` list replaces ``p``/``order`` for tensors whose
    axes differ in length.
    """
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", field)
    if "shape" in obj:
        shape = tuple(int(s) for s in obj["shape"])
    else:
        try:
            p, order = int(obj["p"]), int(obj["order"])
        except KeyError as exc:
            raise SchemaError("missing key", f"{field}.{exc.args[0]}") from None
        shape = (p,) * order
    entries = obj.get("entries", [] if math.prod(shape) == 0 else None)
    if entries is None:
        raise SchemaError("missing key", f"{field}.entries")
    if isinstance(entries, dict):
        coords = []
        for n, item in enumerate(entries.get("coords", [])):
            try:
                index, value = item
            except (TypeError, ValueError):
                raise SchemaError("expected [[i...], value]", f"{field}.entries.coords[{n}]") from None
            coords.append((tuple(int(i) - 1 for i in index),
                           _num(value, f"{field}.entries.coords[{n}]")))
        try:
            return DenseTensor.from_coords(shape, coords)
        except DimensionError as exc:
            raise SchemaError(str(exc), f"{field}.entries") from None
    flat = np.asarray(entries, dtype=object).reshape(-1)
    if flat.size != math.prod(shape):
        raise SchemaError(f"expected {math.prod(shape)} entries, got {flat.size}", f"{field}.entries")
    values = [_num(v, f"{field}.entries[{i}]") for i, v in enumerate(flat)]
    arr = np.empty(len(values), dtype=object)
    arr[:] = values
    return DenseTensor(arr.reshape(shape))


def tensor_to_json(tensor: DenseTensor) -> dict:
    shape = tensor.shape
    out = {"p": tensor.p, "order": tensor.order}
    if len(set(shape)) > 1:
        out["shape"] = list(shape)
    out["entries"] = [float(v) for v in tensor.entries]
    return out


def stm_from_json(obj, field="poly") -> StmPolynomial:
    tensor = tensor_from_json(obj, field)
    names = obj.get("vars", [])
    exps = obj.get("exponents", [])
    constant = _num(obj.get("a0", 0), f"{field}.a0")
    try:
        return StmPolynomial(tensor, tuple(exps), constant, tuple(names))
    except (ValueError, DimensionError) as exc:
        raise SchemaError(str(exc), field) from None


def stm_to_json(term: StmPolynomial) -> dict:
    out = {"vars": list(term.var_names), "exponents": list(term.exponents)}
    out.update(tensor_to_json(term.tensor))
    out["a0"] = float(term.constant)
    return out


def tmv_from_json(obj, field="poly") -> TmvPolynomial:
    """Parse a TMV (``{"terms": [...]}``) or a single STM object."""
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", field)
    if "monomials" in obj:
        from .formula import tmv_from_monomials_json
        return tmv_from_monomials_json(obj, field)
    if "terms" in obj:
        terms = [stm_from_json(t, f"{field}.terms[{i}]") for i, t in enumerate(obj["terms"])]
        names = []
        for t in terms:
            names.extend(n for n in t.var_names if n not in names)
        polys = [TmvPolynomial((t,)).with_vars(names) for t in terms]
        try:
            return TmvPolynomial(tuple(p.terms[0] for p in polys))
        except (ValueError, DimensionError) as exc:
            raise SchemaError(str(exc), field) from None
    return TmvPolynomial((stm_from_json(obj, field),))


def tmv_to_json(poly: TmvPolynomial) -> dict:
    return {"terms": [stm_to_json(t) for t in poly.terms]}
