"""Real-valued functions on a metric measure space.

A :class:`FieldFunction` is either *analytic* (a vectorised callable of the
real coordinate, used on 1-D weighted lines and on discrete spaces that carry
coordinates) or *sampled* (a fixed table of per-node values on a discrete
space).  The catalog below holds the closed forms used throughout the tests
and the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class FieldFunction:
    """A real function on points of a space.

    Parameters
    ----------
    func : callable or None
        Vectorised map ``ndarray -> ndarray`` of coordinates.  ``None`` for
        purely sampled functions.
    name : str
        Human readable label, also used in JSON output.
    breakpoints : tuple of float
        Coordinates where ``func`` is not smooth; quadrature splits there.
    values : ndarray or None
        Per-node values for sampled functions; NaN marks nodes where the
        function is undefined (for example outside a solver's working set).
    params : mapping
        Catalog parameters, kept for serialisation.
    """

    func: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "f"
    breakpoints: tuple = ()
    values: np.ndarray | None = None
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.func is None and self.values is None:
            raise InputError("a FieldFunction needs either a callable or sampled values")
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.ndim != 1:
                raise InputError("sampled values must be one-dimensional")
            if np.any(np.isinf(vals)):
                raise InputError("sampled values must be finite (NaN marks undefined nodes)")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)

    @property
    def is_sampled(self) -> bool:
        return self.values is not None

    def __call__(self, x):
        """Evaluate at coordinates (analytic) or node ids (sampled)."""
        if self.values is not None:
            idx = np.asarray(x)
            if idx.dtype.kind not in "iu":
                raise InputError(f"sampled function {self.name!r} needs integer node ids")
            return self.values[idx]
        arr = np.asarray(x, dtype=float)
        out = np.asarray(self.func(arr), dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        return out if out.ndim else float(out)

    def on_nodes(self, nodes, coords=None) -> np.ndarray:
        """Values at the given node ids of a discrete space."""
        nodes = np.asarray(nodes, dtype=int)
        if self.values is not None:
            return self.values[nodes]
        if coords is None:
            raise InputError(f"function {self.name!r} is analytic but the space has no coordinates")
        return np.asarray(self(np.asarray(coords, dtype=float)[nodes]), dtype=float)

    def sample(self, coords) -> "FieldFunction":
        """Freeze an analytic function into per-node values."""
        return FieldFunction(values=np.asarray(self(np.asarray(coords, dtype=float)), dtype=float),
                             name=self.name)

    # -- algebra ---------------------------------------------------------
    def _combine(self, other, op, symbol):
        if isinstance(other, FieldFunction):
            name = f"({self.name}{symbol}{other.name})"
            if self.values is not None or other.values is not None:
                if self.values is None or other.values is None:
                    raise InputError("cannot combine a sampled and an analytic function; sample first")
                if self.values.shape != other.values.shape:
                    raise InputError("sampled functions live on spaces of different size")
                return FieldFunction(values=op(self.values, other.values), name=name)
            f, g = self.func, other.func
            return FieldFunction(lambda t: op(f(t), g(t)), name,
                                 tuple(sorted(set(self.breakpoints) | set(other.breakpoints))))
        c = float(other)
        name = f"({self.name}{symbol}{c:g})"
        if self.values is not None:
            return FieldFunction(values=op(self.values, c), name=name)
        f = self.func
        return FieldFunction(lambda t: op(f(t), c), name, self.breakpoints)

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def compose(self, outer: Callable[[np.ndarray], np.ndarray], name: str = "F") -> "FieldFunction":
        """Return ``outer(self)`` for a vectorised real map ``outer``."""
        label = f"{name}({self.name})"
        if self.values is not None:
            return FieldFunction(values=np.asarray(outer(self.values), dtype=float), name=label)
        f = self.func
        return FieldFunction(lambda t: outer(f(t)), label, self.breakpoints)

    def positive_part(self, level: float = 0.0) -> "FieldFunction":
        """``(f - level)_+``."""
        return (self - level).compose(lambda v: np.maximum(v, 0.0), "pos")


def maximum(*funcs: FieldFunction) -> FieldFunction:
    """Pointwise maximum of several functions of the same kind."""
    if not funcs:
        raise InputError("maximum of an empty family")
    name = "max(" + ",".join(f.name for f in funcs) + ")"
    if all(f.values is not None for f in funcs):
        return FieldFunction(values=np.max(np.vstack([f.values for f in funcs]), axis=0), name=name)
    if any(f.values is not None for f in funcs):
        raise InputError("cannot take the maximum of sampled and analytic functions")
    callables = [f.func for f in funcs]
    bps = set()
    for f in funcs:
        bps |= set(f.breakpoints)
    return FieldFunction(lambda t: np.max(np.stack([np.broadcast_to(c(t), np.shape(t)) for c in callables]), axis=0),
                         name, tuple(sorted(bps)))


# -- catalog ---------------------------------------------------------------

def constant(c: float = 1.0) -> FieldFunction:
    c = float(c)
    return FieldFunction(lambda t: np.full(np.shape(t), c), f"{c:g}", params={"c": c})


def affine(a: float = 1.0, b: float = 0.0) -> FieldFunction:
    """``a*x + b``."""
    a, b = float(a), float(b)
    return FieldFunction(lambda t: a * t + b, f"{a:g}x+{b:g}", params={"a": a, "b": b})


def a_over_x_plus_b(A: float = 1.0, B: float = 0.0) -> FieldFunction:
    """``A/x + B`` with the value ``B`` at the origin.

    The convention at 0 keeps the odd part of the function odd, which is the
    choice that makes ``1/x`` average to zero over balls centred at 0.
    """
    A, B = float(A), float(B)

    def func(t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, B)
        nz = t != 0
        out[nz] += A / t[nz]
        return out

    return FieldFunction(func, f"{A:g}/x+{B:g}", (0.0,), params={"A": A, "B": B})


def reciprocal() -> FieldFunction:
    """``1/x`` with ``f(0) = 0``."""
    f = a_over_x_plus_b(1.0, 0.0)
    return FieldFunction(f.func, "1/x", (0.0,))


def one_plus_exp2x() -> FieldFunction:
    return FieldFunction(lambda t: 1.0 + np.exp(2.0 * t), "1+exp(2x)")


def logistic_inv() -> FieldFunction:
    """``1/(1+e^{2x})`` written as ``(1 - tanh x)/2`` to avoid overflow."""
    return FieldFunction(lambda t: 0.5 * (1.0 - np.tanh(t)), "1/(1+exp(2x))")


def square() -> FieldFunction:
    return FieldFunction(lambda t: np.square(t), "x^2")


def exp_scaled(a: float = 1.0, b: float = 1.0) -> FieldFunction:
    """``a * exp(b x)``."""
    a, b = float(a), float(b)
    return FieldFunction(lambda t: a * np.exp(b * t), f"{a:g}exp({b:g}x)", params={"a": a, "b": b})


CATALOG: dict[str, Callable[..., FieldFunction]] = {
    "constant": constant,
    "affine": affine,
    "reciprocal": reciprocal,
    "one_plus_exp2x": one_plus_exp2x,
    "logistic_inv": logistic_inv,
    "square": square,
    "a_over_x_plus_b": a_over_x_plus_b,
    "exp_scaled": exp_scaled,
}


def from_ref(ref) -> FieldFunction:
    """Build a function from a JSON reference.

    Accepts ``"square"``, ``{"id": "affine", "params": {"a": 1, "b": 0}}`` or
    ``{"values": [...]}`` for sampled data.
    """
    if isinstance(ref, FieldFunction):
        return ref
    if isinstance(ref, str):
        ref = {"id": ref}
    if not isinstance(ref, Mapping):
        raise InputError(f"cannot interpret function reference {ref!r}")
    if "values" in ref:
        return FieldFunction(values=np.asarray(ref["values"], dtype=float), name=ref.get("name", "sampled"))
    fid = ref.get("id")
    if fid not in CATALOG:
        raise InputError(f"unknown function id {fid!r}; known: {sorted(CATALOG)}")
    try:
        return CATALOG[fid](**dict(ref.get("params", {})))
    except TypeError as exc:
        raise InputError(f"bad parameters for {fid!r}: {exc}") from None
