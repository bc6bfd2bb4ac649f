"""Jet-evaluable component functions.

Every coordinate component (metric entries, Christoffel coefficients, map
components, section components) is a :class:`JetFn`: a callable returning a
partial derivative of a real function at a point.  Derivatives are requested
by a *count* multi-index ``alpha`` (``alpha[i]`` = number of derivatives along
axis ``i``); internally they are canonicalized to sorted axis tuples, e.g.
``alpha=(1, 2)`` becomes ``(0, 1, 1)``, so mixed partials are symmetric by
construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

from .errors import OrderExceeded, OutOfDomain

MAX_ORDER = 4
_EPS = np.finfo(float).eps
# slack for points sitting on a box face after float round-off
_BOX_SLACK = 1e-12


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate box ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __init__(self, lower, upper):
        lo = tuple(float(v) for v in np.atleast_1d(lower))
        hi = tuple(float(v) for v in np.atleast_1d(upper))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("Box bounds must be non-empty and of equal length")
        if any(not a < b for a, b in zip(lo, hi)):
            raise ValueError(f"Box requires lower < upper on every axis, got {lo}, {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.lower) + np.array(self.upper))

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x, tol: float = _BOX_SLACK) -> bool:
        for xi, a, b in zip(x, self.lower, self.upper):
            slack = tol * max(1.0, abs(xi))
            if not (a - slack <= xi <= b + slack):
                return False
        return True

    def contains_box(self, other: "Box") -> bool:
        return self.contains(other.lower) and self.contains(other.upper)

    def strictly_contains_box(self, other: "Box") -> bool:
        return (all(a < b for a, b in zip(self.lower, other.lower))
                and all(b < a for a, b in zip(self.upper, other.upper)))

    def inset(self, fraction: float) -> "Box":
        """Shrink each side by ``fraction`` of the width."""
        pad = fraction * self.widths
        return Box(np.array(self.lower) + pad, np.array(self.upper) - pad)

    def grid(self, n: int | Sequence[int], inset: float = 0.0) -> np.ndarray:
        """Tensor grid of points, shape ``(N, dim)``."""
        box = self.inset(inset) if inset else self
        counts = [n] * self.dim if np.isscalar(n) else list(n)
        axes = [np.linspace(a, b, k) for a, b, k in zip(box.lower, box.upper, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}


def counts_to_axes(alpha: Sequence[int]) -> tuple:
    return tuple(i for i, k in enumerate(alpha) for _ in range(int(k)))


def axes_to_counts(axes: Sequence[int], arity: int) -> tuple:
    counts = [0] * arity
    for a in axes:
        counts[a] += 1
    return tuple(counts)


def canonical(axes: Sequence[int]) -> tuple:
    return tuple(sorted(int(a) for a in axes))


def multi_indices(arity: int, order: int):
    """All canonical axis tuples of exactly ``order`` derivatives."""
    return combinations_with_replacement(range(arity), order)


class JetFn:
    """A real function of ``arity`` variables with derivatives up to ``max_order``.

    ``evaluator(x, axes)`` receives a float ndarray point and a sorted tuple
    of axes and returns the corresponding partial derivative.
    """

    __slots__ = ("evaluator", "arity", "max_order", "domain", "is_zero", "label")

    def __init__(self, evaluator: Callable, arity: int, max_order: int = MAX_ORDER,
                 domain: Box | None = None, *, is_zero: bool = False, label: str = ""):
        if arity < 1:
            raise ValueError("arity must be positive")
        if not 0 <= max_order <= MAX_ORDER:
            raise ValueError(f"max_order must lie in 0..{MAX_ORDER}")
        if domain is not None and domain.dim != arity:
            raise ValueError("domain dimension does not match arity")
        self.evaluator = evaluator
        self.arity = arity
        self.max_order = max_order
        self.domain = domain
        self.is_zero = is_zero
        self.label = label

    def __repr__(self):
        tag = self.label or getattr(self.evaluator, "__name__", "fn")
        return f"JetFn({tag}, arity={self.arity}, max_order={self.max_order})"

    def d(self, x, axes: tuple = ()) -> float:
        """Partial derivative along sorted ``axes`` (no bookkeeping beyond checks)."""
        if len(axes) > self.max_order:
            raise OrderExceeded(f"order {len(axes)} requested, {self} provides {self.max_order}")
        if self.is_zero:
            return 0.0
        if self.domain is not None and not self.domain.contains(x):
            raise OutOfDomain(f"point {np.asarray(x).tolist()} outside {self.domain}")
        return float(self.evaluator(x, axes))

    def __call__(self, x, alpha: Sequence[int] | None = None) -> float:
        return eval_jet(self, x, alpha)

    # --- algebra -------------------------------------------------------------
    def __add__(self, other):
        return jet_sum(self, as_jet(other, self.arity))

    __radd__ = __add__

    def __sub__(self, other):
        return jet_sum(self, jet_scale(as_jet(other, self.arity), -1.0))

    def __rsub__(self, other):
        return jet_sum(as_jet(other, self.arity), jet_scale(self, -1.0))

    def __neg__(self):
        return jet_scale(self, -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return jet_scale(self, float(other))
        return jet_product(self, other)

    __rmul__ = __mul__


def eval_jet(f: JetFn, x, alpha: Sequence[int] | None = None) -> float:
    """Return the partial derivative ``∂^alpha f(x)`` (count multi-index)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != f.arity:
        raise ValueError(f"point has {x.size} coordinates, function takes {f.arity}")
    if alpha is None:
        alpha = (0,) * f.arity
    if len(alpha) != f.arity or any(int(a) < 0 for a in alpha):
        raise ValueError(f"multi-index {tuple(alpha)} does not match arity {f.arity}")
    axes = counts_to_axes(alpha)
    if len(axes) > f.max_order:
        raise OrderExceeded(f"|alpha|={len(axes)} exceeds max_order={f.max_order}")
    return f.d(x, axes)


# --- constructors and algebra ------------------------------------------------

def constant(value: float, arity: int, domain: Box | None = None) -> JetFn:
    value = float(value)
    if value == 0.0:
        return zero(arity, domain)

    def ev(x, axes):
        return value if not axes else 0.0

    return JetFn(ev, arity, MAX_ORDER, domain, label=f"const({value:g})")


def zero(arity: int, domain: Box | None = None) -> JetFn:
    return JetFn(lambda x, axes: 0.0, arity, MAX_ORDER, domain, is_zero=True, label="0")


def coordinate(i: int, arity: int, domain: Box | None = None) -> JetFn:
    def ev(x, axes):
        if not axes:
            return x[i]
        return 1.0 if axes == (i,) else 0.0

    return JetFn(ev, arity, MAX_ORDER, domain, label=f"x{i + 1}")


def as_jet(obj, arity: int) -> JetFn:
    if isinstance(obj, JetFn):
        if obj.arity != arity:
            raise ValueError("arity mismatch in jet arithmetic")
        return obj
    return constant(float(obj), arity)


def _merge_domain(a: JetFn, b: JetFn):
    return a.domain if a.domain is not None else b.domain


def jet_sum(a: JetFn, b: JetFn) -> JetFn:
    if a.is_zero:
        return b
    if b.is_zero:
        return a

    def ev(x, axes):
        return a.evaluator(x, axes) + b.evaluator(x, axes)

    return JetFn(ev, a.arity, min(a.max_order, b.max_order), _merge_domain(a, b),
                 label=f"({a.label}+{b.label})")


def jet_scale(a: JetFn, s: float) -> JetFn:
    if a.is_zero or s == 0.0:
        return zero(a.arity, a.domain)

    def ev(x, axes):
        return s * a.evaluator(x, axes)

    return JetFn(ev, a.arity, a.max_order, a.domain, label=f"{s:g}*{a.label}")


def _sub_multisets(axes: tuple):
    """Yield (beta, rest, multiplicity) over sub-multisets of a sorted axis tuple."""
    counts = {}
    for a in axes:
        counts[a] = counts.get(a, 0) + 1
    keys = sorted(counts)

    def rec(idx):
        if idx == len(keys):
            yield (), (), 1
            return
        k = keys[idx]
        n = counts[k]
        for take in range(n + 1):
            c = math.comb(n, take)
            for beta, rest, mult in rec(idx + 1):
                yield (k,) * take + beta, (k,) * (n - take) + rest, c * mult

    yield from rec(0)


def jet_product(a: JetFn, b: JetFn) -> JetFn:
    """Product with Leibniz-rule jets."""
    if a.arity != b.arity:
        raise ValueError("arity mismatch in jet product")
    if a.is_zero or b.is_zero:
        return zero(a.arity, _merge_domain(a, b))
    cache = {}

    def ev(x, axes):
        if not axes:
            return a.evaluator(x, ()) * b.evaluator(x, ())
        terms = cache.get(axes)
        if terms is None:
            terms = cache[axes] = list(_sub_multisets(axes))
        total = 0.0
        for beta, rest, mult in terms:
            fb = a.evaluator(x, beta)
            if fb != 0.0:
                total += mult * fb * b.evaluator(x, rest)
        return total

    return JetFn(ev, a.arity, min(a.max_order, b.max_order), _merge_domain(a, b),
                 label=f"({a.label}*{b.label})")


def partial(f: JetFn, axes: Sequence[int]) -> JetFn:
    """The JetFn of ``∂^axes f``; its max order drops by ``len(axes)``."""
    base = canonical(axes)
    if len(base) > f.max_order:
        raise OrderExceeded("cannot differentiate past max_order")
    if f.is_zero:
        return zero(f.arity, f.domain)

    def ev(x, ax):
        return f.evaluator(x, canonical(base + ax))

    return JetFn(ev, f.arity, f.max_order - len(base), f.domain,
                 label=f"d{''.join(str(a + 1) for a in base)}({f.label})")


def from_callables(derivs: dict, arity: int, domain: Box | None = None,
                   label: str = "") -> JetFn:
    """Build a JetFn from a table ``{sorted axes tuple: callable(x)}``.

    Missing entries of order ≤ the highest supplied order are treated as 0.
    """
    table = {canonical(k): v for k, v in derivs.items()}
    order = max(len(k) for k in table)

    def ev(x, axes):
        fn = table.get(axes)
        return 0.0 if fn is None else fn(x)

    return JetFn(ev, arity, order, domain, label=label)


# --- finite-difference lifting ----------------------------------------------

# 1-D central stencils of second-order accuracy, offsets in units of h.
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def default_step(x) -> np.ndarray:
    """Per-axis step ``eps^(1/6) * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    return _EPS ** (1.0 / 6.0) * np.maximum(1.0, np.abs(x))


def _stencil(axes: tuple, arity: int):
    """Tensor-product stencil: list of (integer offset vector, weight)."""
    counts = axes_to_counts(axes, arity)
    pts = [((0,) * arity, 1.0)]
    for ax, k in enumerate(counts):
        if k == 0:
            continue
        offs, wts = _STENCILS[k]
        new = []
        for off, w in pts:
            for o, v in zip(offs, wts):
                shifted = list(off)
                shifted[ax] = o
                new.append((tuple(shifted), w * v))
        pts = new
    return counts, pts


class _FDEvaluator:
    """Shared-evaluation central differences with one Richardson level."""

    def __init__(self, fn: Callable, x: np.ndarray, step, domain: Box | None):
        self.fn = fn
        self.x = np.asarray(x, dtype=float)
        self.h = default_step(self.x) if step is None else np.broadcast_to(
            np.asarray(step, dtype=float), self.x.shape).copy()
        if np.any(self.h <= 0):
            raise ValueError("finite-difference step must be positive")
        self.domain = domain
        self.cache = {}

    def value(self, offset: tuple, scale: float):
        key = (offset, scale)
        out = self.cache.get(key)
        if out is None:
            pt = self.x + scale * self.h * np.asarray(offset, dtype=float)
            if self.domain is not None and not self.domain.contains(pt):
                raise OutOfDomain(
                    f"finite-difference stencil point {pt.tolist()} leaves {self.domain}")
            out = self.cache[key] = np.asarray(self.fn(pt), dtype=float)
        return out

    def derivative(self, axes: tuple):
        counts, pts = _stencil(axes, self.x.size)
        if not axes:
            return self.value((0,) * self.x.size, 1.0)
        denom = np.prod([self.h[i] ** k for i, k in enumerate(counts)])

        def diff(scale):
            acc = 0.0
            for off, w in pts:
                acc = acc + w * self.value(off, scale)
            return acc / (denom * scale ** len(axes))

        coarse = diff(1.0)
        fine = diff(0.5)
        return (4.0 * fine - coarse) / 3.0


def fd_lift(values_only: Callable, max_order: int, step=None,
            domain: Box | None = None, arity: int | None = None) -> JetFn:
    """Wrap a value-only function as a JetFn with finite-difference derivatives.

    Derivatives are central differences at steps ``h`` and ``h/2`` combined by
    one Richardson step, so first and second derivatives carry O(h^4) error.
    A stencil point outside ``domain`` raises :class:`OutOfDomain`.
    """
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must lie in 0..{MAX_ORDER}")
    if step is not None and np.any(np.asarray(step) <= 0):
        raise ValueError("step must be positive")
    if isinstance(values_only, JetFn):
        inner = values_only
        domain = domain if domain is not None else inner.domain
        arity = inner.arity

        def fn(p):
            return inner.evaluator(p, ())
    else:
        fn = values_only
        if arity is None:
            if domain is None:
                raise ValueError("arity or domain is required for a plain callable")
            arity = domain.dim

    def ev(x, axes):
        return float(_FDEvaluator(fn, x, step, domain).derivative(axes))

    return JetFn(ev, arity, max_order, domain, label="fd")


def fd_jets(fn: Callable, x, order: int = 2, step=None, domain: Box | None = None):
    """Finite-difference jets of a vector-valued ``fn`` at ``x``.

    Returns ``[value, d1, d2, ...]`` up to ``order`` with shapes ``(n,)``,
    ``(n, m)``, ``(n, m, m)``; all stencil evaluations are shared.
    """
    ev = _FDEvaluator(fn, x, step, domain)
    m = ev.x.size
    out = [np.asarray(ev.derivative(()), dtype=float)]
    n_shape = out[0].shape
    for k in range(1, order + 1):
        arr = np.zeros(n_shape + (m,) * k)
        for axes in multi_indices(m, k):
            val = ev.derivative(axes)
            for perm in set(_permutations(axes)):
                arr[(Ellipsis,) + perm] = val
        out.append(arr)
    return out


def _permutations(axes):
    from itertools import permutations
    return permutations(axes)


def component_jets(fns, x, order: int, symmetric_axes: Sequence[Sequence[int]] = ()):
    """Jets of an array of JetFns, filled symmetrically in derivative slots.

    ``fns`` is a nested sequence (array-like of JetFn).  Returns
    ``[values, d1, ..., d_order]`` where ``d_k`` has ``k`` trailing
    derivative axes.  ``symmetric_axes`` lists groups of component axes along
    which the function array is symmetric (only one representative of each
    orbit is evaluated).
    """
    arr = np.empty(np.shape(fns)[:_depth(fns)], dtype=object)
    _fill(arr, fns)
    shape = arr.shape
    x = np.asarray(x, dtype=float)
    m = x.size
    reps = _representatives(shape, symmetric_axes)
    out = []
    for k in range(order + 1):
        res = np.zeros(shape + (m,) * k)
        for idx, images in reps:
            f = arr[idx]
            if f.is_zero:
                continue
            for axes in multi_indices(m, k):
                v = f.d(x, axes)
                if v == 0.0:
                    continue
                perms = set(_permutations(axes)) if k > 1 else (axes,)
                for img in images:
                    for p in perms:
                        res[img + p] = v
        out.append(res)
    return out


def _depth(obj) -> int:
    d = 0
    while isinstance(obj, (list, tuple, np.ndarray)) and not isinstance(obj, JetFn):
        if len(obj) == 0:
            break
        obj = obj[0]
        d += 1
    return d


def _fill(arr, fns):
    for idx in np.ndindex(arr.shape):
        item = fns
        for i in idx:
            item = item[i]
        arr[idx] = item


def _representatives(shape, groups):
    """Map each orbit under index permutations within groups to its members."""
    orbits = {}
    for idx in np.ndindex(shape):
        key = list(idx)
        for grp in groups:
            vals = sorted(key[g] for g in grp)
            for g, v in zip(grp, vals):
                key[g] = v
        orbits.setdefault(tuple(key), []).append(idx)
    return list(orbits.items())
