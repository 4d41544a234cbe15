"""Tagged forward-mode dual numbers.

Each differentiation pass allocates a fresh tag. A ``Dual`` whose parts are
themselves duals of a lower tag represents a nested (hyper-dual) number, so
second derivatives come from running one pass inside another. Operations
between duals of different tags treat the lower-tagged operand as a constant
of the higher level, which avoids perturbation confusion.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

_tag_counter = itertools.count(1)


def new_tag() -> int:
    return next(_tag_counter)


class Dual:
    __slots__ = ("tag", "re", "du")
    # make numpy scalars defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, tag: int, re, du):
        self.tag = tag
        self.re = re
        self.du = du

    def __repr__(self) -> str:
        return f"Dual[{self.tag}]({self.re!r}, {self.du!r})"

    # arithmetic ---------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, Dual):
            if o.tag == self.tag:
                return Dual(self.tag, self.re + o.re, self.du + o.du)
            if o.tag > self.tag:
                return o.__radd__(self)
        return Dual(self.tag, self.re + o, self.du)

    def __radd__(self, o):
        return Dual(self.tag, o + self.re, self.du)

    def __sub__(self, o):
        if isinstance(o, Dual):
            if o.tag == self.tag:
                return Dual(self.tag, self.re - o.re, self.du - o.du)
            if o.tag > self.tag:
                return o.__rsub__(self)
        return Dual(self.tag, self.re - o, self.du)

    def __rsub__(self, o):
        return Dual(self.tag, o - self.re, -self.du)

    def __neg__(self):
        return Dual(self.tag, -self.re, -self.du)

    def __pos__(self):
        return self

    def __mul__(self, o):
        if isinstance(o, Dual):
            if o.tag == self.tag:
                return Dual(self.tag, self.re * o.re, self.re * o.du + self.du * o.re)
            if o.tag > self.tag:
                return o.__rmul__(self)
        return Dual(self.tag, self.re * o, self.du * o)

    def __rmul__(self, o):
        return Dual(self.tag, o * self.re, o * self.du)

    def __truediv__(self, o):
        if isinstance(o, Dual):
            if o.tag == self.tag:
                q = self.re / o.re
                return Dual(self.tag, q, (self.du - q * o.du) / o.re)
            if o.tag > self.tag:
                return o.__rtruediv__(self)
        return Dual(self.tag, self.re / o, self.du / o)

    def __rtruediv__(self, o):
        q = o / self.re
        return Dual(self.tag, q, -q * self.du / self.re)

    def __pow__(self, o):
        return dpow(self, o)

    def __rpow__(self, o):
        return dpow(o, self)


def primal(x):
    """Strip every dual layer and return the underlying float."""
    while isinstance(x, Dual):
        x = x.re
    return x


def _is_const_zero(x) -> bool:
    return not isinstance(x, Dual) and x == 0


# elementary functions -------------------------------------------------------

def dsin(x):
    if isinstance(x, Dual):
        return Dual(x.tag, dsin(x.re), dcos(x.re) * x.du)
    return math.sin(x)


def dcos(x):
    if isinstance(x, Dual):
        return Dual(x.tag, dcos(x.re), -dsin(x.re) * x.du)
    return math.cos(x)


def dtan(x):
    if isinstance(x, Dual):
        t = dtan(x.re)
        return Dual(x.tag, t, (1.0 + t * t) * x.du)
    return math.tan(x)


def dexp(x):
    if isinstance(x, Dual):
        e = dexp(x.re)
        return Dual(x.tag, e, e * x.du)
    return math.exp(x)


def dlog(x):
    if isinstance(x, Dual):
        return Dual(x.tag, dlog(x.re), x.du / x.re)
    return math.log(x)


def dsqrt(x):
    if isinstance(x, Dual):
        s = dsqrt(x.re)
        return Dual(x.tag, s, x.du / (2.0 * s))
    return math.sqrt(x)


def dpow(a, b):
    a_dual = isinstance(a, Dual)
    b_dual = isinstance(b, Dual)
    if b_dual and (not a_dual or b.tag > a.tag):
        v = dpow(a, b.re)
        if _is_const_zero(b.du):
            return Dual(b.tag, v, 0.0)
        return Dual(b.tag, v, dlog(a) * v * b.du)
    if a_dual and (not b_dual or a.tag > b.tag):
        if _is_const_zero(b):
            return 1.0
        return Dual(a.tag, dpow(a.re, b), b * dpow(a.re, b - 1.0) * a.du)
    if a_dual:  # same tag
        v = dpow(a.re, b.re)
        du = 0.0
        if not _is_const_zero(a.du):
            du = b.re * dpow(a.re, b.re - 1.0) * a.du
        if not _is_const_zero(b.du):
            du = du + dlog(a.re) * v * b.du
        return Dual(a.tag, v, du)
    a = float(a)
    b = float(b)
    if a < 0.0 and b != math.floor(b):
        raise ValueError("negative base with non-integer exponent")
    return a ** b


# differentiation drivers ----------------------------------------------------

def _split(o, tag):
    if isinstance(o, Dual) and o.tag == tag:
        return o.re, o.du
    return o, 0.0


def jvp(fn: Callable[[list], list], args: Sequence, tangent: Sequence):
    """Value and directional derivative of a list-valued ``fn`` at ``args``.

    ``args`` and ``tangent`` may themselves hold duals of older tags; the
    result then carries those tags, which is how nested derivatives work.
    """
    tag = new_tag()
    seeded = [a if _is_const_zero(t) else Dual(tag, a, t) for a, t in zip(args, tangent)]
    out = fn(seeded)
    vals = []
    ders = []
    for o in out:
        v, d = _split(o, tag)
        vals.append(v)
        ders.append(d)
    return vals, ders


def jacobian(fn: Callable[[list], list], args: Sequence):
    """Return ``(values, J)`` with ``J[i][j] = d out_i / d args_j``."""
    args = list(args)
    k = len(args)
    cols = []
    vals = None
    for j in range(k):
        e = [0.0] * k
        e[j] = 1.0
        vals, d = jvp(fn, args, e)
        cols.append(d)
    if vals is None:
        vals = list(fn(args))
    rows = [[cols[j][i] for j in range(k)] for i in range(len(vals))]
    return vals, rows


def second_order(fn: Callable[[list], list], args: Sequence, t_dir: Sequence,
                 e_dir: Sequence, te_dir: Sequence):
    """Evaluate ``fn`` along ``args + t*t_dir + e*e_dir + t*e*te_dir``.

    Returns ``(value, d/dt, d/de, d2/dtde)`` at ``t = e = 0`` using one
    nested dual pass; this is exactly the induced action of ``fn`` on second
    iterated tangent coordinates.
    """
    outer = new_tag()
    inner = new_tag()
    seeded = []
    for a, dt, de, dte in zip(args, t_dir, e_dir, te_dir):
        # outer level is t, inner level is e
        seeded.append(Dual(inner, Dual(outer, a, dt), Dual(outer, de, dte)))
    out = fn(seeded)
    val, d_t, d_e, d_te = [], [], [], []
    for o in out:
        re, du = _split(o, inner)
        v, vt = _split(re, outer)
        de, dte = _split(du, outer)
        val.append(v)
        d_t.append(vt)
        d_e.append(de)
        d_te.append(dte)
    return val, d_t, d_e, d_te
