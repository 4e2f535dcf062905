"""Exact rational linear algebra over sparse point-indexed vectors.

Two solvers back the divisibility machinery:

* ``solve_span_mod_p_integral`` decides whether a target vector lies in
  (rational span of the columns) + (vectors with p-free denominators),
  returning rational column coefficients.  The echelon basis is kept
  p-integral throughout (pivots are entries of minimal p-valuation,
  normalized to 1), which is exactly what makes "reduce the target at the
  pivots, then eat the p-integral remainder" a complete decision rule.
* ``in_integer_span`` decides lattice membership over the integers by a
  column Hermite reduction, for pure-closure style questions.
"""

from __future__ import annotations

from fractions import Fraction

Vec = dict[int, Fraction]


def vec_add(a: Vec, b: Vec) -> Vec:
    out = dict(a)
    for x, q in b.items():
        s = out.get(x, Fraction(0)) + q
        if s == 0:
            out.pop(x, None)
        else:
            out[x] = s
    return out


def vec_scale(q: Fraction, a: Vec) -> Vec:
    if q == 0:
        return {}
    return {x: q * v for x, v in a.items()}


def vec_sub(a: Vec, b: Vec) -> Vec:
    return vec_add(a, vec_scale(Fraction(-1), b))


def _val(p: int, q: Fraction) -> int:
    v = 0
    num, den = q.numerator, q.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def p_integral(p: int, a: Vec) -> bool:
    return all(q.denominator % p != 0 for q in a.values() if q != 0)


def solve_span_mod_p_integral(
    columns: list[Vec], target: Vec, p: int
) -> list[Fraction] | None:
    """Coefficients c with target - sum(c_i * col_i) p-integral, or None."""
    basis: list[tuple[int, Vec, Vec]] = []  # (pivot coord, vector, expression)

    def reduce(v: Vec, expr: Vec) -> tuple[Vec, Vec]:
        for piv, w, wexpr in basis:
            c = v.get(piv, Fraction(0))
            if c != 0:
                v = vec_sub(v, vec_scale(c, w))
                expr = vec_sub(expr, vec_scale(c, wexpr))
        return v, expr

    for i, col in enumerate(columns):
        v = {x: q for x, q in col.items() if q != 0}
        v, expr = reduce(v, {i: Fraction(1)})
        if not v:
            continue
        piv = min(v, key=lambda x: (_val(p, v[x]), x))
        scale = Fraction(1) / v[piv]
        v = vec_scale(scale, v)
        expr = vec_scale(scale, expr)
        # keep the earlier basis reduced at the new pivot
        for j, (bp, w, wexpr) in enumerate(basis):
            c = w.get(piv, Fraction(0))
            if c != 0:
                basis[j] = (bp, vec_sub(w, vec_scale(c, v)), vec_sub(wexpr, vec_scale(c, expr)))
        basis.append((piv, v, expr))

    rem = {x: q for x, q in target.items() if q != 0}
    coeff: Vec = {}
    for piv, w, wexpr in basis:
        c = rem.get(piv, Fraction(0))
        if c != 0:
            rem = vec_sub(rem, vec_scale(c, w))
            coeff = vec_add(coeff, vec_scale(c, wexpr))
    if not p_integral(p, rem):
        return None
    return [coeff.get(i, Fraction(0)) for i in range(len(columns))]


def solve_exact_span(columns: list[Vec], target: Vec) -> list[Fraction] | None:
    """Coefficients with target = sum(c_i * col_i) exactly, or None."""
    basis: list[tuple[int, Vec, Vec]] = []
    for i, col in enumerate(columns):
        v = {x: q for x, q in col.items() if q != 0}
        expr: Vec = {i: Fraction(1)}
        for piv, w, wexpr in basis:
            c = v.get(piv, Fraction(0))
            if c != 0:
                v = vec_sub(v, vec_scale(c, w))
                expr = vec_sub(expr, vec_scale(c, wexpr))
        if not v:
            continue
        piv = min(v)
        scale = Fraction(1) / v[piv]
        v, expr = vec_scale(scale, v), vec_scale(scale, expr)
        for j, (bp, w, wexpr) in enumerate(basis):
            c = w.get(piv, Fraction(0))
            if c != 0:
                basis[j] = (bp, vec_sub(w, vec_scale(c, v)), vec_sub(wexpr, vec_scale(c, expr)))
        basis.append((piv, v, expr))
    rem = {x: q for x, q in target.items() if q != 0}
    coeff: Vec = {}
    for piv, w, wexpr in basis:
        c = rem.get(piv, Fraction(0))
        if c != 0:
            rem = vec_sub(rem, vec_scale(c, w))
            coeff = vec_add(coeff, vec_scale(c, wexpr))
    if rem:
        return None
    return [coeff.get(i, Fraction(0)) for i in range(len(columns))]


def rational_rank(columns: list[Vec]) -> int:
    basis: list[tuple[int, Vec]] = []
    for col in columns:
        v = {x: q for x, q in col.items() if q != 0}
        for piv, w in basis:
            c = v.get(piv, Fraction(0))
            if c != 0:
                v = vec_sub(v, vec_scale(c, w))
        if v:
            piv = min(v)
            basis.append((piv, vec_scale(Fraction(1) / v[piv], v)))
    return len(basis)


def in_integer_span(columns: list[dict[int, int]], target: dict[int, int]) -> bool:
    """Whether target is an integer combination of the integer columns."""
    cols = [dict(c) for c in columns if any(v != 0 for v in c.values())]
    coords = sorted({x for c in cols for x in c} | set(target))
    work = [[c.get(x, 0) for x in coords] for c in cols]  # column-major
    t = [target.get(x, 0) for x in coords]
    n = len(coords)
    used = [False] * len(work)
    for row in range(n):
        live = [j for j, c in enumerate(work) if not used[j] and c[row] != 0]
        if not live:
            continue
        # euclidean reduction among the live columns at this row
        while len(live) > 1:
            live.sort(key=lambda j: abs(work[j][row]))
            j0 = live[0]
            for j in live[1:]:
                q = work[j][row] // work[j0][row]
                work[j] = [a - q * b for a, b in zip(work[j], work[j0])]
            live = [j for j in live if work[j][row] != 0]
        j0 = live[0]
        piv = work[j0][row]
        if t[row] % piv == 0:
            q = t[row] // piv
            t = [a - q * b for a, b in zip(t, work[j0])]
        used[j0] = True
        if t[row] != 0:
            return False
    return all(v == 0 for v in t)
