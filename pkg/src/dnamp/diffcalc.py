"""Constant-coefficient derivations on C(I) / M and the named operators built from them.

A :class:`Derivation` is stored extensionally as its values on the independent
coordinates; applying it is the chain rule ``sum_v D(v) * d/dv``.  A
:class:`DiffOperator` is a sum of ``coeff * D1(D2(.))`` terms plus a scalar;
internally it is flattened once into polynomial coefficients in front of
ordered partial derivatives, which is what application uses.  Composites
(commutators, products) are kept as lazy expression trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence, Union

import flint

from .exactalg import AnyExpr, Polynomial, RationalFunction, VarId, as_rf, to_fmpq
from .kinspace import BULLET, KinSpace, MasterSpace, var_name

Space = Union[KinSpace, MasterSpace]

def theory_params(theory: str, n: int) -> tuple[int, int]:
    """``(h, s)`` for a theory: YM has h=1, s=4-n; GR has h=2, s=2."""
    t = theory.upper()
    if t == "YM":
        return 1, 4 - n
    if t == "GR":
        return 2, 2
    raise ValueError(f"unknown theory {theory!r}")


def _d(a, b) -> int:
    return 1 if a == b else 0


def derivation_value(n: int, kind: str, i, j, kind2: str, a, b) -> Fraction:
    """Closed-form ``[D_{x_ij}, y_ab]`` from the derivation commutator table."""
    if kind != kind2 or i == j or a == b:
        return Fraction(0)
    if kind == "k":
        if n == 3:
            return Fraction(0)
        return (
            _d(i, a) * _d(j, b)
            + _d(i, b) * _d(j, a)
            - Fraction(_d(i, a) + _d(i, b) + _d(j, a) + _d(j, b), n - 2)
            + Fraction(2, (n - 1) * (n - 2))
        )
    if kind == "c":
        return _d(j, b) * (_d(i, a) - Fraction(1, n - 1))
    if kind == "e":
        return Fraction(_d(i, a) * _d(j, b) + _d(i, b) * _d(j, a))
    raise ValueError(kind)


def _parse_name(name: str) -> tuple[str, str, str]:
    kind, rest = name[0], name[2:-1]
    a, b = rest.split(",")
    return kind, a, b


class Derivation:
    """A constant vector field, given by its values on independent coordinates."""

    __slots__ = ("space", "values", "label")

    def __init__(self, space: Space, values: Mapping[VarId, Fraction], label: str = "D"):
        self.space = space
        self.values = {v: Fraction(x) for v, x in values.items() if x}
        self.label = label

    def is_zero(self) -> bool:
        return not self.values

    def value_on(self, p: AnyExpr) -> Fraction:
        """The constant ``[D, p]`` for a linear form ``p`` (normal form applied)."""
        r = self.apply(p)
        if not r.is_constant():
            raise ValueError("value_on expects a linear form")
        return r.constant_value()

    def value_on_var(self, name: str) -> Fraction:
        img = self.space.sym(name)
        total = Fraction(0)
        for vmap, c in img.terms():
            (v,) = vmap
            total += c * self.values.get(v, 0)
        return total

    def __add__(self, other: Derivation) -> Derivation:
        vals = dict(self.values)
        for v, x in other.values.items():
            vals[v] = vals.get(v, 0) + x
        return Derivation(self.space, vals, f"({self.label}+{other.label})")

    def __sub__(self, other: Derivation) -> Derivation:
        return self + other.scale(-1)

    def scale(self, c) -> Derivation:
        c = Fraction(c)
        return Derivation(self.space, {v: c * x for v, x in self.values.items()}, f"{c}*{self.label}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Derivation) and other.space is self.space and other.values == self.values

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.values.items())))

    def __repr__(self) -> str:
        return f"Derivation({self.label})"

    def apply_poly(self, p: Polynomial) -> Polynomial:
        raw = p.raw
        out = p.catalog.ctx.constant(0)
        used = p.variables()
        for v, x in self.values.items():
            if v in used:
                out += raw.derivative(v) * to_fmpq(x)
        return Polynomial(p.catalog, out)

    def apply(self, f: AnyExpr) -> RationalFunction:
        f = as_rf(f)
        if f.is_polynomial():
            return RationalFunction(self.apply_poly(f.num))
        n, d = f.num, f.den
        return RationalFunction(self.apply_poly(n) * d - n * self.apply_poly(d), d * d)

    def __call__(self, f: AnyExpr) -> RationalFunction:
        return self.apply(f)


def apply_derivation(d: Derivation, f: AnyExpr) -> RationalFunction:
    return d.apply(f)


def _base_independent(space: Space) -> list[tuple[VarId, str, str, str]]:
    out = []
    for v in space.independent:
        name = space.catalog.name(v)
        kind, a, b = _parse_name(name)
        out.append((v, kind, a, b))
    return out


def make_derivation(space: Space, kind: str, i, j) -> Derivation:
    """``D_{k_ij}``, ``D_{c_ij}``, ``D_{e_ij}``; on a master space ``j='*'`` gives bullet ones."""
    legs = space.legs.labels
    si, sj = str(i), str(j)
    labels = [str(a) for a in legs]
    if kind not in ("k", "c", "e"):
        raise ValueError(f"unknown derivation kind {kind!r}")
    if si not in labels:
        raise KeyError(f"unknown leg {i!r}")
    label = f"D{kind}[{i},{j}]"
    master = isinstance(space, MasterSpace)
    if sj == BULLET and master:
        if kind == "k":
            raise KeyError("bullet derivations need a master space and kind c or e")
        side = space.J if space.side(i) == "J" else space.K
        side_s = {str(a) for a in side}
        vals = {}
        for v, kd, a, b in _base_independent(space):
            if b != BULLET or kd != kind or a not in side_s:
                continue
            vals[v] = Fraction(_d(a, si)) - (Fraction(1, len(side)) if kind == "c" else 0)
        return Derivation(space, vals, label)
    if sj not in labels:
        raise KeyError(f"unknown leg {j!r}")
    n = len(legs)
    vals = {}
    for v, kd, a, b in _base_independent(space):
        if master and b == BULLET:
            continue
        vals[v] = derivation_value(n, kind, si, sj, kd, a, b)
    return Derivation(space, vals, label)


class DerivationTable:
    """Memoized ``D[kind, i, j]`` lookups for one space."""

    def __init__(self, space: Space):
        self.space = space
        self._cache: dict = {}

    def __call__(self, kind: str, i, j) -> Derivation:
        key = (kind, i, j)
        d = self._cache.get(key)
        if d is None:
            d = self._cache[key] = make_derivation(self.space, kind, i, j)
        return d


def derivations(space: Space) -> DerivationTable:
    tab = getattr(space, "_dtable", None)
    if tab is None:
        tab = DerivationTable(space)
        space._dtable = tab
    return tab


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

class OpExpr:
    """Anything that maps rational functions to rational functions linearly."""

    space: Space

    def apply(self, f: AnyExpr) -> RationalFunction:
        raise NotImplementedError

    def __call__(self, f: AnyExpr) -> RationalFunction:
        return self.apply(f)

    def __add__(self, other: OpExpr) -> OpExpr:
        return OpSum(self.space, [(Fraction(1), self), (Fraction(1), other)])

    def __sub__(self, other: OpExpr) -> OpExpr:
        return OpSum(self.space, [(Fraction(1), self), (Fraction(-1), other)])

    def __neg__(self) -> OpExpr:
        return OpSum(self.space, [(Fraction(-1), self)])

    def __rmul__(self, c) -> OpExpr:
        return OpSum(self.space, [(Fraction(c), self)])

    def __matmul__(self, other: OpExpr) -> OpExpr:
        return OpCompose(self.space, [self, other])


class OpSum(OpExpr):
    def __init__(self, space: Space, parts: Sequence[tuple[Fraction, OpExpr]]):
        self.space = space
        self.parts = [(Fraction(c), p) for c, p in parts if c]

    def apply(self, f):
        f = as_rf(f)
        acc = RationalFunction(f.catalog.zero())
        for c, p in self.parts:
            acc = acc + p.apply(f) * c
        return acc

    def __repr__(self):
        return " + ".join(f"{c}*{p!r}" for c, p in self.parts) or "0"


class OpCompose(OpExpr):
    """``ops[0] o ops[1] o ...`` (rightmost applied first)."""

    def __init__(self, space: Space, ops: Sequence[OpExpr]):
        self.space = space
        self.ops = list(ops)

    def apply(self, f):
        for op in reversed(self.ops):
            f = op.apply(f)
        return as_rf(f)

    def __repr__(self):
        return " o ".join(repr(o) for o in self.ops)


class OpMul(OpExpr):
    """Multiplication by a fixed function."""

    def __init__(self, space: Space, g: AnyExpr):
        self.space = space
        self.g = as_rf(g)

    def apply(self, f):
        return as_rf(f) * self.g

    def __repr__(self):
        return f"mul({self.g})"


class DerivOp(OpExpr):
    def __init__(self, d: Derivation):
        self.space = d.space
        self.d = d

    def apply(self, f):
        return self.d.apply(f)

    def __repr__(self):
        return self.d.label


def commutator(P: OpExpr, Q: OpExpr) -> OpExpr:
    return P @ Q - Q @ P


def as_op(x: Union[OpExpr, Derivation]) -> OpExpr:
    return DerivOp(x) if isinstance(x, Derivation) else x


Term = tuple[Polynomial, tuple[Derivation, ...]]


class DiffOperator(OpExpr):
    """``sum coeff * D1(D2(f)) + scalar * f`` with at most two derivation factors."""

    def __init__(self, space: Space, terms: Iterable[Term], scalar=0, name: str = "op"):
        self.space = space
        self.terms = [(c, tuple(ds)) for c, ds in terms if not c.is_zero() and all(not d.is_zero() for d in ds)]
        for _, ds in self.terms:
            if len(ds) > 2:
                raise ValueError("operators of order > 2 are not supported")
        self.scalar = Fraction(scalar)
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def order(self) -> int:
        return max((len(ds) for _, ds in self.terms), default=0)

    def shifted(self, c, name: str | None = None) -> DiffOperator:
        return DiffOperator(self.space, self.terms, self.scalar + Fraction(c), name or f"({self.name}+{c})")

    def combine(self, other: DiffOperator, c=1, name: str | None = None) -> DiffOperator:
        c = Fraction(c)
        terms = list(self.terms) + [(t * c, ds) for t, ds in other.terms]
        return DiffOperator(self.space, terms, self.scalar + c * other.scalar, name or self.name)

    def scaled(self, c, name: str | None = None) -> DiffOperator:
        c = Fraction(c)
        return DiffOperator(self.space, [(t * c, ds) for t, ds in self.terms], self.scalar * c, name or self.name)

    @cached_property
    def expanded(self) -> dict[tuple[VarId, ...], Polynomial]:
        """Coefficients of ``d_u d_v``, ``d_u`` (u <= v) on independent coordinates."""
        cat = self.space.catalog
        acc: dict[tuple, object] = {}
        zero = cat.ctx.constant(0)
        for coeff, ds in self.terms:
            raw = coeff.raw
            if len(ds) == 1:
                for u, a in ds[0].values.items():
                    acc[(u,)] = acc.get((u,), zero) + raw * to_fmpq(a)
            elif len(ds) == 2:
                for u, a in ds[0].values.items():
                    for v, b in ds[1].values.items():
                        key = (u, v) if u <= v else (v, u)
                        acc[key] = acc.get(key, zero) + raw * to_fmpq(a * b)
        return {k: Polynomial(cat, p) for k, p in acc.items() if not p.is_zero()}

    def apply(self, f: AnyExpr) -> RationalFunction:
        return apply_operator(self, f)


def _deriv_cache(raw):
    cache = {(): raw}

    def get(key):
        r = cache.get(key)
        if r is None:
            if len(key) == 1:
                r = raw.derivative(key[0])
            else:
                r = get(key[:1]).derivative(key[1])
            cache[key] = r
        return r

    return get


def apply_operator(op: DiffOperator, f: AnyExpr) -> RationalFunction:
    """Apply an order <= 2 operator; a single reduction happens at the end."""
    f = as_rf(f)
    cat = f.catalog
    if cat != op.space.catalog:
        raise ValueError("operator and function live on different spaces")
    ex = op.expanded
    N = f.num.raw
    used_n = f.num.variables()
    zero = cat.ctx.constant(0)
    dN = _deriv_cache(N)
    s = to_fmpq(op.scalar)
    if f.is_polynomial():
        acc = N * s if op.scalar else zero
        for key, L in ex.items():
            if not set(key) <= used_n:
                continue
            acc += L.raw * dN(key)
        return RationalFunction(Polynomial(cat, acc))
    D = f.den.raw
    used_d = f.den.variables()
    dD = _deriv_cache(D)
    A0 = N * s if op.scalar else zero
    A1 = zero
    A2 = zero
    for key, L in ex.items():
        Lr = L.raw
        if len(key) == 1:
            (u,) = key
            if u in used_n:
                A0 += Lr * dN(key)
            if u in used_d:
                A1 += Lr * dD(key) * N
            continue
        u, v = key
        if u in used_n and v in used_n:
            A0 += Lr * dN(key)
        t = zero
        if u in used_n and v in used_d:
            t += dN((u,)) * dD((v,))
        if v in used_n and u in used_d:
            t += dN((v,)) * dD((u,))
        if u in used_d and v in used_d:
            t += N * dD(key)
            A2 += Lr * dD((u,)) * dD((v,))
        if not t.is_zero():
            A1 += Lr * t
    if A1.is_zero() and A2.is_zero():
        return RationalFunction(Polynomial(cat, A0), f.den)
    num = A0 * D * D - A1 * D + A2 * N * 2
    return RationalFunction(Polynomial(cat, num), Polynomial(cat, D**3))


_CHUNKS = 8


class _Graded:
    """Polynomials split into blocks: monomial in the free variables -> poly in the
    denominator variables (own small context).  Terms are streamed from a lex copy
    with the free variables first, so every block comes out contiguous."""

    def __init__(self, cat, dvars: Sequence[VarId]):
        self.cat = cat
        self.dvars = list(dvars)
        dset = set(dvars)
        self.free = [v for v in range(len(cat)) if v not in dset]
        order = self.free + self.dvars
        self.lex = flint.fmpq_mpoly_ctx.get(tuple(f"y{v}" for v in order), "lex")
        gens = self.lex.gens()
        pos = {v: i for i, v in enumerate(order)}
        self._images = [gens[pos[v]] for v in range(len(cat))]
        self.kctx = flint.fmpq_mpoly_ctx.get(tuple(f"x{j}" for j in range(len(dvars))), "deglex")

    def local(self, raw) -> flint.fmpq_mpoly:
        """Restriction of a poly that only involves the denominator variables."""
        return self.kctx.from_dict({tuple(e[v] for v in self.dvars): c for e, c in raw.to_dict().items()})

    def split(self, raw) -> dict[tuple, flint.fmpq_mpoly]:
        p = raw.compose(*self._images, ctx=self.lex)
        nf = len(self.free)
        out: dict[tuple, flint.fmpq_mpoly] = {}
        key, cur = None, {}
        for i in range(len(p)):
            e = p.monomial(i)
            g = e[:nf]
            if g != key:
                if cur:
                    out[key] = self.kctx.from_dict(cur)
                key, cur = g, {}
            cur[e[nf:]] = p.coefficient(i)
        if cur:
            out[key] = self.kctx.from_dict(cur)
        return out


def annihilates(op: DiffOperator, f: AnyExpr) -> EqualityResult:
    """Exact test of ``op(f) == 0`` that never forms the full numerator.

    With ``f = N/D`` reduced, the numerator of ``op(f)`` over ``D^3`` is
    ``D (D A0 - A1 + 2 a2 N)`` where ``A2 = D a2`` must hold.  ``A1`` is rewritten
    as ``N Q + sum_v D_v W_v``, and the remaining products are done block by block
    in the variables that ``D`` does not involve.
    """
    f = as_rf(f)
    cat = f.catalog
    if cat != op.space.catalog:
        raise ValueError("operator and function live on different spaces")
    used_d = f.den.variables()
    if f.is_polynomial() or not any(set(key) & used_d for key in op.expanded):
        r = apply_operator(op, f)
        return EqualityResult(r.num.is_zero(), None if r.num.is_zero() else _witness(r), 1)
    ex = op.expanded
    N, D = f.num.raw, f.den.raw
    used_n = f.num.variables()
    zero = cat.ctx.constant(0)
    dD = _deriv_cache(D)
    Q = zero
    A2 = zero
    # (derivatives taken on N) -> {target: coefficient}; target "A0" or the D-variable of W_v
    table: dict[tuple, dict] = {}

    def need(alpha, target, Lr):
        slot = table.setdefault(alpha, {})
        slot[target] = slot[target] + Lr if target in slot else Lr

    if op.scalar:
        need((), "A0", zero + to_fmpq(op.scalar))
    for key, L in ex.items():
        Lr = L.raw
        if len(key) == 1:
            (u,) = key
            if u in used_n:
                need(key, "A0", Lr)
            if u in used_d:
                Q += Lr * dD(key)
            continue
        u, v = key
        if u in used_n and v in used_n:
            need(key, "A0", Lr)
        if u in used_d and v in used_d:
            Q += Lr * dD(key)
            A2 += Lr * dD((u,)) * dD((v,))
        if u == v:
            if u in used_d and u in used_n:
                need((u,), u, Lr * 2)
            continue
        if v in used_d and u in used_n:
            need((u,), v, Lr)
        if u in used_d and v in used_n:
            need((v,), u, Lr)
    a2, rem = divmod(A2, D)
    if not rem.is_zero():
        return EqualityResult(False, _witness(apply_operator(op, f)), 1)
    dvars = sorted(used_d)
    G = _Graded(cat, dvars)
    Nb = _split_cached(G, N)
    fpos = {v: j for j, v in enumerate(G.free)}
    kpos = {v: j for j, v in enumerate(dvars)}
    plan = []
    for alpha in sorted(table):
        free = [fpos[v] for v in alpha if v in fpos]
        kd = tuple(kpos[v] for v in alpha if v in kpos)
        plan.append((free, kd, [(t, G.split(Lr)) for t, Lr in sorted(table[alpha].items(), key=str)]))
    # A0 and the W_v, block by block; no full-size intermediate is ever formed
    acc: dict = {"A0": {}}
    for m, P in Nb.items():
        dP = {(): P}
        for free, kd, targets in plan:
            mm = list(m)
            c = 1
            for j in free:
                if not mm[j]:
                    c = 0
                    break
                c *= mm[j]
                mm[j] -= 1
            if not c:
                continue
            Pk = dP.get(kd)
            if Pk is None:
                Pk = P
                for j in kd:
                    Pk = Pk.derivative(j)
                dP[kd] = Pk
            if Pk.is_zero():
                continue
            if c != 1:
                Pk = Pk * c
            for t, lblocks in targets:
                out = acc.setdefault(t, {})
                for w, l in lblocks.items():
                    key = tuple(a + b for a, b in zip(mm, w))
                    term = l * Pk
                    if key in out:
                        out[key] += term
                    else:
                        out[key] = term
    Dl = G.local(D)
    mult = {t: (Dl if t == "A0" else -G.local(dD((t,)))) for t in acc}
    Qg = G.split(Q - a2 * 2)
    names = [cat.name(v) for v in G.free]
    checked = 0
    # E = D A0 - sum_v D_v W_v - (Q - 2 a2) N, built a slice of blocks at a time
    for part in range(_CHUNKS):
        E: dict[tuple, flint.fmpq_mpoly] = {}

        def push(m, p):
            if m in E:
                E[m] += p
            else:
                E[m] = p

        for t, blocks in acc.items():
            mt = mult[t]
            for m, blk in blocks.items():
                if hash(m) % _CHUNKS == part:
                    push(m, mt * blk)
        for w, q in Qg.items():
            for m, blk in Nb.items():
                key = tuple(x + y for x, y in zip(m, w))
                if hash(key) % _CHUNKS == part:
                    push(key, -q * blk)
        checked += len(E)
        for m, p in E.items():
            if not p.is_zero():
                mono = "*".join(f"{names[j]}^{x}" if x > 1 else names[j] for j, x in enumerate(m) if x) or "1"
                return EqualityResult(False, f"nonzero block at {mono}", checked)
        del E
    return EqualityResult(True, None, checked)


_SPLIT_MEMO: list = []


def _split_cached(G: _Graded, raw) -> dict:
    """Blocks of a numerator, remembered for the most recent few (function, split) pairs."""
    for r, dv, blocks in _SPLIT_MEMO:
        if r is raw and dv == G.dvars:
            return blocks
    blocks = G.split(raw)
    _SPLIT_MEMO.insert(0, (raw, list(G.dvars), blocks))
    del _SPLIT_MEMO[2:]
    return blocks


def _witness(r: RationalFunction) -> str:
    text = str(r.num)
    return text if len(text) < 200 else text[:200] + "..."


# ---------------------------------------------------------------------------
# named operators
# ---------------------------------------------------------------------------

def _legs(space: Space):
    return space.legs.labels


def make_xyz(space: Space, which: str, i=None, theory: str = "YM", *, h=None, s=None) -> DiffOperator:
    """X_i, Y_i or Z.  ``h``/``s`` override the theory's shift parameters."""
    D = derivations(space)
    L = _legs(space)
    h0, s0 = theory_params(theory, len(L))
    h = h0 if h is None else h
    s = s0 if s is None else s
    sym = space.sym
    terms: list[Term] = []
    if which == "X":
        for j in L:
            terms.append((sym(var_name("k", j, i)), (D("c", j, i),)))
            terms.append((sym(var_name("c", i, j)), (D("e", i, j),)))
        return DiffOperator(space, terms, 0, f"X[{i}]")
    if which == "Y":
        for j in L:
            terms.append((sym(var_name("c", j, i)), (D("c", j, i),)))
            terms.append((sym(var_name("e", i, j)), (D("e", i, j),)))
        return DiffOperator(space, terms, -Fraction(h), f"Y[{i}]")
    if which == "Z":
        for a in L:
            for b in L:
                terms.append((sym(var_name("k", a, b)), (D("k", a, b),)))
                terms.append((sym(var_name("c", a, b)), (D("c", a, b),)))
        return DiffOperator(space, terms, -Fraction(s), "Z")
    raise ValueError(f"unknown operator {which!r}")


def _abc_terms(space: Space, which: str, i) -> list[Term]:
    D = derivations(space)
    L = _legs(space)
    k = lambda a, b: space.sym(var_name("k", a, b))
    c = lambda a, b: space.sym(var_name("c", a, b))
    e = lambda a, b: space.sym(var_name("e", a, b))
    half = Fraction(1, 2)
    t: list[Term] = []
    for p in L:
        for q in L:
            if which == "A":
                t += [
                    (k(p, q) * half, (D("c", p, i), D("c", q, i))),
                    (c(p, q), (D("c", p, i), D("e", q, i))),
                    (e(p, q) * half, (D("e", p, i), D("e", q, i))),
                ]
            elif which == "B":
                t += [
                    (c(p, q), (D("k", i, p), D("e", i, q))),
                    (e(p, q), (D("c", i, p), D("e", i, q))),
                    (k(p, q), (D("k", i, p), D("c", q, i))),
                    (c(q, p), (D("c", i, p), D("c", q, i))),
                    (-c(q, p), (D("k", p, q), D("e", p, i))),
                    (-e(p, q), (D("c", p, q), D("e", p, i))),
                    (-k(p, q), (D("k", p, q), D("c", p, i))),
                    (-c(p, q), (D("c", p, i), D("c", p, q))),
                ]
            elif which == "Ctilde":
                t += [
                    (e(p, q) * half, (D("c", i, p), D("c", i, q))),
                    (c(q, p), (D("k", i, q), D("c", i, p))),
                    (k(p, q) * half, (D("k", i, p), D("k", i, q))),
                    (-e(p, q), (D("c", i, p), D("c", p, q))),
                    (-c(q, p), (D("k", p, q), D("c", i, p))),
                    (-c(p, q), (D("k", p, i), D("c", p, q))),
                    (-k(p, q), (D("k", p, i), D("k", p, q))),
                ]
            else:
                raise ValueError(which)
    return t


_OP_NAMES = {"A": "A", "B": "B", "Ctilde": "Ct", "C": "C"}


def make_abc(space: Space, which: str, i) -> DiffOperator:
    """A_i, B_i, C~_i (``'Ctilde'``) or C_i = C~_i - (1/n) sum_j C~_j."""
    if which not in _OP_NAMES:
        raise ValueError(f"unknown operator {which!r}")
    cache = space.__dict__.setdefault("_abc_cache", {})
    key = (which, i)
    if key in cache:
        return cache[key]
    name = f"{_OP_NAMES[which]}[{i}]"
    if which == "C":
        L = _legs(space)
        n = len(L)
        terms = list(_abc_terms(space, "Ctilde", i))
        for j in L:
            terms += [(cf * Fraction(-1, n), ds) for cf, ds in _abc_terms(space, "Ctilde", j)]
        op = DiffOperator(space, terms, 0, name)
    else:
        op = DiffOperator(space, _abc_terms(space, which, i), 0, name)
    cache[key] = op
    return op


def zero_operator(space: Space) -> DiffOperator:
    return DiffOperator(space, [], 0, "0")


def mul_op(space: Space, g: AnyExpr) -> OpExpr:
    return OpMul(space, g)


# ---------------------------------------------------------------------------
# operator equality on the degree <= 2 monomial basis
# ---------------------------------------------------------------------------

@dataclass
class EqualityResult:
    equal: bool
    witness: str | None = None
    checked: int = 0

    def __bool__(self) -> bool:
        return self.equal


def test_monomials(space: Space, degree: int = 2) -> list[Polynomial]:
    gens = [space.catalog.gen(v) for v in space.independent]
    out = [space.catalog.one()]
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(range(len(gens)), d):
            m = gens[combo[0]]
            for x in combo[1:]:
                m = m * gens[x]
            out.append(m)
    return out


def operator_equal(lhs: OpExpr, rhs: OpExpr) -> EqualityResult:
    """Decide ``lhs == rhs`` for order <= 2 operators via monomials of degree <= 2."""
    space = lhs.space
    mons = _monomial_cache(space)
    for idx, m in enumerate(mons):
        a = lhs.apply(m)
        b = rhs.apply(m)
        if a != b:
            return EqualityResult(False, f"on {m}: lhs={a} rhs={b}", idx + 1)
    return EqualityResult(True, None, len(mons))


def _monomial_cache(space: Space) -> list[Polynomial]:
    mons = space.__dict__.get("_test_monomials")
    if mons is None:
        mons = space.__dict__["_test_monomials"] = test_monomials(space, 2)
    return mons


# ---------------------------------------------------------------------------
# channel operators on the master space
# ---------------------------------------------------------------------------

@dataclass
class XiData:
    xi: Polynomial
    Xi: Derivation
    perp: dict[str, Polynomial]
    Dperp: dict[str, Derivation]


def make_xi_ops(ms: MasterSpace) -> XiData:
    """xi, Xi, the perp coordinates and the perp derivations for a split."""
    cached = ms.__dict__.get("_xi_data")
    if cached is not None:
        return cached
    J, K = ms.J, ms.K
    nJ, nK, n = len(J), len(K), ms.n
    D = derivations(ms)
    k = lambda a, b: ms.sym(var_name("k", a, b))
    xi = ms.catalog.zero()
    for a in J:
        for b in J:
            xi = xi + k(a, b)
    Xi = Derivation(ms, {}, "Xi")
    for a in J:
        for b in J:
            Xi = Xi + D("k", a, b).scale(Fraction(1, nJ * (nJ - 1)))
    for a in J:
        for b in K:
            Xi = Xi + D("k", a, b).scale(Fraction(-2, nJ * nK))
    for a in K:
        for b in K:
            Xi = Xi + D("k", a, b).scale(Fraction(1, nK * (nK - 1)))
    Xi.label = "Xi"
    perp: dict[str, Polynomial] = {}
    Dperp: dict[str, Derivation] = {}
    den = (n - 1) * (n - 2)
    for a in ms.legs:
        for b in ms.legs:
            sa, sb = ms.side(a), ms.side(b)
            kn = var_name("k", a, b)
            if sa == sb == "J":
                perp[kn] = k(a, b) - xi * Fraction(1 - _d(a, b), nJ * (nJ - 1))
                Dperp[kn] = D("k", a, b) - Xi.scale(Fraction(nK * (nK - 1) * (1 - _d(a, b)), den))
            elif sa == sb == "K":
                perp[kn] = k(a, b) - xi * Fraction(1 - _d(a, b), nK * (nK - 1))
                Dperp[kn] = D("k", a, b) - Xi.scale(Fraction(nJ * (nJ - 1) * (1 - _d(a, b)), den))
            else:
                perp[kn] = k(a, b) + xi * Fraction(1, nJ * nK)
                Dperp[kn] = D("k", a, b) + Xi.scale(Fraction((nK - 1) * (nJ - 1), den))
            Dperp[kn].label = f"Dperp_k[{a},{b}]"
            for kind in "ce":
                nm = var_name(kind, a, b)
                perp[nm] = ms.sym(nm)
                Dperp[nm] = D(kind, a, b)
    data = XiData(xi, Xi, perp, Dperp)
    ms.__dict__["_xi_data"] = data
    return data


def make_U(ms: MasterSpace) -> DiffOperator:
    """Contraction of the two bullet polarizations."""
    cached = ms.__dict__.get("_U")
    if cached is not None:
        return cached
    D = derivations(ms)
    xd = make_xi_ops(ms)
    terms: list[Term] = []
    for j in ms.J:
        for k in ms.K:
            terms += [
                (xd.perp[var_name("k", j, k)], (D("c", j, BULLET), D("c", k, BULLET))),
                (xd.perp[var_name("c", j, k)], (D("c", j, BULLET), D("e", k, BULLET))),
                (xd.perp[var_name("c", k, j)], (D("e", j, BULLET), D("c", k, BULLET))),
                (xd.perp[var_name("e", j, k)], (D("e", j, BULLET), D("e", k, BULLET))),
            ]
    op = DiffOperator(ms, terms, 0, "U")
    ms.__dict__["_U"] = op
    return op


def operator_by_name(space: Space, name: str, theory: str = "YM") -> OpExpr:
    """Resolve ``X[i]``, ``Y[i]``, ``Z``, ``A[i]``, ``B[i]``, ``Ct[i]``, ``C[i]``, ``U``, ``Xi``."""
    if name == "Z":
        return make_xyz(space, "Z", theory=theory)
    if name == "U":
        return make_U(space)
    if name == "Xi":
        return DerivOp(make_xi_ops(space).Xi)
    head, _, rest = name.partition("[")
    if not rest.endswith("]"):
        raise ValueError(f"bad operator name {name!r}")
    arg = rest[:-1]
    labels = {str(a): a for a in space.legs.labels}
    if arg not in labels:
        raise KeyError(f"unknown leg {arg!r}")
    i = labels[arg]
    if head in ("X", "Y"):
        return make_xyz(space, head, i, theory)
    rev = {v: k for k, v in _OP_NAMES.items()}
    if head in rev:
        return make_abc(space, rev[head], i)
    raise ValueError(f"unknown operator {name!r}")
