"""Constrained kinematic spaces C(I) and the master space M = C(I) + E.

Ambient coordinates are ``k[i,j]``, ``c[i,j]``, ``e[i,j]`` for ordered pairs of
legs.  ``k`` is read as ``k_i . k_j``, ``c[i,j]`` as ``k_i . eps_j`` and
``e[i,j]`` as ``eps_i . eps_j``.  The linear relations (phantoms, symmetry,
momentum conservation, transversality) are eliminated by a deterministic
reduced row echelon step that pivots on the last variable of the catalog
order, so every function has a unique representative in the independent
coordinates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

from .exactalg import (
    AnyExpr,
    Polynomial,
    RationalFunction,
    VarCatalog,
    VarId,
    as_rf,
    rref,
    to_fmpq,
)

BULLET = "*"


class KinSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class LegSet:
    labels: tuple[Hashable, ...]
    cyclic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 3:
            raise KinSpaceError("a leg set needs at least 3 legs")
        if len(set(self.labels)) != len(self.labels):
            raise KinSpaceError("leg labels must be distinct")

    @classmethod
    def range(cls, n: int, cyclic: bool = True) -> LegSet:
        return cls(tuple(range(1, n + 1)), cyclic)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def index(self, a) -> int:
        try:
            return self.labels.index(a)
        except ValueError:
            raise KinSpaceError(f"unknown leg {a!r}") from None


def var_name(kind: str, a, b) -> str:
    return f"{kind}[{a},{b}]"


def _base_names(legs: LegSet) -> list[str]:
    return [var_name(kind, a, b) for kind in "kce" for a in legs for b in legs]


def _base_relations(legs: LegSet, col: Mapping[str, int]) -> list[dict[int, Fraction]]:
    rows: list[dict[int, Fraction]] = []
    L = legs.labels
    one = Fraction(1)
    for kind in "kce":
        for a in L:
            rows.append({col[var_name(kind, a, a)]: one})
    for kind in "ke":
        for x, a in enumerate(L):
            for b in L[x + 1:]:
                rows.append({col[var_name(kind, a, b)]: one, col[var_name(kind, b, a)]: -one})
    for kind in "kc":
        for b in L:
            rows.append({col[var_name(kind, a, b)]: one for a in L})
    return rows


def _solve_normal_form(catalog: VarCatalog, rows: list[dict[int, Fraction]]):
    """Eliminate one variable per independent relation, pivoting on the last one."""
    m = len(catalog)
    dense = [[r.get(m - 1 - j, 0) for j in range(m)] for r in rows]
    red, pivots = rref(dense)
    images: list[Polynomial | None] = [None] * m
    dependent = set()
    for row, p in zip(red, pivots):
        v = m - 1 - p
        dependent.add(v)
        images[v] = catalog.linear({m - 1 - j: -row[j] for j in range(m) if j != p and row[j]})
    independent = [v for v in range(m) if v not in dependent]
    for v in independent:
        images[v] = catalog.gen(v)
    return images, independent


class _NormalFormMixin:
    catalog: VarCatalog
    images: list[Polynomial]
    independent: list[VarId]

    @cached_property
    def _raw_images(self):
        return [p.raw for p in self.images]

    @cached_property
    def independent_set(self) -> frozenset[VarId]:
        return frozenset(self.independent)

    @property
    def dim(self) -> int:
        return len(self.independent)

    def var(self, name: str) -> VarId:
        return self.catalog.var(name)

    def gen(self, name: str) -> Polynomial:
        return self.catalog.gen(name)

    def nf_poly(self, p: Polynomial) -> Polynomial:
        if p.catalog != self.catalog:
            raise KinSpaceError("polynomial is not over this space's catalog")
        if p.variables() <= self.independent_set:
            return p
        return Polynomial(self.catalog, p.raw.compose(*self._raw_images, ctx=self.catalog.ctx))

    def normal_form(self, f: AnyExpr) -> RationalFunction:
        f = as_rf(f)
        if f.catalog != self.catalog:
            raise KinSpaceError("expression is not over this space's catalog")
        num = self.nf_poly(f.num)
        den = f.den if f.den.variables() <= self.independent_set else self.nf_poly(f.den)
        if den.is_zero():
            from .exactalg import PoleError

            raise PoleError("denominator vanishes identically on the kinematic space")
        if num is f.num and den is f.den:
            return f
        return RationalFunction(num, den)

    def sym(self, name: str) -> Polynomial:
        """Normal-form image of an ambient variable, by name."""
        return self.images[self.catalog.var(name)]

    def parse(self, text: str) -> RationalFunction:
        from .exactalg import parse

        return self.normal_form(parse(text, self.catalog))


class KinSpace(_NormalFormMixin):
    """C(I): catalog of the 3n^2 ambient variables plus the normal form."""

    def __init__(self, legs: LegSet):
        self.legs = legs
        self.n = len(legs)
        self.catalog = VarCatalog(_base_names(legs))
        col = {name: i for i, name in enumerate(self.catalog.names)}
        self.relations = _base_relations(legs, col)
        self.images, self.independent = _solve_normal_form(self.catalog, self.relations)

    def __repr__(self) -> str:
        return f"KinSpace({list(self.legs.labels)})"

    def k(self, a, b) -> Polynomial:
        return self.sym(var_name("k", a, b))

    def c(self, a, b) -> Polynomial:
        return self.sym(var_name("c", a, b))

    def e(self, a, b) -> Polynomial:
        return self.sym(var_name("e", a, b))

    def relation_polys(self) -> list[Polynomial]:
        return [self.catalog.linear(r) for r in self.relations]


class MasterSpace(_NormalFormMixin):
    """M = C(I) + E for a split I = J u K, with bullet variables c[j,*], e[j,*]."""

    def __init__(self, legs: LegSet, J: Sequence, K: Sequence | None = None):
        J = tuple(J)
        if K is None:
            K = tuple(a for a in legs.labels if a not in J)
        K = tuple(K)
        if set(J) & set(K) or set(J) | set(K) != set(legs.labels) or len(J) + len(K) != len(legs):
            raise KinSpaceError("J and K must partition the legs")
        if len(J) < 2 or len(K) < 2:
            raise KinSpaceError("both sides of a split need at least two legs")
        self.legs = legs
        self.n = len(legs)
        self.J, self.K = J, K
        self.base = build_space(legs)
        names = list(self.base.catalog.names)
        self.bullet_names = [var_name("c", a, BULLET) for a in legs] + [
            var_name("e", a, BULLET) for a in legs
        ]
        self.catalog = VarCatalog(names + self.bullet_names)
        col = {name: i for i, name in enumerate(self.catalog.names)}
        self.relations = _base_relations(legs, col) + [
            {col[var_name("c", a, BULLET)]: Fraction(1) for a in J},
            {col[var_name("c", a, BULLET)]: Fraction(1) for a in K},
        ]
        self.images, self.independent = _solve_normal_form(self.catalog, self.relations)

    def __repr__(self) -> str:
        return f"MasterSpace(J={list(self.J)}, K={list(self.K)})"

    def side(self, a) -> str:
        return "J" if a in self.J else "K"

    def k(self, a, b) -> Polynomial:
        return self.sym(var_name("k", a, b))

    def c(self, a, b) -> Polynomial:
        return self.sym(var_name("c", a, b))

    def e(self, a, b) -> Polynomial:
        return self.sym(var_name("e", a, b))

    def embed(self, f: AnyExpr) -> RationalFunction:
        """Lift a function on C(I) into M (base variables keep their names)."""
        f = as_rf(f)
        if f.catalog == self.catalog:
            return f
        if f.catalog != self.base.catalog:
            raise KinSpaceError("expression is not over the base space")
        gens = [self.catalog.raw_gen(i) for i in range(len(self.base.catalog))]
        num = Polynomial(self.catalog, f.num.raw.compose(*gens, ctx=self.catalog.ctx))
        den = Polynomial(self.catalog, f.den.raw.compose(*gens, ctx=self.catalog.ctx))
        return RationalFunction(num, den, reduced=True)

    def relation_polys(self) -> list[Polynomial]:
        return [self.catalog.linear(r) for r in self.relations]


_SPACE_CACHE: dict[LegSet, KinSpace] = {}
_MASTER_CACHE: dict[tuple, MasterSpace] = {}


def build_space(legs: LegSet | Iterable | int) -> KinSpace:
    """Build (or fetch the cached) kinematic space on ``legs``."""
    if isinstance(legs, int):
        legs = LegSet.range(legs)
    elif not isinstance(legs, LegSet):
        legs = LegSet(tuple(legs))
    sp = _SPACE_CACHE.get(legs)
    if sp is None:
        sp = _SPACE_CACHE[legs] = KinSpace(legs)
    return sp


def build_master(legs: LegSet | int, J: Sequence, K: Sequence | None = None) -> MasterSpace:
    """Cached master space; ``K`` defaults to the complement in leg order."""
    if isinstance(legs, int):
        legs = LegSet.range(legs)
    J = tuple(J)
    K = tuple(a for a in legs.labels if a not in J) if K is None else tuple(K)
    key = (legs, J, K)
    ms = _MASTER_CACHE.get(key)
    if ms is None:
        ms = _MASTER_CACHE[key] = MasterSpace(legs, J, K)
    return ms


def to_normal_form(space: KinSpace | MasterSpace, f: AnyExpr) -> RationalFunction:
    return space.normal_form(f)


def _random_rational(rng: random.Random) -> Fraction:
    num = 0
    while num == 0:
        num = rng.randint(-97, 97)
    return Fraction(num, rng.randint(1, 13))


def sample_point(space: KinSpace | MasterSpace, seed: int) -> dict[VarId, Fraction]:
    """Seeded rational point on the space, given on every ambient variable."""
    rng = random.Random(seed)
    vals = {v: _random_rational(rng) for v in space.independent}
    point = {}
    for v, img in enumerate(space.images):
        point[v] = img.evaluate(vals) if not img.is_zero() else Fraction(0)
    return point
