"""Channels I = J u K: pullbacks alpha, right inverses beta, the projection pi,
pole orders, residues and the residue-factorization check."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Mapping, Sequence

from .amplitudes import Amplitude, amp_gr, amp_ym, proportionality
from .diffcalc import Derivation, XiData, derivations, make_U, make_xi_ops
from .exactalg import (
    AnyExpr,
    Polynomial,
    RationalFunction,
    as_rf,
    nullspace,
    rref,
)
from .kinspace import BULLET, KinSpace, LegSet, MasterSpace, build_master, build_space, var_name


class FactorizationError(ValueError):
    pass


class PoleOrderError(FactorizationError):
    pass


@dataclass(frozen=True)
class Channel:
    J: tuple
    K: tuple
    adjacent: bool

    def __str__(self) -> str:
        return f"J={','.join(map(str, self.J))}|K={','.join(map(str, self.K))}"

    @property
    def tier(self) -> tuple[int, int]:
        return tuple(sorted((len(self.J), len(self.K))))

    @classmethod
    def parse(cls, text: str, legs: LegSet) -> Channel:
        try:
            left, right = text.split("|")
            jt = left.split("=", 1)[1]
            kt = right.split("=", 1)[1]
        except (ValueError, IndexError):
            raise FactorizationError(f"bad channel {text!r}; expected J=1,2|K=3,4") from None
        lab = {str(a): a for a in legs.labels}
        J = tuple(lab[x] for x in jt.split(","))
        K = tuple(lab[x] for x in kt.split(","))
        return make_channel(legs, J, K)


def _is_arc(legs: LegSet, J: Sequence) -> bool:
    L = legs.labels
    n = len(L)
    pos = sorted(L.index(a) for a in J)
    m = len(pos)
    # contiguous modulo n
    gaps = sum(1 for i in range(m) if (pos[(i + 1) % m] - pos[i]) % n != 1)
    return gaps <= 1


def _cyclic_arc(legs: LegSet, S: Sequence) -> tuple:
    """The elements of an arc listed in the cyclic order of ``legs``."""
    L = legs.labels
    n = len(L)
    Sset = set(S)
    for start in range(n):
        if L[start] in Sset and L[(start - 1) % n] not in Sset:
            return tuple(L[(start + i) % n] for i in range(len(S)))
    return tuple(S)


def make_channel(legs: LegSet, J: Sequence, K: Sequence | None = None) -> Channel:
    J = tuple(J)
    K = tuple(a for a in legs.labels if a not in J) if K is None else tuple(K)
    if set(J) & set(K) or set(J) | set(K) != set(legs.labels):
        raise FactorizationError("J and K must partition the legs")
    if len(J) < 2 or len(K) < 2:
        raise FactorizationError("both sides need at least two legs")
    adj = _is_arc(legs, J)
    if adj:
        J, K = _cyclic_arc(legs, J), _cyclic_arc(legs, K)
    return Channel(J, K, adj)


def channels(legs: LegSet | int, adjacent_only: bool = False) -> list[Channel]:
    """All splits up to swapping J and K; J is the smaller side (ties: J holds the first leg)."""
    if isinstance(legs, int):
        legs = LegSet.range(legs)
    L = legs.labels
    n = len(L)
    out = []
    for m in range(2, n // 2 + 1):
        for J in combinations(L, m):
            if 2 * m == n and L[0] not in J:
                continue
            ch = make_channel(legs, J)
            if adjacent_only and not ch.adjacent:
                continue
            out.append(ch)
    return out


def master_for(ch: Channel, legs: LegSet) -> MasterSpace:
    return build_master(legs, ch.J, ch.K)


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------

@dataclass
class LinearKinMap:
    """A linear map given by its pullback on the target's ambient coordinates.

    ``assignment[name]`` is the pullback of the target coordinate ``name``,
    a linear polynomial on the source space.
    """

    source: object
    target: object
    assignment: dict[str, Polynomial]
    label: str = "map"

    @cached_property
    def _images(self) -> list:
        cat_t = self.target.catalog
        return [self.assignment[name].raw for name in cat_t.names]

    def pullback(self, f: AnyExpr) -> RationalFunction:
        """``f o map`` for a function ``f`` on the target."""
        f = as_rf(f)
        if f.catalog != self.target.catalog:
            raise FactorizationError("function is not on the map's target space")
        cs = self.source.catalog
        num = Polynomial(cs, f.num.raw.compose(*self._images, ctx=cs.ctx))
        den = Polynomial(cs, f.den.raw.compose(*self._images, ctx=cs.ctx))
        return self.source.normal_form(RationalFunction(num, den))

    def pullback_poly(self, p: Polynomial) -> Polynomial:
        cs = self.source.catalog
        return self.source.nf_poly(Polynomial(cs, p.raw.compose(*self._images, ctx=cs.ctx)))

    def then(self, other: LinearKinMap) -> LinearKinMap:
        """``other o self`` (apply self first); pullback is ``self* o other*``."""
        if other.source is not self.target and other.source.catalog != self.target.catalog:
            raise FactorizationError("maps do not compose")
        return LinearKinMap(
            self.source,
            other.target,
            {n: self.pullback_poly(p) for n, p in other.assignment.items()},
            f"{other.label}.{self.label}",
        )

    def matrix(self) -> list[list[Fraction]]:
        """Rows: target independent coordinates; columns: source independent coordinates."""
        rows = []
        col = {v: i for i, v in enumerate(self.source.independent)}
        for v in self.target.independent:
            p = self.assignment[self.target.catalog.name(v)]
            row = [Fraction(0)] * len(col)
            for e, c in p.terms():
                if not e:
                    raise FactorizationError("map is not linear")
                (u,) = e
                row[col[u]] = c
            rows.append(row)
        return rows

    def rank(self) -> int:
        from .exactalg import rank

        return rank(self.matrix())

    def respects_relations(self) -> tuple[bool, str | None]:
        """Every relation of the target must pull back to zero."""
        for rel in self.target.relation_polys():
            img = self.pullback_poly(rel) if rel.catalog == self.target.catalog else None
            if img is not None and not img.is_zero():
                return False, f"relation {rel} maps to {img}"
        return True, None


def _lower_space(ms: MasterSpace, side: str) -> KinSpace:
    S = ms.J if side == "J" else ms.K
    return build_space(LegSet(tuple(S) + (BULLET,)))


def make_alpha(ms: MasterSpace, side: str) -> LinearKinMap:
    """alpha_J or alpha_K: M -> C(J u {*}) given by its pullback table."""
    cache = ms.__dict__.setdefault("_alpha", {})
    if side in cache:
        return cache[side]
    S = ms.J if side == "J" else ms.K
    low = _lower_space(ms, side)
    xd = make_xi_ops(ms)
    zero = ms.catalog.zero()
    kp = lambda a, b: xd.perp[var_name("k", a, b)]
    assignment: dict[str, Polynomial] = {}
    for name in low.catalog.names:
        kind, rest = name[0], name[2:-1]
        sa, sb = rest.split(",")
        lab = {str(x): x for x in S}
        a = lab.get(sa, BULLET)
        b = lab.get(sb, BULLET)
        if a == BULLET and b == BULLET:
            img = zero
        elif a != BULLET and b != BULLET:
            img = kp(a, b) if kind == "k" else ms.sym(var_name(kind, a, b))
        elif kind == "k":
            j = a if a != BULLET else b
            img = zero
            for jp in S:
                img = img - kp(jp, j)
        elif kind == "c":
            if b == BULLET:
                img = ms.sym(var_name("c", a, BULLET))
            else:
                img = zero
                for jp in S:
                    img = img - ms.sym(var_name("c", jp, b))
        else:
            j = a if a != BULLET else b
            img = ms.sym(var_name("e", j, BULLET))
        assignment[name] = ms.nf_poly(img)
    m = LinearKinMap(ms, low, assignment, f"alpha_{side}")
    cache[side] = m
    return m


def _beta_derivations(ms: MasterSpace, side: str) -> dict[tuple, Derivation]:
    """Images under beta of the derivations D_x of C(S u {*}), keyed (kind, a, b)."""
    S = ms.J if side == "J" else ms.K
    T = ms.K if side == "J" else ms.J
    nS, nT, n = len(S), len(T), ms.n
    xd = make_xi_ops(ms)
    D = derivations(ms)
    Dp = lambda kind, a, b: xd.Dperp[var_name(kind, a, b)]
    zero = Derivation(ms, {})
    out: dict[tuple, Derivation] = {}
    B = BULLET
    for a in S:
        for b in S:
            d = 1 if a == b else 0
            acc = Dp("k", a, b)
            fac = Fraction((nT - 1) * (1 - d), nT * (nS - 1))
            if fac:
                for jj in S:
                    acc = acc - (Dp("k", a, jj) + Dp("k", b, jj)).scale(fac)
            out[("k", a, b)] = acc
            acc = Dp("c", a, b)
            fac = Fraction((nT - 1) * (1 - d), nS * nT)
            if fac:
                for jj in S:
                    acc = acc - Dp("c", jj, b).scale(fac)
            out[("c", a, b)] = acc
            out[("e", a, b)] = Dp("e", a, b)
        acc = zero
        for jj in S:
            acc = acc + Dp("k", a, jj)
        acc = acc.scale(Fraction(-(n - 2), nT * (nS - 1)))
        out[("k", a, B)] = out[("k", B, a)] = acc
        acc = zero
        for jj in S:
            acc = acc + Dp("c", jj, a)
        out[("c", B, a)] = acc.scale(Fraction(-(n - 1), nS * nT))
        out[("c", a, B)] = D("c", a, B)
        out[("e", a, B)] = out[("e", B, a)] = D("e", a, B)
    for kind in "kce":
        out[(kind, B, B)] = zero
    return out


def beta_derivation_table(ms: MasterSpace, side: str) -> dict[tuple, Derivation]:
    cache = ms.__dict__.setdefault("_beta_d", {})
    if side not in cache:
        cache[side] = _beta_derivations(ms, side)
    return cache[side]


def _label_key(low: KinSpace, kind: str, sa: str, sb: str, S) -> tuple:
    lab = {str(x): x for x in S}
    return (kind, lab.get(sa, BULLET), lab.get(sb, BULLET))


def beta_well_defined(ms: MasterSpace, side: str) -> tuple[bool, str | None]:
    """Every linear dependency among the D_x of C(S u {*}) must survive beta."""
    S = ms.J if side == "J" else ms.K
    low = _lower_space(ms, side)
    table = beta_derivation_table(ms, side)
    Dl = derivations(low)
    keys = []
    cols = []
    for kind in "kce":
        for a in low.legs:
            for b in low.legs:
                keys.append((kind, a, b))
                dv = Dl(kind, a, b)
                cols.append([dv.values.get(v, Fraction(0)) for v in low.independent])
    # dependencies: x with sum_x coeff_x * D_x = 0, i.e. the null space of the transpose
    mat = [[cols[x][r] for x in range(len(keys))] for r in range(len(low.independent))]
    for vec in nullspace(mat, len(keys)):
        acc = Derivation(ms, {})
        for coeff, key in zip(vec, keys):
            if coeff:
                acc = acc + table[key].scale(coeff)
        if not acc.is_zero():
            return False, f"dependency {dict((k, c) for k, c in zip(keys, vec) if c)} is not preserved"
    return True, None


def make_beta(ms: MasterSpace, side: str) -> LinearKinMap:
    """beta_J or beta_K: C(S u {*}) -> M, as a pullback on the coordinates of M."""
    cache = ms.__dict__.setdefault("_beta", {})
    if side in cache:
        return cache[side]
    low = _lower_space(ms, side)
    table = beta_derivation_table(ms, side)
    Dl = derivations(low)
    keys = []
    cols = []
    for kind in "kce":
        for a in low.legs:
            for b in low.legs:
                dv = Dl(kind, a, b)
                if dv.is_zero():
                    continue
                keys.append((kind, a, b))
                cols.append([dv.values.get(v, Fraction(0)) for v in low.independent])
    m = len(low.independent)
    # express each coordinate vector field d/dv_s as a combination of the D_x
    beta_of_partial: list[Derivation] = []
    aug = [[cols[x][r] for x in range(len(keys))] + [Fraction(0)] * m for r in range(m)]
    for r in range(m):
        aug[r][len(keys) + r] = Fraction(1)
    for s in range(m):
        rhs = [Fraction(int(r == s)) for r in range(m)]
        sol = _solve(cols, rhs, len(keys))
        acc = Derivation(ms, {})
        for coeff, key in zip(sol, keys):
            if coeff:
                acc = acc + table[key].scale(coeff)
        beta_of_partial.append(acc)
    assignment: dict[str, Polynomial] = {}
    cat = low.catalog
    gens = [cat.gen(v) for v in low.independent]
    for name in ms.catalog.names:
        p = cat.zero()
        for s, bd in enumerate(beta_of_partial):
            val = bd.value_on_var(name)
            if val:
                p = p + gens[s] * val
        assignment[name] = p
    mp = LinearKinMap(low, ms, assignment, f"beta_{side}")
    cache[side] = mp
    return mp


def _solve(cols: list[list[Fraction]], rhs: list[Fraction], nx: int) -> list[Fraction]:
    """One solution x of ``sum_x x_j * cols[j] == rhs``."""
    m = len(rhs)
    rows = [[cols[j][r] for j in range(nx)] + [rhs[r]] for r in range(m)]
    red, piv = rref(rows)
    if piv and piv[-1] == nx:
        raise FactorizationError("inconsistent linear system")
    x = [Fraction(0)] * nx
    for row, p in zip(red, piv):
        x[p] = row[nx]
    return x


def identity_map(space) -> LinearKinMap:
    return LinearKinMap(space, space, {n: space.sym(n) for n in space.catalog.names}, "id")


def project_pi(ms: MasterSpace) -> LinearKinMap:
    """pi = 1 - P_Xi - beta_J alpha_J - beta_K alpha_K on M (P_Xi projects on C Xi along M-perp)."""
    cache = ms.__dict__.get("_pi")
    if cache is not None:
        return cache
    xd = make_xi_ops(ms)
    aJ, aK = make_alpha(ms, "J"), make_alpha(ms, "K")
    bJ, bK = make_beta(ms, "J"), make_beta(ms, "K")
    bJaJ = aJ.then(bJ)  # beta_J o alpha_J : M -> M
    bKaK = aK.then(bK)
    assignment = {}
    for name in ms.catalog.names:
        y = ms.sym(name)
        pxi = xd.xi * (xd.Xi.value_on_var(name) / 2)
        assignment[name] = ms.nf_poly(y - pxi - bJaJ.assignment[name] - bKaK.assignment[name])
    mp = LinearKinMap(ms, ms, assignment, "pi")
    ms.__dict__["_pi"] = mp
    return mp


def map_derivation(mp: LinearKinMap, d: Derivation) -> Derivation:
    """Push a derivation on the source forward: its values on target coordinates."""
    tgt = mp.target
    vals = {}
    for v in tgt.independent:
        vals[v] = d.value_on(mp.assignment[tgt.catalog.name(v)]) if not mp.assignment[tgt.catalog.name(v)].is_zero() else Fraction(0)
    return Derivation(tgt, vals, f"{mp.label}({d.label})")


def tilde_derivations(ms: MasterSpace) -> list[Derivation]:
    xd = make_xi_ops(ms)
    Dp = lambda kind, a, b: xd.Dperp[var_name(kind, a, b)]
    J, K = ms.J, ms.K
    out = []
    for j in J:
        for k in K:
            acc = Dp("k", j, k)
            for jj in J:
                acc = acc - Dp("k", jj, k).scale(Fraction(1, len(J)))
            for kk in K:
                acc = acc - Dp("k", j, kk).scale(Fraction(1, len(K)))
            for jj in J:
                for kk in K:
                    acc = acc + Dp("k", jj, kk).scale(Fraction(1, len(J) * len(K)))
            out.append(acc)
            acc = Dp("c", j, k)
            for jj in J:
                acc = acc - Dp("c", jj, k).scale(Fraction(1, len(J)))
            out.append(acc)
            acc = Dp("c", k, j)
            for kk in K:
                acc = acc - Dp("c", kk, j).scale(Fraction(1, len(K)))
            out.append(acc)
            out.append(Dp("e", j, k))
    return out


# ---------------------------------------------------------------------------
# poles and residues
# ---------------------------------------------------------------------------

def channel_polynomial(space: KinSpace, ch: Channel) -> Polynomial:
    p = space.catalog.zero()
    for a in ch.J:
        for b in ch.J:
            p = p + space.k(a, b)
    return space.nf_poly(p)


def pole_order(f: AnyExpr, ch: Channel, space: KinSpace | None = None) -> int:
    """Multiplicity of the channel's xi in the reduced denominator of ``f``."""
    f = as_rf(f)
    if space is None:
        space = _space_of(f)
    xi = channel_polynomial(space, ch)
    if f.catalog != space.catalog:
        xi = Polynomial(f.catalog, xi.raw.compose(*[f.catalog.raw_gen(i) for i in range(len(space.catalog))], ctx=f.catalog.ctx))
    xi = xi.monic()
    d = f.den
    k = 0
    while not d.is_constant():
        q, r = divmod(d.raw, xi.raw)
        if not r.is_zero():
            break
        d = Polynomial(d.catalog, q)
        k += 1
    return k


def _space_of(f: RationalFunction) -> KinSpace:
    names = f.catalog.names
    labels = []
    for nm in names:
        if nm.startswith("k["):
            a = nm[2:-1].split(",")[0]
            if a not in labels:
                labels.append(a)
    legs = LegSet(tuple(int(a) if a.isdigit() else a for a in labels))
    sp = build_space(legs)
    if sp.catalog != f.catalog:
        raise FactorizationError("cannot infer the kinematic space of this function")
    return sp


def hyperplane_substitution(ms: MasterSpace) -> tuple[int, Polynomial]:
    """Solve xi = 0 for its last independent k-variable; returns (var, image)."""
    xd = make_xi_ops(ms)
    xi = xd.xi
    kvars = sorted(v for v in xi.variables() if ms.catalog.name(v).startswith("k["))
    if not kvars:
        raise FactorizationError("xi has no k-variables")
    piv = kvars[-1]
    c = xi.partial(piv).constant_value()
    image = (ms.catalog.gen(piv) * c - xi) * (1 / c)
    return piv, image


def restrict_to_hyperplane(ms: MasterSpace, f: AnyExpr) -> RationalFunction:
    piv, image = hyperplane_substitution(ms)
    f = as_rf(f)
    return f.substitute({piv: image})


def residue_at(f: AnyExpr, ch: Channel, legs: LegSet | None = None) -> RationalFunction:
    """``(xi * f)|_{xi=0}`` on the master space of the channel."""
    f = as_rf(f)
    space = _space_of(f) if legs is None else build_space(legs)
    order = pole_order(f, ch, space)
    if order >= 2:
        raise PoleOrderError(f"pole of order {order} at {ch}")
    ms = build_master(space.legs, ch.J, ch.K)
    if order == 0:
        return RationalFunction(ms.catalog.zero())
    g = ms.embed(f) * make_xi_ops(ms).xi
    return restrict_to_hyperplane(ms, g)


def _lower_amplitude(theory: str, legs: LegSet) -> Amplitude:
    if theory.upper() == "YM":
        return amp_ym(build_space(legs))
    return amp_gr(build_space(legs))


def factorization_rhs(theory: str, ms: MasterSpace, lower_J: AnyExpr, lower_K: AnyExpr) -> RationalFunction:
    prod = make_alpha(ms, "J").pullback(lower_J) * make_alpha(ms, "K").pullback(lower_K)
    U = make_U(ms)
    m = 1 if theory.upper() == "YM" else 2
    for _ in range(m):
        prod = U.apply(prod)
    return restrict_to_hyperplane(ms, prod)


@dataclass
class FactorizationResult:
    channel: Channel
    pole_order: int
    constant: Fraction | None
    ok: bool
    witness: str = ""


def check_factorization(
    theory: str,
    ch: Channel,
    lower_J: Amplitude | None,
    lower_K: Amplitude | None,
    full: Amplitude,
) -> FactorizationResult:
    """Compare the residue of ``full`` at ``ch`` with the glued lower amplitudes."""
    legs = full.legs
    ms = build_master(legs, ch.J, ch.K)
    if lower_J is None:
        lower_J = _lower_amplitude(theory, LegSet(tuple(ch.J) + (BULLET,)))
    if lower_K is None:
        lower_K = _lower_amplitude(theory, LegSet(tuple(ch.K) + (BULLET,)))
    order = pole_order(full.value, ch, build_space(legs))
    if order > 1:
        return FactorizationResult(ch, order, None, False, f"pole of order {order}")
    res = residue_at(full.value, ch, legs)
    yang_mills = theory.upper() == "YM"
    if yang_mills and not ch.adjacent:
        ok = res.is_zero()
        return FactorizationResult(ch, order, None, ok, "" if ok else f"residue {res} at a forbidden channel")
    rhs = factorization_rhs(theory, ms, lower_J.value, lower_K.value)
    if rhs.is_zero():
        ok = res.is_zero()
        return FactorizationResult(ch, order, None, False, "glued lower amplitudes vanish" if ok else "zero right-hand side with a nonzero residue")
    if res.is_zero():
        return FactorizationResult(ch, order, None, False, "residue vanishes but the right-hand side does not")
    r = proportionality(res, rhs)
    if r is None:
        return FactorizationResult(ch, order, None, False, "residue is not proportional to the glued lower amplitudes")
    return FactorizationResult(ch, order, r, True)
