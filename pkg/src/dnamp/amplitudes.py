"""Dimension-neutral tree amplitudes.

YM amplitudes come from colour-ordered Berends-Giele recursion.  Currents are
kept as coefficient maps over the span symbols ``K(a)`` (momentum of leg a)
and ``P(a)`` (its polarization), and every dot product is resolved through
the Gram dictionary ``K.K -> k``, ``K.P -> c``, ``P.P -> e``.  GR amplitudes
are KLT bilinears in colour-ordered YM amplitudes.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .exactalg import AnyExpr, RationalFunction, as_rf, format_rational_function, parse
from .kinspace import KinSpace, LegSet, build_space, var_name

# coupling chosen so that the three-point amplitude equals the base case exactly
CUBIC = Fraction(-1, 2)
QUARTIC = CUBIC * CUBIC


class AmplitudeError(ValueError):
    pass


class InvariantViolation(AssertionError):
    """A contraction that cannot occur at tree level was requested."""


@dataclass
class Amplitude:
    theory: str
    legs: LegSet
    value: RationalFunction
    normalization: Fraction = Fraction(1)
    order: tuple = ()

    @property
    def n(self) -> int:
        return len(self.legs)

    @property
    def space(self) -> KinSpace:
        return build_space(self.legs)

    def serialize(self) -> str:
        return format_rational_function(self.value)


Symbol = tuple  # ("K", a) or ("P", a)


class Current:
    """Span-coefficient representation of an off-shell current."""

    __slots__ = ("coeffs", "momentum")

    def __init__(self, coeffs: dict[Symbol, RationalFunction], momentum: frozenset):
        self.coeffs = {s: c for s, c in coeffs.items() if not c.is_zero()}
        self.momentum = momentum

    def __repr__(self) -> str:
        inner = ", ".join(f"{s[0]}({s[1]}): {c}" for s, c in self.coeffs.items())
        return f"Current({{{inner}}})"


class _Gram:
    def __init__(self, space: KinSpace):
        self.space = space
        self.cat = space.catalog
        self._memo: dict = {}

    def pair(self, s: Symbol, t: Symbol) -> RationalFunction:
        key = (s, t)
        r = self._memo.get(key)
        if r is not None:
            return r
        (ks, a), (kt, b) = s, t
        sp = self.space
        if ks == "K" and kt == "K":
            p = sp.k(a, b)
        elif ks == "K" and kt == "P":
            p = sp.c(a, b)
        elif ks == "P" and kt == "K":
            p = sp.c(b, a)
        else:
            if a == b:
                raise InvariantViolation(f"contraction of P({a}) with itself")
            p = sp.e(a, b)
        r = self._memo[key] = RationalFunction(p)
        return r

    def dot(self, u: dict[Symbol, RationalFunction], v: dict[Symbol, RationalFunction]) -> RationalFunction:
        # accumulate numerators over the product of the two operands' denominators
        acc = RationalFunction(self.cat.zero())
        for s, x in u.items():
            inner = None
            for t, y in v.items():
                g = self.pair(s, t)
                if g.is_zero():
                    continue
                term = g * y
                inner = term if inner is None else inner + term
            if inner is not None:
                acc = acc + x * inner
        return acc


class BGSession:
    """Memoized Berends-Giele currents on one kinematic space."""

    def __init__(self, space: KinSpace):
        self.space = space
        self.gram = _Gram(space)
        self.memo: dict[tuple, Current] = {}
        self.one = RationalFunction(space.catalog.one())

    def mom(self, S: Sequence) -> dict[Symbol, RationalFunction]:
        return {("K", a): self.one for a in S}

    def xi(self, S: Sequence) -> RationalFunction:
        sp = self.space
        p = sp.catalog.zero()
        for a in S:
            for b in S:
                p = p + sp.k(a, b)
        return RationalFunction(p)

    def amputated(self, S: tuple) -> dict[Symbol, RationalFunction]:
        """Sum of vertices feeding the current of ``S`` (no propagator)."""
        terms: dict[Symbol, RationalFunction] = {}

        def add(vec, scale):
            for s, c in vec.items():
                c = c * scale
                terms[s] = terms[s] + c if s in terms else c

        dot = self.gram.dot
        m = len(S)
        for i in range(1, m):
            S1, S2 = S[:i], S[i:]
            J1, J2 = self.current(S1).coeffs, self.current(S2).coeffs
            P, Q = self.mom(S1), self.mom(S2)
            j12 = dot(J1, J2)
            add({s: j12 for s in P}, CUBIC)
            add({s: j12 for s in Q}, -CUBIC)
            add(J2, (dot(P, J1) + dot(Q, J1) * 2) * CUBIC)
            add(J1, (dot(P, J2) * 2 + dot(Q, J2)) * -CUBIC)
        for i in range(1, m - 1):
            for j in range(i + 1, m):
                J1 = self.current(S[:i]).coeffs
                J2 = self.current(S[i:j]).coeffs
                J3 = self.current(S[j:]).coeffs
                add(J2, dot(J1, J3) * (2 * QUARTIC))
                add(J3, dot(J1, J2) * -QUARTIC)
                add(J1, dot(J2, J3) * -QUARTIC)
        return {s: c for s, c in terms.items() if not c.is_zero()}

    def current(self, S: Sequence) -> Current:
        S = tuple(S)
        cur = self.memo.get(S)
        if cur is not None:
            return cur
        if len(S) == 1:
            cur = Current({("P", S[0]): self.one}, frozenset(S))
        else:
            inv = self.one / self.xi(S)
            cur = Current({s: c * inv for s, c in self.amputated(S).items()}, frozenset(S))
        self.memo[S] = cur
        return cur


_SESSIONS: dict[LegSet, BGSession] = {}


def _session(space: KinSpace) -> BGSession:
    s = _SESSIONS.get(space.legs)
    if s is None:
        s = _SESSIONS[space.legs] = BGSession(space)
    return s


def bg_current(space: KinSpace, ordered_legs: Sequence) -> Current:
    labels = space.legs.labels
    for a in ordered_legs:
        if a not in labels:
            raise AmplitudeError(f"unknown leg {a!r}")
    if not 1 <= len(ordered_legs) <= len(labels) - 1:
        raise AmplitudeError("current length must be between 1 and n-1")
    if len(set(ordered_legs)) != len(ordered_legs):
        raise AmplitudeError("repeated leg in current")
    if len(ordered_legs) == len(labels) - 1:
        raise AmplitudeError("an (n-1)-leg current sits on its propagator pole; use ym_ordered for the amputated contraction")
    return _session(space).current(tuple(ordered_legs))


def amp_base(theory: str, legs: LegSet | Sequence) -> Amplitude:
    if not isinstance(legs, LegSet):
        legs = LegSet(tuple(legs))
    if len(legs) != 3:
        raise AmplitudeError("the base case needs exactly three legs")
    sp = build_space(legs)
    a, b, c = legs.labels
    A = sp.normal_form(sp.c(a, b) * sp.e(c, a) + sp.c(b, c) * sp.e(a, b) + sp.c(c, a) * sp.e(b, c))
    th = theory.upper()
    if th == "YM":
        return Amplitude("YM", legs, A, Fraction(1), legs.labels)
    if th == "GR":
        return Amplitude("GR", legs, A * A, Fraction(1), legs.labels)
    raise AmplitudeError(f"unknown theory {theory!r}")


_YM_MEMO: dict[tuple, RationalFunction] = {}


def ym_ordered(space: KinSpace, order: Sequence) -> RationalFunction:
    """Colour-ordered YM amplitude A(order) on ``space``."""
    order = tuple(order)
    key = (space.legs, order)
    r = _YM_MEMO.get(key)
    if r is not None:
        return r
    if sorted(map(str, order)) != sorted(map(str, space.legs.labels)):
        raise AmplitudeError("order must be a permutation of the legs")
    sess = _session(space)
    body = order[:-1]
    last = order[-1]
    amp = sess.amputated(body) if len(body) > 1 else {("P", body[0]): sess.one}
    r = sess.gram.dot(amp, {("P", last): sess.one})
    _YM_MEMO[key] = r
    return r


def amp_ym(space: KinSpace | LegSet | int, order: Sequence | None = None) -> Amplitude:
    if not isinstance(space, KinSpace):
        space = build_space(space)
    order = tuple(order) if order is not None else space.legs.labels
    return Amplitude("YM", space.legs, ym_ordered(space, order), Fraction(1), order)


def mandelstam(space: KinSpace, a, b) -> RationalFunction:
    return RationalFunction(space.k(a, b) * 2)


def klt_terms(space: KinSpace) -> list[tuple[RationalFunction, tuple, tuple]]:
    """``(kernel, order_L, order_R)`` triples of the KLT bilinear."""
    L = space.legs.labels
    s = lambda a, b: mandelstam(space, L[a - 1], L[b - 1])
    o = lambda *idx: tuple(L[i - 1] for i in idx)
    n = len(L)
    if n == 4:
        return [(s(1, 2), o(1, 2, 3, 4), o(1, 2, 4, 3))]
    if n == 5:
        return [
            (s(1, 2) * s(3, 4), o(1, 2, 3, 4, 5), o(2, 1, 4, 3, 5)),
            (s(1, 3) * s(2, 4), o(1, 3, 2, 4, 5), o(3, 1, 4, 2, 5)),
        ]
    raise AmplitudeError("KLT bilinear only tabulated for n = 4, 5")


_GR_MEMO: dict[LegSet, RationalFunction] = {}


def klt_sum(space: KinSpace) -> RationalFunction:
    """Sum the KLT bilinear over one common denominator.

    Each term's reduced denominator divides the lcm of all of them, so the sum is
    formed from exact cofactors with a single final reduction.
    """
    cat = space.catalog
    parts = []
    for ker, oL, oR in klt_terms(space):
        aL, aR = ym_ordered(space, oL), ym_ordered(space, oR)
        num = ker.num * aL.num * aR.num
        den = aL.den * aR.den
        g = num.gcd(den)
        parts.append((num.exact_div(g), den.exact_div(g)))
    common = parts[0][1]
    for _, d in parts[1:]:
        common = common.exact_div(common.gcd(d)) * d
    total = cat.zero()
    for num, den in parts:
        total = total + num * common.exact_div(den)
    return RationalFunction(total, common)


def amp_gr(space: KinSpace | LegSet | int) -> Amplitude:
    if not isinstance(space, KinSpace):
        space = build_space(space)
    n = space.n
    if n == 3:
        return amp_base("GR", space.legs)
    if n > 5:
        raise AmplitudeError("GR amplitudes are supported for n <= 5")
    v = _GR_MEMO.get(space.legs)
    if v is None:
        v = klt_sum(space)
        _GR_MEMO[space.legs] = v
    return Amplitude("GR", space.legs, v, Fraction(1), space.legs.labels)


def amplitude(theory: str, n: int) -> Amplitude:
    th = theory.upper()
    sp = build_space(n)
    if th == "YM":
        return amp_ym(sp)
    if th == "GR":
        return amp_gr(sp)
    raise AmplitudeError(f"unknown theory {theory!r}")


class GoldenMismatch(ArithmeticError):
    pass


def proportionality(f: AnyExpr, g: AnyExpr) -> Fraction | None:
    """The rational ``r`` with ``f == r * g``, or ``None``."""
    f, g = as_rf(f), as_rf(g)
    if g.is_zero():
        raise GoldenMismatch("reference is zero")
    if f.is_zero():
        return None
    q = f / g
    if not q.is_constant():
        return None
    return q.constant_value()


def golden_compare(computed: Amplitude | AnyExpr, reference: AnyExpr) -> Fraction:
    val = computed.value if isinstance(computed, Amplitude) else as_rf(computed)
    sp = build_space(computed.legs) if isinstance(computed, Amplitude) else None
    ref = sp.normal_form(reference) if sp is not None else as_rf(reference)
    r = proportionality(val, ref)
    if r is None:
        raise GoldenMismatch("computed amplitude is not proportional to the reference")
    return r


# ---------------------------------------------------------------------------
# relabeling
# ---------------------------------------------------------------------------

def relabel(space: KinSpace, f: AnyExpr, perm: dict) -> RationalFunction:
    """Pull back ``f`` along the leg permutation ``a -> perm[a]``."""
    cat = space.catalog
    images = []
    for name in cat.names:
        kind, rest = name[0], name[2:-1]
        a, b = rest.split(",")
        la = {str(x): x for x in space.legs.labels}
        images.append(space.sym(var_name(kind, perm[la[a]], perm[la[b]])))
    f = as_rf(f)
    return RationalFunction(f.num.compose(images, cat), f.den.compose(images, cat))


# ---------------------------------------------------------------------------
# fixtures and cache files
# ---------------------------------------------------------------------------

FIXTURE_DIR = Path(__file__).with_name("fixtures")


def load_fixture(name: str, space: KinSpace) -> RationalFunction:
    text = (FIXTURE_DIR / name).read_text()
    body = "".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))
    return space.normal_form(parse(body, space.catalog))


def golden_reference(theory: str, n: int) -> RationalFunction:
    return load_fixture(f"{theory.lower()}{n}.txt", build_space(n))


def cache_dir() -> Path:
    return Path(os.environ.get("DNAMP_CACHE_DIR", Path.home() / ".cache" / "dnamp"))


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_cache(amp: Amplitude, path: Path | None = None) -> Path:
    body = amp.serialize()
    path = path or cache_dir() / f"{amp.theory.lower()}{amp.n}.amp"
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [
        f"# theory: {amp.theory}",
        f"# n: {amp.n}",
        f"# order: {','.join(map(str, amp.order))}",
        f"# normalization: {amp.normalization}",
        f"# sha256: {content_hash(body)}",
    ]
    path.write_text("\n".join(header) + "\n" + body + "\n")
    return path


def read_cache(path: Path) -> Amplitude:
    meta = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    text = "".join(body)
    if content_hash(text) != meta.get("sha256"):
        raise AmplitudeError(f"cache file {path} fails its content hash")
    n = int(meta["n"])
    sp = build_space(n)
    order = tuple(int(x) for x in meta["order"].split(","))
    return Amplitude(meta["theory"], sp.legs, parse(text, sp.catalog), Fraction(meta["normalization"]), order)
