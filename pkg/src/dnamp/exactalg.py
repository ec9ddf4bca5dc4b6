"""Exact arithmetic kernel: rationals, sparse polynomials and reduced rational functions.

Polynomials live over a :class:`VarCatalog`, an ordered list of variable names.
The catalog order fixes the canonical monomial order (graded lexicographic,
first variable largest), which in turn fixes serialization and the monic
normalization of denominators.

The heavy lifting is delegated to FLINT's ``fmpq_mpoly`` through python-flint;
this module only adds the catalog bookkeeping, the canonical-form invariants and
the text grammar.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

import flint

Rational = Fraction
VarId = int

Scalar = Union[int, Fraction]


class ExactAlgError(Exception):
    """Base class for kernel errors."""


class UnknownVariableError(ExactAlgError, LookupError):
    pass


class CatalogMismatchError(ExactAlgError, ValueError):
    pass


class PoleError(ExactAlgError, ZeroDivisionError):
    """A denominator vanished (identically, or at an evaluation point)."""


class ParseError(ExactAlgError, ValueError):
    pass


def to_fmpq(x: Scalar) -> flint.fmpq:
    if isinstance(x, flint.fmpq):
        return x
    if isinstance(x, int):
        return flint.fmpq(x)
    if isinstance(x, Fraction):
        return flint.fmpq(x.numerator, x.denominator)
    if isinstance(x, flint.fmpz):
        return flint.fmpq(int(x))
    raise TypeError(f"not an exact rational: {x!r}")


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, flint.fmpq):
        return Fraction(int(x.p), int(x.q))
    if isinstance(x, flint.fmpz):
        return Fraction(int(x))
    raise TypeError(f"not an exact rational: {x!r}")


class VarCatalog:
    """An ordered, immutable set of variable names issuing dense integer ids.

    Two catalogs with the same names are interchangeable.
    """

    __slots__ = ("names", "_index", "ctx", "_gens")

    def __init__(self, names: Iterable[str]):
        self.names = tuple(names)
        if not self.names:
            raise ValueError("empty catalog")
        self._index = {n: i for i, n in enumerate(self.names)}
        if len(self._index) != len(self.names):
            raise ValueError("duplicate variable names")
        self.ctx = flint.fmpq_mpoly_ctx.get(self.names, "deglex")
        self._gens = self.ctx.gens()

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, VarCatalog) and (other is self or other.names == self.names)

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"VarCatalog({len(self.names)} vars)"

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def var(self, name: str) -> VarId:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariableError(f"unknown variable {name!r}") from None

    def name(self, vid: VarId) -> str:
        return self.names[vid]

    def gen(self, v: VarId | str) -> Polynomial:
        if isinstance(v, str):
            v = self.var(v)
        return Polynomial(self, self._gens[v])

    def raw_gen(self, v: VarId):
        return self._gens[v]

    def raw_gens(self):
        return self._gens

    def constant(self, c: Scalar) -> Polynomial:
        return Polynomial(self, self.ctx.constant(to_fmpq(c)))

    def zero(self) -> Polynomial:
        return self.constant(0)

    def one(self) -> Polynomial:
        return self.constant(1)

    def linear(self, coeffs: Mapping[VarId, Scalar], const: Scalar = 0) -> Polynomial:
        """Build ``const + sum(coeffs[v] * v)``."""
        n = len(self.names)
        terms = {}
        for v, c in coeffs.items():
            if c:
                e = [0] * n
                e[v] = 1
                terms[tuple(e)] = to_fmpq(c)
        if const:
            terms[(0,) * n] = to_fmpq(const)
        return Polynomial(self, self.ctx.from_dict(terms) if terms else self.ctx.constant(0))

    def from_terms(self, terms: Mapping[tuple[int, ...], Scalar]) -> Polynomial:
        clean = {tuple(e): to_fmpq(c) for e, c in terms.items() if c}
        return Polynomial(self, self.ctx.from_dict(clean) if clean else self.ctx.constant(0))


def _coerce(catalog: VarCatalog, x) -> Polynomial:
    if isinstance(x, Polynomial):
        if x.catalog != catalog:
            raise CatalogMismatchError("polynomials over different catalogs")
        return x
    return catalog.constant(x)


class Polynomial:
    """Sparse multivariate polynomial with rational coefficients (immutable)."""

    __slots__ = ("catalog", "raw")

    def __init__(self, catalog: VarCatalog, raw):
        self.catalog = catalog
        self.raw = raw

    # -- inspection -----------------------------------------------------
    def is_zero(self) -> bool:
        return self.raw.is_zero()

    def is_constant(self) -> bool:
        return self.raw.is_constant()

    def constant_value(self) -> Fraction:
        if not self.raw.is_constant():
            raise ValueError("not a constant")
        return to_fraction(self.raw.leading_coefficient()) if not self.raw.is_zero() else Fraction(0)

    def __len__(self) -> int:
        return len(self.raw)

    def degree(self) -> int:
        return -1 if self.raw.is_zero() else int(self.raw.total_degree())

    def degree_in(self, v: VarId) -> int:
        return int(self.raw.degrees()[v]) if not self.raw.is_zero() else -1

    def variables(self) -> set[VarId]:
        if self.raw.is_zero():
            return set()
        return {i for i, d in enumerate(self.raw.degrees()) if d > 0}

    def terms(self) -> Iterator[tuple[dict[VarId, int], Fraction]]:
        """Yield ``(sparse exponent map, coefficient)`` in canonical order."""
        for exps, c in self.raw.terms():
            yield {i: int(e) for i, e in enumerate(exps) if e}, to_fraction(c)

    def leading_coefficient(self) -> Fraction:
        if self.raw.is_zero():
            return Fraction(0)
        return to_fraction(self.raw.leading_coefficient())

    def coefficient_of(self, exps: Mapping[VarId, int]) -> Fraction:
        e = [0] * len(self.catalog)
        for v, k in exps.items():
            e[v] = k
        return to_fraction(self.raw[tuple(e)])

    # -- arithmetic -----------------------------------------------------
    def _wrap(self, raw) -> Polynomial:
        return Polynomial(self.catalog, raw)

    def __add__(self, other):
        if isinstance(other, RationalFunction):
            return RationalFunction.from_poly(self) + other
        return self._wrap(self.raw + _coerce(self.catalog, other).raw)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, RationalFunction):
            return RationalFunction.from_poly(self) - other
        return self._wrap(self.raw - _coerce(self.catalog, other).raw)

    def __rsub__(self, other):
        return self._wrap(_coerce(self.catalog, other).raw - self.raw)

    def __neg__(self):
        return self._wrap(-self.raw)

    def __mul__(self, other):
        if isinstance(other, RationalFunction):
            return RationalFunction.from_poly(self) * other
        if isinstance(other, (int, Fraction)):
            return self._wrap(self.raw * to_fmpq(other))
        return self._wrap(self.raw * _coerce(self.catalog, other).raw)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return RationalFunction.from_poly(self) ** k
        return self._wrap(self.raw**k)

    def __truediv__(self, other) -> RationalFunction:
        return RationalFunction.from_poly(self) / other

    def __rtruediv__(self, other) -> RationalFunction:
        return RationalFunction.from_poly(_coerce(self.catalog, other)) / self

    def __eq__(self, other) -> bool:
        if isinstance(other, RationalFunction):
            return other == self
        if isinstance(other, (int, Fraction)):
            return self.raw == self.catalog.ctx.constant(to_fmpq(other))
        if not isinstance(other, Polynomial) or other.catalog != self.catalog:
            return NotImplemented
        return self.raw == other.raw

    def __hash__(self) -> int:
        return hash((self.catalog, str(self.raw)))

    def exact_div(self, other: Polynomial) -> Polynomial:
        """Exact quotient; raises ``ArithmeticError`` if ``other`` does not divide."""
        q, r = divmod(self.raw, _coerce(self.catalog, other).raw)
        if not r.is_zero():
            raise ArithmeticError("division is not exact")
        return self._wrap(q)

    def divides(self, other: Polynomial) -> bool:
        """True if ``self`` divides ``other``."""
        _, r = divmod(other.raw, self.raw)
        return r.is_zero()

    def gcd(self, other: Polynomial) -> Polynomial:
        return self._wrap(self.raw.gcd(_coerce(self.catalog, other).raw))

    def monic(self) -> Polynomial:
        if self.raw.is_zero():
            return self
        return self._wrap(self.raw / self.raw.leading_coefficient())

    # -- calculus / substitution ----------------------------------------
    def partial(self, v: VarId) -> Polynomial:
        return self._wrap(self.raw.derivative(v))

    def compose(self, images: list[Polynomial], target: VarCatalog | None = None) -> Polynomial:
        """Substitute ``images[v]`` for every variable ``v`` (full, simultaneous)."""
        target = target or (images[0].catalog if images else self.catalog)
        return Polynomial(target, self.raw.compose(*[p.raw for p in images], ctx=target.ctx))

    def substitute(self, sigma: Mapping[VarId, Union[Polynomial, RationalFunction, Scalar]]
                   ) -> RationalFunction:
        return substitute(RationalFunction.from_poly(self), sigma)

    def evaluate(self, point: Mapping[VarId, Scalar]) -> Fraction:
        return _eval_raw(self, point)

    def __call__(self, point: Mapping[VarId, Scalar]) -> Fraction:
        return self.evaluate(point)

    # -- text -----------------------------------------------------------
    def __str__(self) -> str:
        return format_polynomial(self)

    def __repr__(self) -> str:
        return f"Polynomial({self})"


def _eval_raw(p: Polynomial, point: Mapping[VarId, Scalar]) -> Fraction:
    used = p.variables()
    missing = used - set(point)
    if missing:
        names = ", ".join(sorted(p.catalog.name(v) for v in missing))
        raise UnknownVariableError(f"point does not cover {names}")
    vals = [to_fmpq(point[v]) if v in used else flint.fmpq(0) for v in range(len(p.catalog))]
    return to_fraction(p.raw(*vals))


class RationalFunction:
    """Quotient of polynomials in canonical reduced form.

    Invariants: ``den`` is nonzero, ``gcd(num, den) == 1`` and the leading
    coefficient of ``den`` (canonical order) is 1.  A zero function has
    ``den == 1``.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial | None = None, *, reduced: bool = False):
        cat = num.catalog
        if den is None:
            self.num, self.den = num, cat.one()
            return
        if den.catalog != cat:
            raise CatalogMismatchError("numerator and denominator over different catalogs")
        if den.raw.is_zero():
            raise PoleError("zero denominator")
        if reduced:
            self.num, self.den = num, den
            return
        n, d = num.raw, den.raw
        if n.is_zero():
            self.num, self.den = num, cat.one()
            return
        if not d.is_constant():
            g = n.gcd(d)
            if not g.is_constant():
                n = n / g
                d = d / g
        lc = d.leading_coefficient()
        if lc != 1:
            n = n / lc
            d = d / lc
        self.num = Polynomial(cat, n)
        self.den = Polynomial(cat, d)

    @classmethod
    def from_poly(cls, p: Polynomial) -> RationalFunction:
        return cls(p)

    @classmethod
    def constant(cls, catalog: VarCatalog, c: Scalar) -> RationalFunction:
        return cls(catalog.constant(c))

    @property
    def catalog(self) -> VarCatalog:
        return self.num.catalog

    def is_zero(self) -> bool:
        return self.num.raw.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.raw.is_one()

    def is_constant(self) -> bool:
        return self.den.raw.is_one() and self.num.raw.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant")
        return self.num.constant_value()

    def variables(self) -> set[VarId]:
        return self.num.variables() | self.den.variables()

    def _other(self, other) -> RationalFunction:
        if isinstance(other, RationalFunction):
            if other.catalog != self.catalog:
                raise CatalogMismatchError("rational functions over different catalogs")
            return other
        return RationalFunction(_coerce(self.catalog, other))

    def __add__(self, other):
        o = self._other(other)
        if self.den.raw == o.den.raw:
            return RationalFunction(self.num + o.num, self.den)
        return RationalFunction(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den, reduced=True)

    def __sub__(self, other):
        return self + (-self._other(other))

    def __rsub__(self, other):
        return self._other(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return RationalFunction(self.catalog.zero())
            return RationalFunction(self.num * other, self.den, reduced=True)
        o = self._other(other)
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        if o.is_zero():
            raise PoleError("division by the zero polynomial")
        return RationalFunction(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        return self._other(other) / self

    def __pow__(self, k: int):
        if k >= 0:
            return RationalFunction(self.num**k, self.den**k, reduced=True)
        if self.is_zero():
            raise PoleError("zero to a negative power")
        return RationalFunction(self.den ** (-k), self.num ** (-k))

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, Polynomial)):
            try:
                other = self._other(other)
            except CatalogMismatchError:
                return False
        if not isinstance(other, RationalFunction) or other.catalog != self.catalog:
            return NotImplemented
        return self.num.raw == other.num.raw and self.den.raw == other.den.raw

    def __hash__(self) -> int:
        return hash((self.catalog, str(self.num.raw), str(self.den.raw)))

    def partial(self, v: VarId) -> RationalFunction:
        return partial(self, v)

    def substitute(self, sigma) -> RationalFunction:
        return substitute(self, sigma)

    def evaluate(self, point: Mapping[VarId, Scalar]) -> Fraction:
        return evaluate(self, point)

    def __str__(self) -> str:
        return format_rational_function(self)

    def __repr__(self) -> str:
        return f"RationalFunction({self})"


AnyExpr = Union[Polynomial, RationalFunction]


def as_rf(x: AnyExpr) -> RationalFunction:
    return x if isinstance(x, RationalFunction) else RationalFunction(x)


def poly_arith(a: AnyExpr, b: AnyExpr, kind: str) -> RationalFunction:
    """Exact ``add``/``sub``/``mul``/``div`` returning a reduced rational function."""
    a, b = as_rf(a), as_rf(b)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "div":
        return a / b
    raise ValueError(f"unknown operation {kind!r}")


def partial(f: AnyExpr, v: VarId) -> RationalFunction:
    """Formal partial derivative, every variable independent."""
    f = as_rf(f)
    if f.is_polynomial():
        return RationalFunction(f.num.partial(v))
    n, d = f.num, f.den
    return RationalFunction(n.partial(v) * d - n * d.partial(v), d * d)


def substitute(f: AnyExpr, sigma: Mapping[VarId, Union[AnyExpr, Scalar]]) -> RationalFunction:
    """Simultaneous substitution ``v -> sigma[v]``; unmapped variables are kept."""
    f = as_rf(f)
    cat = f.catalog
    images_num: list[Polynomial] = []
    images_den: dict[VarId, Polynomial] = {}
    for v in range(len(cat)):
        if v in sigma:
            img = sigma[v]
            if isinstance(img, (int, Fraction)):
                images_num.append(cat.constant(img))
                continue
            img = as_rf(img)
            if img.catalog != cat:
                raise CatalogMismatchError("substitution image over another catalog")
            images_num.append(img.num)
            if not img.is_polynomial():
                images_den[v] = img.den
        else:
            images_num.append(cat.gen(v))
    if not images_den:
        num = f.num.compose(images_num, cat)
        den = f.den.compose(images_num, cat)
    else:
        num = _compose_rational(f.num, images_num, images_den)
        den = _compose_rational(f.den, images_num, images_den)
        num, den = num[0] * den[1], den[0] * num[1]
        if den.is_zero():
            raise PoleError("substitution makes the denominator vanish identically")
        return RationalFunction(num, den)
    if den.is_zero():
        raise PoleError("substitution makes the denominator vanish identically")
    return RationalFunction(num, den)


def _compose_rational(p: Polynomial, nums: list[Polynomial], dens: dict[VarId, Polynomial]):
    """Return ``(N, D)`` with ``p(nums/dens) == N / D`` and ``D`` a product of powers."""
    cat = p.catalog
    degs = p.raw.degrees() if not p.raw.is_zero() else [0] * len(cat)
    common = cat.one()
    for v, d in dens.items():
        if degs[v]:
            common = common * d ** int(degs[v])
    total = cat.zero()
    powers: dict[tuple[VarId, int], Polynomial] = {}

    def pw(base: Polynomial, key, k: int) -> Polynomial:
        if (key, k) not in powers:
            powers[(key, k)] = base**k
        return powers[(key, k)]

    for exps, c in p.raw.terms():
        term = cat.constant(to_fraction(c))
        for v, e in enumerate(exps):
            e = int(e)
            if v in dens:
                dv = int(degs[v])
                if e:
                    term = term * pw(nums[v], ("n", v), e)
                if dv - e:
                    term = term * pw(dens[v], ("d", v), dv - e)
            elif e:
                term = term * pw(nums[v], ("n", v), e)
        total = total + term
    return total, common


def evaluate(f: AnyExpr, point: Mapping[VarId, Scalar]) -> Fraction:
    """Exact value at ``point``; raises on uncovered variables or a pole."""
    f = as_rf(f)
    used = f.variables()
    missing = used - set(point)
    if missing:
        names = ", ".join(sorted(f.catalog.name(v) for v in missing))
        raise UnknownVariableError(f"point does not cover {names}")
    d = _eval_raw(f.den, point)
    if d == 0:
        raise PoleError("denominator vanishes at the point")
    return _eval_raw(f.num, point) / d


# ---------------------------------------------------------------------------
# text grammar
# ---------------------------------------------------------------------------

def _format_coeff(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"


def format_polynomial(p: Polynomial) -> str:
    if p.raw.is_zero():
        return "0"
    names = p.catalog.names
    out = []
    for k, (exps, c) in enumerate(p.raw.terms()):
        c = to_fraction(c)
        mono = "*".join(
            names[i] if e == 1 else f"{names[i]}^{int(e)}" for i, e in enumerate(exps) if e
        )
        mag = abs(c)
        if mono:
            body = mono if mag == 1 else f"{_format_coeff(mag)}*{mono}"
        else:
            body = _format_coeff(mag)
        if k == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append((" - " if c < 0 else " + ") + body)
    return "".join(out)


def format_rational_function(f: RationalFunction) -> str:
    if f.is_polynomial():
        return format_polynomial(f.num)
    return f"({format_polynomial(f.num)})/({format_polynomial(f.den)})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\[[^\]]*\])?)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    toks = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "name":
            val = re.sub(r"\s+", "", val)
        toks.append((kind, val))
    return toks


class _Parser:
    def __init__(self, text: str, catalog: VarCatalog):
        self.toks = _tokenize(text)
        self.i = 0
        self.cat = catalog

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, op):
        t = self.take()
        if t != ("op", op):
            raise ParseError(f"expected {op!r}, got {t[1]!r}")

    def parse(self) -> RationalFunction:
        if not self.toks:
            raise ParseError("empty expression")
        r = self.expr()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input near {self.peek()[1]!r}")
        return r

    # sums are accumulated over a common denominator with a single reduction
    def expr(self) -> RationalFunction:
        num, den = self.term_pair()
        while self.peek() in (("op", "+"), ("op", "-")):
            sign = self.take()[1]
            n2, d2 = self.term_pair()
            if sign == "-":
                n2 = -n2
            if den.raw == d2.raw:
                num = num + n2
            else:
                num, den = num * d2 + n2 * den, den * d2
        return RationalFunction(num, den)

    def term_pair(self):
        f = self.factor()
        num, den = f.num, f.den
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            g = self.factor()
            if op == "*":
                num, den = num * g.num, den * g.den
            else:
                if g.is_zero():
                    raise PoleError("division by zero in expression")
                num, den = num * g.den, den * g.num
        return num, den

    def factor(self) -> RationalFunction:
        t = self.peek()
        if t in (("op", "-"), ("op", "+")):
            self.take()
            f = self.factor()
            return -f if t[1] == "-" else f
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            neg = False
            if self.peek() == ("op", "-"):
                self.take()
                neg = True
            kind, val = self.take()
            if kind != "num":
                raise ParseError("exponent must be an integer")
            k = int(val)
            return base ** (-k if neg else k)
        return base

    def atom(self) -> RationalFunction:
        kind, val = self.take()
        if kind == "num":
            return RationalFunction(self.cat.constant(int(val)))
        if kind == "name":
            return RationalFunction(self.cat.gen(self.cat.var(val)))
        if (kind, val) == ("op", "("):
            r = self.expr()
            self.expect(")")
            return r
        raise ParseError(f"unexpected token {val!r}")


_FLAT = r"[^()]*(?:\(\d+/\d+\)[^()]*)*"
_CANON_TERM = re.compile(r"(?:\((\d+)/(\d+)\)|(\d+))?((?:\*?[A-Za-z_]\w*(?:\[[^\]]*\])?(?:\^\d+)?)*)")
_CANON_FACTOR = re.compile(r"([A-Za-z_]\w*(?:\[[^\]]*\])?)(?:\^(\d+))?")


def _parse_expanded(text: str, catalog: VarCatalog) -> Polynomial | None:
    """Fast reader for the printer's own expanded form; ``None`` if it does not apply."""
    text = text.strip()
    if not text or not re.fullmatch(_FLAT, text):
        return None
    sign = 1
    if text.startswith("-"):
        sign, text = -1, text[1:]
    pieces = re.split(r" ([+-]) ", text)
    terms: dict[tuple, flint.fmpq] = {}
    nv = len(catalog)
    for k in range(0, len(pieces), 2):
        if k:
            sign = 1 if pieces[k - 1] == "+" else -1
        m = _CANON_TERM.fullmatch(pieces[k])
        if not m or not any(m.groups()) or (m.group(4).startswith("*") != bool(m.group(1) or m.group(3))):
            return None
        if m.group(1):
            c = flint.fmpq(int(m.group(1)), int(m.group(2)))
        else:
            c = flint.fmpq(int(m.group(3) or 1))
        exps = [0] * nv
        for name, e in _CANON_FACTOR.findall(m.group(4)):
            try:
                exps[catalog.var(name)] += int(e or 1)
            except UnknownVariableError:
                return None
        key = tuple(exps)
        terms[key] = terms.get(key, 0) + c * sign
    return Polynomial(catalog, catalog.ctx.from_dict({e: c for e, c in terms.items() if c}))


def parse(text: str, catalog: VarCatalog) -> RationalFunction:
    """Parse the canonical text grammar (``+ - * / ^``, parentheses, rationals)."""
    t = text.strip()
    m = re.fullmatch(rf"\(({_FLAT})\)/\(({_FLAT})\)", t)
    if m:
        num, den = _parse_expanded(m.group(1), catalog), _parse_expanded(m.group(2), catalog)
        if num is not None and den is not None and not den.is_zero():
            return RationalFunction(num, den)
    else:
        p = _parse_expanded(t, catalog)
        if p is not None:
            return RationalFunction(p)
    return _Parser(text, catalog).parse()


# ---------------------------------------------------------------------------
# dense linear algebra over Q (small systems: relations, maps, ansatz solves)
# ---------------------------------------------------------------------------

def rank(rows: list[list[Scalar]]) -> int:
    if not rows or not rows[0]:
        return 0
    return int(flint.fmpq_mat([[to_fmpq(x) for x in r] for r in rows]).rank())


def rref(rows: list[list[Scalar]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns ``(nonzero rows, pivot columns)``."""
    if not rows:
        return [], []
    m = flint.fmpq_mat([[to_fmpq(x) for x in r] for r in rows])
    red, rk = m.rref()
    out, pivots = [], []
    ncols = m.ncols()
    for i in range(int(rk)):
        row = [to_fraction(red[i, j]) for j in range(ncols)]
        pivots.append(next(j for j, x in enumerate(row) if x))
        out.append(row)
    return out, pivots


def nullspace(rows: list[list[Scalar]], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : rows @ x == 0}``."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    red, pivots = rref(rows)
    free = [j for j in range(ncols) if j not in set(pivots)]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for r, p in zip(red, pivots):
            x[p] = -r[f]
        basis.append(x)
    return basis
