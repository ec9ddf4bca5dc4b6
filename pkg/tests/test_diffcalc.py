import random
from fractions import Fraction

import pytest

from dnamp.amplitudes import amp_base, amplitude
from dnamp.diffcalc import (
    Derivation,
    DerivOp,
    annihilates,
    apply_derivation,
    apply_operator,
    commutator,
    derivations,
    make_abc,
    make_derivation,
    make_U,
    make_xi_ops,
    make_xyz,
    operator_by_name,
    operator_equal,
    theory_params,
    zero_operator,
)
from dnamp.exactalg import nullspace, rank, rref
from dnamp.kinspace import build_master, build_space, var_name


# -- an independent oracle for the derivation table -----------------------------
# Each D_x is the orthogonal projection (in ordered-pair coordinates) onto the
# subspace cut out by the relations; symmetric kinds pick up a factor 2.

def _projector(n, kind):
    pairs = [(a, b) for a in range(1, n + 1) for b in range(1, n + 1)]
    col = {p: i for i, p in enumerate(pairs)}
    rows = []
    for a in range(1, n + 1):
        r = [0] * len(pairs)
        r[col[(a, a)]] = 1
        rows.append(r)
    if kind in "ke":
        for a in range(1, n + 1):
            for b in range(a + 1, n + 1):
                r = [0] * len(pairs)
                r[col[(a, b)]], r[col[(b, a)]] = 1, -1
                rows.append(r)
    if kind in "kc":
        for b in range(1, n + 1):
            r = [0] * len(pairs)
            for a in range(1, n + 1):
                r[col[(a, b)]] = 1
            rows.append(r)
    basis = nullspace(rows, len(pairs))
    m = len(basis)
    gram = [[sum(Fraction(x) * y for x, y in zip(basis[i], basis[j])) for j in range(m)] for i in range(m)]
    red, _ = rref([gram[i] + [Fraction(int(i == j)) for j in range(m)] for i in range(m)])
    inv = [row[m:] for row in red]
    scale = 1 if kind == "c" else 2
    out = {}
    for p in pairs:
        for q in pairs:
            out[p, q] = scale * sum(basis[i][col[p]] * inv[i][j] * basis[j][col[q]] for i in range(m) for j in range(m))
    return out


@pytest.mark.parametrize("n", [3, 4, 5])
def test_derivation_table_matches_projector(n):
    sp = build_space(n)
    D = derivations(sp)
    for kind in "kce":
        P = _projector(n, kind)
        for (i, j), (a, b) in P:
            got = D(kind, i, j).value_on(sp.sym(var_name(kind, a, b)))
            assert got == P[(i, j), (a, b)], (kind, i, j, a, b)
        other = [k for k in "kce" if k != kind]
        for k2 in other:
            for a in sp.legs:
                for b in sp.legs:
                    assert D(kind, 1, 2).value_on(sp.sym(var_name(k2, a, b))) == 0


def test_derivation_examples():
    sp = build_space(4)
    assert make_derivation(sp, "c", 1, 2).value_on_var("c[1,2]") == Fraction(2, 3)
    assert make_derivation(sp, "k", 1, 2).value_on_var("k[1,3]") == Fraction(-1, 6)
    assert make_derivation(sp, "e", 1, 1).is_zero()
    with pytest.raises(KeyError):
        make_derivation(sp, "k", 1, 9)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_dlinrel(n):
    sp = build_space(n)
    D = derivations(sp)
    L = sp.legs.labels
    zero = Derivation(sp, {})
    for i in L:
        for j in L:
            assert D("k", i, j) == D("k", j, i)
            assert D("e", i, j) == D("e", j, i)
        assert sum((D("k", a, i) for a in L), zero).is_zero()
        assert sum((D("c", a, i) for a in L), zero).is_zero()
        for kind in "kce":
            assert D(kind, i, i).is_zero()


@pytest.mark.parametrize("n", [3, 4, 5])
def test_span(n):
    sp = build_space(n)
    D = derivations(sp)
    mat = [[D(k, i, j).values.get(v, 0) for v in sp.independent] for k in "kce" for i in sp.legs for j in sp.legs]
    assert rank(mat) == 2 * n * (n - 2)


def test_apply_derivation_examples():
    sp = build_space(4)
    D12 = make_derivation(sp, "e", 1, 2)
    assert apply_derivation(D12, sp.parse("e[1,2]*e[3,4]")) == sp.parse("e[3,4]")
    assert apply_derivation(make_derivation(sp, "k", 1, 3), sp.parse("7/3")).is_zero()


def test_leibniz():
    sp = build_space(4)
    rng = random.Random(3)
    names = [sp.catalog.name(v) for v in sp.independent]
    for _ in range(30):
        f = sp.parse(" + ".join(f"{rng.randint(1, 5)}*{rng.choice(names)}*{rng.choice(names)}" for _ in range(3)))
        g = sp.parse(f"({rng.choice(names)} + 1)/({rng.choice(names)} - 2)")
        d = make_derivation(sp, rng.choice("kce"), rng.randint(1, 4), rng.randint(1, 4))
        assert d.apply(f * g) == d.apply(f) * g + f * d.apply(g)


def test_xyz_on_base_case():
    A3 = amp_base("YM", (1, 2, 3)).value
    sp = build_space(3)
    assert apply_operator(make_xyz(sp, "X", 1), A3).is_zero()
    assert apply_operator(make_xyz(sp, "Y", 1, h=1), A3).is_zero()
    assert apply_operator(make_xyz(sp, "Z", s=1), A3).is_zero()
    assert theory_params("YM", 3) == (1, 1)
    assert theory_params("GR", 5) == (2, 2)


def test_abc_on_base_case():
    sp = build_space(3)
    M3 = amp_base("GR", (1, 2, 3)).value
    target = sp.parse("e[1,2]*e[2,3]*e[3,1]")
    for i in (1, 2, 3):
        r = apply_operator(make_abc(sp, "Ctilde", i), M3)
        q = r / target
        assert q.is_constant() and q.constant_value() != 0
        assert apply_operator(make_abc(sp, "C", i), M3).is_zero()


def test_A_on_ym4():
    sp = build_space(4)
    assert apply_operator(make_abc(sp, "A", 1), amplitude("YM", 4).value).is_zero()
    assert apply_operator(make_xyz(sp, "X", 2), amplitude("YM", 4).value).is_zero()


def test_apply_operator_examples():
    sp = build_space(4)
    f = sp.parse("k[1,2]*c[2,3]/(k[1,3] + 1)")
    assert apply_operator(zero_operator(sp), f).is_zero()
    assert apply_operator(make_xyz(sp, "Y", 2, h=0), sp.parse("1")).is_zero()


def test_operator_equal():
    sp = build_space(4)
    A1 = make_abc(sp, "A", 1)
    assert operator_equal(A1, A1).equal
    Y = make_xyz(sp, "Y", 1, "YM")
    assert operator_equal(commutator(Y, A1), Fraction(-2) * A1).equal
    assert operator_equal(commutator(make_xyz(sp, "Y", 2, "YM"), A1), zero_operator(sp)).equal
    Z = make_xyz(sp, "Z", theory="GR")
    C2 = make_abc(sp, "C", 2)
    assert operator_equal(commutator(Z, C2), Fraction(-2) * C2).equal
    res = operator_equal(A1, make_abc(sp, "A", 2))
    assert not res.equal and res.witness


def test_operator_names():
    sp = build_space(4)
    assert repr(operator_by_name(sp, "Ct[2]")) == "Ct[2]"
    assert repr(operator_by_name(sp, "X[1]")) == "X[1]"
    assert repr(operator_by_name(sp, "Z")) == "Z"
    ms = build_master(4, (1, 2))
    assert repr(operator_by_name(ms, "U")) == "U"
    assert repr(operator_by_name(ms, "Xi")) == "Xi"
    with pytest.raises(ValueError):
        operator_by_name(sp, "Q[1]")


# -- channel operators ------------------------------------------------------------

def test_xi_ops():
    ms = build_master(4, (1, 2))
    xd = make_xi_ops(ms)
    assert xd.xi == ms.parse("2*k[1,2]").num
    assert xd.Xi.value_on(xd.xi) == 2
    for p in xd.perp.values():
        assert xd.Xi.value_on(p) == 0


@pytest.mark.parametrize("n,J", [(4, (1, 2)), (5, (1, 2)), (5, (2, 4))])
def test_xi_value_table(n, J):
    ms = build_master(n, J)
    xd = make_xi_ops(ms)
    K = ms.K
    nJ, nK = len(J), len(K)
    for a in ms.legs:
        for b in ms.legs:
            if a == b:
                continue
            got = xd.Xi.value_on(ms.sym(var_name("k", a, b)))
            if a in J and b in J:
                assert got == Fraction(2, nJ * (nJ - 1))
            elif a in K and b in K:
                assert got == Fraction(2, nK * (nK - 1))
            else:
                assert got == Fraction(-2, nJ * nK)


def test_U():
    ms = build_master(4, (1, 2))
    U = make_U(ms)
    assert apply_operator(U, ms.parse("k[1,2]*c[1,3]*e[2,4]")).is_zero()
    xd = make_xi_ops(ms)
    for j in ms.J:
        for k in ms.K:
            r = apply_operator(U, ms.parse(f"c[{j},*]*c[{k},*]"))
            q = r / xd.perp[var_name("k", j, k)]
            assert q.is_constant() and q.constant_value() != 0


def test_U_commutes_with_Xi():
    ms = build_master(4, (1, 2))
    U = make_U(ms)
    Xi = DerivOp(make_xi_ops(ms).Xi)
    rng = random.Random(5)
    names = [ms.catalog.name(v) for v in ms.independent]
    for _ in range(10):
        f = ms.parse(" + ".join(f"{rng.randint(1, 4)}*{rng.choice(names)}*{rng.choice(names)}*{rng.choice(names)}" for _ in range(4)))
        assert Xi.apply(U.apply(f)) == U.apply(Xi.apply(f))
    assert operator_equal(commutator(Xi, U), zero_operator(ms)).equal


# -- operator chains ----------------------------------------------------------------

def _gauge_invariant(sp, theory):
    # built from two linearized field strengths; killed by X, Y and Z but not by B
    f = sp.parse("(k[1,2]*e[1,2] - c[1,2]*c[2,1])*(k[3,4]*e[3,4] - c[3,4]*c[4,3])/(k[1,2]*k[1,3])")
    return f if theory == "YM" else f * f * sp.parse("k[1,2]")


@pytest.mark.parametrize("theory", ["YM", "GR"])
def test_operator_chains_on_test_function(theory):
    sp = build_space(4)
    n = 4
    g = _gauge_invariant(sp, theory)
    X = lambda i: make_xyz(sp, "X", i, theory)
    Y = lambda i: make_xyz(sp, "Y", i, theory)
    Z = make_xyz(sp, "Z", theory=theory)
    for i in sp.legs:
        assert apply_operator(X(i), g).is_zero() and apply_operator(Y(i), g).is_zero()
    assert apply_operator(Z, g).is_zero()
    for j in sp.legs:
        Ag = apply_operator(make_abc(sp, "A", j), g)
        Bg = apply_operator(make_abc(sp, "B", j), g)
        Cg = apply_operator(make_abc(sp, "C", j), g)
        assert Ag.is_zero() and not Bg.is_zero()
        assert apply_operator(Z.shifted(1), Bg).is_zero()
        assert apply_operator(Z.shifted(2), Cg).is_zero()
        for i in sp.legs:
            d = int(i == j)
            assert apply_operator(X(i), Bg).is_zero()
            assert apply_operator(Y(i).shifted(d), Bg).is_zero()
            assert apply_operator(Y(i), Cg).is_zero()
            # B g != 0, so X_i C_j g keeps exactly the B term of the commutator
            rhs = apply_operator(make_abc(sp, "B", i), g) * (Fraction(1, n) - d)
            assert apply_operator(X(i), Cg) == rhs


def test_operator_A_chain():
    sp = build_space(4)
    # not killed by A: the (Y + 2 delta) chain is then non-trivial
    F = lambda a, b: sp.parse(f"k[{a},{b}]*e[{a},{b}] - c[{a},{b}]*c[{b},{a}]")
    g = F(1, 2) * F(1, 3) * F(2, 4) / sp.parse("k[1,2]*k[1,3]*k[1,4]")
    Z = make_xyz(sp, "Z", s=0)
    for i in sp.legs:
        assert apply_operator(make_xyz(sp, "X", i), g).is_zero()
    for j in (1, 2):
        Ag = apply_operator(make_abc(sp, "A", j), g)
        assert not Ag.is_zero()
        assert apply_operator(Z, Ag).is_zero()
        for i in sp.legs:
            h = 2 if i in (1, 2) else 1
            d = int(i == j)
            assert apply_operator(make_xyz(sp, "X", i), Ag).is_zero()
            assert apply_operator(make_xyz(sp, "Y", i, h=h).shifted(2 * d), Ag).is_zero()


@pytest.mark.parametrize("theory,n", [("YM", 3), ("GR", 3), ("YM", 4), ("GR", 4)])
def test_operator_chains_on_amplitudes(theory, n):
    sp = build_space(n)
    f = amplitude(theory, n).value
    Z = make_xyz(sp, "Z", theory=theory)
    for j in sp.legs:
        for w, shift in (("A", 0), ("B", 1), ("C", 2)):
            h = apply_operator(make_abc(sp, w, j), f)
            assert apply_operator(Z.shifted(shift), h).is_zero()
            for i in sp.legs:
                assert apply_operator(make_xyz(sp, "X", i, theory), h).is_zero()


# -- the blocked zero test agrees with direct application -----------------------------

@pytest.mark.parametrize("theory", ["YM", "GR"])
def test_annihilates_matches_apply(theory):
    sp = build_space(4)
    f = amplitude(theory, 4).value
    g = f / sp.parse("k[1,3] + 2*k[1,2]")
    for op in (make_xyz(sp, "Z", theory=theory), make_xyz(sp, "Z", theory=theory).shifted(1),
               make_abc(sp, "B", 2), make_abc(sp, "C", 3), make_abc(sp, "Ctilde", 1)):
        for h in (f, g, f * f.num):
            direct = apply_operator(op, h).is_zero()
            res = annihilates(op, h)
            assert res.equal == direct
            if not res.equal:
                assert res.witness
