from fractions import Fraction

import pytest

from dnamp.amplitudes import amplitude
from dnamp.diffcalc import make_xi_ops
from dnamp.factorization import (
    Channel,
    FactorizationError,
    PoleOrderError,
    channel_polynomial,
    channels,
    check_factorization,
    make_alpha,
    make_beta,
    make_channel,
    master_for,
    pole_order,
    project_pi,
    residue_at,
)
from dnamp.harness.suites import suite_structure
from dnamp.kinspace import BULLET, LegSet, build_space, var_name

L4 = LegSet.range(4)


def test_channel_naming_round_trip():
    ch = make_channel(L4, [1, 2])
    assert str(ch) == "J=1,2|K=3,4"
    assert Channel.parse("J=1,2|K=3,4", L4) == ch
    assert ch.adjacent and ch.tier == (2, 2)
    assert not make_channel(L4, [1, 3]).adjacent


def test_channel_errors():
    with pytest.raises(FactorizationError):
        make_channel(L4, [1])
    with pytest.raises(FactorizationError):
        make_channel(L4, [1, 2], [2, 3, 4])
    with pytest.raises(FactorizationError):
        Channel.parse("1,2/3,4", L4)


def test_channel_counts():
    assert len(channels(4)) == 3
    assert len(channels(4, adjacent_only=True)) == 2
    assert len(channels(5)) == 10
    assert len(channels(5, adjacent_only=True)) == 5


def test_alpha_examples():
    ms = master_for(make_channel(L4, [1, 2]), L4)
    a = make_alpha(ms, "J")
    img = lambda kind, x, y: a.assignment[var_name(kind, x, y)]
    assert img("e", 1, 2) == ms.sym("e[1,2]")
    assert img("k", 1, BULLET) == img("k", BULLET, 1)
    total = img("k", BULLET, 1) + img("k", BULLET, 2)
    assert ms.nf_poly(total).is_zero()
    ok, w = a.respects_relations()
    assert ok, w


@pytest.mark.parametrize("J", [[1, 2], [2, 3], [1, 3]])
def test_alpha_beta_pi_n4(J):
    ms = master_for(make_channel(L4, J), L4)
    for side, other in (("J", "K"), ("K", "J")):
        ab = make_beta(ms, side).then(make_alpha(ms, side))
        low = ab.target
        assert all(ab.assignment[nm] == low.nf_poly(low.sym(nm)) for nm in low.catalog.names)
        cross = make_beta(ms, side).then(make_alpha(ms, other))
        assert all(p.is_zero() for p in cross.assignment.values())
    pi = project_pi(ms)
    pp = pi.then(pi)
    assert all(pp.assignment[nm] == pi.assignment[nm] for nm in ms.catalog.names)
    assert pi.rank() == 9
    for side in "JK":
        assert all(p.is_zero() for p in pi.then(make_alpha(ms, side)).assignment.values())


def test_xi_values_n5():
    L5 = LegSet.range(5)
    ms = master_for(make_channel(L5, [1, 2]), L5)
    xd = make_xi_ops(ms)
    assert xd.Xi.value_on(xd.xi) == 2
    v = lambda a, b: xd.Xi.value_on_var(var_name("k", a, b))
    assert v(1, 2) == 1
    assert v(1, 3) == Fraction(-1, 3)
    assert v(3, 4) == Fraction(1, 3)
    assert v(1, 1) == 0


@pytest.mark.parametrize("n", [4, 5])
def test_structure_suite(n):
    rep = suite_structure(n)
    assert rep.passed, [(i.desc, i.witness) for i in rep.items if i.status != "pass"]


def test_pole_order_examples():
    sp = build_space(4)
    A = amplitude("YM", 4).value
    assert pole_order(A, make_channel(L4, [1, 2]), sp) == 1
    assert pole_order(A, make_channel(L4, [1, 3]), sp) == 0
    assert pole_order(sp.parse("c[1,2]*e[3,4]"), make_channel(L4, [1, 2]), sp) == 0


def test_residue_examples():
    sp = build_space(4)
    ch = make_channel(L4, [1, 2])
    xi = channel_polynomial(sp, ch)
    r = residue_at(sp.catalog.one() / xi, ch, L4)
    assert r.is_constant() and r.constant_value() == 1
    assert residue_at(sp.parse("e[1,2]/k[1,3]"), ch, L4).is_zero()
    with pytest.raises(PoleOrderError):
        residue_at(sp.catalog.one() / (xi * xi), ch, L4)


def test_ym4_factorization():
    full = amplitude("YM", 4)
    adj = check_factorization("YM", make_channel(L4, [1, 2]), None, None, full)
    assert adj.ok and adj.pole_order == 1
    assert adj.constant == 1
    non = check_factorization("YM", make_channel(L4, [1, 3]), None, None, full)
    assert non.ok and non.pole_order == 0 and non.constant is None


def test_gr4_factorization_constant_is_channel_independent():
    full = amplitude("GR", 4)
    consts = set()
    for ch in channels(L4):
        r = check_factorization("GR", ch, None, None, full)
        assert r.ok and r.pole_order == 1, (str(ch), r.witness)
        consts.add(abs(r.constant))
    assert consts == {Fraction(1, 4)}
