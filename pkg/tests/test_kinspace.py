import random
from fractions import Fraction

import pytest

from dnamp.exactalg import UnknownVariableError, evaluate
from dnamp.kinspace import (
    KinSpaceError,
    LegSet,
    build_master,
    build_space,
    sample_point,
    to_normal_form,
    var_name,
)


def test_legset_validation():
    with pytest.raises(KinSpaceError):
        LegSet((1, 2))
    with pytest.raises(KinSpaceError):
        LegSet((1, 2, 2))
    assert LegSet.range(4).labels == (1, 2, 3, 4)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_dimension(n):
    sp = build_space(n)
    assert sp.dim == 2 * n * (n - 2)
    assert len(sp.catalog) == 3 * n * n


def test_build_space_examples():
    assert build_space(4).dim == 16
    assert build_space(5).dim == 30
    with pytest.raises(KinSpaceError):
        build_space(2)
    sp3 = build_space(3)
    assert sp3.parse("k[1,2]").is_zero()


def test_normal_form_examples():
    sp = build_space(5)
    a = sp.parse("c[1,2]")
    b = sp.parse("-c[3,2] - c[4,2] - c[5,2]")
    assert str(a) == str(b)
    assert sp.parse("e[2,1]") == sp.parse("e[1,2]")
    assert sp.parse("k[1,3] + k[2,3] + k[3,3] + k[4,3] + k[5,3]").is_zero()
    with pytest.raises(UnknownVariableError):
        sp.parse("q[1,2]")


def test_phantoms_vanish():
    sp = build_space(4)
    for kind in "kce":
        assert sp.parse(f"{kind}[2,2]").is_zero()


def test_independent_variables_n4():
    sp = build_space(4)
    names = [sp.catalog.name(v) for v in sp.independent]
    assert names == [
        "k[1,2]", "k[1,3]",
        "c[1,2]", "c[1,3]", "c[1,4]", "c[2,1]", "c[2,3]", "c[2,4]", "c[3,1]", "c[3,2]",
        "e[1,2]", "e[1,3]", "e[1,4]", "e[2,3]", "e[2,4]", "e[3,4]",
    ]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_relation_kernel_and_idempotence(n):
    sp = build_space(n)
    for rel in sp.relation_polys():
        assert sp.nf_poly(rel).is_zero()
    f = sp.parse("k[1,2]*c[2,3] + e[3,1]^2 - c[3,3]")
    assert to_normal_form(sp, f) == f
    assert to_normal_form(sp, to_normal_form(sp, f)) == to_normal_form(sp, f)


def _random_ambient(sp, rng, terms=4, degree=3):
    names = sp.catalog.names
    p = sp.catalog.zero()
    for _ in range(terms):
        m = sp.catalog.constant(Fraction(rng.randint(-9, 9), rng.randint(1, 5)))
        for _ in range(rng.randint(0, degree)):
            m = m * sp.catalog.gen(rng.choice(names))
        p = p + m
    return p


@pytest.mark.parametrize("n", [4, 5])
def test_representative_independence(n):
    sp = build_space(n)
    rng = random.Random(n)
    rels = sp.relation_polys()
    for _ in range(500):
        p = _random_ambient(sp, rng)
        q = _random_ambient(sp, rng, terms=2, degree=2)
        r = rng.choice(rels)
        assert sp.nf_poly(p + q * r) == sp.nf_poly(p)


def test_sample_point():
    sp = build_space(5)
    p1, p2 = sample_point(sp, 7), sample_point(sp, 7)
    assert p1 == p2
    assert sample_point(sp, 8) != p1
    for j in sp.legs:
        assert sum(p1[sp.var(var_name("k", i, j))] for i in sp.legs) == 0
        assert sum(p1[sp.var(var_name("c", i, j))] for i in sp.legs) == 0
        assert p1[sp.var(var_name("k", j, j))] == 0
    f = sp.parse("k[1,2]*e[3,4] + c[5,1]")
    assert evaluate(f, p1) == evaluate(sp.catalog.gen("k[1,2]") * sp.catalog.gen("e[3,4]") + sp.catalog.gen("c[5,1]"), p1)


@pytest.mark.parametrize("n", [4, 5])
def test_master_space(n):
    ms = build_master(n, (1, 2))
    assert ms.dim == 2 * n * n - 2 * n - 2
    assert ms.parse("c[1,*] + c[2,*]").is_zero()
    assert ms.parse(" + ".join(f"c[{a},*]" for a in range(3, n + 1))).is_zero()
    for rel in ms.relation_polys():
        assert ms.nf_poly(rel).is_zero()
    base = build_space(n)
    f = base.parse("k[1,2]/c[3,1]")
    g = ms.embed(f)
    assert str(g) == str(f)


def test_master_space_bad_split():
    with pytest.raises(KinSpaceError):
        build_master(4, (1,))
    with pytest.raises(KinSpaceError):
        build_master(4, (1, 2, 3, 4))
