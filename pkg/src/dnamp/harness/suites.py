"""Verification suites.  Every suite is deterministic and returns a CheckReport."""

from __future__ import annotations

import os
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path

from ..amplitudes import (
    Amplitude,
    AmplitudeError,
    amplitude,
    cache_dir,
    content_hash,
    golden_compare,
    golden_reference,
    read_cache,
    write_cache,
)
from ..diffcalc import (
    Derivation,
    DerivOp,
    annihilates,
    commutator,
    derivations,
    derivation_value,
    make_abc,
    make_xi_ops,
    make_xyz,
    operator_equal,
    theory_params,
    zero_operator,
)
from ..exactalg import rank
from ..factorization import (
    beta_derivation_table,
    beta_well_defined,
    channels,
    check_factorization,
    make_alpha,
    make_beta,
    master_for,
    pole_order,
    project_pi,
)
from ..kinspace import LegSet, build_space, var_name
from .report import CheckReport

THEORIES = ("YM", "GR")
ANNIHILATORS = ("X", "Y", "Z", "A", "B", "C")


def _theory(theory: str) -> str:
    th = theory.upper()
    if th not in THEORIES:
        raise ValueError(f"unknown theory {theory!r}")
    return th


# ---------------------------------------------------------------------------
# amplitudes, with the on-disk cache for the expensive ones
# ---------------------------------------------------------------------------

def cached_amplitude(theory: str, n: int, use_cache: bool | None = None) -> Amplitude:
    """Amplitude from the cache directory when present; built (and stored) otherwise.

    Caching is on for n >= 5 unless ``use_cache`` says otherwise.
    """
    th = _theory(theory)
    if use_cache is None:
        use_cache = n >= 5
    if not use_cache:
        return amplitude(th, n)
    path = cache_dir() / f"{th.lower()}{n}.amp"
    if path.exists():
        try:
            return read_cache(path)
        except (AmplitudeError, ValueError, KeyError):
            pass
    amp = amplitude(th, n)
    try:
        write_cache(amp, path)
    except OSError:
        pass
    return amp


def _hash_of(amp: Amplitude) -> str:
    return content_hash(amp.serialize())[:16]


# ---------------------------------------------------------------------------
# annihilation
# ---------------------------------------------------------------------------

def suite_annihilation(theory: str, n: int, ops=ANNIHILATORS, indices=None, amp: Amplitude | None = None) -> CheckReport:
    th = _theory(theory)
    if not 3 <= n <= 5:
        raise ValueError("annihilation checks cover 3 <= n <= 5")
    rep = CheckReport(f"annihilation {th} n={n}")
    amp = amp or cached_amplitude(th, n)
    rep.content_hashes[f"{th}{n}"] = _hash_of(amp)
    sp = amp.space
    legs = sp.legs.labels if indices is None else tuple(indices)
    for name in ops:
        targets = [None] if name == "Z" else legs
        for i in targets:
            if name in "XYZ":
                op = make_xyz(sp, name, i, theory=th)
            else:
                op = make_abc(sp, name, i)
            with rep.timed(f"{op.name} annihilates {th}{n}") as slot:
                res = annihilates(op, amp.value)
                slot["ok"], slot["witness"] = res.equal, res.witness or ""
    return rep


# ---------------------------------------------------------------------------
# commutator identities
# ---------------------------------------------------------------------------

def _families(sp, theory: str):
    """Yield (family, i, j, lhs, rhs) for the nine commutator identities."""
    n = sp.n
    L = sp.legs.labels
    D = derivations(sp)
    X = lambda i: make_xyz(sp, "X", i, theory=theory)
    Y = lambda i: make_xyz(sp, "Y", i, theory=theory)
    Z = make_xyz(sp, "Z", theory=theory)
    A = lambda i: make_abc(sp, "A", i)
    B = lambda i: make_abc(sp, "B", i)
    C = lambda i: make_abc(sp, "C", i)
    d = lambda kind, a, b: DerivOp(D(kind, a, b))
    zero = zero_operator(sp)
    for i in L:
        for j in L:
            dl = 1 if i == j else 0
            off = 1 - dl
            yield "[X,A]", i, j, commutator(X(i), A(j)), Fraction(-off, n - 1) * (d("e", i, j) @ X(j))
            rhs = Fraction(-2 * dl) * A(i)
            if off:
                rhs = rhs - (
                    Fraction(2, n - 2) * (d("c", j, i) @ X(j))
                    - d("c", i, j) @ X(i)
                    - d("e", i, j) @ Y(i)
                    + Fraction(1, n - 1) * (d("e", i, j) @ (Y(j) + Z))
                )
            yield "[X,B]", i, j, commutator(X(i), B(j)), rhs
            rhs = Fraction(-dl) * B(i) + Fraction(1, n) * B(i)
            if off:
                rhs = rhs + (d("k", i, j) @ X(i) + d("c", j, i) @ Y(i) - Fraction(1, n - 2) * (d("c", j, i) @ Z))
            yield "[X,C]", i, j, commutator(X(i), C(j)), rhs
            yield "[Y,A]", i, j, commutator(Y(i), A(j)), Fraction(-2 * dl) * A(j)
            yield "[Y,B]", i, j, commutator(Y(i), B(j)), Fraction(-dl) * B(j)
            yield "[Y,C]", i, j, commutator(Y(i), C(j)), zero
        yield "[Z,A]", None, i, commutator(Z, A(i)), zero
        yield "[Z,B]", None, i, commutator(Z, B(i)), Fraction(-1) * B(i)
        yield "[Z,C]", None, i, commutator(Z, C(i)), Fraction(-2) * C(i)


FAMILIES = ("[X,A]", "[X,B]", "[X,C]", "[Y,A]", "[Y,B]", "[Y,C]", "[Z,A]", "[Z,B]", "[Z,C]")


def suite_commutators(n: int, theory: str = "YM", families=FAMILIES) -> CheckReport:
    th = _theory(theory)
    if n not in (3, 4):
        raise ValueError("commutator checks cover n in {3, 4}")
    h, s = theory_params(th, n)
    rep = CheckReport(f"commutators n={n} h={h} s={s}")
    sp = build_space(n)
    for fam, i, j, lhs, rhs in _families(sp, th):
        if fam not in families:
            continue
        label = f"{fam} i={i} j={j}" if i is not None else f"{fam} j={j}"
        with rep.timed(label) as slot:
            res = operator_equal(lhs, rhs)
            slot["ok"], slot["witness"] = res.equal, res.witness or ""
    return rep


# ---------------------------------------------------------------------------
# residues
# ---------------------------------------------------------------------------

def suite_residues(theory: str, n: int, amp: Amplitude | None = None) -> CheckReport:
    th = _theory(theory)
    if n not in (4, 5):
        raise ValueError("residue checks cover n in {4, 5}")
    rep = CheckReport(f"residues {th} n={n}")
    amp = amp or cached_amplitude(th, n)
    legs = amp.legs
    sp = amp.space
    constants: dict[tuple, set] = {}
    n_poles = 0
    for ch in channels(legs):
        expected = 1 if (th == "GR" or ch.adjacent) else 0
        order = pole_order(amp.value, ch, sp)
        n_poles += order > 0
        rep.add(f"pole order at {ch} is {expected}", order == expected, f"order {order}")
        res = None
        with rep.timed(f"residue at {ch} factorizes") as slot:
            res = check_factorization(th, ch, None, None, amp)
            slot["ok"], slot["witness"] = res.ok, res.witness
            if res.constant is not None:
                constants.setdefault(ch.tier, set()).add(abs(res.constant))
        if res is not None and res.constant is not None:
            rep.items[-1].desc += f" (constant {res.constant})"
    expected_poles = len(channels(legs, adjacent_only=th == "YM"))
    rep.add(f"{expected_poles} channels carry a pole", n_poles == expected_poles, f"{n_poles} poles found")
    for tier, vals in sorted(constants.items()):
        rep.add(
            f"|constant| is channel independent for split sizes {tier[0]}|{tier[1]}",
            len(vals) == 1,
            "values " + ", ".join(str(v) for v in sorted(vals)),
        )
    return rep


# ---------------------------------------------------------------------------
# vanishing instance
# ---------------------------------------------------------------------------

def vanishing_system(n: int = 4, theory: str = "GR", degree: int = 4, use_x: bool = True):
    """Linear conditions on a generic degree-``degree`` polynomial in the e-variables.

    Returns (number of ansatz monomials, rank of the condition matrix).
    """
    th = _theory(theory)
    sp = build_space(n)
    evars = [v for v in sp.independent if sp.catalog.name(v).startswith("e[")]
    gens = [sp.catalog.gen(v) for v in evars]
    basis = []
    for combo in combinations_with_replacement(range(len(gens)), degree):
        m = sp.catalog.one()
        for x in combo:
            m = m * gens[x]
        basis.append(m)
    h, s = theory_params(th, n)
    ops = []
    for i in sp.legs.labels:
        if use_x:
            ops.append(make_xyz(sp, "X", i, theory=th))
        ops.append(make_xyz(sp, "Y", i, theory=th))
    ops.append(make_xyz(sp, "Z", theory=th).shifted(s))  # the q = 2 condition (Z + 2) u = 0
    rows: dict[tuple, dict[int, Fraction]] = {}
    for col, m in enumerate(basis):
        for k, op in enumerate(ops):
            img = op.apply(m)
            for exps, c in img.num.terms():
                row = rows.setdefault((k, tuple(sorted(exps.items()))), {})
                row[col] = row.get(col, Fraction(0)) + c
    mat = [[r.get(c, Fraction(0)) for c in range(len(basis))] for r in rows.values()]
    return len(basis), rank(mat) if mat else 0


def suite_vanishing_instance() -> CheckReport:
    rep = CheckReport("vanishing instance GR n=4 q=2 p=0")
    with rep.timed("ansatz in the 6 independent e-variables has 126 monomials") as slot:
        size, r = vanishing_system()
        slot["ok"], slot["witness"] = size == 126, f"{size} monomials"
    rep.add("X, Y and (Z+2) leave only u = 0", size - r == 0, f"solution dimension {size - r}")
    with rep.timed("without the X conditions the solution space is nonzero") as slot:
        size2, r2 = vanishing_system(use_x=False)
        slot["ok"], slot["witness"] = size2 - r2 > 0, f"solution dimension {size2 - r2}"
    return rep


# ---------------------------------------------------------------------------
# golden fixtures
# ---------------------------------------------------------------------------

def suite_golden(n: int = 4, theories=THEORIES) -> CheckReport:
    rep = CheckReport(f"golden n={n}")
    for th in theories:
        th = _theory(th)
        with rep.timed(f"{th}{n} is proportional to the reference form") as slot:
            amp = amplitude(th, n)
            r = golden_compare(amp, golden_reference(th, n))
            slot["ok"], slot["witness"] = True, ""
            rep.content_hashes[f"{th}{n}"] = _hash_of(amp)
        if rep.items[-1].ok:
            rep.items[-1].desc += f" (ratio {r})"
    return rep


# ---------------------------------------------------------------------------
# structural maps of the channels
# ---------------------------------------------------------------------------

def _all_identity(mp) -> tuple[bool, str]:
    for name in mp.source.catalog.names:
        if mp.assignment[name] != mp.source.sym(name):
            return False, f"{name} -> {mp.assignment[name]}"
    return True, ""


def _all_zero(mp) -> tuple[bool, str]:
    for name, p in mp.assignment.items():
        if not p.is_zero():
            return False, f"{name} -> {p}"
    return True, ""


def suite_structure(n: int) -> CheckReport:
    if n not in (4, 5):
        raise ValueError("structural checks cover n in {4, 5}")
    rep = CheckReport(f"structural maps n={n}")
    legs = LegSet.range(n)
    for ch in channels(legs):
        ms = master_for(ch, legs)
        xd = make_xi_ops(ms)
        tag = str(ch)
        with rep.timed(f"{tag}: Xi(xi) = 2 and Xi kills the perp coordinates") as slot:
            bad = [nm for nm, p in xd.perp.items() if xd.Xi.value_on(p) != 0]
            slot["ok"] = xd.Xi.value_on(xd.xi) == 2 and not bad
            slot["witness"] = f"Xi(xi) = {xd.Xi.value_on(xd.xi)}; nonzero on {bad[:3]}"
        with rep.timed(f"{tag}: sum of k-perp over J vanishes") as slot:
            acc = ms.catalog.zero()
            for a in ch.J:
                for b in ch.J:
                    acc = acc + xd.perp[var_name("k", a, b)]
            acc = ms.nf_poly(acc)
            slot["ok"], slot["witness"] = acc.is_zero(), str(acc)
        for side in "JK":
            other = "K" if side == "J" else "J"
            a, b = make_alpha(ms, side), make_beta(ms, side)
            with rep.timed(f"{tag}: alpha_{side} o beta_{side} = id") as slot:
                slot["ok"], slot["witness"] = _all_identity(b.then(a))
            with rep.timed(f"{tag}: alpha_{other} o beta_{side} = 0") as slot:
                slot["ok"], slot["witness"] = _all_zero(b.then(make_alpha(ms, other)))
            with rep.timed(f"{tag}: beta_{side} lands in the perp part") as slot:
                bad = [key for key, dv in beta_derivation_table(ms, side).items() if dv.value_on(xd.xi) != 0]
                slot["ok"], slot["witness"] = not bad, f"xi-component on {bad[:3]}"
            with rep.timed(f"{tag}: beta_{side} respects the relations of its source") as slot:
                ok, w = beta_well_defined(ms, side)
                slot["ok"], slot["witness"] = ok, w or ""
            with rep.timed(f"{tag}: alpha_{side} respects the relations of its target") as slot:
                ok, w = a.respects_relations()
                slot["ok"], slot["witness"] = ok, w or ""
        pi = project_pi(ms)
        with rep.timed(f"{tag}: pi o pi = pi") as slot:
            pp = pi.then(pi)
            bad = [nm for nm in ms.catalog.names if pp.assignment[nm] != pi.assignment[nm]]
            slot["ok"], slot["witness"] = not bad, f"differs on {bad[:3]}"
        want = (2 * len(ch.J) - 1) * (2 * len(ch.K) - 1)
        with rep.timed(f"{tag}: rank pi = {want}") as slot:
            r = pi.rank()
            slot["ok"], slot["witness"] = r == want, f"rank {r}"
        with rep.timed(f"{tag}: alpha o pi = 0 on both sides") as slot:
            okJ, wJ = _all_zero(pi.then(make_alpha(ms, "J")))
            okK, wK = _all_zero(pi.then(make_alpha(ms, "K")))
            slot["ok"], slot["witness"] = okJ and okK, wJ or wK
    return rep


# ---------------------------------------------------------------------------
# derivation calculus
# ---------------------------------------------------------------------------

def suite_derivations(n: int) -> CheckReport:
    rep = CheckReport(f"derivations n={n}")
    sp = build_space(n)
    D = derivations(sp)
    L = sp.legs.labels
    with rep.timed("values on every ambient variable match the commutator table") as slot:
        bad = None
        for kind in "kce":
            for i in L:
                for j in L:
                    d = D(kind, i, j)
                    for kind2 in "kce":
                        for a in L:
                            for b in L:
                                got = d.value_on(sp.sym(var_name(kind2, a, b)))
                                want = derivation_value(n, kind, i, j, kind2, a, b)
                                if got != want and bad is None:
                                    bad = f"D{kind}[{i},{j}] on {kind2}[{a},{b}]: {got} != {want}"
        slot["ok"], slot["witness"] = bad is None, bad or ""
    zero = Derivation(sp, {})

    def rel(desc, ok, w=""):
        rep.add(desc, ok, w)

    rel("D_k[i,j] = D_k[j,i]", all(D("k", i, j) == D("k", j, i) for i in L for j in L))
    rel("D_e[i,j] = D_e[j,i]", all(D("e", i, j) == D("e", j, i) for i in L for j in L))
    sums_k = all(sum((D("k", i, j) for i in L), zero).is_zero() for j in L)
    rel("sum_i D_k[i,j] = 0", sums_k)
    sums_c = all(sum((D("c", i, j) for i in L), zero).is_zero() for j in L)
    rel("sum_i D_c[i,j] = 0", sums_c)
    rel("phantom derivations vanish", all(D(kd, i, i).is_zero() for kd in "kce" for i in L))
    mat = [[D(kd, i, j).values.get(v, Fraction(0)) for v in sp.independent] for kd in "kce" for i in L for j in L]
    r = rank(mat)
    rel(f"derivations span a space of rank 2n(n-2) = {2 * n * (n - 2)}", r == 2 * n * (n - 2), f"rank {r}")
    return rep


def slow_tier_enabled() -> bool:
    return os.environ.get("DNAMP_SLOW", "") not in ("", "0")
