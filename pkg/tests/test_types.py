"""Rank-bounded type fingerprints cross-validated against a full recursive
type construction and against sentence-level checking."""

import itertools
import json

import pytest

from relog.config import DEFAULT
from relog.core import Signature, Structure, glue, pad
from relog.errors import RankMismatch, RankTooLarge, SupportTooLarge, UnregisteredType
from relog.so import parse_so
from relog.types import (
    TypeRegistry,
    abs_forget,
    abs_glue,
    atom_diagram,
    contains_sentence,
    fingerprint_from_json,
    fingerprint_to_json,
    rank_of,
    type_of,
)

SIG_P = Signature([("P", 1)])
SIG_E = Signature([("E", 2)])
SIG_PC = Signature([("P", 1)], constants=["c"])


def mk_p(k, start=1):
    return Structure(SIG_P, {"P": {(start + i,) for i in range(k)}})


def mk_graph(edges, extra=()):
    return Structure(SIG_E, {"E": set(edges)}, extra=extra)


def mk_pc(points, cval):
    return Structure(SIG_PC, {"P": {(v,) for v in points}}, {"c": cval})


# --- an independently written full type construction --------------------------

def naive_diagram(s, elems, sets):
    """Quantifier-free description by renaming elements in order of first
    appearance; written separately from the library's diagram code."""
    seq = [s.const[c] for c in s.signature.constants] + list(elems)
    canon = {}
    names = []
    for v in seq:
        if v not in canon:
            canon[v] = len(canon)
        names.append(canon[v])
    facts = set()
    for name, _ in s.signature.relations:
        for t in s.rel[name]:
            if all(x in canon for x in t):
                facts.add((name,) + tuple(canon[x] for x in t))
    mem = tuple(frozenset(canon[v] for v in w if v in canon) for w in sets)
    return (tuple(names), frozenset(facts), mem)


def full_type(s, r, params, carrier):
    """The complete rank-r type: the diagram plus the set of child types for
    every element extension and every finite-set extension."""
    elems = [v for kind, v in params if kind == "el"]
    sets = [v for kind, v in params if kind == "set"]
    base = naive_diagram(s, elems, sets)
    if r == 0:
        return base
    el_children = frozenset(
        full_type(s, r - 1, params + [("el", w)], carrier) for w in carrier)
    set_children = set()
    for n in range(len(carrier) + 1):
        for chosen in itertools.combinations(carrier, n):
            set_children.add(
                full_type(s, r - 1, params + [("set", frozenset(chosen))], carrier))
    return (base, el_children, frozenset(set_children))


def naive_type(s, r, padding):
    carrier = sorted(s.dom | s.extra) + [object() for _ in range(padding)]
    return full_type(s, r, [], carrier)


# --- agreement between the fingerprint and the full construction --------------

def small_structures():
    out = [mk_p(k) for k in range(4)]
    two = [1, 2]
    for edges in itertools.chain.from_iterable(
            itertools.combinations([(a, b) for a in two for b in two], n)
            for n in range(3)):
        out.append(mk_graph(edges, extra=set(two) - {v for e in edges for v in e}))
    out.append(mk_pc([], 7))
    out.append(mk_pc([7], 7))
    out.append(mk_pc([7, 8], 7))
    out.append(mk_pc([8], 7))
    return out


class TestAgainstFullConstruction:
    @pytest.mark.parametrize("rank", [0, 1, 2])
    def test_fingerprint_equality_matches_full_type_equality(self, rank):
        structs = small_structures()
        pads = 2
        compact = [type_of(s, rank, padding=pads) for s in structs]
        full = [naive_type(s, rank, padding=pads) for s in structs]
        for i in range(len(structs)):
            for j in range(i + 1, len(structs)):
                if structs[i].signature != structs[j].signature:
                    continue
                assert (compact[i] == compact[j]) == (full[i] == full[j]), \
                    (rank, i, j)

    def test_same_type_implies_same_sentences(self):
        sentences = [parse_so(t, SIG_P) for t in [
            "ex x . P(x)",
            "all x . P(x)",
            "ex x . ex y . x != y & P(x) & P(y)",
            "ex2 X/1 . ex x . X(x) & P(x)",
            "all2 X/1 . ex x . X(x) -> ex y . X(y)",
            "ex x . all y . P(y) -> x = y",
        ]]
        structs = [mk_p(k) for k in range(4)] + [mk_p(2, start=50)]
        for s1, s2 in itertools.combinations(structs, 2):
            if type_of(s1, 2) == type_of(s2, 2):
                for phi in sentences:
                    assert check(s1, phi) == check(s2, phi), phi


def check(s, phi):
    from relog.so import check_so
    return check_so(s, phi, padding=4)


# --- counting power and saturation --------------------------------------------

class TestCountingPower:
    def test_rank2_counts_to_two(self):
        assert type_of(mk_p(1), 2) != type_of(mk_p(2), 2)
        assert type_of(mk_p(2), 2) == type_of(mk_p(3), 2)

    def test_rank1_does_not_count(self):
        assert type_of(mk_p(1), 1) == type_of(mk_p(2), 1)
        assert type_of(mk_p(0), 1) != type_of(mk_p(1), 1)

    def test_rank0_sees_only_constants(self):
        assert type_of(mk_p(0), 0) == type_of(mk_p(3), 0)
        assert type_of(mk_pc([7], 7), 0) != type_of(mk_pc([], 7), 0)

    def test_isomorphism_invariance(self):
        assert type_of(mk_p(2, start=1), 2) == type_of(mk_p(2, start=40), 2)
        g1 = mk_graph([(1, 2), (2, 1)])
        g2 = mk_graph([(8, 9), (9, 8)])
        assert type_of(g1, 2) == type_of(g2, 2)
        g3 = mk_graph([(8, 9), (8, 9)])
        assert type_of(g1, 2) != type_of(g3, 2)

    def test_padding_is_invisible_once_saturated(self):
        for s in [mk_p(2), mk_graph([(1, 2)]), mk_pc([7], 7)]:
            for r in (0, 1, 2):
                t = type_of(s, r)
                assert type_of(s, r, padding=2 ** r + 3) == t
                assert type_of(pad(s, 3), r) == t

    def test_unsaturated_padding_is_visible(self):
        s = mk_p(1)
        assert type_of(s, 1, padding=0) != type_of(s, 1, padding=1)
        assert type_of(s, 1, padding=1) == type_of(s, 1, padding=2)
        assert type_of(s, 2, padding=1) != type_of(s, 2, padding=2)
        assert type_of(s, 2, padding=2) == type_of(s, 2, padding=3)


# --- the diagram and fingerprint plumbing -------------------------------------

class TestDiagram:
    def test_equality_pattern(self):
        s = mk_pc([7], 7)
        names, eq, rels, members = atom_diagram(s, (7, 9))
        assert names == ("c",)
        assert eq == (0, 0, 2)
        assert rels == (("P", ((0,), (1,))),)
        assert members == ()

    def test_set_membership_positions(self):
        s = mk_p(2)
        _, _, _, members = atom_diagram(s, (1, 2), sets=(frozenset({2, 99}),))
        assert members == ((1,),)

    def test_constant_names_distinguish(self):
        a = Structure(Signature([("P", 1)], constants=("c",)), {"P": set()},
                      {"c": 1})
        b = Structure(Signature([("P", 1)], constants=("d",)), {"P": set()},
                      {"d": 1})
        assert type_of(a, 0) != type_of(b, 0)

    def test_rank_of_and_json(self):
        for r in (0, 1, 2):
            t = type_of(mk_p(2), r)
            assert rank_of(t) == r
            dumped = json.dumps(fingerprint_to_json(t))
            assert fingerprint_from_json(json.loads(dumped)) == t
        with pytest.raises(ValueError):
            rank_of(("rank9", ()))


# --- cutoffs ------------------------------------------------------------------

class TestCutoffs:
    def test_rank_too_large(self):
        with pytest.raises(RankTooLarge):
            type_of(mk_p(1), 3)

    def test_support_too_large(self):
        with pytest.raises(SupportTooLarge):
            type_of(mk_p(6), 1)
        limits = DEFAULT.with_overrides(type_support=10)
        assert type_of(mk_p(6), 1, limits=limits)


# --- the registry and abstract operations -------------------------------------

class TestRegistry:
    def test_first_representative_wins(self):
        reg = TypeRegistry()
        s1, s2 = mk_p(2), mk_p(2, start=30)
        t1 = reg.register(s1, 2)
        t2 = reg.register(s2, 2)
        assert t1 == t2
        assert reg.representative(t1) is s1
        assert len(reg) == 1
        assert t1 in reg

    def test_unregistered(self):
        reg = TypeRegistry()
        with pytest.raises(UnregisteredType):
            reg.representative(type_of(mk_p(1), 1))

    def test_glue_congruence(self):
        # The type of a glue depends only on the operand types: compute it
        # through representatives that are unrelated to the operands.
        reg = TypeRegistry()
        reg.register(mk_p(1, start=80), 2)
        reg.register(mk_p(2, start=90), 2)
        for k1, k2 in [(0, 1), (1, 1), (1, 2), (2, 2), (2, 3)]:
            s1, s2 = mk_p(k1), mk_p(k2, start=10)
            t = abs_glue(reg.register(s1, 2), reg.register(s2, 2), reg)
            assert t == type_of(glue(s1, s2), 2), (k1, k2)

    def test_glue_congruence_with_shared_constant(self):
        reg = TypeRegistry()
        pairs = [(mk_pc([7], 7), mk_pc([3], 3)),
                 (mk_pc([7], 7), mk_pc([], 3)),
                 (mk_pc([], 7), mk_pc([3, 4], 3))]
        for s1, s2 in pairs:
            t = abs_glue(reg.register(s1, 2), reg.register(s2, 2), reg)
            assert t == type_of(glue(s1, s2), 2)

    def test_glue_rank_mismatch(self):
        reg = TypeRegistry()
        t1 = reg.register(mk_p(1), 1)
        t2 = reg.register(mk_p(1), 2)
        with pytest.raises(RankMismatch):
            abs_glue(t1, t2, reg)

    def test_forget_congruence(self):
        reg = TypeRegistry()
        for s in [mk_pc([7], 7), mk_pc([7, 8], 7), mk_pc([8], 7), mk_pc([], 7)]:
            t = abs_forget(reg.register(s, 2), "c", reg)
            assert t == type_of(Structure(SIG_P, s.rel), 2)

    def test_registration_order_is_irrelevant_for_abstract_results(self):
        order_a = [mk_p(0), mk_p(1), mk_p(2)]
        order_b = [mk_p(2, start=60), mk_p(0), mk_p(1, start=70)]
        results = []
        for order in (order_a, order_b):
            reg = TypeRegistry()
            ts = [reg.register(s, 2) for s in order]
            results.append({(i, j): abs_glue(ts[i], ts[j], reg)
                            for i in range(3) for j in range(3)})
        # Compare by the operand types, not by list position.
        key_a = {(rank_of(t1), t1, t2): t
                 for ((i, j), t) in results[0].items()
                 for t1 in [type_of(order_a[i], 2)]
                 for t2 in [type_of(order_a[j], 2)]}
        key_b = {(rank_of(t1), t1, t2): t
                 for ((i, j), t) in results[1].items()
                 for t1 in [type_of(order_b[i], 2)]
                 for t2 in [type_of(order_b[j], 2)]}
        assert key_a == key_b


class TestContainsSentence:
    def test_verdicts(self):
        reg = TypeRegistry()
        t1 = reg.register(mk_p(1), 2)
        t2 = reg.register(mk_p(2), 2)
        two_points = parse_so("ex x . ex y . x != y & P(x) & P(y)", SIG_P)
        some_point = parse_so("ex x . P(x)", SIG_P)
        outside = parse_so("ex x . ~P(x)", SIG_P)
        assert not contains_sentence(t1, two_points, reg)
        assert contains_sentence(t2, two_points, reg)
        assert contains_sentence(t1, some_point, reg)
        assert contains_sentence(t1, outside, reg)

    def test_set_sentence(self):
        reg = TypeRegistry()
        t = reg.register(mk_p(1), 2)
        phi = parse_so("ex2 X/1 . ex x . X(x) & P(x)", SIG_P)
        assert contains_sentence(t, phi, reg)

    def test_rank_mismatch(self):
        reg = TypeRegistry()
        t = reg.register(mk_p(1), 1)
        phi = parse_so("ex x . ex y . x != y", SIG_P)
        with pytest.raises(RankMismatch):
            contains_sentence(t, phi, reg)
