import pytest
from hypothesis import given, strategies as st

from relog import core
from relog.core import (
    Signature, Structure, compose, encode, encode_graph, forget, glue,
    is_guarded, isomorphic, mint, pad, parse_signature, parse_structure,
    structure_from_json, structure_to_json, structure_to_text, canonical_key,
)
from relog.errors import (
    MissingGuard, NotCompatible, NotLocallyDisjoint, ParseError, PortClash,
    UnknownConstant,
)

SIG = Signature([("E", 2)], guard="D")


def mk(edges, guard=(), sig=SIG, consts=None):
    rel = {"E": set(edges), "D": {(d,) for d in guard}}
    return Structure(sig, rel, consts)


def test_mint_is_monotone():
    a, b = mint(), mint()
    assert b > a


def test_support_is_derived_from_tuples_and_constants():
    a, b, c = mint(), mint(), mint()
    s = mk([(a, b)], guard=[c])
    assert s.dom == {a, b, c}
    assert s.carrier() == s.dom


def test_compose_unions_disjoint_interpretations():
    a, b, c = mint(), mint(), mint()
    s1 = mk([(a, b)])
    s2 = mk([(b, c)], guard=[a])
    s = compose(s1, s2)
    assert s.rel["E"] == {(a, b), (b, c)}
    assert s.rel["D"] == {(a,)}


def test_compose_rejects_overlapping_tuples():
    a, b = mint(), mint()
    s1 = mk([(a, b)])
    with pytest.raises(NotLocallyDisjoint) as exc:
        compose(s1, s1)
    assert exc.value.symbol == "E"


def test_compose_rejects_disagreeing_constants():
    sig = Signature([("R", 1)], constants=["c"])
    a, b = mint(), mint()
    s1 = Structure(sig, {"R": {(a,)}}, {"c": a})
    s2 = Structure(sig, {"R": {(b,)}}, {"c": b})
    with pytest.raises(NotCompatible) as exc:
        compose(s1, s2)
    assert exc.value.symbol == "c"


def test_compose_commutative_and_associative():
    a, b, c = mint(), mint(), mint()
    s1, s2, s3 = mk([(a, b)]), mk([(b, c)]), mk([], guard=[a, c])
    left = compose(compose(s1, s2), s3)
    right = compose(s1, compose(s2, s3))
    assert left == right == compose(compose(s3, s2), s1)


def test_compose_unit_is_empty_structure():
    a, b = mint(), mint()
    s = mk([(a, b)], guard=[a])
    assert compose(s, mk([])) == s


def test_glue_fuses_shared_constants():
    sig = Signature([("E", 2)], constants=["c"])
    a, b, x, y = mint(), mint(), mint(), mint()
    s1 = Structure(sig, {"E": {(a, b)}}, {"c": b})
    s2 = Structure(sig, {"E": {(x, y)}}, {"c": x})
    g = glue(s1, s2)
    # b and (renamed) x are fused: a -> b -> y' path
    assert len(g.dom) == 3
    assert len(g.rel["E"]) == 2
    seconds = {t[1] for t in g.rel["E"]}
    firsts = {t[0] for t in g.rel["E"]}
    assert g.const["c"] in seconds and g.const["c"] in firsts


def test_glue_without_shared_constants_is_disjoint_union():
    a, b = mint(), mint()
    s1 = mk([(a, b)])
    s2 = mk([(a, b)])
    g = glue(s1, s2)
    assert len(g.rel["E"]) == 2
    assert len(g.dom) == 4


def test_glue_differing_signatures_takes_union():
    sig1 = Signature([("R", 1)], constants=["c"])
    sig2 = Signature([("S", 1)], constants=["c"])
    a, b = mint(), mint()
    s1 = Structure(sig1, {"R": {(a,)}}, {"c": a})
    s2 = Structure(sig2, {"S": {(b,)}}, {"c": b})
    g = glue(s1, s2)
    assert set(g.signature.relation_names) == {"R", "S"}
    assert g.rel["R"] == g.rel["S"] == {(g.const["c"],)}


def test_glue_commutative_up_to_isomorphism():
    sig = Signature([("E", 2)], constants=["c"])
    a, b, x = mint(), mint(), mint()
    s1 = Structure(sig, {"E": {(a, b)}}, {"c": b})
    s2 = Structure(sig, {"E": {(x, x)}}, {"c": x})
    assert isomorphic(glue(s1, s2), glue(s2, s1))


def test_forget_drops_constant_but_keeps_tuples():
    sig = Signature([("R", 1)], constants=["c"])
    a = mint()
    s = Structure(sig, {"R": {(a,)}}, {"c": a})
    f = forget(s, "c")
    assert f.signature.constants == ()
    assert f.rel["R"] == {(a,)}
    with pytest.raises(UnknownConstant):
        forget(f, "c")


def test_encode_adds_ports_and_guards_them():
    a, b, c = mint(), mint(), mint()
    s = mk([(a, b)], guard=[a])
    e = encode(s, [b, c])
    assert e.const == {"p1": b, "p2": c}
    assert e.guard_set() == {a, b, c}
    assert e.rel["E"] == s.rel["E"]


def test_encode_rejects_port_inside_guard():
    a, b = mint(), mint()
    s = mk([(a, b)], guard=[a])
    with pytest.raises(PortClash):
        encode(s, [a])


def test_encode_requires_guard():
    sig = Signature([("E", 2)])
    a, b = mint(), mint()
    s = Structure(sig, {"E": {(a, b)}})
    with pytest.raises(MissingGuard):
        encode(s, [a])


def test_encode_injective_up_to_isomorphism():
    a, b, c = mint(), mint(), mint()
    s1 = mk([(a, b)], guard=[a, b])
    s2 = mk([(a, b), (b, c)], guard=[a, b, c])
    # different bases encode to non-isomorphic results, same base to isomorphic
    with pytest.raises(PortClash):
        encode(s1, [a])
    fresh1, fresh2 = mint(), mint()
    e1 = encode(s1, [fresh1])
    e2 = encode(s2, [fresh2])
    assert not isomorphic(e1, e2)
    assert isomorphic(e1, encode(s1, [mint()]))


def test_pad_extends_carrier_not_support():
    a, b = mint(), mint()
    s = mk([(a, b)])
    p = pad(s, 3)
    assert p.dom == s.dom
    assert len(p.extra) == 3
    assert len(p.carrier()) == len(s.dom) + 3


def test_is_guarded_requires_exact_equality():
    a, b = mint(), mint()
    assert is_guarded(mk([(a, b)], guard=[a, b]))
    assert not is_guarded(mk([(a, b)], guard=[a]))
    # an element in the guard but in no other relation breaks exactness
    assert not is_guarded(mk([], guard=[a]))
    assert is_guarded(mk([]))


def test_is_guarded_closed_under_compose():
    a, b, c = mint(), mint(), mint()
    s1 = mk([(a, b)], guard=[a])
    s2 = mk([(b, c)], guard=[b, c])
    s = compose(s1, s2)
    assert is_guarded(s)


def test_encode_graph_builds_vertex_and_edge_relations():
    g = encode_graph(["u", "v"], [("u", "v"), ("v", "u")])
    assert len(g.rel["V"]) == 2
    assert len(g.rel["E"]) == 2
    with pytest.raises(AssertionError):
        encode_graph(["u"], [("u", "w")])


def test_isomorphic_on_renamed_copy():
    a, b, c = mint(), mint(), mint()
    s1 = mk([(a, b), (b, c)], guard=[b])
    x, y, z = mint(), mint(), mint()
    s2 = mk([(x, y), (y, z)], guard=[y])
    s3 = mk([(x, y), (z, y)], guard=[y])
    assert isomorphic(s1, s2)
    assert not isomorphic(s1, s3)


def test_isomorphic_respects_constant_names():
    sig = Signature([("R", 1)], constants=["c", "d"])
    a, b = mint(), mint()
    s1 = Structure(sig, {"R": {(a,)}}, {"c": a, "d": b})
    s2 = Structure(sig, {"R": {(a,)}}, {"c": b, "d": a})
    assert not isomorphic(s1, s2)


def test_canonical_key_identifies_isomorphic_structures():
    a, b, c = mint(), mint(), mint()
    x, y, z = mint(), mint(), mint()
    s1 = mk([(a, b), (b, c)])
    s2 = mk([(z, y), (y, x)])
    assert canonical_key(s1) == canonical_key(s2)
    assert canonical_key(s1) != canonical_key(mk([(a, b), (c, b)]))


# --- text format --------------------------------------------------------------

SAMPLE = """
signature { rel E/2; guard D; const c1; }
structure { elem a b c; E = { (a,b) (b,c) }; D = { (a)(b)(c) }; c1 = a; }
"""


def test_parse_sample_structure():
    s, names = parse_structure(SAMPLE)
    assert s.signature.guard == "D"
    assert len(s.rel["E"]) == 2
    assert s.guard_set() == {names["a"], names["b"], names["c"]}
    assert s.const["c1"] == names["a"]


def test_parse_round_trip_through_text():
    s1, _ = parse_structure(SAMPLE)
    s2, _ = parse_structure(structure_to_text(s1))
    assert isomorphic(s1, s2)


def test_parse_reports_line_and_column():
    with pytest.raises(ParseError) as exc:
        parse_structure("signature { rel E/2; }\nstructure { E = { (a) }; }")
    assert exc.value.line == 2


def test_parse_signature_rejects_duplicates():
    with pytest.raises(ParseError):
        parse_signature("signature { rel E/2; rel E/1; }")


def test_structure_json_round_trip_preserves_identity_and_remints():
    s, _ = parse_structure(SAMPLE)
    data = structure_to_json(s)
    same = structure_from_json(data)
    assert same == s
    fresh = structure_from_json(data, remint=True)
    assert fresh != s
    assert isomorphic(fresh, s)


# --- property tests -----------------------------------------------------------

st_elems = st.lists(st.integers(0, 4), min_size=2, max_size=2)
st_edges = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=5)


@given(st_edges)
def test_pad_never_changes_support(edges):
    base = [mint() for _ in range(4)]
    s = mk([(base[a], base[b]) for a, b in edges])
    assert pad(s, 2).dom == s.dom


@given(st_edges, st.permutations(list(range(4))))
def test_isomorphic_under_renaming(edges, perm):
    base = [mint() for _ in range(4)]
    other = [mint() for _ in range(4)]
    s1 = mk([(base[a], base[b]) for a, b in edges])
    s2 = mk([(other[perm[a]], other[perm[b]]) for a, b in edges])
    assert isomorphic(s1, s2)
    assert canonical_key(s1) == canonical_key(s2)


@given(st_edges, st_edges)
def test_glue_result_signature_and_tuple_counts(e1, e2):
    base = [mint() for _ in range(4)]
    s1 = mk([(base[a], base[b]) for a, b in e1])
    s2 = mk([(base[a], base[b]) for a, b in e2])
    g = glue(s1, s2)  # no constants: disjoint union
    assert len(g.rel["E"]) == len(s1.rel["E"]) + len(s2.rel["E"])
    assert len(g.dom) == len(s1.dom) + len(s2.dom)
