"""Second-order checking: the SAT backend, parsing, and the three decision
routes cross-validated against an independently written evaluator."""

import itertools
import random

import pytest

from relog import _sat
from relog.config import DEFAULT
from relog.core import Signature, Store, Structure
from relog.errors import CarrierTooLarge, HintArityMismatch, ParseError
from relog.so import (
    And,
    Bot,
    Eq,
    ExistsFO,
    ExistsSO,
    ForallFO,
    ForallSO,
    Implies,
    Neq,
    Not,
    Or,
    Rel,
    SoAtom,
    Top,
    check_so,
    check_so_with_hint,
    conj,
    desugar,
    disj,
    eval_so,
    free_fo_vars,
    free_so_vars,
    parse_so,
    quantifier_rank,
    so_to_text,
)
from relog.slr import Cst, Var

SIG_E = Signature([("E", 2)])
SIG_PE = Signature([("P", 1), ("E", 2)])


def mk_e(edges, elems=(), sig=SIG_E):
    return Structure(sig, {"E": set(edges)}, extra=elems)


def mk_pe(points, edges):
    return Structure(SIG_PE, {"P": {(v,) for v in points}, "E": set(edges)})


# --- the SAT solver by itself -------------------------------------------------

def brute_force_sat(n_vars, clauses):
    for bits in itertools.product([False, True], repeat=n_vars):
        def holds(lit):
            v = bits[abs(lit) - 1]
            return v if lit > 0 else not v
        if all(any(holds(l) for l in c) for c in clauses):
            return True
    return False


class TestSatSolver:
    def test_single_unit(self):
        s = _sat.Solver()
        s.add_clause([1])
        assert s.solve()
        assert s.model()[1] is True

    def test_contradiction(self):
        s = _sat.Solver()
        s.add_clause([1])
        s.add_clause([-1])
        assert not s.solve()

    def test_small_sat_model(self):
        clauses = [[1, 2], [-1, 2], [1, -2], [-3], [3, 2]]
        s = _sat.Solver()
        for c in clauses:
            s.add_clause(c)
        assert s.solve()
        model = s.model()
        for c in clauses:
            assert any(model[abs(l)] == (l > 0) for l in c)

    def test_pigeonhole_unsat(self):
        # 4 pigeons in 3 holes: variable p*3+h+1 means pigeon p sits in hole h.
        s = _sat.Solver()
        def v(p, h):
            return p * 3 + h + 1
        for p in range(4):
            s.add_clause([v(p, h) for h in range(3)])
        for h in range(3):
            for p1 in range(4):
                for p2 in range(p1 + 1, 4):
                    s.add_clause([-v(p1, h), -v(p2, h)])
        assert not s.solve()

    def test_random_cnf_matches_brute_force(self):
        rng = random.Random(20240817)
        for _ in range(120):
            n = rng.randint(1, 8)
            m = rng.randint(1, 24)
            clauses = []
            for _ in range(m):
                width = rng.randint(1, 3)
                vs = rng.sample(range(1, n + 1), min(width, n))
                clauses.append([v if rng.random() < 0.5 else -v for v in vs])
            s = _sat.Solver()
            for c in clauses:
                s.add_clause(c)
            got = s.solve()
            assert got == brute_force_sat(n, clauses)
            if got:
                model = s.model()
                for c in clauses:
                    assert any(model[abs(l)] == (l > 0) for l in c)


# --- parsing and printing -----------------------------------------------------

class TestParseSo:
    def test_round_trips(self):
        for text in [
            "ex x . E(x,x)",
            "all x . P(x) -> ex y . E(x,y)",
            "ex2 X/1 . all x . X(x) | ~X(x)",
            "all2 Y/2 . ex x . ex y . Y(x,y)",
            "x = y & y != z",
            "true | false",
            "~(P(x) & P(y))",
        ]:
            phi = parse_so(text, SIG_PE)
            again = parse_so(so_to_text(phi), SIG_PE)
            assert phi == again

    def test_precedence(self):
        phi = parse_so("x = a | y = a & z = a -> w = a")
        assert isinstance(phi, Implies)
        assert isinstance(phi.left, Or)
        assert isinstance(phi.left.right, And)

    def test_implies_right_associative(self):
        phi = parse_so("x = x -> y = y -> z = z")
        assert isinstance(phi, Implies)
        assert isinstance(phi.right, Implies)

    def test_quantifier_scope_extends_right(self):
        phi = parse_so("P(x) & all y . Q(y) | R(y)")
        assert isinstance(phi, And)
        assert isinstance(phi.right, ForallFO)
        assert isinstance(phi.right.body, Or)

    def test_signature_resolution(self):
        sig = Signature([("E", 2)], constants=["nil"])
        phi = parse_so("ex x . E(x,nil) & X(x)", sig)
        body = phi.body
        assert isinstance(body.left, Rel)
        assert isinstance(body.left.args[1], Cst)
        assert isinstance(body.right, SoAtom)

    def test_relation_arity_checked(self):
        with pytest.raises(ParseError):
            parse_so("E(x)", SIG_E)

    def test_missing_dot(self):
        with pytest.raises(ParseError):
            parse_so("ex x E(x,x)", SIG_E)

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse_so("x = y )")

    def test_free_variable_collectors(self):
        phi = parse_so("ex x . E(x,y) & X(z) & ex2 W/1 . W(x)", SIG_E)
        assert free_fo_vars(phi) == {"y", "z"}
        assert free_so_vars(phi, SIG_E) == {"X": 1}

    def test_quantifier_rank_counts_both_orders(self):
        phi = parse_so("ex2 X/1 . all x . ex y . X(x) -> x = y", SIG_E)
        assert quantifier_rank(phi) == 3
        assert quantifier_rank(parse_so("x = y")) == 0

    def test_conj_disj_helpers(self):
        x = Var("x")
        assert isinstance(conj([]), Top)
        assert isinstance(disj([]), Bot)
        assert conj([Top(), Eq(x, x)]) == Eq(x, x)
        assert isinstance(conj([Eq(x, x), Bot()]), Bot)
        assert isinstance(disj([Top(), Eq(x, x)]), Top)


# --- an independently written evaluator used as the oracle --------------------

def naive_eval(s, phi, fo, so, carrier):
    """Direct recursion over the semantics, sets as frozensets of tuples.
    Deliberately separate from the library implementation."""
    def val(t):
        return s.const[t.name] if isinstance(t, Cst) else fo[t.name]

    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bot):
        return False
    if isinstance(phi, Rel):
        return tuple(map(val, phi.args)) in s.rel[phi.name]
    if isinstance(phi, SoAtom):
        return tuple(map(val, phi.args)) in so[phi.name]
    if isinstance(phi, Eq):
        return val(phi.left) == val(phi.right)
    if isinstance(phi, Neq):
        return val(phi.left) != val(phi.right)
    if isinstance(phi, Not):
        return not naive_eval(s, phi.body, fo, so, carrier)
    if isinstance(phi, And):
        return naive_eval(s, phi.left, fo, so, carrier) and \
            naive_eval(s, phi.right, fo, so, carrier)
    if isinstance(phi, Or):
        return naive_eval(s, phi.left, fo, so, carrier) or \
            naive_eval(s, phi.right, fo, so, carrier)
    if isinstance(phi, Implies):
        return naive_eval(s, Or(Not(phi.left), phi.right), fo, so, carrier)
    if isinstance(phi, ExistsFO):
        return any(naive_eval(s, phi.body, {**fo, phi.var: w}, so, carrier)
                   for w in carrier)
    if isinstance(phi, ForallFO):
        return all(naive_eval(s, phi.body, {**fo, phi.var: w}, so, carrier)
                   for w in carrier)
    if isinstance(phi, (ExistsSO, ForallSO)):
        cells = list(itertools.product(carrier, repeat=phi.arity))
        results = (naive_eval(s, phi.body, fo, {**so, phi.name: frozenset(rel)},
                              carrier)
                   for n in range(len(cells) + 1)
                   for rel in itertools.combinations(cells, n))
        return any(results) if isinstance(phi, ExistsSO) else all(results)
    raise TypeError(phi)


def naive_check(s, phi, padding=0):
    carrier = sorted(s.dom | s.extra) + [object() for _ in range(padding)]
    return naive_eval(s, phi, {}, {}, carrier)


# --- semantics ----------------------------------------------------------------

class TestCheckSo:
    def test_self_loop(self):
        phi = parse_so("ex x . E(x,x)", SIG_E)
        assert check_so(mk_e([(1, 1)]), phi)
        assert not check_so(mk_e([(1, 2)]), phi)

    def test_symmetry_sentence(self):
        phi = parse_so("all x . all y . E(x,y) -> E(y,x)", SIG_E)
        assert check_so(mk_e([(1, 2), (2, 1)]), phi)
        assert not check_so(mk_e([(1, 2)]), phi)

    def test_padding_provides_outside_elements(self):
        # Every support element is in P, but the universe is larger.
        s = mk_pe(points=[1, 2], edges=[])
        phi = parse_so("ex x . ~P(x)", SIG_PE)
        assert check_so(s, phi)
        assert not check_so(s, phi, padding=0)

    def test_default_padding_grows_with_rank(self):
        # Needs two distinct elements outside P.
        s = mk_pe(points=[1], edges=[])
        phi = parse_so("ex x . ex y . ~P(x) & ~P(y) & x != y", SIG_PE)
        assert check_so(s, phi)

    def test_store_binds_free_variables(self):
        s = mk_e([(1, 2)])
        phi = parse_so("ex y . E(x,y)", SIG_E)
        assert check_so(s, phi, store=Store({"x": 1}))
        assert not check_so(s, phi, store=Store({"x": 2}))
        with pytest.raises(ValueError):
            check_so(s, phi)

    def test_store_binds_free_so_names(self):
        s = mk_e([(1, 2)])
        phi = parse_so("all x . X(x) -> ex y . E(x,y)", SIG_E)
        good = Store({}, {"X": (1, {(1,)})})
        bad = Store({}, {"X": (1, {(2,)})})
        assert check_so(s, phi, store=good, padding=0)
        assert not check_so(s, phi, store=bad, padding=0)
        with pytest.raises(ValueError):
            check_so(s, phi, padding=0)
        with pytest.raises(HintArityMismatch):
            check_so(s, phi, store=Store({}, {"X": (2, {(1, 1)})}), padding=0)

    def test_bipartite_via_set_quantifier(self):
        phi = parse_so(
            "ex2 X/1 . all x . all y . "
            "E(x,y) -> ~(X(x) & X(y)) & ~(~X(x) & ~X(y))", SIG_E)
        path = mk_e([(1, 2), (2, 3)])
        triangle = mk_e([(1, 2), (2, 3), (3, 1)])
        square = mk_e([(1, 2), (2, 3), (3, 4), (4, 1)])
        assert check_so(path, phi, padding=0)
        assert not check_so(triangle, phi, padding=0)
        assert check_so(square, phi, padding=0)

    def test_connectivity_via_closed_sets(self):
        closed = ("ex2 X/1 . (ex x . X(x)) & (ex x . ~X(x)) & "
                  "(all x . all y . X(x) & E(x,y) -> X(y)) & "
                  "(all x . all y . X(x) & E(y,x) -> X(y))")
        disconnected = parse_so(closed, SIG_E)
        two_parts = mk_e([(1, 2), (3, 4)])
        linked = mk_e([(1, 2), (2, 3), (3, 4)])
        assert check_so(two_parts, disconnected, padding=0)
        assert not check_so(linked, disconnected, padding=0)

    def test_quantified_binary_relation(self):
        # A successor-like relation always exists; one avoiding every edge
        # while touching each vertex exists only when some pair is unlinked.
        s = mk_e([(1, 2), (2, 1)])
        total = parse_so(
            "ex2 Y/2 . all x . ex y . Y(x,y)", SIG_E)
        assert check_so(s, total, padding=0)

    def test_binary_quantifier_in_matrix_is_rejected_when_not_prefix(self):
        s = mk_e([(1, 2)])
        phi = parse_so("~ex2 Y/2 . Y(x,x) & ~Y(x,x)", SIG_E)
        assert check_so(s, phi, store=Store({"x": 1}), padding=0)

    def test_carrier_cutoff_for_set_quantifiers(self):
        big = mk_e([(i, i + 1) for i in range(1, 14)])
        phi = parse_so("~ex2 X/1 . ex x . X(x) & ~X(x)", SIG_E)
        with pytest.raises(CarrierTooLarge):
            check_so(big, phi, padding=0)

    def test_carrier_cutoff_for_relation_quantifiers(self):
        big = mk_e([(i, i + 1) for i in range(1, 10)])
        phi = parse_so("~ex2 Y/2 . ex x . Y(x,x) & ~Y(x,x)", SIG_E)
        with pytest.raises(CarrierTooLarge):
            check_so(big, phi, padding=0)

    def test_budget_exhaustion(self):
        s = mk_e([(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)])
        limits = DEFAULT.with_overrides(so_enum_budget=50)
        phi = parse_so("~ex2 X/1 . ex2 Z/1 . ex x . X(x) & Z(x)", SIG_E)
        with pytest.raises(CarrierTooLarge):
            check_so(s, phi, limits=limits, padding=0)

    def test_default_padding_guard_for_huge_rank(self):
        s = mk_e([(1, 2)])
        phi = parse_so("ex v . v = v")
        for _ in range(12):
            phi = ExistsFO("v%d" % quantifier_rank(phi), phi)
        with pytest.raises(CarrierTooLarge):
            check_so(s, phi)


class TestDesugar:
    FORMULAS = [
        "x = y -> y = x",
        "P(x) | ~P(y)",
        "all x . P(x) -> E(x,x)",
        "all2 X/1 . (ex x . X(x)) | (all x . ~X(x))",
        "x != y & true | false",
    ]

    def test_equivalent_on_small_structures(self):
        s = mk_pe(points=[1], edges=[(1, 2), (2, 2)])
        carrier = sorted(s.dom)
        for text in self.FORMULAS:
            phi = parse_so(text, SIG_PE)
            core = desugar(phi)
            for x in carrier:
                for y in carrier:
                    fo = {"x": x, "y": y}
                    assert naive_eval(s, phi, fo, {}, carrier) == \
                        naive_eval(s, core, fo, {}, carrier), text

    def test_core_has_no_sugar(self):
        banned = (Or, Implies, Neq, ForallFO, ForallSO)

        def assert_core(f):
            assert not isinstance(f, banned)
            for attr in ("body", "left", "right"):
                child = getattr(f, attr, None)
                if child is not None:
                    assert_core(child)

        for text in self.FORMULAS:
            assert_core(desugar(parse_so(text, SIG_PE)))


# --- the decision routes agree with each other and with the oracle ------------

def enumerate_graphs(vertices, max_edges=None):
    cells = [(a, b) for a in vertices for b in vertices]
    for n in range(len(cells) + 1):
        if max_edges is not None and n > max_edges:
            return
        for edges in itertools.combinations(cells, n):
            yield mk_e(edges, elems=vertices)


class TestRouteAgreement:
    PREFIX_FORMULAS = [
        # These start with an existential prefix, so the checker grounds them
        # and calls the SAT backend.
        "ex2 X/1 . (ex x . X(x)) & (all x . all y . X(x) & E(x,y) -> X(y))",
        "ex2 X/1 . all x . (X(x) -> ex y . E(x,y))"
        " & (~X(x) -> ~ex y . E(x,y))",
        "ex x . ex y . E(x,y) & ~E(y,x)",
        "ex2 Y/2 . all x . all y . E(x,y) -> Y(y,x)",
    ]

    def test_sat_route_matches_oracle(self):
        for s in enumerate_graphs([1, 2], max_edges=3):
            for text in self.PREFIX_FORMULAS:
                phi = parse_so(text, SIG_E)
                got = check_so(s, phi, padding=0)
                want = naive_check(s, phi, padding=0)
                assert got == want, (text, sorted(s.rel["E"]))

    def test_sat_route_matches_enumeration_route(self):
        # Double negation hides the prefix, forcing the recursive route.
        for s in enumerate_graphs([1, 2, 3], max_edges=2):
            for text in self.PREFIX_FORMULAS[:2]:
                phi = parse_so(text, SIG_E)
                assert check_so(s, phi, padding=0) == \
                    check_so(s, Not(Not(phi)), padding=0), text

    def test_enumeration_route_matches_oracle(self):
        formulas = [
            "all2 X/1 . (ex x . X(x) & P(x)) | (all x . ~(X(x) & P(x)))",
            "all x . ex y . E(x,y) | E(y,x) | x = y",
        ]
        points = [[], [1], [1, 2]]
        for pts in points:
            for s in [mk_pe(pts, [(1, 2)]), mk_pe(pts, [(1, 2), (2, 1)])]:
                for text in formulas:
                    phi = parse_so(text, SIG_PE)
                    assert check_so(s, phi, padding=0) == \
                        naive_check(s, phi, padding=0), (text, pts)

    def test_padding_matches_oracle_padding(self):
        s = mk_pe(points=[1, 2], edges=[])
        for text in ["ex x . ~P(x)", "all x . P(x)", "ex x . ex y . x != y"]:
            phi = parse_so(text, SIG_PE)
            assert check_so(s, phi, padding=2) == naive_check(s, phi, padding=2)


class TestHint:
    def test_hint_instantiates_prefix(self):
        s = mk_pe(points=[1, 3], edges=[])
        phi = parse_so("ex2 X/1 . all x . P(x) -> X(x)", SIG_PE)
        good = Store({}, {"X": (1, {(1,), (3,)})})
        bad = Store({}, {"X": (1, {(1,)})})
        assert check_so_with_hint(s, phi, good)
        assert not check_so_with_hint(s, phi, bad)

    def test_hint_arity_mismatch(self):
        s = mk_pe(points=[1], edges=[])
        phi = parse_so("ex2 X/1 . all x . P(x) -> X(x)", SIG_PE)
        with pytest.raises(HintArityMismatch):
            check_so_with_hint(s, phi, Store({}, {"X": (2, {(1, 1)})}))

    def test_partial_hint_keeps_remaining_quantifiers(self):
        s = mk_e([(1, 2), (2, 3)])
        phi = parse_so("ex x . ex2 X/1 . X(x) & (all y . X(y) -> y = x)",
                       SIG_E)
        # Bind only the first-order variable; the set stays quantified.
        assert check_so_with_hint(s, phi, Store({"x": 2}))
        # Bind only the set; the first-order variable stays quantified.
        assert check_so_with_hint(s, phi, Store({}, {"X": (1, {(3,)})}))
        assert not check_so_with_hint(s, phi, Store({}, {"X": (1, {(1,), (3,)})}))

    def test_hint_elements_join_carrier(self):
        s = mk_pe(points=[1], edges=[])
        phi = parse_so("ex x . ~P(x)", SIG_PE)
        assert check_so_with_hint(s, phi, Store({"x": 77}))
        assert not check_so_with_hint(s, phi, Store({"x": 1}))

    def test_full_hint_on_binary_prefix(self):
        s = mk_e([(1, 2), (2, 3)])
        phi = parse_so("ex2 Y/2 . all x . all y . E(x,y) -> Y(y,x)", SIG_E)
        flipped = Store({}, {"Y": (2, {(2, 1), (3, 2)})})
        assert check_so_with_hint(s, phi, flipped)
        assert not check_so_with_hint(s, phi, Store({}, {"Y": (2, set())}))


class TestEvalErrors:
    def test_unbound_fo_variable(self):
        s = mk_e([(1, 2)])
        phi = parse_so("E(x,y)", SIG_E)
        with pytest.raises(ValueError):
            check_so(s, phi, store=Store({"x": 1}))

    def test_so_atom_arity_checked_at_eval(self):
        s = mk_e([(1, 2)])
        phi = ExistsSO("X", 1, SoAtom("X", [Var("x"), Var("y")]))
        with pytest.raises(HintArityMismatch):
            check_so(s, phi, store=Store({"x": 1, "y": 2}), padding=0)
