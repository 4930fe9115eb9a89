"""Compilers between the satisfaction worlds.

gen_twsid builds a definition system whose guarded models over a signature are
exactly the structures of treewidth at most k.  gen_twformsid refines it with
rank-r behaviours (r = quantifier rank of a fixed sentence) so the guarded
models are the treewidth-bounded structures satisfying that sentence.
slr_to_so translates satisfaction of a definition system into an equivalent
second-order sentence over the same signature, and extract_certificate
assembles the sentence's existential witnesses from a derivation, so positive
answers can be re-checked without search.
"""

import itertools

from .config import DEFAULT
from .core import Signature, Store, Structure, mint, mint_many, port_name
from .errors import MissingGuard, RankTooLarge, TypeBlowup
from .slr import (
    Cst,
    Emp,
    Exists,
    PredAtom,
    RelAtom,
    Rule,
    Sid,
    Star,
    Var,
    binders,
    pred_atoms,
    rel_atoms,
    _iter_eqs,
)
from . import so
from .types import TypeRegistry, contains_sentence, abs_forget, abs_glue
from .so import Rel, check_so, free_fo_vars, free_so_vars, quantifier_rank


# --- width-k system -----------------------------------------------------------

MAIN = "A"


def _params(n):
    return [f"x{i}" for i in range(1, n + 1)]


def top_name(k):
    """Entry-point predicate of the width-k system."""
    return f"A_{k}"


def side_name(m):
    """Predicate deriving structures whose support has exactly m elements."""
    return f"B_{m}"


def _guard_close(guard, names, inner):
    """ex names . guard(n1) * ... * guard(nm) * inner"""
    body = inner
    for x in reversed(names):
        body = Star(RelAtom(guard, (Var(x),)), body)
    for x in reversed(names):
        body = Exists(x, body)
    return body


def _leaf_rules(head, names, sigma):
    """One rule per relation symbol and per placement of its positions on the
    parameters."""
    out = []
    vs = [Var(x) for x in names]
    for rel, arity in sigma.relations:
        if rel == sigma.guard:
            continue
        for pick in itertools.product(range(len(names)), repeat=arity):
            out.append(Rule(head, names, RelAtom(rel, tuple(vs[j] for j in pick))))
    return out


def gen_twsid(k, sigma, with_corner_cases=False):
    """Definition system whose guarded models over sigma are the structures of
    treewidth at most k.

    The main predicate A carries k+1 parameters; its rules split the structure
    in two over the same parameters, trade one parameter for a freshly guarded
    element, or consume one relation tuple placed on the parameters.  The
    nullary entry point closes the last k+1 guarded elements.  Corner rules
    (optional) cover the empty structure and supports of at most k elements
    via side predicates that never swap parameters."""
    if k < 1:
        raise ValueError("width must be at least 1")
    if sigma.guard is None:
        raise MissingGuard("the generated rules consume guard tuples")
    if sigma.constants:
        raise ValueError("constant-free signatures only")
    xs = _params(k + 1)
    vxs = tuple(Var(x) for x in xs)
    rules = [Rule(MAIN, xs, Star(PredAtom(MAIN, vxs), PredAtom(MAIN, vxs)))]
    for i in range(k + 1):
        args = list(vxs)
        args[i] = Var("y")
        rules.append(Rule(MAIN, xs,
                          Exists("y", Star(RelAtom(sigma.guard, (Var("y"),)),
                                           PredAtom(MAIN, tuple(args))))))
    rules.extend(_leaf_rules(MAIN, xs, sigma))
    rules.append(Rule(top_name(k), [],
                      _guard_close(sigma.guard, xs, PredAtom(MAIN, vxs))))
    if with_corner_cases:
        rules.append(Rule(top_name(k), [], Emp()))
        for m in range(1, k + 1):
            ys = _params(m)
            vys = tuple(Var(y) for y in ys)
            rules.append(Rule(side_name(m), ys,
                              Star(PredAtom(side_name(m), vys),
                                   PredAtom(side_name(m), vys))))
            rules.extend(_leaf_rules(side_name(m), ys, sigma))
            rules.append(Rule(top_name(k), [],
                              _guard_close(sigma.guard, ys,
                                           PredAtom(side_name(m), vys))))
    return Sid(rules, signature=sigma)


# --- width-k system refined by a sentence -------------------------------------

def type_pred_name(index):
    return f"A_T{index}"


def side_type_pred_name(m, index):
    return f"B_{m}_T{index}"


def form_top_name(k):
    """Entry point of the sentence-refined width-k system."""
    return f"A_{k}_phi"


def _mentioned_relations(phi, sigma):
    """Relation symbols of sigma that occur in the sentence."""
    used = set()

    def walk(f):
        if isinstance(f, Rel):
            used.add(f.name)
        for attr in ("body", "left", "right"):
            child = getattr(f, attr, None)
            if isinstance(child, so.SoFormula):
                walk(child)

    walk(phi)
    return [(name, ar) for name, ar in sigma.relations if name in used]


class _TypeWorld:
    """Fixpoint of reachable behaviours for one port count.

    Every behaviour is the type of the tuples consumed so far together with
    guard tuples on the current parameter values, the parameter values being
    named by port constants.  Gluing two behaviours models the splitting rule;
    forgetting a port and gluing a fresh guarded element models the swap.

    Behaviours are typed over the sub-signature in ``type_rels`` (the
    relations the target sentence mentions).  Gluing and forgetting commute
    with dropping the unmentioned relations, and a sentence is decided by the
    type over the relations it mentions, so the refinement stays exact while
    the reachable behaviour count stays small.  Tracking the full signature
    instead is sound but useless in practice: already one binary relation at
    rank 1 makes the reachable set explode combinatorially (each forgotten
    element freezes an arbitrary adjacency pattern against the current ports,
    and compositions take unions of pattern sets)."""

    def __init__(self, sigma, rank, nports, registry, max_types, swaps,
                 type_rels=None):
        self.sigma = sigma
        self.rank = rank
        self.nports = nports
        self.registry = registry
        self.max_types = max_types
        self.swaps = swaps
        self.type_rels = (tuple(sigma.relations) if type_rels is None
                          else tuple(type_rels))
        self._typed = {name for name, _ in self.type_rels}
        self.ports = [port_name(i) for i in range(1, nports + 1)]
        self.seeds = {}      # (relation, placement) -> fingerprint
        self.known = []      # discovery order
        self._seen = set()
        self.comp_of = {}    # unordered fingerprint pair -> fingerprint
        self.swap_of = {}    # (fingerprint, port position) -> fingerprint
        if swaps:
            self.rho = [self._fresh_port_type(i) for i in range(1, nports + 1)]

    def _sig_with_ports(self, names):
        return Signature(self.type_rels, names)

    def _fresh_port_type(self, i):
        """Behaviour of a single freshly guarded element sitting at port i."""
        v = mint()
        rels = {}
        if self.sigma.guard in self._typed:
            rels[self.sigma.guard] = {(v,)}
        s = Structure(self._sig_with_ports([port_name(i)]), rels,
                      {port_name(i): v})
        return self.registry.register(s, self.rank)

    def _seed_structure(self, rel, pick):
        elems = mint_many(self.nports)
        rels = {}
        if rel in self._typed:
            rels[rel] = {tuple(elems[j] for j in pick)}
        if self.sigma.guard in self._typed:
            rels[self.sigma.guard] = {(e,) for e in elems}
        const = dict(zip(self.ports, elems))
        return Structure(self._sig_with_ports(self.ports), rels, const)

    def _add(self, fp):
        if fp not in self._seen:
            self._seen.add(fp)
            self.known.append(fp)
            if len(self.known) > self.max_types:
                raise TypeBlowup(
                    f"more than {self.max_types} reachable behaviours")

    def close(self):
        for rel, arity in self.sigma.relations:
            if rel == self.sigma.guard:
                continue
            for pick in itertools.product(range(self.nports), repeat=arity):
                fp = self.registry.register(self._seed_structure(rel, pick),
                                            self.rank)
                self.seeds[(rel, pick)] = fp
                self._add(fp)
        i = 0
        while i < len(self.known):
            t = self.known[i]
            if self.swaps:
                for p in range(self.nports):
                    res = abs_glue(abs_forget(t, self.ports[p], self.registry),
                                   self.rho[p], self.registry)
                    self.swap_of[(t, p)] = res
                    self._add(res)
            for j in range(i + 1):
                u = self.known[j]
                res = abs_glue(t, u, self.registry)
                self.comp_of[frozenset_pair(t, u)] = res
                self._add(res)
            i += 1

    def names(self, label):
        """Deterministic predicate name per behaviour, by fingerprint order."""
        return {fp: label(n) for n, fp in enumerate(sorted(self.known))}


def frozenset_pair(a, b):
    return (a, b) if a <= b else (b, a)


def _emit_world_rules(world, name_of, sigma):
    """Rules of one refined predicate family, in a deterministic order:
    splits, then swaps, then tuple consumers."""
    xs = _params(world.nports)
    vxs = tuple(Var(x) for x in xs)
    rules = []
    for (a, b), res in sorted(world.comp_of.items()):
        rules.append(Rule(name_of[res], xs,
                          Star(PredAtom(name_of[a], vxs),
                               PredAtom(name_of[b], vxs))))
    for (t, p), res in sorted(world.swap_of.items()):
        args = list(vxs)
        args[p] = Var("y")
        rules.append(Rule(name_of[res], xs,
                          Exists("y", Star(RelAtom(sigma.guard, (Var("y"),)),
                                           PredAtom(name_of[t], tuple(args))))))
    for (rel, pick), fp in sorted(world.seeds.items()):
        rules.append(Rule(name_of[fp], xs,
                          RelAtom(rel, tuple(vxs[j] for j in pick))))
    return rules


def gen_twformsid(k, phi, sigma, with_corner_cases=False, limits=DEFAULT):
    """Definition system whose guarded models over sigma are the structures of
    treewidth at most k that satisfy the sentence phi.

    The rules mirror gen_twsid, but the main predicate splits into one copy
    per reachable behaviour; the entry point keeps only behaviours whose
    structures satisfy phi.  Behaviours are typed over the relations phi
    actually mentions (see _TypeWorld); sentences that mention a binary
    relation can still make the reachable behaviour count exceed
    limits.max_types, which raises TypeBlowup."""
    if k < 1:
        raise ValueError("width must be at least 1")
    if sigma.guard is None:
        raise MissingGuard("the generated rules consume guard tuples")
    if sigma.constants:
        raise ValueError("constant-free signatures only")
    if isinstance(phi, str):
        phi = so.parse_so(phi, sigma)
    if free_fo_vars(phi) or free_so_vars(phi, sigma):
        raise ValueError("a closed sentence is required")
    rank = quantifier_rank(phi)
    if rank > limits.type_rank:
        raise RankTooLarge(
            f"sentence has quantifier rank {rank}, supported bound is "
            f"{limits.type_rank}")
    # Representatives grow as behaviours compose, so the per-structure support
    # cutoff is lifted inside the fixpoint; the behaviour-count cutoff is what
    # bounds the work here.
    lim = limits.with_overrides(type_support=max(limits.type_support, 10_000))
    registry = TypeRegistry(lim)
    type_rels = _mentioned_relations(phi, sigma)

    world = _TypeWorld(sigma, rank, k + 1, registry, limits.max_types, True,
                       type_rels)
    world.close()
    name_of = world.names(type_pred_name)

    rules = _emit_world_rules(world, name_of, sigma)
    xs = _params(k + 1)
    vxs = tuple(Var(x) for x in xs)
    accepted = [fp for fp in sorted(world.known)
                if contains_sentence(fp, phi, registry)]
    for fp in accepted:
        rules.append(Rule(form_top_name(k), [],
                          _guard_close(sigma.guard, xs,
                                       PredAtom(name_of[fp], vxs))))

    declared = {form_top_name(k): 0}
    if with_corner_cases:
        empty = Structure(sigma)
        if check_so(empty, phi, limits=lim, padding=2 ** rank):
            rules.append(Rule(form_top_name(k), [], Emp()))
        for m in range(1, k + 1):
            side = _TypeWorld(sigma, rank, m, registry, limits.max_types,
                              False, type_rels)
            side.close()
            side_names = side.names(lambda n, m=m: side_type_pred_name(m, n))
            rules.extend(_emit_world_rules(side, side_names, sigma))
            ys = _params(m)
            vys = tuple(Var(y) for y in ys)
            for fp in sorted(side.known):
                if contains_sentence(fp, phi, registry):
                    rules.append(Rule(form_top_name(k), [],
                                      _guard_close(sigma.guard, ys,
                                                   PredAtom(side_names[fp],
                                                            vys))))
    return Sid(rules, declared, signature=sigma)


# --- translation into second-order logic --------------------------------------

class SlotFlowGraph:
    """Static value-flow graph over (rule index, variable) slots.

    Edges record parameter passing from a rule's predicate-atom arguments to
    the possible callee rules' parameters, plus equality links inside one
    rule.  The translation quantifies one binary flow variable per edge; the
    closure is the induced equivalence used by diagnostics and tests."""

    def __init__(self, sid):
        self.sid = sid
        self.slots = []
        for i, rule in enumerate(sid.rules):
            for v in list(rule.params) + binders(rule.body):
                self.slots.append((i, v))
        slot_set = set(self.slots)
        self.pass_edges = []   # ((i, var), (r, param), child position)
        self.eq_edges = []     # ((i, var), (i, var))
        for i, rule in enumerate(sid.rules):
            for j, atom in enumerate(pred_atoms(rule.body), start=1):
                for r in sid.rules_by_head.get(atom.name, ()):
                    callee = sid.rules[r]
                    for t, arg in enumerate(atom.args):
                        if isinstance(arg, Var):
                            edge = ((i, arg.name), (r, callee.params[t]), j)
                            assert edge[0] in slot_set and edge[1] in slot_set
                            self.pass_edges.append(edge)
            for f, is_eq in _iter_eqs(rule.body):
                if is_eq and isinstance(f.left, Var) and isinstance(f.right, Var):
                    self.eq_edges.append(((i, f.left.name), (i, f.right.name)))

    def flow_pairs(self):
        """Deduplicated directed slot pairs that carry a flow variable."""
        seen = []
        for a, b, _ in self.pass_edges:
            if (a, b) not in seen:
                seen.append((a, b))
        for a, b in self.eq_edges:
            if (a, b) not in seen:
                seen.append((a, b))
        return seen

    def closure(self):
        """Symmetric-transitive-reflexive closure of the edges, as a set of
        slot pairs."""
        parent = {s: s for s in self.slots}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b, _ in self.pass_edges:
            parent[find(a)] = find(b)
        for a, b in self.eq_edges:
            parent[find(a)] = find(b)
        groups = {}
        for s in self.slots:
            groups.setdefault(find(s), []).append(s)
        pairs = set()
        for members in groups.values():
            for a in members:
                for b in members:
                    pairs.add((a, b))
        return pairs


def _fresh_name(base, taken):
    name = base
    while name in taken:
        name = name + "x"
    taken.add(name)
    return name


class _Layout:
    """Variable naming shared by the translation and the certificate."""

    def __init__(self, sid, atom):
        if atom.name not in sid.arities:
            raise ValueError(f"unknown predicate {atom.name!r}")
        if len(atom.args) != sid.arities[atom.name]:
            raise ValueError(f"query atom {atom.name} has the wrong arity")
        for a in atom.args:
            if not isinstance(a, Var):
                raise ValueError("query atom arguments must be variables")
        if len({a.name for a in atom.args}) != len(atom.args):
            raise ValueError("query atom arguments must be pairwise distinct")
        for rule in sid.rules:
            names = [a.name for a in rel_atoms(rule.body)]
            if len(names) != len(set(names)):
                raise ValueError(
                    f"rule {rule.head}: one relation atom per symbol required "
                    "(apply split_relation_atoms first)")
            for p in pred_atoms(rule.body):
                if not all(isinstance(a, Var) for a in p.args):
                    raise ValueError(
                        f"rule {rule.head}: predicate-atom arguments must be "
                        "variables")
        self.sid = sid
        self.atom = atom
        self.flow = SlotFlowGraph(sid)
        taken = {a.name for a in atom.args}
        taken |= set(sid.signature.relation_names) | set(sid.signature.constants)
        taken |= {"true", "false", "emp"}
        self.root = _fresh_name("x", taken)
        self.fanout = max((len(pred_atoms(r.body)) for r in sid.rules),
                          default=0)
        self.rule_var = {i: _fresh_name(f"X{i}", taken)
                         for i in range(len(sid.rules))}
        self.edge_var = {j: _fresh_name(f"Y{j}", taken)
                         for j in range(1, self.fanout + 1)}
        self.slot_var = {s: _fresh_name(f"Z_{s[0]}_{s[1]}", taken)
                         for s in self.flow.slots}
        self.flow_var = {p: _fresh_name(f"F_{p[0][0]}_{p[0][1]}__{p[1][0]}_{p[1][1]}",
                                        taken)
                         for p in self.flow.flow_pairs()}
        self.node_u = _fresh_name("u", taken)
        self.node_v = _fresh_name("v", taken)
        self.node_w = _fresh_name("w", taken)
        max_ar = max([ar for _, ar in sid.signature.relations] + [2])
        self.element_vars = [_fresh_name(f"e{t}", taken)
                             for t in range(1, max_ar + 1)]
        self.closure_set = _fresh_name("W", taken)
        self.taken = taken

    def so_prefix(self):
        items = [(self.rule_var[i], 1) for i in sorted(self.rule_var)]
        items += [(self.edge_var[j], 2) for j in sorted(self.edge_var)]
        items += [(self.slot_var[s], 2) for s in sorted(self.slot_var)]
        items += [(self.flow_var[p], 2) for p in sorted(self.flow_var)]
        return items


def _forall(names, body):
    for n in reversed(names):
        body = so.ForallFO(n, body)
    return body


def _exists(names, body):
    for n in reversed(names):
        body = so.ExistsFO(n, body)
    return body


def _implies(left, right):
    if isinstance(left, so.Top):
        return right
    if isinstance(left, so.Bot):
        return so.Top()
    if isinstance(right, so.Top):
        return so.Top()
    return so.Implies(left, right)


def build_tree_formula(sid, root_pred, layout=None):
    """Shape constraints on the node labels X_i and child edges Y_j: the root
    is labelled by a rule of the root predicate and has no incoming edge,
    labels are disjoint, every labelled node has exactly the out-edges its
    rule requires, edges lead between labelled nodes, every non-root node has
    a unique incoming edge, and every labelled node is reachable from the
    root (every set containing the root and closed under edges contains all
    labelled nodes)."""
    if layout is None:
        layout = _Layout(sid, PredAtom(root_pred,
                                       [Var(f"v{i}") for i in
                                        range(sid.arities[root_pred])]))
    L = layout
    x = Var(L.root)
    u, v, w = L.node_u, L.node_v, L.node_w
    vu, vv, vw = Var(u), Var(v), Var(w)

    def X(i, term):
        return so.SoAtom(L.rule_var[i], (term,))

    def Y(j, s, t):
        return so.SoAtom(L.edge_var[j], (s, t))

    clauses = []
    root_rules = L.sid.rules_by_head.get(root_pred, [])
    clauses.append(so.disj([X(i, x) for i in root_rules]))
    for j in L.edge_var:
        clauses.append(_forall([u], so.Not(Y(j, vu, x))))
    n_rules = len(L.sid.rules)
    for i in range(n_rules):
        for i2 in range(i + 1, n_rules):
            clauses.append(_forall([u], so.Not(so.And(X(i, vu), X(i2, vu)))))
    for i, rule in enumerate(L.sid.rules):
        atoms = pred_atoms(rule.body)
        for j, atom in enumerate(atoms, start=1):
            target = so.disj([X(r, vv)
                              for r in L.sid.rules_by_head.get(atom.name, [])])
            clauses.append(_forall([u], _implies(
                X(i, vu), _exists([v], so.And(Y(j, vu, vv), target)))))
        for j in range(len(atoms) + 1, L.fanout + 1):
            clauses.append(_forall([u, v], _implies(
                X(i, vu), so.Not(Y(j, vu, vv)))))
    labelled_u = so.disj([X(i, vu) for i in range(n_rules)])
    labelled_v = so.disj([X(i, vv) for i in range(n_rules)])
    for j in L.edge_var:
        clauses.append(_forall([u, v], _implies(
            Y(j, vu, vv), so.And(labelled_u, labelled_v))))
        clauses.append(_forall([u, v, w], _implies(
            so.And(Y(j, vu, vv), Y(j, vu, vw)), so.Eq(vv, vw))))
    for j in L.edge_var:
        for j2 in L.edge_var:
            if j2 < j:
                continue
            body = so.And(Y(j, vu, vv), Y(j2, vw, vv))
            head = so.Eq(vu, vw) if j == j2 else so.Bot()
            clauses.append(_forall([u, v, w], _implies(body, head)))
    W = L.closure_set
    closed = so.conj([_forall([u, v], _implies(
        so.And(so.SoAtom(W, (vu,)), Y(j, vu, vv)), so.SoAtom(W, (vv,))))
        for j in L.edge_var])
    covers = so.conj([_forall([u], _implies(X(i, vu), so.SoAtom(W, (vu,))))
                      for i in range(n_rules)])
    clauses.append(so.ForallSO(W, 1, _implies(
        so.And(so.SoAtom(W, (x,)), closed), covers)))
    return so.conj(clauses)


def build_frame_formula(sid, atom, layout=None):
    """Value constraints: each slot variable is a function defined exactly on
    its rule's nodes, every node's relation atoms are realized by tuples of
    the structure, no tuple is consumed twice, every tuple is consumed,
    equalities and disequalities inside rules hold, values flow along the
    parameter-passing edges, and the root's parameters equal the query
    arguments."""
    if layout is None:
        layout = _Layout(sid, atom)
    L = layout
    x = Var(L.root)
    u, v = L.node_u, L.node_v
    vu, vv = Var(u), Var(v)
    e, e2 = L.element_vars[0], L.element_vars[1]
    ve, ve2 = Var(e), Var(e2)

    def X(i, term):
        return so.SoAtom(L.rule_var[i], (term,))

    def Y(j, s, t):
        return so.SoAtom(L.edge_var[j], (s, t))

    def Z(slot, node, val):
        return so.SoAtom(L.slot_var[slot], (node, val))

    def term_value(i, arg, node, val):
        """val is the value of this atom argument at the node."""
        if isinstance(arg, Cst):
            return so.Eq(val, arg)
        return Z((i, arg.name), node, val)

    clauses = []
    # each slot: functional, total on its rule's nodes, defined nowhere else
    for slot in sorted(L.slot_var):
        i = slot[0]
        clauses.append(_forall([u, e, e2], _implies(
            so.And(Z(slot, vu, ve), Z(slot, vu, ve2)), so.Eq(ve, ve2))))
        clauses.append(_forall([u], _implies(
            X(i, vu), _exists([e], Z(slot, vu, ve)))))
        clauses.append(_forall([u, e], _implies(Z(slot, vu, ve), X(i, vu))))
    # every node's relation atom is realized in the structure
    occurrences = {}   # relation -> [(rule index, atom)]
    for i, rule in enumerate(sid.rules):
        for ra in rel_atoms(rule.body):
            occurrences.setdefault(ra.name, []).append((i, ra))
    for i, rule in enumerate(sid.rules):
        for ra in rel_atoms(rule.body):
            es = L.element_vars[:len(ra.args)]
            match = so.conj([term_value(i, arg, vu, Var(es[t]))
                             for t, arg in enumerate(ra.args)])
            clauses.append(_forall([u], _implies(
                X(i, vu),
                _exists(es, so.And(so.Rel(ra.name, [Var(n) for n in es]),
                                   match)))))
    # no two nodes consume the same tuple
    for rel in sorted(occurrences):
        occ = occurrences[rel]
        for a in range(len(occ)):
            for b in range(a, len(occ)):
                i, ra = occ[a]
                i2, rb = occ[b]
                differs = []
                trivially_distinct = False
                for arg_a, arg_b in zip(ra.args, rb.args):
                    if isinstance(arg_a, Cst) and isinstance(arg_b, Cst):
                        if arg_a.name != arg_b.name:
                            trivially_distinct = True
                        continue
                    differs.append(_forall([e], so.Not(so.And(
                        term_value(i, arg_a, vu, ve),
                        term_value(i2, arg_b, vv, ve)))))
                if trivially_distinct:
                    continue
                guard = so.And(X(i, vu), X(i2, vv))
                if a == b:
                    guard = so.And(guard, so.Neq(vu, vv))
                clauses.append(_forall([u, v], _implies(guard,
                                                        so.disj(differs))))
    # every tuple of the structure is consumed by some node
    for rel, arity in sid.signature.relations:
        es = L.element_vars[:arity]
        realizers = []
        for i, ra in occurrences.get(rel, []):
            match = so.conj([term_value(i, arg, vu, Var(es[t]))
                             for t, arg in enumerate(ra.args)])
            realizers.append(_exists([u], so.And(X(i, vu), match)))
        clauses.append(_forall(es, _implies(
            so.Rel(rel, [Var(n) for n in es]), so.disj(realizers))))
    # equalities and disequalities inside rules
    for i, rule in enumerate(sid.rules):
        for f, is_eq in _iter_eqs(rule.body):
            lv, rv = f.left, f.right
            if isinstance(lv, Cst) and isinstance(rv, Var):
                lv, rv = rv, lv
            if isinstance(lv, Var) and isinstance(rv, Cst):
                val = so.Eq(ve, rv) if is_eq else so.Neq(ve, rv)
                clauses.append(_forall([u, e], _implies(
                    Z((i, lv.name), vu, ve), val)))
            elif isinstance(lv, Cst) and isinstance(rv, Cst):
                if (lv.name == rv.name) != is_eq:
                    clauses.append(_forall([u], so.Not(X(i, vu))))
            elif not is_eq:
                if lv.name == rv.name:
                    clauses.append(_forall([u], so.Not(X(i, vu))))
                else:
                    clauses.append(_forall([u, e], so.Not(so.And(
                        Z((i, lv.name), vu, ve), Z((i, rv.name), vu, ve)))))
            # variable equalities become flow edges below
    # values flow along parameter passing and equality links
    for (a, b, j) in L.flow.pass_edges:
        clauses.append(_forall([u, v], _implies(
            so.conj([X(a[0], vu), Y(j, vu, vv), X(b[0], vv)]),
            so.SoAtom(L.flow_var[(a, b)], (vu, vv)))))
    for (a, b) in L.flow.eq_edges:
        clauses.append(_forall([u], _implies(
            X(a[0], vu), so.SoAtom(L.flow_var[(a, b)], (vu, vu)))))
    for pair in sorted(L.flow_var):
        a, b = pair
        clauses.append(_forall([u, v, e], _implies(
            so.And(so.SoAtom(L.flow_var[pair], (vu, vv)), Z(a, vu, ve)),
            Z(b, vv, ve))))
    # the root's parameters are the query arguments
    for r in sid.rules_by_head.get(atom.name, []):
        params = sid.rules[r].params
        for t, arg in enumerate(atom.args):
            clauses.append(_forall([e], _implies(
                so.And(X(r, x), Z((r, params[t]), x, ve)), so.Eq(ve, arg))))
    return so.conj(clauses)


def slr_to_so(sid, atom):
    """Second-order sentence equivalent to satisfaction of the query atom
    under the definition system: there is a labelled tree of rule
    applications with consistent values that consumes the structure exactly.
    The atom's variables stay free."""
    layout = _Layout(sid, atom)
    matrix = so.And(build_tree_formula(sid, atom.name, layout),
                    build_frame_formula(sid, atom, layout))
    body = matrix
    for name, arity in reversed(layout.so_prefix()):
        body = so.ExistsSO(name, arity, body)
    return so.ExistsFO(layout.root, body)


def extract_certificate(s, deriv, sid, atom, nu=None):
    """Store binding the translated sentence's existential prefix according
    to a derivation: tree nodes become freshly minted elements, label and
    edge variables follow the tree, slot variables record each node's
    variable values, and flow variables hold the realized parameter-passing
    and equality pairs."""
    layout = _Layout(sid, atom)
    labels = {i: set() for i in layout.rule_var}
    edges = {j: set() for j in layout.edge_var}
    values = {slot: set() for slot in layout.slot_var}
    flows = {pair: set() for pair in layout.flow_var}
    pass_by_child = {}
    for (a, b, j) in layout.flow.pass_edges:
        pass_by_child.setdefault((a[0], j, b[0]), []).append((a, b))

    def walk(node):
        nid = mint()
        i = node.rule_index
        if i is None:
            raise ValueError("expected a derivation rooted at a predicate atom")
        rule = sid.rules[i]
        labels[i].add((nid,))
        val = dict(zip(rule.params, node.params))
        val.update(node.exists)
        for b in binders(rule.body):
            assert b in val, f"derivation misses a value for {b!r}"
        for var, value in val.items():
            values[(i, var)].add((nid, value))
        for f, is_eq in _iter_eqs(rule.body):
            if is_eq and isinstance(f.left, Var) and isinstance(f.right, Var):
                flows[((i, f.left.name), (i, f.right.name))].add((nid, nid))
        for j, child in enumerate(node.children, start=1):
            cid = walk(child)
            edges[j].add((nid, cid))
            r = child.rule_index
            for (a, b) in pass_by_child.get((i, j, r), []):
                flows[(a, b)].add((nid, cid))
        return nid

    root_id = walk(deriv.root)
    fo = {layout.root: root_id}
    if nu:
        fo.update(nu.fo if isinstance(nu, Store) else nu)
    so_bindings = {}
    for i, name in layout.rule_var.items():
        so_bindings[name] = (1, frozenset(labels[i]))
    for j, name in layout.edge_var.items():
        so_bindings[name] = (2, frozenset(edges[j]))
    for slot, name in layout.slot_var.items():
        so_bindings[name] = (2, frozenset(values[slot]))
    for pair, name in layout.flow_var.items():
        so_bindings[name] = (2, frozenset(flows[pair]))
    return Store(fo, so_bindings)
