"""Relation-precise separation logic over inductive definition systems.

Formulas describe a structure exactly: `emp` holds only when every relation is
empty, a relation atom holds only when its tuple is the single tuple present,
and the separating conjunction splits the tuple set of the structure into two
disjoint parts that share all constants.  Predicate atoms unfold rules of a
definition system; satisfaction is the least relation closed under unfolding.

check_slr decides satisfaction by a bottom-up fixpoint over abstract facts
(predicate, argument pattern, consumed tuple set), where argument patterns mix
support elements with canonical placeholders standing for pairwise-distinct
anonymous elements outside the support.  check_slr_injective decides the
stricter reading in which the sub-models of a separating conjunction may share
only the values of common free variables.
"""

import itertools

from ._scan import Scanner
from .config import DEFAULT
from .core import Store, Structure, mint
from .errors import NotNormalized, ParseError, UnknownPredicate


# --- terms and formulas -------------------------------------------------------

class Var:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def key(self):
        return ("v", self.name)

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return self.name


class Cst:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def key(self):
        return ("c", self.name)

    def __eq__(self, other):
        return isinstance(other, Cst) and self.name == other.name

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return self.name


class SlrFormula:
    def key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, SlrFormula) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return slr_to_text(self)


class Emp(SlrFormula):
    def key(self):
        return ("emp",)


class Eq(SlrFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("eq", self.left.key(), self.right.key())


class Neq(SlrFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("neq", self.left.key(), self.right.key())


class RelAtom(SlrFormula):
    def __init__(self, name, args):
        self.name, self.args = name, tuple(args)

    def key(self):
        return ("rel", self.name, tuple(a.key() for a in self.args))


class PredAtom(SlrFormula):
    def __init__(self, name, args):
        self.name, self.args = name, tuple(args)

    def key(self):
        return ("pred", self.name, tuple(a.key() for a in self.args))


class Star(SlrFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("star", self.left.key(), self.right.key())


class Exists(SlrFormula):
    def __init__(self, var, body):
        self.var, self.body = var, body

    def key(self):
        return ("ex", self.var, self.body.key())


def free_vars(phi):
    """Free variable names, in first-occurrence order."""
    out, seen = [], set()

    def walk(f, bound):
        if isinstance(f, (Eq, Neq)):
            for t in (f.left, f.right):
                if isinstance(t, Var) and t.name not in bound and t.name not in seen:
                    seen.add(t.name)
                    out.append(t.name)
        elif isinstance(f, (RelAtom, PredAtom)):
            for t in f.args:
                if isinstance(t, Var) and t.name not in bound and t.name not in seen:
                    seen.add(t.name)
                    out.append(t.name)
        elif isinstance(f, Star):
            walk(f.left, bound)
            walk(f.right, bound)
        elif isinstance(f, Exists):
            walk(f.body, bound | {f.var})

    walk(phi, set())
    return out


def subst(phi, mapping):
    """Substitute terms for variables (mapping: name -> term).  Binders are
    assumed unique and disjoint from the mapping's range."""

    def term(t):
        if isinstance(t, Var) and t.name in mapping:
            return mapping[t.name]
        return t

    if isinstance(phi, Emp):
        return phi
    if isinstance(phi, Eq):
        return Eq(term(phi.left), term(phi.right))
    if isinstance(phi, Neq):
        return Neq(term(phi.left), term(phi.right))
    if isinstance(phi, RelAtom):
        return RelAtom(phi.name, [term(a) for a in phi.args])
    if isinstance(phi, PredAtom):
        return PredAtom(phi.name, [term(a) for a in phi.args])
    if isinstance(phi, Star):
        return Star(subst(phi.left, mapping), subst(phi.right, mapping))
    if isinstance(phi, Exists):
        assert phi.var not in mapping
        return Exists(phi.var, subst(phi.body, mapping))
    raise TypeError(phi)


def binders(phi):
    if isinstance(phi, Exists):
        return [phi.var] + binders(phi.body)
    if isinstance(phi, Star):
        return binders(phi.left) + binders(phi.right)
    return []


def rel_atoms(phi):
    if isinstance(phi, RelAtom):
        return [phi]
    if isinstance(phi, Star):
        return rel_atoms(phi.left) + rel_atoms(phi.right)
    if isinstance(phi, Exists):
        return rel_atoms(phi.body)
    return []


def pred_atoms(phi):
    if isinstance(phi, PredAtom):
        return [phi]
    if isinstance(phi, Star):
        return pred_atoms(phi.left) + pred_atoms(phi.right)
    if isinstance(phi, Exists):
        return pred_atoms(phi.body)
    return []


def ensure_unique_binders(phi, taken):
    """Alpha-rename bound variables so every binder is unique and distinct
    from the names in `taken`."""
    taken = set(taken)

    def fresh(name):
        candidate = name
        n = 0
        while candidate in taken:
            n += 1
            candidate = f"{name}_{n}"
        taken.add(candidate)
        return candidate

    def walk(f, ren):
        if isinstance(f, Exists):
            new = fresh(f.var)
            ren2 = dict(ren)
            ren2[f.var] = new
            return Exists(new, walk(f.body, ren2))
        if isinstance(f, Star):
            return Star(walk(f.left, ren), walk(f.right, ren))
        mapping = {old: Var(new) for old, new in ren.items()}
        return subst(f, mapping)

    return walk(phi, {})


# --- definition systems -------------------------------------------------------

class Rule:
    def __init__(self, head, params, body):
        self.head = head
        self.params = tuple(params)
        assert len(set(self.params)) == len(self.params), \
            f"rule {head}: duplicate parameter"
        self.body = ensure_unique_binders(body, self.params)

    def __repr__(self):
        return rule_to_text(self)


class Sid:
    """A definition system: rules plus an arity table.  Predicates may be
    declared without rules (they are then unsatisfiable)."""

    def __init__(self, rules, declared=None, signature=None):
        self.rules = list(rules)
        self.arities = dict(declared or {})
        for r in self.rules:
            known = self.arities.get(r.head)
            assert known is None or known == len(r.params), \
                f"conflicting arity for {r.head}"
            self.arities[r.head] = len(r.params)
        self.signature = signature
        self.rules_by_head = {}
        for i, r in enumerate(self.rules):
            self.rules_by_head.setdefault(r.head, []).append(i)
        for r in self.rules:
            self._validate_body(r)

    def _validate_body(self, rule):
        for atom in pred_atoms(rule.body):
            if atom.name not in self.arities:
                raise UnknownPredicate(f"{atom.name!r} in rule for {rule.head!r}")
            if self.arities[atom.name] != len(atom.args):
                raise ParseError(
                    f"atom {atom.name} has {len(atom.args)} args, expected {self.arities[atom.name]}")

    def predicates(self):
        return dict(self.arities)

    def __repr__(self):
        return sid_to_text(self)


# --- parsing ------------------------------------------------------------------

class _RawAtom(SlrFormula):
    """Atom whose relation/predicate status is resolved after all rule heads
    are known."""

    def __init__(self, name, args):
        self.name, self.args = name, tuple(args)

    def key(self):
        return ("raw", self.name, tuple(a.key() for a in self.args))


def _parse_body(sc, consts):
    def term():
        name = sc.expect_name()
        return Cst(name) if name in consts else Var(name)

    def atom():
        if sc.accept("sym", "("):
            f = formula()
            sc.expect("sym", ")")
            return f
        if sc.accept("name", "emp"):
            return Emp()
        t = term()
        if sc.accept("sym", "="):
            return Eq(t, term())
        if sc.accept("sym", "!="):
            return Neq(t, term())
        if isinstance(t, Cst):
            sc.error(f"constant {t.name!r} cannot start an atom")
        name = t.name
        sc.expect("sym", "(")
        args = []
        if not sc.at("sym", ")"):
            args.append(term())
            while sc.accept("sym", ","):
                args.append(term())
        sc.expect("sym", ")")
        return _RawAtom(name, args)

    def star():
        f = atom()
        while sc.accept("sym", "*"):
            if sc.at("name", "ex"):
                return Star(f, formula())  # the binder's scope extends right
            f = Star(f, atom())
        return f

    def formula():
        if sc.accept("name", "ex"):
            v = sc.expect_name()
            sc.expect("sym", ".")
            return Exists(v, formula())
        return star()

    return formula()


def _resolve(phi, signature, preds):
    def walk(f):
        if isinstance(f, _RawAtom):
            if signature is not None and signature.has_relation(f.name):
                if signature.arity(f.name) != len(f.args):
                    raise ParseError(
                        f"relation {f.name} expects {signature.arity(f.name)} args")
                return RelAtom(f.name, f.args)
            if preds is None or f.name in preds:
                return PredAtom(f.name, f.args)
            raise UnknownPredicate(f.name)
        if isinstance(f, Star):
            return Star(walk(f.left), walk(f.right))
        if isinstance(f, Exists):
            return Exists(f.var, walk(f.body))
        return f

    return walk(phi)


def parse_sid(text, signature=None):
    sc = Scanner(text)
    consts = set(signature.constants) if signature else set()
    raw = []  # (head, params, raw body)
    declared = {}
    while not sc.done():
        if sc.accept("name", "pred"):
            name = sc.expect_name()
            sc.expect("sym", "/")
            declared[name] = sc.expect_int()
            sc.expect("sym", ";")
            continue
        head = sc.expect_name()
        sc.expect("sym", "(")
        params = []
        if not sc.at("sym", ")"):
            params.append(sc.expect_name())
            while sc.accept("sym", ","):
                params.append(sc.expect_name())
        sc.expect("sym", ")")
        sc.expect("sym", "<=")
        body = _parse_body(sc, consts)
        sc.expect("sym", ";")
        raw.append((head, params, body))
    preds = dict(declared)
    for head, params, _ in raw:
        known = preds.get(head)
        if known is not None and known != len(params):
            raise ParseError(f"conflicting arity for {head}")
        preds[head] = len(params)
    rules = [Rule(h, p, _resolve(b, signature, preds)) for h, p, b in raw]
    return Sid(rules, declared, signature)


def parse_slr(text, signature=None, sid=None):
    """Parse a stand-alone formula.  Names that are neither relations nor
    known predicates raise UnknownPredicate when a definition system is given;
    without one they parse as predicate atoms."""
    sc = Scanner(text)
    consts = set(signature.constants) if signature else set()
    body = _parse_body(sc, consts)
    sc.expect_done()
    preds = set(sid.arities) if sid is not None else None
    phi = _resolve(body, signature, preds)
    if sid is not None:
        for atom in pred_atoms(phi):
            if sid.arities[atom.name] != len(atom.args):
                raise ParseError(f"atom {atom.name} arity mismatch")
    return phi


# --- printing -----------------------------------------------------------------

def _term_text(t):
    return t.name


def slr_to_text(phi):
    if isinstance(phi, Emp):
        return "emp"
    if isinstance(phi, Eq):
        return f"{_term_text(phi.left)} = {_term_text(phi.right)}"
    if isinstance(phi, Neq):
        return f"{_term_text(phi.left)} != {_term_text(phi.right)}"
    if isinstance(phi, (RelAtom, PredAtom, _RawAtom)):
        return f"{phi.name}({','.join(_term_text(a) for a in phi.args)})"
    if isinstance(phi, Star):
        def side(f):
            t = slr_to_text(f)
            return f"({t})" if isinstance(f, Exists) else t
        return f"{side(phi.left)} * {side(phi.right)}"
    if isinstance(phi, Exists):
        return f"ex {phi.var} . {slr_to_text(phi.body)}"
    raise TypeError(phi)


def rule_to_text(rule):
    return f"{rule.head}({','.join(rule.params)}) <= {slr_to_text(rule.body)} ;"


def sid_to_text(sid):
    lines = []
    ruled = {r.head for r in sid.rules}
    for name, arity in sorted(sid.arities.items()):
        if name not in ruled:
            lines.append(f"pred {name}/{arity} ;")
    lines.extend(rule_to_text(r) for r in sid.rules)
    return "\n".join(lines)


# --- derivations --------------------------------------------------------------

class DNode:
    """One unfolding step: a rule applied under a valuation.  `consumed` lists
    the relation tuples the rule's own atoms account for; children follow the
    rule body's predicate atoms in syntactic order.  A node with rule_index
    None is the synthetic query wrapper for a non-atomic formula."""

    def __init__(self, predicate, rule_index, params, exists, consumed, children):
        self.predicate = predicate
        self.rule_index = rule_index
        self.params = tuple(params)
        self.exists = dict(exists)
        self.consumed = tuple((n, tuple(t)) for n, t in consumed)
        self.children = list(children)

    def size(self):
        return 1 + sum(c.size() for c in self.children)

    def all_values(self):
        vals = set(self.params) | set(self.exists.values())
        for _, t in self.consumed:
            vals.update(t)
        for c in self.children:
            vals |= c.all_values()
        return vals

    def to_json(self):
        return {"predicate": self.predicate,
                "rule": self.rule_index,
                "params": list(self.params),
                "exists": dict(self.exists),
                "consumed": [[n, list(t)] for n, t in self.consumed],
                "children": [c.to_json() for c in self.children]}

    @staticmethod
    def from_json(data):
        return DNode(data["predicate"], data["rule"], data["params"],
                     data["exists"],
                     [(n, tuple(t)) for n, t in data["consumed"]],
                     [DNode.from_json(c) for c in data["children"]])


class Derivation:
    def __init__(self, root):
        self.root = root

    def size(self):
        return self.root.size()

    def to_json(self):
        return {"root": self.root.to_json()}

    @staticmethod
    def from_json(data):
        return Derivation(DNode.from_json(data["root"]))


QUERY = "__query__"


# --- satisfaction: bottom-up fixpoint -----------------------------------------

class _Fixpoint:
    def __init__(self, s, nu_fo, phi, sid):
        self.s = s
        self.sid = sid
        fv = free_vars(phi)
        missing = [v for v in fv if v not in nu_fo]
        if missing:
            raise ValueError(f"store does not bind {missing}")
        self.qvars = sorted(fv)
        qrule = Rule(QUERY, self.qvars, phi)
        self.rules = list(sid.rules) + [qrule]
        self.arities = dict(sid.arities)
        self.arities[QUERY] = len(self.qvars)
        self.by_head = {}
        for i, r in enumerate(self.rules):
            self.by_head.setdefault(r.head, []).append(i)
        for atom in pred_atoms(phi):
            if atom.name not in sid.arities:
                raise UnknownPredicate(atom.name)

        self.support = frozenset(s.dom) | {nu_fo[v] for v in fv} | set(s.const.values())
        self.tuples = s.all_tuples()
        self.tuple_index = {t: i for i, t in enumerate(self.tuples)}
        self.full_mask = (1 << len(self.tuples)) - 1
        self.const_val = {c: s.const[c] for c in s.signature.constants}
        self.qpattern = tuple(nu_fo[v] for v in self.qvars)

        # per rule: variables occurring in relation atoms (placeholders can
        # never satisfy those), and predicates referenced in the body
        self.rel_vars = []
        self.body_preds = []
        for r in self.rules:
            rv = set()
            for atom in rel_atoms(r.body):
                rv.update(t.name for t in atom.args if isinstance(t, Var))
            self.rel_vars.append(rv)
            self.body_preds.append({a.name for a in pred_atoms(r.body)})

        self.facts = {}   # (pred, pattern) -> {mask: justification}
        self.delta = {}   # (pred, pattern) -> set of masks new last round

    # -- patterns --------------------------------------------------------------

    def canon(self, vals):
        out = []
        ren = {}
        for v in vals:
            if v < 0:
                if v not in ren:
                    ren[v] = -(len(ren) + 1)
                out.append(ren[v])
            else:
                out.append(v)
        return tuple(out)

    # -- relevance: which (pred, pattern) pairs can matter for the query ------

    def relevant_patterns(self):
        relevant = {}
        queue = [(QUERY, self.qpattern)]
        support_sorted = sorted(self.support)
        while queue:
            pred, pattern = queue.pop()
            pats = relevant.setdefault(pred, set())
            if pattern in pats:
                continue
            pats.add(pattern)
            for ri in self.by_head.get(pred, ()):
                rule = self.rules[ri]
                rho = dict(zip(rule.params, pattern))
                exvars = binders(rule.body)
                choices = []
                next_ph = min([v for v in pattern if v < 0], default=0) - 1
                ph_pool = [v for v in pattern if v < 0]
                for idx, y in enumerate(exvars):
                    if y in self.rel_vars[ri]:
                        choices.append(list(support_sorted))
                    else:
                        choices.append(list(support_sorted) + ph_pool + [next_ph - idx])
                atoms = pred_atoms(rule.body)
                if not atoms:
                    continue
                combos = itertools.product(*choices) if choices else [()]
                for combo in combos:
                    local = dict(rho)
                    local.update(zip(exvars, combo))
                    for atom in atoms:
                        vals = [local[t.name] if isinstance(t, Var)
                                else self.const_val[t.name] for t in atom.args]
                        queue.append((atom.name, self.canon(vals)))
        return relevant

    # -- body evaluation -------------------------------------------------------

    def sat(self, phi, rho, round0):
        """Return (all_masks, new_masks): dicts mask -> (children, exists).
        A mask is `new` when its derivation uses a fact added last round (or,
        in round 0, when it is quantifier-free-derivable)."""
        base_new = round0

        def qf(masks):
            return (masks, dict(masks) if base_new else {})

        if isinstance(phi, Emp):
            return qf({0: ((), {})})
        if isinstance(phi, (Eq, Neq)):
            def val(t):
                return rho[t.name] if isinstance(t, Var) else self.const_val[t.name]
            same = val(phi.left) == val(phi.right)
            holds = same if isinstance(phi, Eq) else not same
            return qf({0: ((), {})} if holds else {})
        if isinstance(phi, RelAtom):
            vals = tuple(rho[t.name] if isinstance(t, Var) else self.const_val[t.name]
                         for t in phi.args)
            if any(v < 0 for v in vals):
                return qf({})
            idx = self.tuple_index.get((phi.name, vals))
            if idx is None:
                return qf({})
            return qf({1 << idx: ((), {})})
        if isinstance(phi, PredAtom):
            vals = tuple(rho[t.name] if isinstance(t, Var) else self.const_val[t.name]
                         for t in phi.args)
            key = (phi.name, self.canon(vals))
            table = self.facts.get(key, {})
            allm = {m: (((phi.name, vals, m),), {}) for m in table}
            newm = {m: allm[m] for m in self.delta.get(key, ()) if m in allm}
            return (allm, newm)
        if isinstance(phi, Star):
            la, ln = self.sat(phi.left, rho, round0)
            ra, rn = self.sat(phi.right, rho, round0)

            def join(xs, ys):
                out = {}
                for m1 in sorted(xs):
                    c1, e1 = xs[m1]
                    for m2 in sorted(ys):
                        if m1 & m2:
                            continue
                        m = m1 | m2
                        if m in out:
                            continue
                        c2, e2 = ys[m2]
                        ex = dict(e1)
                        ex.update(e2)
                        out[m] = (c1 + c2, ex)
                return out

            allm = join(la, ra)
            newm = join(ln, ra)
            for m, j in join(la, rn).items():
                newm.setdefault(m, j)
            return (allm, newm)
        if isinstance(phi, Exists):
            used_ph = [v for v in rho.values() if v < 0]
            next_ph = min(used_ph, default=0) - 1
            candidates = sorted(self.support) + sorted(set(used_ph), reverse=True) + [next_ph]
            allm, newm = {}, {}
            for w in candidates:
                rho2 = dict(rho)
                rho2[phi.var] = w
                suba, subn = self.sat(phi.body, rho2, round0)
                for m in sorted(suba):
                    if m not in allm:
                        c, e = suba[m]
                        e2 = dict(e)
                        e2[phi.var] = w
                        allm[m] = (c, e2)
                for m in sorted(subn):
                    if m not in newm:
                        c, e = subn[m]
                        e2 = dict(e)
                        e2[phi.var] = w
                        newm[m] = (c, e2)
            return (allm, newm)
        raise TypeError(phi)

    # -- the fixpoint ----------------------------------------------------------

    def run(self):
        relevant = self.relevant_patterns()
        goal = (QUERY, self.qpattern)
        round0 = True
        dirty = set(relevant)
        while True:
            next_delta = {}
            for ri, rule in enumerate(self.rules):
                if not round0 and not (self.body_preds[ri] & dirty):
                    continue
                for pattern in sorted(relevant.get(rule.head, ())):
                    if len(pattern) != len(rule.params):
                        continue
                    rho = dict(zip(rule.params, pattern))
                    _, new = self.sat(rule.body, rho, round0)
                    if not new:
                        continue
                    key = (rule.head, pattern)
                    table = self.facts.setdefault(key, {})
                    for m in sorted(new):
                        if m in table:
                            continue
                        children, exists = new[m]
                        table[m] = (ri, exists, children)
                        next_delta.setdefault(key, set()).add(m)
            if goal in self.facts and self.full_mask in self.facts[goal]:
                return True
            if not next_delta:
                return False
            self.delta = next_delta
            dirty = {pred for pred, _ in next_delta}
            round0 = False

    # -- derivation reconstruction --------------------------------------------

    def reconstruct(self, pred, concrete_args, mask):
        pattern = self.canon(concrete_args)
        ri, exists, children = self.facts[(pred, pattern)][mask]
        rule = self.rules[ri]
        # map canonical placeholders to concrete elements via the call pattern;
        # placeholders introduced by existentials get fresh elements
        mapping = {}
        for pat_v, conc in zip(pattern, concrete_args):
            if pat_v < 0:
                mapping[pat_v] = conc

        def to_concrete(v):
            if v >= 0:
                return v
            if v not in mapping:
                mapping[v] = mint()
            return mapping[v]

        exists_c = {}
        for var in sorted(exists):
            exists_c[var] = to_concrete(exists[var])
        child_nodes = []
        child_masks = 0
        for (bname, vals, bmask) in children:
            conc = tuple(to_concrete(v) for v in vals)
            child_nodes.append(self.reconstruct(bname, conc, bmask))
            child_masks |= bmask
        own = mask & ~child_masks
        consumed = [self.tuples[i] for i in range(len(self.tuples)) if own >> i & 1]
        return DNode(pred, ri if rule.head != QUERY else None,
                     concrete_args, exists_c, consumed, child_nodes)


def _store_fo(nu):
    if nu is None:
        return {}
    if isinstance(nu, Store):
        return dict(nu.fo)
    return dict(nu)


def check_slr(s, nu, phi, sid, limits=DEFAULT):
    """Return a Derivation witnessing that (s, nu) satisfies phi under the
    definition system, or None."""
    fp = _Fixpoint(s, _store_fo(nu), phi, sid)
    if not fp.run():
        return None
    root = fp.reconstruct(QUERY, fp.qpattern, fp.full_mask)
    if isinstance(phi, PredAtom) and len(root.children) == 1 and not root.consumed:
        return Derivation(root.children[0])
    return Derivation(root)


# --- derivation replay --------------------------------------------------------

def replay_derivation(s, nu, phi, sid, deriv):
    """Re-check a derivation bottom-up: every node must apply a real rule under
    its recorded valuation, consumed tuples must be exactly the node's ground
    relation atoms (pairwise distinct), children must line up with the body's
    predicate atoms, and all consumed sets must partition the structure."""
    nu_fo = _store_fo(nu)
    all_consumed = []

    def walk_body(body, val, node):
        """Collect ground relation tuples and match children; returns the list
        of ground tuples or None on mismatch."""
        tuples = []
        cursor = [0]

        def value(t):
            if isinstance(t, Cst):
                return s.const.get(t.name)
            return val.get(t.name)

        def go(f):
            if isinstance(f, Emp):
                return True
            if isinstance(f, (Eq, Neq)):
                a, b = value(f.left), value(f.right)
                if a is None or b is None:
                    return False
                return (a == b) if isinstance(f, Eq) else (a != b)
            if isinstance(f, RelAtom):
                vals = tuple(value(t) for t in f.args)
                if any(v is None for v in vals):
                    return False
                tuples.append((f.name, vals))
                return vals in s.rel[f.name]
            if isinstance(f, PredAtom):
                i = cursor[0]
                cursor[0] += 1
                if i >= len(node.children):
                    return False
                child = node.children[i]
                vals = tuple(value(t) for t in f.args)
                if child.predicate != f.name or tuple(child.params) != vals:
                    return False
                return walk_node(child)
            if isinstance(f, Star):
                return go(f.left) and go(f.right)
            if isinstance(f, Exists):
                if f.var not in node.exists:
                    return False
                val[f.var] = node.exists[f.var]
                return go(f.body)
            raise TypeError(f)

        ok = go(body)
        if not ok or cursor[0] != len(node.children):
            return None
        return tuples

    def walk_node(node):
        if node.rule_index is None:
            return False
        if not (0 <= node.rule_index < len(sid.rules)):
            return False
        rule = sid.rules[node.rule_index]
        if rule.head != node.predicate or len(rule.params) != len(node.params):
            return False
        val = dict(zip(rule.params, node.params))
        tuples = walk_body(rule.body, val, node)
        if tuples is None:
            return False
        if len(tuples) != len(set(tuples)):
            return False
        if set(tuples) != set(node.consumed):
            return False
        all_consumed.extend(tuples)
        return True

    root = deriv.root
    if root.rule_index is None:
        # synthetic wrapper: its body is the query formula itself
        val = dict(nu_fo)
        tuples = walk_body(phi, val, root)
        if tuples is None or len(tuples) != len(set(tuples)):
            return False
        if set(tuples) != set(root.consumed):
            return False
        all_consumed.extend(tuples)
    else:
        if not isinstance(phi, PredAtom):
            return False
        vals = tuple(nu_fo[t.name] if isinstance(t, Var) else s.const[t.name]
                     for t in phi.args)
        if root.predicate != phi.name or tuple(root.params) != vals:
            return False
        if not walk_node(root):
            return False
    if len(all_consumed) != len(set(all_consumed)):
        return False
    return set(all_consumed) == set(s.all_tuples())


# --- injective satisfaction ---------------------------------------------------

class _InjChecker:
    def __init__(self, s, nu_fo, sid):
        self.s = s
        self.sid = sid
        self.nu = nu_fo
        self.tuples = s.all_tuples()
        self.const_vals = frozenset(s.const.values())
        self.true_memo = {}
        self.false_memo = set()
        self.fv_cache = {}

    def fv(self, phi):
        key = id(phi)
        if key not in self.fv_cache:
            self.fv_cache[key] = (phi, frozenset(free_vars(phi)))
        return self.fv_cache[key][1]

    def supp(self, mask):
        out = set()
        for i in range(len(self.tuples)):
            if mask >> i & 1:
                out.update(self.tuples[i][1])
        return out

    def prove_atom(self, pred, args, mask, path):
        key = (pred, args, mask)
        if key in self.true_memo:
            return self._materialize(key), False
        if key in self.false_memo:
            return None, False
        if key in path:
            return None, True
        if pred not in self.sid.arities:
            raise UnknownPredicate(pred)
        path = path | {key}
        tainted = False
        for ri in self.sid.rules_by_head.get(pred, ()):
            rule = self.sid.rules[ri]
            if len(rule.params) != len(args):
                continue
            rho = dict(zip(rule.params, args))
            proof, t = self.sat(rule.body, rho, mask, path)
            tainted = tainted or t
            if proof is not None:
                children, exists = proof
                child_mask = 0
                for _, m in children:
                    child_mask |= m
                own = mask & ~child_mask
                consumed = [self.tuples[i] for i in range(len(self.tuples)) if own >> i & 1]
                node = DNode(pred, ri, args, exists, consumed,
                             [n for n, _ in children])
                self.true_memo[key] = node
                return self._materialize(key), False
        if not tainted:
            self.false_memo.add(key)
        return None, tainted

    def _materialize(self, key):
        """Clone the memoized subtree, re-minting private witnesses so reuse
        across branches never shares anonymous elements."""
        pred, args, mask = key
        template = self.true_memo[key]
        public = set(args) | self.supp(mask) | self.const_vals
        ren = {}

        def clone(node):
            def mapv(v):
                if v in public:
                    return v
                if v not in ren:
                    ren[v] = mint()
                return ren[v]

            return DNode(node.predicate, node.rule_index,
                         [mapv(v) for v in node.params],
                         {k: mapv(v) for k, v in node.exists.items()},
                         [(n, tuple(mapv(x) for x in t)) for n, t in node.consumed],
                         [clone(c) for c in node.children])

        return clone(template)

    def sat(self, phi, rho, mask, path):
        """Find a proof of phi over exactly the tuples in mask, under the
        strict reading: separating conjunction requires the two sides to share
        only common-variable values (and constants), and existential witnesses
        avoid the values of the formula's free variables."""
        def value(t):
            return self.s.const[t.name] if isinstance(t, Cst) else rho[t.name]

        if isinstance(phi, Emp):
            return (((), {}) if mask == 0 else None), False
        if isinstance(phi, (Eq, Neq)):
            if mask != 0:
                return None, False
            same = value(phi.left) == value(phi.right)
            ok = same if isinstance(phi, Eq) else not same
            return (((), {}) if ok else None), False
        if isinstance(phi, RelAtom):
            vals = tuple(value(t) for t in phi.args)
            want = [i for i in range(len(self.tuples)) if mask >> i & 1]
            if len(want) == 1 and self.tuples[want[0]] == (phi.name, vals):
                return ((), {}), False
            return None, False
        if isinstance(phi, PredAtom):
            vals = tuple(value(t) for t in phi.args)
            node, t = self.prove_atom(phi.name, vals, mask, path)
            if node is None:
                return None, t
            return (((node, mask),), {}), False
        if isinstance(phi, Star):
            fv_l = self.fv(phi.left)
            fv_r = self.fv(phi.right)
            shared = {rho[v] for v in fv_l & fv_r if v in rho} | self.const_vals
            lvals = {rho[v] for v in fv_l if v in rho}
            rvals = {rho[v] for v in fv_r if v in rho}
            tainted = False
            sub = mask
            # iterate submasks of mask deterministically (ascending)
            parts = sorted(self._submasks(mask))
            for m1 in parts:
                m2 = mask & ~m1
                t1 = self.supp(m1) | lvals
                t2 = self.supp(m2) | rvals
                if (t1 & t2) - shared:
                    continue
                p1, ta = self.sat(phi.left, rho, m1, path)
                tainted = tainted or ta
                if p1 is None:
                    continue
                p2, tb = self.sat(phi.right, rho, m2, path)
                tainted = tainted or tb
                if p2 is None:
                    continue
                c1, e1 = p1
                c2, e2 = p2
                ex = dict(e1)
                ex.update(e2)
                return (c1 + c2, ex), False
            return None, tainted
        if isinstance(phi, Exists):
            excluded = {rho[v] for v in self.fv(phi) if v in rho}
            pool = sorted(self.supp(mask) | set(rho.values()) | self.const_vals)
            candidates = [w for w in pool if w not in excluded]
            candidates.append(mint())  # one anonymous element outside everything
            tainted = False
            for w in candidates:
                rho2 = dict(rho)
                rho2[phi.var] = w
                proof, t = self.sat(phi.body, rho2, mask, path)
                tainted = tainted or t
                if proof is not None:
                    children, ex = proof
                    ex2 = dict(ex)
                    ex2[phi.var] = w
                    return (children, ex2), False
            return None, tainted
        raise TypeError(phi)

    @staticmethod
    def _submasks(mask):
        sub = mask
        out = [0]
        while sub:
            out.append(sub)
            sub = (sub - 1) & mask
        return out


def check_slr_injective(s, nu, phi, sid, limits=DEFAULT):
    """Like check_slr but for the strict semantics where the sub-models of a
    separating conjunction overlap exactly on shared-variable values and
    existential witnesses avoid the free variables' values."""
    nu_fo = _store_fo(nu)
    fv = free_vars(phi)
    missing = [v for v in fv if v not in nu_fo]
    if missing:
        raise ValueError(f"store does not bind {missing}")
    for atom in pred_atoms(phi):
        if atom.name not in sid.arities:
            raise UnknownPredicate(atom.name)
    chk = _InjChecker(s, nu_fo, sid)
    full = (1 << len(chk.tuples)) - 1
    if isinstance(phi, PredAtom):
        vals = tuple(nu_fo[t.name] if isinstance(t, Var) else s.const[t.name]
                     for t in phi.args)
        node, _ = chk.prove_atom(phi.name, vals, full, frozenset())
        return Derivation(node) if node is not None else None
    proof, _ = chk.sat(phi, dict(nu_fo), full, frozenset())
    if proof is None:
        return None
    children, exists = proof
    child_mask = 0
    for _, m in children:
        child_mask |= m
    own = full & ~child_mask
    consumed = [chk.tuples[i] for i in range(len(chk.tuples)) if own >> i & 1]
    root = DNode(None, None, [nu_fo[v] for v in sorted(fv)], exists, consumed,
                 [n for n, _ in children])
    return Derivation(root)


# --- normalization ------------------------------------------------------------

def _partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def partition_name(pred, blocks):
    """Name of the copy of `pred` specialised to a partition of its parameter
    positions (1-based)."""
    if not blocks:
        return f"{pred}_e"
    ordered = sorted([sorted(b) for b in blocks], key=lambda b: b[0])
    return pred + "_" + "_".join("".join(str(i) for i in b) for b in ordered)


def _strip_exists(phi):
    if isinstance(phi, Exists):
        return _strip_exists(phi.body)
    if isinstance(phi, Star):
        return Star(_strip_exists(phi.left), _strip_exists(phi.right))
    return phi


def is_normalized(sid):
    """True iff no rule body contains an equality between two variables."""
    def has_var_eq(f):
        if isinstance(f, Eq):
            return isinstance(f.left, Var) and isinstance(f.right, Var)
        if isinstance(f, Star):
            return has_var_eq(f.left) or has_var_eq(f.right)
        if isinstance(f, Exists):
            return has_var_eq(f.body)
        return False

    return not any(has_var_eq(r.body) for r in sid.rules)


def normalize(sid):
    """Build an equality-free definition system.

    For every predicate A and every partition of its parameter positions there
    is a copy of A whose rules assume the corresponding parameter fusion; the
    original predicate is redefined by delegation rules to those copies.  The
    satisfied structures of the existentially closed predicate atoms are
    preserved."""
    new_rules = []
    seen = set()

    def add(rule):
        key = (rule.head, rule.params, rule.body.key())
        if key not in seen:
            seen.add(key)
            new_rules.append(rule)

    declared = {}
    for pred, arity in sorted(sid.arities.items()):
        for blocks in _partitions(range(1, arity + 1)):
            declared[partition_name(pred, blocks)] = len(blocks)
        declared[pred] = arity

    for rule in sid.rules:
        exvars = binders(rule.body)
        allvars = list(rule.params) + exvars
        for groups in _partitions(allvars):
            cls = {}
            for g in groups:
                for v in g:
                    cls[v] = frozenset(g)
            ok = True
            for f, same in _iter_eqs(rule.body):
                if isinstance(f.left, Var) and isinstance(f.right, Var):
                    merged = cls[f.left.name] == cls[f.right.name]
                    if same and not merged:
                        ok = False
                    if not same and merged:
                        ok = False
            if not ok:
                continue
            # representative: least parameter by position, else least existential
            rep = {}
            for g in groups:
                params_in = [p for p in rule.params if p in g]
                rep_v = params_in[0] if params_in else sorted(g)[0]
                for v in g:
                    rep[v] = rep_v
            head_blocks = []
            done = set()
            for i, p in enumerate(rule.params, start=1):
                if p in done:
                    continue
                block = [j for j, q in enumerate(rule.params, start=1)
                         if cls[q] == cls[p]]
                head_blocks.append(block)
                done.update(rule.params[j - 1] for j in block)
            head_name = partition_name(rule.head, head_blocks)
            head_params = []
            for block in sorted(head_blocks, key=lambda b: b[0]):
                head_params.append(rep[rule.params[block[0] - 1]])
            matrix = _rewrite_matrix(_strip_exists(rule.body), rep, cls)
            if matrix is None:
                continue
            body = matrix
            kept = [v for v in exvars if rep[v] == v]
            for v in reversed(kept):
                body = Exists(v, body)
            add(Rule(head_name, head_params, body))

    for pred, arity in sorted(sid.arities.items()):
        xs = [f"x{i}" for i in range(1, arity + 1)]
        for blocks in _partitions(range(1, arity + 1)):
            args = [Var(xs[sorted(b)[0] - 1]) for b in
                    sorted([sorted(b) for b in blocks], key=lambda b: b[0])]
            add(Rule(pred, xs, PredAtom(partition_name(pred, blocks), args)))

    return Sid(new_rules, declared, sid.signature)


def _iter_eqs(phi):
    if isinstance(phi, Eq):
        yield phi, True
    elif isinstance(phi, Neq):
        yield phi, False
    elif isinstance(phi, Star):
        yield from _iter_eqs(phi.left)
        yield from _iter_eqs(phi.right)
    elif isinstance(phi, Exists):
        yield from _iter_eqs(phi.body)


def _rewrite_matrix(phi, rep, cls):
    """Substitute class representatives, drop trivial equalities, annotate
    predicate atoms with the induced position partition."""
    def term(t):
        if isinstance(t, Var):
            return Var(rep[t.name])
        return t

    if isinstance(phi, Emp):
        return phi
    if isinstance(phi, Eq):
        if isinstance(phi.left, Var) and isinstance(phi.right, Var):
            return Emp()  # guaranteed intra-class by the caller's filter
        return Eq(term(phi.left), term(phi.right))
    if isinstance(phi, Neq):
        return Neq(term(phi.left), term(phi.right))
    if isinstance(phi, RelAtom):
        return RelAtom(phi.name, [term(a) for a in phi.args])
    if isinstance(phi, PredAtom):
        for a in phi.args:
            if not isinstance(a, Var):
                raise ValueError("predicate atoms must have variable arguments")
        blocks = []
        done = set()
        for i, a in enumerate(phi.args, start=1):
            if i in done:
                continue
            block = [j for j, b in enumerate(phi.args, start=1)
                     if cls[b.name] == cls[a.name]]
            blocks.append(block)
            done.update(block)
        args = [Var(rep[phi.args[sorted(b)[0] - 1].name])
                for b in sorted([sorted(b) for b in blocks], key=lambda b: b[0])]
        return PredAtom(partition_name(phi.name, blocks), args)
    if isinstance(phi, Star):
        left = _rewrite_matrix(phi.left, rep, cls)
        right = _rewrite_matrix(phi.right, rep, cls)
        if left is None or right is None:
            return None
        return Star(left, right)
    raise TypeError(phi)


# --- splitting repeated relation symbols --------------------------------------

def split_relation_atoms(sid):
    """Rewrite every rule so no relation symbol occurs twice in one body; each
    repeated occurrence moves into a fresh auxiliary predicate."""
    new_rules = []
    aux_rules = []
    declared = dict(sid.arities)

    for ri, rule in enumerate(sid.rules):
        seen = {}

        def walk(f):
            if isinstance(f, RelAtom):
                n = seen.get(f.name, 0)
                seen[f.name] = n + 1
                if n == 0:
                    return f
                vars_in = []
                for a in f.args:
                    if isinstance(a, Var) and a.name not in vars_in:
                        vars_in.append(a.name)
                aux = f"{f.name}_{ri}_{n}"
                assert aux not in declared, f"auxiliary name {aux} clashes"
                declared[aux] = len(vars_in)
                aux_rules.append(Rule(aux, vars_in, f))
                return PredAtom(aux, [Var(v) for v in vars_in])
            if isinstance(f, Star):
                left = walk(f.left)
                return Star(left, walk(f.right))
            if isinstance(f, Exists):
                return Exists(f.var, walk(f.body))
            return f

        new_rules.append(Rule(rule.head, rule.params, walk(rule.body)))

    return Sid(new_rules + aux_rules, declared, sid.signature)


# --- injective expansion ------------------------------------------------------

def injectify(s, deriv, sid):
    """Rebuild a structure and derivation in which every existential witness is
    a globally fresh element, so the derivation holds under the strict
    semantics.  Requires an equality-free definition system."""
    if not is_normalized(sid):
        raise NotNormalized("definition system still contains variable equalities")
    root = deriv.root
    if root.rule_index is None:
        raise ValueError("injectify needs a derivation rooted at a predicate atom")

    new_tuples = []

    def rebuild(node, param_values):
        rule = sid.rules[node.rule_index]
        val = dict(zip(rule.params, param_values))
        # witnesses equated with a constant stay pinned; others are re-minted
        pinned = set()
        for f, same in _iter_eqs(rule.body):
            if same:
                for a, b in ((f.left, f.right), (f.right, f.left)):
                    if isinstance(a, Var) and isinstance(b, Cst):
                        pinned.add(a.name)
        for var in sorted(node.exists):
            if var in pinned or var in rule.params:
                val[var] = node.exists[var]
            else:
                val[var] = mint()
        consumed = []
        for atom in rel_atoms(rule.body):
            vals = tuple(val[t.name] if isinstance(t, Var) else s.const[t.name]
                         for t in atom.args)
            consumed.append((atom.name, vals))
            new_tuples.append((atom.name, vals))
        children = []
        atoms = pred_atoms(rule.body)
        assert len(atoms) == len(node.children)
        for atom, child in zip(atoms, node.children):
            child_params = [val[t.name] if isinstance(t, Var) else s.const[t.name]
                            for t in atom.args]
            children.append(rebuild(child, child_params))
        exists = {v: val[v] for v in node.exists}
        return DNode(node.predicate, node.rule_index, param_values, exists,
                     consumed, children)

    new_root = rebuild(root, root.params)
    assert len(new_tuples) == len(set(new_tuples)), \
        "injective rebuild produced a duplicate tuple"
    rel = {name: set() for name in s.signature.relation_names}
    for name, t in new_tuples:
        rel[name].add(t)
    return Structure(s.signature, rel, s.const), Derivation(new_root)


def width_bound(sid):
    """Largest number of parameters plus existentials in any rule."""
    best = 0
    for rule in sid.rules:
        best = max(best, len(rule.params) + len(binders(rule.body)))
    return best


# --- characteristic formulas --------------------------------------------------

def characteristic_formula(deriv, sid, atom):
    """Predicate-free formula equivalent to the given unfolding: the rule
    bodies along the derivation, with children's formulas substituted for
    predicate atoms and all binders freshly renamed.  Free variables are the
    query atom's argument variables."""
    assert isinstance(atom, PredAtom)
    counter = itertools.count(1)

    def build(node):
        rule = sid.rules[node.rule_index]
        ren = {v: f"w{next(counter)}" for v in binders(rule.body)}
        body = _rename_binders(rule.body, ren)
        cursor = [0]

        def replace(f):
            if isinstance(f, PredAtom):
                child = node.children[cursor[0]]
                cursor[0] += 1
                child_formula = build(child)
                child_rule = sid.rules[child.rule_index]
                mapping = dict(zip(child_rule.params, f.args))
                return subst(child_formula, mapping)
            if isinstance(f, Star):
                left = replace(f.left)
                return Star(left, replace(f.right))
            if isinstance(f, Exists):
                return Exists(f.var, replace(f.body))
            return f

        out = replace(body)
        assert cursor[0] == len(node.children)
        return out

    root = deriv.root
    if root.rule_index is None:
        raise ValueError("characteristic formulas need a predicate-rooted derivation")
    formula = build(root)
    rule = sid.rules[root.rule_index]
    mapping = dict(zip(rule.params, atom.args))
    return subst(formula, mapping)


def _rename_binders(phi, ren):
    """Rename bound variables (assumed unique) and their occurrences."""
    if isinstance(phi, Exists):
        return Exists(ren.get(phi.var, phi.var), _rename_binders(phi.body, ren))
    if isinstance(phi, Star):
        return Star(_rename_binders(phi.left, ren), _rename_binders(phi.right, ren))
    return subst(phi, {old: Var(new) for old, new in ren.items()})
