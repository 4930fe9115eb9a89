"""Weak second-order logic over finite relational structures.

First-order quantifiers range over a finite carrier (the structure's elements
plus padding standing in for the rest of an infinite universe); second-order
quantifiers range over finite relations on that carrier.  check_so decides
sentences by one of three routes: instantiating an existential prefix from a
hint, grounding to CNF and running the built-in SAT solver, or direct
recursive evaluation.
"""

import itertools

from . import _sat
from ._scan import Scanner
from .config import DEFAULT
from .core import Store, mint
from .errors import CarrierTooLarge, HintArityMismatch
from .slr import Cst, Var


# --- syntax -------------------------------------------------------------------

class SoFormula:
    def key(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, SoFormula) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return so_to_text(self)


class Top(SoFormula):
    def key(self):
        return ("top",)


class Bot(SoFormula):
    def key(self):
        return ("bot",)


class Rel(SoFormula):
    def __init__(self, name, args):
        self.name, self.args = name, tuple(args)

    def key(self):
        return ("rel", self.name, tuple(a.key() for a in self.args))


class SoAtom(SoFormula):
    def __init__(self, name, args):
        self.name, self.args = name, tuple(args)

    def key(self):
        return ("soat", self.name, tuple(a.key() for a in self.args))


class Eq(SoFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("eq", self.left.key(), self.right.key())


class Neq(SoFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("neq", self.left.key(), self.right.key())


class Not(SoFormula):
    def __init__(self, body):
        self.body = body

    def key(self):
        return ("not", self.body.key())


class And(SoFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("and", self.left.key(), self.right.key())


class Or(SoFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("or", self.left.key(), self.right.key())


class Implies(SoFormula):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def key(self):
        return ("imp", self.left.key(), self.right.key())


class ExistsFO(SoFormula):
    def __init__(self, var, body):
        self.var, self.body = var, body

    def key(self):
        return ("exfo", self.var, self.body.key())


class ForallFO(SoFormula):
    def __init__(self, var, body):
        self.var, self.body = var, body

    def key(self):
        return ("allfo", self.var, self.body.key())


class ExistsSO(SoFormula):
    def __init__(self, name, arity, body):
        self.name, self.arity, self.body = name, arity, body

    def key(self):
        return ("exso", self.name, self.arity, self.body.key())


class ForallSO(SoFormula):
    def __init__(self, name, arity, body):
        self.name, self.arity, self.body = name, arity, body

    def key(self):
        return ("allso", self.name, self.arity, self.body.key())


def conj(parts):
    parts = [p for p in parts if not isinstance(p, Top)]
    if any(isinstance(p, Bot) for p in parts):
        return Bot()
    if not parts:
        return Top()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts):
    parts = [p for p in parts if not isinstance(p, Bot)]
    if any(isinstance(p, Top) for p in parts):
        return Top()
    if not parts:
        return Bot()
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def desugar(phi):
    """Rewrite to the core connectives: atoms, =, ~, &, ex, ex2."""
    if isinstance(phi, (Top, Bot, Rel, SoAtom, Eq)):
        return phi
    if isinstance(phi, Neq):
        return Not(Eq(phi.left, phi.right))
    if isinstance(phi, Not):
        return Not(desugar(phi.body))
    if isinstance(phi, And):
        return And(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Or):
        return Not(And(Not(desugar(phi.left)), Not(desugar(phi.right))))
    if isinstance(phi, Implies):
        return Not(And(desugar(phi.left), Not(desugar(phi.right))))
    if isinstance(phi, ExistsFO):
        return ExistsFO(phi.var, desugar(phi.body))
    if isinstance(phi, ForallFO):
        return Not(ExistsFO(phi.var, Not(desugar(phi.body))))
    if isinstance(phi, ExistsSO):
        return ExistsSO(phi.name, phi.arity, desugar(phi.body))
    if isinstance(phi, ForallSO):
        return Not(ExistsSO(phi.name, phi.arity, Not(desugar(phi.body))))
    raise TypeError(phi)


def quantifier_rank(phi):
    if isinstance(phi, (Top, Bot, Rel, SoAtom, Eq, Neq)):
        return 0
    if isinstance(phi, Not):
        return quantifier_rank(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        return max(quantifier_rank(phi.left), quantifier_rank(phi.right))
    if isinstance(phi, (ExistsFO, ForallFO, ExistsSO, ForallSO)):
        return 1 + quantifier_rank(phi.body)
    raise TypeError(phi)


def free_fo_vars(phi, bound=frozenset()):
    if isinstance(phi, (Top, Bot)):
        return set()
    if isinstance(phi, (Rel, SoAtom)):
        return {a.name for a in phi.args if isinstance(a, Var) and a.name not in bound}
    if isinstance(phi, (Eq, Neq)):
        return {t.name for t in (phi.left, phi.right)
                if isinstance(t, Var) and t.name not in bound}
    if isinstance(phi, Not):
        return free_fo_vars(phi.body, bound)
    if isinstance(phi, (And, Or, Implies)):
        return free_fo_vars(phi.left, bound) | free_fo_vars(phi.right, bound)
    if isinstance(phi, (ExistsFO, ForallFO)):
        return free_fo_vars(phi.body, bound | {phi.var})
    if isinstance(phi, (ExistsSO, ForallSO)):
        return free_fo_vars(phi.body, bound)
    raise TypeError(phi)


def free_so_vars(phi, signature=None, bound=frozenset()):
    """Free second-order names with their arities."""
    out = {}

    def walk(f, bound):
        if isinstance(f, SoAtom):
            if f.name not in bound and \
                    (signature is None or not signature.has_relation(f.name)):
                out.setdefault(f.name, len(f.args))
        elif isinstance(f, Not):
            walk(f.body, bound)
        elif isinstance(f, (And, Or, Implies)):
            walk(f.left, bound)
            walk(f.right, bound)
        elif isinstance(f, (ExistsFO, ForallFO)):
            walk(f.body, bound)
        elif isinstance(f, (ExistsSO, ForallSO)):
            walk(f.body, bound | {f.name})

    walk(phi, bound)
    return out


# --- parsing ------------------------------------------------------------------

def parse_so(text, signature=None):
    sc = Scanner(text)
    consts = set(signature.constants) if signature else set()

    def term():
        name = sc.expect_name()
        return Cst(name) if name in consts else Var(name)

    def quant():
        kw = sc.cur.text
        sc.accept("name", kw)
        if kw in ("all", "ex"):
            v = sc.expect_name()
            sc.expect("sym", ".")
            body = formula()
            return ForallFO(v, body) if kw == "all" else ExistsFO(v, body)
        name = sc.expect_name()
        sc.expect("sym", "/")
        arity = sc.expect_int()
        sc.expect("sym", ".")
        body = formula()
        return ForallSO(name, arity, body) if kw == "all2" else ExistsSO(name, arity, body)

    def primary():
        if sc.at_name("all") or sc.at_name("ex") or sc.at_name("all2") or sc.at_name("ex2"):
            return quant()
        if sc.accept("sym", "("):
            f = formula()
            sc.expect("sym", ")")
            return f
        if sc.accept("name", "true"):
            return Top()
        if sc.accept("name", "false"):
            return Bot()
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
        if signature is not None and signature.has_relation(name):
            if signature.arity(name) != len(args):
                sc.error(f"relation {name} expects {signature.arity(name)} arguments")
            return Rel(name, args)
        return SoAtom(name, args)

    def unary():
        if sc.accept("sym", "~"):
            return Not(unary())
        return primary()

    def conjunction():
        f = unary()
        while sc.accept("sym", "&"):
            f = And(f, unary())
        return f

    def disjunction():
        f = conjunction()
        while sc.accept("sym", "|"):
            f = Or(f, conjunction())
        return f

    def formula():
        f = disjunction()
        if sc.accept("sym", "->"):
            return Implies(f, formula())
        return f

    out = formula()
    sc.expect_done()
    return out


def so_to_text(phi):
    def prec(f):
        # A quantifier's body extends as far right as possible, so quantified
        # formulas bind loosest and need parentheses under any binary operator.
        if isinstance(f, (ExistsFO, ForallFO, ExistsSO, ForallSO)):
            return 0
        if isinstance(f, Implies):
            return 1
        if isinstance(f, Or):
            return 2
        if isinstance(f, And):
            return 3
        if isinstance(f, Not):
            return 4
        return 5

    def wrap(f, level):
        text = go(f)
        return f"({text})" if prec(f) < level else text

    def go(f):
        if isinstance(f, Top):
            return "true"
        if isinstance(f, Bot):
            return "false"
        if isinstance(f, (Rel, SoAtom)):
            return f"{f.name}({','.join(a.name for a in f.args)})"
        if isinstance(f, Eq):
            return f"{f.left.name} = {f.right.name}"
        if isinstance(f, Neq):
            return f"{f.left.name} != {f.right.name}"
        if isinstance(f, Not):
            return f"~{wrap(f.body, 5)}"
        if isinstance(f, And):
            return f"{wrap(f.left, 3)} & {wrap(f.right, 4)}"
        if isinstance(f, Or):
            return f"{wrap(f.left, 2)} | {wrap(f.right, 3)}"
        if isinstance(f, Implies):
            return f"{wrap(f.left, 2)} -> {wrap(f.right, 1)}"
        if isinstance(f, ExistsFO):
            return f"ex {f.var} . {go(f.body)}"
        if isinstance(f, ForallFO):
            return f"all {f.var} . {go(f.body)}"
        if isinstance(f, ExistsSO):
            return f"ex2 {f.name}/{f.arity} . {go(f.body)}"
        if isinstance(f, ForallSO):
            return f"all2 {f.name}/{f.arity} . {go(f.body)}"
        raise TypeError(f)

    return go(phi)


# --- evaluation ---------------------------------------------------------------

class _Budget:
    def __init__(self, n):
        self.n = n

    def spend(self, amount=1):
        self.n -= amount
        if self.n < 0:
            raise CarrierTooLarge("evaluation budget exhausted")


def _subsets(universe, arity, budget):
    """Finite relations over the carrier, smallest first, deterministic."""
    cells = sorted(itertools.product(universe, repeat=arity))
    for r in range(len(cells) + 1):
        for chosen in itertools.combinations(cells, r):
            budget.spend()
            yield frozenset(chosen)


def eval_so(s, phi, fo, so, carrier, budget):
    """Recursive truth evaluation; fo maps variables to elements, so maps
    second-order names to (arity, set-of-tuples)."""
    def value(t):
        if isinstance(t, Cst):
            return s.const[t.name]
        if t.name in fo:
            return fo[t.name]
        raise ValueError(f"unbound variable {t.name}")

    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bot):
        return False
    if isinstance(phi, Rel):
        return tuple(value(a) for a in phi.args) in s.rel[phi.name]
    if isinstance(phi, SoAtom):
        if phi.name not in so:
            raise ValueError(f"unbound second-order name {phi.name}")
        arity, tuples = so[phi.name]
        if arity != len(phi.args):
            raise HintArityMismatch(
                f"{phi.name} used with {len(phi.args)} arguments, has arity {arity}")
        return tuple(value(a) for a in phi.args) in tuples
    if isinstance(phi, Eq):
        return value(phi.left) == value(phi.right)
    if isinstance(phi, Neq):
        return value(phi.left) != value(phi.right)
    if isinstance(phi, Not):
        return not eval_so(s, phi.body, fo, so, carrier, budget)
    if isinstance(phi, And):
        return eval_so(s, phi.left, fo, so, carrier, budget) and \
            eval_so(s, phi.right, fo, so, carrier, budget)
    if isinstance(phi, Or):
        return eval_so(s, phi.left, fo, so, carrier, budget) or \
            eval_so(s, phi.right, fo, so, carrier, budget)
    if isinstance(phi, Implies):
        return (not eval_so(s, phi.left, fo, so, carrier, budget)) or \
            eval_so(s, phi.right, fo, so, carrier, budget)
    if isinstance(phi, (ExistsFO, ForallFO)):
        want = isinstance(phi, ExistsFO)
        for w in carrier:
            budget.spend()
            fo2 = dict(fo)
            fo2[phi.var] = w
            if eval_so(s, phi.body, fo2, so, carrier, budget) == want:
                return want
        return not want
    if isinstance(phi, (ExistsSO, ForallSO)):
        want = isinstance(phi, ExistsSO)
        for rel in _subsets(carrier, phi.arity, budget):
            so2 = dict(so)
            so2[phi.name] = (phi.arity, rel)
            if eval_so(s, phi.body, fo, so2, carrier, budget) == want:
                return want
        return not want
    raise TypeError(phi)


# --- grounding and the SAT route ----------------------------------------------

def _strip_exists_prefix(phi):
    prefix = []
    while True:
        if isinstance(phi, ExistsFO):
            prefix.append(("fo", phi.var))
            phi = phi.body
        elif isinstance(phi, ExistsSO):
            prefix.append(("so", phi.name, phi.arity))
            phi = phi.body
        else:
            return prefix, phi


def _matrix_so_profile(phi):
    """(has_so_quantifier, max_quantified_arity) inside a formula."""
    if isinstance(phi, (Top, Bot, Rel, SoAtom, Eq, Neq)):
        return (False, 0)
    if isinstance(phi, Not):
        return _matrix_so_profile(phi.body)
    if isinstance(phi, (And, Or, Implies)):
        a = _matrix_so_profile(phi.left)
        b = _matrix_so_profile(phi.right)
        return (a[0] or b[0], max(a[1], b[1]))
    if isinstance(phi, (ExistsFO, ForallFO)):
        return _matrix_so_profile(phi.body)
    if isinstance(phi, (ExistsSO, ForallSO)):
        has, ar = _matrix_so_profile(phi.body)
        return (True, max(ar, phi.arity))
    raise TypeError(phi)


def _ground(s, phi, fo, fixed_so, lit_names, carrier, budget):
    """Fold a formula into a boolean expression over per-tuple atoms of the
    prefix's second-order names.  Matrix second-order quantifiers must be
    monadic; they are expanded over carrier subsets."""
    budget.spend()

    def value(t):
        return s.const[t.name] if isinstance(t, Cst) else fo[t.name]

    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bot):
        return False
    if isinstance(phi, Rel):
        return tuple(value(a) for a in phi.args) in s.rel[phi.name]
    if isinstance(phi, SoAtom):
        vals = tuple(value(a) for a in phi.args)
        if phi.name in fixed_so:
            arity, tuples = fixed_so[phi.name]
            if arity != len(vals):
                raise HintArityMismatch(phi.name)
            return vals in tuples
        if phi.name in lit_names:
            if lit_names[phi.name] != len(vals):
                raise HintArityMismatch(phi.name)
            return ("lit", (phi.name, vals))
        raise ValueError(f"unbound second-order name {phi.name}")
    if isinstance(phi, Eq):
        return value(phi.left) == value(phi.right)
    if isinstance(phi, Neq):
        return value(phi.left) != value(phi.right)
    if isinstance(phi, Not):
        g = _ground(s, phi.body, fo, fixed_so, lit_names, carrier, budget)
        if g is True:
            return False
        if g is False:
            return True
        return ("not", g)
    if isinstance(phi, (And, Or, Implies)):
        if isinstance(phi, Implies):
            return _ground(s, Or(Not(phi.left), phi.right), fo, fixed_so,
                           lit_names, carrier, budget)
        a = _ground(s, phi.left, fo, fixed_so, lit_names, carrier, budget)
        if isinstance(phi, And):
            if a is False:
                return False
            b = _ground(s, phi.right, fo, fixed_so, lit_names, carrier, budget)
            return _fold_and([a, b])
        if a is True:
            return True
        b = _ground(s, phi.right, fo, fixed_so, lit_names, carrier, budget)
        return _fold_or([a, b])
    if isinstance(phi, (ExistsFO, ForallFO)):
        parts = []
        for w in carrier:
            fo2 = dict(fo)
            fo2[phi.var] = w
            g = _ground(s, phi.body, fo2, fixed_so, lit_names, carrier, budget)
            if isinstance(phi, ExistsFO) and g is True:
                return True
            if isinstance(phi, ForallFO) and g is False:
                return False
            parts.append(g)
        return _fold_or(parts) if isinstance(phi, ExistsFO) else _fold_and(parts)
    if isinstance(phi, (ExistsSO, ForallSO)):
        if phi.arity != 1:
            raise CarrierTooLarge(
                "cannot expand a non-monadic quantifier inside the matrix")
        parts = []
        for rel in _subsets(carrier, 1, budget):
            fixed2 = dict(fixed_so)
            fixed2[phi.name] = (1, rel)
            g = _ground(s, phi.body, fo, fixed2, lit_names, carrier, budget)
            if isinstance(phi, ExistsSO) and g is True:
                return True
            if isinstance(phi, ForallSO) and g is False:
                return False
            parts.append(g)
        return _fold_or(parts) if isinstance(phi, ExistsSO) else _fold_and(parts)
    raise TypeError(phi)


def _fold_and(parts):
    flat = []
    for p in parts:
        if p is False:
            return False
        if p is True:
            continue
        if isinstance(p, tuple) and p[0] == "and":
            flat.extend(p[1])
        else:
            flat.append(p)
    if not flat:
        return True
    if len(flat) == 1:
        return flat[0]
    return ("and", flat)


def _fold_or(parts):
    flat = []
    for p in parts:
        if p is True:
            return True
        if p is False:
            continue
        if isinstance(p, tuple) and p[0] == "or":
            flat.extend(p[1])
        else:
            flat.append(p)
    if not flat:
        return False
    if len(flat) == 1:
        return flat[0]
    return ("or", flat)


class _Cnf:
    def __init__(self):
        self.solver = _sat.Solver()
        self.next_var = 1
        self.atom_var = {}

    def var_for_atom(self, atom):
        if atom not in self.atom_var:
            self.atom_var[atom] = self.next_var
            self.next_var += 1
        return self.atom_var[atom]

    def fresh(self):
        v = self.next_var
        self.next_var += 1
        return v

    def encode(self, expr):
        """Return a literal equivalent to the expression."""
        if expr[0] == "lit":
            return self.var_for_atom(expr[1])
        if expr[0] == "not":
            return -self.encode(expr[1])
        lits = [self.encode(p) for p in expr[1]]
        v = self.fresh()
        if expr[0] == "and":
            for l in lits:
                self.solver.add_clause([-v, l])
            self.solver.add_clause([v] + [-l for l in lits])
        else:
            for l in lits:
                self.solver.add_clause([v, -l])
            self.solver.add_clause([-v] + lits)
        return v


def _sat_decide(s, expr):
    if expr is True:
        return True
    if expr is False:
        return False
    cnf = _Cnf()
    root = cnf.encode(expr)
    cnf.solver.add_clause([root])
    return cnf.solver.solve()


# --- the decision procedure ---------------------------------------------------

def _store_parts(store):
    if store is None:
        return {}, {}
    if isinstance(store, Store):
        return dict(store.fo), dict(store.so)
    return dict(store), {}


def _build_carrier(s, phi, fo, so, padding, extra_carrier):
    elems = set(s.dom) | set(s.extra) | set(fo.values()) | set(extra_carrier)
    for _, tuples in so.values():
        for t in tuples:
            elems.update(t)
    if padding is None:
        qr = quantifier_rank(phi)
        if qr > 12:
            raise CarrierTooLarge(
                f"default padding for quantifier rank {qr} is too large; "
                "pass an explicit padding")
        padding = 2 ** qr
    pads = [mint() for _ in range(padding)]
    return sorted(elems) + pads


def check_so(s, phi, store=None, limits=DEFAULT, padding=None, extra_carrier=()):
    """Decide satisfaction of a second-order formula over the structure plus
    padding elements representing the rest of the universe."""
    fo, so = _store_parts(store)
    missing = sorted(free_fo_vars(phi) - set(fo))
    if missing:
        raise ValueError(f"store does not bind {missing}")
    for name, arity in free_so_vars(phi, s.signature).items():
        if name not in so:
            raise ValueError(f"store does not bind second-order name {name}")
        if so[name][0] != arity:
            raise HintArityMismatch(name)
    carrier = _build_carrier(s, phi, fo, so, padding, extra_carrier)
    budget = _Budget(limits.so_enum_budget)

    prefix, matrix = _strip_exists_prefix(phi)
    has_so, max_ar = _matrix_so_profile(matrix)
    if prefix and max_ar <= 1:
        if has_so and len(carrier) > limits.mso_carrier:
            raise CarrierTooLarge(
                f"carrier of {len(carrier)} exceeds the set-quantifier cutoff")
        fo_vars = [p[1] for p in prefix if p[0] == "fo"]
        so_vars = {p[1]: p[2] for p in prefix if p[0] == "so"}
        fixed = {name: v for name, v in so.items() if name not in so_vars}
        for combo in itertools.product(carrier, repeat=len(fo_vars)):
            budget.spend()
            env = dict(fo)
            env.update(zip(fo_vars, combo))
            expr = _ground(s, matrix, env, fixed, so_vars, carrier, budget)
            if _sat_decide(s, expr):
                return True
        return False

    whole_has_so, whole_ar = _matrix_so_profile(phi)
    if whole_ar >= 2 and len(carrier) > limits.so2_carrier:
        raise CarrierTooLarge(
            f"carrier of {len(carrier)} exceeds the relation-quantifier cutoff")
    if whole_has_so and len(carrier) > limits.mso_carrier:
        raise CarrierTooLarge(
            f"carrier of {len(carrier)} exceeds the set-quantifier cutoff")
    so_env = {name: (ar, frozenset(tuples)) for name, (ar, tuples) in so.items()}
    return eval_so(s, phi, fo, so_env, carrier, budget)


def check_so_with_hint(s, phi, hint, limits=DEFAULT, padding=0, extra_carrier=()):
    """Decide satisfaction after instantiating the formula's existential
    prefix from the hint store; prefix variables the hint does not mention
    stay quantified."""
    fo_hint, so_hint = _store_parts(hint)
    prefix, matrix = _strip_exists_prefix(phi)
    prefix_fo = {item[1] for item in prefix if item[0] == "fo"}
    fo = {v: val for v, val in fo_hint.items() if v not in prefix_fo}
    so = {}
    rest = []
    for item in prefix:
        if item[0] == "fo":
            var = item[1]
            if var in fo_hint:
                fo[var] = fo_hint[var]
            else:
                rest.append(item)
        else:
            name, arity = item[1], item[2]
            if name in so_hint:
                har, tuples = so_hint[name]
                if har != arity:
                    raise HintArityMismatch(
                        f"{name} has arity {arity}, hint provides {har}")
                so[name] = (arity, frozenset(tuples))
            else:
                rest.append(item)
    remaining = matrix
    for item in reversed(rest):
        if item[0] == "fo":
            remaining = ExistsFO(item[1], remaining)
        else:
            remaining = ExistsSO(item[1], item[2], remaining)
    extra = set(extra_carrier) | set(fo.values())
    for arity, tuples in so.values():
        for t in tuples:
            extra.update(t)
    carrier = _build_carrier(s, remaining, fo, so, padding, sorted(extra))
    budget = _Budget(limits.so_enum_budget)
    has_so, max_ar = _matrix_so_profile(remaining)
    if max_ar >= 2 and len(carrier) > limits.so2_carrier:
        raise CarrierTooLarge("carrier too large for quantified relations")
    if has_so and len(carrier) > limits.mso_carrier:
        raise CarrierTooLarge("carrier too large for quantified sets")
    return eval_so(s, remaining, fo, so, carrier, budget)
