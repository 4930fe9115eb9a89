"""Tree decompositions: exact treewidth, verification, and the reduced form
used to shuttle between decompositions and rule unfoldings.

A reduced decomposition of width k satisfies six conditions: every non-guard
tuple is witnessed by a leaf and every leaf witnesses exactly one tuple (a
perfect assignment), nodes have at most two children, a binary node's children
repeat its bag, all bags have exactly k+1 elements, and the bags along a unary
edge differ by at most one swapped element.  Guard tuples are exempt from the
witnessing conditions; their elements still obey the base coverage and
connectivity conditions.
"""

import itertools

from .config import DEFAULT
from .core import Structure, mint
from .errors import (
    GuardMismatch,
    GuardViolation,
    NotReduced,
    SupportTooLarge,
    WidthExceeded,
)
from .slr import DNode, Derivation, PredAtom, RelAtom, Var, binders, pred_atoms, rel_atoms


class TreeDecomposition:
    """Rooted tree of bags.  parents[i] is the index of node i's parent, or -1
    for the single root.  fresh_elements records padding elements that do not
    come from the decomposed structure."""

    def __init__(self, bags, parents, fresh_elements=()):
        self.bags = [frozenset(b) for b in bags]
        self.parents = list(parents)
        self.fresh_elements = frozenset(fresh_elements)
        assert len(self.bags) == len(self.parents)
        roots = [i for i, p in enumerate(self.parents) if p == -1]
        assert len(roots) == 1, "decomposition must have exactly one root"
        self.root = roots[0]
        self._children = [[] for _ in self.bags]
        for i, p in enumerate(self.parents):
            if p != -1:
                assert 0 <= p < len(self.bags) and p != i
                self._children[p].append(i)
        # reject cycles: every node must reach the root
        for i in range(len(self.bags)):
            seen = set()
            j = i
            while j != -1:
                assert j not in seen, "parent links contain a cycle"
                seen.add(j)
                j = self.parents[j]

    def children(self, i):
        return list(self._children[i])

    def width(self):
        if not self.bags:
            return -1
        return max(len(b) for b in self.bags) - 1

    def all_elements(self):
        out = set()
        for b in self.bags:
            out |= b
        return out

    def preorder(self):
        out = []
        stack = [self.root]
        while stack:
            i = stack.pop()
            out.append(i)
            for c in reversed(self._children[i]):
                stack.append(c)
        return out

    def to_json(self):
        return {"nodes": [{"bag": sorted(b), "parent": p}
                          for b, p in zip(self.bags, self.parents)],
                "fresh": sorted(self.fresh_elements)}

    @staticmethod
    def from_json(data):
        nodes = data["nodes"]
        return TreeDecomposition([n["bag"] for n in nodes],
                                 [n["parent"] for n in nodes],
                                 data.get("fresh", ()))

    def render(self):
        lines = []

        def go(i, depth):
            lines.append("  " * depth + "[" + " ".join(str(v) for v in sorted(self.bags[i])) + "]")
            for c in self._children[i]:
                go(c, depth + 1)

        go(self.root, 0)
        return "\n".join(lines)

    def __repr__(self):
        return self.render()


# --- verification -------------------------------------------------------------

def verify_decomposition(s, td):
    """Check the base decomposition conditions; returns a list of violation
    descriptions (empty means the decomposition is valid).  Bags may contain
    padding elements outside the structure."""
    violations = []
    for name, t in s.all_tuples():
        elems = set(t)
        if not any(elems <= b for b in td.bags):
            violations.append(f"tuple {name}{t} is not inside any bag")
    for e in sorted(s.dom):
        holders = [i for i, b in enumerate(td.bags) if e in b]
        if not holders:
            violations.append(f"element {e} appears in no bag")
            continue
        # connectivity: among the holders, exactly one has its parent outside
        top = 0
        for i in holders:
            p = td.parents[i]
            if p == -1 or e not in td.bags[p]:
                top += 1
        if top != 1:
            violations.append(f"element {e} has a disconnected bag set")
    return violations


def _leaf_assignment(s, td):
    """Match structural leaves to non-guard tuples (tuple elements inside the
    leaf's bag) via augmenting paths; returns (matching dict leaf->tuple,
    violations)."""
    violations = []
    leaves = [i for i in range(len(td.bags)) if not td.children(i)]
    tuples = s.sigma_tuples()
    if len(leaves) != len(tuples):
        violations.append(
            f"{len(leaves)} leaves but {len(tuples)} non-guard tuples")
    candidates = {}
    for ti, (name, t) in enumerate(tuples):
        hosts = [li for li, leaf in enumerate(leaves) if set(t) <= td.bags[leaf]]
        if not hosts:
            violations.append(f"tuple {name}{t} fits in no leaf bag")
        candidates[ti] = hosts
    match_leaf = {}  # leaf list index -> tuple index

    def augment(ti, seen):
        for li in candidates[ti]:
            if li in seen:
                continue
            seen.add(li)
            if li not in match_leaf or augment(match_leaf[li], seen):
                match_leaf[li] = ti
                return True
        return False

    matched = sum(augment(ti, set()) for ti in range(len(tuples)))
    if matched < len(tuples):
        violations.append("no perfect assignment of tuples to leaves")
    matching = {leaves[li]: tuples[ti] for li, ti in match_leaf.items()}
    return matching, violations


def verify_reduced(s, td, k):
    """Check the six reduced-form conditions at width k on top of the base
    conditions; returns a list of violations."""
    violations = list(verify_decomposition(s, td))
    _, leaf_violations = _leaf_assignment(s, td)
    violations.extend(leaf_violations)
    for i, bag in enumerate(td.bags):
        kids = td.children(i)
        if len(kids) > 2:
            violations.append(f"node {i} has {len(kids)} children")
        if len(bag) != k + 1:
            violations.append(f"bag of node {i} has {len(bag)} elements, expected {k + 1}")
        if len(kids) == 2:
            for c in kids:
                if td.bags[c] != bag:
                    violations.append(
                        f"binary node {i} has child {c} with a different bag")
        if len(kids) == 1:
            c = kids[0]
            if len(bag - td.bags[c]) > 1:
                violations.append(
                    f"unary edge {i}->{c} changes more than one element")
    return violations


# --- exact treewidth ----------------------------------------------------------

def exact_treewidth(s, limits=DEFAULT):
    """Exact treewidth of the structure's element graph (tuples induce
    cliques) with an optimal decomposition, by dynamic programming over vertex
    subsets.  The empty structure has treewidth -1."""
    verts = sorted(s.dom)
    n = len(verts)
    if n > limits.treewidth_support:
        raise SupportTooLarge(f"{n} elements exceeds the treewidth cutoff")
    if n == 0:
        return -1, TreeDecomposition([frozenset()], [-1])
    index = {v: i for i, v in enumerate(verts)}
    adj = [0] * n
    for _, t in s.all_tuples():
        for a, b in itertools.combinations(set(t), 2):
            adj[index[a]] |= 1 << index[b]
            adj[index[b]] |= 1 << index[a]

    def reach_outside(S, v):
        """Vertices outside S∪{v} reachable from v via paths inside S."""
        visited = (1 << v)
        frontier = adj[v] & ~visited
        out = 0
        while frontier:
            out |= frontier & ~S
            inner = frontier & S & ~visited
            visited |= frontier
            frontier = 0
            m = inner
            while m:
                b = m & -m
                frontier |= adj[b.bit_length() - 1] & ~visited
                m ^= b

        return out & ~(1 << v)

    full = (1 << n) - 1
    tw = [0] * (full + 1)
    choice = [0] * (full + 1)
    tw[0] = -1
    subsets = sorted(range(full + 1), key=lambda m: (bin(m).count("1"), m))
    for S in subsets:
        if S == 0:
            continue
        best = None
        best_v = None
        m = S
        while m:
            b = m & -m
            v = b.bit_length() - 1
            m ^= b
            rest = S & ~(1 << v)
            cost = max(tw[rest], bin(reach_outside(rest, v)).count("1"))
            if best is None or cost < best:
                best, best_v = cost, v
        tw[S] = best
        choice[S] = best_v

    # recover the elimination order (choice peels the last-eliminated vertex)
    order = []
    S = full
    while S:
        v = choice[S]
        order.append(v)
        S &= ~(1 << v)
    order.reverse()

    position = {v: i for i, v in enumerate(order)}
    bags = []
    parents = []
    node_of = {}
    eliminated = 0
    for i, v in enumerate(order):
        q = reach_outside(eliminated, v)
        bag = {verts[v]}
        partners = []
        m = q
        while m:
            b = m & -m
            w = b.bit_length() - 1
            bag.add(verts[w])
            partners.append(w)
            m ^= b
        node_of[v] = len(bags)
        bags.append(bag)
        parents.append(None)  # fixed below
        if partners:
            first = min(partners, key=lambda w: position[w])
            parents[-1] = ("v", first)
        elif i + 1 < len(order):
            parents[-1] = ("v", order[i + 1])
        else:
            parents[-1] = -1
        eliminated |= 1 << v
    resolved = [p if p == -1 else node_of[p[1]] for p in parents]
    td = TreeDecomposition(bags, resolved)
    return tw[full], td


# --- reduction to the six-condition form --------------------------------------

class _Node:
    __slots__ = ("bag", "children", "witness")

    def __init__(self, bag, children=None, witness=None):
        self.bag = set(bag)
        self.children = children if children is not None else []
        self.witness = witness


def _to_mutable(td):
    nodes = {i: _Node(td.bags[i]) for i in range(len(td.bags))}
    for i, p in enumerate(td.parents):
        if p != -1:
            nodes[p].children.append(nodes[i])
    return nodes[td.root]


def _to_decomposition(root, fresh):
    bags, parents = [], []

    def go(node, parent_index):
        i = len(bags)
        bags.append(frozenset(node.bag))
        parents.append(parent_index)
        for c in node.children:
            go(c, i)

    go(root, -1)
    return TreeDecomposition(bags, parents, fresh)


def reduce_decomposition(s, td, k, limits=DEFAULT):
    """Rebuild a valid decomposition into the six-condition reduced form at
    width k.  Raises WidthExceeded when the input (or the structure's
    constants) cannot fit width k, and ValueError on invalid input."""
    base = verify_decomposition(s, td)
    if base:
        raise ValueError("input decomposition is invalid: " + "; ".join(base))
    if td.width() > k:
        raise WidthExceeded(f"input has width {td.width()}, target is {k}")
    tuples = s.sigma_tuples()
    if not tuples:
        raise ValueError("reduction needs at least one non-guard tuple")
    root = _to_mutable(td)
    fresh = set()

    # one new witness leaf per tuple, under the first covering node in preorder
    def preorder(node):
        yield node
        for c in list(node.children):
            yield from preorder(c)

    for name, t in tuples:
        for node in preorder(root):
            if set(t) <= node.bag:
                node.children.append(_Node(node.bag, witness=(name, t)))
                break

    # prune subtrees that contain no witness leaf
    def prune(node):
        node.children = [c for c in node.children if prune(c)]
        return bool(node.children) or node.witness is not None

    keep = prune(root)
    assert keep, "a witnessed tuple guarantees at least one leaf"

    # binarize: a node with more than two children delegates the tail to a
    # copy of itself
    def binarize(node):
        while len(node.children) > 2:
            copy = _Node(node.bag, node.children[1:])
            node.children = [node.children[0], copy]
        for c in node.children:
            binarize(c)

    binarize(root)

    # insert a copy of the parent's bag above binary children whose bags differ
    def equalize(node):
        if len(node.children) == 2:
            for idx, c in enumerate(node.children):
                if c.bag != node.bag:
                    node.children[idx] = _Node(node.bag, [c])
        for c in node.children:
            equalize(c)

    equalize(root)

    # pad every bag to exactly k+1 elements, top-down; the root absorbs
    # elements no bag covers yet (e.g. constants outside all tuples)
    covered = set()
    for node in preorder(root):
        covered |= node.bag
    uncovered = sorted(set(s.dom) - covered)

    def pad(node, parent_bag):
        need = (k + 1) - len(node.bag)
        if need < 0:
            raise WidthExceeded(f"bag of size {len(node.bag)} exceeds {k + 1}")
        pool = sorted(parent_bag - node.bag)
        take = pool[:need]
        node.bag |= set(take)
        for _ in range((k + 1) - len(node.bag)):
            e = mint()
            fresh.add(e)
            node.bag.add(e)
        for c in node.children:
            pad(c, node.bag)

    root_pool = uncovered[:max(0, (k + 1) - len(root.bag))]
    root.bag |= set(root_pool)
    uncovered = uncovered[len(root_pool):]
    pad(root, set())

    # leftover uncovered elements ride in a chain of new roots, each swapping
    # one element of the old root bag
    if uncovered:
        drop = min(root.bag)
        base_bag = set(root.bag) - {drop}
        for e in uncovered:
            root = _Node(base_bag | {e}, [root])

    # interpolate unary edges whose bags differ by several swaps
    def interpolate(node):
        if len(node.children) == 1:
            c = node.children[0]
            out = sorted(node.bag - c.bag)
            into = sorted(c.bag - node.bag)
            assert len(out) == len(into)
            current = c
            # build from the child's side upwards, one swap per step
            for j in range(len(out) - 1, 0, -1):
                bag = set(current.bag) - {into[j]} | {out[j]}
                current = _Node(bag, [current])
            node.children[0] = current
        for c in list(node.children):
            interpolate(c)

    interpolate(root)
    out_td = _to_decomposition(root, fresh)
    leftover = verify_reduced(s, out_td, k)
    assert not leftover, "reduction failed: " + "; ".join(leftover)
    return out_td


# --- rule-shape recognition ---------------------------------------------------

def classify_rule(rule, guard):
    """Recognise the structural role a rule plays in a width-k system:
    ("split",), ("swap", i), ("leaf", R, positions), ("top", pred, m) or
    ("emptop",); None for anything else."""
    from .slr import Emp, Eq, Neq, Exists, Star

    def has_eq(f):
        if isinstance(f, (Eq, Neq)):
            return True
        if isinstance(f, Star):
            return has_eq(f.left) or has_eq(f.right)
        if isinstance(f, Exists):
            return has_eq(f.body)
        return False

    if has_eq(rule.body):
        return None
    exvars = binders(rule.body)
    rels = rel_atoms(rule.body)
    preds = pred_atoms(rule.body)
    params = list(rule.params)

    if not exvars and not rels and not preds and isinstance(rule.body, Emp):
        return ("emptop",) if not params else None
    if not exvars and not rels and len(preds) == 2:
        want = tuple(Var(p) for p in params)
        if all(a.name == rule.head and a.args == want for a in preds):
            return ("split",)
        return None
    if len(exvars) == 1 and len(rels) == 1 and len(preds) == 1 and guard \
            and params:
        y = exvars[0]
        r = rels[0]
        p = preds[0]
        if r.name == guard and r.args == (Var(y),) and p.name == rule.head:
            hits = [i for i, a in enumerate(p.args)
                    if isinstance(a, Var) and a.name == y]
            rest_ok = all(
                isinstance(a, Var) and (a.name == y or a.name == params[i])
                for i, a in enumerate(p.args))
            if len(hits) == 1 and rest_ok and len(p.args) == len(params):
                return ("swap", hits[0])
        return None
    if not exvars and not preds and len(rels) == 1:
        r = rels[0]
        if r.name == guard:
            return None
        positions = []
        for a in r.args:
            if not isinstance(a, Var) or a.name not in params:
                return None
            positions.append(params.index(a.name))
        return ("leaf", r.name, tuple(positions))
    if exvars and not params and len(preds) == 1 and guard:
        m = len(exvars)
        if len(rels) != m:
            return None
        guarded = {r.args[0].name for r in rels
                   if r.name == guard and len(r.args) == 1 and isinstance(r.args[0], Var)}
        if guarded != set(exvars):
            return None
        p = preds[0]
        if tuple(a.name if isinstance(a, Var) else None for a in p.args) == tuple(exvars):
            return ("top", p.name, m)
        return None
    return None


def _shape_index(sid, pred, guard):
    """Map shape descriptors to rule indices for one predicate."""
    out = {}
    for ri in sid.rules_by_head.get(pred, ()):
        shape = classify_rule(sid.rules[ri], guard)
        if shape is not None:
            out.setdefault(shape, ri)
    return out


# --- derivations <-> decompositions -------------------------------------------

def derivation_to_decomposition(s, deriv, sid):
    """Read a width-bounded derivation as a reduced decomposition: parameter
    values become bags, splits become binary nodes, guard-consuming swaps
    become unary steps, and relation-consuming rules become witness leaves.
    A derivation rooted at an entry rule is unwrapped first; otherwise the
    root's parameters must lie outside the structure's guard set (their guard
    tuples were consumed above this subtree)."""
    guard = s.signature.guard
    root = deriv.root
    if root.rule_index is None:
        raise ValueError("expected a derivation rooted at a predicate atom")
    consumed_above = set()
    entry_shape = classify_rule(sid.rules[root.rule_index], guard)
    if entry_shape is not None and entry_shape[0] == "top":
        root = root.children[0]
        consumed_above = set(root.params)
    guard_elems = {t[0] for t in s.rel[guard]} if guard else set()
    for v in root.params:
        if v in guard_elems and v not in consumed_above:
            raise GuardViolation(f"root parameter {v} is in the guard set")

    bags, parents = [], []

    def go(node, parent_index):
        rule = sid.rules[node.rule_index]
        shape = classify_rule(rule, guard)
        if shape is None or shape[0] not in ("split", "swap", "leaf"):
            raise ValueError(
                f"rule {rule.head} (index {node.rule_index}) has no decomposition role")
        i = len(bags)
        bags.append(frozenset(node.params))
        parents.append(parent_index)
        for c in node.children:
            go(c, i)

    go(root, -1)
    return TreeDecomposition(bags, parents)


def decomposition_to_derivation(s, td, sid, k):
    """Rebuild a derivation of the width-k system from a reduced decomposition.
    When the guard set equals the elements strictly below the root bag the
    result derives the main (k+1)-ary predicate; when it additionally covers
    the whole root bag the result is wrapped in the entry rule that consumes
    the root bag's guard tuples."""
    violations = verify_reduced(s, td, k)
    if violations:
        raise NotReduced("; ".join(violations))
    guard = s.signature.guard
    root_bag = td.bags[td.root]
    below = td.all_elements() - root_bag
    guard_elems = {t[0] for t in s.rel[guard]} if guard else set()
    if guard_elems == below:
        wrap_entry = False
    elif guard_elems == below | root_bag:
        wrap_entry = True
    else:
        raise GuardMismatch(
            f"guard set {sorted(guard_elems)} covers neither the elements "
            f"below the root bag {sorted(below)} nor those plus the root bag")
    matching, mv = _leaf_assignment(s, td)
    assert not mv

    main = None
    for name, arity in sid.arities.items():
        if arity == k + 1 and ("split",) in _shape_index(sid, name, guard):
            main = name
            break
    if main is None:
        raise ValueError(f"no {k + 1}-ary predicate with a splitting rule")
    shapes = _shape_index(sid, main, guard)

    def swap_binder(ri):
        return binders(sid.rules[ri].body)[0]

    def build(i, order):
        kids = td.children(i)
        if not kids:
            name, t = matching[i]
            positions = tuple(order.index(e) for e in t)
            ri = shapes.get(("leaf", name, positions))
            if ri is None:
                raise ValueError(f"no rule placing {name} at positions {positions}")
            return DNode(main, ri, order, {}, [(name, t)], [])
        if len(kids) == 2:
            ri = shapes[("split",)]
            return DNode(main, ri, order, {}, [],
                         [build(kids[0], order), build(kids[1], order)])
        c = kids[0]
        if td.bags[c] == td.bags[i]:
            return build(c, order)
        out = td.bags[i] - td.bags[c]
        into = td.bags[c] - td.bags[i]
        assert len(out) == 1 and len(into) == 1
        a, b = next(iter(out)), next(iter(into))
        pos = order.index(a)
        ri = shapes.get(("swap", pos))
        if ri is None:
            raise ValueError(f"no swapping rule for position {pos}")
        child_order = list(order)
        child_order[pos] = b
        return DNode(main, ri, order, {swap_binder(ri): b},
                     [(guard, (b,))], [build(c, tuple(child_order))])

    root_order = tuple(sorted(root_bag))
    inner = build(td.root, root_order)
    if not wrap_entry:
        return Derivation(inner)
    entry = next(((i, r) for i, r in enumerate(sid.rules)
                  if classify_rule(r, guard) == ("top", main, k + 1)), None)
    if entry is None:
        raise ValueError(f"no entry rule introducing {main}")
    top_ri, top_rule = entry
    ex_map = dict(zip(binders(top_rule.body), root_order))
    witnesses = [(guard, (ex_map[r.args[0].name],))
                 for r in rel_atoms(top_rule.body)]
    wrapped = DNode(top_rule.head, top_ri, (), ex_map, witnesses, [inner])
    return Derivation(wrapped)


def derivation_to_bag_decomposition(deriv):
    """Decomposition whose bags are each derivation node's parameter and
    witness values; follows the derivation tree."""
    bags, parents = [], []

    def go(node, parent_index):
        i = len(bags)
        bags.append(frozenset(node.params) | set(node.exists.values()))
        parents.append(parent_index)
        for c in node.children:
            go(c, i)

    go(deriv.root, -1)
    return TreeDecomposition(bags, parents)
