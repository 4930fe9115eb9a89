"""Relational structures over finite signatures, and the algebra on them:
composition (disjoint union of interpretations over a shared support),
glueing (fusion along shared constants), constant forgetting, port encoding,
carrier padding, guard checks, graph encoding, and isomorphism.

Elements are opaque integer identities minted from a global counter; element
*names* only exist in the text format and are resolved to fresh identities on
load.
"""

import itertools
import json

from ._scan import Scanner
from .config import DEFAULT
from .errors import (
    MissingGuard,
    NotCompatible,
    NotLocallyDisjoint,
    PortClash,
    SupportTooLarge,
    UnknownConstant,
)

# --- element identities -------------------------------------------------------

_counter = itertools.count(1)


def mint():
    """Return a fresh element identity (never reused within a process)."""
    return next(_counter)


def mint_many(n):
    return [mint() for _ in range(n)]


# --- signatures ---------------------------------------------------------------

class Signature:
    """Relation symbols with arities, constant symbols, and an optional
    distinguished unary guard relation."""

    def __init__(self, relations=(), constants=(), guard=None):
        rels = []
        seen = set()
        for name, arity in relations:
            assert name not in seen, f"duplicate relation {name!r}"
            assert arity >= 1, f"relation {name!r} needs arity >= 1"
            seen.add(name)
            rels.append((name, int(arity)))
        if guard is not None and guard not in seen:
            rels.append((guard, 1))
            seen.add(guard)
        self.relations = tuple(rels)
        self.constants = tuple(constants)
        assert len(set(self.constants)) == len(self.constants), "duplicate constant"
        assert not (seen & set(self.constants)), "name used as both relation and constant"
        self.guard = guard
        self._arity = dict(self.relations)
        if guard is not None:
            assert self._arity[guard] == 1, "guard must be unary"

    def arity(self, name):
        return self._arity[name]

    def has_relation(self, name):
        return name in self._arity

    @property
    def relation_names(self):
        return tuple(name for name, _ in self.relations)

    def sigma_relations(self):
        """Relation names excluding the guard."""
        return tuple(n for n in self.relation_names if n != self.guard)

    def key(self):
        return (self.relations, self.constants, self.guard)

    def __eq__(self, other):
        return isinstance(other, Signature) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Signature({self.relations!r}, {self.constants!r}, guard={self.guard!r})"

    def union(self, other):
        """Merged signature; shared names must agree on arity."""
        rels = list(self.relations)
        have = dict(self.relations)
        for name, ar in other.relations:
            if name in have:
                assert have[name] == ar, f"arity clash for {name!r}"
            else:
                rels.append((name, ar))
                have[name] = ar
        consts = list(self.constants) + [c for c in other.constants if c not in self.constants]
        guard = self.guard or other.guard
        assert self.guard is None or other.guard is None or self.guard == other.guard, \
            "guard clash"
        return Signature(rels, consts, guard)


# --- structures ---------------------------------------------------------------

class Structure:
    """Finite interpretation of a signature.

    rel maps every relation name to a frozenset of element tuples; const maps
    every constant name to an element.  The support is derived (elements of
    tuples plus constant values).  `extra` carries additional carrier elements
    introduced by pad(); they are outside the support but participate in
    finite-carrier model checking.
    """

    def __init__(self, signature, rel=None, const=None, extra=()):
        self.signature = signature
        r = {}
        rel = rel or {}
        for name, arity in signature.relations:
            tuples = frozenset(tuple(t) for t in rel.get(name, ()))
            for t in tuples:
                assert len(t) == arity, f"arity mismatch in {name!r}: {t}"
            r[name] = tuples
        assert set(rel) <= set(signature.relation_names), \
            f"unknown relations {set(rel) - set(signature.relation_names)}"
        self.rel = r
        const = const or {}
        assert set(const) == set(signature.constants), "constants must all be interpreted"
        self.const = {c: int(const[c]) for c in signature.constants}
        dom = set()
        for tuples in r.values():
            for t in tuples:
                dom.update(t)
        dom.update(self.const.values())
        self.dom = frozenset(dom)
        self.extra = frozenset(extra) - self.dom

    def key(self):
        rel = tuple((name, tuple(sorted(self.rel[name]))) for name in self.signature.relation_names)
        const = tuple((c, self.const[c]) for c in self.signature.constants)
        return (self.signature.key(), rel, const, tuple(sorted(self.extra)))

    def __eq__(self, other):
        return isinstance(other, Structure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        parts = [f"{n}={sorted(map(list, self.rel[n]))}" for n in self.signature.relation_names]
        parts += [f"{c}->{v}" for c, v in self.const.items()]
        return "Structure(" + ", ".join(parts) + ")"

    # -- derived data ----------------------------------------------------------

    def carrier(self):
        return self.dom | self.extra

    def tuple_count(self):
        return sum(len(t) for t in self.rel.values())

    def all_tuples(self):
        """Sorted list of (relation, tuple) pairs; the canonical tuple order."""
        out = []
        for name in self.signature.relation_names:
            out.extend((name, t) for t in sorted(self.rel[name]))
        return out

    def sigma_tuples(self):
        """all_tuples() restricted to non-guard relations."""
        g = self.signature.guard
        return [(n, t) for (n, t) in self.all_tuples() if n != g]

    def guard_set(self):
        if self.signature.guard is None:
            raise MissingGuard("signature declares no guard relation")
        return frozenset(t[0] for t in self.rel[self.signature.guard])

    def relation_elements(self, include_guard=True):
        elems = set()
        for name in self.signature.relation_names:
            if not include_guard and name == self.signature.guard:
                continue
            for t in self.rel[name]:
                elems.update(t)
        return frozenset(elems)

    # -- functional updates ----------------------------------------------------

    def with_rel(self, name, tuples):
        rel = dict(self.rel)
        rel[name] = frozenset(tuple(t) for t in tuples)
        return Structure(self.signature, rel, self.const, self.extra)

    def restrict_tuples(self, keep):
        """Sub-structure containing exactly the given (relation, tuple) pairs;
        constants are kept."""
        keep = set(keep)
        rel = {name: frozenset(t for t in self.rel[name] if (name, t) in keep)
               for name in self.signature.relation_names}
        return Structure(self.signature, rel, self.const)


# --- stores -------------------------------------------------------------------

class Store:
    """First-order bindings (variable -> element) plus second-order bindings
    (variable -> (arity, set of element tuples))."""

    def __init__(self, fo=None, so=None):
        self.fo = dict(fo or {})
        self.so = {}
        for name, (arity, tuples) in (so or {}).items():
            self.so[name] = (int(arity), frozenset(tuple(t) for t in tuples))

    def bind(self, var, value):
        s = Store(self.fo, self.so)
        s.fo[var] = value
        return s

    def bind_so(self, var, arity, tuples):
        s = Store(self.fo, self.so)
        s.so[var] = (arity, frozenset(tuple(t) for t in tuples))
        return s

    def values(self):
        return set(self.fo.values())

    def __repr__(self):
        return f"Store({self.fo!r}, {self.so!r})"


# --- algebra ------------------------------------------------------------------

def compose(s1, s2):
    """Union of interpretations over a shared signature.

    Constants must agree (NotCompatible) and relation interpretations must be
    disjoint (NotLocallyDisjoint)."""
    assert s1.signature == s2.signature, "compose needs a shared signature"
    for c in s1.signature.constants:
        if s1.const[c] != s2.const[c]:
            raise NotCompatible(c)
    rel = {}
    for name in s1.signature.relation_names:
        if s1.rel[name] & s2.rel[name]:
            raise NotLocallyDisjoint(name)
        rel[name] = s1.rel[name] | s2.rel[name]
    return Structure(s1.signature, rel, s1.const, s1.extra | s2.extra)


def glue(s1, s2):
    """Disjoint union followed by fusion of the values of shared constants.

    The operands may have different signatures; the result is over the union
    signature.  The second operand is renamed apart first, so the inputs never
    share elements by accident."""
    sig = s1.signature.union(s2.signature)
    rename = {e: mint() for e in sorted(s2.carrier())}

    # union-find over s1 elements and renamed s2 elements
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            # keep the smaller identity as representative (deterministic)
            if rb < ra:
                ra, rb = rb, ra
            parent[rb] = ra

    shared = set(s1.signature.constants) & set(s2.signature.constants)
    for c in shared:
        union(s1.const[c], rename[s2.const[c]])

    def m1(e):
        return find(e)

    def m2(e):
        return find(rename[e])

    rel = {}
    for name, _ in sig.relations:
        tuples = set()
        if s1.signature.has_relation(name):
            tuples.update(tuple(m1(e) for e in t) for t in s1.rel[name])
        if s2.signature.has_relation(name):
            tuples.update(tuple(m2(e) for e in t) for t in s2.rel[name])
        rel[name] = tuples
    const = {}
    for c in sig.constants:
        if c in s1.signature.constants:
            const[c] = m1(s1.const[c])
        else:
            const[c] = m2(s2.const[c])
    extra = {m1(e) for e in s1.extra} | {m2(e) for e in s2.extra}
    return Structure(sig, rel, const, extra)


def forget(s, constant):
    """Drop a constant from the signature (its value may leave the support)."""
    if constant not in s.signature.constants:
        raise UnknownConstant(f"constant {constant!r} not in signature")
    sig = Signature(s.signature.relations,
                    [c for c in s.signature.constants if c != constant],
                    s.signature.guard)
    const = {c: v for c, v in s.const.items() if c != constant}
    return Structure(sig, s.rel, const, s.extra)


def port_name(i):
    return f"p{i}"


def encode(s, ports):
    """Attach port constants p1..p_{k+1} bound to the given values and extend
    the guard denotation with them.

    The port values must lie outside the current guard denotation (PortClash).
    """
    if s.signature.guard is None:
        raise MissingGuard("encode needs a guard relation")
    values = [int(v) for v in ports]
    gset = s.guard_set()
    for v in values:
        if v in gset:
            raise PortClash(f"port value {v} already in guard denotation")
    names = [port_name(i + 1) for i in range(len(values))]
    for n in names:
        assert n not in s.signature.constants, f"port constant {n!r} already present"
    sig = Signature(s.signature.relations,
                    list(s.signature.constants) + names,
                    s.signature.guard)
    const = dict(s.const)
    const.update(zip(names, values))
    g = s.signature.guard
    rel = dict(s.rel)
    rel[g] = s.rel[g] | {(v,) for v in values}
    return Structure(sig, rel, const, s.extra)


def pad(s, n):
    """Add n fresh carrier elements; the support is unchanged."""
    return Structure(s.signature, s.rel, s.const, s.extra | frozenset(mint_many(n)))


def is_guarded(s):
    """True iff the elements occurring in non-guard tuples are exactly the
    guard denotation."""
    return s.relation_elements(include_guard=False) == s.guard_set()


def encode_graph(vertices, edges, with_guard=False):
    """Structure over {V/1, E/2} for a directed graph.

    Vertices may be arbitrary distinct labels; they are minted fresh element
    identities in the given order.  Edge endpoints must be declared vertices.
    With with_guard=True the signature additionally carries a guard D holding
    every vertex."""
    vertices = list(vertices)
    assert len(set(vertices)) == len(vertices), "duplicate vertex"
    ids = {v: mint() for v in vertices}
    for a, b in edges:
        assert a in ids and b in ids, f"edge ({a!r},{b!r}) uses an undeclared vertex"
    sig = Signature([("V", 1), ("E", 2)], guard="D" if with_guard else None)
    rel = {"V": {(ids[v],) for v in vertices},
           "E": {(ids[a], ids[b]) for a, b in edges}}
    if with_guard:
        rel["D"] = {(ids[v],) for v in vertices}
    return Structure(sig, rel)


# --- isomorphism --------------------------------------------------------------

def _profile(s, e):
    """Local invariant of an element used to prune the isomorphism search."""
    consts = tuple(c for c in s.signature.constants if s.const[c] == e)
    occ = []
    for name in s.signature.relation_names:
        for t in sorted(s.rel[name]):
            positions = tuple(i for i, x in enumerate(t) if x == e)
            if positions:
                occ.append((name, len(t), positions))
    return (consts, tuple(sorted(occ)))


def isomorphic(s1, s2, limits=DEFAULT):
    """True iff a bijection of supports maps one structure onto the other.

    Constants must map to constants of the same name; extra carrier elements
    are compared only by count."""
    if s1.signature != s2.signature:
        return False
    if len(s1.dom) > limits.iso_support or len(s2.dom) > limits.iso_support:
        raise SupportTooLarge(f"support exceeds iso bound {limits.iso_support}")
    if len(s1.dom) != len(s2.dom) or len(s1.extra) != len(s2.extra):
        return False
    for name in s1.signature.relation_names:
        if len(s1.rel[name]) != len(s2.rel[name]):
            return False
    # constants force part of the mapping
    mapping = {}
    for c in s1.signature.constants:
        a, b = s1.const[c], s2.const[c]
        if mapping.get(a, b) != b:
            return False
        mapping[a] = b

    p1 = {e: _profile(s1, e) for e in s1.dom}
    p2 = {e: _profile(s2, e) for e in s2.dom}
    if sorted(p1.values()) != sorted(p2.values()):
        return False

    order = sorted(s1.dom - set(mapping), key=lambda e: (p1[e], e))
    used = set(mapping.values())
    for a, b in mapping.items():
        if p1[a] != p2[b]:
            return False

    def consistent(mapping):
        for name in s1.signature.relation_names:
            img = s2.rel[name]
            for t in s1.rel[name]:
                if all(x in mapping for x in t):
                    if tuple(mapping[x] for x in t) not in img:
                        return False
        return True

    def search(i):
        if i == len(order):
            return consistent(mapping)
        a = order[i]
        for b in sorted(s2.dom - used):
            if p2[b] != p1[a]:
                continue
            mapping[a] = b
            used.add(b)
            if consistent(mapping) and search(i + 1):
                return True
            del mapping[a]
            used.discard(b)
        return False

    return search(0)


def canonical_key(s, limits=DEFAULT):
    """Canonical form of a structure up to isomorphism (minimum over all
    support orderings); intended for deduplication of small structures."""
    dom = sorted(s.dom)
    if len(dom) > limits.enum_support + 2:
        raise SupportTooLarge(f"support {len(dom)} too large for canonical form")
    best = None
    for perm in itertools.permutations(range(len(dom))):
        toidx = {e: i for e, i in zip(dom, perm)}
        rel = tuple(tuple(sorted(tuple(toidx[x] for x in t) for t in s.rel[name]))
                    for name in s.signature.relation_names)
        const = tuple(toidx[s.const[c]] for c in s.signature.constants)
        cand = (rel, const)
        if best is None or cand < best:
            best = cand
    return (s.signature.key(), len(dom), best, len(s.extra))


# --- text format --------------------------------------------------------------

def parse_signature(text):
    sc = Scanner(text)
    sig = _parse_signature_block(sc)
    sc.expect_done()
    return sig


def _parse_signature_block(sc):
    sc.expect("name", "signature")
    sc.expect("sym", "{")
    relations, constants, guard = [], [], None
    while not sc.accept("sym", "}"):
        if sc.accept("name", "rel"):
            name = sc.expect_name()
            sc.expect("sym", "/")
            arity = sc.expect_int()
            relations.append((name, arity))
        elif sc.accept("name", "guard"):
            name = sc.expect_name()
            if guard is not None:
                sc.error("duplicate guard declaration")
            guard = name
            if name not in [n for n, _ in relations]:
                relations.append((name, 1))
        elif sc.accept("name", "const"):
            constants.append(sc.expect_name())
        else:
            sc.error("expected 'rel', 'guard' or 'const'")
        sc.expect("sym", ";")
    try:
        return Signature(relations, constants, guard)
    except AssertionError as exc:
        sc.error(str(exc))


def parse_structure(text, signature=None):
    """Parse `structure { ... }`, optionally preceded by a signature block.

    Returns (structure, name_to_element) so callers can refer to elements by
    their textual names."""
    sc = Scanner(text)
    if sc.at_name("signature"):
        embedded = _parse_signature_block(sc)
        if signature is None:
            signature = embedded
    if signature is None:
        sc.error("no signature available for structure")
    sc.expect("name", "structure")
    sc.expect("sym", "{")
    names = {}
    rel = {name: set() for name in signature.relation_names}
    const = {}

    def elem(name):
        if name not in names:
            names[name] = mint()
        return names[name]

    while not sc.accept("sym", "}"):
        if sc.accept("name", "elem"):
            while sc.at("name"):
                elem(sc.expect_name())
        elif sc.at("name"):
            name = sc.expect_name()
            if signature.has_relation(name):
                sc.expect("sym", "=")
                sc.expect("sym", "{")
                while not sc.accept("sym", "}"):
                    sc.expect("sym", "(")
                    t = [elem(sc.expect_name())]
                    while sc.accept("sym", ","):
                        t.append(elem(sc.expect_name()))
                    sc.expect("sym", ")")
                    if len(t) != signature.arity(name):
                        sc.error(f"tuple arity {len(t)} does not match {name}/{signature.arity(name)}")
                    rel[name].add(tuple(t))
            elif name in signature.constants:
                sc.expect("sym", "=")
                const[name] = elem(sc.expect_name())
            else:
                sc.error(f"unknown symbol {name!r}")
        else:
            sc.error("expected a declaration")
        sc.expect("sym", ";")
    missing = set(signature.constants) - set(const)
    if missing:
        sc.error(f"constants not interpreted: {sorted(missing)}")
    sc.expect_done()
    # Declared elements outside every tuple stay available as carrier extras.
    return Structure(signature, rel, const, extra=names.values()), names


def signature_to_text(sig):
    parts = []
    for name, arity in sig.relations:
        if name == sig.guard:
            continue
        parts.append(f"rel {name}/{arity};")
    if sig.guard is not None:
        parts.append(f"guard {sig.guard};")
    for c in sig.constants:
        parts.append(f"const {c};")
    return "signature { " + " ".join(parts) + " }"


def structure_to_text(s, names=None):
    """Render a structure (with its signature block).

    names may map element -> display name; unnamed elements get e<id>."""
    names = dict(names or {})

    def nm(e):
        if e not in names:
            names[e] = f"e{e}"
        return names[e]

    lines = [signature_to_text(s.signature), "structure {"]
    support = sorted(s.dom | s.extra)
    if support:
        lines.append("  elem " + " ".join(nm(e) for e in support) + ";")
    for name in s.signature.relation_names:
        body = " ".join("(" + ",".join(nm(x) for x in t) + ")" for t in sorted(s.rel[name]))
        lines.append(f"  {name} = {{ {body} }};")
    for c in s.signature.constants:
        lines.append(f"  {c} = {nm(s.const[c])};")
    lines.append("}")
    return "\n".join(lines)


# --- JSON ---------------------------------------------------------------------

def signature_to_json(sig):
    return {"relations": [[n, a] for n, a in sig.relations],
            "constants": list(sig.constants),
            "guard": sig.guard}


def signature_from_json(data):
    return Signature([(n, a) for n, a in data["relations"]],
                     data.get("constants", ()),
                     data.get("guard"))


def structure_to_json(s):
    return {"signature": signature_to_json(s.signature),
            "relations": {n: sorted(map(list, s.rel[n])) for n in s.signature.relation_names},
            "constants": dict(s.const),
            "extra": sorted(s.extra)}


def structure_from_json(data, remint=False):
    """Rebuild a structure from JSON.  With remint=True the stored element
    identities are replaced with fresh ones (canonical renumbering)."""
    sig = signature_from_json(data["signature"])
    ids = set()
    for tuples in data["relations"].values():
        for t in tuples:
            ids.update(t)
    ids.update(data.get("constants", {}).values())
    ids.update(data.get("extra", ()))
    mapping = {int(e): (mint() if remint else int(e)) for e in sorted(ids)}
    rel = {n: [tuple(mapping[int(x)] for x in t) for t in tuples]
           for n, tuples in data["relations"].items()}
    const = {c: mapping[int(v)] for c, v in data.get("constants", {}).items()}
    extra = [mapping[int(e)] for e in data.get("extra", ())]
    return Structure(sig, rel, const, extra)


def dumps(data):
    return json.dumps(data, indent=2, sort_keys=True)
