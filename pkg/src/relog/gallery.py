"""Named example systems with closed-form verdict oracles.

Each entry bundles a definition system or a sentence (shipped as data files
next to this module), a family of small input cases, and an independent
closed-form predicate for the expected verdict.  run_entry sweeps the family
and compares the engine against the predicate case by case; the enumerators
below produce every small structure up to isomorphism exactly once and are
the substrate for the acceptance suite's brute-force comparisons.
"""

import itertools
from collections import deque
from dataclasses import dataclass
from importlib.resources import files

from .config import DEFAULT
from .core import (
    Structure,
    canonical_key,
    encode_graph,
    is_guarded,
    parse_signature,
)
from .errors import BoundsTooLarge, MissingGuard
from .slr import check_slr, parse_sid, parse_slr
from .so import check_so, parse_so


def _read(name):
    return (files(__package__) / "data" / name).read_text()


# --- exhaustive enumeration of small structures -------------------------------

def _check_bounds(max_support, max_tuples, limits):
    if max_support > limits.enum_support:
        raise BoundsTooLarge(
            f"support bound {max_support} exceeds {limits.enum_support}")
    if max_tuples > limits.enum_tuples:
        raise BoundsTooLarge(
            f"tuple bound {max_tuples} exceeds {limits.enum_tuples}")


def enumerate_structures(sigma, max_support, max_tuples, limits=DEFAULT):
    """Every structure over sigma with at most max_support elements and
    max_tuples tuples, up to isomorphism, each exactly once.

    Supports are canonical initial segments 1..m with every element used by a
    tuple or a constant; duplicates are filtered by canonical form."""
    _check_bounds(max_support, max_tuples, limits)
    seen = set()
    for m in range(max_support + 1):
        elems = range(1, m + 1)
        cands = [(name, t) for name, ar in sigma.relations
                 for t in itertools.product(elems, repeat=ar)]
        const_choices = list(itertools.product(elems,
                                               repeat=len(sigma.constants)))
        for size in range(min(max_tuples, len(cands)) + 1):
            for combo in itertools.combinations(cands, size):
                for cvals in const_choices:
                    used = {e for _, t in combo for e in t} | set(cvals)
                    if len(used) != m:
                        continue
                    rel = {}
                    for name, t in combo:
                        rel.setdefault(name, set()).add(t)
                    s = Structure(sigma, rel,
                                  dict(zip(sigma.constants, cvals)))
                    key = canonical_key(s)
                    if key not in seen:
                        seen.add(key)
                        yield s


def enumerate_guarded(sigma, max_support, max_tuples, limits=DEFAULT):
    """Every guarded structure over sigma (guard denotation = elements of the
    other relations' tuples) with at most max_support elements and max_tuples
    non-guard tuples, up to isomorphism."""
    if sigma.guard is None:
        raise MissingGuard("guarded enumeration needs a guard relation")
    _check_bounds(max_support, max_tuples, limits)
    seen = set()
    for m in range(max_support + 1):
        elems = range(1, m + 1)
        cands = [(name, t) for name, ar in sigma.relations
                 if name != sigma.guard
                 for t in itertools.product(elems, repeat=ar)]
        for size in range(min(max_tuples, len(cands)) + 1):
            for combo in itertools.combinations(cands, size):
                used = {e for _, t in combo for e in t}
                if len(used) != m:
                    continue
                rel = {sigma.guard: {(e,) for e in used}}
                for name, t in combo:
                    rel.setdefault(name, set()).add(t)
                s = Structure(sigma, rel)
                key = canonical_key(s)
                if key not in seen:
                    seen.add(key)
                    yield s


def graph_encodings(max_vertices, limits=DEFAULT):
    """Every loop-free directed graph encoding with at most max_vertices
    vertices, up to isomorphism."""
    if max_vertices > limits.enum_support:
        raise BoundsTooLarge(
            f"vertex bound {max_vertices} exceeds {limits.enum_support}")
    seen = set()
    for n in range(max_vertices + 1):
        verts = list(range(1, n + 1))
        pairs = [(a, b) for a in verts for b in verts if a != b]
        for r in range(len(pairs) + 1):
            for edges in itertools.combinations(pairs, r):
                s = encode_graph(verts, edges)
                key = canonical_key(s)
                if key not in seen:
                    seen.add(key)
                    yield s


# --- closed-form verdict predicates -------------------------------------------

def _weakly_connected(edges, start):
    adj = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    todo, seen = deque([start]), {start}
    while todo:
        v = todo.popleft()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return set(adj) <= seen


def eulerian_trail(edges, x, y):
    """Is there a walk from x to y using every edge exactly once?"""
    if not edges:
        return x == y
    verts = {v for e in edges for v in e}
    if x not in verts or y not in verts:
        return False
    for v in verts:
        out = sum(1 for a, _ in edges if a == v)
        inn = sum(1 for _, b in edges if b == v)
        if out - inn != (v == x) - (v == y):
            return False
    return _weakly_connected(edges, x)


def eulerian_walk_from(edges, x):
    """Is there a walk starting at x that uses every edge exactly once?"""
    if not edges:
        return True
    verts = {v for e in edges for v in e}
    ends = [v for v in verts
            if sum(1 for _, b in edges if b == v)
            > sum(1 for a, _ in edges if a == v)]
    if len(ends) > 1:
        return False
    return eulerian_trail(edges, x, ends[0] if ends else x)


def forced_trail_heads(edges, x, y):
    """Heads of the unique all-consuming walk from x to y when every visited
    vertex has exactly one outgoing edge; None if no such walk exists."""
    out = {}
    for a, b in edges:
        out.setdefault(a, []).append(b)
    if any(len(bs) > 1 for bs in out.values()):
        return None
    heads, cur = [], x
    while cur in out and cur not in heads:
        heads.append(cur)
        cur = out[cur][0]
    if len(heads) == len(edges) and cur == y:
        return frozenset(heads)
    return None


def _expected_even(s, nu):
    return len(s.rel["S"]) % 2 == 0


def _expected_ls(s, nu):
    return eulerian_trail(s.rel["H"], nu["x"], nu["y"])


def _expected_rls(s, nu):
    heads = forced_trail_heads(s.rel["H"], nu["x"], nu["y"])
    return heads is not None and s.guard_set() == heads


def _expected_star(s, nu):
    x = nu["x"]
    leaves = {b for a, b in s.rel["E"] if a == x}
    return (s.rel["E"] == {(x, b) for b in leaves}
            and s.rel["N"] == {(b,) for b in leaves})


def _expected_fold_ls(s, nu):
    return eulerian_walk_from(s.rel["H"], nu["x"])


def _expected_clique(s, nu):
    verts = [v for (v,) in s.rel["V"]]
    return all((a, b) in s.rel["E"] or (b, a) in s.rel["E"]
               for a in verts for b in verts if a != b)


def _expected_guarded(s, nu):
    return is_guarded(s)


# --- entries ------------------------------------------------------------------

@dataclass(frozen=True)
class GalleryEntry:
    """One named example: its data files, its family of small input cases,
    and the closed-form predicate the engine must agree with."""

    name: str
    note: str
    signature_file: str
    oracle: object
    definition_file: str = None
    sentence_file: str = None
    query: str = None
    variables: tuple = ()
    family: str = "enumerate"   # or "graphs"
    max_support: int = 3
    max_tuples: int = 3

    def signature(self):
        return parse_signature(_read(self.signature_file))

    def sid(self):
        return parse_sid(_read(self.definition_file), self.signature())

    def sentence(self):
        return parse_so(_read(self.sentence_file), self.signature())

    def cases(self, max_support=None, max_tuples=None, limits=DEFAULT):
        """Yield (structure, store) pairs: the family of structures times all
        assignments of the query variables over the support plus one fresh
        element."""
        max_support = self.max_support if max_support is None else max_support
        max_tuples = self.max_tuples if max_tuples is None else max_tuples
        if self.family == "graphs":
            structures = graph_encodings(max_support, limits)
        else:
            structures = enumerate_structures(self.signature(), max_support,
                                              max_tuples, limits)
        for s in structures:
            if not self.variables:
                yield s, {}
                continue
            values = sorted(s.dom) + [max(s.dom, default=0) + 1]
            for vals in itertools.product(values, repeat=len(self.variables)):
                yield s, dict(zip(self.variables, vals))

    def engine_verdict(self, s, nu, limits=DEFAULT):
        if self.definition_file is not None:
            sid = self.sid()
            atom = parse_slr(self.query, self.signature(), sid)
            return check_slr(s, nu, atom, sid, limits) is not None
        return check_so(s, self.sentence(), limits=limits)

    def expected_verdict(self, s, nu):
        return self.oracle(s, nu)


ENTRIES = [
    GalleryEntry(
        name="even",
        note="nullary predicate holding exactly when the unary relation has "
             "an even number of tuples",
        signature_file="even.sig", definition_file="even.sid",
        oracle=_expected_even, query="A()",
        max_support=4, max_tuples=4),
    GalleryEntry(
        name="ls",
        note="segment of H-steps from x to y consuming the whole structure: "
             "a walk using every tuple exactly once",
        signature_file="ls.sig", definition_file="ls.sid",
        oracle=_expected_ls, query="ls(x, y)", variables=("x", "y")),
    GalleryEntry(
        name="rls",
        note="segment whose step heads are pairwise distinct (each consumes "
             "its guard tuple), with the guard holding exactly the heads",
        signature_file="rls.sig", definition_file="rls.sid",
        oracle=_expected_rls, query="rls(x, y)", variables=("x", "y"),
        max_tuples=4),
    GalleryEntry(
        name="star",
        note="x is the centre: the edges are exactly x to each leaf and the "
             "unary mark holds exactly the leaves",
        signature_file="star.sig", definition_file="star.sid",
        oracle=_expected_star, query="star(x)", variables=("x",),
        max_tuples=4),
    GalleryEntry(
        name="fold_ls",
        note="walk from x using every H-tuple exactly once, ending anywhere",
        signature_file="fold_ls.sig", definition_file="fold_ls.sid",
        oracle=_expected_fold_ls, query="fold_ls(x)", variables=("x",)),
    GalleryEntry(
        name="clique",
        note="first-order sentence holding exactly on clique encodings: "
             "every pair of distinct vertices is joined in some orientation",
        signature_file="clique.sig", sentence_file="clique.so",
        oracle=_expected_clique, family="graphs", max_support=3),
    GalleryEntry(
        name="guarded",
        note="sentence holding exactly on guarded structures: tuple elements "
             "are guarded and guarded elements occur in tuples",
        signature_file="guarded.sig", sentence_file="guarded.so",
        oracle=_expected_guarded, max_tuples=4),
]

GALLERY = {e.name: e for e in ENTRIES}


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    entry: str
    label: str
    expected: bool
    got: bool

    @property
    def ok(self):
        return self.expected == self.got


def _label(s, nu):
    parts = []
    for name in s.signature.relation_names:
        body = " ".join("(" + ",".join(map(str, t)) + ")"
                        for t in sorted(s.rel[name]))
        parts.append(f"{name}={{{body}}}")
    for var in sorted(nu):
        parts.append(f"{var}={nu[var]}")
    return " ".join(parts)


def run_entry(entry, max_support=None, max_tuples=None, limits=DEFAULT):
    """Sweep one entry's family and compare the engine with the closed-form
    predicate; returns one SweepResult per case."""
    if isinstance(entry, str):
        try:
            entry = GALLERY[entry]
        except KeyError:
            raise KeyError(f"no gallery entry named {entry!r}; "
                           f"known: {sorted(GALLERY)}") from None
    if entry.definition_file is not None:
        sid = entry.sid()
        atom = parse_slr(entry.query, entry.signature(), sid)

        def verdict(s, nu):
            return check_slr(s, nu, atom, sid, limits) is not None
    else:
        phi = entry.sentence()

        def verdict(s, nu):
            return check_so(s, phi, limits=limits)

    results = []
    for s, nu in entry.cases(max_support, max_tuples, limits):
        got = verdict(s, nu)
        want = entry.expected_verdict(s, nu)
        results.append(SweepResult(entry.name, _label(s, nu), want, got))
    return results
