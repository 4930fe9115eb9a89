"""Rank-bounded second-order types of finite structures.

The rank-r type of a structure is a finite fingerprint that determines the
truth of every sentence of quantifier rank at most r (first-order and set
quantifiers both count).  Types are computed over the structure's carrier
extended by padding elements standing in for the rest of the universe; with
the default padding of 2**r the fingerprint no longer changes when more
padding is added.

Ranks 0, 1 and 2 are supported.  Fingerprints are nested tuples of ints and
strings, so they are hashable, totally ordered and JSON-friendly.
"""

import itertools
from collections import Counter

from .config import DEFAULT
from .core import forget as forget_structure
from .core import glue as glue_structures
from .core import mint_many
from .errors import RankMismatch, RankTooLarge, SupportTooLarge, UnregisteredType
from .so import check_so, quantifier_rank

_RANKS = {"rank0": 0, "rank1": 1, "rank2": 2}


def atom_diagram(s, elems=(), sets=()):
    """Canonical quantifier-free description of the constants, the given
    elements, and the given sets: an equality pattern (first-occurrence
    indices), the relation facts as position tuples, and per-set membership
    positions.  Isomorphic configurations over the same constant names get equal
    diagrams; constants and relations are taken in name order, so the
    declaration order of the signature does not matter, but structures with
    differently named constants are kept apart."""
    names = tuple(sorted(s.signature.constants))
    terms = [s.const[c] for c in names] + list(elems)
    eq = tuple(terms.index(v) for v in terms)
    rels = []
    for name, arity in sorted(s.signature.relations):
        tuples = s.rel[name]
        hits = tuple(sorted(
            combo
            for combo in itertools.product(range(len(terms)), repeat=arity)
            if tuple(terms[i] for i in combo) in tuples))
        rels.append((name, hits))
    members = tuple(
        tuple(sorted(i for i, v in enumerate(terms) if v in w)) for w in sets)
    return (names, eq, tuple(rels), members)


def _typing_carrier(s, rank, padding):
    if padding is None:
        padding = 2 ** rank
    return sorted(s.dom | s.extra) + mint_many(padding)


def type_of(s, rank, padding=None, limits=DEFAULT):
    """Rank-r fingerprint of the structure."""
    if rank not in (0, 1, 2):
        raise RankTooLarge(f"rank {rank} not supported (use 0, 1 or 2)")
    if len(s.dom | s.extra) > limits.type_support:
        raise SupportTooLarge(
            f"support of {len(s.dom | s.extra)} exceeds the typing cutoff "
            f"{limits.type_support}")
    base = atom_diagram(s)
    if rank == 0:
        return ("rank0", base)
    carrier = _typing_carrier(s, rank, padding)
    if rank == 1:
        realized = tuple(sorted({atom_diagram(s, (w,)) for w in carrier}))
        return ("rank1", base, realized)
    entries = set()
    counts = Counter()
    for w in carrier:
        a = atom_diagram(s, (w,))
        counts[a] += 1
        pairs = tuple(sorted({atom_diagram(s, (w, w2)) for w2 in carrier}))
        entries.add((a, pairs))
    fo_part = tuple(sorted(entries))
    # How many finite-set choices a class supports: none / some / all is
    # determined by whether the class has one member or several.
    so_part = tuple(sorted((a, min(m, 2)) for a, m in counts.items()))
    return ("rank2", base, fo_part, so_part)


def rank_of(fingerprint):
    tag = fingerprint[0] if isinstance(fingerprint, tuple) else None
    if tag not in _RANKS:
        raise ValueError(f"not a type fingerprint: {fingerprint!r}")
    return _RANKS[tag]


def fingerprint_to_json(fingerprint):
    def enc(x):
        if isinstance(x, tuple):
            return [enc(p) for p in x]
        return x
    return enc(fingerprint)


def fingerprint_from_json(data):
    def dec(x):
        if isinstance(x, list):
            return tuple(dec(p) for p in x)
        return x
    return dec(data)


class TypeRegistry:
    """Maps fingerprints to representative structures.

    The first structure registered for a fingerprint stays its representative;
    later structures of the same type are ignored.  Abstract operations work
    on fingerprints by operating on representatives."""

    def __init__(self, limits=DEFAULT):
        self.limits = limits
        self._reps = {}

    def register(self, s, rank, padding=None):
        t = type_of(s, rank, padding, self.limits)
        self._reps.setdefault(t, s)
        return t

    def representative(self, fingerprint):
        if fingerprint not in self._reps:
            raise UnregisteredType(f"no representative for {fingerprint!r}")
        return self._reps[fingerprint]

    def known(self):
        return sorted(self._reps)

    def __len__(self):
        return len(self._reps)

    def __contains__(self, fingerprint):
        return fingerprint in self._reps


def abs_glue(t1, t2, registry, padding=None):
    """Type of the glue of any two structures with these types, computed on
    representatives."""
    r1, r2 = rank_of(t1), rank_of(t2)
    if r1 != r2:
        raise RankMismatch(f"cannot glue a rank-{r1} type with a rank-{r2} type")
    g = glue_structures(registry.representative(t1), registry.representative(t2))
    return registry.register(g, r1, padding)


def abs_forget(t, constant, registry, padding=None):
    """Type after dropping a constant, computed on a representative."""
    s = forget_structure(registry.representative(t), constant)
    return registry.register(s, rank_of(t), padding)


def contains_sentence(t, phi, registry, padding=None, limits=None):
    """Whether structures of this type satisfy the sentence.  The sentence's
    quantifier rank must not exceed the type's rank."""
    rank = rank_of(t)
    qr = quantifier_rank(phi)
    if qr > rank:
        raise RankMismatch(
            f"sentence has quantifier rank {qr}, type has rank {rank}")
    rep = registry.representative(t)
    if padding is None:
        padding = 2 ** rank
    return check_so(rep, phi, limits=limits or registry.limits, padding=padding)
