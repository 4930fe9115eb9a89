"""Shared fixtures and independent reference implementations used to
cross-check the package's algorithms on small inputs."""

import itertools

from relog.core import Signature, Structure, mint
from relog.slr import Cst, Emp, Eq, Exists, Neq, PredAtom, RelAtom, Star, Var, parse_sid

# --- signatures and inductive systems used throughout the tests ---------------

SIG_S = Signature([("S", 1)])
SIG_H = Signature([("H", 2)])
SIG_HD = Signature([("H", 2)], guard="D")
SIG_NE = Signature([("N", 1), ("E", 2)])

EVEN_TEXT = "A() <= ex x . ex y . S(x) * S(y) * A() ; A() <= emp ;"
LS_TEXT = "ls(x,y) <= x = y ; ls(x,y) <= ex z . H(x,z) * ls(z,y) ;"
RLS_TEXT = "rls(x,y) <= x = y ; rls(x,y) <= ex z . D(x) * H(x,z) * rls(z,y) ;"
STAR_TEXT = "star(x) <= emp ; star(x) <= ex y . E(x,y) * N(y) * star(x) ;"
FOLD_LS_TEXT = "fold_ls(x) <= emp ; fold_ls(x) <= ex y . H(x,y) * fold_ls(y) ;"
CHAIN_EQ_TEXT = ("chain(x,y) <= x = y ;"
                 "chain(x,y) <= ex u . ex v . H(x,u) * u = v * chain(v,y) ;")


def even_sid():
    return parse_sid(EVEN_TEXT, SIG_S)


def ls_sid():
    return parse_sid(LS_TEXT, SIG_H)


def rls_sid():
    return parse_sid(RLS_TEXT, SIG_HD)


def star_sid():
    return parse_sid(STAR_TEXT, SIG_NE)


def fold_ls_sid():
    return parse_sid(FOLD_LS_TEXT, SIG_H)


def chain_eq_sid():
    return parse_sid(CHAIN_EQ_TEXT, SIG_H)


def mk_h(edges, sig=SIG_H, guard=()):
    rel = {"H": set(edges)}
    if sig.guard:
        rel[sig.guard] = {(v,) for v in guard}
    return Structure(sig, rel)


def mk_s(elems):
    return Structure(SIG_S, {"S": {(v,) for v in elems}})


# --- brute-force satisfaction oracle ------------------------------------------

def naive_check_slr(s, nu, phi, sid, depth=None, fresh=3):
    """Reference satisfaction check by exhaustive recursion over tuple-set
    splits, rule unfoldings (depth-bounded), and witness candidates drawn from
    the structure plus a pool of fresh elements."""
    tuples = frozenset(s.all_tuples())
    if depth is None:
        depth = 2 * len(tuples) + len(sid.arities) + 3
    pool = [mint() for _ in range(fresh)]
    consts = dict(s.const)

    def value(t, rho):
        return consts[t.name] if isinstance(t, Cst) else rho[t.name]

    def sat(ts, rho, f, d):
        if isinstance(f, Emp):
            return not ts
        if isinstance(f, Eq):
            return not ts and value(f.left, rho) == value(f.right, rho)
        if isinstance(f, Neq):
            return not ts and value(f.left, rho) != value(f.right, rho)
        if isinstance(f, RelAtom):
            ground = (f.name, tuple(value(a, rho) for a in f.args))
            return ts == {ground} and ground in tuples
        if isinstance(f, PredAtom):
            if d <= 0:
                return False
            vals = [value(a, rho) for a in f.args]
            for ri in sid.rules_by_head.get(f.name, ()):
                rule = sid.rules[ri]
                rho2 = dict(zip(rule.params, vals))
                if sat(ts, rho2, rule.body, d - 1):
                    return True
            return False
        if isinstance(f, Star):
            items = sorted(ts)
            for r in range(len(items) + 1):
                for left in itertools.combinations(items, r):
                    if sat(frozenset(left), rho, f.left, d) and \
                            sat(ts - set(left), rho, f.right, d):
                        return True
            return False
        if isinstance(f, Exists):
            dom = {v for _, t in tuples for v in t} | set(consts.values())
            candidates = sorted(dom | set(rho.values())) + pool
            for w in candidates:
                rho2 = dict(rho)
                rho2[f.var] = w
                if sat(ts, rho2, f.body, d):
                    return True
            return False
        raise TypeError(f)

    return sat(tuples, dict(nu), phi, depth)


def h_structures(elems=(1, 2), max_tuples=4):
    """All structures over {H/2} on the given elements with at most the given
    number of tuples (not up to isomorphism)."""
    cells = [(a, b) for a in elems for b in elems]
    out = []
    for r in range(min(len(cells), max_tuples) + 1):
        for chosen in itertools.combinations(cells, r):
            out.append(mk_h(chosen))
    return out
