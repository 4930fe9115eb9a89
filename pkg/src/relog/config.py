"""Cutoff configuration for the exhaustive algorithms.

All bounds can be overridden per call (pass a Limits instance) or globally via
environment variables named RELOG_CUTOFF_<FIELD> (upper-cased field name), e.g.
RELOG_CUTOFF_ISO_SUPPORT=12.
"""

import os
from dataclasses import dataclass, fields


@dataclass
class Limits:
    # isomorphism search: maximum support size per operand
    iso_support: int = 10
    # exact treewidth: maximum number of support elements for the subset DP
    treewidth_support: int = 12
    # rank-bounded types: maximum rank and maximum support of the input structure
    type_rank: int = 2
    type_support: int = 5
    # weak SO checking: carrier bound when a set quantifier of arity >= 2 occurs,
    # and carrier bound for monadic-only formulas
    so2_carrier: int = 8
    mso_carrier: int = 12
    # budget (number of candidate assignments) before enumeration gives up
    so_enum_budget: int = 1 << 22
    # reachable-type closure cutoff for annotated definition generation
    max_types: int = 5000
    # structure enumeration: maximum support accepted before refusing
    enum_support: int = 6
    enum_tuples: int = 12

    def with_overrides(self, **kw):
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(kw)
        return Limits(**data)


def limits_from_env(base=None):
    """Return a Limits with any RELOG_CUTOFF_* environment overrides applied."""
    lim = base or Limits()
    overrides = {}
    for f in fields(Limits):
        raw = os.environ.get(f"RELOG_CUTOFF_{f.name.upper()}")
        if raw is not None:
            overrides[f.name] = int(raw)
    return lim.with_overrides(**overrides) if overrides else lim


DEFAULT = limits_from_env()
