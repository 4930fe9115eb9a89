"""Workbench for separation logic of relations over inductive definitions:
satisfaction checking, weak monadic second-order model checking, rank-bounded
types with composition, treewidth machinery, and the compilers connecting
them.

The package splits into focused modules; the most common entry points are
re-exported here.

- :mod:`relog.core` — signatures, guarded relational structures, glueing,
  isomorphism, and the text / JSON formats.
- :mod:`relog.slr` — spatial formulas, inductive definition systems,
  satisfaction (`check_slr`), injective satisfaction, normalization,
  relation-atom splitting, and injectification.
- :mod:`relog.so` — weak (monadic) second-order formulas and model checking.
- :mod:`relog.types` — rank-r types (fingerprints) and their abstract
  glue / forget transformers.
- :mod:`relog.treewidth` — exact treewidth, reduced tree decompositions, and
  the derivation <-> decomposition converters.
- :mod:`relog.compile` — the treewidth-k system generator, its
  formula-annotated variant, and the translation to second-order logic.
- :mod:`relog.gallery` — named example systems with independent oracles and
  exhaustive small-structure sweeps.
- :mod:`relog.cli` — the `relog` command-line interface.
"""

from .config import DEFAULT, Limits
from .core import (
    Signature,
    Store,
    Structure,
    canonical_key,
    compose,
    encode,
    encode_graph,
    forget,
    glue,
    is_guarded,
    isomorphic,
    mint,
    parse_signature,
    parse_structure,
    signature_to_text,
    structure_from_json,
    structure_to_json,
    structure_to_text,
)
from .errors import RelogError
from .slr import (
    Derivation,
    Sid,
    check_slr,
    check_slr_injective,
    injectify,
    normalize,
    parse_sid,
    parse_slr,
    replay_derivation,
    sid_to_text,
    slr_to_text,
    split_relation_atoms,
    width_bound,
)
from .so import check_so, check_so_with_hint, parse_so, so_to_text
from .types import TypeRegistry, abs_forget, abs_glue, type_of
from .treewidth import (
    TreeDecomposition,
    decomposition_to_derivation,
    derivation_to_decomposition,
    exact_treewidth,
    reduce_decomposition,
    verify_decomposition,
    verify_reduced,
)
from .compile import (
    SlotFlowGraph,
    extract_certificate,
    gen_twformsid,
    gen_twsid,
    slr_to_so,
)
from .gallery import GALLERY, run_entry

__version__ = "0.1.0"

__all__ = [
    "DEFAULT",
    "Limits",
    "Signature",
    "Store",
    "Structure",
    "canonical_key",
    "compose",
    "encode",
    "encode_graph",
    "forget",
    "glue",
    "is_guarded",
    "isomorphic",
    "mint",
    "parse_signature",
    "parse_structure",
    "signature_to_text",
    "structure_from_json",
    "structure_to_json",
    "structure_to_text",
    "RelogError",
    "Derivation",
    "Sid",
    "check_slr",
    "check_slr_injective",
    "injectify",
    "normalize",
    "parse_sid",
    "parse_slr",
    "replay_derivation",
    "sid_to_text",
    "slr_to_text",
    "split_relation_atoms",
    "width_bound",
    "check_so",
    "check_so_with_hint",
    "parse_so",
    "so_to_text",
    "TypeRegistry",
    "abs_forget",
    "abs_glue",
    "type_of",
    "TreeDecomposition",
    "decomposition_to_derivation",
    "derivation_to_decomposition",
    "exact_treewidth",
    "reduce_decomposition",
    "verify_decomposition",
    "verify_reduced",
    "SlotFlowGraph",
    "extract_certificate",
    "gen_twformsid",
    "gen_twsid",
    "slr_to_so",
    "GALLERY",
    "run_entry",
    "__version__",
]
