"""Command-line entry points wiring all modules together.

Inputs are text files (structure files may embed their signature block);
machine output goes to stdout, diagnostics to stderr.  Exit codes: 0 when the
property holds or the artifact was produced, 1 when the checked property
fails, 2 on usage or input errors.  Evaluation cutoffs can be overridden with
RELOG_CUTOFF_<NAME> environment variables or repeated --cutoff NAME=VALUE
flags (names match the limit fields, e.g. RELOG_CUTOFF_MSO_CARRIER=16).
"""

import argparse
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

from .compile import gen_twformsid, gen_twsid, slr_to_so
from .config import DEFAULT, Limits
from .core import (
    Store,
    parse_signature,
    parse_structure,
    structure_to_json,
    structure_to_text,
)
from .errors import RelogError
from .gallery import GALLERY, run_entry
from .slr import (
    check_slr,
    check_slr_injective,
    injectify,
    normalize,
    parse_sid,
    parse_slr,
    sid_to_text,
    split_relation_atoms,
)
from .so import check_so, parse_so, so_to_text
from .treewidth import (
    TreeDecomposition,
    decomposition_to_derivation,
    derivation_to_decomposition,
    exact_treewidth,
    reduce_decomposition,
    verify_decomposition,
    verify_reduced,
)
from .types import type_of


class UsageError(Exception):
    """Bad invocation or unusable input; mapped to exit code 2."""


# --- input plumbing -----------------------------------------------------------

def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _load_structure(path):
    return parse_structure(_read(path))


def _load_signature(path):
    return parse_signature(_read(path))


def _load_td(path):
    try:
        return TreeDecomposition.from_json(json.loads(_read(path)))
    except (KeyError, ValueError, AssertionError) as exc:
        raise UsageError(f"bad decomposition file {path}: {exc}") from None


def _formula_arg(arg, signature):
    """A sentence given either as a file path or as literal text."""
    text = _read(arg) if os.path.isfile(arg) else arg
    return parse_so(text, signature)


def _store_arg(spec, names):
    """Parse --store x=a,y=b against the structure's element names."""
    nu = {}
    if not spec:
        return nu
    for item in spec.split(","):
        var, sep, name = item.partition("=")
        if not sep or not var.strip() or not name.strip():
            raise UsageError(f"bad store item {item!r}, expected var=element")
        name = name.strip()
        if name not in names:
            raise UsageError(
                f"unknown element {name!r}; declare it in the structure file "
                f"(known: {sorted(names)})")
        nu[var.strip()] = names[name]
    return nu


def _limits(args):
    over = {}
    valid = {f.name for f in dataclass_fields(Limits)}
    for f in sorted(valid):
        env = os.environ.get("RELOG_CUTOFF_" + f.upper())
        if env is not None:
            over[f] = int(env)
    for item in args.cutoff or ():
        name, sep, value = item.partition("=")
        name = name.strip().lower()
        if not sep or name not in valid:
            raise UsageError(f"bad cutoff {item!r}; names: {sorted(valid)}")
        over[name] = int(value)
    return DEFAULT.with_overrides(**over) if over else DEFAULT


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted((_jsonable(v) for v in x), key=repr)
    return x


def _emit(args, json_payload, text):
    if args.emit == "json":
        print(json.dumps(json_payload, sort_keys=True))
    else:
        print(text)


# --- subcommands --------------------------------------------------------------

def _cmd_check_slr(args, limits, injective=False):
    s, names = _load_structure(args.structure)
    sid = parse_sid(_read(args.sid), s.signature)
    phi = parse_slr(args.query, s.signature, sid)
    nu = _store_arg(args.store, names)
    check = check_slr_injective if injective else check_slr
    deriv = check(s, nu, phi, sid, limits)
    if deriv is None:
        _emit(args, {"sat": False}, "unsat")
        return 1
    _emit(args, {"sat": True, "derivation": deriv.to_json()},
          f"sat (derivation with {deriv.size()} nodes)")
    return 0


def _cmd_check_slr_inj(args, limits):
    return _cmd_check_slr(args, limits, injective=True)


def _cmd_check_so(args, limits):
    s, names = _load_structure(args.structure)
    phi = _formula_arg(args.formula, s.signature)
    nu = _store_arg(args.store, names)
    verdict = check_so(s, phi, store=Store(fo=nu), limits=limits,
                       padding=args.padding)
    _emit(args, {"sat": bool(verdict)}, "true" if verdict else "false")
    return 0 if verdict else 1


def _sid_transform(args, limits, transform):
    sig = _load_signature(args.sig) if args.sig else None
    sid = parse_sid(_read(args.sid), sig)
    out = sid_to_text(transform(sid))
    _emit(args, {"sid": out}, out)
    return 0


def _cmd_normalize(args, limits):
    return _sid_transform(args, limits, normalize)


def _cmd_split(args, limits):
    return _sid_transform(args, limits, split_relation_atoms)


def _cmd_injectify(args, limits):
    s, names = _load_structure(args.structure)
    sid = parse_sid(_read(args.sid), s.signature)
    phi = parse_slr(args.query, s.signature, sid)
    nu = _store_arg(args.store, names)
    deriv = check_slr(s, nu, phi, sid, limits)
    if deriv is None:
        _emit(args, {"sat": False}, "unsat")
        return 1
    s2, deriv2 = injectify(s, deriv, sid)
    _emit(args,
          {"sat": True, "structure": structure_to_json(s2),
           "derivation": deriv2.to_json()},
          structure_to_text(s2))
    return 0


def _cmd_treewidth(args, limits):
    s, _ = _load_structure(args.structure)
    width, td = exact_treewidth(s, limits)
    _emit(args, {"width": width, "decomposition": td.to_json()}, str(width))
    return 0


def _cmd_verify_td(args, limits):
    s, _ = _load_structure(args.structure)
    td = _load_td(args.td)
    if args.k is not None:
        violations = verify_reduced(s, td, args.k)
    else:
        violations = verify_decomposition(s, td)
    _emit(args, {"valid": not violations, "violations": violations},
          "valid" if not violations else "\n".join(violations))
    return 0 if not violations else 1


def _cmd_reduce_td(args, limits):
    s, _ = _load_structure(args.structure)
    td = _load_td(args.td)
    reduced = reduce_decomposition(s, td, args.k, limits)
    _emit(args, reduced.to_json(), reduced.render())
    return 0


def _cmd_derive_to_td(args, limits):
    s, names = _load_structure(args.structure)
    sid = parse_sid(_read(args.sid), s.signature)
    phi = parse_slr(args.query, s.signature, sid)
    nu = _store_arg(args.store, names)
    deriv = check_slr(s, nu, phi, sid, limits)
    if deriv is None:
        _emit(args, {"sat": False}, "unsat")
        return 1
    td = derivation_to_decomposition(s, deriv, sid)
    _emit(args, td.to_json(), td.render())
    return 0


def _cmd_td_to_derive(args, limits):
    s, _ = _load_structure(args.structure)
    td = _load_td(args.td)
    sid = parse_sid(_read(args.sid), s.signature)
    deriv = decomposition_to_derivation(s, td, sid, args.k)
    _emit(args, deriv.to_json(),
          f"derivation with {deriv.size()} nodes rebuilt")
    return 0


def _cmd_type_of(args, limits):
    s, _ = _load_structure(args.structure)
    fp = type_of(s, args.rank, args.padding, limits)
    _emit(args, {"rank": args.rank, "type": _jsonable(fp)}, repr(fp))
    return 0


def _cmd_gen_twsid(args, limits):
    sig = _load_signature(args.sig)
    sid = gen_twsid(args.k, sig, args.with_corner_cases)
    out = sid_to_text(sid)
    _emit(args, {"sid": out}, out)
    return 0


def _cmd_gen_twformsid(args, limits):
    sig = _load_signature(args.sig)
    phi = _formula_arg(args.formula, sig)
    sid = gen_twformsid(args.k, phi, sig, args.with_corner_cases, limits)
    out = sid_to_text(sid)
    _emit(args, {"sid": out}, out)
    return 0


def _cmd_translate_so(args, limits):
    sig = _load_signature(args.sig)
    sid = split_relation_atoms(parse_sid(_read(args.sid), sig))
    atom = parse_slr(args.query, sig, sid)
    phi = slr_to_so(sid, atom)
    out = so_to_text(phi)
    _emit(args, {"formula": out}, out)
    return 0


def _cmd_gallery(args, limits):
    if args.action == "list":
        payload = [{"name": e.name, "note": e.note} for e in GALLERY.values()]
        _emit(args, payload,
              "\n".join(f"{e.name:10s} {e.note}" for e in GALLERY.values()))
        return 0
    names = [args.entry] if args.entry else sorted(GALLERY)
    unknown = [n for n in names if n not in GALLERY]
    if unknown:
        raise UsageError(f"unknown entry {unknown[0]!r}; known: {sorted(GALLERY)}")
    all_results = []
    for name in names:
        all_results.extend(run_entry(name, args.max_support, args.max_tuples,
                                     limits))
    bad = [r for r in all_results if not r.ok]
    if args.emit == "json":
        payload = {"ok": not bad,
                   "cases": [{"entry": r.entry, "case": r.label,
                              "expected": r.expected, "got": r.got}
                             for r in all_results]}
        print(json.dumps(payload, sort_keys=True))
    else:
        for r in all_results:
            mark = "ok  " if r.ok else "FAIL"
            print(f"{mark} {r.entry}: {r.label} -> {str(r.got).lower()}")
        print(f"{len(all_results)} cases, {len(bad)} mismatches")
    return 0 if not bad else 1


# --- parser -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="relog",
        description="workbench for relational separation logic, weak "
                    "second-order checking, and treewidth-bounded definitions")
    parser.add_argument("--emit", choices=("json", "text"), default="text",
                        help="output format (default text)")
    parser.add_argument("--cutoff", action="append", metavar="NAME=VALUE",
                        help="override an evaluation limit for this run")
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_, *specs):
        p = sub.add_parser(name, help=help_)
        for spec in specs:
            flags, kw = spec
            p.add_argument(*flags, **kw)
        p.set_defaults(fn=fn)
        return p

    structure = (("structure",), {"help": "structure file (embeds signature)"})
    sid_file = (("sid",), {"help": "definition file"})
    query = (("query",), {"help": "query formula, e.g. 'ls(x, y)'"})
    store = (("--store",), {"help": "variable assignment var=elem,...",
                            "default": ""})
    td_file = (("td",), {"help": "decomposition file (JSON)"})
    sig_opt = (("--sig",), {"help": "signature file"})
    sig_pos = (("sig",), {"help": "signature file"})
    k_pos = (("k",), {"type": int, "help": "width bound"})
    corner = (("--with-corner-cases",), {"action": "store_true",
                                         "help": "include rules for at most "
                                                 "k-element structures"})
    padding = (("--padding",), {"type": int, "default": None,
                                "help": "extra carrier elements"})

    cmd("check-slr", _cmd_check_slr,
        "decide satisfaction under a definition system",
        structure, sid_file, query, store)
    cmd("check-slr-inj", _cmd_check_slr_inj,
        "decide satisfaction under the injective-store semantics",
        structure, sid_file, query, store)
    cmd("check-so", _cmd_check_so,
        "decide a second-order sentence over a finite carrier",
        structure, (("formula",), {"help": "sentence text or file"}),
        store, padding)
    cmd("normalize", _cmd_normalize,
        "eliminate variable-variable equalities from a definition system",
        sid_file, sig_opt)
    cmd("split", _cmd_split,
        "give every rule at most one relation atom per symbol",
        sid_file, sig_opt)
    cmd("injectify", _cmd_injectify,
        "rebuild a model so every existential witness is globally fresh",
        structure, sid_file, query, store)
    cmd("treewidth", _cmd_treewidth,
        "exact treewidth with an optimal decomposition", structure)
    cmd("verify-td", _cmd_verify_td,
        "check a decomposition (base conditions; reduced form with --k)",
        structure, td_file,
        (("--k",), {"type": int, "default": None, "help": "reduced width"}))
    cmd("reduce-td", _cmd_reduce_td,
        "rebuild a decomposition into the reduced width-k form",
        structure, td_file, k_pos)
    cmd("derive-to-td", _cmd_derive_to_td,
        "decomposition extracted from a derivation",
        structure, sid_file, query, store)
    cmd("td-to-derive", _cmd_td_to_derive,
        "derivation rebuilt from a reduced decomposition",
        structure, td_file, sid_file, k_pos)
    cmd("type-of", _cmd_type_of,
        "rank-bounded behaviour fingerprint of a structure",
        structure, (("--rank",), {"type": int, "required": True}), padding)
    cmd("gen-twsid", _cmd_gen_twsid,
        "definition system for guarded structures of treewidth at most k",
        k_pos, sig_pos, corner)
    cmd("gen-twformsid", _cmd_gen_twformsid,
        "width-k system refined by a second-order sentence",
        k_pos, sig_pos, (("formula",), {"help": "sentence text or file"}),
        corner)
    cmd("translate-so", _cmd_translate_so,
        "second-order sentence equivalent to a definition-system query",
        sid_file, query, (("--sig",), {"help": "signature file",
                                       "required": True}))
    g = sub.add_parser("gallery", help="run the example corpus")
    g.add_argument("action", choices=("list", "run"))
    g.add_argument("entry", nargs="?", default=None)
    g.add_argument("--max-support", type=int, default=None)
    g.add_argument("--max-tuples", type=int, default=None)
    g.set_defaults(fn=_cmd_gallery)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        limits = _limits(args)
        return args.fn(args, limits)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RelogError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
