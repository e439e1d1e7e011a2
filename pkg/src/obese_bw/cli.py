"""Command line entry point: `obese-bw` with subcommands for the full
bandwidth pipeline, growth rates, squeezing, word distances, grid
capacity estimation, and stage artifact dumps.

JSON reports carry `"schema": 1`, serialize every real number as a
decimal string (rationals as "p/q"), and contain no wall-clock times, so
identical inputs and flags give byte-identical output.  Timings appear in
the text format only.  Exit codes: 0 success, 2 parse, 3 validation, 4
resource cap, 5 internal consistency.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

from .errors import ObeseBwError, ParseError, ValidationError
from .growth import (adjacency_matrix, count_squeezed, determinize_trim,
                     growth_rate, parse_fa, squeeze, support)
from .metrics import brute_capacity, directed_distance, grid_words, pseudo_distance
from .model import TimedWord, export_dot, ta_from_dict, ta_to_dict
from .ratio import DEFAULT_PRECISION, bandwidth

SCHEMA = 1
STAGE_FILES = (("heartbeat", "10-heartbeat"), ("regionsplit", "20-regionsplit"),
               ("zerofree", "30-zerofree"), ("stratified", "40-stratified"),
               ("wtg", "50-wtg"), ("cpg", "55-cpg"))


def real_str(x, digits=12):
    """Decimal-string form of a real: rationals exactly as p/q, floats
    with a fixed significant-digit count (reproducible across runs)."""
    if x is None:
        return None
    if isinstance(x, Fraction):
        return "%d/%d" % (x.numerator, x.denominator)
    if x == math.inf:
        return "inf"
    return "%.*g" % (digits, float(x))


def _read(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError("cannot read %s: %s" % (path, exc)) from exc


def load_ta(path):
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ParseError("%s: invalid JSON at line %d: %s"
                         % (path, exc.lineno, exc.msg)) from exc
    automaton, warnings = ta_from_dict(doc)
    return automaton, warnings


def emit_json(doc, out=None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    (out or sys.stdout).write(text)


# ---------------------------------------------------------------------------
# bandwidth / stages

def bandwidth_doc(report, want_witness):
    r = report.result
    doc = {
        "schema": SCHEMA,
        "alpha": real_str(r.alpha),
        "alpha_exact": real_str(r.alpha_exact),
        "obese": r.obese,
        "method": r.method,
        "witness_duration": r.witness_duration,
        "c_estimate": real_str(r.c_estimate),
        "spots": [{"members": g["members"], "Z": g["Z"],
                   "alpha": real_str(g["alpha"]), "count": g["count"]}
                  for g in report.spots],
        "stage_stats": [{"name": s["name"],
                         "locations": s.get("locations"),
                         "edges": s.get("edges")}
                        for s in report.stages],
        "warnings": list(report.warnings),
    }
    if want_witness:
        doc["witness"] = list(r.witness)
    return doc


def bandwidth_text(report, want_witness, out):
    r = report.result
    for s in report.stages:
        out.write("%-20s %8.2fs  locations=%-8s edges=%s\n"
                  % (s["name"], s["seconds"],
                     s.get("locations", "-"), s.get("edges", "-")))
    for g in report.spots:
        out.write("spot members=%s Z=%s alpha=%s copies=%d\n"
                  % (",".join(g["members"]), ",".join(g["Z"]) or "-",
                     real_str(g["alpha"]), g["count"]))
    out.write("alpha = %s (%s)\n" % (real_str(r.alpha), r.method))
    out.write("obese = %s\n" % ("yes" if r.obese else "no"))
    if r.witness_duration:
        out.write("witness duration = %d\n" % r.witness_duration)
    if want_witness:
        for step in r.witness:
            out.write("  %s\n" % step)
    for w in report.warnings:
        out.write("warning: %s\n" % w)


def _wtg_dot(wtg):
    lines = ["digraph wtg {", "  rankdir=LR;"]
    ids = {q: "n%d" % i for i, q in enumerate(wtg.locations)}
    for q in wtg.locations:
        w = wtg.weight.get(q, 0.0)
        label = str(q) if w == 0 else "%s w=%s" % (q, real_str(w, 6))
        lines.append("  %s [label=\"%s\"];" % (ids[q], label))
    color = {"plain": "black", "copy": "black", "abstract": "blue"}
    for e in sorted(wtg.edges, key=lambda e: (ids[e.src], ids[e.dst], str(e.guard))):
        lines.append("  %s -> %s [label=\"%s; {%s}\", color=%s];"
                     % (ids[e.src], ids[e.dst], e.guard,
                        ",".join(sorted(e.resets)), color[e.kind]))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _wtg_json(wtg):
    return {
        "locations": [{"name": str(q), "weight": real_str(wtg.weight.get(q, 0.0)),
                       "starting": str(wtg.starting[q])} for q in wtg.locations],
        "edges": [{"from": str(e.src), "to": str(e.dst), "guard": str(e.guard),
                   "resets": sorted(e.resets), "kind": e.kind}
                  for e in wtg.edges],
    }


def _cpg_json(cpg):
    return {
        "nodes": [{"kind": n.kind, "owner": str(n.owner),
                   "vertex": list(n.vertex)} for n in cpg.nodes],
        "edges": [{"kind": e.kind, "src": e.src, "dst": e.dst,
                   "duration": e.duration} for e in cpg.edges],
    }


def _cpg_dot(cpg):
    lines = ["digraph cpg {", "  rankdir=LR;"]
    for i, n in enumerate(cpg.nodes):
        lines.append("  n%d [label=\"%s@%s\"];"
                     % (i, n.owner, ",".join(map(str, n.vertex))))
    for e in cpg.edges:
        color = "black" if e.kind == "delay" else "blue"
        lines.append("  n%d -> n%d [label=\"%d\", color=%s];"
                     % (e.src, e.dst, e.duration, color))
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump_stages(report, directory):
    os.makedirs(directory, exist_ok=True)
    spots = report.artifacts.get("spot_objects") or []
    for key, stem in STAGE_FILES:
        art = report.artifacts.get(key)
        if art is None:
            continue
        base = os.path.join(directory, stem)
        if key == "heartbeat":
            ta, colors, clusters = art.automaton, None, None
        elif key in ("regionsplit", "zerofree"):
            ta, colors, clusters = art.to_timed_automaton(), None, None
        elif key == "stratified":
            ta = art.rsta.to_timed_automaton()
            colors = {i: "red" for i in art.red}
            clusters = [("spot %d" % s.id, list(s.members)) for s in spots]
        elif key == "wtg":
            with open(base + ".dot", "w", encoding="utf-8") as fh:
                fh.write(_wtg_dot(art))
            emit_json_file(_wtg_json(art), base + ".json")
            continue
        else:   # cpg
            with open(base + ".dot", "w", encoding="utf-8") as fh:
                fh.write(_cpg_dot(art))
            emit_json_file(_cpg_json(art), base + ".json")
            continue
        with open(base + ".dot", "w", encoding="utf-8") as fh:
            fh.write(export_dot(ta, edge_colors=colors, clusters=clusters))
        emit_json_file(ta_to_dict(ta), base + ".json")


def emit_json_file(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        emit_json(doc, fh)


def cmd_bandwidth(args, collect_all=False):
    automaton, warnings = load_ta(args.file)
    collect = set()
    if args.emit_stages or collect_all:
        collect = {"heartbeat", "regionsplit", "zerofree", "stratified", "wtg"}
        if args.cpg:
            collect.add("cpg")
    report = bandwidth(automaton, precision=args.precision)  \
        if not collect else \
        bandwidth(automaton, precision=args.precision, collect=collect)
    report.warnings[:0] = warnings
    if args.emit_stages:
        dump_stages(report, args.emit_stages)
    if args.format == "json":
        emit_json(bandwidth_doc(report, args.witness))
    else:
        bandwidth_text(report, args.witness, sys.stdout)
    return 0


# ---------------------------------------------------------------------------
# growth / squeeze

def cmd_growth(args):
    fa = parse_fa(_read(args.file))
    rate = growth_rate(fa, precision=args.precision)
    det = determinize_trim(squeeze(fa))
    doc = {"schema": SCHEMA, "alpha": real_str(rate.value),
           "squeezed_states": len(det.states),
           "adjacency_matrix": adjacency_matrix(det)}
    if args.n_check is not None:
        doc["n_check"] = [
            {"n": n, "count": count_squeezed(fa, n),
             "log2_count_over_n":
                 real_str(math.log2(count_squeezed(fa, n)) / n)}
            for n in range(1, args.n_check + 1)]
    if args.format == "json":
        emit_json(doc)
    else:
        sys.stdout.write("alpha = %s\nstates = %d\nmatrix = %s\n"
                         % (doc["alpha"], doc["squeezed_states"],
                            doc["adjacency_matrix"]))
        for row in doc.get("n_check", ()):
            sys.stdout.write("n=%-3d count=%-10d log2(count)/n=%s\n"
                             % (row["n"], row["count"],
                                row["log2_count_over_n"]))
    return 0


def cmd_squeeze(args):
    fa = parse_fa(_read(args.file))
    det = determinize_trim(squeeze(fa))
    doc = {"schema": SCHEMA, "states": len(det.states),
           "adjacency_matrix": adjacency_matrix(det)}
    if args.n is not None:
        doc["word_count"] = {"n": args.n, "count": count_squeezed(fa, args.n)}
    if args.format == "json":
        emit_json(doc)
    else:
        sys.stdout.write("states = %d\nmatrix = %s\n"
                         % (doc["states"], doc["adjacency_matrix"]))
        if args.n is not None:
            sys.stdout.write("squeezed words of length %d: %d\n"
                             % (args.n, doc["word_count"]["count"]))
    return 0


# ---------------------------------------------------------------------------
# distance

def word_from_doc(items, where):
    try:
        events = tuple((frozenset(letters), Fraction(str(t)))
                       for letters, t in items)
    except (TypeError, ValueError) as exc:
        raise ParseError("bad timed word %s: %s" % (where, exc)) from exc
    return TimedWord(events)


def cmd_distance(args):
    try:
        doc = json.loads(_read(args.file))
        u = word_from_doc(doc["u"], "u")
        v = word_from_doc(doc["v"], "v")
    except (json.JSONDecodeError, KeyError) as exc:
        raise ParseError("distance input needs JSON with keys u, v: %s"
                         % exc) from exc
    out = {"schema": SCHEMA,
           "directed_uv": real_str(directed_distance(u, v)),
           "directed_vu": real_str(directed_distance(v, u)),
           "distance": real_str(pseudo_distance(u, v))}
    if args.format == "json":
        emit_json(out)
    else:
        sys.stdout.write("->d(u,v) = %s\n->d(v,u) = %s\nd = %s\n"
                         % (out["directed_uv"], out["directed_vu"],
                            out["distance"]))
    return 0


# ---------------------------------------------------------------------------
# capacity

def cmd_capacity(args):
    automaton, _ = load_ta(args.file)
    fa = support(automaton)
    T = Fraction(args.T)
    grid = Fraction(args.grid)
    epsilons = [Fraction(e) for e in args.epsilon]
    words = grid_words(fa, T, grid, max_events=args.max_events)
    rows = []
    for eps in sorted(epsilons, reverse=True):
        rep = brute_capacity(words, T, eps, grid_step=grid)
        rows.append((real_str(eps), rep.sep_size, rep.net_size,
                     real_str(rep.capacity), real_str(rep.entropy)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "sep", "net", "capacity", "entropy"])
    writer.writerows(rows)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def _default_precision():
    raw = os.environ.get("OBESE_BW_PRECISION")
    if raw is None:
        return DEFAULT_PRECISION
    try:
        value = float(raw)
    except ValueError as exc:
        raise ValidationError("OBESE_BW_PRECISION=%r is not a number"
                              % raw) from exc
    if value <= 0:
        raise ValidationError("OBESE_BW_PRECISION must be positive")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="obese-bw",
        description="Bandwidth coefficient of obese timed automata")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("file", help="input document")
        if fmt:
            p.add_argument("--format", choices=("json", "text"),
                           default="text")

    p = sub.add_parser("bandwidth", help="full pipeline: final alpha")
    common(p)
    p.add_argument("--precision", type=float, default=None)
    p.add_argument("--emit-stages", metavar="DIR")
    p.add_argument("--cpg", action="store_true",
                   help="also dump the corner-point graph (can be large)")
    p.add_argument("--witness", action="store_true")

    p = sub.add_parser("stages", help="pipeline with all stage dumps")
    common(p)
    p.add_argument("--precision", type=float, default=None)
    p.add_argument("--emit-stages", metavar="DIR", required=True)
    p.add_argument("--cpg", action="store_true")
    p.add_argument("--witness", action="store_true")

    p = sub.add_parser("growth", help="growth rate of a squeezed language")
    common(p)
    p.add_argument("--precision", type=float, default=None)
    p.add_argument("--n-check", type=int, default=None, metavar="N",
                   help="print the word-count sandwich for lengths 1..N")

    p = sub.add_parser("squeeze", help="determinized squeezed automaton")
    common(p)
    p.add_argument("--n", type=int, default=None,
                   help="also count squeezed words of this length")

    p = sub.add_parser("distance", help="pseudo-distance of two timed words")
    common(p)

    p = sub.add_parser("capacity", help="grid capacity/entropy estimation")
    common(p, fmt=False)
    p.add_argument("--T", required=True)
    p.add_argument("--epsilon", action="append", required=True,
                   help="repeatable; one CSV row per value")
    p.add_argument("--grid", required=True)
    p.add_argument("--csv", metavar="FILE")
    p.add_argument("--max-events", type=int, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "precision", None) is None and \
                hasattr(args, "precision"):
            args.precision = _default_precision()
        if args.command == "bandwidth":
            return cmd_bandwidth(args)
        if args.command == "stages":
            return cmd_bandwidth(args, collect_all=True)
        if args.command == "growth":
            return cmd_growth(args)
        if args.command == "squeeze":
            return cmd_squeeze(args)
        if args.command == "distance":
            return cmd_distance(args)
        if args.command == "capacity":
            return cmd_capacity(args)
        parser.error("unknown command %s" % args.command)
    except ObeseBwError as exc:
        sys.stderr.write("obese-bw: %s\n" % exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
