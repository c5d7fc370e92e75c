"""Command-line entry point: convert, build, sample, ags, exact, metrics.

Exit codes: 0 ok, 2 input error, 3 resource error, 4 partial results.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics, motif, oracle
from .ags import ags_run
from .build import (BuildConfig, Coloring, build_tables, choose_lambda, color_graph, open_tables,
                    table_lambda)
from .graph import EdgeListError, Graph, GraphFormatError, MAGIC, load_edge_list
from .sample import EmptyUrnError, naive_run
from .table import CountOverflowError, TableFormatError

SCRATCH_ENV = "MOTIFCOUNT_SCRATCH"

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE, EXIT_PARTIAL = 0, 2, 3, 4

log = logging.getLogger("motifcount")


class InputError(Exception):
    pass


def load_graph(path) -> Graph:
    """Binary graph if the file starts with the magic, edge list otherwise."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return Graph.load(path)
    with open(path) as fh:
        return load_edge_list(fh)


def scratch_dir() -> Path:
    return Path(os.environ.get(SCRATCH_ENV) or Path.cwd() / "motif-scratch")


# -- result sets -------------------------------------------------------------

def write_results(rows: list[dict], meta: dict, out, as_json: bool = False) -> None:
    if as_json:
        doc = {"meta": meta, "graphlets": rows}
        text = json.dumps(doc, indent=2, default=str) + "\n"
    else:
        buf = io.StringIO()
        for key, val in meta.items():
            buf.write(f"# {key}={val}\n")
        fields = list(rows[0]) if rows else ["graphlet_code_hex", "estimate", "colorful_estimate",
                                             "samples", "frequency"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def read_results(path) -> tuple[dict, list[dict]]:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc.get("meta", {}), doc.get("graphlets", [])
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        elif line.strip():
            body.append(line)
    return meta, list(csv.DictReader(body))


def _rows(estimates: dict[int, float], colorful: dict[int, float], seen: dict[int, int],
          covered=None) -> list[dict]:
    tot = math.fsum(estimates.values())
    rows = []
    for code in sorted(set(estimates) | set(seen)):
        row = {
            "graphlet_code_hex": motif.code_hex(code),
            "estimate": repr(float(estimates.get(code, 0.0))),
            "colorful_estimate": repr(float(colorful.get(code, 0.0))),
            "samples": seen.get(code, 0),
            "frequency": repr(estimates.get(code, 0.0) / tot if tot else 0.0),
        }
        if covered is not None:
            row["covered"] = int(code in covered)
        rows.append(row)
    return rows


# -- commands ----------------------------------------------------------------

def cmd_convert(args) -> int:
    with open(args.input) as fh:
        g = load_edge_list(fh)
    g.save(args.output)
    if g.labels is not None:
        Path(str(args.output) + ".ids").write_text("\n".join(map(str, g.labels.tolist())) + "\n")
    st = g.stats()
    print(f"n={st['n']} m={st['m']} max_degree={st['max_degree']}")
    return EXIT_OK


def _coloring(g: Graph, k: int, seed: int, lam, auto_b) -> Coloring:
    if auto_b is not None:
        lam = choose_lambda(g, k, auto_b, seed)
        if math.isclose(lam, 1.0 / k):
            lam = None
    return color_graph(g, BuildConfig(k, seed=seed, lam=lam))


def cmd_build(args) -> int:
    g = load_graph(args.graph)
    out = Path(args.out) if args.out else scratch_dir() / f"tables-k{args.k}-s{args.seed}"
    t0 = time.perf_counter()
    coloring = _coloring(g, args.k, args.seed, args.lam, args.auto_lambda)
    table = build_tables(g, coloring, out, threads=args.threads)
    sizes = {h: table.entry_count(h) for h in sorted(table.levels)}
    table.close()
    print(f"tables in {out}: entries per size {sizes}; {time.perf_counter() - t0:.2f}s")
    return EXIT_OK


def _tables_for(g: Graph, args, i: int):
    """Table for the i-th coloring: the given directory for i=0, fresh builds otherwise."""
    if args.tables and i == 0:
        table = open_tables(args.tables)
        if table.k != args.k:
            raise InputError(f"tables were built for k={table.k}, not k={args.k}")
        return table, table_lambda(table)
    coloring = _coloring(g, args.k, args.seed + i, args.lam, getattr(args, "auto_lambda", None))
    return build_tables(g, coloring, threads=args.threads), coloring.lam


def cmd_sample(args) -> int:
    g = load_graph(args.graph)
    if args.samples is None and args.time_budget is None:
        raise InputError("need --samples or --time-budget")
    profiles = motif.ProfileCache(args.profile_cache)
    sums: dict[int, float] = {}
    csums: dict[int, float] = {}
    seen: dict[int, int] = {}
    total_m = 0
    t0 = time.perf_counter()
    for i in range(args.colorings):
        table, lam = _tables_for(g, args, i)
        res = naive_run(table, g, samples=args.samples, seconds=args.time_budget,
                        seed=args.seed + i, lam=lam, profiles=profiles)
        for c, v in res.estimates.items():
            sums[c] = sums.get(c, 0.0) + v
            csums[c] = csums.get(c, 0.0) + res.colorful[c]
        for c, n in res.hist.items():
            seen[c] = seen.get(c, 0) + n
        total_m += res.samples
        table.close()
    profiles.save()
    gamma = args.colorings
    est = {c: v / gamma for c, v in sums.items()}
    col = {c: v / gamma for c, v in csums.items()}
    meta = {"command": "sample", "k": args.k, "seed": args.seed, "colorings": gamma,
            "samples": total_m, "lambda": args.lam if args.lam is not None else "",
            "seconds": f"{time.perf_counter() - t0:.3f}"}
    write_results(_rows(est, col, seen), meta, args.out, args.json)
    return EXIT_OK


def cmd_ags(args) -> int:
    g = load_graph(args.graph)
    if (args.epsilon is None) != (args.delta is None):
        raise InputError("--epsilon and --delta go together")
    table, lam = _tables_for(g, args, 0)
    profiles = motif.ProfileCache(args.profile_cache)
    diag = None
    if args.diagnostics == "-":
        diag = sys.stderr
    elif args.diagnostics:
        diag = open(args.diagnostics, "w")
    try:
        res = ags_run(table, g, epsilon=args.epsilon, delta=args.delta, cbar_override=args.cbar,
                      seed=args.seed, max_samples=args.max_samples, patience=args.patience,
                      lam=lam, profiles=profiles, diagnostics=diag)
    finally:
        if diag not in (None, sys.stderr):
            diag.close()
        table.close()
    profiles.save()
    meta = {"command": "ags", "k": args.k, "seed": args.seed, "cbar": res.cbar,
            "samples": res.samples, "discarded": res.discarded, "covered": len(res.covered),
            "stop": res.reason,
            "partial": int(res.partial)}
    write_results(_rows(res.estimates, res.colorful, res.counts, set(res.covered)), meta,
                  args.out, args.json)
    return EXIT_PARTIAL if res.partial else EXIT_OK


def cmd_exact(args) -> int:
    g = load_graph(args.graph)
    colors = None
    if args.colors_from:
        colors = np.load(Path(args.colors_from) / "colors.npy")
    census = oracle.exact_census(g, args.k, colors=colors, budget=args.budget)
    if args.json:
        doc = {"k": census.k, "partial": census.partial,
               "counts": {motif.code_hex(c): n for c, n in census.counts.items()}}
        text = json.dumps(doc, indent=2) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    else:
        oracle.write_census(census, args.out or sys.stdout)
    return EXIT_PARTIAL if census.partial else EXIT_OK


def cmd_metrics(args) -> int:
    meta, rows = read_results(args.estimates)
    truth = oracle.read_census(Path(args.truth))
    k = int(meta.get("k", truth.k))
    if truth.k and k != truth.k:
        raise InputError(f"k mismatch: estimates k={k}, truth k={truth.k}")
    column = args.column
    est = {int(r["graphlet_code_hex"], 16): float(r[column]) for r in rows}
    seen = {int(r["graphlet_code_hex"], 16): int(r.get("samples") or 0) for r in rows}
    summary = metrics.summarize(est, truth.counts, seen, args.tolerance)
    if args.json:
        doc = dict(summary)
        doc["errors"] = {motif.code_hex(c): e for c, e in summary["errors"].items()}
        print(json.dumps(doc, indent=2))
    else:
        print(f"l1={summary['l1']:.6g}")
        print(f"within_{args.tolerance:g}={summary['within']:.6g}")
        rf = summary["rarest_found"]
        print(f"rarest_found={'' if rf is None else f'{rf:.6g}'}")
        print("graphlet_code_hex,err")
        for c, e in sorted(summary["errors"].items()):
            print(f"{motif.code_hex(c)},{e:.6g}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _lambda_opts(p):
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--lambda", dest="lam", type=float, help="biased coloring weight of colors 1..k-1")
    grp.add_argument("--auto-lambda", type=float, metavar="B",
                     help="choose lambda by the doubling probe starting at 1/(B(k-1)n)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="motifcount", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="edge list to binary graph")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("build", help="color the graph and build treelet count tables")
    p.add_argument("graph")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    _lambda_opts(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help=f"table directory (default under ${SCRATCH_ENV})")
    p.set_defaults(func=cmd_build)

    for name, func, helptext in (("sample", cmd_sample, "naive sampling estimates"),
                                 ("ags", cmd_ags, "adaptive graphlet sampling estimates")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("graph")
        p.add_argument("-k", type=int, required=True)
        p.add_argument("--tables", help="prebuilt table directory (first coloring)")
        p.add_argument("--seed", type=int, default=0)
        _lambda_opts(p)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--profile-cache", help="file caching spanning-tree profiles")
        p.add_argument("--out", help="result file (default stdout)")
        p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
        p.set_defaults(func=func)
        if name == "sample":
            p.add_argument("--samples", type=int)
            p.add_argument("--time-budget", type=float, metavar="SECONDS")
            p.add_argument("--colorings", type=int, default=1)
        else:
            p.add_argument("--epsilon", type=float)
            p.add_argument("--delta", type=float)
            p.add_argument("--cbar", type=int, help="covering threshold (default 1000)")
            p.add_argument("--max-samples", type=int)
            p.add_argument("--patience", type=int)
            p.add_argument("--diagnostics", help="coverage event log file, '-' for stderr")

    p = sub.add_parser("exact", help="exact census by enumeration")
    p.add_argument("graph")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--colors-from", help="table directory whose coloring restricts to colorful sets")
    p.add_argument("--budget", type=int, help="max connected sets to enumerate")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("metrics", help="compare estimates against an exact census")
    p.add_argument("estimates")
    p.add_argument("truth")
    p.add_argument("--column", default="estimate", choices=["estimate", "colorful_estimate"])
    p.add_argument("--tolerance", type=float, default=0.5)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, EdgeListError, GraphFormatError, TableFormatError, EmptyUrnError,
            ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CountOverflowError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
