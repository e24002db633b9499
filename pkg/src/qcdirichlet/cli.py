"""Command line entry point: ``qcdir run|list|validate``."""

from __future__ import annotations

import argparse
import csv
import datetime
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ENV_OUTPUT_ROOT, InvalidArgument, RunSpec, load_config
from .errors import InvalidDomain, StageError, ToolkitError
from .scenarios import REGISTRY, list_scenarios

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.header for c in columns])
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"{os.path.basename(path)}: row has {len(row)} cells, expected {len(columns)}")
            w.writerow([_cell(v) for v in row])


def schema_text(scenarios) -> str:
    lines = ["# CSV schema", "", "Generated by `qcdir list --schema`. Headers read `name [unit]`.", ""]
    for s in scenarios:
        lines += [f"## {s.name}", "", s.description + ".", ""]
        if s.params:
            lines += ["Parameters:", ""]
            for p in s.params:
                choice = f" One of {', '.join(map(str, p.choices))}." if p.choices else ""
                lines.append(f"- `{p.name}` ({p.kind.__name__}, default `{p.default}`): {p.doc}.{choice}")
            lines.append("")
        for table, cols in s.tables.items():
            lines += [f"`{table}`", "", "| column | unit | meaning |", "|---|---|---|"]
            lines += [f"| {c.name} | {c.unit} | {c.doc} |" for c in cols]
            lines.append("")
    return "\n".join(lines)


def render_svg(csv_path, svg_path, size: int = 400) -> None:
    """Boundary correspondence picture drawn only from the CSV columns."""
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    idx = {h.split(" [")[0]: i for i, h in enumerate(head)}
    pts = []
    for key in ("boundary", "image"):
        xs = [float(r[idx["re_" + key]]) for r in body]
        ys = [float(r[idx["im_" + key]]) for r in body]
        pts.append(list(zip(xs, ys)))
    allp = [p for ps in pts for p in ps] or [(0.0, 0.0)]
    m = max(max(abs(x), abs(y)) for x, y in allp) * 1.1 or 1.0

    def xy(p):
        return f"{(p[0] / m + 1) * size / 2:.3f},{(1 - p[1] / m) * size / 2:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    for ps, colour in zip(pts, ("#1f77b4", "#d62728")):
        if ps:
            out.append(f'<polygon points="{" ".join(xy(p) for p in ps)}" fill="none" stroke="{colour}"/>')
    out.append("</svg>")
    with open(svg_path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _manifest(run: RunSpec, scen, config_path) -> str:
    lines = [f"toolkit_version = {__version__}", f"config = {os.path.basename(config_path)}",
             f"run = {run.label}", f"scenario = {scen.name}", f"seed = {run.seed}", "", "[inputs]"]
    lines += [f"{k} = {v.strip()}" for k, v in sorted(run.raw.items())]
    lines += ["", "[resolved]"]
    lines += [f"{k} = {run.params[k]!r}" for k in sorted(run.params)]
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    lines += ["", f"timestamp = {stamp}", ""]
    return "\n".join(lines)


def execute(run: RunSpec, root: str, config_path: str, svg: bool = False) -> tuple:
    """Run one scenario and write its outputs; returns (label, exit code, message)."""
    scen = REGISTRY[run.scenario]
    outdir = os.path.join(root, run.output)
    try:
        try:
            tables = scen.run(run.params, run.seed)
        except StageError as exc:
            if isinstance(exc.error, (InvalidArgument, InvalidDomain)):
                raise InvalidDomain(str(exc)) from exc
            raise
    except (InvalidArgument, InvalidDomain) as exc:
        return run.label, EXIT_INVALID, f"{type(exc).__name__}: {exc}"
    except ToolkitError as exc:
        return run.label, EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return run.label, EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    os.makedirs(outdir, exist_ok=True)
    for name, cols in scen.tables.items():
        write_table(os.path.join(outdir, name), cols, tables.get(name, []))
    if svg and "correspondence.csv" in scen.tables:
        render_svg(os.path.join(outdir, "correspondence.csv"), os.path.join(outdir, "correspondence.svg"))
    with open(os.path.join(outdir, "manifest.txt"), "w") as fh:
        fh.write(_manifest(run, scen, config_path))
    with open(os.path.join(outdir, "SCHEMA.md"), "w") as fh:
        fh.write(schema_text([scen]))
    return run.label, EXIT_OK, outdir


def _execute_star(args):
    return execute(*args)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, REGISTRY)
    except InvalidArgument as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    work = [(run, cfg.output_root, cfg.path, args.svg) for run in cfg.runs]
    if args.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_execute_star, work))
    else:
        results = [execute(*w) for w in work]
    code = EXIT_OK
    for label, rc, msg in results:
        status = "ok" if rc == EXIT_OK else "failed"
        print(f"{label}: {status}: {msg}", file=sys.stdout if rc == EXIT_OK else sys.stderr)
        code = max(code, rc)
    return code


def cmd_list(args) -> int:
    found = list_scenarios(args.filter or "")
    if args.schema:
        print(schema_text(found))
        return EXIT_OK
    width = max((len(s.name) for s in found), default=0)
    for s in found:
        print(f"{s.name:<{width}}  [{s.module}]  {s.description}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config, REGISTRY)
    except InvalidArgument as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for run in cfg.runs:
        print(f"{run.label}: {run.scenario} (seed {run.seed}) -> {os.path.join(cfg.output_root, run.output)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcdir", description="Run registered quasiconformal experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="execute every run in a config file")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1, help="run independent scenarios in N processes")
    r.add_argument("--svg", action="store_true", help="also draw SVG pictures from the CSV output")
    r.set_defaults(fn=cmd_run)
    ls = sub.add_parser("list", help="list registered scenarios")
    ls.add_argument("filter", nargs="?", default="")
    ls.add_argument("--schema", action="store_true", help="print the CSV schema instead")
    ls.set_defaults(fn=cmd_list)
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    v.set_defaults(fn=cmd_validate)
    ap.epilog = f"The environment variable {ENV_OUTPUT_ROOT} overrides the output root."
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
