"""Command line interface: ``mgspec <command> <graph-file> [options]``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    bounded_L_example_check,
    delta_prime_truncation_experiment,
    delta_truncation_experiment,
    greens_identity_suite,
    kirchhoff_transparency_test,
    lower_bound_certificate,
    spectrum,
)
from .conditions import TAU_ALG, is_lagrangian, lowest_eigenvalue, to_lagrangian
from .discretization import assemble_form, build_meshes, default_truncation, dump_matrices
from .errors import MgspecError
from .io import parse_graph_file
from .report import Row, all_passed, fmt, to_csv, to_text

DEFAULT_H_MAX = 1e-3
MAX_DOFS = 200_000
EXPERIMENTS = ("delta-collapse", "delta-prime-collapse", "kirchhoff-transparency", "bounded-L")
GRAPH_COMMANDS = ("validate", "spectrum", "certify-lower-bound", "check-greens-identity", "convert")


@dataclass
class JobConfig:
    command: str
    graph_file: str | None
    h_max: float | None
    k: int
    T_trunc: float | None
    format: str
    dump_matrices: str | None
    out: str | None

    def rows(self):
        out = [Row("meta", "version", __version__)]
        out += [Row("meta", key, value) for key, value in asdict(self).items() if key != "out"]
        return out


def resolve_mesh(g, config: JobConfig, warn=print):
    """Materialize ``T_trunc`` and ``h_max``; coarsen the default mesh above ``MAX_DOFS``."""
    if config.T_trunc is None:
        config.T_trunc = default_truncation(g)
    total = sum(config.T_trunc if e.is_infinite else e.length for e in g.edges)
    if config.h_max is None:
        h = DEFAULT_H_MAX
        if total / h + len(g.edges) > MAX_DOFS:
            h = total / (MAX_DOFS - 2 * len(g.edges))
            warn(f"warning: coarsening h_max to {fmt(h)} to stay below {MAX_DOFS} degrees of freedom")
        config.h_max = h
    return build_meshes(g, config.h_max, config.T_trunc)


def _matrix_text(m) -> str:
    m = np.atleast_2d(m)
    return "[" + ", ".join("[" + ", ".join(fmt(complex(z)) for z in row) + "]" for row in m) + "]"


def cmd_validate(g, conditions, config):
    rows = [Row("validate", "vertices", len(g.vertices)), Row("validate", "edges", len(g.edges)),
            Row("validate", "u_min", g.u_min)]
    for v in g.vertices:
        vc = conditions[v]
        for name, defect in vc.defects().items():
            rows.append(Row("validate", f"{v};{name}", defect, 0.0, defect, defect <= TAU_ALG))
        check = is_lagrangian(to_lagrangian(vc))
        rows.append(Row("validate", f"{v};lagrangian", check.defect, 0.0, check.defect, check.ok))
        rows.append(Row("validate", f"{v};lowest_L", lowest_eigenvalue(vc)))
    return rows


def _problem(g, conditions, config, warn):
    meshes = resolve_mesh(g, config, warn)
    problem = assemble_form(g, meshes, conditions)
    if config.dump_matrices:
        dump_matrices(problem, config.dump_matrices)
    return problem


def cmd_spectrum(g, conditions, config, warn):
    return spectrum(_problem(g, conditions, config, warn), config.k).rows()


def cmd_certify(g, conditions, config, warn):
    report = spectrum(_problem(g, conditions, config, warn), config.k)
    return report.rows() + lower_bound_certificate(g, conditions, report).rows()


def cmd_greens(g, conditions, config, warn):
    meshes = resolve_mesh(g, config, warn)
    return greens_identity_suite(g, meshes, conditions=conditions).rows()


def cmd_convert(g, conditions, config):
    rows = []
    for v in g.vertices:
        rows.append(Row("convert", f"{v};P", _matrix_text(conditions[v].P)))
        rows.append(Row("convert", f"{v};L", _matrix_text(conditions[v].L)))
    return rows


EXPERIMENT_H_MAX = {"delta-collapse": 2e-3, "delta-prime-collapse": 2e-3, "kirchhoff-transparency": DEFAULT_H_MAX}


def run_experiment(name, args):
    if name == "delta-collapse":
        rows = []
        for alpha in args.alpha or [0.0, 1.0]:
            rows += delta_truncation_experiment(alpha, args.n_list, args.leaf_length,
                                                args.h_max).rows()
        return rows
    if name == "delta-prime-collapse":
        rows = []
        for alpha in args.alpha or [1.0]:
            rows += delta_prime_truncation_experiment(alpha, args.n_list, args.leaf_length,
                                                      args.h_max).rows()
        return rows
    if name == "kirchhoff-transparency":
        pairs = list(zip(args.a, args.b)) if args.a else [(1.0, 1.0), (0.3, 0.7), (1.0, 2.0)]
        rows = []
        for a, b in pairs:
            rows += kirchhoff_transparency_test(a, b, args.h_max, args.k).rows()
        return rows
    return bounded_L_example_check(args.n_max).rows()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mgspec", description="Spectra of Laplacians on metric graphs.")
    p.add_argument("--version", action="version", version=f"mgspec {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--h-max", type=float, default=None, help="maximal mesh width (default 1e-3)")
        sp.add_argument("--k", "-k", type=int, default=5, help="number of eigenvalues (default 5)")
        sp.add_argument("--trunc", type=float, default=None, help="length of truncated infinite edges")
        sp.add_argument("--format", choices=("text", "csv"), default="text")
        sp.add_argument("--dump-matrices", metavar="DIR", default=None)
        sp.add_argument("--out", metavar="FILE", default=None)

    for name in GRAPH_COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("graph_file")
        common(sp)
    sp = sub.add_parser("experiment")
    sp.add_argument("name", choices=EXPERIMENTS)
    common(sp)
    sp.add_argument("--alpha", type=float, action="append", help="coupling (repeatable)")
    sp.add_argument("--n-list", type=lambda s: [int(x) for x in s.split(",")], default=[2, 4, 8, 16, 32])
    sp.add_argument("--leaf-length", type=float, default=1.0)
    sp.add_argument("--a", type=float, action="append", help="first length (repeatable, pairs with --b)")
    sp.add_argument("--b", type=float, action="append")
    sp.add_argument("--n-max", type=int, default=64)
    return p


def _header(config: JobConfig) -> str:
    items = " ".join(f"{r.parameter}={fmt(r.value)}" for r in config.rows())
    return f"# mgspec {items}\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = JobConfig(
        command=args.command if args.command != "experiment" else f"experiment {args.name}",
        graph_file=getattr(args, "graph_file", None),
        h_max=args.h_max,
        k=args.k,
        T_trunc=args.trunc,
        format=args.format,
        dump_matrices=args.dump_matrices,
        out=args.out,
    )
    warn = lambda msg: print(msg, file=sys.stderr)
    try:
        if args.command == "experiment":
            if args.name in ("kirchhoff-transparency",) and args.a and (not args.b or len(args.a) != len(args.b)):
                raise SystemExit("mgspec: error: --a and --b must be given the same number of times")
            if args.h_max is None:
                args.h_max = config.h_max = EXPERIMENT_H_MAX.get(args.name)
            rows = run_experiment(args.name, args)
        else:
            g, conditions = parse_graph_file(args.graph_file)
            if args.command == "validate":
                rows = cmd_validate(g, conditions, config)
            elif args.command == "convert":
                rows = cmd_convert(g, conditions, config)
            elif args.command == "spectrum":
                rows = cmd_spectrum(g, conditions, config, warn)
            elif args.command == "certify-lower-bound":
                rows = cmd_certify(g, conditions, config, warn)
            else:
                rows = cmd_greens(g, conditions, config, warn)
    except MgspecError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 2
    rows = config.rows() + rows
    if config.format == "csv":
        text = to_csv(rows)
    else:
        text = _header(config) + to_text(rows[len(config.rows()):])
    if config.out:
        Path(config.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0 if all_passed(rows) else 1


if __name__ == "__main__":
    sys.exit(main())
