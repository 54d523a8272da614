"""Command-line front end: convergence ladders, Hardy studies, single solves, inf-sup probes.

Usage::

    sgefem convergence --case 1 --out results/
    sgefem hardy --levels 4 8 16 32
    sgefem solve --case 3 --levels 16 --nu 0.3 --iota 1e-6 --out run/
    sgefem infsup --iota 1 --iota 1e-6

Settings can also come from a config file (``--config``) of ``key = value``
lines grouped in ``[run]``, ``[mesh]``, ``[solver]`` and ``[output]``
sections; command-line flags override the file.
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import quadrature
from .io import format_error, format_rate, format_table, write_csv, write_vtk

log = logging.getLogger("sgefem")

COMMANDS = ("convergence", "hardy", "solve", "infsup")
FORMATS = ("csv", "txt")
INFSUP_MAX_N = 16


class ConfigError(ValueError):
    pass


# section, key, attribute, kind
_SCHEMA = [
    ("run", "command", "command", "str"),
    ("run", "case", "case", "int"),
    ("run", "nu", "nu", "floats"),
    ("run", "iota", "iota", "floats"),
    ("run", "corner_pressure", "corner_pressure", "str"),
    ("mesh", "levels", "levels", "ints"),
    ("mesh", "perturb", "perturb", "float"),
    ("mesh", "seed", "seed", "int"),
    ("solver", "tol", "solver_tol", "float"),
    ("solver", "quad_degree", "quad_degree", "int"),
    ("output", "out", "out", "str"),
    ("output", "format", "formats", "strs"),
]


@dataclass
class RunConfig:
    command: str = "convergence"
    case: int = 1
    nu: tuple = (0.3, 0.4999)
    iota: tuple = (1.0, 1e-6)
    levels: tuple = (8, 16, 32, 64)
    perturb: float = 0.0
    seed: int = 0
    solver_tol: float = 1e-10
    quad_degree: int = quadrature.ASSEMBLY_DEGREE
    out: str = "."
    formats: tuple = FORMATS
    corner_pressure: str = "exact"

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.case not in (1, 2, 3, 4):
            raise ConfigError(f"case must be 1, 2, 3 or 4, got {self.case}")
        if not self.nu or any(not 0.0 < v < 0.5 for v in self.nu):
            raise ConfigError("every nu must lie in (0, 0.5)")
        if not self.iota or any(not 0.0 < v <= 1.0 for v in self.iota):
            raise ConfigError("every iota must lie in (0, 1]")
        if not self.levels or any(n < 1 for n in self.levels):
            raise ConfigError("levels must be positive integers")
        if not 0.0 <= self.perturb < 0.3:
            raise ConfigError("perturb must lie in [0, 0.3)")
        if not 1 <= self.quad_degree <= quadrature.MAX_DEGREE:
            raise ConfigError(f"quad_degree must lie in [1, {quadrature.MAX_DEGREE}]")
        if self.solver_tol <= 0:
            raise ConfigError("solver tol must be positive")
        if any(f not in FORMATS for f in self.formats):
            raise ConfigError(f"format must be among {FORMATS}")
        if self.corner_pressure not in ("exact", "zero"):
            raise ConfigError("corner_pressure must be 'exact' or 'zero'")
        return self

    def to_text(self):
        """Canonical text form; parsing it gives back an equal config."""
        lines = []
        section = None
        for sec, key, attr, kind in _SCHEMA:
            if sec != section:
                if section is not None:
                    lines.append("")
                lines.append(f"[{sec}]")
                section = sec
            lines.append(f"{key} = {_format_value(getattr(self, attr), kind)}")
        return "\n".join(lines) + "\n"


def _format_value(value, kind):
    if kind in ("floats", "ints", "strs"):
        return ", ".join(_format_value(v, kind[:-1]) for v in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def _parse_value(text, kind):
    if kind in ("floats", "ints", "strs"):
        items = [t.strip() for t in text.replace(",", " ").split()]
        return tuple(_parse_value(t, kind[:-1]) for t in items)
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    return text.strip()


def defaults_for(command, case):
    """Default grids that depend on the command and the case."""
    d = {}
    if command == "convergence":
        d["levels"] = (8, 16, 32, 64)
        d["iota"] = (1e-4, 1e-6) if case == 4 else (1.0, 1e-6)
        d["nu"] = (0.3, 0.4999)
    elif command == "hardy":
        d["levels"] = (4, 8, 16, 32)
    elif command == "solve":
        d["levels"] = (8,)
        d["nu"] = (0.3,)
        d["iota"] = (1.0,)
    elif command == "infsup":
        d["levels"] = (4, 8, 16)
        d["iota"] = (1.0, 1e-6)
        d["nu"] = (0.3,)
    return d


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines with ``[section]`` headers into a dict of attributes."""
    known = {(sec, key): (attr, kind) for sec, key, attr, kind in _SCHEMA}
    values = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"{source}:{lineno}:{col}: unterminated section header")
            section = stripped[1:-1].strip()
            if section not in {s for s, *_ in _SCHEMA}:
                raise ConfigError(f"{source}:{lineno}:{col + 1}: unknown section {section!r}")
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}:{col}: expected 'key = value'")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if section is None:
            raise ConfigError(f"{source}:{lineno}:{col}: key {key!r} outside a section")
        if (section, key) not in known:
            raise ConfigError(f"{source}:{lineno}:{col}: unknown key {key!r} in [{section}]")
        attr, kind = known[(section, key)]
        try:
            values[attr] = _parse_value(value, kind)
        except ValueError:
            vcol = line.index("=") + 2 + (len(line.split("=", 1)[1]) - len(line.split("=", 1)[1].lstrip()))
            raise ConfigError(f"{source}:{lineno}:{vcol}: cannot read {value!r} as {kind}") from None
    return values


def config_from_text(text, source="<config>"):
    return RunConfig(**parse_config_text(text, source)).validate()


def build_parser():
    parser = argparse.ArgumentParser(prog="sgefem", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("--case", type=int)
    parser.add_argument("--nu", type=float, action="append", help="Poisson ratio (repeatable)")
    parser.add_argument("--iota", type=float, action="append", help="length scale (repeatable)")
    parser.add_argument("--levels", type=int, nargs="+", help="subdivisions per side")
    parser.add_argument("--perturb", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--format", dest="formats", choices=FORMATS, action="append")
    parser.add_argument("--solver-tol", type=float)
    parser.add_argument("--quad-degree", type=int)
    parser.add_argument("--corner-pressure", choices=("exact", "zero"))
    parser.add_argument("--matrix-market", action="store_true", help="solve: dump the system")
    parser.add_argument("--print-config", action="store_true", help="show the resolved config")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    """Defaults, then the config file, then command-line flags."""
    file_values = {}
    if args.config:
        file_values = parse_config_text(Path(args.config).read_text(), args.config)
    cli_values = {
        f.name: getattr(args, f.name)
        for f in fields(RunConfig)
        if getattr(args, f.name, None) is not None
    }
    for key in ("nu", "iota", "levels", "formats"):
        if key in cli_values:
            cli_values[key] = tuple(cli_values[key])
    cli_values["command"] = args.command
    case = cli_values.get("case", file_values.get("case", RunConfig.case))
    merged = {**defaults_for(args.command, case), **file_values, **cli_values}
    return RunConfig(**merged).validate()


# ----------------------------------------------------------------------------
# commands


def _num(v):
    """Shortest round-tripping decimal form of a float."""
    return repr(float(v))


def _rates(errors):
    return [None] + [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]


def _emit(cfg, stem, header, rows, text):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        write_csv(out / f"{stem}.csv", header, rows)
    if "txt" in cfg.formats:
        (out / f"{stem}.txt").write_text(text)
    sys.stdout.write(text)


def _mesh(cfg, n):
    from .mesh import build_structured_square

    return build_structured_square(n, perturb=cfg.perturb, seed=cfg.seed)


def cmd_convergence(cfg):
    from .assembly import assemble_parts, solve_case
    from .linalg import ResidualError, SingularMatrixError
    from .solutions import make_case

    results = {}
    failures = 0
    for n in cfg.levels:
        mesh = _mesh(cfg, n)
        parts = assemble_parts(mesh, degree=cfg.quad_degree)
        for nu in cfg.nu:
            for iota in cfg.iota:
                case = make_case(cfg.case, nu, iota)
                try:
                    sol = solve_case(mesh, case, parts=parts, tol=cfg.solver_tol, corner_pressure=cfg.corner_pressure)
                except (ResidualError, SingularMatrixError) as exc:
                    log.error("n=%d nu=%g iota=%g: %s", n, nu, iota, exc)
                    failures += 1
                    results[(nu, iota, n)] = None
                    continue
                results[(nu, iota, n)] = sol
                log.info("n=%d nu=%g iota=%g rel=%.3e res=%.1e", n, nu, iota, sol.errors.relative, sol.residual)

    header = [
        "case", "nu", "iota", "n", "h", "relative_error", "rate", "relative_error_sum",
        "grad_error", "iota_hess_error", "pressure_error", "residual", "symmetry",
    ]
    rows = []
    text = [f"case {cfg.case}: relative errors ||grad(u - u_h)||_(iota,h) / ||grad u||_iota\n"]
    for nu in cfg.nu:
        from .solutions import lame

        lam, mu = lame(nu)
        text.append(f"\nnu={nu:.4f}, lambda={lam:.4e}, mu={mu:.4f}\n")
        table_rows = []
        for iota in cfg.iota:
            sols = [results[(nu, iota, n)] for n in cfg.levels]
            errs = [s.errors.relative if s else float("nan") for s in sols]
            rates = _rates(errs)
            for n, s, e, r in zip(cfg.levels, sols, errs, rates):
                if s is None:
                    rows.append([cfg.case, _num(nu), _num(iota), n] + [""] * 9)
                    continue
                d = s.errors.as_dict()
                rows.append([
                    cfg.case, _num(nu), _num(iota), n, _num(s.h), _num(e),
                    "" if r is None else _num(r), _num(d["relative_sum"]), _num(d["grad"]), _num(d["iota_hess"]),
                    _num(d["pressure"]), _num(s.residual), _num(s.symmetry),
                ])
            table_rows.append([f"{iota:.0e}"] + [format_error(e) for e in errs])
            table_rows.append(["rate"] + [format_rate(r) for r in rates])
        text.append(format_table(["iota\\h"] + [f"1/{n}" for n in cfg.levels], table_rows))
    _emit(cfg, f"convergence_case{cfg.case}", header, rows, "".join(text))
    return 2 if failures else 0


def cmd_hardy(cfg):
    from .hardy import corner_seminorm_ratio, fit_ratio_exponent, radial_study

    study = radial_study()
    rad_rows = [
        [r.n, _num(r.h), _num(r.hardy), _num(r.gradient), _num(r.ratio), _num(r.ratio / math.log(r.n))]
        for r in study["rows"]
    ]
    text = ["radial profile, d = 2 (closed form)\n"]
    text.append(format_table(
        ["n", "||f/rho||", "||grad f||", "ratio", "ratio/log(1/h)"],
        [[r.n, format_error(r.hardy), format_error(r.gradient), f"{r.ratio:.4f}", f"{r.ratio / math.log(r.n):.4f}"]
         for r in study["rows"]],
    ))
    text.append(
        f"fitted p in h log^p(1/h): ||f/rho|| {study['hardy_fit'].slope:.3f}, "
        f"||grad f|| {study['gradient_fit'].slope:.3f}; ratio slope vs log log(1/h) {study['ratio_fit'].slope:.3f}\n\n"
    )
    _emit(cfg, "hardy_radial", ["n", "h", "hardy_norm", "gradient_norm", "ratio", "ratio_over_log"], rad_rows, "".join(text))

    sem = [corner_seminorm_ratio(_mesh(cfg, n)) for n in cfg.levels]
    scaled = [s.ratio_over_log for s in sem]
    band = max(scaled) / min(scaled)
    fit = fit_ratio_exponent([s.h for s in sem], [s.ratio for s in sem]) if len(sem) > 1 else None
    rows = [[n, _num(s.h), _num(s.ratio), _num(s.ratio_over_log), s.iterations, s.converged] for n, s in zip(cfg.levels, sem)]
    text = ["weighted corner seminorm, max [q]_{H^1_+} / ||grad q|| over P_h\n"]
    text.append(format_table(
        ["n", "h", "ratio", "ratio/log(1/h)", "converged"],
        [[n, f"{s.h:.4f}", f"{s.ratio:.4f}", f"{s.ratio_over_log:.4f}", s.converged] for n, s in zip(cfg.levels, sem)],
    ))
    text.append(f"band max/min of ratio/log(1/h): {band:.3f}")
    text.append(f"; slope vs log log(1/h): {fit.slope:.3f}\n" if fit else "\n")
    _emit(cfg, "hardy_seminorm", ["n", "h", "ratio", "ratio_over_log", "iterations", "converged"], rows, "".join(text))
    return 0 if all(s.converged for s in sem) else 3


def cmd_solve(cfg):
    from .assembly import assemble_parts, build_system, error_norms
    from .linalg import export_matrix_market
    from .solutions import make_case

    n, nu, iota = cfg.levels[0], cfg.nu[0], cfg.iota[0]
    mesh = _mesh(cfg, n)
    parts = assemble_parts(mesh, degree=cfg.quad_degree)
    case = make_case(cfg.case, nu, iota)
    system = build_system(mesh, case, parts=parts, corner_pressure=cfg.corner_pressure)
    u, p, res = system.solve(tol=cfg.solver_tol)
    errs = error_norms(mesh, parts.layout, u, p, case)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    V = mesh.n_vertices
    uh = u.reshape(-1, 2)[:V]  # vertex DoFs are nodal values
    exact = case.value(mesh.vertices)
    stem = f"solve_case{cfg.case}_n{n}"
    write_vtk(
        out / f"{stem}.vtk",
        mesh,
        point_data={"u_h": uh, "p_h": p, "u_error": np.linalg.norm(exact - uh, axis=1)},
        title=f"case {cfg.case} n={n} nu={nu} iota={iota}",
    )
    if getattr(cfg, "matrix_market", False):
        red, _ = system.reduced()
        export_matrix_market(out / f"{stem}.mtx", red.matrix, comment=f"reduced system case {cfg.case} n={n}")
    d = errs.as_dict()
    rows = [[k, _num(v)] for k, v in d.items()] + [["residual", _num(res.residual)]]
    text = format_table(["quantity", "value"], [[k, format_error(float(v))] for k, v in rows])
    _emit(cfg, stem, ["quantity", "value"], rows, text)
    return 0


def cmd_infsup(cfg):
    from .assembly import assemble_parts, estimate_infsup

    if max(cfg.levels) > INFSUP_MAX_N:
        raise ConfigError(f"infsup probes are capped at n <= {INFSUP_MAX_N}")
    rows, table = [], []
    converged = True
    for iota in cfg.iota:
        prev = None
        for n in cfg.levels:
            mesh = _mesh(cfg, n)
            r = estimate_infsup(mesh, iota, parts=assemble_parts(mesh, degree=cfg.quad_degree, gram=True))
            converged &= r.converged
            change = "" if prev is None else f"{r.scaled / prev:.3f}"
            rows.append([_num(iota), n, _num(r.h), _num(r.beta), _num(r.scaled), r.iterations, r.converged])
            table.append([f"{iota:.0e}", n, f"{r.beta:.4e}", f"{r.scaled:.4e}", change])
            prev = r.scaled
    text = "discrete inf-sup constant beta_h and beta_h log^{3/2}(1/h)\n" + format_table(
        ["iota", "n", "beta_h", "scaled", "scaled ratio"], table
    )
    _emit(cfg, "infsup", ["iota", "n", "h", "beta", "beta_log32", "iterations", "converged"], rows, text)
    return 0 if converged else 3


HANDLERS = {
    "convergence": cmd_convergence,
    "hardy": cmd_hardy,
    "solve": cmd_solve,
    "infsup": cmd_infsup,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"sgefem: {exc}", file=sys.stderr)
        return 2
    cfg.matrix_market = args.matrix_market
    if args.print_config:
        sys.stdout.write(cfg.to_text())
    try:
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"sgefem: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
