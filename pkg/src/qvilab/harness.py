"""Experiment configs, commands and CSV artifacts.

A config is flat ``key = value`` text with optional ``[section]``
headers; keys before the first header belong to ``[problem]``::

    problem = impulse
    n = 64
    kappa = 1

    [parameter]
    u = 10
    h = 1
    q = 1, 2, inf

Relative file paths (``c0_file``, ``u_file``, ...) are resolved against
the directory of the config file.
"""
from __future__ import annotations

import configparser
import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .elliptic import Nonlinearity
from .engine import (ImpulseProblem, ParabolicProblem, ScalarProblem, solve_maximal,
                     solve_minimal)
from .errors import AssumptionRefusal, ConfigError, PreconditionError
from .lattice import GridFunction, Tolerances, le, norm, parse_exponent
from .obstacle_maps import ImpulseConfig
from .parabolic import HeatSource, SpaceTimeFunction, SpaceTimeGrid
from .properties import Check, random_pair
from .sensitivity import (TauSchedule, alternating_perturbations, characterization_check,
                          directional_derivative, hadamard_check, lipschitz_certificate)

COMMANDS = ("solve", "lipschitz", "derivative", "hadamard", "linearized", "sweep")

_ROOT = "__top__"
_KEYS = {
    "problem": {"problem", "variant", "n", "length", "kappa", "c0_file", "c0_zero", "f_gamma",
                "n_steps", "T", "psi_const", "g_variant", "eps"},
    "parameter": {"u", "u_file", "v", "v_file", "h", "h_file", "q", "rho"},
    "schedule": {"tau0", "ratio", "count"},
    "tolerances": {"tol_order", "tol_fixed_point", "tol_inner", "max_outer", "max_inner"},
    "hadamard": {"n_max", "tau"},
    "sweep": {"u_values"},
    "checks": {"seed", "samples", "u_low", "u_high"},
}


@dataclass
class ExperimentConfig:
    """Validated contents of a config file."""

    path: Path
    problem: dict
    tolerances: Tolerances
    u: object
    v: object
    h: object
    qs: tuple
    rho: float | None
    schedule: TauSchedule | None
    n_max: int = 8
    hadamard_tau: float = 2.0**-6
    sweep_values: tuple = tuple(float(k) for k in range(1, 11))
    seed: int = 0
    samples: int = 5
    u_low: float | None = None
    u_high: float | None = None


class _Reader:
    """Typed access to parsed values, with line numbers for error messages."""

    def __init__(self, parser, lines, base):
        self.parser = parser
        self.lines = lines
        self.base = base

    def line(self, section, key):
        return self.lines.get((section, key))

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def fail(self, section, key, message):
        raise ConfigError(message, self.line(section, key), key)

    def raw(self, section, key, default=None):
        if not self.has(section, key):
            return default
        return self.parser.get(section, key).strip()

    def number(self, section, key, default=None, integer=False, check=None, message=None):
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            value = int(text) if integer else float(text)
        except ValueError:
            kind = "an integer" if integer else "a number"
            self.fail(section, key, f"{key} must be {kind}, got {text!r}")
        if not integer and not math.isfinite(value):
            self.fail(section, key, f"{key} must be finite")
        if check is not None and not check(value):
            self.fail(section, key, message or f"{key} is out of range")
        return value

    def boolean(self, section, key, default=None):
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"{key} must be true or false")

    def choice(self, section, key, options, default=None):
        text = self.raw(section, key, default)
        if text not in options:
            self.fail(section, key, f"{key} must be one of {', '.join(options)}, got {text!r}")
        return text

    def path(self, section, key):
        text = self.raw(section, key)
        if text is None:
            return None
        p = Path(text)
        p = p if p.is_absolute() else self.base / p
        if not p.is_file():
            self.fail(section, key, f"{key}: no such file {text!r}")
        return p

    def table(self, section, key):
        p = self.path(section, key)
        if p is None:
            return None
        text = p.read_text(encoding="utf-8")
        try:
            return np.loadtxt(p, delimiter="," if "," in text else None, ndmin=1)
        except ValueError as exc:
            self.fail(section, key, f"{key}: cannot read numbers from {p.name}: {exc}")

    def value_list(self, section, key, default, convert=float):
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return tuple(convert(item.strip()) for item in text.split(",") if item.strip())
        except (ValueError, PreconditionError):
            self.fail(section, key, f"{key} must be a comma-separated list, got {text!r}")


def _parse(path):
    text = path.read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       comment_prefixes=("#", ";"), default_section="__none__")
    parser.optionxform = str
    # a synthetic header catches keys above the first real one (shifting lines by one)
    try:
        parser.read_string(f"[{_ROOT}]\n" + text, source=str(path))
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno - 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno - 1, exc.option) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - 1
        line = text.splitlines()[lineno - 1].strip()
        raise ConfigError(f"expected 'key = value' or '[section]', got {line!r}", lineno) from None
    lines, section = {}, _ROOT
    header = re.compile(r"\s*\[([^\]]+)\]")
    entry = re.compile(r"\s*([^=:#;\s][^=:]*?)\s*[=:]")
    for no, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = entry.match(line)
        if m and not line[:1].isspace():
            lines.setdefault((section, m.group(1)), no)
    if not parser.has_section("problem"):
        parser.add_section("problem")
    for key in parser.options(_ROOT):
        if parser.has_option("problem", key):
            raise ConfigError(f"duplicate key {key!r}", lines.get(("problem", key)), key)
        parser.set("problem", key, parser.get(_ROOT, key))
        lines[("problem", key)] = lines[(_ROOT, key)]
    parser.remove_section(_ROOT)
    for sec in parser.sections():
        if sec not in _KEYS:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)))
        for key in parser.options(sec):
            if key not in _KEYS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key)), key)
    return _Reader(parser, lines, path.parent)


def _problem_fields(r):
    sec = "problem"
    kind = r.choice(sec, "problem", ("scalar", "impulse", "parabolic"))
    out = {"problem": kind}
    positive = dict(check=lambda x: x > 0)
    if kind == "scalar":
        out["variant"] = r.choice(sec, "variant", ("A", "B", "C"), "A")
    elif kind == "impulse":
        out["n"] = r.number(sec, "n", 64, integer=True, check=lambda x: x >= 1,
                            message="n must be >= 1")
        out["length"] = r.number(sec, "length", 1.0, message="length must be > 0", **positive)
        out["kappa"] = r.number(sec, "kappa", 1.0, check=lambda x: x >= 0,
                                message="kappa must be ≥ 0")
        out["f_gamma"] = r.number(sec, "f_gamma", 0.0, check=lambda x: x >= 0,
                                  message="f_gamma must be ≥ 0")
        c0 = r.table(sec, "c0_file")
        zero = r.boolean(sec, "c0_zero", c0 is None)
        if c0 is not None and zero:
            r.fail(sec, "c0_zero", "c0_zero = true conflicts with c0_file")
        if c0 is None and not zero:
            r.fail(sec, "c0_zero", "c0_zero = false needs a c0_file")
        if c0 is not None:
            if c0.ndim != 1 or c0.size < out["n"]:
                r.fail(sec, "c0_file", f"c0_file must hold at least n = {out['n']} values, one per line")
            if np.any(c0 < 0):
                r.fail(sec, "c0_file", "c0 values must be ≥ 0")
            out["c0"] = tuple(float(x) for x in c0)
    else:
        out["n"] = r.number(sec, "n", 32, integer=True, check=lambda x: x >= 1,
                            message="n must be >= 1")
        out["length"] = r.number(sec, "length", 1.0, message="length must be > 0", **positive)
        out["n_steps"] = r.number(sec, "n_steps", 64, integer=True, check=lambda x: x >= 1,
                                  message="n_steps must be >= 1")
        out["T"] = r.number(sec, "T", 1.0, message="T must be > 0", **positive)
        out["psi_const"] = r.number(sec, "psi_const", 0.1, check=lambda x: x >= 0,
                                    message="psi_const must be ≥ 0")
        variant = r.choice(sec, "g_variant", ("clip", "shifted"), "shifted")
        eps_default = 0.5 if variant == "shifted" else 0.0
        eps = r.number(sec, "eps", eps_default, check=lambda x: x >= 0, message="eps must be ≥ 0")
        if variant == "clip" and eps != 0:
            r.fail(sec, "eps", "eps must be 0 for g_variant = clip")
        if variant == "shifted" and eps == 0:
            r.fail(sec, "eps", "eps must be > 0 for g_variant = shifted")
        out["g_variant"], out["eps"] = variant, eps
    return out


def _tolerances(r, kind):
    base = Tolerances.scalar_default() if kind == "scalar" else Tolerances.pde_default()
    sec = "tolerances"
    nonneg = dict(check=lambda x: x >= 0)
    pos = dict(check=lambda x: x > 0)
    values = {
        "tol_order": r.number(sec, "tol_order", base.tol_order, message="tol_order must be ≥ 0", **nonneg),
        "tol_fixed_point": r.number(sec, "tol_fixed_point", base.tol_fixed_point,
                                    message="tol_fixed_point must be > 0", **pos),
        "tol_inner": r.number(sec, "tol_inner", base.tol_inner, message="tol_inner must be > 0", **pos),
        "max_outer": r.number(sec, "max_outer", base.max_outer, integer=True,
                              message="max_outer must be >= 1", check=lambda x: x >= 1),
        "max_inner": r.number(sec, "max_inner", base.max_inner, integer=True,
                              message="max_inner must be >= 1", check=lambda x: x >= 1),
    }
    try:
        return Tolerances(**values)
    except PreconditionError as exc:
        key = "tol_inner" if r.has(sec, "tol_inner") else "tol_fixed_point"
        raise ConfigError(str(exc), r.line(sec, key), key) from None


def build_problem(fields, tol):
    kind = fields["problem"]
    if kind == "scalar":
        return ScalarProblem(fields["variant"], tol)
    if kind == "impulse":
        f = Nonlinearity.relu(fields["f_gamma"]) if fields["f_gamma"] > 0 else Nonlinearity.zero()
        c0 = fields.get("c0")
        cfg = ImpulseConfig(fields["kappa"], c0 if c0 is not None else np.zeros(fields["n"]))
        return ImpulseProblem(fields["n"], fields["length"], c0=cfg, f=f, tol=tol)
    grid = SpaceTimeGrid(fields["n"], fields["length"], fields["n_steps"], fields["T"])
    return ParabolicProblem(grid, fields["psi_const"], HeatSource(fields["eps"]), tol)


def _data(r, inst, key, default, signed):
    """Constant or file-backed element of the parameter space."""
    sec = "parameter"
    if r.has(sec, key) and r.has(sec, key + "_file"):
        r.fail(sec, key + "_file", f"give either {key} or {key}_file, not both")
    values = r.table(sec, key + "_file")
    if values is None:
        values = r.number(sec, key, default)
        source = key
    else:
        source = key + "_file"
    if values is None:
        return None
    try:
        return inst.direction(values) if signed else inst.parameter(values)
    except (PreconditionError, ValueError) as exc:
        r.fail(sec, source, f"{source}: {exc}")


def load_problem(config_path):
    """Parse and validate a config; returns (ProblemInstance, ExperimentConfig).

    Runs the instance's spot checks once, so a broken model fails here.
    """
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    r = _parse(path)
    if not r.has("problem", "problem"):
        raise ConfigError("missing required key 'problem'", None, "problem")
    fields = _problem_fields(r)
    tol = _tolerances(r, fields["problem"])
    inst = build_problem(fields, tol)
    u = _data(r, inst, "u", None, signed=False)
    u = inst.sample_parameter() if u is None else u
    h = _data(r, inst, "h", 1.0, signed=True)
    v = _data(r, inst, "v", None, signed=False)
    if v is None:
        v = inst.parameter(u - 0.1 * u.min())
    try:
        qs = r.value_list("parameter", "q", (2.0,), parse_exponent)
    except PreconditionError:
        qs = None
    if not qs:
        r.fail("parameter", "q", "q must list exponents >= 1 (or inf)")
    rho = r.number("parameter", "rho", None, check=lambda x: x > 0, message="rho must be > 0")
    schedule = None
    if any(r.has("schedule", k) for k in ("tau0", "ratio", "count")):
        sec = "schedule"
        schedule = TauSchedule(
            r.number(sec, "tau0", 2.0**-4, check=lambda x: x > 0, message="tau0 must be > 0"),
            r.number(sec, "ratio", 0.5, check=lambda x: 0 < x < 1, message="ratio must lie in (0, 1)"),
            r.number(sec, "count", 20, integer=True, check=lambda x: x >= 1,
                     message="count must be >= 1"),
        )
    sweep_values = r.value_list("sweep", "u_values", tuple(float(k) for k in range(1, 11)))
    if any(x < 0 for x in sweep_values) or not sweep_values:
        r.fail("sweep", "u_values", "u_values must be a nonempty list of numbers ≥ 0")
    cfg = ExperimentConfig(
        path=path,
        problem=fields,
        tolerances=tol,
        u=u,
        v=v,
        h=h,
        qs=qs,
        rho=rho,
        schedule=schedule,
        n_max=r.number("hadamard", "n_max", 8, integer=True, check=lambda x: x >= 2,
                       message="n_max must be >= 2"),
        hadamard_tau=r.number("hadamard", "tau", 2.0**-6, check=lambda x: x > 0,
                              message="tau must be > 0"),
        sweep_values=sweep_values,
        seed=r.number("checks", "seed", 0, integer=True, check=lambda x: x >= 0,
                      message="seed must be >= 0"),
        samples=r.number("checks", "samples", 5, integer=True, check=lambda x: x >= 0,
                         message="samples must be >= 0"),
        u_low=r.number("checks", "u_low", None, check=lambda x: x > 0, message="u_low must be > 0"),
        u_high=r.number("checks", "u_high", None, check=lambda x: x > 0, message="u_high must be > 0"),
    )
    if cfg.u_low is not None and cfg.u_high is not None and cfg.u_low >= cfg.u_high:
        r.fail("checks", "u_high", "u_high must exceed u_low")
    inst.spot_check()
    return inst, cfg


# -- artifacts ---------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _qfmt(q):
    return "inf" if math.isinf(q) else f"{q:g}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _state_rows(values):
    """Rows of a nodal artifact; SpaceTimeFunction rows carry step and time."""
    if isinstance(values, SpaceTimeFunction):
        x, t = values.space.nodes, values.grid.times
        return [(k, t[k], i, x[i], values.values[k, i])
                for k in range(values.values.shape[0]) for i in range(x.size)]
    x = values.domain.nodes
    return [(i, x[i], values.values[i]) for i in range(x.size)]


def _state_header(values, *names):
    if isinstance(values, SpaceTimeFunction):
        return ["step", "t", "node", "x", *names]
    return ["node", "x", *names]


def write_solution(path, y):
    write_csv(path, _state_header(y, "value"), _state_rows(y))


def read_solution(inst, path):
    """Inverse of :func:`write_solution` for the instance's state space."""
    header, rows = read_csv(path)
    values = np.array([float(row[-1]) for row in rows])
    if isinstance(inst, ParabolicProblem):
        return inst.state(values.reshape(inst.grid.n_steps + 1, inst.grid.space.size))
    return GridFunction(inst.domain, values)


class Run:
    """Collects checks and summary lines for one command."""

    def __init__(self, command, inst, cfg, out):
        self.command, self.inst, self.cfg, self.out = command, inst, cfg, Path(out)
        self.checks = []
        self.notes = []
        self.seeded = False

    def check(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))

    def note(self, text):
        self.notes.append(text)

    def rng(self):
        self.seeded = True
        return np.random.default_rng(self.cfg.seed)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        lines = [f"command: {self.command}",
                 f"config: {self.cfg.path.name}",
                 f"problem: {self.inst.describe()}"]
        if self.seeded:
            lines.append(f"seed: {self.cfg.seed}")
            lines.append(f"samples: {self.cfg.samples}")
        lines += self.notes
        lines += [c.line() for c in self.checks]
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def write_summary(self):
        (self.out / "summary.txt").write_text(self.summary(), encoding="utf-8")


def _slack(inst):
    return 10 * inst.tol.tol_fixed_point


def cmd_solve(run):
    inst, cfg = run.inst, run.cfg
    m = solve_minimal(inst, cfg.u)
    M = solve_maximal(inst, cfg.u)
    write_solution(run.out / "solution_min.csv", m.value)
    write_solution(run.out / "solution_max.csv", M.value)
    rows = [(sol.role, row.k, row.residual, row.min_violation, row.max_violation)
            for sol in (m, M) for row in sol.trace]
    write_csv(run.out / "trace.csv", ["role", "k", "residual", "min_violation", "max_violation"], rows)
    slack = _slack(inst)
    for label, sol in (("minimal", m), ("maximal", M)):
        res = inst.residual(sol.value, cfg.u)
        run.note(f"residual_vi {label} = {res!r}")
        run.check(f"{label} solution residual", res <= slack, f"{res:.3e} <= {slack:.1e}")
    run.check("order m <= M", le(m.value, M.value, slack))
    if inst.unique:
        gap = norm(M.value - m.value, math.inf)
        run.check("uniqueness", gap <= inst.tol.solver_slack,
                  f"||M - m||_inf = {gap:.3e} <= {inst.tol.solver_slack:.1e}")


def cmd_lipschitz(run):
    inst, cfg = run.inst, run.cfg
    rows = []
    cases = [("config", cfg.u, cfg.v, cfg.rho)]
    if cfg.samples:
        rng = run.rng()
        for k in range(1, cfg.samples + 1):
            u, v = random_pair(inst, rng, cfg.u_low, cfg.u_high)
            cases.append((f"sample{k}", u, v, None))
    for name, u, v, rho in cases:
        for q in cfg.qs:
            r = lipschitz_certificate(inst, u, v, q, rho)
            rows.append((name, _qfmt(q), r.rho, r.lhs_min, r.bound_min, r.lhs_max, r.bound_max,
                         r.satisfied))
            run.check(f"lipschitz {name} q={_qfmt(q)}", r.satisfied,
                      f"m: {r.lhs_min:.3e} <= {r.bound_min:.3e}, M: {r.lhs_max:.3e} <= {r.bound_max:.3e}")
    write_csv(run.out / "lipschitz.csv",
              ["case", "q", "rho", "lhs_min", "bound_min", "lhs_max", "bound_max", "satisfied"], rows)


def cmd_derivative(run):
    inst, cfg = run.inst, run.cfg
    q = cfg.qs[0]
    est = directional_derivative(inst, cfg.u, cfg.h, cfg.schedule, q)
    write_csv(run.out / "quotients.csv", ["tau", "norm", "monotonicity_violation"],
              zip(est.taus, est.norms, est.violations))
    write_csv(run.out / "derivative.csv", _state_header(est.derivative, "value"),
              _state_rows(est.derivative))
    run.note(f"derivative norm (q={_qfmt(q)}) = {est.norms[-1]!r}")
    run.check("quotients settled", est.settled, f"last Cauchy residual {est.cauchy_residual:.3e}")
    if inst.concave:
        slack = inst.tol.solver_slack
        run.check("quotient monotonicity", est.monotonicity_residual <= slack,
                  f"{est.monotonicity_residual:.3e} <= {slack:.1e}")


def cmd_hadamard(run):
    inst, cfg = run.inst, run.cfg
    perturbations = alternating_perturbations(inst, cfg.h, cfg.n_max, cfg.hadamard_tau)
    rep = hadamard_check(inst, cfg.u, cfg.h, perturbations)
    write_csv(run.out / "hadamard.csv", ["n", "tau", "hadamard_error"],
              [(n, tau, e) for n, ((tau, _), e) in enumerate(zip(perturbations, rep.errors), 1)])
    run.check("hadamard errors decreasing", rep.decreasing, f"noise floor {rep.noise_floor:.1e}")


def cmd_linearized(run):
    inst, cfg = run.inst, run.cfg
    rep = characterization_check(inst, cfg.u, cfg.h, cfg.qs[0], schedule=cfg.schedule)
    rows = _state_rows(rep.derivative)
    lin = rep.linearized.values.ravel()
    header = _state_header(rep.derivative, "derivative", "linearized", "difference")
    write_csv(run.out / "linearized.csv", header,
              [(*row, lin[i], lin[i] - row[-1]) for i, row in enumerate(rows)])
    run.check("characterization", rep.passed,
              f"error {rep.error:.3e}, fixed-point residual {rep.fixed_point_residual:.3e}, "
              f"tol {rep.tol:.1e}")


def cmd_sweep(run):
    inst, cfg = run.inst, run.cfg
    rows, prev = [], None
    slack = _slack(inst)
    monotone, ordered = True, True
    for c in cfg.sweep_values:
        u = inst.parameter(c)
        m, M = solve_minimal(inst, u), solve_maximal(inst, u)
        rows.append((c, norm(M.value, math.inf), norm(m.value, math.inf), M.iterations))
        ordered = ordered and le(m.value, M.value, slack)
        if prev is not None and c >= prev[0]:
            monotone = monotone and le(prev[1], M.value, slack)
        prev = (c, M.value)
    write_csv(run.out / "sweep.csv", ["u", "M_inf", "m_inf", "outer_iterations"], rows)
    run.check("M nondecreasing in u", monotone)
    run.check("order m <= M", ordered)


_RUNNERS = {"solve": cmd_solve, "lipschitz": cmd_lipschitz, "derivative": cmd_derivative,
            "hadamard": cmd_hadamard, "linearized": cmd_linearized, "sweep": cmd_sweep}


def run(command, inst, cfg, out):
    """Execute a command, write its artifacts and summary.txt; returns the Run.

    An instance refusing the command (missing structural assumption) is
    recorded as a failed check rather than raised.
    """
    if command not in _RUNNERS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(command, inst, cfg, out)
    try:
        _RUNNERS[command](r)
    except AssumptionRefusal as exc:
        r.check("assumption", False, str(exc))
    r.write_summary()
    return r

