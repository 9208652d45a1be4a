"""Declarative scenario configuration: INI-style files with expressions.

A config has nested key/value sections ([scenario], [network], [diffusion],
[initial], [numerics], [output], [sweep]); spatial profiles are written as
expressions in ``x`` supporting +, -, *, /, ^, sin, cos, exp and the
constants pi and e.  Parsing validates everything and reports *all* problems
at once, each with a stable code and a field path.
"""

from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Expression",
    "ExpressionError",
    "ConfigIssue",
    "ConfigError",
    "ScenarioConfig",
    "compile_expression",
    "parse_config",
    "serialize_config",
]

KINDS = ("ode", "rd", "spectral_gap", "sweep")

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_BINARY_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY_OPS = (ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class Expression:
    """A validated closed-form profile; call it with an array of positions."""

    text: str
    uses_x: bool
    _code: object = field(repr=False, compare=False)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        env = {"x": x, **_FUNCTIONS, **_CONSTANTS}
        result = eval(self._code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(result, dtype=float), x.shape).copy()


def _validate_node(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _validate_node(node.body)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _BINARY_OPS):
        _validate_node(node.left)
        _validate_node(node.right)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY_OPS):
        _validate_node(node.operand)
    elif isinstance(node, ast.Call):
        if (not isinstance(node.func, ast.Name)
                or node.func.id not in _FUNCTIONS
                or len(node.args) != 1 or node.keywords):
            raise ExpressionError("only sin, cos and exp of one argument "
                                  "are allowed")
        _validate_node(node.args[0])
    elif isinstance(node, ast.Name):
        if node.id != "x" and node.id not in _CONSTANTS:
            raise ExpressionError(f"unknown name '{node.id}'")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError("only numeric constants are allowed")
    else:
        raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


def compile_expression(text: str) -> Expression:
    """Parse and validate a profile expression; '^' means power."""
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse '{text}': {exc.msg}") from exc
    _validate_node(tree)
    uses_x = any(isinstance(n, ast.Name) and n.id == "x"
                 for n in ast.walk(tree))
    return Expression(text=text, uses_x=uses_x,
                      _code=compile(tree, "<profile>", "eval"))


@dataclass(frozen=True)
class ConfigIssue:
    code: str
    path: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.path}: {self.message}"


class ConfigError(ValueError):
    """Carries every validation problem found in a config."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    scenario_id: str
    reactants: tuple[int, ...]
    products: tuple[int, ...]
    rate_forward: float
    rate_backward: float
    n_cells: int
    domain_length: float
    potential: str
    diffusivity: str
    initial: tuple[str, ...]
    dt: float
    t_end: float
    sample_every: int
    tol: float
    out_dir: str
    write_series: bool
    snapshot_times: tuple[float, ...]
    refinement_cells: tuple[int, ...]
    sweep_parameter: str
    sweep_values: tuple[float, ...]


_KNOWN_KEYS = {
    "scenario": {"kind", "id"},
    "network": {"alpha", "beta", "l", "k"},
    "diffusion": {"n", "domain_length", "psi", "diffusivity", "refinement"},
    "initial": None,   # species_1 .. species_q, checked against the network
    "numerics": {"dt", "t_end", "sample_every", "tol"},
    "output": {"directory", "series", "snapshots"},
    "sweep": {"parameter", "values"},
}

_DEFAULT_T_END = {"ode": 8.0, "rd": 5.0, "sweep": 5.0, "spectral_gap": 1.0}


class _Reader:
    """Typed section/key access that records issues instead of raising."""

    def __init__(self, parser: configparser.ConfigParser, issues: list):
        self.parser = parser
        self.issues = issues

    def report(self, code, path, message):
        self.issues.append(ConfigIssue(code, path, message))

    def raw(self, section, key, default=None, required=False):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if required:
            self.report("missing-field", f"{section}.{key}", "required key is missing")
        return default

    def number(self, section, key, default=None, required=False, positive=False):
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            value = float(text)
        except ValueError:
            self.report("bad-value", f"{section}.{key}", f"not a number: '{text}'")
            return default
        if positive and not value > 0:
            self.report("bad-value", f"{section}.{key}", "must be positive")
            return default
        return value

    def integer(self, section, key, default=None, required=False, minimum=None):
        value = self.number(section, key, None, required)
        if value is None:
            return default
        if value != int(value):
            self.report("bad-value", f"{section}.{key}", "must be an integer")
            return default
        value = int(value)
        if minimum is not None and value < minimum:
            self.report("bad-value", f"{section}.{key}", f"must be >= {minimum}")
            return default
        return value

    def flag(self, section, key, default):
        text = self.raw(section, key)
        if text is None:
            return default
        lowered = text.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        self.report("bad-value", f"{section}.{key}", f"not a boolean: '{text}'")
        return default

    def numbers(self, section, key, default=()):
        text = self.raw(section, key)
        if text is None:
            return None if default is None else tuple(default)
        try:
            return tuple(float(tok) for tok in text.split())
        except ValueError:
            self.report("bad-value", f"{section}.{key}",
                        f"not a space-separated number list: '{text}'")
            return tuple(default)

    def integers(self, section, key, default=()):
        values = self.numbers(section, key, None)
        if values is None:
            return tuple(default)
        if any(v != int(v) or v < 1 for v in values):
            self.report("bad-value", f"{section}.{key}",
                        "must be positive integers")
            return tuple(default)
        return tuple(int(v) for v in values)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a config; raises ConfigError listing every issue."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    issues: list[ConfigIssue] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([ConfigIssue("syntax", "<file>", str(exc))]) from exc

    reader = _Reader(parser, issues)

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            reader.report("unknown-key", section, "unknown section")
            continue
        known = _KNOWN_KEYS[section]
        if known is None:
            continue
        for key in parser.options(section):
            if key not in known:
                reader.report("unknown-key", f"{section}.{key}", "unknown key")

    kind = reader.raw("scenario", "kind", required=True) \
        if parser.has_section("scenario") else None
    if not parser.has_section("scenario"):
        reader.report("missing-field", "scenario.kind", "required key is missing")
    if kind is not None and kind not in KINDS:
        reader.report("bad-value", "scenario.kind",
                      f"must be one of {', '.join(KINDS)}")
        kind = None
    scenario_id = reader.raw("scenario", "id", default="scenario") or "scenario"

    needs_network = kind in ("ode", "rd", "sweep", None)
    needs_diffusion = kind in ("rd", "sweep", "spectral_gap", None)

    reactants: tuple[int, ...] = ()
    products: tuple[int, ...] = ()
    rate_forward = rate_backward = 1.0
    if needs_network:
        if not parser.has_section("network"):
            reader.report("missing-field", "network", "section is required")
        else:
            if not parser.has_option("network", "alpha"):
                reader.report("missing-field", "network.alpha", "required key is missing")
            if not parser.has_option("network", "beta"):
                reader.report("missing-field", "network.beta", "required key is missing")
            alpha = reader.numbers("network", "alpha", ())
            beta = reader.numbers("network", "beta", ())
            if any(v != int(v) or v < 0 for v in alpha + beta):
                reader.report("bad-value", "network.alpha",
                              "stoichiometry must be nonnegative integers")
            else:
                reactants = tuple(int(v) for v in alpha)
                products = tuple(int(v) for v in beta)
                if reactants and products:
                    if len(reactants) != len(products):
                        reader.report("bad-value", "network.beta",
                                      "alpha and beta must have the same length")
                    else:
                        change = [p - r for r, p in zip(reactants, products)]
                        for i, c in enumerate(change):
                            if c == 0:
                                reader.report(
                                    "catalyzer-species", f"network.beta[{i}]",
                                    "species must change across the reaction; "
                                    "catalyzers are not supported")
                        if change and not (any(c > 0 for c in change)
                                           and any(c < 0 for c in change)):
                            reader.report("no-sign-change", "network.beta",
                                          "beta - alpha must take both signs "
                                          "(mass conservation)")
            rate_forward = reader.number("network", "l", default=1.0, positive=True)
            rate_backward = reader.number("network", "k", default=1.0, positive=True)

    n_cells = 200
    domain_length = 1.0
    potential = "0"
    diffusivity = "1"
    refinement: tuple[int, ...] = (50, 100, 200, 400)
    if needs_diffusion and parser.has_section("diffusion"):
        n_cells = reader.integer("diffusion", "n", default=200, minimum=3)
        domain_length = reader.number("diffusion", "domain_length",
                                      default=1.0, positive=True)
        potential = reader.raw("diffusion", "psi", default="0")
        diffusivity = reader.raw("diffusion", "diffusivity", default="1")
        refinement = reader.integers("diffusion", "refinement", refinement)
        for key, expr in (("psi", potential), ("diffusivity", diffusivity)):
            try:
                compile_expression(expr)
            except ExpressionError as exc:
                reader.report("bad-expression", f"diffusion.{key}", str(exc))
    elif kind == "spectral_gap" and not parser.has_section("diffusion"):
        reader.report("missing-field", "diffusion", "section is required")

    initial: tuple[str, ...] = ()
    if needs_network and reactants:
        q = len(reactants)
        if not parser.has_section("initial"):
            reader.report("missing-field", "initial", "section is required")
        else:
            exprs = []
            for i in range(1, q + 1):
                key = f"species_{i}"
                text_i = reader.raw("initial", key, required=True)
                if text_i is None:
                    continue
                try:
                    expr = compile_expression(text_i)
                except ExpressionError as exc:
                    reader.report("bad-expression", f"initial.{key}", str(exc))
                    continue
                if kind == "ode" and expr.uses_x:
                    reader.report("nonconstant-initial", f"initial.{key}",
                                  "well-mixed scenarios need constant initial data")
                exprs.append(text_i)
            for key in parser.options("initial"):
                if not key.startswith("species_"):
                    reader.report("unknown-key", f"initial.{key}", "unknown key")
                else:
                    try:
                        index = int(key.split("_", 1)[1])
                    except ValueError:
                        index = -1
                    if not 1 <= index <= q:
                        reader.report("unknown-key", f"initial.{key}",
                                      f"species index out of range 1..{q}")
            initial = tuple(exprs)

    dt = reader.number("numerics", "dt", default=1e-3, positive=True)
    t_end = reader.number("numerics", "t_end",
                          default=_DEFAULT_T_END.get(kind or "rd", 5.0),
                          positive=True)
    sample_every = reader.integer("numerics", "sample_every", default=10, minimum=1)
    tol = reader.number("numerics", "tol", default=1e-10, positive=True)

    out_dir = reader.raw("output", "directory", default="out")
    write_series = reader.flag("output", "series", default=True)
    snapshot_times = reader.numbers("output", "snapshots", ())

    sweep_parameter = ""
    sweep_values: tuple[float, ...] = ()
    if kind == "sweep":
        if not parser.has_section("sweep"):
            reader.report("missing-field", "sweep", "section is required")
        else:
            sweep_parameter = reader.raw("sweep", "parameter", required=True) or ""
            if sweep_parameter and sweep_parameter != "mass_scale":
                reader.report("bad-value", "sweep.parameter",
                              "only 'mass_scale' sweeps are supported")
            sweep_values = reader.numbers("sweep", "values", ())
            if not sweep_values:
                reader.report("missing-field", "sweep.values",
                              "need at least one value")
            elif any(v <= 0 for v in sweep_values):
                reader.report("bad-value", "sweep.values", "values must be positive")

    if issues:
        raise ConfigError(issues)

    return ScenarioConfig(
        kind=kind, scenario_id=scenario_id,
        reactants=reactants, products=products,
        rate_forward=rate_forward, rate_backward=rate_backward,
        n_cells=n_cells, domain_length=domain_length,
        potential=potential, diffusivity=diffusivity,
        initial=initial,
        dt=dt, t_end=t_end, sample_every=sample_every, tol=tol,
        out_dir=out_dir, write_series=write_series,
        snapshot_times=snapshot_times,
        refinement_cells=refinement,
        sweep_parameter=sweep_parameter, sweep_values=sweep_values,
    )


def serialize_config(cfg: ScenarioConfig) -> str:
    """Render a config back to file form; parsing the result round-trips."""
    lines = ["[scenario]", f"kind = {cfg.kind}", f"id = {cfg.scenario_id}", ""]
    if cfg.reactants:
        lines += [
            "[network]",
            "alpha = " + " ".join(str(v) for v in cfg.reactants),
            "beta = " + " ".join(str(v) for v in cfg.products),
            f"l = {cfg.rate_forward!r}",
            f"k = {cfg.rate_backward!r}",
            "",
        ]
    lines += [
        "[diffusion]",
        f"n = {cfg.n_cells}",
        f"domain_length = {cfg.domain_length!r}",
        f"psi = {cfg.potential}",
        f"diffusivity = {cfg.diffusivity}",
        "refinement = " + " ".join(str(v) for v in cfg.refinement_cells),
        "",
    ]
    if cfg.initial:
        lines.append("[initial]")
        lines += [f"species_{i + 1} = {expr}" for i, expr in enumerate(cfg.initial)]
        lines.append("")
    lines += [
        "[numerics]",
        f"dt = {cfg.dt!r}",
        f"t_end = {cfg.t_end!r}",
        f"sample_every = {cfg.sample_every}",
        f"tol = {cfg.tol!r}",
        "",
        "[output]",
        f"directory = {cfg.out_dir}",
        f"series = {'true' if cfg.write_series else 'false'}",
    ]
    if cfg.snapshot_times:
        lines.append("snapshots = " + " ".join(repr(t) for t in cfg.snapshot_times))
    if cfg.kind == "sweep":
        lines += ["", "[sweep]", f"parameter = {cfg.sweep_parameter}",
                  "values = " + " ".join(repr(v) for v in cfg.sweep_values)]
    return "\n".join(lines) + "\n"
