"""Command-line front end.

    tournament <command> --config FILE [--set key=value]... [--output FILE] [--format csv|json]

The config is a JSON object. ``--set`` overrides a key (dotted paths reach into
nested objects, values are parsed as JSON when possible). Rewards are written as
objects such as ``{"kind": "pure_rank", "expr": "2*r"}``; expressions are parsed
by a restricted evaluator that accepts arithmetic, comparisons and a fixed set of
numpy functions of the variables ``r``, ``m``, ``x`` and ``t``.
"""

from __future__ import annotations

import argparse
import ast
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtr, ndtri

from .core import ModelParams
from .design import (
    DesignConstraints,
    design_net_profit,
    design_rank_alpha,
    design_total_effort,
)
from .equilibrium import solve_equilibrium
from .errors import ConfigError, TournamentError
from .hitting_time import HittingReward, hitting_value
from .reward import LinearQuantile, PiecewiseRank, PureRank, RankMean, StateMean, constant, lorenz_majorizes
from .simulate import SimConfig, simulate_equilibrium, write_paths_csv
from .welfare import price_of_anarchy

COMMANDS = (
    "equilibrium",
    "design-rank-alpha",
    "design-net-profit",
    "design-effort",
    "poa",
    "simulate",
    "hitting",
    "lorenz-check",
)
FORMATS = ("csv", "json")

# safe expressions ---------------------------------------------------------------------

_FUNCTIONS = {
    name: getattr(np, name)
    for name in (
        "exp", "log", "log1p", "expm1", "sqrt", "tanh", "arctan", "sinh", "cosh", "sin", "cos",
        "abs", "minimum", "maximum", "where", "clip", "floor", "ceil", "sign", "heaviside",
    )
}
_FUNCTIONS.update(ndtr=ndtr, ndtri=ndtri)
_CONSTANTS = {"pi": math.pi, "e": math.e}
_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.Call,
    ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.FloorDiv, ast.USub, ast.UAdd,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)


def compile_expression(text: str, variables: tuple, constants: dict | None = None, where: str = "expr"):
    """Compile ``text`` into a vectorised function of ``variables``.

    Raises
    ------
    ConfigError
        On syntax errors, unknown names or disallowed constructs.
    """
    if not isinstance(text, str):
        raise ConfigError(f"{where} must be a string expression")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: invalid expression ({exc.msg})") from None
    consts = {**_CONSTANTS, **(constants or {})}
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"{where}: construct {type(node).__name__} is not allowed")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError(f"{where}: only numeric literals are allowed")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS):
            raise ConfigError(f"{where}: unknown function")
        if isinstance(node, ast.Name) and node.id not in _FUNCTIONS and node.id not in consts and node.id not in variables:
            raise ConfigError(f"{where}: unknown name {node.id!r}")
    code = compile(tree, f"<{where}>", "eval")
    namespace = {"__builtins__": {}, **_FUNCTIONS, **{k: float(v) for k, v in consts.items()}}

    def fn(*args):
        env = dict(namespace)
        env.update(zip(variables, (np.asarray(a, dtype=float) for a in args)))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.asarray(eval(code, env), dtype=float) + 0.0 * sum(env[v] for v in variables)

    fn.__name__ = text
    return fn


# config -------------------------------------------------------------------------------

_COMMON = {"command", "x0", "sigma", "T", "c", "output", "format", "n", "bracket", "floor"}
_ALLOWED = {
    "equilibrium": {"reward"},
    "design-rank-alpha": {"alpha", "V0", "K"},
    "design-net-profit": {"g", "g_breakpoints", "x_range", "V0", "constants"},
    "design-effort": {"V0", "K", "M"},
    "poa": {"reward"},
    "simulate": {"reward", "sim", "paths_output"},
    "hitting": {"hitting"},
    "lorenz-check": {"reward", "reward_b"},
}
_REWARD_KEYS = {
    "constant": {"value"},
    "piecewise_rank": {"levels", "edges"},
    "pure_rank": {"expr", "bounded", "breakpoints", "constants"},
    "rank_mean": {"expr", "bounded", "breakpoints", "m_range", "constants"},
    "state_mean": {"expr", "x_range", "m_range", "constants"},
    "linear_quantile": {"a", "b", "constants"},
}
_SIM_KEYS = {"n_paths", "n_steps", "seed", "scheme", "record_paths"}
_HITTING_KEYS = {"expr", "R_inf", "breakpoints", "n_table", "constants"}
DEFAULTS = {"x0": 0.0, "sigma": 1.0, "T": 1.0, "c": 1.0, "n": 512, "format": None}


@dataclass
class RunConfig:
    """Validated run configuration with defaults filled in."""

    command: str
    params: ModelParams
    raw: dict
    reward: Any = None
    reward_b: Any = None
    constraints: DesignConstraints | None = None
    sim: SimConfig | None = None
    output: str | None = None
    format: str = "json"
    options: dict = field(default_factory=dict)


def _number(raw: dict, key: str, *, default=None, required=False) -> float:
    if key not in raw:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key} must be a number")
    if not math.isfinite(val):
        raise ConfigError(f"{key} must be finite")
    return float(val)


def _pair(raw: dict, key: str, where: str):
    if key not in raw or raw[key] is None:
        return None
    val = raw[key]
    if not (isinstance(val, list) and len(val) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)):
        raise ConfigError(f"{where}{key} must be a list of two numbers")
    if not val[0] < val[1]:
        raise ConfigError(f"{where}{key} must be increasing")
    return (float(val[0]), float(val[1]))


def _check_keys(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown key '{where}{extra[0]}'")


def _constants(obj: dict, where: str) -> dict:
    consts = obj.get("constants", {})
    if not isinstance(consts, dict):
        raise ConfigError(f"{where}constants must be an object")
    for k, v in consts.items():
        if not k.isidentifier() or isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}constants.{k} must be a named number")
    return consts


def _float_list(obj: dict, key: str, where: str, default=()):
    if key not in obj:
        return None if default is None else list(default)
    val = obj[key]
    if val is None:
        return None
    if not isinstance(val, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in val):
        raise ConfigError(f"{where}{key} must be a list of numbers")
    return [float(v) for v in val]


def build_reward(obj: dict, where: str = "reward."):
    """Construct a reward from its JSON description."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{where}kind is required")
    kind = obj["kind"]
    if kind not in _REWARD_KEYS:
        raise ConfigError(f"{where}kind must be one of {sorted(_REWARD_KEYS)}")
    _check_keys(obj, _REWARD_KEYS[kind] | {"kind"}, where)
    consts = _constants(obj, where)
    try:
        if kind == "constant":
            return constant(_number(obj, "value", required=True))
        if kind == "piecewise_rank":
            if "levels" not in obj:
                raise ConfigError(f"missing required field {where}levels")
            return PiecewiseRank(_float_list(obj, "levels", where), _float_list(obj, "edges", where, None))
        if kind == "linear_quantile":
            coef = {}
            for key in ("a", "b"):
                if key not in obj:
                    raise ConfigError(f"missing required field {where}{key}")
                val = obj[key]
                if isinstance(val, str):
                    f = compile_expression(val, ("m",), consts, where + key)
                    coef[key] = lambda m, f=f: float(f(m))
                elif isinstance(val, (int, float)) and not isinstance(val, bool):
                    coef[key] = float(val)
                else:
                    raise ConfigError(f"{where}{key} must be a number or an expression in m")
            return LinearQuantile(coef["a"], coef["b"])
        if "expr" not in obj:
            raise ConfigError(f"missing required field {where}expr")
        bounded = obj.get("bounded", True)
        if not isinstance(bounded, bool):
            raise ConfigError(f"{where}bounded must be true or false")
        if kind == "pure_rank":
            fn = compile_expression(obj["expr"], ("r",), consts, where + "expr")
            return PureRank(fn, bounded, _float_list(obj, "breakpoints", where), name=obj["expr"])
        if kind == "rank_mean":
            fn = compile_expression(obj["expr"], ("r", "m"), consts, where + "expr")
            m_range = _pair(obj, "m_range", where) or (-10.0, 10.0)
            return RankMean(fn, bounded, _float_list(obj, "breakpoints", where), m_range, name=obj["expr"])
        fn = compile_expression(obj["expr"], ("x", "m"), consts, where + "expr")
        return StateMean(
            fn,
            _pair(obj, "x_range", where) or (-10.0, 10.0),
            _pair(obj, "m_range", where) or (-10.0, 10.0),
            name=obj["expr"],
        )
    except TournamentError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where[:-1]}: {exc}") from None


def _set_path(doc: dict, dotted: str, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if k not in node:
            node[k] = {}
        if not isinstance(node[k], dict):
            raise ConfigError(f"--set {dotted}: {k} is not an object")
        node = node[k]
    node[keys[-1]] = value


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key=value`` overrides; values are parsed as JSON, else kept as strings."""
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        _set_path(doc, key.strip(), value)
    return doc


def parse_config(text, overrides=(), command: str | None = None) -> RunConfig:
    """Parse and validate a JSON config.

    Parameters
    ----------
    text : bytes or str
        UTF-8 JSON object.
    overrides : sequence of str
        ``key=value`` items applied before validation.
    command : str, optional
        Takes precedence over the ``command`` field.

    Raises
    ------
    ConfigError
        Naming the offending field and the violated constraint.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            raise ConfigError("config must be UTF-8") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = apply_overrides(doc, overrides)
    if command is not None:
        doc["command"] = command
    cmd = doc.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {list(COMMANDS)}")
    _check_keys(doc, _COMMON | _ALLOWED[cmd], "")

    vals = {k: _number(doc, k, default=DEFAULTS[k]) for k in ("x0", "sigma", "T", "c")}
    for key, msg in (("sigma", "sigma must be > 0"), ("T", "T must be > 0"), ("c", "c must be > 0")):
        if not vals[key] > 0:
            raise ConfigError(msg)
    params = ModelParams(**vals)

    options: dict = {}
    n = doc.get("n", DEFAULTS["n"])
    if isinstance(n, bool) or not isinstance(n, int) or n < 16:
        raise ConfigError("n must be an integer >= 16")
    options["n"] = n
    options["bracket"] = _pair(doc, "bracket", "")
    options["floor"] = _number(doc, "floor")

    fmt = doc.get("format")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a file path")
    if fmt is None:
        fmt = "csv" if output and output.endswith(".csv") else "json"
    if fmt not in FORMATS:
        raise ConfigError("format must be csv or json")

    cfg = RunConfig(cmd, params, doc, output=output, format=fmt, options=options)
    if cmd in ("equilibrium", "poa", "simulate", "lorenz-check"):
        if "reward" not in doc:
            raise ConfigError("missing required field 'reward'")
        cfg.reward = build_reward(doc["reward"])
    if cmd == "lorenz-check":
        if "reward_b" not in doc:
            raise ConfigError("missing required field 'reward_b'")
        cfg.reward_b = build_reward(doc["reward_b"], "reward_b.")
    if cmd in ("design-rank-alpha", "design-effort", "design-net-profit"):
        V0 = _number(doc, "V0", required=True)
        K = _number(doc, "K", default=V0) if cmd == "design-net-profit" else _number(doc, "K", required=True)
        if K < V0:
            raise ConfigError("K >= V0 required")
        cfg.constraints = DesignConstraints(V0, K)
    if cmd == "design-rank-alpha":
        alpha = _number(doc, "alpha", required=True)
        if not 0.0 < alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        options["alpha"] = alpha
    if cmd == "design-effort":
        M = _number(doc, "M")
        if M is not None and not M > 0:
            raise ConfigError("M must be > 0")
        options["M"] = M
    if cmd == "design-net-profit":
        if "g" not in doc:
            raise ConfigError("missing required field 'g'")
        options["g"] = compile_expression(doc["g"], ("x",), _constants(doc, ""), "g")
        options["g_breakpoints"] = _float_list(doc, "g_breakpoints", "")
        options["x_range"] = _pair(doc, "x_range", "")
    if cmd == "simulate":
        sim = doc.get("sim", {})
        _check_keys(sim, _SIM_KEYS, "sim.")
        kwargs = {}
        for key in ("n_paths", "n_steps", "seed"):
            if key in sim:
                if isinstance(sim[key], bool) or not isinstance(sim[key], int):
                    raise ConfigError(f"sim.{key} must be an integer")
                kwargs[key] = sim[key]
        if "scheme" in sim:
            kwargs["scheme"] = sim["scheme"]
        paths_output = doc.get("paths_output")
        if paths_output is not None and not isinstance(paths_output, str):
            raise ConfigError("paths_output must be a file path")
        kwargs["record_paths"] = bool(sim.get("record_paths", paths_output is not None))
        try:
            cfg.sim = SimConfig(**kwargs)
        except TournamentError as exc:
            raise ConfigError(f"sim: {exc}") from None
        options["paths_output"] = paths_output
    if cmd == "hitting":
        if not params.x0 > 0:
            raise ConfigError("x0 must be > 0 for the hitting-time game")
        h = doc.get("hitting")
        if h is None:
            raise ConfigError("missing required field 'hitting'")
        _check_keys(h, _HITTING_KEYS, "hitting.")
        if "expr" not in h:
            raise ConfigError("missing required field hitting.expr")
        fn = compile_expression(h["expr"], ("t",), _constants(h, "hitting."), "hitting.expr")
        R_inf = _number(h, "R_inf", required=True)
        n_table = h.get("n_table", 201)
        if isinstance(n_table, bool) or not isinstance(n_table, int) or n_table < 2:
            raise ConfigError("hitting.n_table must be an integer >= 2")
        cfg.reward = HittingReward(fn, R_inf, tuple(_float_list(h, "breakpoints", "hitting.")))
        options["n_table"] = n_table
    return cfg


# results ------------------------------------------------------------------------------


@dataclass
class Result:
    """A table (column name to 1-d array) plus scalar fields."""

    columns: dict
    scalars: dict
    extra: dict = field(default_factory=dict)


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _format_cell(v) -> str:
    v = _num(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(result: Result, fmt: str) -> str:
    """CSV (table rows with scalars repeated as columns) or JSON."""
    if fmt == "json":
        doc = {k: _num(v) for k, v in result.scalars.items()}
        doc.update({k: _jsonable(v) for k, v in result.extra.items()})
        doc["table"] = {k: [_num(x) for x in np.asarray(v).tolist()] for k, v in result.columns.items()}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(result.columns) + list(result.scalars)
    w.writerow(names)
    length = len(next(iter(result.columns.values()))) if result.columns else 1
    cols = [np.asarray(v).tolist() for v in result.columns.values()]
    scal = [result.scalars[k] for k in result.scalars]
    for i in range(length):
        w.writerow([_format_cell(c[i]) for c in cols] + [_format_cell(s) for s in scal])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    return _num(v)


def write_atomic(path: str, text: str | None = None, writer=None) -> None:
    """Stage ``text`` (or the output of ``writer(tmp_path)``) next to ``path`` and rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            if text is not None:
                fh.write(text)
        if writer is not None:
            writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _equilibrium_result(cfg: RunConfig) -> Result:
    p, o = cfg.params, cfg.options
    eqs = solve_equilibrium(cfg.reward, p, n=o["n"], bracket=o["bracket"], floor=o["floor"])
    cols = {"index": [], "r": [], "q": [], "f": [], "m": [], "beta": [], "V": [], "residual": [], "A": []}
    for i, e in enumerate(eqs):
        d = e.distribution
        k = d.r_nodes.size
        cols["index"] += [i] * k
        cols["r"] += d.r_nodes.tolist()
        cols["q"] += d.q_values.tolist()
        cols["f"] += d.density_values.tolist()
        for key, val in (("m", e.mean), ("beta", e.beta), ("V", e.value), ("residual", e.residual), ("A", e.effort(p))):
            cols[key] += [val] * k
    notes = sorted({n for e in eqs for n in e.notes})
    return Result({k: np.asarray(v) for k, v in cols.items()}, {"n_equilibria": len(eqs)}, {"notes": notes})


def _design_result(sol, cfg: RunConfig) -> Result:
    eq = sol.equilibrium
    r = eq.distribution.r_nodes
    R = np.asarray(sol.reward.evaluate(0.0, r, eq.mean), dtype=float) * np.ones_like(r)
    scalars = {
        "objective": sol.objective_value,
        "binding_budget": bool(sol.binding.get("budget", False)),
        "binding_reservation": bool(sol.binding.get("reservation", False)),
        "m": eq.mean,
        "V": eq.value,
        "residual": eq.residual,
    }
    for k, v in sol.details.items():
        if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool):
            scalars[k] = v
    return Result({"r": r, "R": R, "q": eq.distribution.q_values}, scalars, {"reward": repr(sol.reward)})


def run_command(cfg: RunConfig) -> Result:
    """Dispatch to the solvers and collect the result; file output is left to ``run``."""
    p, o = cfg.params, cfg.options
    if cfg.command == "equilibrium":
        return _equilibrium_result(cfg)
    if cfg.command == "design-rank-alpha":
        return _design_result(design_rank_alpha(o["alpha"], cfg.constraints, p), cfg)
    if cfg.command == "design-net-profit":
        sol = design_net_profit(o["g"], cfg.constraints.V0, p, o["g_breakpoints"], o["x_range"])
        return _design_result(sol, cfg)
    if cfg.command == "design-effort":
        return _design_result(design_total_effort(cfg.constraints, p, M=o["M"]), cfg)
    if cfg.command == "poa":
        rep = price_of_anarchy(cfg.reward, p, bracket=o["bracket"])
        return Result(
            {"equilibrium_value": np.asarray(rep.equilibrium_values)},
            {"v_centralized": rep.v_centralized, "m_star": rep.m_star, "poa": rep.poa},
            {"notes": list(rep.notes)},
        )
    if cfg.command == "simulate":
        (eq, *_rest) = solve_equilibrium(cfg.reward, p, n=o["n"], bracket=o["bracket"], floor=o["floor"])
        rep = simulate_equilibrium(cfg.reward, eq, cfg.sim, p)
        if o["paths_output"]:
            write_atomic(o["paths_output"], writer=lambda tmp: write_paths_csv(tmp, rep.times, rep.paths))
        tcdf = np.asarray(eq.distribution.cdf(rep.empirical_quantiles), dtype=float)
        return Result(
            {"rank": rep.quantile_ranks, "empirical_quantile": rep.empirical_quantiles, "equilibrium_cdf": tcdf},
            {
                "ks_stat": rep.ks_stat,
                "ks_pvalue": rep.ks_pvalue,
                "payoff_mean": rep.payoff_mean,
                "payoff_stderr": rep.payoff_stderr,
                "effort_cost_mean": rep.effort_cost_mean,
                "effort_cost_stderr": rep.effort_cost_stderr,
                "terminal_mean": rep.terminal_mean,
                "terminal_stderr": rep.terminal_stderr,
                "equilibrium_value": eq.value,
            },
        )
    if cfg.command == "hitting":
        hv = hitting_value(cfg.reward, p, n_table=o["n_table"])
        return Result(
            {"t": hv.density.t_nodes, "density": hv.density.density_values},
            {"value": hv.value, "beta": hv.beta, "atom_mass": hv.density.atom_mass},
        )
    ok, (z, a, b) = lorenz_majorizes(cfg.reward, cfg.reward_b, return_table=True)
    return Result({"z": z, "partial_R": a, "partial_R_b": b}, {"majorizes": ok})


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg``; results go to ``cfg.output`` (atomically) or ``stdout``."""
    result = run_command(cfg)
    text = render(result, cfg.format)
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        (stdout or sys.stdout).write(text)
    return 0


def _error(exc: Exception, command, stream) -> None:
    doc = {"error": {"type": type(exc).__name__, "message": str(exc), "command": command}}
    stream.write(json.dumps(doc) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tournament", description="Terminal-ranking tournament solver")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config file ('-' for stdin)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--output", help="result file; stdout when omitted")
    ap.add_argument("--format", choices=FORMATS)
    return ap


def main(argv=None) -> int:
    """Entry point. Exit status 0 on success, 2 for config errors, 1 for solver errors."""
    args = build_parser().parse_args(argv)
    try:
        if args.config == "-":
            text = sys.stdin.buffer.read()
        else:
            try:
                with open(args.config, "rb") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}") from None
        extra = list(args.overrides)
        if args.output is not None:
            extra.append("output=" + json.dumps(args.output))
        if args.format is not None:
            extra.append("format=" + json.dumps(args.format))
        cfg = parse_config(text, extra, command=args.command)
    except ConfigError as exc:
        _error(exc, args.command, sys.stderr)
        return 2
    try:
        return run(cfg)
    except (TournamentError, ValueError, ArithmeticError) as exc:
        _error(exc, args.command, sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
