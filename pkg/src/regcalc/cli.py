"""Config-driven command line: load, dispatch, report.

One TOML file describes a whole scenario (index structure, function
spaces, atlas, partition, connective structure, coefficient tables) and
each command runs the checks or constructions wired to one module.  The
report is deterministic for a fixed config and seed: fields appear in a
fixed order, the config is identified by its content hash, and wall
times live in a separate block so byte comparison can strip them.

Exit codes: 0 all checks pass, 1 a check fails, 2 at least one verdict
is inconclusive, 64 the config cannot be loaded (parse error or a name
that does not resolve, with its location), 65 a named hypothesis or
precondition fails at run time.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:                      # Python 3.10
    import tomli as tomllib

from . import expr as ex
from . import index_algebra as ia
from . import multiplicity as mu
from .spaces import (Budget, ClaimTemplate, Domain, INCONCLUSIVE, MEMBER,
                     NOT_MEMBER, SpaceError, check_membership)
from .atlas import (Atlas, AtlasError, Chart, Transition, TransitionPiece,
                    build_partition, partition_residual, verify_atlas)
from .spaces import Box
from .connective import ConnectiveError, identity_connective
from .connection import (ConnectionBuildError, TOL_GRID, TOL_SYMBOLIC,
                         glue, local_connection,
                         regular_existence_pipeline, verify_connection_law)

__all__ = [
    "ConfigError", "Settings", "Report", "run", "main",
    "COMMANDS", "FORMAT_VERSION",
    "EXIT_PASS", "EXIT_FAIL", "EXIT_INCONCLUSIVE",
    "EXIT_CONFIG", "EXIT_PRECONDITION",
]

FORMAT_VERSION = "1.0"

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_CONFIG = 64
EXIT_PRECONDITION = 65

COMMANDS = ("check-algebra", "check-spaces", "check-atlas",
            "build-partition", "glue", "pipeline", "multiplicity",
            "residual")

# raised by module operations when a stated hypothesis does not hold
_PRECONDITION_ERRORS = (ia.IndexAlgebraError, SpaceError, AtlasError,
                        ConnectiveError, ConnectionBuildError,
                        mu.MultiplicityError, ex.ExprError)


class ConfigError(ValueError):
    """Unusable config: parse failure or an unresolved reference."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


# ---------------------------------------------------------------------------
# config loading

def _fraction(v, where: str) -> Fraction:
    # accepts ints, floats (read as their decimal literal), "3/4" strings
    try:
        if isinstance(v, bool):
            raise ValueError("booleans are not numbers")
        if isinstance(v, float):
            return Fraction(str(v))
        return Fraction(v)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise ConfigError(f"bad number {v!r} ({e})", where) from None


def _index_table(d, where: str) -> dict:
    if not isinstance(d, Mapping):
        raise ConfigError("expected a table of index = value pairs", where)
    return {_fraction(k, where): _fraction(v, f"{where}.{k}")
            for k, v in d.items()}


def _expr(text, where: str) -> ex.Expr:
    if isinstance(text, (int, float)):
        return ex.Const(_fraction(text, where))
    if not isinstance(text, str):
        raise ConfigError(f"expected an expression string, got {text!r}",
                          where)
    try:
        return ex.parse(text)
    except ex.ParseError as e:
        raise ConfigError(f"bad expression {text!r}: {e}", where) from None


def _corners(sec: Mapping, where: str) -> tuple[tuple, tuple]:
    lo, hi = sec.get("lo"), sec.get("hi")
    if not isinstance(lo, list) or not isinstance(hi, list) or len(lo) != len(hi):
        raise ConfigError("needs matching 'lo' and 'hi' corner lists", where)
    return tuple(float(v) for v in lo), tuple(float(v) for v in hi)


def _section(cfg: Mapping, name: str) -> Mapping:
    sec = cfg.get(name)
    if sec is None:
        raise ConfigError(f"missing [{name}] section", f"[{name}]")
    return sec


def _order(v, where: str):
    if v == "inf":
        return math.inf
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    raise ConfigError(f"order must be an integer or \"inf\", got {v!r}",
                      where)


def _load_algebra(cfg: Mapping) -> list[ia.DistributiveStructure]:
    sec = _section(cfg, "algebra")
    entries = sec.get("structures", [sec] if "builtin" in sec or
                      "eps" in sec else [])
    if not entries:
        raise ConfigError("needs 'builtin' (with 'params') or custom "
                          "'indices'/'eps'/'delta' tables, or a "
                          "[[algebra.structures]] list", "[algebra]")
    out = []
    for i, entry in enumerate(entries):
        where = f"[algebra.structures] #{i + 1}" if "structures" in sec \
            else "[algebra]"
        try:
            if "builtin" in entry:
                out.append(ia.builtin_structure(entry["builtin"],
                                                entry.get("params")))
            else:
                base = ia.IndexSet.of([_fraction(v, where)
                                       for v in entry.get("indices", [])])
                pairs = {}
                for role in ("eps", "delta"):
                    table = entry.get(role, {})
                    pairs[role] = {tuple(_fraction(p, where) for p in
                                         k.split(",")): _fraction(v, where)
                                   for k, v in table.items()}
                out.append(ia.from_tables(base, pairs["eps"],
                                          pairs["delta"]))
        except (ValueError, TypeError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e), where) from None
    return out


def _load_claim(cfg: Mapping) -> tuple[ClaimTemplate, list]:
    sec = _section(cfg, "spaces")
    where = "[spaces]"
    kind = sec.get("kind")
    if kind not in ("Lp", "Ck"):
        raise ConfigError(f"kind must be \"Lp\" or \"Ck\", got {kind!r}",
                          where)
    dom = sec.get("domain")
    if not isinstance(dom, Mapping):
        raise ConfigError("needs a [spaces.domain] table", where)
    lo, hi = _corners(dom, "[spaces.domain]")
    try:
        domain = Domain.box(lo, hi)
    except SpaceError as e:
        raise ConfigError(str(e), "[spaces.domain]") from None
    k = sec.get("k")
    if not isinstance(k, int) or isinstance(k, bool):
        raise ConfigError("needs an integer degree 'k'", where)
    S = sec.get("S")
    if not isinstance(S, list) or not all(isinstance(i, int) for i in S):
        raise ConfigError("needs an integer list 'S' of orders to test",
                          where)
    alpha = {int(i): v for i, v in
             _index_table(sec.get("alpha", {}), "[spaces.alpha]").items()}
    beta = {int(i): int(v) for i, v in
            _index_table(sec.get("beta", {}), "[spaces.beta]").items()}
    for i in S:
        if i not in alpha or i not in beta:
            raise ConfigError(f"order {i} in S has no alpha/beta entry",
                              where)
    fns = sec.get("functions")
    if not isinstance(fns, list) or not fns:
        raise ConfigError("needs a nonempty 'functions' list of "
                          "expression strings", where)
    exprs = [_expr(t, f"[spaces] functions #{i + 1}")
             for i, t in enumerate(fns)]
    try:
        return ClaimTemplate(domain, kind, alpha, beta, k, tuple(S)), exprs
    except SpaceError as e:
        raise ConfigError(str(e), where) from None


def _load_atlas(cfg: Mapping) -> Atlas:
    sec = _section(cfg, "atlas")
    charts = []
    names = set()
    for i, c in enumerate(sec.get("charts", [])):
        where = f"[[atlas.charts]] #{i + 1}"
        name = c.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError("chart needs a 'name'", where)
        lo, hi = _corners(c, where)
        try:
            charts.append(Chart(name, Domain.box(lo, hi)))
        except (SpaceError, AtlasError) as e:
            raise ConfigError(str(e), where) from None
        names.add(name)
    transitions = []
    for i, t in enumerate(sec.get("transitions", [])):
        where = f"[[atlas.transitions]] #{i + 1}"
        src, dst = t.get("src"), t.get("dst")
        for end in (src, dst):
            if end not in names:
                raise ConfigError(f"undeclared chart {end!r}", where)
        pieces = []
        for p_i, p in enumerate(t.get("pieces", [])):
            pwhere = f"{where} piece #{p_i + 1}"
            lo, hi = _corners(p, pwhere)
            comps = p.get("exprs")
            if not isinstance(comps, list) or not comps:
                raise ConfigError("piece needs an 'exprs' list", pwhere)
            parsed = tuple(_expr(s, f"{pwhere} exprs #{j + 1}")
                           for j, s in enumerate(comps))
            try:
                pieces.append(TransitionPiece(Box(lo, hi), parsed))
            except (SpaceError, AtlasError) as e:
                raise ConfigError(str(e), pwhere) from None
        try:
            transitions.append(Transition(src, dst, tuple(pieces)))
        except AtlasError as e:
            raise ConfigError(str(e), where) from None
    k = _order(sec.get("k", "inf"), "[atlas]")
    try:
        return Atlas(tuple(charts), tuple(transitions), k,
                     k_check=sec.get("k_check", 6))
    except AtlasError as e:
        raise ConfigError(str(e), "[atlas]") from None


def _load_connective(cfg: Mapping):
    sec = _section(cfg, "connective")
    O = {name: _index_table(t, f"[connective.O.{name}]")
         for name, t in sec.get("O", {}).items()}
    Q = {name: _index_table(t, f"[connective.Q.{name}]")
         for name, t in sec.get("Q", {}).items()}
    j = _fraction(sec.get("j", 0), "[connective].j")
    try:
        return identity_connective(O, Q, j)
    except ConnectiveError as e:
        raise ConfigError(str(e), "[connective]") from None


def _coeff_tables(sec: Mapping, a: Atlas, where: str) -> dict:
    """Per-chart {(c,a,b): Expr} tables keyed by "c,a,b" strings."""
    out = {}
    for chart, table in sec.items():
        if all(c.name != chart for c in a.charts):
            raise ConfigError(f"undeclared chart {chart!r}",
                              f"{where}.{chart}]")
        coeffs = {}
        for key, text in table.items():
            kwhere = f"{where}.{chart}] key \"{key}\""
            parts = key.split(",")
            if len(parts) != 3:
                raise ConfigError("keys look like \"c,a,b\"", kwhere)
            try:
                idx = tuple(int(p) for p in parts)
            except ValueError:
                raise ConfigError("indices must be integers", kwhere) \
                    from None
            coeffs[idx] = _expr(text, kwhere)
        out[chart] = coeffs
    return out


def _load_locals(cfg: Mapping, a: Atlas, required: bool) -> dict | None:
    sec = cfg.get("connection", {})
    tables = sec.get("locals")
    if tables is None:
        if required:
            raise ConfigError("missing [connection.locals.<chart>] tables",
                              "[connection]")
        return None
    raw = _coeff_tables(tables, a, "[connection.locals")
    for c in a.charts:
        if c.name not in raw:
            raise ConfigError(f"no table for chart {c.name!r}",
                              "[connection.locals]")
    # construction probes the coefficients; its failures are runtime
    return {name: local_connection(a.chart(name), coeffs)
            for name, coeffs in sorted(raw.items())}


def _load_family(cfg: Mapping, a: Atlas, path: tuple[str, ...],
                 where: str) -> mu.ThreeParamFamily:
    sec = cfg
    for p in path:
        sec = sec.get(p) if isinstance(sec, Mapping) else None
        if sec is None:
            raise ConfigError(f"missing [{where}.<chart>] tables",
                              f"[{where}]")
    tables = _coeff_tables(sec, a, f"[{where}")
    try:
        return mu.three_param_family(a, tables)
    except mu.MultiplicityError as e:
        raise ConfigError(str(e), f"[{where}]") from None


def _pipeline_tables(cfg: Mapping):
    sec = _section(cfg, "pipeline")
    where = "[pipeline]"
    kind = sec.get("kind")
    if kind not in ("Lp", "Ck"):
        raise ConfigError(f"kind must be \"Lp\" or \"Ck\", got {kind!r}",
                          where)
    z = _fraction(sec.get("z", 0), f"{where}.z")
    tables = {}
    for name in ("alpha", "beta", "theta", "vartheta"):
        if name not in sec:
            raise ConfigError(f"missing [pipeline.{name}] table", where)
        tables[name] = _index_table(sec[name], f"[pipeline.{name}]")
    return kind, z, tables


# ---------------------------------------------------------------------------
# settings and report

@dataclass(frozen=True)
class Settings:
    """Global knobs; flags override the [settings] section."""

    grid: int = 16
    tol: float | None = None   # None picks each command's default
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.grid < 1:
            raise ConfigError("grid must be at least 1", "[settings]")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tolerance must be positive", "[settings]")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1", "[settings]")


def _load_settings(cfg: Mapping, overrides: Mapping) -> Settings:
    sec = cfg.get("settings", {})
    merged = {}
    for name, cast in (("grid", int), ("tol", float), ("seed", int),
                       ("jobs", int)):
        v = overrides.get(name)
        if v is None:
            v = sec.get(name)
        if v is None:
            continue
        try:
            merged[name] = cast(v)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {name}: {v!r}",
                              "[settings]") from None
    return Settings(**merged)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return v if math.isfinite(v) else str(v)
    if isinstance(v, Mapping):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass(frozen=True)
class Report:
    """One command's outcome in a machine-stable shape."""

    command: str
    config_sha256: str
    settings: Settings
    results: dict
    verdict: str               # pass | fail | inconclusive | error
    timings: dict

    def to_dict(self) -> dict:
        # field order is part of the format; timings go last so byte
        # comparisons can strip them
        return {
            "format_version": FORMAT_VERSION,
            "command": self.command,
            "config_sha256": self.config_sha256,
            "settings": {
                "grid": self.settings.grid,
                "tol": self.settings.tol,
                "seed": self.settings.seed,
                "jobs": self.settings.jobs,
            },
            "results": _jsonable(self.results),
            "verdict": self.verdict,
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_text(self) -> str:
        lines = [f"regcalc {self.command}: {self.verdict.upper()}"]
        for key, value in _jsonable(self.results).items():
            lines.append(f"  {key}: {_terse(value)}")
        lines.append(f"  elapsed: {self.timings.get('total', 0.0):.3f}s")
        return "\n".join(lines) + "\n"


def _terse(v, depth: int = 0) -> str:
    if isinstance(v, Mapping):
        inner = ", ".join(f"{k}={_terse(x, depth + 1)}"
                          for k, x in v.items())
        return "{" + inner + "}"
    if isinstance(v, list):
        if depth >= 2 and len(v) > 4:
            return f"[{len(v)} entries]"
        return "[" + ", ".join(_terse(x, depth + 1) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# ---------------------------------------------------------------------------
# command executors: (config, settings) -> (results, verdict)

def _cmd_check_algebra(cfg, st: Settings):
    rows = []
    ok = True
    for ds in _load_algebra(cfg):
        rep = ia.check_distributive_laws(ds, seed=st.seed)
        rows.append({
            "structure": ds.name,
            "triples_checked": rep.triples_checked,
            "violations": len(rep.violations),
            "partial": len(rep.partial),
            "passed": rep.passed,
        })
        ok = ok and rep.passed
    return {"structures": rows}, "pass" if ok else "fail"


def _cmd_check_spaces(cfg, st: Settings):
    template, exprs = _load_claim(cfg)
    budget = Budget(grid=st.grid)
    rows = []
    verdicts = set()
    for e in exprs:
        claim = check_membership(e, template, budget)
        rows.append({"function": ex.to_text(e), "verdict": claim.verdict})
        verdicts.add(claim.verdict)
    if NOT_MEMBER in verdicts:
        verdict = "fail"
    elif INCONCLUSIVE in verdicts:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return {"kind": template.kind, "k": template.k,
            "functions": rows}, verdict


def _cmd_check_atlas(cfg, st: Settings):
    a = _load_atlas(cfg)
    rep = verify_atlas(a, grid=max(4, st.grid))
    tol = st.tol if st.tol is not None else 1e-8
    results = {
        "charts": len(a.charts),
        "transitions": len(a.transitions),
        "pairs_checked": len(rep.pairs),
        "triples_checked": len(rep.triples),
        "max_residual": rep.max_residual,
        "tol": tol,
    }
    return results, "pass" if rep.max_residual <= tol else "fail"


def _cmd_build_partition(cfg, st: Settings):
    a = _load_atlas(cfg)
    sec = cfg.get("partition", {})
    pou = build_partition(a, margin=sec.get("margin", 0.1),
                          coverage_grid=sec.get("coverage_grid", 9))
    resid, where = partition_residual(pou, grid=st.grid)
    tol = st.tol if st.tol is not None else 1e-12
    results = {
        "charts": len(a.charts),
        "margin": pou.margin,
        "residual": resid,
        "worst": {"chart": where[0], "point": list(where[1])} if where
        else None,
        "tol": tol,
    }
    return results, "pass" if resid <= tol else "fail"


def _cmd_glue(cfg, st: Settings):
    a = _load_atlas(cfg)
    sec = cfg.get("partition", {})
    mode = cfg.get("connection", {}).get("mode", "symbolic")
    if mode not in ("symbolic", "grid"):
        raise ConfigError(f"mode must be \"symbolic\" or \"grid\", got "
                          f"{mode!r}", "[connection]")
    locals_ = _load_locals(cfg, a, required=True)
    pou = build_partition(a, margin=sec.get("margin", 0.1),
                          coverage_grid=sec.get("coverage_grid", 9))
    g = glue(a, pou, locals_)
    tol = st.tol if st.tol is not None else \
        (TOL_SYMBOLIC if mode == "symbolic" else TOL_GRID)
    law = verify_connection_law(g, grid=max(4, st.grid), tol=tol, mode=mode)
    results = {
        "charts": len(a.charts),
        "mode": mode,
        "law_residual": law.residual,
        "tol": tol,
        "overlaps_checked": len(law.entries),
    }
    return results, "pass" if law.passed else "fail"


def _cmd_pipeline(cfg, st: Settings):
    a = _load_atlas(cfg)
    cs = _load_connective(cfg)
    kind, z, tables = _pipeline_tables(cfg)
    # the canonical existence construction starts from flat locals;
    # "connection" borrows the [connection.locals] tables instead
    source = cfg["pipeline"].get("locals", "flat")
    if source == "flat":
        locals_ = None
    elif source == "connection":
        locals_ = _load_locals(cfg, a, required=True)
    else:
        raise ConfigError(f"locals must be \"flat\" or \"connection\", "
                          f"got {source!r}", "[pipeline]")
    margin = cfg.get("partition", {}).get("margin", 0.1)
    tol = st.tol if st.tol is not None else TOL_SYMBOLIC
    res = regular_existence_pipeline(
        a, kind, tables["alpha"], tables["beta"], cs, z,
        tables["theta"], tables["vartheta"], locals=locals_,
        margin=margin, budget=Budget(grid=st.grid), grid=max(4, st.grid),
        tol=tol)
    members = [{"chart": m.chart, "key": list(m.key),
                "verdict": m.verdict} for m in res.memberships]
    verdicts = {m.verdict for m in res.memberships}
    if res.passed:
        verdict = "pass"
    elif NOT_MEMBER in verdicts or not res.law.passed:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    window = res.window
    results = {
        "window": [0, window.top] if window.is_interval
        else [str(v) for v in sorted(window.members())],
        "law_residual": res.law.residual,
        "law_tol": tol,
        "coefficients": members,
    }
    return results, verdict


def _cmd_multiplicity(cfg, st: Settings):
    a = _load_atlas(cfg)
    F = _load_family(cfg, a, ("multiplicity", "F"), "multiplicity.F")
    G = _load_family(cfg, a, ("multiplicity", "G"), "multiplicity.G")
    additive = mu.additively_different(F, G, a, grid=st.grid)
    found = mu.locally_different(F, G, a, grid=st.grid, jobs=st.jobs)
    witnesses = []
    for key in sorted(found.outcomes):
        box = found.witnesses[key]
        witnesses.append({
            "chart": key[0], "key": list(key[1:]),
            "outcome": found.outcomes[key],
            "box": ([list(box.lo), list(box.hi)] if box else None),
        })
    results = {
        "additively_different": {f"{c},{i}": v for (c, i), v in
                                 sorted(additive.items())},
        "witnesses": witnesses,
    }
    return results, "pass" if found.all_found else "inconclusive"


def _cmd_residual(cfg, st: Settings):
    a = _load_atlas(cfg)
    cs = _load_connective(cfg)
    locals_ = _load_locals(cfg, a, required=True)
    omega = _load_family(cfg, a, ("residual", "omega"), "residual.omega")
    rep = mu.residual(locals_, cs, a, omega, grid=st.grid)
    results = {
        "values": {f"{c},{i}": v for (c, i), v in sorted(rep.values.items())},
        "worst": rep.worst,
        "tol": st.tol,
    }
    # a measurement, not a claim: only an explicit tolerance can fail it
    verdict = "pass" if st.tol is None or rep.worst <= st.tol else "fail"
    return results, verdict


_EXECUTORS = {
    "check-algebra": _cmd_check_algebra,
    "check-spaces": _cmd_check_spaces,
    "check-atlas": _cmd_check_atlas,
    "build-partition": _cmd_build_partition,
    "glue": _cmd_glue,
    "pipeline": _cmd_pipeline,
    "multiplicity": _cmd_multiplicity,
    "residual": _cmd_residual,
}

_VERDICT_CODES = {"pass": EXIT_PASS, "fail": EXIT_FAIL,
                  "inconclusive": EXIT_INCONCLUSIVE}


# ---------------------------------------------------------------------------
# entry points

def run(command: str, config_path, *, grid: int | None = None,
        tol: float | None = None, seed: int | None = None,
        jobs: int | None = None) -> tuple[Report, int]:
    """Execute one command against a config file.

    Returns the report and the exit code; all failures are reported,
    never raised, so callers can always inspect the report.
    """
    t0 = time.perf_counter()
    overrides = {"grid": grid, "tol": tol, "seed": seed, "jobs": jobs}
    digest = ""
    settings = Settings()
    results: dict = {}
    try:
        if command not in _EXECUTORS:
            raise ConfigError(f"unknown command {command!r}; expected one "
                              f"of {', '.join(COMMANDS)}")
        try:
            raw = Path(config_path).read_bytes()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        digest = hashlib.sha256(raw).hexdigest()
        try:
            cfg = tomllib.loads(raw.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"config does not parse: {e}") from None
        settings = _load_settings(cfg, overrides)
        results, verdict = _EXECUTORS[command](cfg, settings)
        code = _VERDICT_CODES[verdict]
    except ConfigError as e:
        results = {"error": str(e), "location": e.location}
        verdict, code = "error", EXIT_CONFIG
    except _PRECONDITION_ERRORS as e:
        results = {"error": str(e)}
        verdict, code = "error", EXIT_PRECONDITION
    report = Report(command, digest, settings, results, verdict,
                    {"total": time.perf_counter() - t0})
    return report, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):                    # usage errors exit 64
        raise ConfigError(message)


def main(argv=None) -> int:
    parser = _Parser(prog="regcalc",
                     description="Checks and constructions for glued "
                                 "connections, driven by a TOML config.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="TOML config path")
    parser.add_argument("--grid", type=int, default=None,
                        help="sampling resolution per axis")
    parser.add_argument("--tol", type=float, default=None,
                        help="acceptance tolerance")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed recorded in the report")
    parser.add_argument("--jobs", type=int, default=None,
                        help="parallel witness searches")
    parser.add_argument("--report", default=None, metavar="PATH",
                        help="also write the structured report here")
    parser.add_argument("--format", choices=("text", "structured"),
                        default="text", help="stdout format")
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"regcalc: {e}", file=sys.stderr)
        return EXIT_CONFIG
    report, code = run(args.command, args.config, grid=args.grid,
                       tol=args.tol, seed=args.seed, jobs=args.jobs)
    out = report.to_json() if args.format == "structured" \
        else report.to_text()
    sys.stdout.write(out)
    if report.verdict == "error":
        sys.stderr.write(f"regcalc: {report.results.get('error')}\n")
    if args.report:
        Path(args.report).write_text(report.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
