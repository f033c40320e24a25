"""Batch runner: read a JSON config, run one verification pipeline, write a report.

Exit status: 0 when every verdict holds, 1 when a mathematical verdict fails
(or a computation refuses to certify itself), 2 for bad input or I/O trouble.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import (BracketCheckFailed, ConfigError, InvalidChart, InvalidInput,
                     KontsevichError, NonRationalSpectrum, TruncationUnstable,
                     UnsupportedGeometry, WindowTooSmall)
from .exact import CoeffPoly, SparseMatrix, format_rational, rational
from .gauss_manin import (FilteredSpace, build_u_complex, family_h_dims,
                          residue_report, strictness_check, verify_theorem_iii)
from .global_complex import (GeometrySpec, assemble_cech, default_window,
                             grF_table, hyper_dims, independence_report)
from .local_model import (Chart, Mode, Presentation, Term, canonical_expand, to_primitive,
                          verify_nilpotency_identity, verify_shift_inclusions)

COMMANDS = ("hypercoh", "residue", "local-check", "strictness")
DEFAULT_SEED = 20240601
DEFAULT_GRID = [("0", "0"), ("0", "1"), ("0", "-1"), ("1", "0"), ("1", "1"),
                ("1", "-1"), ("-1", "0"), ("-1", "1"), ("-1", "-1")]

_KEYS = {
    "hypercoh": {"command", "dim", "f_exp", "h_axes", "inf_axes", "alpha", "grid", "window"},
    "residue": {"command", "dim", "f_exp", "h_axes", "inf_axes", "alpha", "trunc_n", "window",
                "h_degree"},
    "local-check": {"command", "charts", "seed", "samples"},
    "strictness": {"command", "filtered_space"},
}


@dataclass
class RunConfig:
    command: str
    raw: Dict[str, Any]
    grid: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    seed: int = DEFAULT_SEED


@dataclass
class RunReport:
    command: str
    input: Dict[str, Any]
    tables: Dict[str, Any]
    verdicts: Dict[str, bool]
    timing: Optional[Dict[str, float]] = None
    errors: List[str] = field(default_factory=list)
    status: int = 0

    def to_json(self) -> str:
        body = {"command": self.command, "input": self.input, "tables": self.tables,
                "verdicts": self.verdicts, "timing": self.timing}
        if self.errors:
            body["errors"] = self.errors
        return json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, Fraction):
        return format_rational(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


# -- parsing -------------------------------------------------------------------------

def parse_grid(text: str) -> List[Tuple[Fraction, Fraction]]:
    """``"a/b,c/d;e,f"`` -> ``[(a/b, c/d), (e, f)]``."""
    points = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"grid point {chunk!r} needs exactly two coordinates")
        points.append((_rat(parts[0]), _rat(parts[1])))
    return points


def _rat(value) -> Fraction:
    try:
        return rational(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not an exact rational: {value!r}") from exc


def _int(value, name) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return value


def load_config(path: str, grid: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return make_config(raw, grid, seed)


def make_config(raw: Dict[str, Any], grid: Optional[str] = None, seed: Optional[int] = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {command!r}")
    unknown = set(raw) - _KEYS[command]
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(sorted(unknown))}")
    cfg = RunConfig(command, dict(raw))
    if command == "hypercoh":
        if grid is not None:
            cfg.grid = parse_grid(grid)
        elif "grid" in raw:
            if not isinstance(raw["grid"], list):
                raise ConfigError("grid must be a list of [lambda, tau] string pairs")
            cfg.grid = []
            for pt in raw["grid"]:
                if not (isinstance(pt, (list, tuple)) and len(pt) == 2):
                    raise ConfigError(f"bad grid point {pt!r}")
                cfg.grid.append((_rat(pt[0]), _rat(pt[1])))
        else:
            cfg.grid = [(_rat(a), _rat(b)) for a, b in DEFAULT_GRID]
        if not cfg.grid:
            raise ConfigError("the grid is empty")
        if (0, 0) not in cfg.grid:
            raise ConfigError("the grid must contain the point (0, 0)")
    if seed is not None:
        cfg.seed = seed
    elif "seed" in raw:
        cfg.seed = _int(raw["seed"], "seed")
    return cfg


def _geometry(raw: Dict[str, Any]) -> GeometrySpec:
    try:
        dim = _int(raw["dim"], "dim")
        f_exp = tuple(_int(x, "f_exp") for x in raw["f_exp"])
    except KeyError as exc:
        raise ConfigError(f"missing geometry key {exc}") from None
    except TypeError:
        raise ConfigError("f_exp must be a list of integers") from None
    alpha = _rat(raw.get("alpha", "0"))
    h_axes = frozenset(_int(x, "h_axes") for x in raw.get("h_axes", []))
    inf = raw.get("inf_axes")
    inf_axes = None if inf is None else frozenset(_int(x, "inf_axes") for x in inf)
    try:
        return GeometrySpec(dim, f_exp, h_axes, alpha, inf_axes)
    except UnsupportedGeometry as exc:
        raise ConfigError(str(exc)) from exc


def _geometry_echo(g: GeometrySpec) -> Dict[str, Any]:
    return {"dim": g.dim, "f_exp": list(g.f_exp), "h_axes": sorted(g.h_axes),
            "inf_axes": sorted(g.inf_axes), "alpha": format_rational(g.alpha)}


def _optional_nat(raw, key) -> Optional[int]:
    if key not in raw or raw[key] is None:
        return None
    value = _int(raw[key], key)
    if value < 0:
        raise ConfigError(f"{key} must be nonnegative")
    return value


# -- commands ------------------------------------------------------------------------

def _run_hypercoh(cfg: RunConfig) -> RunReport:
    g = _geometry(cfg.raw)
    window = _optional_nat(cfg.raw, "window")
    table = independence_report(g, cfg.grid, window)
    grf = grF_table(g, window=window)
    rows = [{"lambda": format_rational(lam), "tau": format_rational(tau), "dims": dims}
            for (lam, tau), dims in table.rows]
    return RunReport(
        "hypercoh",
        {**_geometry_echo(g), "grid": [[format_rational(a), format_rational(b)] for a, b in cfg.grid],
         "window": window or default_window(g)},
        {"dims": rows, "line_bundle_oracle": table.oracle, "grF": grf.table},
        {"independence": table.verdict, "zero_point_oracle": table.oracle_ok,
         "euler_characteristic_constant": table.euler_constant, "grF_sums": grf.sums_ok,
         "grF_graded": grf.graded_ok})


def _run_residue(cfg: RunConfig) -> RunReport:
    g = _geometry(cfg.raw)
    trunc_n = _optional_nat(cfg.raw, "trunc_n")
    window = _optional_nat(cfg.raw, "window")
    u = build_u_complex(g, trunc_n, window)
    fam = family_h_dims(u)
    hyp = hyper_dims(assemble_cech(g, u.window), 1, 0)
    if "h_degree" in cfg.raw:
        degrees = [_int(cfg.raw["h_degree"], "h_degree")]
    else:
        degrees = [i for i, h in enumerate(fam) if h]
    verdicts = {"model_equivalence": fam == hyp}
    spectra = {}
    for i in degrees:
        rep = residue_report(g, i, u.trunc_n, u.window)
        spectra[str(i)] = None if rep.spectrum is None else [format_rational(b) for b in rep.spectrum]
        verdicts[f"rational_spectrum[{i}]"] = rep.violation is None
        verdicts[f"interval[{i}]"] = rep.interval_ok
        verdicts[f"stable[{i}]"] = bool(rep.stable)
        verdicts[f"cardinality[{i}]"] = rep.spectrum is not None and len(rep.spectrum) == fam[i]
        verdicts[f"strict[{i}]"] = verify_theorem_iii(g, i, u.trunc_n, u.window).verdict
    return RunReport(
        "residue",
        {**_geometry_echo(g), "trunc_n": u.trunc_n, "window": u.window, "h_degrees": degrees},
        {"family_dims": fam, "hyper_dims_1_0": hyp, "spectra": spectra},
        verdicts)


DEFAULT_CHARTS = [{"ell": 1, "ell1": 1, "k": [1]}, {"ell": 1, "ell1": 1, "k": [2]},
                  {"ell": 2, "ell1": 2, "k": [2, 3]}, {"ell": 3, "ell1": 2, "k": [2, 4, 0]}]


def _chart(desc) -> Chart:
    try:
        return Chart(_int(desc["ell"], "ell"), _int(desc["ell1"], "ell1"),
                     tuple(_int(x, "k") for x in desc["k"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad chart description {desc!r}") from exc
    except InvalidChart as exc:
        raise ConfigError(f"invalid chart {desc!r}: {exc}") from exc


def _jump_alphas(c: Chart) -> List[Fraction]:
    return sorted({Fraction(p, k) for k in c.k[:c.ell1] for p in range(1, k + 1)})


def _run_local(cfg: RunConfig) -> RunReport:
    charts = [_chart(s) for s in cfg.raw.get("charts", DEFAULT_CHARTS)]
    samples = _optional_nat(cfg.raw, "samples")
    samples = 20 if samples is None else samples
    rng = random.Random(cfg.seed)
    rows = []
    verdicts = {}
    for n, c in enumerate(charts):
        for mode in Mode:
            label = f"chart{n}.{mode.value}"
            shift = verify_shift_inclusions(c, mode)
            rows.append({"chart": n, "mode": mode.value, "check": "shift_inclusions",
                         "alpha": None, "holds": shift.holds})
            verdicts[f"{label}.shift_inclusions"] = shift.holds
            ok = True
            for alpha in _jump_alphas(c):
                if mode is Mode.TWISTOR and alpha == 1:
                    continue
                rep = verify_nilpotency_identity(c, alpha, mode)
                rows.append({"chart": n, "mode": mode.value, "check": "nilpotency",
                             "alpha": format_rational(alpha), "holds": rep.holds})
                ok &= rep.holds
            verdicts[f"{label}.nilpotency"] = ok
            trips = all(_round_trip(rng, c, mode) for _ in range(samples))
            rows.append({"chart": n, "mode": mode.value, "check": "primitive_round_trip",
                         "alpha": None, "holds": trips})
            verdicts[f"{label}.primitive_round_trip"] = trips
    echo = {"charts": [{"ell": c.ell, "ell1": c.ell1, "k": list(c.k)} for c in charts],
            "seed": cfg.seed, "samples": samples}
    return RunReport("local-check", echo, {"checks": rows}, verdicts)


def _round_trip(rng: random.Random, c: Chart, mode: Mode) -> bool:
    base = tuple(rng.randint(0, c.k[i]) if i < c.ell1 else 0 for i in range(c.ell))
    terms = []
    for _ in range(rng.randint(1, 3)):
        n = tuple(rng.randint(0, 2) for _ in range(c.ell))
        q = tuple(rng.randint(0, 2) for _ in range(c.ell))
        coeff = {0: rng.randint(-4, 4) or 1}
        if mode is Mode.TWISTOR:
            coeff[1] = rng.randint(-2, 2)
        terms.append(Term(n, q, rng.randint(0, 2), CoeffPoly(coeff)))
    p = Presentation(c, base, tuple(terms))
    return canonical_expand(to_primitive(p, mode), mode) == canonical_expand(p, mode)


def _run_strictness(cfg: RunConfig) -> RunReport:
    desc = cfg.raw.get("filtered_space")
    if not isinstance(desc, dict):
        raise ConfigError("strictness needs a filtered_space object")
    allowed = {"total_dim", "pieces", "n_mat", "filtration", "start"}
    if set(desc) - allowed:
        raise ConfigError(f"unknown filtered_space keys: {', '.join(sorted(set(desc) - allowed))}")
    try:
        n = _int(desc["total_dim"], "total_dim")
        n_mat = SparseMatrix.from_dense([[_rat(x) for x in row] for row in desc["n_mat"]])
        if not desc["n_mat"]:
            n_mat = SparseMatrix(n, n)
        fs = FilteredSpace(n, [[[_rat(x) for x in v] for v in piece] for piece in desc["pieces"]],
                           n_mat, [[[_rat(x) for x in v] for v in f] for f in desc["filtration"]],
                           _int(desc.get("start", 0), "start"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad filtered_space: {exc}") from exc
    verdict = strictness_check(fs)
    return RunReport("strictness", {"filtered_space": desc},
                     {"strictness": [{"total_dim": n, "strict": verdict}]}, {"strict": verdict})


_RUNNERS = {"hypercoh": _run_hypercoh, "residue": _run_residue,
            "local-check": _run_local, "strictness": _run_strictness}

_INPUT_ERRORS = (ConfigError, InvalidInput, UnsupportedGeometry, InvalidChart, WindowTooSmall)
_MATH_ERRORS = (TruncationUnstable, NonRationalSpectrum, BracketCheckFailed)


def run(cfg: RunConfig, timing: bool = False) -> RunReport:
    """Dispatch a validated config; never raises for library errors."""
    start = time.perf_counter()
    try:
        report = _RUNNERS[cfg.command](cfg)
        report.status = 0 if all(report.verdicts.values()) else 1
    except _INPUT_ERRORS as exc:
        report = RunReport(cfg.command, cfg.raw, {}, {}, errors=[f"{type(exc).__name__}: {exc}"], status=2)
    except _MATH_ERRORS as exc:
        report = RunReport(cfg.command, cfg.raw, {}, {"certified": False},
                           errors=[f"{type(exc).__name__}: {exc}"], status=1)
    except KontsevichError as exc:
        report = RunReport(cfg.command, cfg.raw, {}, {}, errors=[f"{type(exc).__name__}: {exc}"], status=2)
    if timing:
        report.timing = {"seconds": round(time.perf_counter() - start, 3)}
    return report


# -- output --------------------------------------------------------------------------

def to_csv(report: RunReport) -> str:
    """The main table of the report as CSV (one row per grid point for dims)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    t = report.tables
    if report.command == "hypercoh" and "dims" in t:
        width = len(t["dims"][0]["dims"]) if t["dims"] else 0
        w.writerow(["lambda", "tau"] + [f"h{i}" for i in range(width)])
        for row in t["dims"]:
            w.writerow([row["lambda"], row["tau"]] + row["dims"])
    elif report.command == "residue" and "spectra" in t:
        w.writerow(["h_degree", "eigenvalue"])
        for deg, spectrum in sorted(t["spectra"].items()):
            for b in spectrum or []:
                w.writerow([deg, b])
    elif report.command == "local-check" and "checks" in t:
        w.writerow(["chart", "mode", "check", "alpha", "holds"])
        for row in t["checks"]:
            w.writerow([row["chart"], row["mode"], row["check"], row["alpha"] or "", row["holds"]])
    else:
        w.writerow(["verdict", "value"])
        for name, value in sorted(report.verdicts.items()):
            w.writerow([name, value])
        for err in report.errors:
            w.writerow(["error", err])
    return buf.getvalue()


def emit(report: RunReport, fmt: str = "json", out: Optional[str] = None) -> None:
    text = report.to_json() if fmt == "json" else to_csv(report)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kontsevich", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--seed", type=int, help="seed for randomized local checks")
    ap.add_argument("--grid", help='grid of (lambda, tau) points, e.g. "0,0;1/2,-1"')
    ap.add_argument("--timing", action="store_true", help="record wall time in the report")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = load_config(args.config, args.grid, args.seed)
    except ConfigError as exc:
        report = RunReport("invalid", {"config": args.config}, {}, {},
                           errors=[f"ConfigError: {exc}"], status=2)
    else:
        report = run(cfg, timing=args.timing)
    try:
        emit(report, args.format, args.out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return 2
    for err in report.errors:
        print(err, file=sys.stderr)
    return report.status


if __name__ == "__main__":
    sys.exit(main())
