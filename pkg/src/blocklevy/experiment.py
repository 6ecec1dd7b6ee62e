"""Declarative experiments: an INI file in, a CSV and a JSON sidecar out.

A config holds one ``[experiment]`` section::

    [experiment]
    kinds = so, sp
    n = 2
    m = 4, 16, 32
    t = 1.0
    tables = tr(u[1,1]); tr(u[1,2] u[1,2]*)
    nsamples = 500
    seed = 7
    output = sweep.csv

``steps`` (default ``ceil(100 t)``), ``scheme`` (``geometric`` or ``euler``)
and ``cap`` (closure size limit) are optional. Tables are separated by ``;``
or newlines.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .drivers import DriverKind
from .group_sde import Scheme
from .moment_flow import DEFAULT_CAP, build_system, solve_moments_report
from .montecarlo import estimate_moments, worker_count
from .tables import TableSyntaxError, format_table, parse_table

CSV_COLUMNS = ("kind", "n", "m", "t", "table", "mean", "stderr", "nsamples", "limit", "gap")
SECTION = "experiment"
_KEYS = {"kinds", "n", "m", "t", "tables", "nsamples", "steps", "scheme", "seed", "output", "cap"}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentSpec:
    kinds: list
    n: int
    m_list: list
    t_list: list
    tables: list
    nsamples: int
    seed: int
    output: str = "results.csv"
    steps: int | None = None
    scheme: str = "geometric"
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        key = SECTION + "."
        try:
            self.kinds = [DriverKind.parse(k).value for k in self.kinds]
        except ValueError as exc:
            raise ConfigError(key + "kinds", str(exc)) from None
        if not self.kinds:
            raise ConfigError(key + "kinds", "at least one kind is required")
        if self.n < 1:
            raise ConfigError(key + "n", f"must be positive, got {self.n}")
        if not self.m_list or any(m < 1 for m in self.m_list):
            raise ConfigError(key + "m", f"need a non-empty list of positive sizes, got {self.m_list}")
        if not self.t_list or any(not math.isfinite(t) or t < 0 for t in self.t_list):
            raise ConfigError(key + "t", f"need a non-empty list of non-negative times, got {self.t_list}")
        if not self.tables:
            raise ConfigError(key + "tables", "at least one table is required")
        canon = []
        for text in self.tables:
            try:
                canon.append(format_table(parse_table(text, self.n)))
            except (TableSyntaxError, IndexError, ValueError) as exc:
                raise ConfigError(key + "tables", str(exc)) from None
        self.tables = canon
        if self.nsamples < 1:
            raise ConfigError(key + "nsamples", f"must be positive, got {self.nsamples}")
        if self.seed < 0:
            raise ConfigError(key + "seed", f"must be non-negative, got {self.seed}")
        if self.steps is not None and self.steps < 1:
            raise ConfigError(key + "steps", f"must be positive, got {self.steps}")
        try:
            self.scheme = Scheme.parse(self.scheme).value
        except ValueError as exc:
            raise ConfigError(key + "scheme", str(exc)) from None
        if self.cap < 1:
            raise ConfigError(key + "cap", f"must be positive, got {self.cap}")

    def to_dict(self) -> dict:
        return asdict(self)


def _split(raw: str, seps=","):
    for sep in seps[1:]:
        raw = raw.replace(sep, seps[0])
    return [part.strip() for part in raw.split(seps[0]) if part.strip()]


def _convert(key, raw, fn):
    try:
        return fn(raw)
    except ValueError:
        raise ConfigError(f"{SECTION}.{key}", f"cannot read {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentSpec:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(source, str(exc).splitlines()[0]) from None
    if not parser.has_section(SECTION):
        raise ConfigError(SECTION, "missing section")
    extra = set(parser.sections()) - {SECTION}
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown section; one experiment per file")
    sec = parser[SECTION]
    unknown = set(sec) - _KEYS
    if unknown:
        raise ConfigError(f"{SECTION}.{sorted(unknown)[0]}", "unknown key")
    for key in ("kinds", "n", "m", "t", "tables", "nsamples", "seed"):
        if key not in sec or not sec[key].strip():
            raise ConfigError(f"{SECTION}.{key}", "missing")

    def ints(key):
        return [_convert(key, x, int) for x in _split(sec[key])]

    return ExperimentSpec(
        kinds=_split(sec["kinds"]),
        n=_convert("n", sec["n"], int),
        m_list=ints("m"),
        t_list=[_convert("t", x, float) for x in _split(sec["t"])],
        tables=_split(sec["tables"], ";\n"),
        nsamples=_convert("nsamples", sec["nsamples"], int),
        seed=_convert("seed", sec["seed"], int),
        output=sec.get("output", "results.csv").strip(),
        steps=_convert("steps", sec["steps"], int) if sec.get("steps", "").strip() else None,
        scheme=sec.get("scheme", "geometric").strip(),
        cap=_convert("cap", sec["cap"], int) if sec.get("cap", "").strip() else DEFAULT_CAP,
    )


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def _num(x) -> str:
    return repr(float(x))


def limits_for(tables, n: int, t_list, cap: int = DEFAULT_CAP):
    """Limit values ``{(table text, t): value}`` plus solver diagnostics."""
    parsed = [parse_table(s, n) for s in tables]
    system = build_system(parsed, n, cap=cap)
    values, diagnostics = {}, []
    for t in sorted(set(t_list)):
        rep = solve_moments_report(system, t)
        diagnostics.append({"t": t, "max_rel_gap": rep.max_rel_gap,
                            "max_abs_gap_near_zero": rep.max_abs_gap_small, "ode_evaluations": rep.ode_evaluations})
        for text, tab in zip(tables, parsed):
            values[(text, t)] = float(rep.values[system.index(tab)])
    info = {
        "basis_size": system.dimension,
        "dimension_bounds": {str(k): v for k, v in sorted(system.bounds.items())},
        "within_bound": system.within_bound(),
        "solver": diagnostics,
    }
    return values, info


def csv_rows(spec: ExperimentSpec, workers: int | None = None):
    """Rows in output order: kind, then m, then t, then table, as listed in the config."""
    limits, info = limits_for(spec.tables, spec.n, spec.t_list, spec.cap)
    parsed = [parse_table(s, spec.n) for s in spec.tables]
    rows = []
    for kind in spec.kinds:
        for m in spec.m_list:
            est = estimate_moments(parsed, kind, spec.n, m, spec.t_list, spec.nsamples, spec.steps,
                                   spec.scheme, spec.seed, workers)
            for t in spec.t_list:
                for text, tab in zip(spec.tables, parsed):
                    e = est[(tab, float(t))]
                    limit = limits[(text, t)]
                    rows.append([kind, str(spec.n), str(m), _num(t), text, _num(e.mean), _num(e.stderr),
                                 str(e.nsamples), _num(limit), _num(abs(e.mean - limit))])
    return rows, info


def write_csv(rows, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


@dataclass
class ExperimentResult:
    csv_path: Path
    json_path: Path
    rows: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def run_experiment(spec: ExperimentSpec, output=None, workers: int | None = None) -> ExperimentResult:
    """Write the CSV to ``output`` (default ``spec.output``) and a ``.json`` sidecar next to it."""
    workers = worker_count(workers)
    csv_path = Path(output if output is not None else spec.output)
    rows, info = csv_rows(spec, workers)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(rows, csv_path)
    json_path = csv_path.with_suffix(".json")
    meta = {"spec": spec.to_dict(), "workers": workers, "columns": list(CSV_COLUMNS), "rows": len(rows), **info}
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return ExperimentResult(csv_path, json_path, rows, info)
