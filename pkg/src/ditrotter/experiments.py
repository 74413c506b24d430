"""Scaling sweeps over the Trotter step count M and log-log slope fits."""
from __future__ import annotations

import configparser
import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errorbounds import ErrorReport
from .errors import ConfigError, NonPositiveValue, TooFewPoints
from .models import MODELS, STRATEGIES, Model, build_model, report_row

CSV_COLUMNS = (
    "M",
    "infidelity_exact",
    "bound_sin_sum",
    "sum_Ln",
    "predicted_A_sum",
    "predicted_B_sum",
    "valid_flag",
)
NOISE_FLOOR = 1e-12


@dataclass
class SweepConfig:
    model: str = "lz"
    n_sites: int = 3
    delta: float = 1.0
    eps0: float | None = None
    coupling: float = 1.0
    horizon: float = 1.0
    m_min: int = 16
    m_max: int = 4096
    split: str = "naive"
    level: int = 0
    out: str | None = None
    field: float = 1.0
    omega: float = 1.0
    lambda_start: float = 0.2
    lambda_end: float = 0.8
    resolution: int | None = None
    workers: int = 1
    fit_min: int | None = None
    fit_max: int | None = None
    exact_tol: float = 1e-10

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.split not in STRATEGIES:
            raise ConfigError(f"unknown split {self.split!r}; choose from {', '.join(STRATEGIES)}")
        if self.split == "cd" and not self.model.endswith("-cd"):
            raise ConfigError(f"split 'cd' needs a counterdiabatic model, not {self.model!r}")
        for name in ("m_min", "m_max"):
            v = getattr(self, name)
            if v < 1 or v & (v - 1):
                raise ConfigError(f"{name} must be a positive power of two, got {v}")
        if self.m_max <= self.m_min:
            raise ConfigError("need m_max > m_min so that at least two M values are swept")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.resolution is not None and self.resolution % self.m_max:
            raise ConfigError(f"resolution {self.resolution} must be a multiple of m_max {self.m_max}")

    @property
    def grid_resolution(self) -> int:
        return self.resolution if self.resolution is not None else 8 * self.m_max

    def m_values(self) -> list[int]:
        out, m = [], self.m_min
        while m <= self.m_max:
            out.append(m)
            m *= 2
        return out

    def build_model(self) -> Model:
        return build_model(
            self.model,
            horizon=self.horizon,
            resolution=self.grid_resolution,
            delta=self.delta,
            eps0=self.eps0,
            n_sites=self.n_sites,
            coupling=self.coupling,
            lambda_start=self.lambda_start,
            lambda_end=self.lambda_end,
            field=self.field,
            omega=self.omega,
            exact_tol=self.exact_tol,
        )

    def echo(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: dict) -> SweepConfig:
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in data.items():
            key = key.strip()
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, known[key].type)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> SweepConfig:
        """Flat ``key = value`` file; ``#`` starts a comment."""
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string("[sweep]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if parser.sections() != ["sweep"]:
            raise ConfigError(f"config {path} must be flat key = value lines without [sections]")
        return cls.from_mapping(dict(parser["sweep"]))


def _coerce(key, raw, annotation):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    kind = str(annotation)
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


@dataclass
class ScalingResult:
    M: list
    infidelity: list
    bound: list
    predicted_A: list
    predicted_B: list
    slope: float
    intercept: float
    residual: float
    reports: list = field(default_factory=list, repr=False)

    def rows(self) -> list[dict]:
        return [report_row(r) for r in self.reports]


def fit_slope(Ms, ys):
    """OLS fit of ln y = slope * ln M + intercept; returns (slope, intercept, rms residual)."""
    Ms = np.asarray(Ms, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if Ms.size != ys.size:
        raise TooFewPoints("M and y sequences differ in length")
    if Ms.size < 2:
        raise TooFewPoints(f"need at least 2 points, got {Ms.size}")
    if np.any(ys <= 0) or np.any(Ms <= 0):
        raise NonPositiveValue("log-log fit needs strictly positive M and y")
    x, y = np.log(Ms), np.log(ys)
    if np.ptp(x) == 0:
        raise TooFewPoints("need at least 2 distinct M values")
    slope, intercept = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), res


def fit_reports(reports, fit_min=None, fit_max=None):
    """Slope over reports within [fit_min, fit_max] whose infidelity clears the noise floor."""
    lo = fit_min or 0
    hi = fit_max or math.inf
    pts = [(r.M, r.infidelity_sqrt) for r in reports if lo <= r.M <= hi and r.infidelity_sqrt > NOISE_FLOOR]
    if len(pts) < 2:
        raise TooFewPoints(f"only {len(pts)} points above the noise floor in the fit window")
    return fit_slope(*zip(*pts))


def format_float(x) -> str:
    return repr(float(x))


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([row["M"]] + [format_float(row[c]) for c in CSV_COLUMNS[1:-1]] + [row["valid_flag"]])


def summary_path(out) -> Path:
    return Path(out).with_suffix(".json")


def run_points(model: Model, strategy: str, m_values, level=0, workers=1):
    """ErrorReports ordered by M; failures are raised after finished points are returned.

    Returns (reports, error) where error is the first exception in M order
    (or None).  Later points are still computed so partial output is as
    complete as possible.
    """
    split = model.split(strategy)
    model.reference  # build once before workers share it

    def one(M):
        return model.run(strategy, M, level, split)[0]

    results: dict[int, ErrorReport] = {}
    error = None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {M: pool.submit(one, M) for M in m_values}
        for M in m_values:
            try:
                results[M] = futures[M].result()
            except Exception as exc:  # collected, re-raised by the caller
                if error is None:
                    error = exc
    return [results[M] for M in m_values if M in results], error


def run_sweep(cfg: SweepConfig, model: Model | None = None) -> ScalingResult:
    """Sweep M over [m_min, m_max] and fit the log-log slope of sqrt(1 - F).

    With ``cfg.out`` set, writes the CSV and the summary JSON next to it.
    Completed rows are flushed before any failure propagates.
    """
    model = cfg.build_model() if model is None else model
    reports, error = run_points(model, cfg.split, cfg.m_values(), cfg.level, cfg.workers)
    if cfg.out:
        write_csv(cfg.out, [report_row(r) for r in reports])
    if error is not None:
        raise error
    slope, intercept, residual = fit_reports(reports, cfg.fit_min, cfg.fit_max)
    result = ScalingResult(
        M=[r.M for r in reports],
        infidelity=[r.infidelity_sqrt for r in reports],
        bound=[r.bound_sin for r in reports],
        predicted_A=[r.predicted_A_sum for r in reports],
        predicted_B=[r.predicted_B_sum for r in reports],
        slope=slope,
        intercept=intercept,
        residual=residual,
        reports=reports,
    )
    if cfg.out:
        write_summary(summary_path(cfg.out), result, cfg)
    return result


def write_summary(path, result: ScalingResult, cfg: SweepConfig) -> None:
    data = {
        "slope": result.slope,
        "intercept": result.intercept,
        "residual": result.residual,
        "points": len(result.M),
        "config": cfg.echo(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def compare_splits(cfg: SweepConfig, strategies=("naive", "di"), model: Model | None = None) -> dict:
    """One ScalingResult per strategy plus per-M infidelity ratios (second / first)."""
    if len(strategies) != 2:
        raise ConfigError("compare needs exactly two strategies")
    model = cfg.build_model() if model is None else model
    results = {}
    for s in strategies:
        sub = SweepConfig(**{**cfg.echo(), "split": s, "out": None})
        results[s] = run_sweep(sub, model)
    a, b = (results[s] for s in strategies)
    ratios = [y_b / y_a if y_a > 0 else math.nan for y_a, y_b in zip(a.infidelity, b.infidelity)]
    return {"strategies": tuple(strategies), "results": results, "M": a.M, "ratio": ratios}


def write_comparison_csv(path, comparison) -> None:
    s1, s2 = comparison["strategies"]
    r1, r2 = (comparison["results"][s] for s in comparison["strategies"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", f"infidelity_{s1}", f"infidelity_{s2}", "ratio"])
        for M, a, b, q in zip(comparison["M"], r1.infidelity, r2.infidelity, comparison["ratio"]):
            w.writerow([M, format_float(a), format_float(b), format_float(q)])
