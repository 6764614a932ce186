"""Seeded batches, parameter sweeps, summary statistics and CSV files."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from statsmodels.stats.diagnostic import anderson_statistic, normal_ad

from .engine import ConfigError, Outcome, RunRecord, ScenarioConfig, parse_value, run

# numeric fields that make sense as a sweep axis
SWEEPABLE = tuple(
    f.name for f in dataclasses.fields(ScenarioConfig)
    if f.type in ("int", "float", "Optional[float]") and f.name != "seed"
)

RECORD_CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(ScenarioConfig) if f.name != "seed")
RECORD_COLUMNS = ("seed",) + RECORD_CONFIG_FIELDS + ("outcome", "escort_ticks", "clusterless_final")
SUMMARY_COLUMNS = ("parameter", "value", "n_success", "n_timeout", "mean_ticks", "std_ticks",
                   "min_ticks", "max_ticks", "mean_clusterless", "ad_statistic", "ad_p_value")


class StatisticsError(ValueError):
    """A test that is undefined for the given samples."""


# -- statistics -------------------------------------------------------------

def anderson_darling_normality(samples: Sequence[float]) -> Tuple[float, float]:
    """Anderson-Darling test of normality with mean and variance estimated.

    Returns ``(A2*, p)`` where ``A2* = A2 * (1 + 0.75/n + 2.25/n**2)`` and *p*
    comes from D'Agostino's piecewise exponential fit in A2*:

    ======================  ==========================================
    ``A2* < 0.2``           ``1 - exp(-13.436 + 101.14 a - 223.73 a^2)``
    ``0.2 <= A2* < 0.34``   ``1 - exp(-8.318 + 42.796 a - 59.938 a^2)``
    ``0.34 <= A2* < 0.6``   ``exp(0.9177 - 4.279 a - 1.38 a^2)``
    ``0.6 <= A2* <= 13``    ``exp(1.2937 - 5.709 a + 0.0186 a^2)``
    ``A2* > 13``            ``0``
    ======================  ==========================================
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 8:
        raise StatisticsError("Anderson-Darling needs at least 8 samples")
    if not np.all(np.isfinite(x)) or np.ptp(x) == 0.0:
        raise StatisticsError("Anderson-Darling is undefined for zero variance")
    n = x.size
    a2 = float(anderson_statistic(x, dist="norm", fit=True))
    _, p = normal_ad(x)
    return a2 * (1.0 + 0.75 / n + 2.25 / n ** 2), float(p)


def mann_whitney_greater(a: Sequence[float], b: Sequence[float]) -> float:
    """One-sided p-value for *a* tending to exceed *b*."""
    return float(stats.mannwhitneyu(a, b, alternative="greater").pvalue)


def spearman(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    res = stats.spearmanr(x, y)
    return float(res.statistic), float(res.pvalue)


# -- sweep description ------------------------------------------------------

def parse_values(parameter: str, text: str) -> List:
    """Values from ``a,b,c`` or ``start:stop:step`` (stop included when hit)."""
    if parameter not in SWEEPABLE:
        raise ConfigError(f"{parameter!r} is not a sweepable parameter")
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("range must be START:STOP:STEP")
        start, stop, step = (parse_value(parameter, p) for p in parts)
        if None in (start, stop, step) or step <= 0 or stop < start:
            raise ConfigError("range needs STEP > 0 and STOP >= START")
        if all(isinstance(v, int) for v in (start, stop, step)):
            return list(range(start, stop + 1, step))
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        # rounding keeps 0.1-style steps free of float drift
        return [round(start + k * step, 12) for k in range(count)]
    vals = [parse_value(parameter, t) for t in text.split(",") if t.strip()]
    if not vals:
        raise ConfigError("empty value list")
    return vals


@dataclass
class SweepSpec:
    parameter: str
    values: List
    runs_per_value: int = 100

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ConfigError(f"{self.parameter!r} is not a sweepable parameter")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.runs_per_value < 1:
            raise ConfigError("runs_per_value must be >= 1")

    @classmethod
    def parse(cls, parameter: str, text: str, runs_per_value: int = 100) -> "SweepSpec":
        return cls(parameter, parse_values(parameter, text), runs_per_value)


@dataclass
class SummaryRow:
    parameter: str
    value: object
    n_success: int
    n_timeout: int
    mean_ticks: float = math.nan
    std_ticks: float = math.nan
    min_ticks: float = math.nan
    max_ticks: float = math.nan
    mean_clusterless: float = math.nan
    ad_statistic: float = math.nan
    ad_p_value: float = math.nan

    @property
    def runs(self) -> int:
        return self.n_success + self.n_timeout

    @property
    def success_rate(self) -> float:
        return self.n_success / self.runs if self.runs else math.nan


def summarize(parameter: str, value, records: Sequence[RunRecord]) -> SummaryRow:
    """Escort-time statistics over the successful runs only."""
    ok = np.array([r.escort_ticks for r in records if r.success], dtype=float)
    row = SummaryRow(parameter, value, int(ok.size), len(records) - int(ok.size))
    if records:
        row.mean_clusterless = float(np.mean([r.clusterless_final for r in records]))
    if ok.size:
        row.mean_ticks = float(ok.mean())
        row.min_ticks = float(ok.min())
        row.max_ticks = float(ok.max())
    if ok.size > 1:
        row.std_ticks = float(ok.std(ddof=1))
    try:
        row.ad_statistic, row.ad_p_value = anderson_darling_normality(ok)
    except StatisticsError:
        pass
    return row


# -- execution --------------------------------------------------------------

def _run_one(cfg: ScenarioConfig) -> RunRecord:
    return run(cfg)


def run_configs(configs: Sequence[ScenarioConfig], workers: int = 1) -> List[RunRecord]:
    """Run every config; results come back in input order whatever *workers* is."""
    if workers <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, configs, chunksize=max(1, len(configs) // (4 * workers))))


def batch(base: ScenarioConfig, runs: int, workers: int = 1) -> List[RunRecord]:
    """Runs with seeds ``base.seed .. base.seed + runs - 1``."""
    if runs < 0:
        raise ConfigError("runs must be non-negative")
    return run_configs([base.replace(seed=base.seed + i) for i in range(runs)], workers)


def sweep_configs(base: ScenarioConfig, spec: SweepSpec) -> List[List[ScenarioConfig]]:
    """Per value ``j``, run ``i`` gets seed ``base.seed + j*runs + i``."""
    k = spec.runs_per_value
    cells = []
    for j, v in enumerate(spec.values):
        try:
            cell = base.replace(**{spec.parameter: v})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{spec.parameter}={v!r}: {exc}") from exc
        cells.append([cell.replace(seed=base.seed + j * k + i) for i in range(k)])
    return cells


def sweep(base: ScenarioConfig, spec: SweepSpec, workers: int = 1,
          records_out: Optional[List[RunRecord]] = None) -> List[SummaryRow]:
    """One summary row per value, ordered by value.

    Every run record is appended to *records_out* when it is given.
    """
    cells = sweep_configs(base, spec)
    flat = [c for cell in cells for c in cell]
    recs = run_configs(flat, workers)
    rows = []
    k = spec.runs_per_value
    for j, v in enumerate(spec.values):
        rows.append((v, summarize(spec.parameter, v, recs[j * k:(j + 1) * k])))
        if records_out is not None:
            records_out.extend(recs[j * k:(j + 1) * k])
    return [r for _, r in sorted(rows, key=lambda t: _value_key(t[0]))]


def _value_key(v):
    # None (an unset optional) sorts first
    return (v is not None, 0.0 if v is None else v)


# -- CSV --------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, Outcome):
        return v.value
    return str(v)


def _write(path, header: Iterable[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_records_csv(records: Iterable[RunRecord], path) -> None:
    def rows():
        for r in records:
            snap = r.config.scalars()
            yield ([r.seed] + [snap[k] for k in RECORD_CONFIG_FIELDS]
                   + [r.outcome, r.escort_ticks, r.clusterless_final])
    _write(path, RECORD_COLUMNS, rows())


def emit_summary_csv(rows: Iterable[SummaryRow], path) -> None:
    _write(path, SUMMARY_COLUMNS,
           ([getattr(r, k) for k in SUMMARY_COLUMNS] for r in rows))


def parse_records_csv(path) -> List[RunRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"{os.fspath(path)}: unexpected header")
        for line in reader:
            seed = int(line["seed"])
            cfg = ScenarioConfig(seed=seed, **{k: parse_value(k, line[k]) for k in RECORD_CONFIG_FIELDS})
            out.append(RunRecord(seed=seed, outcome=Outcome(line["outcome"]),
                                 escort_ticks=int(line["escort_ticks"]),
                                 clusterless_final=int(line["clusterless_final"]), config=cfg))
    return out


def _num(text: str) -> float:
    return math.nan if text == "" else float(text)


def parse_summary_csv(path) -> List[SummaryRow]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_COLUMNS:
            raise ValueError(f"{os.fspath(path)}: unexpected header")
        for line in reader:
            param = line["parameter"]
            out.append(SummaryRow(
                parameter=param,
                value=parse_value(param, line["value"]),
                n_success=int(line["n_success"]),
                n_timeout=int(line["n_timeout"]),
                **{k: _num(line[k]) for k in SUMMARY_COLUMNS[4:]},
            ))
    return out


def summaries_from_records(parameter: str, records: Sequence[RunRecord]) -> List[SummaryRow]:
    """Regroup per-run records by the value of *parameter* and summarise each group."""
    groups: Dict[object, List[RunRecord]] = {}
    for r in records:
        groups.setdefault(getattr(r.config, parameter), []).append(r)
    return [summarize(parameter, v, sorted(groups[v], key=lambda r: r.seed)) for v in sorted(groups, key=_value_key)]
