"""Experiment configuration, seeded Monte Carlo orchestration and report emission.

Config files are flat ``key = value`` lines; ``#`` starts a comment. Lists are
comma separated. Inline instances (``instance = inline``) give their tables as
whitespace-separated numbers in row-major order. Every trial draws from
``np.random.default_rng([seed, trial_index])`` with trial indices running
across the whole sweep, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import instances as inst
from .gp import ChannelSpec, GPTrialRecord, gp_rate_thresholds, run_gp_trial
from .lattice import LatticeParams
from .quantization import clipping_sweep, default_schedule, mi_refinement_sweep, sweep_to_csv
from .verify import (
    LemmaReport,
    estimate_typicality_exponent,
    verify_g_uniform,
    verify_pairwise_independence,
    verify_parity_uniform_independent,
    verify_rank_distribution,
)
from .wz import SourceSpec, WZTrialRecord, run_wz_trial, squared_error, wz_rate_thresholds

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "SweepReport",
    "RunResult",
    "gp_kl",
    "wz_kl",
    "run",
    "run_trials",
    "emit_plotdata",
    "parse_plotdata",
    "aggregate_gp",
    "aggregate_wz",
    "write_outputs",
    "MODES",
]

MODES = ("gp", "wz", "verify", "exponent", "quantize")


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__((", ".join(where) + ": " if where else "") + msg)
        self.line = line
        self.key = key


@dataclass
class ExperimentConfig:
    mode: str
    instance: str = ""
    n_values: tuple = ()
    rate_multipliers: tuple = ()
    k: int | None = None
    l: int | None = None  # noqa: E741
    p: int | None = None
    gamma: float | None = None
    eps: float | None = None
    trials: int | None = None
    seed: int = 0
    out: str = ""
    workers: int = 1
    samples: int | None = None
    lemma_instances: tuple = ((3, 1, 1, 1), (3, 2, 1, 1))
    rank_instances: tuple = ((3, 2, 1), (3, 2, 2), (5, 2, 1))
    quant_steps: int = 6
    quant_axes: str = "both"
    ref_points: int = 41
    clip_levels: tuple = (1.0, 2.0, 4.0, 8.0)
    tables: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}", key="mode")
        d = inst.DEFAULTS.get(self.instance)
        if self.instance and self.instance != "inline" and d is None:
            raise ConfigError(f"unknown instance {self.instance!r}", key="instance")
        if d is not None and d.mode != self.mode:
            raise ConfigError(f"instance {self.instance!r} belongs to mode {d.mode!r}", key="instance")
        if d is not None:
            self.n_values = self.n_values or d.n_values
            self.rate_multipliers = self.rate_multipliers or d.rate_multipliers
            self.eps = d.eps if self.eps is None else self.eps
            if self.mode == "exponent":
                self.samples = d.trials if self.samples is None else self.samples
            elif d.trials and self.trials is None:
                self.trials = d.trials
        self._validate()

    def _validate(self):
        pos_int = ["trials", "workers", "samples", "p", "quant_steps"]
        for key in pos_int:
            v = getattr(self, key)
            if v is not None and int(v) <= 0:
                raise ConfigError("must be positive", key=key)
        for key in ("gamma", "eps"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                raise ConfigError("must be positive", key=key)
        if any(int(n) <= 0 for n in self.n_values):
            raise ConfigError("block lengths must be positive", key="n")
        if any(not 0 < r <= 2 for r in self.rate_multipliers):
            raise ConfigError("rate multipliers must lie in (0, 2]", key="rate_multipliers")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative", key="seed")
        for key in ("k", "l"):
            v = getattr(self, key)
            if v is not None and v < 0:
                raise ConfigError("must be non-negative", key=key)
        if self.quant_axes not in ("u", "y", "both"):
            raise ConfigError("must be u, y or both", key="quant_axes")
        if self.mode in ("gp", "wz"):
            if not self.instance:
                raise ConfigError("gp/wz runs need an instance", key="instance")
            if not self.n_values or (not self.rate_multipliers and (self.k is None or self.l is None)):
                raise ConfigError("need n and either rate_multipliers or both k and l", key="n")
            if self.eps is None or self.trials is None:
                raise ConfigError("need eps and trials", key="eps")


_LIST_INT = {"n": "n_values"}
_LIST_FLOAT = {"rate_multipliers": "rate_multipliers", "clip_levels": "clip_levels"}
_INT = {"k", "l", "p", "trials", "seed", "workers", "samples", "quant_steps", "ref_points"}
_FLOAT = {"gamma", "eps"}
_STR = {"mode", "instance", "out", "quant_axes"}
_TUPLES = {"lemma_instances": 4, "rank_instances": 3}
_TABLE_KEYS = {
    "s_letters", "p_s", "p_u_given_s", "x_letters", "w_x_given_us", "y_letters", "w_y_given_xs",
    "cost", "budget", "p_xs", "w_u_given_x", "f", "d",
}


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a config text; ``overrides`` (already typed) win over file values."""
    kw: dict = {}
    tables: dict = {}
    seen: set = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError("duplicate key", line=lineno, key=key)
        seen.add(key)
        try:
            if key in _LIST_INT:
                kw[_LIST_INT[key]] = tuple(int(v) for v in value.split(","))
            elif key in _LIST_FLOAT:
                kw[_LIST_FLOAT[key]] = tuple(float(v) for v in value.split(","))
            elif key in _INT:
                kw[key] = int(value)
            elif key in _FLOAT:
                kw[key] = float(value)
            elif key in _STR:
                kw[key] = value
            elif key in _TUPLES:
                items = [tuple(int(x) for x in item.split(":")) for item in value.split(",")]
                if any(len(t) != _TUPLES[key] for t in items):
                    raise ValueError(f"each item needs {_TUPLES[key]} ':'-separated integers")
                kw[key] = tuple(items)
            elif key in _TABLE_KEYS:
                tables[key] = value
            else:
                raise ConfigError("unknown key", line=lineno, key=key)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"bad value {value!r} ({e})", line=lineno, key=key) from None
    kw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "mode" not in kw:
        raise ConfigError("missing required key", key="mode")
    try:
        return ExperimentConfig(tables=tables, **kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


# -- inline instances -----------------------------------------------------------------


def _numbers(tables: dict, key: str, shape=None) -> np.ndarray:
    if key not in tables:
        raise ConfigError("missing inline table", key=key)
    try:
        a = np.array([float(v) for v in tables[key].split()])
        return a.reshape(shape) if shape is not None else a
    except ValueError as e:
        raise ConfigError(f"bad table ({e})", key=key) from None


def _inline_lattice(cfg: ExperimentConfig) -> LatticeParams:
    if cfg.p is None or cfg.gamma is None:
        raise ConfigError("inline instances need p and gamma", key="p")
    try:
        return LatticeParams(cfg.gamma, cfg.p)
    except ValueError as e:
        raise ConfigError(str(e), key="p") from None


def _inline_channel(cfg: ExperimentConfig) -> ChannelSpec:
    t = cfg.tables
    lat = _inline_lattice(cfg)
    s = _numbers(t, "s_letters")
    x = _numbers(t, "x_letters")
    y = _numbers(t, "y_letters")
    costs = {"zero": inst.zero_cost, "power": inst.input_power}
    cost_name = t.get("cost", "zero")
    if cost_name not in costs:
        raise ConfigError("cost must be zero or power", key="cost")
    try:
        return ChannelSpec(
            lat, s, _numbers(t, "p_s", (s.size,)),
            _numbers(t, "p_u_given_s", (s.size, lat.p)),
            x, _numbers(t, "w_x_given_us", (lat.p, s.size, x.size)),
            y, _numbers(t, "w_y_given_xs", (x.size, s.size, y.size)),
            cost=costs[cost_name], budget=float(t.get("budget", "inf")), name="inline",
        )
    except ValueError as e:
        raise ConfigError(f"invalid inline channel ({e})", key="instance") from None


def _inline_source(cfg: ExperimentConfig) -> SourceSpec:
    t = cfg.tables
    lat = _inline_lattice(cfg)
    x = _numbers(t, "x_letters")
    s = _numbers(t, "s_letters")
    try:
        p_xs = _numbers(t, "p_xs", (x.size, s.size))
        W = _numbers(t, "w_u_given_x", (x.size, lat.p))
        kind = t.get("f", "u")
        if kind == "u":
            f = inst.TableReconstruction(s, lat.alphabet(), np.tile(lat.alphabet(), (s.size, 1)))
        elif kind == "s":
            f = inst.TableReconstruction(s, lat.alphabet(), np.tile(s[:, None], (1, lat.p)))
        elif kind == "mmse":
            f = inst.TableReconstruction.mmse(x, s, lat.alphabet(), p_xs[:, :, None] * W[:, None, :])
        else:
            raise ConfigError("f must be u, s or mmse", key="f")
        if t.get("d", "squared") != "squared":
            raise ConfigError("only squared distortion is supported", key="d")
        spec = SourceSpec(lat, x, s, p_xs, W, f, squared_error, name="inline")
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid inline source ({e})", key="instance") from None
    spec.target = spec.expected_distortion()
    return spec


def _build_spec(cfg: ExperimentConfig):
    if cfg.instance == "inline":
        return _inline_channel(cfg) if cfg.mode == "gp" else _inline_source(cfg)
    spec = inst.get_instance(cfg.instance)
    if cfg.p is not None and cfg.p != spec.p:
        raise ConfigError(f"instance {cfg.instance!r} fixes p = {spec.p}", key="p")
    if cfg.gamma is not None and cfg.gamma != spec.lattice.gamma:
        raise ConfigError(f"instance {cfg.instance!r} fixes gamma = {spec.lattice.gamma}", key="gamma")
    return spec


# -- (k, l) policies ------------------------------------------------------------------


def gp_kl(n: int, r: float, enc: float, dec: float, p: int) -> tuple[int, int]:
    """(k, l) for rate multiplier r.

    k + l = round(r n dec / log2 p) puts (k+l)/n log p at r times the decoding
    bound; l is the least value with l/n log p strictly above the encoding
    bound (0 when that bound is 0).
    """
    lp = math.log2(p)
    total = int(round(r * n * dec / lp))
    l = math.floor(n * enc / lp) + 1 if enc > 0 else 0  # noqa: E741
    return max(total - l, 0), l


def wz_kl(n: int, r: float, enc: float, dec: float, p: int) -> tuple[int, int]:
    """(k, l) for rate multiplier r: l/n log p at (2 - r) times the encoding bound
    (rounded down) and (k+l)/n log p at r times the decoding bound (rounded up),
    so r > 1 sits strictly inside both."""
    lp = math.log2(p)
    l = max(0, math.floor((2 - r) * n * enc / lp))  # noqa: E741
    total = min(n, math.ceil(r * n * dec / lp))
    return max(total - l, 0), l


# -- reports --------------------------------------------------------------------------


@dataclass
class SweepReport:
    mode: str
    columns: tuple
    rows: list
    thresholds: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return _csv([self.columns] + [[_fmt(r[c]) for c in self.columns] for r in self.rows])


@dataclass
class RunResult:
    config: ExperimentConfig
    files: dict
    report: object
    exit_code: int = 0


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _halfwidth(rate: float, n: int) -> float:
    return 1.96 * math.sqrt(rate * (1 - rate) / n) if n else math.nan


def _mean_hw(values: list) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    a = np.asarray(values, dtype=float)
    hw = 1.96 * float(a.std(ddof=1)) / math.sqrt(a.size) if a.size > 1 else math.nan
    return float(a.mean()), hw


def emit_plotdata(report: SweepReport) -> str:
    """Whitespace-separated numeric columns under a commented header."""
    lines = ["# " + " ".join(report.columns)]
    for r in report.rows:
        lines.append(" ".join(_fmt(float(r[c]) if not isinstance(r[c], (bool, np.bool_)) else int(r[c]))
                              for c in report.columns))
    return "\n".join(lines) + "\n"


def parse_plotdata(text: str) -> tuple[list[str], np.ndarray]:
    lines = text.splitlines()
    header = lines[0].lstrip("#").split()
    data = np.array([[float(v) for v in ln.split()] for ln in lines[1:] if ln.strip()]).reshape(-1, len(header))
    return header, data


# -- trial execution ------------------------------------------------------------------


def _gp_job(spec, n, k, l, eps, seed, trial):  # noqa: E741
    return run_gp_trial(spec, n, k, l, eps, np.random.default_rng([seed, trial]), trial, seed)


def _wz_job(spec, n, k, l, eps, seed, trial):  # noqa: E741
    return run_wz_trial(spec, n, k, l, eps, np.random.default_rng([seed, trial]), trial, seed)


def run_trials(job: Callable, indices: Sequence[int], workers: int = 1) -> list:
    """Map job over trial indices; results come back in index order."""
    if workers > 1 and len(indices) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(job, indices, chunksize=max(1, len(indices) // (4 * workers))))
    return [job(i) for i in indices]


GP_SUMMARY = ("n", "rate_multiplier", "k", "l", "trials", "encoder_failure_rate", "decode_error_rate",
              "decode_error_halfwidth", "decode_error_given_encoded", "mean_cost", "cost_halfwidth",
              "budget_violation_rate")
WZ_SUMMARY = ("n", "rate_multiplier", "k", "l", "trials", "encoder_failure_rate", "joint_success_rate",
              "success_halfwidth", "mean_distortion", "distortion_halfwidth", "analytic_distortion")


def aggregate_gp(rows: list[dict], budget: float) -> dict:
    """Summary of GP trial rows (dicts keyed by CSV field, values typed)."""
    T = len(rows)
    enc = sum(r["encoder_found"] for r in rows)
    ok = sum(r["decoded_ok"] for r in rows)
    costs = [r["block_cost"] for r in rows if r["encoder_found"]]
    err = 1 - ok / T
    mc, hw = _mean_hw(costs)
    return dict(
        trials=T, encoder_failure_rate=1 - enc / T, decode_error_rate=err,
        decode_error_halfwidth=_halfwidth(err, T),
        decode_error_given_encoded=1 - ok / enc if enc else math.nan,
        mean_cost=mc, cost_halfwidth=hw,
        budget_violation_rate=(sum(c > budget for c in costs) / len(costs)) if costs else math.nan,
    )


def aggregate_wz(rows: list[dict], analytic: float) -> dict:
    T = len(rows)
    enc = sum(r["encoder_found"] for r in rows)
    both = sum(r["encoder_found"] and r["decoder_unique"] for r in rows)
    ds = [r["block_distortion"] for r in rows if r["encoder_found"] and r["decoder_unique"]]
    md, hw = _mean_hw(ds)
    return dict(
        trials=T, encoder_failure_rate=1 - enc / T, joint_success_rate=both / T,
        success_halfwidth=_halfwidth(both / T, T), mean_distortion=md, distortion_halfwidth=hw,
        analytic_distortion=analytic,
    )


def _typed_rows(text: str, int_fields: set, float_fields: set) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        d = {}
        for k, v in r.items():
            d[k] = float(v) if k in float_fields else int(v) if k in int_fields else v
        out.append(d)
    return out


def _run_sweep(cfg: ExperimentConfig) -> RunResult:
    spec = _build_spec(cfg)
    gp = cfg.mode == "gp"
    if gp:
        th = gp_rate_thresholds(spec.measure_suy(), spec.lattice)
        policy, job_fn, rec_cls, summary_cols = gp_kl, _gp_job, GPTrialRecord, GP_SUMMARY
    else:
        th = wz_rate_thresholds(spec.measure_xsu(), spec.lattice)
        policy, job_fn, rec_cls, summary_cols = wz_kl, _wz_job, WZTrialRecord, WZ_SUMMARY
    points = []
    for n in cfg.n_values:
        for r in cfg.rate_multipliers or (math.nan,):
            if cfg.k is not None and cfg.l is not None:
                k, l = cfg.k, cfg.l  # noqa: E741
            else:
                k, l = policy(n, r, th.enc_bound, th.dec_bound, spec.p)  # noqa: E741
            points.append((n, r, k, l))
    trial_lines = [list(rec_cls.CSV_FIELDS)]
    summary = []
    offset = 0
    for n, r, k, l in points:  # noqa: E741
        job = partial(job_fn, spec, n, k, l, cfg.eps, cfg.seed)
        recs = run_trials(job, list(range(offset, offset + cfg.trials)), cfg.workers)
        offset += cfg.trials
        trial_lines += [rec.row() for rec in recs]
        dicts = [{f.name: getattr(rec, f.name) for f in fields(rec)} for rec in recs]
        agg = aggregate_gp(dicts, spec.budget) if gp else aggregate_wz(dicts, spec.expected_distortion())
        summary.append(dict(n=n, rate_multiplier=r, k=k, l=l, **agg))
    trials_csv = _csv(trial_lines)
    report = SweepReport(cfg.mode, summary_cols, summary,
                         dict(enc_bound=th.enc_bound, dec_bound=th.dec_bound, rate=th.rate))
    _self_check(cfg, spec, trials_csv, points, report)
    files = {
        f"{cfg.mode}_trials.csv": trials_csv,
        f"{cfg.mode}_summary.csv": report.to_csv(),
        f"{cfg.mode}_plot.dat": emit_plotdata(report),
        f"{cfg.mode}_thresholds.txt": "".join(f"{k} = {v!r}\n" for k, v in report.thresholds.items()),
    }
    return RunResult(cfg, files, report)


def _self_check(cfg, spec, trials_csv, points, report: SweepReport) -> None:
    """Aggregates recomputed from the emitted per-trial CSV must match exactly."""
    gp = cfg.mode == "gp"
    flag = {"encoder_found", "decoded_ok", "decoder_unique"}
    ints = {"trial", "n", "k", "l", "p", "stacked_rank", "rank_H"}
    floats = {"gamma", "eps", "block_cost", "block_distortion"}
    rows = _typed_rows(trials_csv, ints | flag, floats)
    for r in rows:
        for f in flag & r.keys():
            r[f] = bool(r[f])
    for i, summary in enumerate(report.rows):
        chunk = rows[i * cfg.trials:(i + 1) * cfg.trials]
        agg = aggregate_gp(chunk, spec.budget) if gp else aggregate_wz(chunk, spec.expected_distortion())
        for key, val in agg.items():
            a, b = summary[key], val
            if not (a == b or (isinstance(a, float) and math.isnan(a) and math.isnan(b))):
                raise RuntimeError(f"aggregate {key} at point {points[i]} disagrees with the trial CSV")


def _run_verify(cfg: ExperimentConfig) -> RunResult:
    reports: list[LemmaReport] = []
    w = cfg.workers
    for p, n, k, l in cfg.lemma_instances:  # noqa: E741
        reports.append(verify_g_uniform(p, n, k, l, workers=w))
        reports.append(verify_pairwise_independence(p, n, k, l, "same_m_diff_a", workers=w))
        reports.append(verify_pairwise_independence(p, n, k, l, "diff_m", workers=w))
        reports.append(verify_parity_uniform_independent(p, n, l, workers=w))
    for p, n, l in cfg.rank_instances:  # noqa: E741
        reports.append(verify_rank_distribution(p, n, l, workers=w))
    files = {
        "verify_reports.csv": _csv([LemmaReport.CSV_FIELDS] + [r.row() for r in reports]),
        "verify_reports.txt": "".join(r.to_text() + "\n" for r in reports),
    }
    return RunResult(cfg, files, reports, 0 if all(r.ok for r in reports) else 1)


EXPONENT_COLUMNS = ("n", "hits", "samples", "p_hat", "exponent", "exponent_lo", "exponent_hi", "lower_bound_only")


def _run_exponent(cfg: ExperimentConfig) -> RunResult:
    if cfg.instance not in ("", "binary-exponent-d1"):
        raise ConfigError("exponent mode supports binary-exponent-d1 only", key="instance")
    P_XY, P_Z = inst.binary_exponent_d1()
    d = inst.DEFAULTS["binary-exponent-d1"]
    eps = cfg.eps if cfg.eps is not None else d.eps
    samples = cfg.samples or d.trials
    rows, target = estimate_typicality_exponent(P_XY, P_Z, None, cfg.n_values or d.n_values, samples, eps, cfg.seed)
    dict_rows = [{c: getattr(r, c) for c in EXPONENT_COLUMNS} for r in rows]
    report = SweepReport("exponent", EXPONENT_COLUMNS, dict_rows, dict(target=target, eps=eps))
    files = {"exponent.csv": report.to_csv(), "exponent_plot.dat": emit_plotdata(report),
             "exponent_target.txt": f"target = {target!r}\neps = {eps!r}\n"}
    return RunResult(cfg, files, report)


def _run_quantize(cfg: ExperimentConfig) -> RunResult:
    if cfg.instance not in ("", "gauss-rho08"):
        raise ConfigError("quantize mode supports gauss-rho08 only", key="instance")
    g = inst.gauss_rho08()
    ref = g.joint(cfg.ref_points) if cfg.ref_points > 0 else None
    steps = mi_refinement_sweep(g.joint(), default_schedule(cfg.quant_steps), cfg.quant_axes, ref)
    clip = clipping_sweep(g, cfg.clip_levels)
    cols = ("n", "gamma", "p", "mi_bits", "prokhorov_to_ref")
    rows = [{c: getattr(s, c) for c in cols} for s in steps]
    report = SweepReport("quantize", cols, rows, dict(reference_mi=g.reference_mi, fine_grid_mi=g.joint().mi()))
    files = {
        "quantize_sweep.csv": sweep_to_csv(steps),
        "quantize_clip.csv": _csv([("level", "mi_bits", "gap_bits")] + [[_fmt(v) for v in r] for r in clip]),
        "quantize_plot.dat": emit_plotdata(report),
    }
    return RunResult(cfg, files, (report, clip))


def run(cfg: ExperimentConfig) -> RunResult:
    return {
        "gp": _run_sweep,
        "wz": _run_sweep,
        "verify": _run_verify,
        "exponent": _run_exponent,
        "quantize": _run_quantize,
    }[cfg.mode](cfg)


def write_outputs(result: RunResult, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, text in sorted(result.files.items()):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths
