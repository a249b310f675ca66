"""Forecast quality metrics and the paired baseline-vs-multimodal protocol.

A run trains one variant on one seed and reports MSE/MAE/R-squared over the
chronological test split, together with the full (date, actual, predicted)
series so every number is recomputable. A comparison repeats this for each
seed with both variants on identical data and config, then averages.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import DataContractError
from .features import (
    MULTIMODAL_FEATURES,
    FeatureRow,
    audit_samples,
    chronological_split,
    fit_scaler,
    make_samples,
    resolve_features,
)
from .lstm import TrainConfig, init, predict, train
from .market import ReturnPoint
from .sentiment import DailySentiment, write_daily_sentiment

VARIANTS = ("baseline", "multimodal")


class LengthMismatch(DataContractError):
    pass


class EmptyInput(DataContractError):
    pass


@dataclass(frozen=True)
class Metrics:
    """mse/mae over test returns; r2 is None when actuals have no variance."""

    mse: float
    mae: float
    r2: float | None

    def __post_init__(self):
        if self.mse < 0 or self.mae < 0:
            raise ValueError("error metrics cannot be negative")
        if self.mae * self.mae > self.mse * (1.0 + 1e-12) + 1e-300:
            raise ValueError("mae^2 exceeds mse")
        if self.r2 is not None and self.r2 > 1.0:
            raise ValueError("r2 cannot exceed 1")


def metrics(actual: Sequence[float], predicted: Sequence[float]) -> Metrics:
    """MSE, MAE and R-squared with the mean taken over the evaluation set.

    R-squared of the mean predictor is exactly 0; constant actuals make it
    undefined (None), never NaN.
    """
    if len(actual) != len(predicted):
        raise LengthMismatch(f"{len(actual)} actuals vs {len(predicted)} predictions")
    if not actual:
        raise EmptyInput("cannot score zero points")
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    err = a - p
    mse = float(np.mean(err * err))
    mae = float(np.mean(np.abs(err)))
    dev = a - a.mean()
    ss_tot = float(np.sum(dev * dev))
    if ss_tot == 0.0:
        return Metrics(mse, mae, None)
    ss_res = float(np.sum(err * err))
    return Metrics(mse, mae, 1.0 - ss_res / ss_tot)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run apart from seed and variant."""

    lookback: int = 14
    train_frac: float = 0.8
    scaler_mode: str = "minmax"
    multimodal_features: tuple[str, ...] = MULTIMODAL_FEATURES
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.lookback < 1:
            raise ValueError("lookback must be >= 1")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must be in (0, 1)")
        resolve_features(self.multimodal_features)

    def describe(self) -> dict[str, str]:
        """Key/value view; keys match the CLI's config-file vocabulary."""
        return {
            "lookback": str(self.lookback),
            "train_frac": repr(self.train_frac),
            "scaler": self.scaler_mode,
            "features": ",".join(self.multimodal_features),
            "epochs": str(self.train.epochs),
            "learning_rate": repr(self.train.learning_rate),
            "hidden": str(self.train.hidden),
            "optimizer": self.train.optimizer,
            "clip": repr(0.0 if self.train.clip is None else self.train.clip),
            "batch_mode": self.train.batch_mode,
        }


def config_hash(cfg: ExperimentConfig) -> str:
    text = "\n".join(f"{k}={v}" for k, v in sorted(cfg.describe().items()))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentData:
    """Date-aligned feature rows and their stamped next-day returns."""

    rows: tuple[FeatureRow, ...]
    returns: tuple[ReturnPoint, ...]

    def __post_init__(self):
        if len(self.returns) != len(self.rows) - 1:
            raise DataContractError("returns must have one entry per adjacent row pair")


@dataclass(frozen=True)
class RunReport:
    run_id: str
    seed: int
    variant: str
    config_hash: str
    metrics: Metrics
    series: tuple[tuple[date, float, float], ...]


def make_run_report(
    run_id: str,
    seed: int,
    variant: str,
    cfg_hash: str,
    series: Sequence[tuple[date, float, float]],
) -> RunReport:
    scored = metrics([s[1] for s in series], [s[2] for s in series])
    return RunReport(run_id, seed, variant, cfg_hash, scored, tuple(series))


@dataclass(frozen=True)
class RunResult:
    report: RunReport
    model: object
    loss_curve: tuple[float, ...]


def execute_run(
    data: ExperimentData,
    cfg: ExperimentConfig,
    variant: str,
    seed: int | None = None,
) -> RunResult:
    """One deterministic train/evaluate pass for one variant.

    The scaler is fitted only on rows covered by training windows
    (rows[: n_train + L - 1]); samples are audited for lookahead before any
    training happens.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    seed = cfg.train.seed if seed is None else seed
    train_cfg = replace(cfg.train, seed=seed)
    features = ("tau",) if variant == "baseline" else cfg.multimodal_features

    L = cfg.lookback
    n_samples = len(data.returns) - L + 1
    if n_samples < 2:
        raise DataContractError(f"only {n_samples} samples; need at least 2 to split")
    n_train = math.floor(cfg.train_frac * n_samples)

    scaler = fit_scaler(list(data.rows[: n_train + L - 1]), cfg.scaler_mode)
    samples = make_samples(data.rows, data.returns, L, features, scaler)
    audit_samples(samples, data.rows, data.returns, L, features, scaler)
    train_set, test_set = chronological_split(samples, cfg.train_frac)

    model = init(len(features), train_cfg.hidden, seed)
    model, curve = train(model, train_set, train_cfg)
    predictions = predict(model, test_set)

    series = [(s.date, s.target, p) for s, p in zip(test_set, predictions)]
    report = make_run_report(f"{variant}_s{seed}", seed, variant, config_hash(cfg), series)
    return RunResult(report=report, model=model, loss_curve=tuple(curve))


def run_experiment(
    data: ExperimentData,
    cfg: ExperimentConfig,
    variant: str,
    seed: int | None = None,
) -> RunReport:
    return execute_run(data, cfg, variant, seed).report


@dataclass(frozen=True)
class RunPair:
    """Baseline and multimodal runs on the same seed, with metric deltas."""

    run: int
    seed: int
    baseline: RunReport
    multimodal: RunReport

    def delta_mse(self) -> float:
        return self.multimodal.metrics.mse - self.baseline.metrics.mse

    def delta_mae(self) -> float:
        return self.multimodal.metrics.mae - self.baseline.metrics.mae

    def delta_r2(self) -> float | None:
        a, b = self.multimodal.metrics.r2, self.baseline.metrics.r2
        return None if a is None or b is None else a - b


def marker(delta: float | None, higher_is_better: bool = False) -> str:
    """better/worse/same by delta sign, per metric orientation."""
    if delta is None or delta == 0.0:
        return "same"
    improved = delta > 0.0 if higher_is_better else delta < 0.0
    return "better" if improved else "worse"


def _mean_metrics(reports: Sequence[RunReport]) -> Metrics:
    mse = float(np.mean([r.metrics.mse for r in reports]))
    mae = float(np.mean([r.metrics.mae for r in reports]))
    r2s = [r.metrics.r2 for r in reports]
    r2 = None if any(v is None for v in r2s) else float(np.mean(r2s))
    return Metrics(mse, mae, r2)


@dataclass(frozen=True)
class ComparisonReport:
    pairs: tuple[RunPair, ...]
    avg_baseline: Metrics
    avg_multimodal: Metrics

    def avg_delta_mse(self) -> float:
        return self.avg_multimodal.mse - self.avg_baseline.mse

    def avg_markers(self) -> dict[str, str]:
        d_r2 = (
            None
            if self.avg_multimodal.r2 is None or self.avg_baseline.r2 is None
            else self.avg_multimodal.r2 - self.avg_baseline.r2
        )
        return {
            "mse": marker(self.avg_delta_mse()),
            "mae": marker(self.avg_multimodal.mae - self.avg_baseline.mae),
            "r2": marker(d_r2, higher_is_better=True),
        }


def compare_runs(
    data: ExperimentData,
    cfg: ExperimentConfig,
    seeds: Sequence[int],
) -> ComparisonReport:
    """Paired runs over the seed list: identical data and config throughout,
    only seed and variant change. The reference protocol uses 8 seeds."""
    if not seeds:
        raise ValueError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    pairs = []
    for k, seed in enumerate(seeds, start=1):
        base = run_experiment(data, cfg, "baseline", seed)
        multi = run_experiment(data, cfg, "multimodal", seed)
        pairs.append(RunPair(run=k, seed=seed, baseline=base, multimodal=multi))
    avg_base = _mean_metrics([p.baseline for p in pairs])
    avg_multi = _mean_metrics([p.multimodal for p in pairs])
    return ComparisonReport(tuple(pairs), avg_base, avg_multi)


def _fmt_r2(r2: float | None) -> str:
    return "" if r2 is None else repr(r2)


def write_comparison_csv(report: ComparisonReport, dest: str | Path | IO[str]) -> None:
    """Machine-readable rows: one per run, then one average row per variant."""
    own = isinstance(dest, (str, Path))
    out = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["run", "seed", "variant", "mse", "mae", "r2"])
        for p in report.pairs:
            for r in (p.baseline, p.multimodal):
                writer.writerow(
                    [p.run, p.seed, r.variant, repr(r.metrics.mse), repr(r.metrics.mae), _fmt_r2(r.metrics.r2)]
                )
        for variant, avg in (("baseline", report.avg_baseline), ("multimodal", report.avg_multimodal)):
            writer.writerow(["avg", "", variant, repr(avg.mse), repr(avg.mae), _fmt_r2(avg.r2)])
    finally:
        if own:
            out.close()


def read_comparison_csv(source: str | Path | IO[str]) -> list[dict[str, str]]:
    own = isinstance(source, (str, Path))
    stream = open(source, "r", encoding="utf-8", newline="") if own else source
    try:
        reader = csv.DictReader(stream)
        return [dict(row) for row in reader]
    finally:
        if own:
            stream.close()


_MODEL_LABEL = {"baseline": "Price Only", "multimodal": "+Sentiment"}
_ARROW = {"better": "v", "worse": "^", "same": "="}


def render_comparison_table(report: ComparisonReport) -> str:
    """Aligned-text table: Run, Model, MSE (x10^-4 for readability), MAE, R2.

    Markers on the multimodal rows show the change against the paired
    baseline: v = improvement, ^ = worse, = unchanged.
    """

    def fmt_row(run, model, mse, mae, r2, marks=("", "", "")):
        r2_text = "undef" if r2 is None else f"{r2:.4f}"
        return (
            f"{run:<4} {model:<11} {mse * 1e4:>9.2f}{marks[0]:<2} "
            f"{mae:>9.5f}{marks[1]:<2} {r2_text:>9}{marks[2]:<2}"
        )

    lines = [
        "Comparison of prediction models"
        f" ({len(report.pairs)} independent runs)",
        "",
        f"{'Run':<4} {'Model':<11} {'MSE(x1e-4)':>11} {'MAE':>10} {'R2':>10}",
    ]
    for p in report.pairs:
        b, m = p.baseline.metrics, p.multimodal.metrics
        lines.append(fmt_row(p.run, _MODEL_LABEL["baseline"], b.mse, b.mae, b.r2))
        marks = (
            _ARROW[marker(p.delta_mse())],
            _ARROW[marker(p.delta_mae())],
            _ARROW[marker(p.delta_r2(), higher_is_better=True)],
        )
        lines.append(fmt_row("", _MODEL_LABEL["multimodal"], m.mse, m.mae, m.r2, marks))
    lines.append("-" * 52)
    avg_marks = report.avg_markers()
    lines.append(fmt_row("Avg", _MODEL_LABEL["baseline"], report.avg_baseline.mse, report.avg_baseline.mae, report.avg_baseline.r2))
    lines.append(
        fmt_row(
            "",
            _MODEL_LABEL["multimodal"],
            report.avg_multimodal.mse,
            report.avg_multimodal.mae,
            report.avg_multimodal.r2,
            (_ARROW[avg_marks["mse"]], _ARROW[avg_marks["mae"]], _ARROW[avg_marks["r2"]]),
        )
    )
    lines.append("")
    lines.append("MSE shown x10^4. v = better, ^ = worse (lower error / higher R2 is better).")
    return "\n".join(lines) + "\n"


def emit_plot_series(
    report: RunReport,
    out_dir: str | Path,
    daily: Sequence[DailySentiment] | None = None,
) -> list[Path]:
    """Write plot-ready files: per-day actual vs predicted returns, plus the
    daily sentiment series when one is available (omitted otherwise)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    series_path = out / f"run_{report.variant}_{report.seed}_series.csv"
    with open(series_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "actual", "predicted"])
        for day, actual, predicted in report.series:
            writer.writerow([day.isoformat(), repr(actual), repr(predicted)])
    written.append(series_path)
    if daily:
        senti_path = out / "sentiment_daily.csv"
        write_daily_sentiment(daily, senti_path)
        written.append(senti_path)
    return written
