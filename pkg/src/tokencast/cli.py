"""One executable for the whole pipeline.

Subcommands: ingest, sentiment, features, train, compare, synth, report.
Settings may come from `--config FILE` (key=value lines) with flags winning;
every command writes the resolved settings beside its outputs. All
randomness flows from explicit seeds, never from time or the OS, so any
command re-run with identical inputs produces byte-identical outputs.

Exit codes: 0 success, 1 usage error, 2 parse error, 3 data-contract
violation, 4 training divergence.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import evaluate as eval_mod
from . import features as feat_mod
from . import market as market_mod
from . import sentiment as senti_mod
from .errors import DataContractError, ParseError, TrainingDiverged
from .lstm import TrainConfig, save_model
from .synth import SynthConfig, generate


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        settings[key.strip()] = value.strip()
    return settings


def _resolve(cfg: dict[str, str], key: str, flag_value, default, cast=str):
    """Flag wins over config file wins over default."""
    if flag_value is not None:
        return flag_value
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError:
            raise click.UsageError(f"config key {key}={cfg[key]!r} is not a valid {cast.__name__}")
    return default


def _write_effective(out_dir: Path, command: str, settings: dict[str, object]) -> None:
    lines = [f"{k}={v}" for k, v in sorted(settings.items())]
    (out_dir / f"{command}.effective.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_seeds(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        seeds = list(range(int(lo), int(hi) + 1))
    else:
        seeds = [int(p) for p in text.split(",") if p.strip()]
    if not seeds:
        raise click.UsageError(f"no seeds in {text!r}")
    if len(set(seeds)) != len(seeds):
        raise click.UsageError("seeds must be distinct")
    return seeds


def _parse_column_map(text: str | None) -> dict[str, str] | None:
    if not text:
        return None
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise click.UsageError(f"column mapping entries must be field=Column, got {part!r}")
        field, column = part.split("=", 1)
        out[field.strip()] = column.strip()
    return out


def _load_lexicon_file(path: str) -> dict[str, int]:
    lexicon = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            word, weight = line.split(",", 1)
            lexicon[word.strip().lower()] = int(weight)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: expected word,weight")
    if not lexicon:
        raise ParseError(f"{path}: empty lexicon")
    return lexicon


def _experiment_config(cfg_map, lookback, train_frac, scaler, features, epochs, lr, hidden, optimizer, clip, batch_mode):
    feature_text = _resolve(cfg_map, "features", features, "tau,vol,mcap,senti")
    clip_value = _resolve(cfg_map, "clip", clip, 5.0, float)
    train_cfg = TrainConfig(
        epochs=_resolve(cfg_map, "epochs", epochs, 200, int),
        learning_rate=_resolve(cfg_map, "learning_rate", lr, 1e-3, float),
        hidden=_resolve(cfg_map, "hidden", hidden, 32, int),
        optimizer=_resolve(cfg_map, "optimizer", optimizer, "adam"),
        clip=None if clip_value == 0 else clip_value,
        batch_mode=_resolve(cfg_map, "batch_mode", batch_mode, "full"),
    )
    return eval_mod.ExperimentConfig(
        lookback=_resolve(cfg_map, "lookback", lookback, 14, int),
        train_frac=_resolve(cfg_map, "train_frac", train_frac, 0.8, float),
        scaler_mode=_resolve(cfg_map, "scaler", scaler, "minmax"),
        multimodal_features=tuple(p.strip() for p in feature_text.split(",") if p.strip()),
        train=train_cfg,
    )


def _load_dataset(prices_path: str, senti_path: str | None) -> tuple[eval_mod.ExperimentData, list]:
    prices = market_mod.parse_ohlcv_csv(prices_path)
    daily = senti_mod.read_daily_sentiment(senti_path) if senti_path else []
    rows, dropped = feat_mod.align(prices, daily)
    if dropped:
        click.echo(f"note: {dropped} sentiment day(s) outside the price span were dropped", err=True)
    returns = market_mod.log_returns(prices)
    return eval_mod.ExperimentData(tuple(rows), tuple(returns)), daily


@click.group()
def cli():
    """Multi-modal token return forecasting pipeline."""


@cli.command()
@click.option("--ohlcv", required=True, type=click.Path(exists=True, dir_okay=False), help="Raw OHLCV+market-cap CSV.")
@click.option("--chat", "chats", multiple=True, type=click.Path(exists=True, dir_okay=False), help="Chat export file(s); repeatable.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--delimiter", default=None, help="OHLCV field delimiter (default ',').")
@click.option("--ohlcv-columns", default=None, help="Column mapping, e.g. date=Date,open=Open.")
@click.option("--salt", default=None, help="Salt for author anonymization.")
@click.option("--bot", "bots", multiple=True, help="Bot author identifier to drop; repeatable (raw id, hashed with the salt).")
@click.option("--keep-empty", is_flag=True, default=False, help="Keep empty/whitespace-only messages.")
@click.option("--keep-attachment-only", is_flag=True, default=False, help="Keep attachment-only messages.")
@click.option("--keep-duplicates", is_flag=True, default=False, help="Keep exact duplicate messages.")
def ingest(ohlcv, chats, out, config_path, delimiter, ohlcv_columns, salt, bots, keep_empty, keep_attachment_only, keep_duplicates):
    """Parse raw inputs into canonical price and corpus files."""
    cfg_map = _load_config_file(config_path)
    delimiter = _resolve(cfg_map, "delimiter", delimiter, ",")
    salt = _resolve(cfg_map, "salt", salt, "")
    colmap = _parse_column_map(_resolve(cfg_map, "ohlcv_columns", ohlcv_columns, None))

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    series = market_mod.parse_ohlcv_csv(ohlcv, columns=colmap, delimiter=delimiter)
    market_mod.write_ohlcv_csv(series, out_dir / "prices.canon.csv")

    log_lines = [f"prices: {len(series)} bars {series.bars[0].date} .. {series.bars[-1].date}"]
    corpus_path = None
    if chats:
        batches = []
        all_diags = []
        for path in chats:
            messages, diags = corpus_mod.parse_chat_export(path, salt=salt)
            batches.append(messages)
            all_diags.extend((path, d) for d in diags)
        merged = corpus_mod.merge_messages(*batches)
        rules = corpus_mod.FilterConfig(
            drop_empty=not keep_empty,
            drop_attachment_only=not keep_attachment_only,
            bot_ids=frozenset(corpus_mod.hash_author(b, salt) for b in bots),
            drop_duplicates=not keep_duplicates,
        )
        filtered = corpus_mod.filter_corpus(merged, rules)
        corpus_path = out_dir / "corpus.csv"
        corpus_mod.write_corpus(filtered, corpus_path)
        stats = filtered.stats
        log_lines += [
            f"chat rows parsed: {stats.total}",
            f"chat rows kept: {stats.kept}",
            f"dropped empty: {stats.dropped_empty}",
            f"dropped attachment-only: {stats.dropped_attachment_only}",
            f"dropped bot: {stats.dropped_bot}",
            f"dropped duplicate: {stats.dropped_duplicate}",
            f"unparseable rows: {len(all_diags)}",
        ]
        log_lines += [f"  {Path(p).name} line {d.line}: {d.reason}" for p, d in all_diags]
    (out_dir / "ingest.log").write_text("\n".join(log_lines) + "\n", encoding="utf-8")

    _write_effective(
        out_dir,
        "ingest",
        {
            "ohlcv": ohlcv,
            "chat": ";".join(chats),
            "delimiter": delimiter,
            "ohlcv_columns": ohlcv_columns or "",
            "salt": salt,
            "bots": ";".join(sorted(bots)),
            "keep_empty": keep_empty,
            "keep_attachment_only": keep_attachment_only,
            "keep_duplicates": keep_duplicates,
        },
    )
    for line in log_lines[: 7 if chats else 1]:
        click.echo(line)
    click.echo(f"wrote {out_dir / 'prices.canon.csv'}" + (f" and {corpus_path}" if corpus_path else ""))


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Canonical corpus file.")
@click.option("--provider", type=click.Choice(["lexicon", "interchange"]), default=None)
@click.option("--scores", "scores_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Interchange score file (provider=interchange).")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Custom word,weight lexicon file.")
@click.option("--strict", is_flag=True, default=False, help="Fail if any message is left unscored.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def sentiment(corpus_path, provider, scores_path, lexicon_path, strict, out, config_path):
    """Score messages, aggregate per day, print the label distribution."""
    cfg_map = _load_config_file(config_path)
    provider = _resolve(cfg_map, "provider", provider, "lexicon")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus = corpus_mod.read_corpus(corpus_path)
    if provider == "interchange":
        if not scores_path:
            raise click.UsageError("--scores is required with --provider interchange")
        sents, diags = senti_mod.load_interchange_scores(scores_path, corpus)
        for key in diags.unmatched:
            click.echo(f"unmatched score row: {key}", err=True)
        for key in diags.duplicate:
            click.echo(f"duplicate score row: {key}", err=True)
        if diags.missing:
            click.echo(f"{len(diags.missing)} message(s) unscored", err=True)
            if strict:
                raise DataContractError(f"{len(diags.missing)} message(s) unscored in strict mode")
    else:
        lexicon = _load_lexicon_file(lexicon_path) if lexicon_path else None
        sents = senti_mod.classify_corpus(corpus, senti_mod.LexiconProvider(lexicon))

    senti_mod.write_interchange_scores(corpus, sents, out_dir / "scores.csv")
    daily = senti_mod.aggregate_daily(sents, corpus)
    senti_mod.write_daily_sentiment(daily, out_dir / "sentiment_daily.csv")

    _write_effective(
        out_dir,
        "sentiment",
        {
            "corpus": corpus_path,
            "provider": provider,
            "scores": scores_path or "",
            "lexicon": lexicon_path or "",
            "strict": strict,
        },
    )
    dist = senti_mod.distribution(sents) if sents else {"positive": 0.0, "neutral": 0.0, "negative": 0.0}
    for label in ("positive", "neutral", "negative"):
        click.echo(f"{label}: {dist[label]:.2f}%")
    click.echo(f"wrote {out_dir / 'scores.csv'} and {out_dir / 'sentiment_daily.csv'}")


@cli.command()
@click.option("--prices", required=True, type=click.Path(exists=True, dir_okay=False), help="Canonical price file.")
@click.option("--senti", "senti_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Daily sentiment file.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--lookback", type=int, default=None)
@click.option("--train-frac", type=float, default=None)
@click.option("--scaler", type=click.Choice(["minmax", "zscore"]), default=None)
def features(prices, senti_path, out, config_path, lookback, train_frac, scaler):
    """Export the aligned feature table plus the fitted scaler sidecar."""
    cfg_map = _load_config_file(config_path)
    lookback = _resolve(cfg_map, "lookback", lookback, 14, int)
    train_frac = _resolve(cfg_map, "train_frac", train_frac, 0.8, float)
    scaler_mode = _resolve(cfg_map, "scaler", scaler, "minmax")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    data, _daily = _load_dataset(prices, senti_path)
    n_samples = len(data.returns) - lookback + 1
    if n_samples < 2:
        raise DataContractError(f"only {n_samples} samples; need at least 2 to split")
    n_train = int(train_frac * n_samples)
    fitted = feat_mod.fit_scaler(list(data.rows[: n_train + lookback - 1]), scaler_mode)

    feat_mod.write_feature_table(list(data.rows), out_dir / "features.csv")
    feat_mod.write_scaler(fitted, out_dir / "scaler.json")
    _write_effective(
        out_dir,
        "features",
        {"prices": prices, "senti": senti_path or "", "lookback": lookback, "train_frac": train_frac, "scaler": scaler_mode},
    )
    click.echo(f"wrote {out_dir / 'features.csv'} and {out_dir / 'scaler.json'} ({len(data.rows)} rows)")


_TRAIN_OPTIONS = [
    click.option("--lookback", type=int, default=None),
    click.option("--train-frac", type=float, default=None),
    click.option("--scaler", type=click.Choice(["minmax", "zscore"]), default=None),
    click.option("--variant-features", "features_text", default=None, help="Multimodal feature subset, e.g. tau,vol,senti."),
    click.option("--epochs", type=int, default=None),
    click.option("--lr", type=float, default=None),
    click.option("--hidden", type=int, default=None),
    click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default=None),
    click.option("--clip", type=float, default=None, help="Global gradient-norm threshold; 0 disables clipping."),
    click.option("--batch-mode", type=click.Choice(["full", "per_sample"]), default=None),
]


def _with_train_options(fn):
    for option in reversed(_TRAIN_OPTIONS):
        fn = option(fn)
    return fn


def _effective_experiment(cfg: eval_mod.ExperimentConfig, extra: dict[str, object]) -> dict[str, object]:
    settings: dict[str, object] = dict(cfg.describe())
    settings.update(extra)
    settings["config_hash"] = eval_mod.config_hash(cfg)
    return settings


@cli.command()
@click.option("--prices", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--senti", "senti_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--variant", type=click.Choice(["baseline", "multimodal"]), default="multimodal")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_with_train_options
def train(prices, senti_path, variant, seed, out, config_path, lookback, train_frac, scaler, features_text, epochs, lr, hidden, optimizer, clip, batch_mode):
    """Train a single forecaster; write checkpoint, loss curve and test series."""
    cfg_map = _load_config_file(config_path)
    seed = _resolve(cfg_map, "seed", seed, 1, int)
    cfg = _experiment_config(cfg_map, lookback, train_frac, scaler, features_text, epochs, lr, hidden, optimizer, clip, batch_mode)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    data, daily = _load_dataset(prices, senti_path)
    result = eval_mod.execute_run(data, cfg, variant, seed)

    ckpt = out_dir / f"model_{variant}_{seed}.ckpt"
    save_model(result.model, ckpt, seed=seed, config_hash=eval_mod.config_hash(cfg))
    loss_path = out_dir / f"loss_{variant}_{seed}.csv"
    with open(loss_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,loss\n")
        for k, loss in enumerate(result.loss_curve, start=1):
            fh.write(f"{k},{loss!r}\n")
    eval_mod.emit_plot_series(result.report, out_dir, daily)
    if not daily:
        click.echo("note: no daily sentiment series available; sentiment_daily.csv omitted", err=True)

    _write_effective(out_dir, "train", _effective_experiment(cfg, {"prices": prices, "senti": senti_path or "", "variant": variant, "seed": seed}))
    m = result.report.metrics
    r2_text = "undef" if m.r2 is None else f"{m.r2:.4f}"
    click.echo(f"{variant} seed {seed}: mse={m.mse:.6e} mae={m.mae:.6e} r2={r2_text}")
    click.echo(f"wrote {ckpt}")


@cli.command()
@click.option("--prices", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--senti", "senti_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seeds", "seeds_text", default=None, help="Seed list: 1..8 or 1,2,3 (default 1..8).")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_with_train_options
def compare(prices, senti_path, seeds_text, out, config_path, lookback, train_frac, scaler, features_text, epochs, lr, hidden, optimizer, clip, batch_mode):
    """Run the paired baseline-vs-multimodal protocol and write all reports."""
    cfg_map = _load_config_file(config_path)
    seeds = _parse_seeds(_resolve(cfg_map, "seeds", seeds_text, "1..8"))
    cfg = _experiment_config(cfg_map, lookback, train_frac, scaler, features_text, epochs, lr, hidden, optimizer, clip, batch_mode)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    data, daily = _load_dataset(prices, senti_path)
    report = eval_mod.compare_runs(data, cfg, seeds)

    eval_mod.write_comparison_csv(report, out_dir / "comparison.csv")
    table = eval_mod.render_comparison_table(report)
    (out_dir / "comparison.txt").write_text(table, encoding="utf-8")
    for pair in report.pairs:
        eval_mod.emit_plot_series(pair.baseline, out_dir)
        eval_mod.emit_plot_series(pair.multimodal, out_dir, daily)
    if not daily:
        click.echo("note: no daily sentiment series available; sentiment_daily.csv omitted", err=True)

    _write_effective(out_dir, "compare", _effective_experiment(cfg, {"prices": prices, "senti": senti_path or "", "seeds": ",".join(map(str, seeds))}))
    click.echo(table)
    click.echo(f"wrote {out_dir / 'comparison.csv'} and {out_dir / 'comparison.txt'}")


@cli.command()
@click.option("--days", type=int, default=None)
@click.option("--seed", type=int, required=True)
@click.option("--beta", type=float, default=None, help="Strength of the sentiment-to-return signal.")
@click.option("--noise-sd", type=float, default=None)
@click.option("--start-date", "start_text", default=None, help="First day, ISO format.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def synth(days, seed, beta, noise_sd, start_text, out, config_path):
    """Generate a synthetic dataset in the canonical file formats."""
    cfg_map = _load_config_file(config_path)
    cfg = SynthConfig(
        days=_resolve(cfg_map, "days", days, 400, int),
        seed=seed,
        beta=_resolve(cfg_map, "beta", beta, 0.5, float),
        noise_sd=_resolve(cfg_map, "noise_sd", noise_sd, 0.02, float),
        start=date.fromisoformat(_resolve(cfg_map, "start_date", start_text, "2023-06-15")),
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    prices, daily = generate(cfg)
    market_mod.write_ohlcv_csv(prices, out_dir / "prices.canon.csv")
    senti_mod.write_daily_sentiment(daily, out_dir / "sentiment_daily.csv")

    _write_effective(
        out_dir,
        "synth",
        {"days": cfg.days, "seed": cfg.seed, "beta": cfg.beta, "noise_sd": cfg.noise_sd, "start_date": cfg.start.isoformat()},
    )
    click.echo(f"wrote {out_dir / 'prices.canon.csv'} ({cfg.days} rows) and {out_dir / 'sentiment_daily.csv'}")


@cli.command()
@click.option("--comparison", "comparison_path", required=True, type=click.Path(exists=True, dir_okay=False), help="comparison.csv from a compare run.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Also write comparison.txt here.")
def report(comparison_path, out):
    """Re-render the human-readable table from a comparison.csv."""
    rows = eval_mod.read_comparison_csv(comparison_path)
    table = eval_mod.render_comparison_table(_report_from_rows(rows))
    click.echo(table)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "comparison.txt").write_text(table, encoding="utf-8")


def _report_from_rows(rows: list[dict[str, str]]) -> eval_mod.ComparisonReport:
    def to_metrics(row):
        r2 = row["r2"].strip()
        return eval_mod.Metrics(float(row["mse"]), float(row["mae"]), float(r2) if r2 else None)

    def to_run(row):
        seed = int(row["seed"]) if row["seed"].strip() else 0
        return eval_mod.RunReport(
            run_id=f"{row['variant']}_s{row['seed']}",
            seed=seed,
            variant=row["variant"],
            config_hash="",
            metrics=to_metrics(row),
            series=(),
        )

    by_run: dict[int, dict[str, eval_mod.RunReport]] = {}
    averages: dict[str, eval_mod.Metrics] = {}
    for row in rows:
        if row["run"] == "avg":
            averages[row["variant"]] = to_metrics(row)
        else:
            by_run.setdefault(int(row["run"]), {})[row["variant"]] = to_run(row)
    pairs = tuple(
        eval_mod.RunPair(run=k, seed=variants["baseline"].seed, baseline=variants["baseline"], multimodal=variants["multimodal"])
        for k, variants in sorted(by_run.items())
    )
    if "baseline" not in averages or "multimodal" not in averages:
        raise ParseError("comparison file lacks average rows")
    return eval_mod.ComparisonReport(pairs, averages["baseline"], averages["multimodal"])


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        return 2
    except DataContractError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 3
    except TrainingDiverged as exc:
        click.echo(f"training diverged: {exc}", err=True)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
