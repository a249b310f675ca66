import hashlib
from pathlib import Path

import pytest

from tokencast.cli import main

OHLCV_RAW = """date,open,high,low,close,volume,market_cap
2023-06-15,0.40,0.45,0.39,0.42,1000000,800000000
2023-06-16,0.42,0.46,0.40,0.43,1100000,820000000
2023-06-17,0.43,0.47,0.41,0.44,1200000,840000000
2023-06-18,0.44,0.48,0.42,0.45,1300000,860000000
2023-06-19,0.45,0.49,0.43,0.46,1400000,880000000
2023-06-20,0.46,0.50,0.44,0.47,1500000,900000000
"""

CHAT_RAW = """AuthorID,Author,Date,Content,Attachments,Reactions
u1,alice,2023-06-15T10:00:00Z,love the new launch,,2
u2,bob,2023-06-15T11:00:00Z,so laggy today,,0
u3,caro,2023-06-16T09:30:00Z,"hello, world",,0
bot1,statbot,2023-06-16T09:31:00Z,daily stats posted,,0
u1,alice,2023-06-17T08:00:00Z,,,0
u2,bob,2023-06-18T12:00:00Z,great event,,1
"""


@pytest.fixture()
def raw_inputs(tmp_path):
    ohlcv = tmp_path / "prices.csv"
    ohlcv.write_text(OHLCV_RAW, encoding="utf-8")
    chat = tmp_path / "export.csv"
    chat.write_text(CHAT_RAW, encoding="utf-8")
    return ohlcv, chat


def dir_digests(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestIngest:
    def test_outputs_exist(self, raw_inputs, tmp_path, capsys):
        ohlcv, chat = raw_inputs
        out = tmp_path / "data"
        code = main(["ingest", "--ohlcv", str(ohlcv), "--chat", str(chat), "--out", str(out), "--salt", "s"])
        assert code == 0
        assert (out / "prices.canon.csv").exists()
        assert (out / "corpus.csv").exists()
        assert (out / "ingest.log").exists()
        assert (out / "ingest.effective.cfg").exists()

    def test_filters_applied(self, raw_inputs, tmp_path):
        ohlcv, chat = raw_inputs
        out = tmp_path / "data"
        main(
            ["ingest", "--ohlcv", str(ohlcv), "--chat", str(chat), "--out", str(out), "--salt", "s", "--bot", "bot1"]
        )
        log = (out / "ingest.log").read_text()
        assert "chat rows parsed: 6" in log
        assert "chat rows kept: 4" in log
        assert "dropped empty: 1" in log
        assert "dropped bot: 1" in log

    def test_missing_column_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,open,high,low,close,volume\n2023-06-15,1,1,1,1,10\n")
        code = main(["ingest", "--ohlcv", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "market_cap" in capsys.readouterr().err

    def test_missing_file_exits_1(self, tmp_path):
        code = main(["ingest", "--ohlcv", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_rerun_identical(self, raw_inputs, tmp_path):
        ohlcv, chat = raw_inputs
        out = tmp_path / "data"
        args = ["ingest", "--ohlcv", str(ohlcv), "--chat", str(chat), "--out", str(out), "--salt", "s"]
        assert main(args) == 0
        first = dir_digests(out)
        assert main(args) == 0
        assert dir_digests(out) == first


class TestSentiment:
    def corpus_from_ingest(self, raw_inputs, tmp_path):
        ohlcv, chat = raw_inputs
        data = tmp_path / "data"
        main(["ingest", "--ohlcv", str(ohlcv), "--chat", str(chat), "--out", str(data), "--salt", "s"])
        return data / "corpus.csv"

    def test_lexicon_provider(self, raw_inputs, tmp_path, capsys):
        corpus = self.corpus_from_ingest(raw_inputs, tmp_path)
        out = tmp_path / "senti"
        capsys.readouterr()
        code = main(["sentiment", "--corpus", str(corpus), "--provider", "lexicon", "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        shares = [float(line.split(":")[1].rstrip("%\n")) for line in stdout.splitlines() if "%" in line]
        assert len(shares) == 3
        assert abs(sum(shares) - 100.0) < 0.01
        assert (out / "scores.csv").exists()
        assert (out / "sentiment_daily.csv").exists()

    def test_interchange_full_coverage(self, raw_inputs, tmp_path):
        corpus = self.corpus_from_ingest(raw_inputs, tmp_path)
        lex_out = tmp_path / "senti"
        main(["sentiment", "--corpus", str(corpus), "--provider", "lexicon", "--out", str(lex_out)])
        inter_out = tmp_path / "senti2"
        code = main(
            [
                "sentiment",
                "--corpus", str(corpus),
                "--provider", "interchange",
                "--scores", str(lex_out / "scores.csv"),
                "--strict",
                "--out", str(inter_out),
            ]
        )
        assert code == 0
        assert (inter_out / "sentiment_daily.csv").read_bytes() == (lex_out / "sentiment_daily.csv").read_bytes()

    def test_strict_missing_score_exits_3(self, raw_inputs, tmp_path):
        corpus = self.corpus_from_ingest(raw_inputs, tmp_path)
        lex_out = tmp_path / "senti"
        main(["sentiment", "--corpus", str(corpus), "--provider", "lexicon", "--out", str(lex_out)])
        scores = (lex_out / "scores.csv").read_text().splitlines()
        trimmed = tmp_path / "partial.csv"
        trimmed.write_text("\n".join(scores[:-1]) + "\n")
        code = main(
            [
                "sentiment",
                "--corpus", str(corpus),
                "--provider", "interchange",
                "--scores", str(trimmed),
                "--strict",
                "--out", str(tmp_path / "s3"),
            ]
        )
        assert code == 3


class TestSynthTrainCompare:
    def synth_dataset(self, tmp_path, days=90, seed=7, beta=0.5):
        out = tmp_path / f"synth{seed}_{days}_{beta}"
        code = main(
            ["synth", "--days", str(days), "--seed", str(seed), "--beta", str(beta), "--out", str(out)]
        )
        assert code == 0
        return out

    def test_synth_files(self, tmp_path):
        out = self.synth_dataset(tmp_path, days=40)
        prices = (out / "prices.canon.csv").read_text().strip().splitlines()
        daily = (out / "sentiment_daily.csv").read_text().strip().splitlines()
        assert len(prices) == 41  # header + rows
        assert len(daily) == 41

    def test_synth_deterministic(self, tmp_path):
        a = self.synth_dataset(tmp_path, days=40, seed=3)
        b_dir = tmp_path / "again"
        main(["synth", "--days", "40", "--seed", "3", "--out", str(b_dir)])
        assert (a / "prices.canon.csv").read_bytes() == (b_dir / "prices.canon.csv").read_bytes()
        assert (a / "sentiment_daily.csv").read_bytes() == (b_dir / "sentiment_daily.csv").read_bytes()

    def test_train_writes_checkpoint(self, tmp_path, capsys):
        data = self.synth_dataset(tmp_path, days=60)
        out = tmp_path / "run"
        code = main(
            [
                "train",
                "--prices", str(data / "prices.canon.csv"),
                "--senti", str(data / "sentiment_daily.csv"),
                "--variant", "multimodal",
                "--seed", "2",
                "--lookback", "5",
                "--epochs", "15",
                "--hidden", "6",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert (out / "model_multimodal_2.ckpt").exists()
        assert (out / "loss_multimodal_2.csv").exists()
        assert (out / "run_multimodal_2_series.csv").exists()
        assert "mse=" in capsys.readouterr().out

    def test_compare_outputs(self, tmp_path, capsys):
        data = self.synth_dataset(tmp_path, days=70)
        out = tmp_path / "cmp"
        code = main(
            [
                "compare",
                "--prices", str(data / "prices.canon.csv"),
                "--senti", str(data / "sentiment_daily.csv"),
                "--seeds", "1,2",
                "--lookback", "5",
                "--epochs", "10",
                "--hidden", "4",
                "--out", str(out),
            ]
        )
        assert code == 0
        csv_lines = (out / "comparison.csv").read_text().strip().splitlines()
        assert len(csv_lines) == 1 + 4 + 2  # header, 2 seeds x 2 variants, 2 averages
        assert (out / "comparison.txt").exists()
        for seed in (1, 2):
            assert (out / f"run_baseline_{seed}_series.csv").exists()
            assert (out / f"run_multimodal_{seed}_series.csv").exists()
        assert (out / "sentiment_daily.csv").exists()

    def test_variant_features_subset(self, tmp_path):
        data = self.synth_dataset(tmp_path, days=60)
        out = tmp_path / "cmp3"
        code = main(
            [
                "compare",
                "--prices", str(data / "prices.canon.csv"),
                "--senti", str(data / "sentiment_daily.csv"),
                "--seeds", "1",
                "--lookback", "4",
                "--epochs", "5",
                "--hidden", "3",
                "--variant-features", "tau,vol,senti",
                "--out", str(out),
            ]
        )
        assert code == 0
        cfg = (out / "compare.effective.cfg").read_text()
        assert "features=tau,vol,senti" in cfg

    def test_report_rerenders(self, tmp_path, capsys):
        data = self.synth_dataset(tmp_path, days=60)
        out = tmp_path / "cmp_r"
        main(
            [
                "compare",
                "--prices", str(data / "prices.canon.csv"),
                "--senti", str(data / "sentiment_daily.csv"),
                "--seeds", "1,2",
                "--lookback", "4",
                "--epochs", "5",
                "--hidden", "3",
                "--out", str(out),
            ]
        )
        original = (out / "comparison.txt").read_text()
        capsys.readouterr()
        code = main(["report", "--comparison", str(out / "comparison.csv"), "--out", str(tmp_path / "rr")])
        assert code == 0
        assert (tmp_path / "rr" / "comparison.txt").read_text() == original

    def test_config_file_merging(self, tmp_path):
        data = self.synth_dataset(tmp_path, days=60)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs=5\nhidden=3\nlookback=4\nseeds=1\n")
        out = tmp_path / "cfgd"
        code = main(
            [
                "compare",
                "--prices", str(data / "prices.canon.csv"),
                "--senti", str(data / "sentiment_daily.csv"),
                "--config", str(cfg),
                "--epochs", "6",  # flag wins over config
                "--out", str(out),
            ]
        )
        assert code == 0
        effective = (out / "compare.effective.cfg").read_text()
        assert "epochs=6" in effective
        assert "hidden=3" in effective

    def test_effective_config_feeds_back(self, tmp_path):
        data = self.synth_dataset(tmp_path, days=60)
        prices = str(data / "prices.canon.csv")
        senti = str(data / "sentiment_daily.csv")
        out1 = tmp_path / "c1"
        main(
            ["compare", "--prices", prices, "--senti", senti, "--seeds", "1",
             "--lookback", "4", "--epochs", "5", "--hidden", "3", "--out", str(out1)]
        )
        out2 = tmp_path / "c2"
        code = main(
            ["compare", "--prices", prices, "--senti", senti,
             "--config", str(out1 / "compare.effective.cfg"), "--out", str(out2)]
        )
        assert code == 0
        assert (out2 / "comparison.csv").read_bytes() == (out1 / "comparison.csv").read_bytes()

    def test_usage_error_exit_1(self):
        assert main(["compare"]) == 1
        assert main(["definitely-not-a-command"]) == 1

    def test_help_exit_0(self, capsys):
        assert main(["--help"]) == 0
        assert "ingest" in capsys.readouterr().out

    def test_divergence_exit_4(self, tmp_path):
        data = self.synth_dataset(tmp_path, days=60)
        code = main(
            [
                "train",
                "--prices", str(data / "prices.canon.csv"),
                "--senti", str(data / "sentiment_daily.csv"),
                "--lookback", "4",
                "--epochs", "400",
                "--hidden", "2",
                "--optimizer", "sgd",
                "--lr", "1e9",
                "--clip", "0",
                "--out", str(tmp_path / "div"),
            ]
        )
        assert code == 4
