"""Score a canonical corpus file and emit the interchange score file.

The adapter talks to the pipeline purely through files: it reads the
canonical corpus format (timestamp,author_hash,content,attachments,
reactions) and writes the interchange format (timestamp,author_hash,
content_sha256,label,score), one row per corpus row, in corpus order.
Timestamps and author hashes are echoed verbatim so keys match exactly.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

LABELS = ("negative", "neutral", "positive")

INTERCHANGE_COLUMNS = ("timestamp", "author_hash", "content_sha256", "label", "score")
CORPUS_COLUMNS = ("timestamp", "author_hash", "content", "attachments", "reactions")

DEFAULT_MODEL = "cardiffnlp/twitter-roberta-base-sentiment-latest"

# id2label fallback for checkpoints that ship bare LABEL_{k} names; this is
# the conventional three-class ordering for twitter-roberta checkpoints
_GENERIC_LABELS = {"label_0": "negative", "label_1": "neutral", "label_2": "positive"}


class ModelUnavailable(RuntimeError):
    pass


class RowCountMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class AdapterConfig:
    corpus: str | Path
    out: str | Path
    model: str = DEFAULT_MODEL
    batch_size: int = 32
    max_length: int = 256

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_length < 8:
            raise ValueError("max length must be >= 8")


@dataclass(frozen=True)
class ScoreSummary:
    rows: int
    truncated: int
    empty_defaulted: int


# A classifier maps a batch of texts to one (label, probability) per text,
# plus the number of texts that exceeded the length budget.
Classifier = Callable[[Sequence[str]], tuple[list[tuple[str, float]], int]]


def mask_social_tokens(text: str) -> str:
    """Stock preprocessing for twitter-trained checkpoints: mask user
    mentions and links so they hit the tokens the model saw in training."""
    parts = []
    for tok in text.split(" "):
        if tok.startswith("@") and len(tok) > 1:
            parts.append("@user")
        elif tok.startswith("http"):
            parts.append("http")
        else:
            parts.append(tok)
    return " ".join(parts)


class TransformersClassifier:
    """Pretrained three-class sentiment model on CPU, eval mode."""

    def __init__(self, model_id: str, max_length: int):
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:
            raise ModelUnavailable(f"transformers/torch not importable: {exc}") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModelForSequenceClassification.from_pretrained(model_id)
        except Exception as exc:
            raise ModelUnavailable(f"could not load {model_id!r}: {exc}") from exc
        self.model.eval()
        self.torch = torch
        self.max_length = max_length
        id2label = {int(k): v for k, v in self.model.config.id2label.items()}
        self.labels = {}
        for idx, name in id2label.items():
            name = name.strip().lower()
            name = _GENERIC_LABELS.get(name, name)
            if name not in LABELS:
                raise ModelUnavailable(f"{model_id!r} is not a negative/neutral/positive classifier")
            self.labels[idx] = name

    def __call__(self, texts: Sequence[str]) -> tuple[list[tuple[str, float]], int]:
        masked = [mask_social_tokens(t) for t in texts]
        lengths = [len(ids) for ids in self.tokenizer(masked, truncation=False)["input_ids"]]
        truncated = sum(1 for n in lengths if n > self.max_length)
        batch = self.tokenizer(
            masked,
            return_tensors="pt",
            padding=True,
            truncation=True,
            max_length=self.max_length,
        )
        with self.torch.no_grad():
            logits = self.model(**batch).logits
            probs = self.torch.softmax(logits, dim=-1)
            best = probs.argmax(dim=-1)
        out = []
        for row, idx in zip(probs, best):
            out.append((self.labels[int(idx)], float(row[int(idx)])))
        return out, truncated


def read_canonical_corpus(path: str | Path) -> list[dict[str, str]]:
    """Rows of the canonical corpus file, timestamps kept verbatim."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(CORPUS_COLUMNS):
            raise ValueError(
                f"{path}: expected canonical corpus header {','.join(CORPUS_COLUMNS)}"
            )
        return [row for row in reader]


def score_corpus(cfg: AdapterConfig, classifier: Classifier | None = None) -> ScoreSummary:
    """Write one interchange row per corpus row; partial output never survives.

    Empty-content rows (which a filtered corpus should not contain) default
    to neutral/0.5 and are counted. `classifier` defaults to the pretrained
    transformer named in the config.
    """
    rows = read_canonical_corpus(cfg.corpus)
    if classifier is None:
        classifier = TransformersClassifier(cfg.model, cfg.max_length)

    results: list[tuple[str, float]] = []
    truncated = 0
    empty_defaulted = 0
    pending: list[int] = []

    for start in range(0, len(rows), cfg.batch_size):
        batch_rows = rows[start : start + cfg.batch_size]
        texts = []
        slots = []
        for offset, row in enumerate(batch_rows):
            if row["content"].strip():
                texts.append(row["content"])
                slots.append(start + offset)
            else:
                empty_defaulted += 1
        batch_out: list[tuple[str, float] | None] = [None] * len(batch_rows)
        if texts:
            scored, overlong = classifier(texts)
            truncated += overlong
            if len(scored) != len(texts):
                raise RowCountMismatch(
                    f"classifier returned {len(scored)} results for {len(texts)} texts"
                )
            for slot, pair in zip(slots, scored):
                label, prob = pair
                if label not in LABELS or not 0.0 <= prob <= 1.0:
                    raise ValueError(f"classifier produced invalid output ({label!r}, {prob!r})")
                batch_out[slot - start] = pair
        for offset in range(len(batch_rows)):
            results.append(batch_out[offset] if batch_out[offset] is not None else ("neutral", 0.5))

    out_path = Path(cfg.out)
    try:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# model: {cfg.model}\n")
            fh.write("# preprocessing: @mentions masked to @user, links masked to http\n")
            fh.write(f"# max_length: {cfg.max_length} tokens, truncated rows: {truncated}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(INTERCHANGE_COLUMNS)
            if len(results) != len(rows):
                raise RowCountMismatch(f"{len(results)} scores for {len(rows)} corpus rows")
            for row, (label, prob) in zip(rows, results):
                digest = hashlib.sha256(row["content"].encode("utf-8")).hexdigest()
                writer.writerow([row["timestamp"], row["author_hash"], digest, label, repr(prob)])
    except BaseException:
        if out_path.exists():
            os.unlink(out_path)
        raise

    return ScoreSummary(rows=len(rows), truncated=truncated, empty_defaulted=empty_defaulted)
