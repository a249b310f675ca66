"""Per-message sentiment, daily aggregation and discretization.

Messages carry a polarity label s in {+1, 0, -1} and a confidence gamma in
[0, 1]. The daily score is the confidence-weighted mean of labels over the
day's messages; days without messages score 0 (neutral), the fixed point of
the aggregation. Classification is pluggable: scores computed elsewhere
arrive through the interchange file contract, and a small lexicon fallback
keeps the pipeline self-contained.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import re
from dataclasses import dataclass
from datetime import date, timedelta, timezone
from pathlib import Path
from typing import IO, Mapping, Protocol, Sequence

from .corpus import Corpus, RawMessage, parse_timestamp
from .errors import DataContractError, ParseError

INTERCHANGE_COLUMNS = ("timestamp", "author_hash", "content_sha256", "label", "score")

LABEL_TO_S = {"negative": -1, "neutral": 0, "positive": 1}
S_TO_LABEL = {v: k for k, v in LABEL_TO_S.items()}

NEGATIVE_MAX = -0.1  # negative is [-1, -0.1); -0.1 itself is neutral
POSITIVE_MIN = 0.1  # positive is (0.1, 1]; 0.1 itself is neutral

_TOKEN_RE = re.compile(r"[a-z0-9]+")

NEUTRAL_FALLBACK_CONFIDENCE = 0.5


class OutOfRange(DataContractError):
    def __init__(self, score: float):
        super().__init__(f"sentiment score {score!r} outside [-1, 1]")
        self.score = score


class EmptyInput(DataContractError):
    pass


class DanglingReference(DataContractError):
    def __init__(self, index: int):
        super().__init__(f"sentiment references message index {index} outside the corpus")
        self.index = index


class LabelOutOfRange(ParseError):
    def __init__(self, label: str, line: int):
        super().__init__(f"line {line}: unknown label {label!r}")
        self.label = label


class ConfidenceOutOfRange(ParseError):
    def __init__(self, value: str, line: int):
        super().__init__(f"line {line}: confidence {value!r} outside [0, 1]")
        self.value = value


def discretize(score: float) -> str:
    """Map a daily score onto {negative, neutral, positive}.

    Boundary semantics: -0.1 and 0.1 are both neutral; strictly below -0.1
    is negative, strictly above 0.1 is positive.
    """
    if not math.isfinite(score) or score < -1.0 or score > 1.0:
        raise OutOfRange(score)
    if score < NEGATIVE_MAX:
        return "negative"
    if score > POSITIVE_MIN:
        return "positive"
    return "neutral"


@dataclass(frozen=True, slots=True)
class MessageSentiment:
    """Classifier verdict for one corpus message (by index)."""

    index: int
    s: int
    gamma: float

    def __post_init__(self):
        if self.s not in (-1, 0, 1):
            raise ValueError(f"label must be -1, 0 or +1, got {self.s!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.gamma!r}")
        if self.index < 0:
            raise ValueError("message index must be >= 0")


@dataclass(frozen=True, slots=True)
class DailySentiment:
    date: date
    score: float
    n: int
    klass: str

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("message count must be >= 0")
        if self.n == 0 and self.score != 0.0:
            raise ValueError("a day without messages must score 0")
        if self.klass != discretize(self.score):
            raise ValueError(f"class {self.klass!r} inconsistent with score {self.score}")


def daily_sentiment(day: date, score: float, n: int) -> DailySentiment:
    return DailySentiment(day, score, n, discretize(score))


class SentimentProvider(Protocol):
    """Batch classifier: texts in, one (label, confidence) pair per text."""

    def score_batch(self, texts: Sequence[str]) -> list[tuple[int, float]]: ...


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def lexicon_classify(text: str, lexicon: Mapping[str, int]) -> tuple[int, float]:
    """Polarity by summed lexicon hits over lowercase alphanumeric tokens.

    s is the sign of the summed polarity; gamma is min(1, |sum| / tokens)
    for polar text and a fixed 0.5 for neutral text.
    """
    if not lexicon:
        raise ValueError("lexicon must be non-empty")
    tokens = _tokenize(text)
    total = sum(lexicon.get(tok, 0) for tok in tokens)
    if total == 0:
        return 0, NEUTRAL_FALLBACK_CONFIDENCE
    s = 1 if total > 0 else -1
    gamma = min(1.0, abs(total) / max(1, len(tokens)))
    return s, gamma


# Small polarity lexicon for informal crypto/community chat. Fallback only;
# externally computed scores always take precedence when provided.
DEFAULT_LEXICON: dict[str, int] = {
    "amazing": 1, "awesome": 1, "beautiful": 1, "bullish": 1, "cool": 1,
    "excellent": 1, "excited": 1, "fantastic": 1, "fun": 1, "gain": 1,
    "gains": 1, "glad": 1, "good": 1, "great": 1, "happy": 1, "hype": 1,
    "impressive": 1, "lfg": 1, "like": 1, "love": 1, "moon": 1, "nice": 1,
    "pump": 1, "rally": 1, "solid": 1, "stoked": 1, "thanks": 1,
    "thriving": 1, "up": 1, "win": 1, "wonderful": 1, "wow": 1,
    "angry": -1, "awful": -1, "bad": -1, "bearish": -1, "broken": -1,
    "buggy": -1, "crash": -1, "disappointed": -1, "down": -1, "dump": -1,
    "fail": -1, "fud": -1, "glitch": -1, "hate": -1, "horrible": -1,
    "lag": -1, "laggy": -1, "loss": -1, "mess": -1, "poor": -1,
    "problem": -1, "rekt": -1, "rug": -1, "sad": -1, "scam": -1,
    "slow": -1, "stuck": -1, "terrible": -1, "ugly": -1, "worst": -1,
}


class LexiconProvider:
    """Stateless fallback provider backed by a word-polarity map."""

    def __init__(self, lexicon: Mapping[str, int] | None = None):
        self.lexicon = dict(lexicon) if lexicon is not None else dict(DEFAULT_LEXICON)
        if not self.lexicon:
            raise ValueError("lexicon must be non-empty")

    def score_batch(self, texts: Sequence[str]) -> list[tuple[int, float]]:
        return [lexicon_classify(t, self.lexicon) for t in texts]


def classify_corpus(corpus: Corpus, provider: SentimentProvider) -> list[MessageSentiment]:
    """Run a provider over every message of a corpus, preserving order."""
    pairs = provider.score_batch([m.content for m in corpus.messages])
    if len(pairs) != len(corpus.messages):
        raise DataContractError(
            f"provider returned {len(pairs)} results for {len(corpus.messages)} messages"
        )
    return [MessageSentiment(i, s, g) for i, (s, g) in enumerate(pairs)]


def content_sha256(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


def message_key(message: RawMessage) -> tuple[str, str, str]:
    """Stable interchange key: canonical timestamp, author hash, content hash."""
    return (
        message.timestamp.isoformat(),
        message.author_id,
        content_sha256(message.content),
    )


@dataclass(frozen=True)
class InterchangeDiagnostics:
    """Rows that could not be applied and messages left unscored."""

    unmatched: tuple[str, ...] = ()
    duplicate: tuple[str, ...] = ()
    missing: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return len(self.unmatched) + len(self.duplicate) + len(self.missing)


def _as_text(source: str | Path | IO[str] | IO[bytes]) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    raise TypeError(f"unsupported source type {type(source)!r}")


def load_interchange_scores(
    source: str | Path | IO[str] | IO[bytes],
    corpus: Corpus,
) -> tuple[list[MessageSentiment], InterchangeDiagnostics]:
    """Attach externally computed scores to corpus messages by stable key.

    Leading `#` lines are comments. Score rows that match no message (or
    repeat a key) and messages that end up unscored are reported, never
    silently ignored. Invalid labels or confidences abort the load.
    """
    key_to_indices: dict[tuple[str, str, str], list[int]] = {}
    for i, m in enumerate(corpus.messages):
        key_to_indices.setdefault(message_key(m), []).append(i)

    stream = _as_text(source)
    lines = (line for line in stream if not line.startswith("#"))
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty interchange file")
    names = [h.strip() for h in header]
    try:
        idx = {c: names.index(c) for c in INTERCHANGE_COLUMNS}
    except ValueError as exc:
        raise ParseError(f"interchange header missing column: {exc}") from None

    assigned: dict[int, MessageSentiment] = {}
    unmatched: list[str] = []
    duplicate: list[str] = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        line = reader.line_num
        if len(row) < len(names):
            raise ParseError(f"line {line}: expected {len(names)} fields, got {len(row)}")
        label = row[idx["label"]].strip().lower()
        if label not in LABEL_TO_S:
            raise LabelOutOfRange(label, line)
        raw_score = row[idx["score"]].strip()
        try:
            gamma = float(raw_score)
        except ValueError:
            raise ConfidenceOutOfRange(raw_score, line) from None
        if not math.isfinite(gamma) or not 0.0 <= gamma <= 1.0:
            raise ConfidenceOutOfRange(raw_score, line)
        try:
            ts = parse_timestamp(row[idx["timestamp"]]).isoformat()
        except ValueError:
            raise ParseError(f"line {line}: malformed timestamp") from None
        key = (ts, row[idx["author_hash"]].strip(), row[idx["content_sha256"]].strip())
        indices = key_to_indices.get(key)
        if indices is None:
            unmatched.append("|".join(key))
            continue
        if indices[0] in assigned:
            duplicate.append("|".join(key))
            continue
        for i in indices:
            assigned[i] = MessageSentiment(i, LABEL_TO_S[label], gamma)

    missing = [
        "|".join(message_key(corpus.messages[i]))
        for i in range(len(corpus.messages))
        if i not in assigned
    ]
    sentiments = [assigned[i] for i in sorted(assigned)]
    diags = InterchangeDiagnostics(tuple(unmatched), tuple(duplicate), tuple(missing))
    return sentiments, diags


def write_interchange_scores(
    corpus: Corpus,
    sentiments: Sequence[MessageSentiment],
    dest: str | Path | IO[str],
    header_comment: str | None = None,
) -> None:
    """Write scores in the interchange format (the adapter emits the same)."""
    own = isinstance(dest, (str, Path))
    out = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        if header_comment:
            for line in header_comment.splitlines():
                out.write(f"# {line}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(INTERCHANGE_COLUMNS)
        for sent in sentiments:
            ts, author, digest = message_key(corpus.messages[sent.index])
            writer.writerow([ts, author, digest, S_TO_LABEL[sent.s], repr(sent.gamma)])
    finally:
        if own:
            out.close()


def aggregate_daily(
    sentiments: Sequence[MessageSentiment],
    corpus: Corpus,
) -> list[DailySentiment]:
    """Confidence-weighted daily mean of message labels.

    Messages bucket to UTC calendar days. The output covers every day from
    the first to the last corpus message; days without scored messages get
    n=0, score 0 and class neutral.
    """
    if not corpus.messages:
        return []
    sums: dict[date, float] = {}
    counts: dict[date, int] = {}
    for sent in sentiments:
        if sent.index >= len(corpus.messages):
            raise DanglingReference(sent.index)
        day = corpus.messages[sent.index].timestamp.astimezone(timezone.utc).date()
        sums[day] = sums.get(day, 0.0) + sent.s * sent.gamma
        counts[day] = counts.get(day, 0) + 1

    first = corpus.messages[0].timestamp.astimezone(timezone.utc).date()
    last = corpus.messages[-1].timestamp.astimezone(timezone.utc).date()
    out: list[DailySentiment] = []
    day = first
    while day <= last:
        n = counts.get(day, 0)
        score = sums[day] / n if n else 0.0
        out.append(daily_sentiment(day, score, n))
        day += timedelta(days=1)
    return out


def distribution(sentiments: Sequence[MessageSentiment]) -> dict[str, float]:
    """Message-level label shares, in percent (keys positive/neutral/negative)."""
    if not sentiments:
        raise EmptyInput("cannot compute a distribution over zero messages")
    counts = {1: 0, 0: 0, -1: 0}
    for sent in sentiments:
        counts[sent.s] += 1
    total = len(sentiments)
    return {S_TO_LABEL[s]: 100.0 * counts[s] / total for s in (1, 0, -1)}


def write_daily_sentiment(daily: Sequence[DailySentiment], dest: str | Path | IO[str]) -> None:
    own = isinstance(dest, (str, Path))
    out = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["date", "score", "n", "klass"])
        for d in daily:
            writer.writerow([d.date.isoformat(), repr(d.score), d.n, d.klass])
    finally:
        if own:
            out.close()


def read_daily_sentiment(source: str | Path | IO[str] | IO[bytes]) -> list[DailySentiment]:
    """Read a daily-sentiment file, revalidating every invariant."""
    stream = _as_text(source)
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty daily sentiment file")
    if [h.strip() for h in header] != ["date", "score", "n", "klass"]:
        raise ParseError("daily sentiment header must be date,score,n,klass")
    out: list[DailySentiment] = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        line = reader.line_num
        try:
            day = date.fromisoformat(row[0].strip())
            score = float(row[1])
            n = int(row[2])
            parsed = DailySentiment(day, score, n, row[3].strip())
        except (ValueError, IndexError) as exc:
            raise ParseError(f"line {line}: {exc}") from None
        out.append(parsed)
    return out
