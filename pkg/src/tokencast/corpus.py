"""Chat-export ingestion: header-driven parsing, anonymization, filtering.

Exports are delimited text with at least a timestamp, an author identifier
and a message body. Raw author identifiers never survive parsing: they are
replaced by a salted one-way hash unless the input already carries the
canonical `author_hash` column.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import DataContractError, ParseError

CANONICAL_COLUMNS = ("timestamp", "author_hash", "content", "attachments", "reactions")

_TIMESTAMP_ALIASES = ("timestamp", "date", "date & time", "datetime")
_AUTHOR_ALIASES = ("author id", "authorid", "author_id", "author")
_CONTENT_ALIASES = ("content", "message", "text")


class MissingColumn(ParseError):
    def __init__(self, name: str):
        super().__init__(f"required column {name!r} not found in header")
        self.name = name


class EmptyFile(ParseError):
    pass


@dataclass(frozen=True, slots=True)
class RawMessage:
    timestamp: datetime
    author_id: str
    content: str
    attachments: int = 0
    reactions: int = 0

    def __post_init__(self):
        if not self.author_id:
            raise ValueError("author_id must be non-empty")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")
        if self.attachments < 0 or self.reactions < 0:
            raise ValueError("attachment/reaction counts must be >= 0")


@dataclass(frozen=True, slots=True)
class ParseDiagnostic:
    line: int
    reason: str


def hash_author(author_id: str, salt: str) -> str:
    """Salted one-way hash of an author identifier (16 hex chars)."""
    digest = hashlib.sha256(f"{salt}:{author_id}".encode("utf-8")).hexdigest()
    return digest[:16]


def parse_timestamp(text: str) -> datetime:
    """Accept ISO-8601 or `DD-MMM-YY hh:mm AM/PM`; result is UTC-aware."""
    s = text.strip()
    if not s:
        raise ValueError("empty timestamp")
    try:
        ts = datetime.fromisoformat(s.replace("Z", "+00:00"))
    except ValueError:
        ts = datetime.strptime(s, "%d-%b-%y %I:%M %p")
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _count_field(text: str) -> int:
    """Attachment/reaction cells are either counts or delimited item lists."""
    s = text.strip()
    if not s:
        return 0
    try:
        return max(0, int(float(s)))
    except ValueError:
        return sum(1 for part in s.split(";") if part.strip())


def _as_text(source: str | Path | IO[str] | IO[bytes]) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    raise TypeError(f"unsupported source type {type(source)!r}")


def _find_column(names: list[str], aliases: Sequence[str]) -> int | None:
    lowered = [n.strip().lower() for n in names]
    for alias in aliases:
        if alias in lowered:
            return lowered.index(alias)
    return None


def parse_chat_export(
    source: str | Path | IO[str] | IO[bytes],
    *,
    salt: str = "",
    delimiter: str = ",",
) -> tuple[list[RawMessage], list[ParseDiagnostic]]:
    """Parse one chat export into messages sorted by timestamp.

    Unparseable rows (bad timestamps, missing authors, stray repeated
    headers from concatenated exports) are reported with their line number
    and excluded, never silently dropped. Author identifiers are hashed
    with `salt` unless the column is already `author_hash`.
    """
    stream = _as_text(source)
    reader = csv.reader(stream, delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        raise EmptyFile("no header row")
    names = [h.strip() for h in header]
    lowered = [n.lower() for n in names]

    pre_hashed = "author_hash" in lowered
    if pre_hashed:
        author_idx: int | None = lowered.index("author_hash")
    else:
        author_idx = _find_column(names, _AUTHOR_ALIASES)
    ts_idx = _find_column(names, _TIMESTAMP_ALIASES)
    content_idx = _find_column(names, _CONTENT_ALIASES)
    if ts_idx is None:
        raise MissingColumn("Date")
    if author_idx is None:
        raise MissingColumn("Author ID")
    if content_idx is None:
        raise MissingColumn("Content")
    attach_idx = _find_column(names, ("attachments",))
    react_idx = _find_column(names, ("reactions",))

    messages: list[RawMessage] = []
    diagnostics: list[ParseDiagnostic] = []
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        line = reader.line_num
        if [c.strip() for c in row] == names:
            diagnostics.append(ParseDiagnostic(line, "repeated header row"))
            continue
        if len(row) <= max(i for i in (ts_idx, author_idx, content_idx) if i is not None):
            diagnostics.append(ParseDiagnostic(line, "too few fields"))
            continue
        try:
            ts = parse_timestamp(row[ts_idx])
        except ValueError:
            diagnostics.append(ParseDiagnostic(line, "malformed timestamp"))
            continue
        author = row[author_idx].strip()
        if not author:
            diagnostics.append(ParseDiagnostic(line, "empty author"))
            continue
        if not pre_hashed:
            author = hash_author(author, salt)
        attachments = _count_field(row[attach_idx]) if attach_idx is not None and attach_idx < len(row) else 0
        reactions = _count_field(row[react_idx]) if react_idx is not None and react_idx < len(row) else 0
        messages.append(
            RawMessage(
                timestamp=ts,
                author_id=author,
                content=row[content_idx],
                attachments=attachments,
                reactions=reactions,
            )
        )

    messages.sort(key=lambda m: m.timestamp)
    return messages, diagnostics


def merge_messages(*batches: Iterable[RawMessage]) -> list[RawMessage]:
    """Merge several parsed exports into one timestamp-sorted list."""
    merged: list[RawMessage] = []
    for batch in batches:
        merged.extend(batch)
    merged.sort(key=lambda m: m.timestamp)
    return merged


@dataclass(frozen=True)
class FilterConfig:
    """Per-rule toggles for corpus filtering.

    `bot_ids` holds identifiers as they appear on the messages, i.e. the
    hashed form for an anonymized corpus.
    """

    drop_empty: bool = True
    drop_attachment_only: bool = True
    bot_ids: frozenset[str] = frozenset()
    drop_duplicates: bool = True


@dataclass(frozen=True)
class CorpusStats:
    total: int
    kept: int
    dropped_empty: int = 0
    dropped_attachment_only: int = 0
    dropped_bot: int = 0
    dropped_duplicate: int = 0

    def __post_init__(self):
        dropped = (
            self.dropped_empty
            + self.dropped_attachment_only
            + self.dropped_bot
            + self.dropped_duplicate
        )
        if self.kept + dropped != self.total:
            raise ValueError("kept + dropped must equal total")

    @property
    def dropped(self) -> int:
        return self.total - self.kept


@dataclass(frozen=True)
class Corpus:
    messages: tuple[RawMessage, ...]
    stats: CorpusStats

    def __post_init__(self):
        for prev, cur in zip(self.messages, self.messages[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValueError("corpus messages must be sorted by timestamp")

    def __len__(self) -> int:
        return len(self.messages)


def filter_corpus(messages: Sequence[RawMessage], rules: FilterConfig | None = None) -> Corpus:
    """Drop invalid messages, attributing each drop to exactly one rule.

    Rules apply first-match in a fixed order: empty (whitespace-only content
    and no attachments) -> attachment-only (whitespace-only content with
    attachments) -> bot author -> exact duplicate (timestamp, author,
    content) triple. Surviving messages keep their input order; filtering an
    already-filtered corpus changes nothing.
    """
    rules = rules or FilterConfig()
    for prev, cur in zip(messages, messages[1:]):
        if cur.timestamp < prev.timestamp:
            raise DataContractError("messages must be sorted by timestamp before filtering")

    kept: list[RawMessage] = []
    seen: set[tuple[datetime, str, str]] = set()
    n_empty = n_attach = n_bot = n_dup = 0
    for msg in messages:
        blank = not msg.content.strip()
        if rules.drop_empty and blank and msg.attachments == 0:
            n_empty += 1
            continue
        if rules.drop_attachment_only and blank and msg.attachments > 0:
            n_attach += 1
            continue
        if msg.author_id in rules.bot_ids:
            n_bot += 1
            continue
        triple = (msg.timestamp, msg.author_id, msg.content)
        if rules.drop_duplicates:
            if triple in seen:
                n_dup += 1
                continue
            seen.add(triple)
        kept.append(msg)

    stats = CorpusStats(
        total=len(messages),
        kept=len(kept),
        dropped_empty=n_empty,
        dropped_attachment_only=n_attach,
        dropped_bot=n_bot,
        dropped_duplicate=n_dup,
    )
    return Corpus(tuple(kept), stats)


def write_corpus(corpus: Corpus, dest: str | Path | IO[str]) -> None:
    """Write the canonical corpus file (UTF-8, RFC-4180 quoting)."""
    own = isinstance(dest, (str, Path))
    out = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CANONICAL_COLUMNS)
        for m in corpus.messages:
            writer.writerow(
                [m.timestamp.isoformat(), m.author_id, m.content, m.attachments, m.reactions]
            )
    finally:
        if own:
            out.close()


def read_corpus(source: str | Path | IO[str] | IO[bytes]) -> Corpus:
    """Read a canonical corpus file back; any bad row is a hard error."""
    messages, diagnostics = parse_chat_export(source)
    if diagnostics:
        first = diagnostics[0]
        raise ParseError(
            f"canonical corpus has {len(diagnostics)} bad row(s); first: line {first.line}: {first.reason}"
        )
    stats = CorpusStats(total=len(messages), kept=len(messages))
    return Corpus(tuple(messages), stats)
