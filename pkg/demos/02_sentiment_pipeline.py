#!/usr/bin/env python3
# From a raw chat export to daily sentiment scores: parse, filter, classify
# with the lexicon fallback, aggregate per day, and discretize.

import io

from tokencast.corpus import FilterConfig, filter_corpus, hash_author, parse_chat_export
from tokencast.sentiment import (
    LexiconProvider,
    aggregate_daily,
    classify_corpus,
    distribution,
)

EXPORT = """AuthorID,Author,Date,Content,Attachments,Reactions
u1,alice,2023-06-15T09:10:00Z,love the new wearables drop,,3
u2,bob,2023-06-15T10:45:00Z,marketplace is so laggy today,,1
u3,caro,2023-06-15T11:02:00Z,anyone around for a build session?,,0
u2,bob,2023-06-16T08:30:00Z,lag is fixed. great patch!,,2
bot7,statbot,2023-06-16T08:31:00Z,daily stats posted,,0
u1,alice,2023-06-16T09:00:00Z,,,0
u4,dana,2023-06-17T14:20:00Z,scam links in dms again. terrible,,0
u4,dana,2023-06-17T14:20:00Z,scam links in dms again. terrible,,0
"""

messages, diagnostics = parse_chat_export(io.StringIO(EXPORT), salt="demo-salt")
print(f"parsed {len(messages)} messages ({len(diagnostics)} bad rows)")
print("author identifiers are salted hashes now:", messages[0].author_id)

# the bot list holds identifiers as they appear on messages, i.e. hashed
rules = FilterConfig(bot_ids=frozenset({hash_author("bot7", "demo-salt")}))
corpus = filter_corpus(messages, rules)
stats = corpus.stats
print(
    f"\nfilter: kept {stats.kept}/{stats.total} "
    f"(empty {stats.dropped_empty}, attachment-only {stats.dropped_attachment_only}, "
    f"bot {stats.dropped_bot}, duplicate {stats.dropped_duplicate})"
)

sentiments = classify_corpus(corpus, LexiconProvider())
shares = distribution(sentiments)
print("\nmessage-level label shares:")
for label in ("positive", "neutral", "negative"):
    print(f"  {label:<9} {shares[label]:6.2f}%")

daily = aggregate_daily(sentiments, corpus)
print("\nday         score    n  class")
for d in daily:
    print(f"{d.date}  {d.score:+.4f}  {d.n}  {d.klass}")
