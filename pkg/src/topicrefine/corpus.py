"""Corpus ingestion, LLM response parsing, and topic pool construction."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import DomainError, ParseError, ResponseFormatError, SchemaError

# Default preprocessing for the English survey corpus: template labels to
# strip and placeholder responses that mean "no content".
DEFAULT_STRIP_PHRASES = ("Comment Title", "Liked", "Disliked", "Advice")
DEFAULT_DROP_VALUES = ("nothing", "n/a")

# JSON keys per language for the generated-topics response.
RESPONSE_SCHEMAS = {
    "en": {"id": "Comment", "sentiment": "Sentiment", "topics": "Topics"},
    "fr": {"id": "ID", "sentiment": "Sentiment", "topics": "Sujets"},
}


@dataclass(frozen=True)
class PreprocessRules:
    strip_phrases: tuple = DEFAULT_STRIP_PHRASES
    drop_values: tuple = DEFAULT_DROP_VALUES

    @staticmethod
    def none():
        return PreprocessRules(strip_phrases=(), drop_values=())


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    language: str = "en"

    @property
    def token_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class GeneratedTopicRecord:
    doc_id: str
    sentiment: str
    topic_phrases: tuple


@dataclass
class TopicPhrase:
    id: int
    phrase: str
    words: list
    assigned_docs: set = field(default_factory=set)


def _clean_text(text: str, rules: PreprocessRules) -> str:
    for phrase in rules.strip_phrases:
        # Strip the template label and an optional trailing colon.
        text = re.sub(re.escape(phrase) + r"\s*:?", " ", text)
    return " ".join(text.split())


def ingest_documents(path, language="en", rules=None):
    """Read a JSONL corpus, strip template phrases, drop empty responses."""
    if rules is None:
        rules = PreprocessRules() if language == "en" else PreprocessRules.none()
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise SchemaError(f"line {lineno}: expected object with 'id' and 'text'")
            text = _clean_text(str(obj["text"]), rules)
            if not text or text.lower() in rules.drop_values:
                continue
            docs.append(Document(id=str(obj["id"]), text=text, language=language))
    return docs


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*\n(.*)\n?```\s*$", re.DOTALL)


def _repair_json(raw: str) -> str:
    text = raw.strip()
    m = _FENCE_RE.match(text)
    if m:
        text = m.group(1).strip()
    # Drop trailing commas before a closing bracket/brace.
    text = re.sub(r",\s*([\]}])", r"\1", text)
    return text


def parse_topic_response(raw, schema="en"):
    """Parse the LLM's JSON array of per-document sentiment/topic records."""
    keys = RESPONSE_SCHEMAS[schema] if isinstance(schema, str) else schema
    try:
        data = json.loads(_repair_json(raw))
    except json.JSONDecodeError as exc:
        raise ResponseFormatError(f"unparseable response: {exc}", raw=raw) from exc
    if not isinstance(data, list):
        raise ResponseFormatError("expected a JSON array of records", raw=raw)
    records = []
    for item in data:
        if not isinstance(item, dict) or keys["id"] not in item:
            raise ResponseFormatError(f"record missing key {keys['id']!r}", raw=raw)
        phrases = item.get(keys["topics"], []) or []
        phrases = tuple(p.strip() for p in phrases if p and p.strip())
        records.append(
            GeneratedTopicRecord(
                doc_id=str(item[keys["id"]]),
                sentiment=str(item.get(keys["sentiment"], "")),
                topic_phrases=phrases,
            )
        )
    return records


def tokenize_phrase(phrase: str):
    """Lowercase, split on whitespace, strip surrounding punctuation.

    Internal hyphens and apostrophes are kept ("self-diagnosis" stays one word).
    """
    words = []
    for tok in phrase.lower().split():
        tok = tok.strip("\"'.,;:!?()[]{}«»“”‘’…-")
        if tok:
            words.append(tok)
    return words


def build_topic_pool(records):
    """Deduplicate phrases case-insensitively and merge doc assignments."""
    topics = []
    by_key = {}
    assignments = {}
    for rec in records:
        for phrase in rec.topic_phrases:
            key = phrase.casefold()
            if key not in by_key:
                words = tokenize_phrase(phrase)
                if not words:
                    continue
                tp = TopicPhrase(id=len(topics), phrase=phrase, words=words)
                by_key[key] = tp
                topics.append(tp)
            tp = by_key[key]
            tp.assigned_docs.add(rec.doc_id)
            assignments.setdefault(rec.doc_id, [])
            if tp.id not in assignments[rec.doc_id]:
                assignments[rec.doc_id].append(tp.id)
    return topics, assignments


def pool_to_json(topics, assignments):
    return {
        "topics": [
            {
                "id": t.id,
                "phrase": t.phrase,
                "words": list(t.words),
                "docs": sorted(t.assigned_docs),
            }
            for t in topics
        ],
        "assignments": {doc: list(ids) for doc, ids in sorted(assignments.items())},
    }


def pool_from_json(obj):
    topics = [
        TopicPhrase(
            id=t["id"], phrase=t["phrase"], words=list(t["words"]),
            assigned_docs=set(t["docs"]),
        )
        for t in obj["topics"]
    ]
    assignments = {doc: list(ids) for doc, ids in obj["assignments"].items()}
    return topics, assignments


def vocabulary(topics):
    """Unique words across the pool, in first-seen order."""
    seen = {}
    for t in topics:
        for w in t.words:
            seen.setdefault(w, None)
    return list(seen)


def require_nonempty_pool(topics):
    if not topics:
        raise DomainError("empty topic pool")
