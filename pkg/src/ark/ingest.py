"""Knowledge ingestion: raw entity descriptions and relation triples become a
deduplicated pool of verbalized statements, ready for embedding and indexing.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

SOURCES = ("wikidata-style", "conceptnet-style", "custom")

# Fixed verbalization template per relation. The seven relations are closed;
# anything else is rejected at parse time.
RELATION_TEMPLATES = {
    "IsCapableOf": "{h} is capable of {t}",
    "HasProperty": "{h} has property {t}",
    "Causes": "{h} causes {t}",
    "AtLocation": "{h} is at location {t}",
    "PartOf": "{h} is part of {t}",
    "MadeOf": "{h} is made of {t}",
    "UsedFor": "{h} is used for {t}",
}

RELATIONS = tuple(RELATION_TEMPLATES)

# Statements whose ASCII-letter ratio falls below this are treated as
# non-English and dropped by filter_non_english.
ASCII_RATIO_THRESHOLD = 0.9


class IngestError(Exception):
    pass


class UnknownRelation(IngestError):
    def __init__(self, relation: str):
        super().__init__(f"unknown relation: {relation!r} (expected one of {', '.join(RELATIONS)})")
        self.relation = relation


def _normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip()).casefold()


def _make_id(source: str, normalized_text: str) -> str:
    digest = hashlib.sha1(normalized_text.encode("utf-8")).hexdigest()[:12]
    prefix = {"wikidata-style": "wd", "conceptnet-style": "cn", "custom": "cu"}[source]
    return f"{prefix}-{digest}"


@dataclass(frozen=True)
class KnowledgeStatement:
    """One verbalized fact. `text` always contains `head_entity` verbatim."""

    id: str
    text: str
    source: str
    head_entity: str
    tail: str
    relation: Optional[str] = None

    def validate(self) -> None:
        if not self.text:
            raise IngestError(f"statement {self.id}: empty text")
        if self.head_entity not in self.text:
            raise IngestError(f"statement {self.id}: head entity {self.head_entity!r} not in text")
        if self.source not in SOURCES:
            raise IngestError(f"statement {self.id}: bad source {self.source!r}")
        if (self.relation is not None) != (self.source == "conceptnet-style"):
            raise IngestError(f"statement {self.id}: relation presence must match conceptnet-style source")
        if self.relation is not None and self.relation not in RELATIONS:
            raise UnknownRelation(self.relation)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "source": self.source,
            "relation": self.relation,
            "head_entity": self.head_entity,
            "tail": self.tail,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KnowledgeStatement":
        stmt = cls(
            id=obj["id"],
            text=obj["text"],
            source=obj["source"],
            relation=obj.get("relation"),
            head_entity=obj["head_entity"],
            tail=obj["tail"],
        )
        stmt.validate()
        return stmt


@dataclass
class RejectReport:
    """Counts of inputs skipped during parsing or filtering."""

    empty_fields: int = 0
    unknown_relations: int = 0
    non_english: int = 0
    duplicates: int = 0


@dataclass
class KnowledgePool:
    """Ordered, deduplicated collection of statements.

    Dedup key is the normalized text (case-folded, whitespace-collapsed), so
    re-ingesting the same records is a no-op.
    """

    statements: list[KnowledgeStatement] = field(default_factory=list)
    _seen: set[str] = field(default_factory=set, repr=False)
    rejects: RejectReport = field(default_factory=RejectReport)

    def add(self, statement: KnowledgeStatement) -> bool:
        statement.validate()
        key = _normalize_text(statement.text)
        if key in self._seen:
            self.rejects.duplicates += 1
            return False
        self._seen.add(key)
        self.statements.append(statement)
        return True

    def extend(self, statements: Iterable[KnowledgeStatement]) -> None:
        for s in statements:
            self.add(s)

    def __len__(self) -> int:
        return len(self.statements)

    @property
    def source_manifest(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.statements:
            counts[s.source] = counts.get(s.source, 0) + 1
        return counts

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s in self.statements:
                f.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "KnowledgePool":
        pool = cls()
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    pool.add(KnowledgeStatement.from_json(json.loads(line)))
        return pool


def parse_entity_descriptions(
    records: Iterable[tuple[str, str]], rejects: Optional[RejectReport] = None
) -> list[KnowledgeStatement]:
    """Verbalize (entity, description) pairs as "{entity} is a {description}".

    Records with an empty entity or description (after trimming) are skipped
    and counted in the rejects report.
    """
    rejects = rejects if rejects is not None else RejectReport()
    out = []
    for entity, description in records:
        entity = entity.strip()
        description = description.strip()
        if not entity or not description:
            rejects.empty_fields += 1
            continue
        text = f"{entity} is a {description}"
        out.append(
            KnowledgeStatement(
                id=_make_id("wikidata-style", _normalize_text(text)),
                text=text,
                source="wikidata-style",
                head_entity=entity,
                tail=description,
            )
        )
    return out


def parse_triples(
    triples: Iterable[tuple[str, str, str]], rejects: Optional[RejectReport] = None
) -> list[KnowledgeStatement]:
    """Verbalize (head, relation, tail) triples via the fixed template table."""
    rejects = rejects if rejects is not None else RejectReport()
    out = []
    for head, relation, tail in triples:
        head = head.strip()
        tail = tail.strip()
        if not head or not tail:
            rejects.empty_fields += 1
            continue
        if relation not in RELATION_TEMPLATES:
            raise UnknownRelation(relation)
        text = RELATION_TEMPLATES[relation].format(h=head, t=tail)
        out.append(
            KnowledgeStatement(
                id=_make_id("conceptnet-style", _normalize_text(text)),
                text=text,
                source="conceptnet-style",
                relation=relation,
                head_entity=head,
                tail=tail,
            )
        )
    return out


def ascii_letter_ratio(text: str) -> float:
    letters = [c for c in text if c.isalpha()]
    if not letters:
        return 0.0
    ascii_letters = sum(1 for c in letters if "a" <= c.lower() <= "z")
    return ascii_letters / len(letters)


def filter_non_english(
    statements: list[KnowledgeStatement], rejects: Optional[RejectReport] = None
) -> list[KnowledgeStatement]:
    """Drop statements failing the ASCII-letter-ratio heuristic (>= 0.9 kept)."""
    rejects = rejects if rejects is not None else RejectReport()
    kept = []
    for s in statements:
        if ascii_letter_ratio(s.text) >= ASCII_RATIO_THRESHOLD:
            kept.append(s)
        else:
            rejects.non_english += 1
    return kept


def read_tsv_entities(path: str | Path) -> list[tuple[str, str]]:
    """entity<TAB>description, one per line, UTF-8."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) >= 2:
                out.append((parts[0], parts[1]))
            else:
                out.append((parts[0], ""))
    return out


def read_tsv_triples(path: str | Path) -> list[tuple[str, str, str]]:
    """head<TAB>relation<TAB>tail, one per line, UTF-8."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            while len(parts) < 3:
                parts.append("")
            out.append((parts[0], parts[1], parts[2]))
    return out


def build_pool(
    entity_records: Iterable[tuple[str, str]] = (),
    triples: Iterable[tuple[str, str, str]] = (),
    language_filter: bool = True,
) -> KnowledgePool:
    pool = KnowledgePool()
    statements = parse_entity_descriptions(entity_records, pool.rejects)
    statements += parse_triples(triples, pool.rejects)
    if language_filter:
        statements = filter_non_english(statements, pool.rejects)
    pool.extend(statements)
    return pool
