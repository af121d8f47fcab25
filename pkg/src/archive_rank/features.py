"""Per-(query, document) feature extraction over non-content evidence.

Nineteen features spanning four evidence sources: the URL string, the link
graph, the anchor texts and the capture metadata, plus a one-hot block for
the query's entity type. Extraction is deterministic and reads only frozen
context structures, so (query, document) pairs can be processed in
parallel without coordination.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .anchor_index import (
    IndexStats,
    SurrogateDocument,
    term_stats,
    tokenize_text,
)
from .ingest import LinkRecord, RevisionRecord, filter_content_links
from .urls import SuffixTable, UrlError, core_url_str, normalize, tokenize_url, url_depth

__all__ = [
    "ENTITY_TYPES",
    "BASE_FEATURES",
    "FEATURE_NAMES",
    "WEEK_SECONDS",
    "DEFAULT_SEARCH_WORDS",
    "DEFAULT_SEARCH_SUBSTRINGS",
    "QueryRecord",
    "FeatureVector",
    "FeatureContext",
    "EvidenceSummary",
    "UnknownDocument",
    "VectorFormatError",
    "extract_features",
    "anchor_time_spans",
    "rev_duration",
    "per_query_evidence_summary",
    "candidate_docs",
    "serialize_vectors",
    "deserialize_vectors",
    "group_by_query",
    "load_queries",
    "load_wiki_citations",
    "load_word_table",
]

# Closed list of coarse entity categories a query can carry.
ENTITY_TYPES = (
    "politician",
    "scientist",
    "artist",
    "sport_player",
    "author",
    "entrepreneur",
    "organisation",
    "product",
    "location",
    "works",
    "event",
    "biology",
    "music",
    "astrology",
    "abstract_concept",
)

BASE_FEATURES = (
    "url_depth",
    "query_string_flag",
    "search_word_flag",
    "query_in_url",
    "news_url_flag",
    "wikipedia_url_count",
    "inlink_count",
    "pagerank_core",
    "pagerank_domain",
    "anchor_freq",
    "anchor_time_spans",
    "max_term_freq",
    "doc_len",
    "length_norm",
    "inverse_doc_freq",
    "revision_count",
    "rev_duration",
    "domain_size",
)
FEATURE_NAMES = BASE_FEATURES + tuple(f"entity_type={t}" for t in ENTITY_TYPES)

WEEK_SECONDS = 7 * 24 * 3600

DEFAULT_SEARCH_WORDS = frozenset({"such", "suche", "suchergebnis", "search", "query", "q"})
DEFAULT_SEARCH_SUBSTRINGS = ("query=",)


class UnknownDocument(ValueError):
    """Raised when features are requested for a document the archive never
    captured."""


class VectorFormatError(ValueError):
    """Raised on malformed serialized feature-vector lines."""


@dataclass(frozen=True)
class QueryRecord:
    """An entity query. Queries with commas or round brackets are flagged
    invalid (ambiguous entity names) and excluded from runs."""

    query_id: int
    text: str
    entity_type: str
    wiki_citation_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.entity_type not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type: {self.entity_type!r}")

    @property
    def valid(self) -> bool:
        return not any(ch in self.text for ch in ",()")

    @property
    def tokens(self) -> list[str]:
        return tokenize_text(self.text)


@dataclass(frozen=True)
class FeatureVector:
    query_id: int
    doc_id: str
    label: float
    values: tuple[float, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]


class EvidenceSummary(NamedTuple):
    mean: float
    median: float
    q1: float
    q3: float


@dataclass
class FeatureContext:
    """Frozen lookup structures shared by every extraction call."""

    surrogates: dict[str, SurrogateDocument]
    stats: IndexStats
    page_rank: dict[str, float]
    domain_rank: dict[str, float]
    inlink_counts: dict[str, int]
    revision_counts: dict[str, int]
    revision_times: dict[str, list[int]]
    has_query_component: dict[str, bool]
    doc_domain: dict[str, str]
    domain_sizes: dict[str, int]
    url_tokens: dict[str, tuple[str, ...]]
    news_domains: frozenset[str] = frozenset()
    search_words: frozenset[str] = DEFAULT_SEARCH_WORDS
    search_substrings: tuple[str, ...] = DEFAULT_SEARCH_SUBSTRINGS
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    @classmethod
    def build(
        cls,
        revisions: Iterable[RevisionRecord],
        links: Iterable[LinkRecord],
        surrogates: dict[str, SurrogateDocument],
        stats: IndexStats,
        page_rank: dict[str, float] | None = None,
        domain_rank: dict[str, float] | None = None,
        news_domains: Iterable[str] = (),
        search_words: Iterable[str] | None = None,
        suffixes: SuffixTable | None = None,
        inlink_dedup: str = "unique_per_revision",
        bm25_k1: float = 1.2,
        bm25_b: float = 0.75,
    ) -> "FeatureContext":
        revision_counts: dict[str, int] = defaultdict(int)
        revision_times: dict[str, set[int]] = defaultdict(set)
        has_query: dict[str, bool] = defaultdict(bool)
        doc_domain: dict[str, str] = {}
        domain_members: dict[str, set[str]] = defaultdict(set)
        url_tokens: dict[str, tuple[str, ...]] = {}
        for rev in revisions:
            core = rev.core_url
            revision_counts[core] += 1
            revision_times[core].add(rev.capture_time)
            if "?" in rev.full_url:
                has_query[core] = True
            doc_domain[core] = rev.domain
            domain_members[rev.domain].add(core)
            if core not in url_tokens:
                url_tokens[core] = tuple(tokenize_url(normalize(core)))

        inlinks: dict[str, int] = defaultdict(int)
        seen: set[tuple[str, int, str, str]] = set()
        for link in filter_content_links(links):
            try:
                target = core_url_str(link.target_url)
            except UrlError:
                continue
            if inlink_dedup == "unique_per_revision":
                key = (link.source_full_url, link.source_capture_time, target, link.anchor_text)
                if key in seen:
                    continue
                seen.add(key)
            inlinks[target] += 1

        if search_words is None:
            plain = DEFAULT_SEARCH_WORDS
            substrings = DEFAULT_SEARCH_SUBSTRINGS
        else:
            words = frozenset(search_words)
            substrings = tuple(sorted(w for w in words if w.endswith("=")))
            plain = frozenset(w for w in words if not w.endswith("="))
        return cls(
            surrogates=surrogates,
            stats=stats,
            page_rank=dict(page_rank or {}),
            domain_rank=dict(domain_rank or {}),
            inlink_counts=dict(inlinks),
            revision_counts=dict(revision_counts),
            revision_times={k: sorted(v) for k, v in revision_times.items()},
            has_query_component=dict(has_query),
            doc_domain=doc_domain,
            domain_sizes={d: len(m) for d, m in domain_members.items()},
            url_tokens=url_tokens,
            news_domains=frozenset(news_domains),
            search_words=plain,
            search_substrings=substrings,
            bm25_k1=bm25_k1,
            bm25_b=bm25_b,
        )


def anchor_time_spans(instants: Iterable[int]) -> int:
    """Consecutive-gap count with a strict one-week threshold: anchors
    arriving within a week of each other are not separate endorsements."""
    ordered = sorted(instants)
    return sum(1 for a, b in zip(ordered, ordered[1:]) if b - a > WEEK_SECONDS)


def rev_duration(revision_times: Iterable[int]) -> int:
    """Consecutive-gap count with an inclusive at-least-one-week threshold."""
    ordered = sorted(revision_times)
    return sum(1 for a, b in zip(ordered, ordered[1:]) if b - a >= WEEK_SECONDS)


def _anchor_query_hits(doc: SurrogateDocument | None, query_tokens: list[str]) -> tuple[int, int]:
    """(instances containing every query token, total instances)."""
    if doc is None or not doc.anchor_instances:
        return 0, 0
    needed = set(query_tokens)
    hits = 0
    for anchor, _when in doc.anchor_instances:
        if needed and needed.issubset(tokenize_text(anchor)):
            hits += 1
    return hits, len(doc.anchor_instances)


def extract_features(query: QueryRecord, doc_id: str, ctx: FeatureContext) -> FeatureVector:
    """Build the full feature vector for one (query, document) pair.

    ``doc_id`` must be a core URL with at least one capture; anchor
    presence is optional (anchorless documents score zero on the
    anchor-derived features).
    """
    if doc_id not in ctx.revision_counts:
        raise UnknownDocument(doc_id)
    q_tokens = query.tokens
    q_set = set(q_tokens)
    n = normalize(doc_id)
    domain = ctx.doc_domain[doc_id]
    url_toks = ctx.url_tokens[doc_id]
    doc = ctx.surrogates.get(doc_id)

    hits, total = _anchor_query_hits(doc, q_tokens)
    anchor_freq = hits / total if total else 0.0
    ts = term_stats(doc, ctx.stats, q_tokens)
    instants = [when for _anchor, when in doc.anchor_instances] if doc else []

    values = [
        float(url_depth(n)),
        1.0 if ctx.has_query_component.get(doc_id, False) else 0.0,
        1.0
        if any(t in ctx.search_words for t in url_toks)
        or any(sub in doc_id.lower() for sub in ctx.search_substrings)
        else 0.0,
        float(sum(1 for t in url_toks if t in q_set)),
        1.0 if domain in ctx.news_domains else 0.0,
        float(query.wiki_citation_counts.get(domain, 0)),
        float(ctx.inlink_counts.get(doc_id, 0)),
        float(ctx.page_rank.get(doc_id, 0.0)),
        float(ctx.domain_rank.get(domain, 0.0)),
        anchor_freq,
        float(anchor_time_spans(instants)),
        ts.max_term_freq,
        float(ts.doc_len),
        ts.length_norm,
        ts.inverse_doc_freq,
        float(ctx.revision_counts[doc_id]),
        float(rev_duration(ctx.revision_times[doc_id])),
        float(ctx.domain_sizes.get(domain, 0)),
    ]
    values.extend(1.0 if query.entity_type == t else 0.0 for t in ENTITY_TYPES)
    return FeatureVector(query.query_id, doc_id, 0.0, tuple(values))


def per_query_evidence_summary(
    result_docs: Iterable[str],
    which: str,
    ctx: FeatureContext,
    query: QueryRecord | None = None,
) -> EvidenceSummary:
    """Aggregate one evidence dimension over a query's result set.

    ``anchor_query_freq`` is the count of anchor instances containing all
    query tokens (the raw endorsement count, not the fraction) and needs
    the query. Quartiles use linear interpolation.
    """
    docs = list(result_docs)
    if not docs:
        raise ValueError("empty result set")
    if which == "url_depth":
        values = [float(url_depth(normalize(d))) for d in docs]
    elif which == "revision_count":
        values = [float(ctx.revision_counts.get(d, 0)) for d in docs]
    elif which == "anchor_query_freq":
        if query is None:
            raise ValueError("anchor_query_freq needs the query")
        values = [
            float(_anchor_query_hits(ctx.surrogates.get(d), query.tokens)[0]) for d in docs
        ]
    else:
        raise ValueError(f"unknown evidence: {which!r}")
    arr = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0], method="linear")
    return EvidenceSummary(float(arr.mean()), float(med), float(q1), float(q3))


def candidate_docs(query: QueryRecord, ctx: FeatureContext) -> list[str]:
    """The query's result set: archived documents carrying every query
    token in their anchor surrogate or in their tokenized URL."""
    needed = set(query.tokens)
    if not needed:
        return []
    out = []
    for doc_id in ctx.revision_counts:
        doc = ctx.surrogates.get(doc_id)
        if doc is not None and needed.issubset(doc.term_freqs.keys()):
            out.append(doc_id)
            continue
        if needed.issubset(ctx.url_tokens[doc_id]):
            out.append(doc_id)
    return sorted(out)


# ---------------------------------------------------------------------------
# serialization: "<label> qid:<id> 1:<v> ... # <doc_id>" lines


def serialize_vectors(vectors: Iterable[FeatureVector], fh) -> int:
    count = 0
    for vec in vectors:
        feats = " ".join(f"{i + 1}:{v!r}" for i, v in enumerate(vec.values))
        fh.write(f"{vec.label!r} qid:{vec.query_id} {feats} # {vec.doc_id}\n")
        count += 1
    return count


def deserialize_vectors(fh) -> Iterator[FeatureVector]:
    for line_no, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        try:
            body, doc_id = line.rsplit(" # ", 1)
            parts = body.split(" ")
            label = float(parts[0])
            if not parts[1].startswith("qid:"):
                raise ValueError("missing qid")
            qid = int(parts[1][4:])
            values = []
            for i, item in enumerate(parts[2:], start=1):
                idx, value = item.split(":", 1)
                if int(idx) != i:
                    raise ValueError(f"feature index {idx} out of order")
                values.append(float(value))
        except (ValueError, IndexError) as exc:
            raise VectorFormatError(f"line {line_no}: {exc}") from exc
        yield FeatureVector(qid, doc_id, label, tuple(values))


def group_by_query(vectors: Iterable[FeatureVector]) -> dict[int, list[FeatureVector]]:
    groups: dict[int, list[FeatureVector]] = defaultdict(list)
    for vec in vectors:
        groups[vec.query_id].append(vec)
    return dict(groups)


# ---------------------------------------------------------------------------
# resource tables


def load_queries(path, citations: dict[int, dict[str, int]] | None = None) -> list[QueryRecord]:
    """queries.tsv: query_id <TAB> text <TAB> entity_type."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            qid_s, text, etype = line.split("\t")
            qid = int(qid_s)
            out.append(
                QueryRecord(qid, text, etype, dict((citations or {}).get(qid, {})))
            )
    return out


def load_wiki_citations(path) -> dict[int, dict[str, int]]:
    """wiki citation counts: query_id <TAB> domain <TAB> count."""
    out: dict[int, dict[str, int]] = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            qid, domain, count = line.split("\t")
            out[int(qid)][domain] = int(count)
    return dict(out)


def load_word_table(path) -> frozenset[str]:
    """One entry per line; entries ending in '=' act as raw substring
    patterns against the unsplit URL, everything else matches whole tokens."""
    entries = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                entries.add(line.lower())
    return frozenset(entries)


def load_entity_types(path) -> tuple[str, ...]:
    """Entity-type list, one per line. The one-hot block is pinned to the
    closed built-in category list, so a loaded table may only name types
    from that list (it exists to validate query files against a run's
    configuration)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type in {path}: {line!r}")
            out.append(line)
    return tuple(out)
