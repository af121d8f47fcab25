"""Shared builders for small in-memory fixtures."""
from __future__ import annotations

from archive_rank.anchor_index import build_stats, build_surrogates
from archive_rank.features import FeatureContext
from archive_rank.ingest import LinkRecord, RevisionRecord

DAY = 24 * 3600
T0 = 1_200_000_000  # 2008-01-10T21:20:00Z


def rev(core: str, when: int, full: str | None = None, domain: str | None = None) -> RevisionRecord:
    if domain is None:
        host = core.split("//", 1)[1].split("/", 1)[0]
        parts = host.split(".")
        domain = ".".join(parts[-2:]) if len(parts) >= 2 else host
    return RevisionRecord(core, full if full is not None else core, when, domain)


def link(source: str, target: str, anchor: str = "", when: int = T0, pattern: str = "A/href") -> LinkRecord:
    return LinkRecord(source, when, target, pattern, anchor)


def make_context(
    revisions,
    links,
    strategy: str = "unique_per_revision",
    page_rank: dict[str, float] | None = None,
    domain_rank: dict[str, float] | None = None,
    news_domains=(),
    search_words=None,
) -> FeatureContext:
    surrogates = build_surrogates(links, revisions, strategy)
    stats = build_stats(surrogates)
    return FeatureContext.build(
        revisions,
        links,
        surrogates,
        stats,
        page_rank=page_rank,
        domain_rank=domain_rank,
        news_domains=news_domains,
        search_words=search_words,
        inlink_dedup=strategy,
    )
