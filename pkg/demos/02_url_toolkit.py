"""
URL canonicalization and core URLs
==================================

Every document in the archive is identified by its core URL: the
canonical URL with the query string removed. Tokens, depth and the
registrable domain of a URL feed several ranking features.
"""
from archive_rank.urls import SuffixTable, core_url, domain_of, normalize, tokenize_url, url_depth

examples = [
    "HTTP://Spiegel.DE/Thema/Angela_Merkel?ref=rss",
    "http://www.kino.de/star/bruce-willis/8453",
    "http://a.b.example.de/suche?q=merkel",
    "volkswagen.de/de.html",
]

for raw in examples:
    n = normalize(raw)
    print(f"raw:    {raw}")
    print(f"  canonical: {n}")
    print(f"  core:      {core_url(n)}")
    print(f"  tokens:    {tokenize_url(n)}")
    print(f"  depth:     {url_depth(n)}   domain: {domain_of(n)}")

# the suffix table is deliberately small and configurable; extend it for
# collections outside the default registrable-domain rules
table = SuffixTable(("de", "com", "co.uk", "ac.at"))
print("\ncustom suffixes:")
print(" ", table.registrable_domain("www.maths.ox.ac.at"))
print(" ", table.registrable_domain("news.bbc.co.uk"))
