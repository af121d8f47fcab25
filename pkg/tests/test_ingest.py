import gzip
import io
import tracemalloc

from hypothesis import given, strategies as st

from archive_rank.ingest import (
    ANCHOR_TEXT_CAP,
    LINK_PATTERNS,
    PATTERN_TOKENS,
    LinkRecord,
    ParseStats,
    extract_links,
    filter_content_links,
    parse_arc_stream,
    parse_warc_stream,
    read_links_tsv,
    read_revisions_tsv,
    revision_from_record,
    write_links_tsv,
    write_revisions_tsv,
)
from archive_rank.synthetic import (
    arc_file_bytes,
    arc_record_bytes,
    warc_file_bytes,
    warc_record_bytes,
)


def parse_warc(data: bytes):
    stats = ParseStats()
    records = list(parse_warc_stream(io.BytesIO(data), stats))
    return records, stats


def parse_arc(data: bytes):
    stats = ParseStats()
    records = list(parse_arc_stream(io.BytesIO(data), stats))
    return records, stats


class TestWarc:
    def test_response_fields(self):
        data = warc_file_bytes(
            [warc_record_bytes("http://a.de/x?q=1", "2009-03-02T11:00:00Z", b"<html></html>")]
        )
        records, stats = parse_warc(data)
        assert len(records) == 1
        rec = records[0]
        assert rec.target_uri == "http://a.de/x?q=1"
        assert rec.capture_time == 1235991600  # 2009-03-02T11:00:00Z
        assert rec.record_kind == "response"
        assert rec.http_status == 200
        assert stats.emitted == 1 and stats.skipped == 0 and stats.corrupt == 0

    def test_non_response_skipped(self):
        data = warc_file_bytes(
            [warc_record_bytes("http://a.de/", "2009-03-02T11:00:00Z", b"x", warc_type="request")]
        )
        records, stats = parse_warc(data)
        assert records == []
        assert stats.skipped == 1

    def test_gzip_members_in_file_order(self):
        # three independent gzip members: response, metadata, response
        members = [
            warc_record_bytes("http://a.de/1", "2009-01-01T00:00:00Z", b"one"),
            warc_record_bytes("http://a.de/m", "2009-01-02T00:00:00Z", b"m", warc_type="metadata"),
            warc_record_bytes("http://a.de/2", "2009-01-03T00:00:00Z", b"two"),
        ]
        data = b"".join(gzip.compress(m, mtime=0) for m in members)
        # independent decompression confirms the member count
        assert len(self._gzip_members(data)) == 3
        records, stats = parse_warc(data)
        assert [r.target_uri for r in records] == ["http://a.de/1", "http://a.de/2"]
        assert stats.emitted == 2 and stats.skipped == 1

    @staticmethod
    def _gzip_members(data: bytes) -> list[bytes]:
        import zlib

        members = []
        rest = data
        while rest:
            decomp = zlib.decompressobj(wbits=31)
            members.append(decomp.decompress(rest))
            rest = decomp.unused_data
        return members

    def test_malformed_header_line_skips_record_and_continues(self):
        good = warc_record_bytes("http://a.de/ok", "2009-01-01T00:00:00Z", b"fine")
        bad = b"WARC/1.0\r\nTHIS LINE HAS NO COLON\r\n\r\njunk\r\n\r\n"
        records, stats = parse_warc(warc_file_bytes([bad, good], per_record_gzip=False))
        assert [r.target_uri for r in records] == ["http://a.de/ok"]
        assert stats.corrupt == 1 and stats.emitted == 1

    def test_truncated_final_record_ends_cleanly(self):
        good = warc_record_bytes("http://a.de/ok", "2009-01-01T00:00:00Z", b"fine")
        truncated = warc_record_bytes("http://a.de/cut", "2009-01-01T00:00:00Z", b"payload")[:-20]
        records, stats = parse_warc(good + truncated)
        assert [r.target_uri for r in records] == ["http://a.de/ok"]
        assert stats.corrupt == 1

    def test_accounting_equation(self):
        records = [
            warc_record_bytes(f"http://a.de/{i}", "2009-01-01T00:00:00Z", b"x") for i in range(4)
        ]
        records.insert(2, b"WARC/1.0\r\nBROKEN\r\n\r\n")
        records.append(
            warc_record_bytes("http://a.de/m", "2009-01-01T00:00:00Z", b"m", warc_type="metadata")
        )
        _, stats = parse_warc(warc_file_bytes(records, per_record_gzip=False))
        assert stats.total == 6
        assert (stats.emitted, stats.skipped, stats.corrupt) == (4, 1, 1)


class TestArc:
    def test_header_fields(self):
        data = arc_file_bytes([arc_record_bytes("http://a.de/", "20051122093000", b"<html></html>")])
        records, stats = parse_arc(data)
        assert len(records) == 1
        assert records[0].target_uri == "http://a.de/"
        assert records[0].capture_time == 1132651800  # 2005-11-22T09:30:00Z
        assert stats.skipped == 1  # the filedesc header record

    def test_short_header_is_corrupt_and_stream_recovers(self):
        good1 = arc_record_bytes("http://a.de/1", "20051122093000", b"<html>one</html>")
        bad = b"http://bad.de/ 1.2.3.4 20051122093000\n<html>body</html>\n\nmore junk\n\n"
        good2 = arc_record_bytes("http://a.de/2", "20051122093100", b"<html>two</html>")
        records, stats = parse_arc(arc_file_bytes([good1, bad, good2], per_record_gzip=False))
        assert [r.target_uri for r in records] == ["http://a.de/1", "http://a.de/2"]
        assert stats.corrupt == 1
        assert stats.total == 4  # filedesc + 2 good + 1 corrupt

    def test_length_mismatch_skips_record_and_resumes(self):
        good1 = arc_record_bytes("http://a.de/1", "20051122093000", b"<html>one</html>")
        # declared length shorter than the actual block: the boundary check
        # fails and the reader resynchronizes on the next well-formed header
        payload = b"HTTP/1.1 200 OK\r\n\r\n<html>liar</html>"
        bad = f"http://bad.de/x 1.2.3.4 20051122093000 text/html {len(payload) - 12}\n".encode()
        bad += payload + b"\n"
        good2 = arc_record_bytes("http://a.de/2", "20051122093100", b"<html>two</html>")
        records, stats = parse_arc(arc_file_bytes([good1, bad, good2], per_record_gzip=False))
        assert [r.target_uri for r in records] == ["http://a.de/1", "http://a.de/2"]
        assert stats.corrupt == 1
        assert stats.total == 4

    def test_gzip_per_record_members(self):
        recs = [arc_record_bytes(f"http://a.de/{i}", "20051122093000", b"y") for i in range(3)]
        records, stats = parse_arc(arc_file_bytes(recs, per_record_gzip=True))
        assert len(records) == 3
        assert stats.total == 4


FOURTEEN_PATTERN_HTML = b"""
<html><body background="body.png">
<a href="/page">Ein Link</a>
<img src="logo.png">
<map><area href="/map-target"></map>
<embed src="movie.swf">
<frameset><frame src="frame.html"></frameset>
<input src="button.png" type="image">
<iframe src="inner.html"></iframe>
<form action="/submit"></form>
<table background="table.png">
<tr background="row.png"><td background="cell.png">x</td></tr>
</table>
<object codebase="code/"></object>
<fb:login-button background="fb.png"></fb:login-button>
</body></html>
"""


class TestExtractLinks:
    def test_anchor_text_resolution_and_whitespace(self):
        result = extract_links(b'<a href="/x">Angela  Merkel</a>', "http://s.de/p/", 7)
        assert result.links == [
            LinkRecord("http://s.de/p/", 7, "http://s.de/x", "A/href", "Angela Merkel")
        ]

    def test_img_pattern_has_no_anchor_text(self):
        result = extract_links(b'<img src="logo.png">', "http://a.de/", 7)
        assert result.links[0].tag_pattern == "IMG/src"
        assert result.links[0].anchor_text == ""

    def test_all_fourteen_patterns_extracted_once(self):
        result = extract_links(FOURTEEN_PATTERN_HTML, "http://a.de/", 7)
        patterns = sorted(l.tag_pattern for l in result.links)
        assert patterns == sorted(PATTERN_TOKENS)
        assert len(PATTERN_TOKENS) == 14 == len(LINK_PATTERNS)

    def test_unclosed_anchor_closes_at_next_anchor(self):
        html = b'<a href="/1">first <a href="/2">second</a>'
        result = extract_links(html, "http://a.de/", 7)
        texts = [(l.target_url, l.anchor_text) for l in result.links]
        assert texts == [("http://a.de/1", "first"), ("http://a.de/2", "second")]

    def test_unclosed_anchor_closes_at_document_end(self):
        result = extract_links(b'<a href="/1">tail text', "http://a.de/", 7)
        assert result.links[0].anchor_text == "tail text"

    def test_inner_markup_stripped_from_anchor_text(self):
        html = b'<a href="/1">bold <b>words</b> here</a>'
        result = extract_links(html, "http://a.de/", 7)
        assert result.links[0].anchor_text == "bold words here"

    def test_anchor_cap_counts_truncation(self):
        html = b'<a href="/1">' + b"x" * (ANCHOR_TEXT_CAP + 100) + b"</a>"
        result = extract_links(html, "http://a.de/", 7)
        assert len(result.links[0].anchor_text) == ANCHOR_TEXT_CAP
        assert result.truncated_anchors == 1

    def test_meta_charset_controls_decoding(self):
        text = '<meta charset="iso-8859-1"><a href="/u">Müller</a>'
        payload = text.encode("latin-1")
        result = extract_links(payload, "http://a.de/", 7)
        assert result.links[0].anchor_text == "Müller"
        assert not result.decode_failed

    def test_undecodable_bytes_still_tolerated(self):
        payload = b'<a href="/x">\xff\xfe broken</a>'
        result = extract_links(payload, "http://a.de/", 7)
        assert len(result.links) == 1
        assert not result.decode_failed

    def test_non_http_targets_dropped(self):
        html = b'<a href="mailto:x@y.de">mail</a><a href="javascript:f()">js</a>'
        assert extract_links(html, "http://a.de/", 7).links == []

    def test_malformed_tags_do_not_abort(self):
        html = b'<a href="/1">ok</a><a <<<>< href=>><img src="x.png">'
        result = extract_links(html, "http://a.de/", 7)
        assert any(l.tag_pattern == "A/href" for l in result.links)
        assert any(l.tag_pattern == "IMG/src" for l in result.links)

    @given(
        st.lists(
            st.sampled_from(
                [
                    '<a href="/x">text</a>',
                    "<a href='y.html'>",
                    "</a>",
                    '<img src="i.png">',
                    '<table background="t.gif"><tr background="r.gif">',
                    '<td background=cell.gif>',
                    '<form action="/go">',
                    "<object codebase=lib/>",
                    '<fb:login-button background="f.png">',
                    "<div> plain <b>words</b> & entities &amp;",
                    "<<<>< broken <a href=>",
                    '<iframe src="deep.html"></iframe>',
                    '<frame src="f.html"><input src="b.png"><embed src="e.swf">',
                    '<area href="/map">',
                    '<body background="bg.jpg">',
                ]
            ),
            max_size=25,
        )
    )
    def test_random_soups_only_emit_known_patterns(self, fragments):
        html = "".join(fragments).encode("utf-8")
        result = extract_links(html, "http://soup.de/base/", 3)
        for item in result.links:
            assert item.tag_pattern in PATTERN_TOKENS
            assert item.target_url.startswith("http")
            if item.tag_pattern != "A/href":
                assert item.anchor_text == ""


class TestFilterContentLinks:
    def test_empty(self):
        assert filter_content_links([]) == []

    def test_fourteen_pattern_document_keeps_only_the_anchor(self):
        links = extract_links(FOURTEEN_PATTERN_HTML, "http://a.de/", 7).links
        kept = filter_content_links(links)
        assert len(kept) == 1 and kept[0].tag_pattern == "A/href"

    def test_order_preserved(self):
        records = [
            LinkRecord("http://s.de/", 1, f"http://t.de/{i}", "A/href", str(i)) for i in range(3)
        ] + [LinkRecord("http://s.de/", 1, "http://t.de/img", "IMG/src", "")] * 2
        kept = filter_content_links(records)
        assert [l.anchor_text for l in kept] == ["0", "1", "2"]


class TestTsvRoundTrip:
    def test_revisions_identity(self):
        data = warc_file_bytes(
            [warc_record_bytes("http://WWW.A.de/x?q=1", "2009-03-02T11:00:00Z", b"")]
        )
        records, _ = parse_warc(data)
        revision = revision_from_record(records[0])
        assert revision.core_url == "http://www.a.de/x"
        assert revision.full_url == "http://www.a.de/x?q=1"
        assert revision.domain == "a.de"
        buf = io.StringIO()
        write_revisions_tsv([revision], buf)
        buf.seek(0)
        assert list(read_revisions_tsv(buf)) == [revision]

    def test_links_with_escapes(self):
        tricky = LinkRecord("http://s.de/", 5, "http://t.de/", "A/href", "a\tb\nc\\d\re")
        buf = io.StringIO()
        write_links_tsv([tricky], buf)
        assert "\\t" in buf.getvalue() and "\\n" in buf.getvalue()
        buf.seek(0)
        assert list(read_links_tsv(buf)) == [tricky]


def test_bounded_memory_parse():
    """Peak allocation must track record size, not record count."""

    def peak_for(count: int) -> int:
        payload = b"<html>" + b"y" * 2000 + b"</html>"
        data = warc_file_bytes(
            [
                warc_record_bytes(f"http://a.de/{i}", "2009-01-01T00:00:00Z", payload)
                for i in range(count)
            ],
            per_record_gzip=False,
        )
        stream = io.BytesIO(data)
        tracemalloc.start()
        for _ in parse_warc_stream(stream):
            pass
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        return peak

    small = peak_for(20)
    large = peak_for(200)
    assert large < small * 3 + 100_000
