"""Comment rendering, overlays, and sink delivery."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from helpers import BASE_SPEC_VALUE
from schemreview.consensus import Confidence, ConsensusAnalysis, ConsensusFinding, Provenance
from schemreview.dsmodel import spec_from_agent_value
from schemreview.errors import SinkUnreachable
from schemreview.grouping import group_errors
from schemreview.libraries import PartRef
from schemreview.model import BBox, Component, Page, Pin
from schemreview.reporting import (
    FileSink,
    HttpSink,
    PipelineStage,
    ProgressEvent,
    post_comments,
    render_comment,
    render_overlay,
    sink_from_config,
)
from schemreview.review import VerdictStatus

GOLDEN_SVG = Path(__file__).parent / "data" / "golden_overlay.svg"


def finding(pins, status="incorrect", nets=("NET_A",), reasoning="swapped against pinout"):
    return ConsensusFinding(pins, VerdictStatus(status), reasoning, tuple(nets),
                            2, Confidence.HIGH, Provenance.MULTI_RUN)


def demo_page(with_bbox=True) -> Page:
    return Page("P1", components=(
        Component("U1", mpn="LM317",
                  pins=(Pin("1"), Pin("2"), Pin("3")),
                  bbox=BBox(20, 20, 30, 20) if with_bbox else None),
        Component("R5", mpn="RES-1K", pins=(Pin("1"), Pin("2")),
                  bbox=BBox(70, 25, 10, 6) if with_bbox else None),
    ))


def one_group(page):
    analyses = [
        ConsensusAnalysis("U1", (finding("1, 3", nets=("NET_A", "NET_B")),)),
        ConsensusAnalysis("R5", (finding("1", status="warning", nets=("NET_A",)),)),
    ]
    groups = group_errors(analyses, page.nets)
    assert len(groups) == 1
    return groups[0]


def specs_for(page):
    spec = spec_from_agent_value(BASE_SPEC_VALUE, PartRef(mpn="LM317"),
                                 "http://sheets/lm317.pdf")
    return {"U1": spec, "R5": None}


class TestRenderComment:
    def test_verdict_table_with_multi_pin_row(self):
        page = demo_page()
        comment = render_comment(one_group(page), specs_for(page), page)
        assert "| Pin | Verdict | Reasoning |" in comment.markdown
        assert "| 1, 3 | Incorrect | swapped against pinout |" in comment.markdown
        assert "#### U1" in comment.markdown and "#### R5" in comment.markdown

    def test_datasheet_link_only_where_spec_exists(self):
        page = demo_page()
        comment = render_comment(one_group(page), specs_for(page), page)
        assert comment.datasheet_links == ("http://sheets/lm317.pdf",)
        assert "[Datasheet](http://sheets/lm317.pdf)" in comment.markdown

    def test_anchor_is_union_of_member_bboxes(self):
        page = demo_page()
        comment = render_comment(one_group(page), specs_for(page), page)
        assert comment.anchor_bbox == BBox(20, 20, 60, 20)
        assert comment.overlay_svg is not None

    def test_without_bboxes_comment_is_page_level(self):
        page = demo_page(with_bbox=False)
        comment = render_comment(one_group(page), specs_for(page), page)
        assert comment.anchor_bbox is None
        assert comment.overlay_svg is None

    def test_rendering_twice_is_byte_identical(self):
        page = demo_page()
        a = render_comment(one_group(page), specs_for(page), page)
        b = render_comment(one_group(page), specs_for(page), page)
        assert a.markdown == b.markdown
        assert a.overlay_svg == b.overlay_svg

    def test_pipe_characters_escaped(self):
        page = demo_page()
        analyses = [ConsensusAnalysis("U1", (finding("1", reasoning="a | b"),))]
        group = group_errors(analyses, page.nets)[0]
        comment = render_comment(group, {}, page)
        assert "a \\| b" in comment.markdown


class TestRenderOverlay:
    def test_full_page_bbox_highlights_page_rect(self):
        page = demo_page()
        from schemreview.reporting import page_extents
        extents = page_extents(page)
        svg = render_overlay(page, extents)
        assert svg.count(f'x="{extents.x:g}"') >= 2  # page rect + highlight

    def test_bbox_partially_outside_is_clamped(self):
        page = demo_page()
        svg = render_overlay(page, BBox(-1000, 30, 5000, 10))
        from schemreview.reporting import page_extents
        extents = page_extents(page)
        assert f'class="highlight" x="{extents.x:g}"' in svg

    def test_golden_overlay_frozen(self):
        page = demo_page()
        svg = render_overlay(page, BBox(20, 20, 60, 20))
        assert svg == GOLDEN_SVG.read_text()


class TestFileSink:
    def test_layout_and_manifest(self, tmp_path):
        page = demo_page()
        comment = render_comment(one_group(page), specs_for(page), page)
        report = post_comments(
            FileSink(str(tmp_path / "out")), [comment],
            [ProgressEvent("P1", PipelineStage.RENDERED)])
        assert report.all_ok
        gid = comment.error_group_id
        assert (tmp_path / "out" / "comments" / f"{gid}.md").is_file()
        assert (tmp_path / "out" / "overlays" / f"{gid}.svg").is_file()
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["version"] == 1
        assert [c["group_id"] for c in manifest["comments"]] == [gid]
        assert manifest["comments"][0]["markdown_path"] == f"comments/{gid}.md"
        progress = json.loads((tmp_path / "out" / "progress.json").read_text())
        assert progress == [{"page_id": "P1", "stage": "rendered", "fraction": 1.0}]

    def test_zero_comments_still_writes_manifest(self, tmp_path):
        report = post_comments(FileSink(str(tmp_path / "out")), [], [])
        assert report.records == ()
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["comments"] == []

    def test_comment_without_overlay_writes_no_svg(self, tmp_path):
        page = demo_page(with_bbox=False)
        comment = render_comment(one_group(page), specs_for(page), page)
        post_comments(FileSink(str(tmp_path / "out")), [comment], [])
        assert list((tmp_path / "out" / "overlays").iterdir()) == []


class _FlakyHandler(BaseHTTPRequestHandler):
    failures_left = 1
    bodies = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if self.path == "/comments" and type(self).failures_left > 0:
            type(self).failures_left -= 1
            self.send_response(500)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        type(self).bodies.append((self.path, body))
        self.send_response(200)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def log_message(self, *args):
        pass


class TestHttpSink:
    @pytest.fixture
    def server(self):
        _FlakyHandler.failures_left = 1
        _FlakyHandler.bodies = []
        server = HTTPServer(("127.0.0.1", 0), _FlakyHandler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        yield f"http://127.0.0.1:{server.server_port}"
        server.shutdown()

    def test_retry_then_success_records_attempts(self, server):
        page = demo_page()
        comment = render_comment(one_group(page), specs_for(page), page)
        report = post_comments(HttpSink(server), [comment],
                               [ProgressEvent("P1", PipelineStage.RENDERED)],
                               sleep=lambda s: None)
        assert report.all_ok
        assert report.records[0].attempts == 2
        paths = [p for p, _ in _FlakyHandler.bodies]
        assert "/comments" in paths and "/progress" in paths

    def test_unreachable_sink_raises_after_retries(self):
        page = demo_page()
        comment = render_comment(one_group(page), specs_for(page), page)
        with pytest.raises(SinkUnreachable):
            post_comments(HttpSink("http://127.0.0.1:9"), [comment], [],
                          sleep=lambda s: None)


def test_sink_from_config():
    assert isinstance(sink_from_config({"kind": "file", "out_dir": "x"}), FileSink)
    sink = sink_from_config({"kind": "http", "base_url": "http://h"})
    assert isinstance(sink, HttpSink)
    from schemreview.errors import ConfigError
    with pytest.raises(ConfigError):
        sink_from_config({"kind": "smoke-signals"})
