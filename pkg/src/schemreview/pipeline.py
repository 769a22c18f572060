"""The per-page pipeline under a time budget.

Page set: full-analysis mode takes every page; design-review mode takes
the pages whose canonical hash differs from the base plus any explicit
page override. Per page: select groups, retrieve specs (parallel across
parts), fan out k reviews per group, combine consensus, cluster errors,
render comments. The time budget is checked at page boundaries only:
pages not started by the deadline are skipped and the completed pages'
comments are still posted.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .augment import augment_netlist
from .canonical import diff_pages, serialize_page_xml
from .config import Mode, RunConfig
from .consensus import combine_consensus
from .datasheets import RetrievalConfig, default_fetcher, retrieve_spec
from .dscache import CacheStore
from .errors import InputError, SchemReviewError
from .gateway import Gateway
from .grouping import group_errors
from .ingest import ingest_schematic
from .model import Page, Schematic
from .reporting import (
    DeliveryReport,
    PipelineStage,
    ProgressEvent,
    post_comments,
    render_comment,
)
from .review import GroupReviewContext, fan_out_reviews, load_checklist, select_groups
from .singleflight import SingleFlight
from .tracing import TraceContext, Tracer, emit_traces

log = logging.getLogger(__name__)

PART_WORKERS = 8


class RunStatus:
    COMPLETE = "complete"
    PARTIAL = "partial"
    FAILED = "failed"


@dataclass
class RunReport:
    status: str
    pages_analyzed: list[str]
    pages_skipped: list[str]
    comments_emitted: int
    usage: dict
    cache_hits: int
    cache_misses: int
    wall_time_s: float
    delivery: DeliveryReport | None = None

    def to_doc(self) -> dict:
        return {
            "status": self.status,
            "pages_analyzed": self.pages_analyzed,
            "pages_skipped": self.pages_skipped,
            "comments_emitted": self.comments_emitted,
            "usage": self.usage,
            "cache": {"hits": self.cache_hits, "misses": self.cache_misses},
            "wall_time_s": round(self.wall_time_s, 3),
        }


@dataclass
class _PageOutcome:
    page_id: str
    comments: list = field(default_factory=list)
    progress: list = field(default_factory=list)
    cache_hits: int = 0
    cache_misses: int = 0


def _read_schematic(path) -> Schematic:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read schematic {path}: {exc}") from exc
    return augment_netlist(ingest_schematic(raw))


def select_page_set(cfg: RunConfig, head: Schematic) -> list[str]:
    """Page ids to analyze, in document order."""
    all_ids = [p.id for p in head.pages]
    if cfg.mode is Mode.FULL_ANALYSIS:
        return all_ids
    wanted: set[str] = set()
    if cfg.base_schematic:
        base = _read_schematic(cfg.base_schematic)
        wanted |= diff_pages(base, head)
    if cfg.pages_override:
        unknown = set(cfg.pages_override) - set(all_ids)
        if unknown:
            raise InputError(f"pages_override names unknown pages: {sorted(unknown)}")
        wanted |= set(cfg.pages_override)
    return [pid for pid in all_ids if pid in wanted]


def _retrieve_all_specs(page: Page, groups, cfg: RunConfig, gateway: Gateway,
                        cache: CacheStore, flights: SingleFlight,
                        ctx: TraceContext, outcome: _PageOutcome) -> dict:
    """Parallel retrieval across the page's unique parts; returns
    designator -> DatasheetSpec | None."""
    retrieval_cfg = RetrievalConfig(threshold=cfg.critic_threshold,
                                    max_attempts=cfg.max_attempts)
    part_for_designator: dict[str, str] = {}
    parts: dict[str, tuple] = {}  # part key -> (PartRef, schematic_url)
    for group in groups:
        for designator in group.designators:
            comp = page.component(designator)
            if not (comp.mpn or comp.ipn):
                continue
            for part in group.parts:
                if part.key == (comp.mpn or comp.ipn):
                    part_for_designator[designator] = part.key
                    if part.key not in parts:
                        parts[part.key] = (part, group.datasheet_urls.get(designator))
                    break

    results: dict[str, object] = {}
    if parts:
        def _one(item):
            key, (part, schematic_url) = item
            try:
                with ctx.span(f"part:{key}", part=key):
                    return key, retrieve_spec(
                        part, cfg.libraries, retrieval_cfg, gateway=gateway,
                        cache=cache, fetcher=default_fetcher,
                        schematic_url=schematic_url, flights=flights,
                        trace=ctx.child(f"part:{key}"))
            except SchemReviewError as exc:
                log.warning("datasheet retrieval failed for %s: %s", key, exc)
                return key, None

        with ThreadPoolExecutor(max_workers=min(PART_WORKERS, len(parts))) as pool:
            for key, result in pool.map(_one, sorted(parts.items())):
                results[key] = result
                if result is not None:
                    if result.cache_hit:
                        outcome.cache_hits += 1
                    else:
                        outcome.cache_misses += 1

    specs: dict[str, object] = {}
    for group in groups:
        for designator in group.designators:
            key = part_for_designator.get(designator)
            result = results.get(key) if key else None
            specs[designator] = result.spec if result is not None else None
    return specs


def _analyze_page(page: Page, cfg: RunConfig, gateway: Gateway, cache: CacheStore,
                  flights: SingleFlight, root: TraceContext) -> _PageOutcome:
    outcome = _PageOutcome(page.id)
    ctx = root.child(f"page:{page.id}", page_id=page.id)

    groups = select_groups(page, gateway, trace=ctx)
    outcome.progress.append(ProgressEvent(page.id, PipelineStage.SELECTED))

    specs = _retrieve_all_specs(page, groups, cfg, gateway, cache, flights,
                                ctx, outcome)
    outcome.progress.append(ProgressEvent(page.id, PipelineStage.SPECS_READY))

    netlist_xml = serialize_page_xml(page)
    analyses = []
    if groups:
        def _review_group(group):
            gctx = ctx.child(f"group:{group.name}", group=group.name)
            review_ctx = GroupReviewContext(
                group, netlist_xml,
                {d: specs.get(d) for d in group.designators},
                load_checklist(group.name, cfg.checklist_dir))
            with ctx.span(f"group:{group.name}", group=group.name):
                runs, failures = fan_out_reviews(review_ctx, page, cfg.k, gateway,
                                                 trace=gctx)
                if failures:
                    log.warning("page %s group %r: %d run(s) failed",
                                page.id, group.name, len(failures))
                return combine_consensus(runs, review_ctx, gateway, trace=gctx)

        with ThreadPoolExecutor(max_workers=len(groups)) as pool:
            for group_analyses in pool.map(_review_group, groups):
                analyses.extend(group_analyses)
    outcome.progress.append(ProgressEvent(page.id, PipelineStage.REVIEWED))
    outcome.progress.append(ProgressEvent(page.id, PipelineStage.CONSENSUS))

    error_groups = group_errors(analyses, page.nets)
    outcome.progress.append(ProgressEvent(page.id, PipelineStage.GROUPED))

    for error_group in error_groups:
        outcome.comments.append(render_comment(error_group, specs, page))
    outcome.progress.append(ProgressEvent(page.id, PipelineStage.RENDERED))
    return outcome


def run_pipeline(cfg: RunConfig, schematic_path) -> RunReport:
    cfg.validate()
    run_start = time.time()
    t0 = time.perf_counter()
    deadline = t0 + cfg.time_budget_s if cfg.time_budget_s is not None else None

    head = _read_schematic(schematic_path)
    page_ids = select_page_set(cfg, head)
    pages = [head.page(pid) for pid in page_ids]

    gateway = Gateway(cfg.backend)
    cache = CacheStore(cfg.cache_dir)
    flights = SingleFlight()
    tracer = Tracer()
    root = TraceContext(tracer, "run")

    outcomes: list[_PageOutcome] = []
    skipped: list[str] = []

    def _timed_page(page: Page) -> _PageOutcome:
        start = time.time()
        t_page = time.perf_counter()
        outcome = _analyze_page(page, cfg, gateway, cache, flights, root)
        tracer.record(f"page:{page.id}", f"run/page:{page.id}", start,
                      time.perf_counter() - t_page, {"page_id": page.id})
        return outcome

    if cfg.page_parallelism <= 1:
        for page in pages:
            if deadline is not None and time.perf_counter() >= deadline:
                skipped.append(page.id)
                continue
            outcomes.append(_timed_page(page))
    else:
        with ThreadPoolExecutor(max_workers=cfg.page_parallelism) as pool:
            futures = []
            for page in pages:
                if deadline is not None and time.perf_counter() >= deadline:
                    skipped.append(page.id)
                    continue
                futures.append(pool.submit(_timed_page, page))
            for future in futures:
                outcomes.append(future.result())

    comments = [c for outcome in outcomes for c in outcome.comments]
    progress = [e for outcome in outcomes for e in outcome.progress]
    delivery = post_comments(cfg.sink, comments, progress)

    totals = gateway.ledger.totals()
    tracer.record("run", "run", run_start, time.perf_counter() - t0, {
        "pages_analyzed": len(outcomes),
        "pages_skipped": len(skipped),
        "tokens_in": totals.tokens_in,
        "tokens_out": totals.tokens_out,
    })
    if cfg.trace_out:
        emit_traces(tracer.events(), cfg.trace_out)

    status = RunStatus.PARTIAL if skipped else RunStatus.COMPLETE
    return RunReport(
        status=status,
        pages_analyzed=[o.page_id for o in outcomes],
        pages_skipped=skipped,
        comments_emitted=len(comments),
        usage=gateway.ledger.as_dict(),
        cache_hits=sum(o.cache_hits for o in outcomes),
        cache_misses=sum(o.cache_misses for o in outcomes),
        wall_time_s=time.perf_counter() - t0,
        delivery=delivery,
    )
