"""Functional grouping and per-group pin review.

The selection agent partitions a page's components into functional
groups; its output is repaired deterministically (ghost designators
dropped, duplicate members kept in their first group, uncovered
components collected into a residual "ungrouped" group). Each group is
then reviewed by k concurrent agent runs that differ only by seed;
individual run failures are tolerated while at least one run succeeds.
"""

from __future__ import annotations

import enum
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .canonical import serialize_page_xml
from .dsmodel import DatasheetSpec
from .errors import AllRunsFailed, SchemReviewError
from .gateway import AgentKind, AgentRequest, Gateway
from .libraries import PartRef
from .model import Page
from .tracing import TraceContext

log = logging.getLogger(__name__)

UNGROUPED = "ungrouped"

SELECTION_PROMPT = (
    "Partition the page's components into functional groups (for example a "
    "regulator with its feedback network, an MCU with its bypassing). Every "
    "designator must come from the page.")
REVIEW_PROMPT = (
    "Review each component's pin connections against its datasheet "
    "specification and the checklist. Report per-pin verdicts; key pins "
    "sharing one root cause together (e.g. \"1, 3\").")


class VerdictStatus(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    WARNING = "warning"
    UNVERIFIABLE = "unverifiable"


def split_pin_key(pin_key: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in pin_key.split(",") if p.strip())


def canonical_pin_key(pins) -> str:
    return ", ".join(sorted(pins))


@dataclass(frozen=True)
class PinVerdict:
    pin_key: str
    status: VerdictStatus
    reasoning: str
    referenced_nets: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "referenced_nets", tuple(self.referenced_nets))
        if not self.pins:
            raise ValueError(f"pin key {self.pin_key!r} names no pins")

    @property
    def pins(self) -> tuple[str, ...]:
        return split_pin_key(self.pin_key)

    @property
    def pin_set(self) -> frozenset[str]:
        return frozenset(self.pins)


@dataclass(frozen=True)
class ComponentAnalysis:
    designator: str
    verdicts: tuple[PinVerdict, ...]

    def __post_init__(self):
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        seen: set[str] = set()
        for verdict in self.verdicts:
            overlap = seen & verdict.pin_set
            if overlap:
                raise ValueError(
                    f"{self.designator}: pin(s) {sorted(overlap)} appear in two pin keys")
            seen |= verdict.pin_set


@dataclass(frozen=True)
class RunResult:
    run_index: int
    analyses: tuple[ComponentAnalysis, ...]

    def __post_init__(self):
        object.__setattr__(self, "analyses", tuple(self.analyses))


@dataclass(frozen=True)
class RunFailure:
    run_index: int
    error: str


@dataclass(frozen=True)
class FunctionalGroup:
    name: str
    designators: tuple[str, ...]
    parts: tuple[PartRef, ...] = ()
    datasheet_urls: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "designators", tuple(self.designators))
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.designators:
            raise ValueError(f"group {self.name!r} has no members")


@dataclass(frozen=True)
class GroupReviewContext:
    """Everything one group review needs: the group, the page netlist XML,
    per-designator specs (None where retrieval failed), and the checklist."""

    group: FunctionalGroup
    netlist_xml: str
    specs: dict
    checklist: str


# --- selection ----------------------------------------------------------------

def _group_from_members(page: Page, name: str, designators: list[str]) -> FunctionalGroup:
    parts: list[PartRef] = []
    seen_keys: set[str] = set()
    urls: dict[str, str] = {}
    for designator in designators:
        comp = page.component(designator)
        if comp.datasheet_url:
            urls[designator] = comp.datasheet_url
        if comp.mpn or comp.ipn:
            part = PartRef(mpn=comp.mpn, ipn=comp.ipn)
            if part.key not in seen_keys:
                seen_keys.add(part.key)
                parts.append(part)
    return FunctionalGroup(name, tuple(designators), tuple(parts), urls)


def select_groups(page: Page, gateway: Gateway,
                  trace: TraceContext | None = None) -> list[FunctionalGroup]:
    if not page.components:
        return []
    req = AgentRequest(AgentKind.SELECTION, SELECTION_PROMPT,
                       serialize_page_xml(page), "selection")
    resp = gateway.complete(req, trace=trace)

    known = {c.designator for c in page.components}
    claimed: set[str] = set()
    groups: list[FunctionalGroup] = []
    for group_doc in resp.value["groups"]:
        members: list[str] = []
        for designator in group_doc["designators"]:
            if designator not in known:
                log.warning("page %s: selection named unknown designator %s; dropped",
                            page.id, designator)
                continue
            if designator in claimed:
                log.warning("page %s: %s already claimed by an earlier group; dropped",
                            page.id, designator)
                continue
            claimed.add(designator)
            members.append(designator)
        if members:
            groups.append(_group_from_members(page, group_doc["name"], members))
        else:
            log.warning("page %s: group %r had no valid members; dropped",
                        page.id, group_doc["name"])
    residual = [c.designator for c in page.components if c.designator not in claimed]
    if residual:
        groups.append(_group_from_members(page, UNGROUPED, residual))
    return groups


# --- group review ----------------------------------------------------------------

def build_review_payload(ctx: GroupReviewContext) -> str:
    return json.dumps({
        "group": {"name": ctx.group.name, "designators": list(ctx.group.designators)},
        "netlist_xml": ctx.netlist_xml,
        "specs": {d: (spec.to_xml() if isinstance(spec, DatasheetSpec) else None)
                  for d, spec in sorted(ctx.specs.items())},
        "checklist": ctx.checklist,
    }, sort_keys=True)


def review_group_once(ctx: GroupReviewContext, page: Page, run_index: int,
                      gateway: Gateway,
                      trace: TraceContext | None = None) -> RunResult:
    """One review run. Output is validated: analyses for components outside
    the group and verdicts naming pins the component does not have are
    dropped with a warning; components with no datasheet spec and no agent
    verdicts default to a single Unverifiable verdict."""
    req = AgentRequest(AgentKind.GROUP_REVIEW, REVIEW_PROMPT,
                       build_review_payload(ctx), "group_review", seed=run_index)
    resp = gateway.complete(req, trace=trace)

    members = set(ctx.group.designators)
    verdicts_by_designator: dict[str, list[PinVerdict]] = {}
    claimed_pins: dict[str, set[str]] = {}
    for analysis_doc in resp.value["analyses"]:
        designator = analysis_doc["designator"]
        if designator not in members:
            log.warning("run %d: analysis for %s outside group %r; dropped",
                        run_index, designator, ctx.group.name)
            continue
        comp = page.component(designator)
        valid_pins = {p.designator for p in comp.pins}
        for verdict_doc in analysis_doc["verdicts"]:
            pins = split_pin_key(verdict_doc["pins"])
            unknown = [p for p in pins if p not in valid_pins]
            if unknown or not pins:
                log.warning("run %d: %s verdict names pin(s) %s not on the component; dropped",
                            run_index, designator, unknown or "<none>")
                continue
            already = claimed_pins.setdefault(designator, set())
            if already & set(pins):
                log.warning("run %d: %s pins %s appear in two pin keys; later verdict dropped",
                            run_index, designator, sorted(already & set(pins)))
                continue
            already |= set(pins)
            verdicts_by_designator.setdefault(designator, []).append(PinVerdict(
                pin_key=verdict_doc["pins"],
                status=VerdictStatus(verdict_doc["status"]),
                reasoning=verdict_doc["reasoning"],
                referenced_nets=tuple(verdict_doc.get("referenced_nets", [])),
            ))

    for designator in ctx.group.designators:
        if ctx.specs.get(designator) is None and designator not in verdicts_by_designator:
            comp = page.component(designator)
            if comp.pins:
                verdicts_by_designator[designator] = [PinVerdict(
                    pin_key=canonical_pin_key(p.designator for p in comp.pins),
                    status=VerdictStatus.UNVERIFIABLE,
                    reasoning="no datasheet",
                )]

    analyses = tuple(
        ComponentAnalysis(designator, tuple(verdicts))
        for designator, verdicts in sorted(verdicts_by_designator.items())
    )
    return RunResult(run_index, analyses)


def fan_out_reviews(ctx: GroupReviewContext, page: Page, k: int, gateway: Gateway,
                    trace: TraceContext | None = None
                    ) -> tuple[list[RunResult], list[RunFailure]]:
    """k concurrent review runs differing only by seed. Failed runs are
    recorded; consensus proceeds over the successes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    results: list[RunResult] = []
    failures: list[RunFailure] = []

    def _one_run(run_index: int) -> RunResult:
        if trace is None:
            return review_group_once(ctx, page, run_index, gateway, None)
        with trace.span(f"review:{run_index}", run_index=run_index):
            return review_group_once(ctx, page, run_index, gateway,
                                     trace.child(f"review:{run_index}"))

    with ThreadPoolExecutor(max_workers=k) as pool:
        futures = {run_index: pool.submit(_one_run, run_index)
                   for run_index in range(k)}
        for run_index, future in futures.items():
            try:
                results.append(future.result())
            except SchemReviewError as exc:
                log.warning("review run %d for group %r failed: %s",
                            run_index, ctx.group.name, exc)
                failures.append(RunFailure(run_index, str(exc)))
    if not results:
        raise AllRunsFailed(
            f"all {k} review runs failed for group {ctx.group.name!r}")
    return results, failures


# --- checklists ------------------------------------------------------------------

def load_checklist(group_name: str, directory: str | None = None) -> str:
    """Checklist for a group kind: <slug>.txt in the checklist directory,
    else the generic default. Content is configuration, not code."""
    slug = "".join(ch if ch.isalnum() else "_" for ch in group_name.lower())
    if directory is not None:
        root = Path(directory)
        for name in (f"{slug}.txt", "default.txt"):
            path = root / name
            if path.is_file():
                return path.read_text(encoding="utf-8")
        return ""
    files = resources.files("schemreview.checklists")
    for name in (f"{slug}.txt", "default.txt"):
        candidate = files.joinpath(name)
        if candidate.is_file():
            return candidate.read_text()
    return ""
