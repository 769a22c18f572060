"""Shared test scaffolding: mock fixture scripting for pipeline stages."""

import itertools
import json
import re
from pathlib import Path

from schemreview import demo
from schemreview.datasheets import (
    build_extract_payload,
    build_head_payload,
    decode_document,
)
from schemreview.dsmodel import spec_from_agent_value
from schemreview.gateway import AgentKind, fixture_relpath
from schemreview.libraries import PartRef
from schemreview.model import Component, Net, Page, Pin

BASE_SPEC_VALUE = {
    "pins": [
        {"designator": "1", "function": "adjust"},
        {"designator": "2", "function": "output"},
        {"designator": "3", "function": "input"},
    ],
    "abs_max_ratings": [{"parameter": "Vin-Vout", "limit": "40", "unit": "V"}],
    "rec_operating": [{"parameter": "Iout", "min": "0.01", "max": "1.5", "unit": "A"}],
    "blocks": ["reference block"],
    "app_circuits": ["typical adjustable regulator"],
}


def write_fixture(fixture_root, kind: AgentKind, payload: str, seed: int, text: str):
    path = Path(fixture_root) / fixture_relpath(kind, payload, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def quad_for(target: float) -> dict:
    """First integer sub-score quadruple whose weighted total equals target."""
    for q in itertools.product(range(11), repeat=4):
        if (25 * q[0] + 40 * q[1] + 20 * q[2] + 15 * q[3]) / 100 == target:
            return {
                "feature_completeness": q[0],
                "pin_function_coverage": q[1],
                "application_information": q[2],
                "typical_application_circuits": q[3],
            }
    raise ValueError(f"no integer quadruple reaches weighted score {target}")


def script_retrieval_attempt(fixture_root, url: str, doc_bytes: bytes,
                             part: PartRef, quad: dict, spec_value=None):
    """Write the head/extract/critic fixtures one retrieval attempt will use.

    Returns the spec that extraction will produce (distinct per URL since
    the source URL is embedded in it).
    """
    spec_value = spec_value or BASE_SPEC_VALUE
    doc = decode_document(url, doc_bytes)
    write_fixture(fixture_root, AgentKind.HEAD_ANALYSIS,
                  build_head_payload(doc), 0, '{"pages": [0]}')
    write_fixture(fixture_root, AgentKind.EXTRACTION,
                  build_extract_payload(doc, [0]), 0, json.dumps(spec_value))
    spec = spec_from_agent_value(spec_value, part, url)
    write_fixture(fixture_root, AgentKind.CRITIC, spec.to_xml(), 0, json.dumps(quad))
    return spec


def make_candidate_files(tmp_path, count: int, stem: str = "sheet"):
    """Create distinct local datasheet files; returns their file:// URLs."""
    urls = []
    for i in range(count):
        path = Path(tmp_path) / f"{stem}{i}.txt"
        path.write_text(f"datasheet body {i}\npin table\fratings page {i}")
        urls.append(path.resolve().as_uri())
    return urls


def regulator_page() -> Page:
    """A small adjustable-regulator page: U1 + divider + input cap, plus an
    isolated diode that only touches ground."""
    return Page("P1", components=(
        Component("U1", mpn="LM317", pins=(Pin("1", "ADJ"), Pin("2", "VOUT"),
                                           Pin("3", "VIN"))),
        Component("R1", mpn="RES-1K", pins=(Pin("1"), Pin("2"))),
        Component("R2", ipn="RES-4K7", pins=(Pin("1"), Pin("2"))),
        Component("C1", pins=(Pin("1"), Pin("2"))),
        Component("D5", mpn="BAT54", pins=(Pin("1"), Pin("2"))),
    ), nets=(
        Net("REG_OUT", (("U1", "2"), ("R1", "1"), ("C1", "1"))),
        Net("ADJ_NODE", (("U1", "1"), ("R1", "2"), ("R2", "1"))),
        Net("VIN_RAW", (("U1", "3"),)),
        Net("GND", (("R2", "2"), ("C1", "2"), ("D5", "2"))),
        Net("VCC_3V3", (("D5", "1"),)),
    ))


POWER_NET = re.compile(r"^(GND|VCC.*|VDD.*|[+-]?[0-9]+V.*)$")


def connected_components_excluding_power(page: Page) -> list[list[str]]:
    """Independent grouping oracle: BFS over nets whose names are not
    power-rail-like."""
    adjacency: dict[str, set[str]] = {c.designator: set() for c in page.components}
    for net in page.nets:
        if POWER_NET.match(net.name):
            continue
        designators = sorted({comp for comp, _pin in net.nodes})
        for a in designators:
            for b in designators:
                if a != b:
                    adjacency[a].add(b)
    seen: set[str] = set()
    groups = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        frontier = [start]
        cluster = []
        while frontier:
            node = frontier.pop()
            if node in seen:
                continue
            seen.add(node)
            cluster.append(node)
            frontier.extend(adjacency[node] - seen)
        groups.append(sorted(cluster))
    return groups


def majority_status(contradiction: dict) -> str:
    from collections import Counter
    counts = Counter(v["status"] for v in contradiction["verdicts"])
    top = max(counts.values())
    return sorted(s for s, n in counts.items() if n == top)[0]


def consensus_responder(keep=lambda single: True, resolve=majority_status):
    """Scripted adjudication policy for the consensus agent."""
    def respond(kind_name: str, payload_str: str, seed: int = 0) -> str:
        assert kind_name == "consensus", f"unexpected agent call: {kind_name}"
        payload = json.loads(payload_str)
        verifications = [
            {"designator": s["designator"], "pins": s["pins"], "keep": bool(keep(s))}
            for s in payload["singles"]
        ]
        resolutions = [
            {"designator": c["designator"], "pins": c["pins"],
             "status": resolve(c), "reasoning": "resolved with full context",
             "referenced_nets": sorted({n for v in c["verdicts"]
                                        for n in v["referenced_nets"]})}
            for c in payload["contradictions"]
        ]
        return json.dumps({"verifications": verifications, "resolutions": resolutions})
    return respond


generate_fixtures = demo.generate_fixtures
