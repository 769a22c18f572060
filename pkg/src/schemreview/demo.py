"""Self-contained demo workspace and scripted mock responses.

``write_demo_workspace`` lays out everything an offline end-to-end run
needs: the bundled three-page schematic (with an intentionally swapped
pin pair on U1 and a mis-railed pull-up on R8), a base variant differing
only on page P2, synthetic datasheet files, a CSV part library, and a
run config pointing at a mock backend.

``demo_responder`` answers every agent call deterministically from the
payload alone, and ``generate_fixtures`` drives a run function until the
fixture directory satisfies it: the mock backend drops a ``.req``
capture for each miss, each round scripts responses for the captures,
and the loop converges because fixtures only accumulate.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from importlib import resources
from pathlib import Path

from .errors import SchemReviewError

POWER_NET = re.compile(r"^(GND|VCC.*|VDD.*|[+-]?[0-9]+V.*)$")

DEMO_PART_PINS = {
    "LM317": [("1", "ADJ", "output voltage adjust"),
              ("2", "VOUT", "regulated output"),
              ("3", "VIN", "supply input")],
    "RES-1K": [("1", "", "terminal"), ("2", "", "terminal")],
    "RES-120": [("1", "", "terminal"), ("2", "", "terminal")],
    "RES-4K7": [("1", "", "terminal"), ("2", "", "terminal")],
    "CAP-10U": [("1", "+", "positive terminal"), ("2", "-", "negative terminal")],
    "CAP-100N": [("1", "", "terminal"), ("2", "", "terminal")],
    "XCVR-485": [("1", "A", "bus line A"), ("2", "B", "bus line B"),
                 ("3", "VCC", "supply"), ("4", "GND", "ground")],
    "SENSE-TMP": [("1", "SDA", "i2c data"), ("2", "SCL", "i2c clock"),
                  ("3", "VDD", "supply"), ("4", "GND", "ground")],
}


def demo_schematic_text() -> str:
    return resources.files("schemreview.data").joinpath("demo_schematic.json").read_text()


def demo_base_text() -> str:
    """The base variant: identical except page P2, where the termination
    resistor is not yet on BUS_B."""
    doc = json.loads(demo_schematic_text())
    for page in doc["pages"]:
        if page["id"] == "P2":
            for net in page["nets"]:
                if net["name"] == "BUS_B":
                    net["nodes"] = [n for n in net["nodes"] if n[0] != "R7"]
    return json.dumps(doc, indent=2)


def datasheet_text(mpn: str) -> str:
    pins = DEMO_PART_PINS[mpn]
    pin_lines = "\n".join(f"PIN {d} {name or '-'} {function}"
                          for d, name, function in pins)
    return (
        f"{mpn} DATASHEET\nGENERAL DESCRIPTION\n"
        f"A demo component with {len(pins)} pins.\n"
        "\f"
        f"PIN DESCRIPTIONS\n{pin_lines}\n"
        "\f"
        "ABSOLUTE MAXIMUM RATINGS\n"
        "RATING supply-voltage 40 V\n"
        "RECOMMENDED OPERATING\n"
        "RANGE supply-voltage 3 37 V\n"
        "\f"
        "TYPICAL APPLICATION\n"
        f"CIRCUIT reference circuit for {mpn}\n"
        "BLOCK internal protection block\n"
    )


def write_demo_workspace(workdir) -> dict:
    """Create the demo workspace; returns the important paths."""
    root = Path(workdir)
    (root / "datasheets").mkdir(parents=True, exist_ok=True)
    (root / "fixtures").mkdir(exist_ok=True)

    schematic = root / "schematic.json"
    schematic.write_text(demo_schematic_text(), encoding="utf-8")
    base = root / "base_schematic.json"
    base.write_text(demo_base_text(), encoding="utf-8")

    rows = ["part_number,datasheet_url"]
    for mpn in sorted(DEMO_PART_PINS):
        sheet = root / "datasheets" / f"{mpn}.txt"
        sheet.write_text(datasheet_text(mpn), encoding="utf-8")
        rows.append(f"{mpn},{sheet.resolve().as_uri()}")
    library_csv = root / "parts.csv"
    library_csv.write_text("\n".join(rows) + "\n", encoding="utf-8")

    config = {
        "version": 1,
        "mode": "full-analysis",
        "k": 3,
        "critic_threshold": 7.0,
        "cache_dir": str(root / "cache"),
        "backend": {"kind": "mock", "fixture_path": str(root / "fixtures")},
        "libraries": [{"kind": "csv-table", "priority": 1,
                       "path": str(library_csv)}],
        "sink": {"kind": "file", "out_dir": str(root / "out")},
        "trace_out": str(root / "trace.jsonl"),
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return {
        "schematic": schematic,
        "base": base,
        "config": config_path,
        "fixtures": root / "fixtures",
        "out": root / "out",
        "trace": root / "trace.jsonl",
    }


# --- scripted responses -------------------------------------------------------

def _respond_selection(payload: str) -> str:
    """Connected components over non-power nets, named after their lead
    component (the first U-designator when one exists)."""
    page = ET.fromstring(payload)
    designators = [c.get("designator") for c in page.iter("component")]
    adjacency = {d: set() for d in designators}
    for net in page.iter("net"):
        if POWER_NET.match(net.get("name")):
            continue
        members = sorted({node.get("component") for node in net.iter("node")})
        for a in members:
            for b in members:
                if a != b:
                    adjacency[a].add(b)
    seen: set[str] = set()
    groups = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack, cluster = [start], []
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            cluster.append(node)
            stack.extend(adjacency[node] - seen)
        cluster.sort()
        lead = next((d for d in cluster if d.startswith("U")), cluster[0])
        groups.append({"name": f"{lead} network", "designators": cluster})
    groups.sort(key=lambda g: g["name"])
    return json.dumps({"groups": groups})


def _respond_head(payload: str) -> str:
    doc = json.loads(payload)
    markers = ("PIN", "RATING", "APPLICATION")
    pages = [i for i, text in enumerate(doc["excerpts"])
             if any(marker in text.upper() for marker in markers)]
    return json.dumps({"pages": pages or [0]})


def _respond_extraction(payload: str) -> str:
    doc = json.loads(payload)
    pins, ratings, ranges, blocks, circuits = [], [], [], [], []
    for _index, text in sorted(doc["pages"].items(), key=lambda kv: int(kv[0])):
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "PIN" and len(parts) >= 4:
                pins.append({"designator": parts[1],
                             "function": " ".join(parts[3:]),
                             "metadata": ({"name": parts[2]}
                                          if parts[2] != "-" else {})})
            elif parts[0] == "RATING" and len(parts) >= 4:
                ratings.append({"parameter": parts[1], "limit": parts[2],
                                "unit": parts[3]})
            elif parts[0] == "RANGE" and len(parts) >= 5:
                ranges.append({"parameter": parts[1], "min": parts[2],
                               "max": parts[3], "unit": parts[4]})
            elif parts[0] == "BLOCK":
                blocks.append(" ".join(parts[1:]))
            elif parts[0] == "CIRCUIT":
                circuits.append(" ".join(parts[1:]))
    return json.dumps({"pins": pins, "abs_max_ratings": ratings,
                       "rec_operating": ranges, "blocks": blocks,
                       "app_circuits": circuits})


def _respond_critic(payload: str) -> str:
    root = ET.fromstring(payload)
    pin_count = len(root.findall("./pins/pin"))
    has_blocks = bool(root.findall("./blocks/block"))
    has_circuits = bool(root.findall("./app_circuits/circuit"))
    return json.dumps({
        "feature_completeness": 8 if has_blocks else 6,
        "pin_function_coverage": min(10, 7 + pin_count),
        "application_information": 8 if has_circuits else 5,
        "typical_application_circuits": 8 if has_circuits else 5,
    })


def _respond_review(payload: str, seed: int) -> str:
    doc = json.loads(payload)
    page_id = ET.fromstring(doc["netlist_xml"]).get("id")
    members = list(doc["group"]["designators"])
    pins_of = {}
    for comp in ET.fromstring(doc["netlist_xml"]).iter("component"):
        pins_of[comp.get("designator")] = [p.get("designator")
                                           for p in comp.findall("pin")]

    analyses: dict[str, list[dict]] = {}
    covered: dict[str, set[str]] = {}

    def add(designator, pins, status, reasoning, nets=()):
        if designator not in members:
            return
        analyses.setdefault(designator, []).append({
            "pins": pins, "status": status, "reasoning": reasoning,
            "referenced_nets": list(nets)})
        covered.setdefault(designator, set()).update(
            p.strip() for p in pins.split(","))

    if page_id == "P1":
        add("U1", "1, 3", "incorrect",
            "ADJ and VIN are swapped relative to the datasheet pinout",
            ["NET_A", "VIN_RAW"])
        add("R5", "1", "warning",
            "feedback resistor ties to the swapped adjust node", ["NET_A"])
    if page_id == "P3":
        add("R8", "1", "incorrect",
            "pull-up connects SDA to the wrong rail", ["I2C_SDA"])
        add("U3", "2", "incorrect" if seed == 2 else "correct",
            "SCL connection check", ["I2C_SCL"])
        if seed == 1:
            add("C5", "1", "warning",
                "verify decoupling capacitor voltage rating margin",
                ["VDD_SENSOR"])

    silent = {"C5"} if page_id == "P3" else set()
    for designator in members:
        if designator in silent:
            continue
        remaining = [p for p in pins_of.get(designator, [])
                     if p not in covered.get(designator, set())]
        if remaining:
            add(designator, ", ".join(sorted(remaining)), "correct",
                "connections match the datasheet")

    return json.dumps({"analyses": [
        {"designator": d, "verdicts": v} for d, v in sorted(analyses.items())]})


def _respond_consensus(payload: str) -> str:
    from collections import Counter

    doc = json.loads(payload)
    verifications = [{"designator": s["designator"], "pins": s["pins"],
                      "keep": True} for s in doc["singles"]]
    resolutions = []
    for contradiction in doc["contradictions"]:
        counts = Counter(v["status"] for v in contradiction["verdicts"])
        top = max(counts.values())
        status = sorted(s for s, n in counts.items() if n == top)[0]
        resolutions.append({
            "designator": contradiction["designator"],
            "pins": contradiction["pins"],
            "status": status,
            "reasoning": "re-examined against full context; majority stands",
            "referenced_nets": sorted({n for v in contradiction["verdicts"]
                                       for n in v["referenced_nets"]}),
        })
    return json.dumps({"verifications": verifications, "resolutions": resolutions})


def demo_responder(kind_name: str, payload: str, seed: int = 0) -> str:
    if kind_name == "selection":
        return _respond_selection(payload)
    if kind_name == "head_analysis":
        return _respond_head(payload)
    if kind_name == "extraction":
        return _respond_extraction(payload)
    if kind_name == "critic":
        return _respond_critic(payload)
    if kind_name == "group_review":
        return _respond_review(payload, seed)
    if kind_name == "consensus":
        return _respond_consensus(payload)
    raise ValueError(f"no scripted response for agent kind {kind_name!r}")


# --- fixture generation ----------------------------------------------------------

def generate_fixtures(run_fn, fixture_root, responder=demo_responder,
                      max_rounds: int = 60):
    """Run ``run_fn`` repeatedly, scripting responses for every ``.req``
    capture the mock backend leaves behind, until a round needs nothing
    new; returns that round's result."""
    root = Path(fixture_root)
    root.mkdir(parents=True, exist_ok=True)
    for _ in range(max_rounds):
        failure = None
        result = None
        try:
            result = run_fn()
        except SchemReviewError as exc:
            failure = exc
        missing = [p for p in sorted(root.rglob("*.req"))
                   if not p.with_suffix(".resp").exists()]
        if not missing:
            if failure is not None:
                raise failure
            return result
        for req_path in missing:
            kind_name = req_path.parent.name
            seed = int(req_path.stem.rsplit("-", 1)[1])
            payload = req_path.read_text(encoding="utf-8")
            req_path.with_suffix(".resp").write_text(
                responder(kind_name, payload, seed), encoding="utf-8")
    raise RuntimeError("fixture generation did not converge")
