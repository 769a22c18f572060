"""Datasheet documents, extracted specifications, and critic scores."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .libraries import PartRef
from .xmlutil import Elem, render

# Critic dimension weights; they sum to 1.
CRITIC_WEIGHTS = {
    "feature_completeness": 0.25,
    "pin_function_coverage": 0.40,
    "application_information": 0.20,
    "typical_application_circuits": 0.15,
}


@dataclass(frozen=True)
class CriticScore:
    """Four quality sub-scores on a 10-point scale plus their weighted total.

    ``weighted`` is always computed here from the sub-scores; an agent's own
    arithmetic is never trusted.
    """

    feature_completeness: float
    pin_function_coverage: float
    application_information: float
    typical_application_circuits: float

    def __post_init__(self):
        for name in CRITIC_WEIGHTS:
            v = getattr(self, name)
            if not 0 <= v <= 10:
                raise ValueError(f"{name} must be within [0, 10], got {v}")

    @property
    def weighted(self) -> float:
        # scaled integer weights keep the total exact for whole sub-scores
        return (25 * self.feature_completeness
                + 40 * self.pin_function_coverage
                + 20 * self.application_information
                + 15 * self.typical_application_circuits) / 100

    def as_dict(self) -> dict:
        d = {name: getattr(self, name) for name in CRITIC_WEIGHTS}
        d["weighted"] = self.weighted
        return d


@dataclass(frozen=True)
class DatasheetDocument:
    source_url: str
    pages: tuple[str, ...]
    toc: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "pages", tuple(self.pages))
        if self.toc is not None:
            object.__setattr__(self, "toc", tuple((t, int(i)) for t, i in self.toc))
        if not self.pages:
            raise ValueError("a datasheet document needs at least one page")


@dataclass(frozen=True)
class PinFunction:
    designator: str
    function: str
    metadata: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Rating:
    parameter: str
    limit: str
    unit: str


@dataclass(frozen=True)
class OperatingRange:
    parameter: str
    unit: str
    min: str | None = None
    typ: str | None = None
    max: str | None = None


@dataclass(frozen=True)
class DatasheetSpec:
    part: PartRef
    source_url: str
    pins: tuple[PinFunction, ...] = ()
    abs_max_ratings: tuple[Rating, ...] = ()
    rec_operating: tuple[OperatingRange, ...] = ()
    blocks: tuple[str, ...] = ()
    app_circuits: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for pin in self.pins:
            if pin.designator in seen:
                raise ValueError(f"duplicate pin designator {pin.designator!r}")
            seen.add(pin.designator)

    def pin(self, designator: str) -> PinFunction | None:
        for p in self.pins:
            if p.designator == designator:
                return p
        return None

    def to_xml(self) -> str:
        """Compact canonical XML; byte-stable for equal specs."""
        attrs = {"source_url": self.source_url}
        if self.part.mpn:
            attrs["mpn"] = self.part.mpn
        if self.part.ipn:
            attrs["ipn"] = self.part.ipn
        root = Elem("datasheet", attrs)
        pins = root.child("pins")
        for pin in sorted(self.pins, key=lambda p: p.designator):
            e = pins.child("pin", {"designator": pin.designator, "function": pin.function})
            for key, value in sorted(pin.metadata):
                e.child("meta", {"key": key, "value": value})
        ratings = root.child("abs_max_ratings")
        for r in self.abs_max_ratings:
            ratings.child("rating", {"limit": r.limit, "parameter": r.parameter, "unit": r.unit})
        ranges = root.child("rec_operating")
        for r in self.rec_operating:
            attrs = {"parameter": r.parameter, "unit": r.unit}
            for bound in ("min", "typ", "max"):
                if getattr(r, bound) is not None:
                    attrs[bound] = getattr(r, bound)
            ranges.child("range", attrs)
        blocks = root.child("blocks")
        for text in self.blocks:
            blocks.child("block", text=text)
        circuits = root.child("app_circuits")
        for text in self.app_circuits:
            circuits.child("circuit", text=text)
        return render(root)

    @classmethod
    def from_xml(cls, xml_text: str) -> "DatasheetSpec":
        root = ET.fromstring(xml_text)
        part = PartRef(mpn=root.get("mpn"), ipn=root.get("ipn"))
        pins = tuple(
            PinFunction(
                p.get("designator"), p.get("function", ""),
                tuple(sorted((m.get("key"), m.get("value")) for m in p.findall("meta"))),
            )
            for p in root.findall("./pins/pin")
        )
        ratings = tuple(
            Rating(r.get("parameter"), r.get("limit"), r.get("unit"))
            for r in root.findall("./abs_max_ratings/rating")
        )
        ranges = tuple(
            OperatingRange(r.get("parameter"), r.get("unit"),
                           r.get("min"), r.get("typ"), r.get("max"))
            for r in root.findall("./rec_operating/range")
        )
        blocks = tuple(b.text or "" for b in root.findall("./blocks/block"))
        circuits = tuple(c.text or "" for c in root.findall("./app_circuits/circuit"))
        return cls(part, root.get("source_url"), pins, ratings, ranges, blocks, circuits)


def spec_from_agent_value(value: dict, part: PartRef, source_url: str) -> DatasheetSpec:
    """Build a spec from schema-validated agent output.

    Raises ValueError on domain violations the JSON schema cannot express
    (duplicate pin designators), which feeds the gateway repair loop.
    """
    pins = tuple(
        PinFunction(p["designator"], p.get("function", ""),
                    tuple(sorted(p.get("metadata", {}).items())))
        for p in value["pins"]
    )
    ratings = tuple(
        Rating(r["parameter"], r["limit"], r["unit"]) for r in value["abs_max_ratings"]
    )
    ranges = tuple(
        OperatingRange(r["parameter"], r["unit"], r.get("min"), r.get("typ"), r.get("max"))
        for r in value["rec_operating"]
    )
    return DatasheetSpec(part, source_url, pins, ratings, ranges,
                         tuple(value["blocks"]), tuple(value["app_circuits"]))
