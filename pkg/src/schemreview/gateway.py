"""Uniform, tiered, schema-validated access to chat-completion backends.

Two backends share one contract: a live HTTP backend speaking the common
chat-completions wire format, and a fixture-driven mock that makes every
pipeline run reproducible. Responses must validate against a registered
JSON schema; malformed output is re-prompted with the validation error
appended, at most ``MAX_REPAIRS`` times.

Mock fixtures live under ``<fixture_path>/<agent_kind>/<digest>-<seed>.resp``
where ``digest`` is the first 16 hex chars of the SHA-256 of the user
payload. The mock is thus a pure function of (agent kind, payload, seed).
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import (
    BackendTimeout,
    BackendUnavailable,
    ConfigError,
    SchemaViolationAfterRetries,
)
from .tracing import TraceContext

MAX_REPAIRS = 2


class AgentKind(enum.Enum):
    SELECTION = "selection"
    HEAD_ANALYSIS = "head_analysis"
    EXTRACTION = "extraction"
    CRITIC = "critic"
    GROUP_REVIEW = "group_review"
    CONSENSUS = "consensus"
    ERROR_GROUPING = "error_grouping"


class ModelTier(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"


_TIERS = {
    AgentKind.SELECTION: ModelTier.STRONG,
    AgentKind.GROUP_REVIEW: ModelTier.STRONG,
    AgentKind.CONSENSUS: ModelTier.STRONG,
    AgentKind.ERROR_GROUPING: ModelTier.STRONG,
    AgentKind.HEAD_ANALYSIS: ModelTier.WEAK,
    AgentKind.EXTRACTION: ModelTier.WEAK,
    AgentKind.CRITIC: ModelTier.WEAK,
}


def route_tier(agent_kind: AgentKind) -> ModelTier:
    """Reviewing/combining agents get the strong model; mechanical ones the weak."""
    return _TIERS[agent_kind]


@dataclass(frozen=True)
class TokenUsage:
    tokens_in: int = 0
    tokens_out: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.tokens_in + other.tokens_in,
                          self.tokens_out + other.tokens_out)


@dataclass(frozen=True)
class AgentRequest:
    agent_kind: AgentKind
    system_prompt: str
    user_payload: str
    response_schema_id: str
    seed: int = 0

    @property
    def tier(self) -> ModelTier:
        return route_tier(self.agent_kind)


@dataclass(frozen=True)
class AgentResponse:
    value: object
    usage: TokenUsage
    latency: float
    attempts: int = 1


@dataclass
class BackendConfig:
    kind: str = "mock"  # "mock" | "live-http"
    endpoint: str | None = None
    strong_model: str = "strong-default"
    weak_model: str = "weak-default"
    consensus_model: str | None = None
    fixture_path: str | None = None
    api_key_env: str = "SCHEMREVIEW_API_KEY"
    timeout_s: float = 60.0
    max_in_flight: int = 8
    mock_delay_s: float = 0.0

    def validate(self) -> None:
        if self.kind not in ("mock", "live-http"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "live-http" and not self.endpoint:
            raise ConfigError("live-http backend requires an endpoint")
        if self.kind == "mock" and not self.fixture_path:
            raise ConfigError("mock backend requires a fixture_path")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")


def resolve_model(cfg: BackendConfig, agent_kind: AgentKind) -> str:
    """Model name for an agent; the consensus agent may use a dedicated one."""
    if agent_kind is AgentKind.CONSENSUS and cfg.consensus_model:
        return cfg.consensus_model
    if route_tier(agent_kind) is ModelTier.STRONG:
        return cfg.strong_model
    return cfg.weak_model


# --- schema registry ---------------------------------------------------------

_BUNDLED_SCHEMAS = {
    "selection": "selection.json",
    "head_analysis": "head_analysis.json",
    "extraction": "extraction.json",
    "critic": "critic.json",
    "group_review": "group_review.json",
    "consensus": "consensus.json",
}


class SchemaViolation(ValueError):
    """Internal: one validation failure, with a deterministic message."""


class SchemaRegistry:
    def __init__(self):
        self._schemas: dict[str, dict] = {}

    @classmethod
    def bundled(cls) -> "SchemaRegistry":
        reg = cls()
        for schema_id, filename in _BUNDLED_SCHEMAS.items():
            text = resources.files("schemreview.schemas").joinpath(filename).read_text()
            reg.register(schema_id, json.loads(text))
        return reg

    def register(self, schema_id: str, schema: dict) -> None:
        self._schemas[schema_id] = schema

    def __contains__(self, schema_id: str) -> bool:
        return schema_id in self._schemas

    def validate(self, schema_id: str, value) -> None:
        try:
            schema = self._schemas[schema_id]
        except KeyError:
            raise ConfigError(f"schema {schema_id!r} is not registered") from None
        validator = jsonschema.Draft202012Validator(schema)
        errors = sorted(validator.iter_errors(value), key=str)
        if errors:
            err = errors[0]
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            raise SchemaViolation(f"{where}: {err.message}")


_DEFAULT_REGISTRY: SchemaRegistry | None = None


def default_registry() -> SchemaRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        _DEFAULT_REGISTRY = SchemaRegistry.bundled()
    return _DEFAULT_REGISTRY


# --- payload identity and repair ---------------------------------------------

def payload_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def repair_payload(payload: str, error: str) -> str:
    """The re-prompt sent after a schema failure (error appended verbatim)."""
    return f"{payload}\n\n[schema-error]\n{error}"


def fixture_relpath(agent_kind: AgentKind, payload: str, seed: int) -> str:
    return f"{agent_kind.value}/{payload_digest(payload)}-{seed}.resp"


# --- backends -----------------------------------------------------------------

class MockBackend:
    """Reads canned responses from the fixture directory; contention-free.

    A miss raises BackendUnavailable naming the missing key and drops the
    offending payload next to it as ``<digest>-<seed>.req``, so a fixture
    author can script the response without re-deriving the payload.
    """

    def __init__(self, cfg: BackendConfig):
        self.root = Path(cfg.fixture_path)
        self.delay_s = cfg.mock_delay_s

    def complete(self, req: AgentRequest, payload: str) -> tuple[str, TokenUsage]:
        rel = fixture_relpath(req.agent_kind, payload, req.seed)
        path = self.root / rel
        if not path.is_file():
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.with_suffix(".req").write_text(payload, encoding="utf-8")
            except OSError:
                pass
            raise BackendUnavailable(f"no mock fixture for key {rel}")
        if self.delay_s:
            time.sleep(self.delay_s)
        raw = path.read_text(encoding="utf-8")
        # deterministic, length-proportional token accounting
        return raw, TokenUsage(len(payload) // 4, len(raw) // 4)


class LiveHttpBackend:
    """Chat-completions wire format:

    request  {"model", "messages": [{"role","content"}...], "temperature", "seed"}
    response {"choices": [{"message": {"content": str}}],
              "usage": {"prompt_tokens": int, "completion_tokens": int}}
    """

    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg

    def complete(self, req: AgentRequest, payload: str) -> tuple[str, TokenUsage]:
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.cfg.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": resolve_model(self.cfg, req.agent_kind),
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": payload},
            ],
            "temperature": 0.0,
            "seed": req.seed,
        }
        try:
            resp = requests.post(self.cfg.endpoint, json=body, headers=headers,
                                 timeout=self.cfg.timeout_s)
        except requests.Timeout as exc:
            raise BackendTimeout(f"backend timed out after {self.cfg.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"backend returned HTTP {resp.status_code}")
        doc = resp.json()
        try:
            text = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed backend response: {exc}") from exc
        usage = doc.get("usage", {})
        return text, TokenUsage(int(usage.get("prompt_tokens", 0)),
                                int(usage.get("completion_tokens", 0)))


# --- gateway -------------------------------------------------------------------

class Gateway:
    """Shareable across concurrent agent invocations.

    The live backend is throttled by ``max_in_flight``; the mock needs no
    throttle. Every completed invocation records exactly one span (when a
    trace context is given) and one usage ledger entry.
    """

    def __init__(self, cfg: BackendConfig, registry: SchemaRegistry | None = None):
        cfg.validate()
        self.cfg = cfg
        self.registry = registry or default_registry()
        self.ledger = UsageLedger()
        self._backend = MockBackend(cfg) if cfg.kind == "mock" else LiveHttpBackend(cfg)
        self._slots = (threading.Semaphore(cfg.max_in_flight)
                       if cfg.kind == "live-http" else None)

    def complete(self, req: AgentRequest, post_validate=None,
                 trace: TraceContext | None = None) -> AgentResponse:
        if req.response_schema_id not in self.registry:
            raise ConfigError(f"schema {req.response_schema_id!r} is not registered")
        start = time.time()
        t0 = time.perf_counter()
        payload = req.user_payload
        usage = TokenUsage()
        attempts = 0
        last_raw = ""
        failure: str | None = None
        try:
            for attempts in range(1, MAX_REPAIRS + 2):
                raw, attempt_usage = self._invoke(req, payload)
                usage += attempt_usage
                last_raw = raw
                try:
                    value = json.loads(raw)
                except json.JSONDecodeError as exc:
                    failure = f"invalid JSON: {exc.msg} at char {exc.pos}"
                else:
                    try:
                        self.registry.validate(req.response_schema_id, value)
                        if post_validate is not None:
                            post_validate(value)
                    except (SchemaViolation, ValueError) as exc:
                        failure = str(exc)
                    else:
                        latency = time.perf_counter() - t0
                        resp = AgentResponse(value, usage, latency, attempts)
                        self._account(req, resp, trace, start)
                        return resp
                payload = repair_payload(payload, failure)
            raise SchemaViolationAfterRetries(
                f"{req.agent_kind.value}: output failed schema "
                f"{req.response_schema_id!r} after {attempts} attempts: {failure}",
                last_raw=last_raw)
        except SchemaViolationAfterRetries:
            # account for the spent tokens even though the call failed
            failed = AgentResponse(None, usage, time.perf_counter() - t0, attempts)
            self._account(req, failed, trace, start, error="schema_violation")
            raise

    def _invoke(self, req: AgentRequest, payload: str) -> tuple[str, TokenUsage]:
        if self._slots is None:
            return self._backend.complete(req, payload)
        with self._slots:
            return self._backend.complete(req, payload)

    def _account(self, req: AgentRequest, resp: AgentResponse,
                 trace: TraceContext | None, start: float, error: str | None = None) -> None:
        self.ledger.add(req.agent_kind, resp.usage, resp.latency)
        if trace is not None:
            attrs = {
                "tokens_in": resp.usage.tokens_in,
                "tokens_out": resp.usage.tokens_out,
                "attempt": resp.attempts,
                "seed": req.seed,
            }
            if error:
                attrs["error"] = error
            trace.record(req.agent_kind.value, start, resp.latency, **attrs)


# --- usage ledger ---------------------------------------------------------------

@dataclass
class KindUsage:
    tokens_in: int = 0
    tokens_out: int = 0
    latency: float = 0.0
    calls: int = 0


class UsageLedger:
    """Per-agent-kind token and latency sums; additive only."""

    def __init__(self):
        self._lock = threading.Lock()
        self._by_kind: dict[AgentKind, KindUsage] = {}

    def add(self, kind: AgentKind, usage: TokenUsage, latency: float) -> None:
        with self._lock:
            entry = self._by_kind.setdefault(kind, KindUsage())
            entry.tokens_in += usage.tokens_in
            entry.tokens_out += usage.tokens_out
            entry.latency += latency
            entry.calls += 1

    def per_kind(self) -> dict[AgentKind, KindUsage]:
        with self._lock:
            return {k: KindUsage(v.tokens_in, v.tokens_out, v.latency, v.calls)
                    for k, v in self._by_kind.items()}

    def totals(self) -> KindUsage:
        total = KindUsage()
        for entry in self.per_kind().values():
            total.tokens_in += entry.tokens_in
            total.tokens_out += entry.tokens_out
            total.latency += entry.latency
            total.calls += entry.calls
        return total

    def as_dict(self) -> dict:
        out = {}
        for kind, entry in sorted(self.per_kind().items(), key=lambda kv: kv[0].value):
            out[kind.value] = {
                "tokens_in": entry.tokens_in,
                "tokens_out": entry.tokens_out,
                "latency_s": entry.latency,
                "calls": entry.calls,
            }
        return out


def record_usage(responses) -> UsageLedger:
    """Build a ledger from an iterable of (agent_kind, AgentResponse)."""
    ledger = UsageLedger()
    for kind, resp in responses:
        ledger.add(kind, resp.usage, resp.latency)
    return ledger


def complete_structured(cfg: BackendConfig, req: AgentRequest,
                        post_validate=None) -> AgentResponse:
    """One-shot form of Gateway.complete for callers without a shared gateway."""
    return Gateway(cfg).complete(req, post_validate=post_validate)
