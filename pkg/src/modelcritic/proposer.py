"""Candidate test statistics: an offline catalog and an optional HTTP backend.

Every proposal that comes back counts toward the multiple-testing family,
including proposals that fail to parse, fail validation on the observed data,
or duplicate an earlier proposal. ``ProposalBatch.family_size`` carries that
count and no transformation here changes it.
"""

from __future__ import annotations

import json
import logging
import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

from .data import REAL, Dataset, DatasetMetadata, ModelRepresentation, Schema
from .dsl import Agg, Combine, Compare, InQuantileBin, Predicate, StatisticSpec, parse_spec, spec_from_record
from .errors import MalformedBatchError, SpecError, TransportError
from .statistic import validate_spec

logger = logging.getLogger(__name__)

WIRE_VERSION = 1
GLOBAL_AGGREGATES = ("mean", "variance", "std", "skewness", "excess_kurtosis", "range", "dispersion_ratio")
SLICE_AGGREGATES = ("mean", "std", "variance")
MAX_PAIRWISE_LEVELS = 5
DEFAULT_BINS = 3


@dataclass
class ProposalBatch:
    accepted: list
    rejected: list = field(default_factory=list)  # (raw text, reason)
    family_size: int | None = None

    def __post_init__(self):
        count = len(self.accepted) + len(self.rejected)
        if self.family_size is None:
            self.family_size = count
        elif self.family_size != count:
            raise ValueError(f"family_size {self.family_size} != accepted + rejected = {count}")

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.accepted]

    def to_record(self) -> dict[str, Any]:
        return {
            "family_size": self.family_size,
            "accepted": self.texts,
            "rejected": [{"spec": t, "reason": r} for t, r in self.rejected],
        }

    @classmethod
    def from_record(cls, rec) -> "ProposalBatch":
        return cls(
            [parse_spec(t) for t in rec["accepted"]],
            [(r["spec"], r["reason"]) for r in rec.get("rejected", [])],
            rec.get("family_size"),
        )


# --- catalog ----------------------------------------------------------------

def _diff(kind: str, a: Predicate, b: Predicate) -> StatisticSpec:
    return StatisticSpec(Combine("sub", Agg(kind, (), a), Agg(kind, (), b)))


def _level_group(col) -> list[StatisticSpec]:
    levels = list(col.levels)
    if len(levels) > MAX_PAIRWISE_LEVELS:
        levels = levels[:2]  # schema levels are frequency-descending
    pairs = [(a, b) for a in levels for b in levels if a != b]
    out = []
    for kind in SLICE_AGGREGATES:
        for a, b in pairs:
            out.append(_diff(kind, Predicate((Compare(col.name, "==", a),)),
                             Predicate((Compare(col.name, "==", b),))))
    return out


def _bin_group(col, k: int = DEFAULT_BINS) -> list[StatisticSpec]:
    hi = Predicate((InQuantileBin(col.name, k, k - 1),))
    lo = Predicate((InQuantileBin(col.name, k, 0),))
    out = []
    for a, b in ((hi, lo), (lo, hi)):
        out.append(StatisticSpec(Combine("ratio", Agg("variance", (), a), Agg("variance", (), b))))
    for kind in ("mean", "std"):
        for a, b in ((hi, lo), (lo, hi)):
            out.append(_diff(kind, a, b))
    return out


def catalog_groups(schema: Schema) -> list[list[StatisticSpec]]:
    """Statistic groups: global aggregates first, then one group per feature."""
    groups = [[StatisticSpec(Agg(k)) for k in GLOBAL_AGGREGATES]]
    features = schema.features
    # binary features first so truncated catalogs still slice on them
    ordered = sorted(features, key=lambda c: 0 if c.is_binary else 1 if c.levels else 2)
    for col in ordered:
        if col.levels and len(col.levels) >= 2:
            groups.append(_level_group(col))
        elif col.kind in (REAL, "integer") and not col.levels:
            groups.append(_bin_group(col))
    return [g for g in groups if g]


def propose_catalog(schema: Schema, n_proposals: int = 24, seed: int = 0) -> ProposalBatch:
    """Deterministic offline proposals for ``schema``.

    Groups are interleaved round-robin (the visiting order of groups within a
    round is shuffled by ``seed``), so every group is represented once the
    batch holds at least one statistic per group. When the catalog is smaller
    than ``n_proposals`` it is cycled; the repeats are later rejected as
    duplicates but still count toward the family.
    """
    if n_proposals < 1:
        raise ValueError("n_proposals must be >= 1")
    groups = catalog_groups(schema)
    rng = random.Random(seed)
    order: list[StatisticSpec] = []
    queues = [list(g) for g in groups]
    while any(queues):
        visit = list(range(len(queues)))
        rng.shuffle(visit)
        for i in visit:
            if queues[i]:
                order.append(queues[i].pop(0))
    proposals = [order[i % len(order)] for i in range(n_proposals)]
    return ProposalBatch(proposals)


def baseline_specs() -> list[StatisticSpec]:
    """The pre-specified comparison: global mean and variance."""
    return [parse_spec("mean()"), parse_spec("variance()")]


def validate_batch(batch: ProposalBatch, d: Dataset) -> ProposalBatch:
    """Move proposals that fail on the observed data, or repeat one, to ``rejected``."""
    accepted, rejected, seen = [], list(batch.rejected), set()
    for spec in batch.accepted:
        text = spec.text
        if text in seen:
            rejected.append((text, "duplicate"))
            continue
        seen.add(text)
        try:
            validate_spec(spec, d)
        except SpecError as exc:
            rejected.append((text, f"{exc.reason}: {exc}"))
            continue
        accepted.append(spec)
    return ProposalBatch(accepted, rejected, batch.family_size)


# --- external service -------------------------------------------------------

SYSTEM_PROMPT = """\
You critique statistical models. A colleague has written the model below for \
the dataset described below. Propose test statistics that could expose ways \
in which data simulated from the model would differ from the real data. Each \
statistic is computed once on the observed target and once on every \
simulated replicate; a statistic is useful when the observed value would sit \
in the tail of the simulated values.

Write each statistic in the statistic language summarised here (no other code):
  aggregate(params, where predicate)  over the target column, e.g. mean(), std(where g == 1)
  aggregates: mean variance std min max range count skewness excess_kurtosis
              dispersion_ratio quantile(q) proportion_outside(lo, hi)
  predicates over feature columns, joined with "and":
      col == 1   col != "label"   col < 2.5   col in {"a", "b"}   col in quantile_bin(3, 0)
  combinations: a - b, a / b, abs(a - b)
Large values should indicate a discrepancy; propose both orientations of a
difference if either direction is plausible.

Respond with JSON: {"proposals": ["<statistic>", ...]}
"""


@dataclass(frozen=True)
class ProposalRequest:
    metadata: DatasetMetadata
    schema: Schema
    model: ModelRepresentation
    n_proposals: int = 24
    sampling: dict = field(default_factory=dict)

    def to_wire(self, system_prompt: str = SYSTEM_PROMPT) -> dict[str, Any]:
        return {
            "schema_version": WIRE_VERSION,
            "system_prompt": system_prompt,
            "metadata": {
                **self.metadata.to_record(),
                "schema": [{"name": c.name, "kind": c.kind, "target": c.is_target,
                            "levels": [v if isinstance(v, (str, bool)) else int(v) for v in c.levels]}
                           for c in self.schema.columns],
            },
            "model_program": self.model.program_text,
            "n": self.n_proposals,
            "sampling": dict(self.sampling),
        }


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach a proposal service.

    The credential is read from the environment variable named by
    ``api_key_env`` and is never stored in configuration files.
    """

    base_url: str
    model: str = ""
    api_key_env: str = "MODELCRITIC_API_KEY"
    path: str = "/v1/propose"
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0

    @classmethod
    def from_file(cls, path) -> "EndpointConfig":
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
        if any(k in rec for k in ("api_key", "token", "credential")):
            raise ValueError("credentials belong in the environment, not the endpoint config file")
        return cls(**rec)


def _post_with_retries(client: httpx.Client, url: str, body: dict, headers: dict,
                       cfg: EndpointConfig, sleep: Callable[[float], None]) -> dict:
    last: Exception | None = None
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = client.post(url, json=body, headers=headers, timeout=cfg.timeout)
            if resp.status_code >= 500 or resp.status_code == 429:
                raise httpx.HTTPStatusError(f"server returned {resp.status_code}", request=resp.request,
                                            response=resp)
            if resp.status_code >= 400:
                raise TransportError(f"request rejected with status {resp.status_code}: {resp.text[:200]}")
            return resp.json()
        except (httpx.TransportError, httpx.HTTPStatusError) as exc:
            last = exc
            if attempt < cfg.max_retries:
                delay = cfg.backoff * 2 ** attempt
                logger.warning("proposal request failed (%s); retrying in %.1fs", exc, delay)
                sleep(delay)
        except json.JSONDecodeError as exc:
            raise MalformedBatchError(f"response is not JSON: {exc}") from exc
    raise TransportError(f"giving up after {cfg.max_retries + 1} attempts: {last}")


def parse_proposals(items: Sequence, schema: Schema | Dataset | None) -> ProposalBatch:
    accepted, rejected = [], []
    for item in items:
        raw = item if isinstance(item, str) else json.dumps(item, sort_keys=True)
        try:
            if isinstance(item, str):
                spec = parse_spec(item, schema)
            elif isinstance(item, dict):
                spec = spec_from_record(item, schema)
            else:
                raise SpecError(f"proposal of type {type(item).__name__}")
        except SpecError as exc:
            rejected.append((raw, f"{exc.reason}: {exc}"))
            continue
        accepted.append(spec)
    return ProposalBatch(accepted, rejected)


def propose_external(req: ProposalRequest, endpoint: EndpointConfig,
                     transport: httpx.BaseTransport | None = None,
                     sleep: Callable[[float], None] = time.sleep) -> ProposalBatch:
    """Ask a remote service for proposals and parse each one.

    Proposals that do not parse or reference unknown columns are rejected with
    the reason; the family size is the number of proposals returned.
    """
    headers = {"content-type": "application/json"}
    key = os.environ.get(endpoint.api_key_env)
    if key:
        headers["authorization"] = f"Bearer {key}"
    body = req.to_wire()
    if endpoint.model:
        body["model"] = endpoint.model
    with httpx.Client(base_url=endpoint.base_url, transport=transport) as client:
        payload = _post_with_retries(client, endpoint.path, body, headers, endpoint, sleep)
    if not isinstance(payload, dict) or not isinstance(payload.get("proposals"), list):
        raise MalformedBatchError("response must be an object with a 'proposals' list")
    return parse_proposals(payload["proposals"], req.schema)


# --- recorded sessions --------------------------------------------------------

def replay_transport(fixture_path, check_request: bool = True) -> httpx.MockTransport:
    """Serve recorded responses from a fixture file in request order.

    The fixture is ``{"interactions": [{"request": {...}, "response": {"status": int, "body": {...}}}]}``.
    With ``check_request`` the outgoing body must match the recording.
    """
    rec = json.loads(Path(fixture_path).read_text(encoding="utf-8"))
    interactions = list(rec["interactions"])

    def handler(request: httpx.Request) -> httpx.Response:
        if not interactions:
            raise AssertionError("no recorded interaction left to replay")
        item = interactions.pop(0)
        if check_request:
            sent = json.loads(request.content)
            if sent != item["request"]:
                diff = sorted(k for k in set(sent) | set(item["request"]) if sent.get(k) != item["request"].get(k))
                raise AssertionError(f"request differs from recording in fields {diff}")
        resp = item["response"]
        return httpx.Response(resp.get("status", 200), json=resp.get("body"))

    return httpx.MockTransport(handler)


class RecordingTransport(httpx.BaseTransport):
    """Wrap a transport and append every exchange to a fixture file."""

    def __init__(self, inner: httpx.BaseTransport, fixture_path):
        self.inner = inner
        self.path = Path(fixture_path)
        self.interactions: list[dict] = []

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        response = self.inner.handle_request(request)
        response.read()
        self.interactions.append({
            "request": json.loads(request.content),
            "response": {"status": response.status_code, "body": response.json()},
        })
        self.path.write_text(json.dumps({"interactions": self.interactions}, indent=1), encoding="utf-8")
        return response
