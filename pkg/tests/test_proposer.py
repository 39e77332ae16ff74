import json
from pathlib import Path

import httpx
import pytest

from modelcritic.benchmarks import RADON_METADATA, radon_scenario
from modelcritic.data import Dataset
from modelcritic.errors import MalformedBatchError, TransportError
from modelcritic.proposer import (
    GLOBAL_AGGREGATES,
    EndpointConfig,
    ProposalBatch,
    ProposalRequest,
    parse_proposals,
    propose_catalog,
    propose_external,
    replay_transport,
    validate_batch,
)

FIXTURE = Path(__file__).parent / "fixtures" / "proposer_session.json"


@pytest.fixture(scope="module")
def radon():
    return radon_scenario(0, include_floor=False, m=20)


def test_catalog_radon_contains_floor_statistics(radon):
    d, _, _ = radon
    texts = propose_catalog(d.schema(), 20, 0).texts
    assert "mean(where floor == 0) - mean(where floor == 1)" in texts
    assert "std(where floor == 0) - std(where floor == 1)" in texts
    assert any("soil" in t for t in texts)


def test_catalog_target_only():
    d = Dataset.from_columns("t", {"y": [1.0, 2.0, 3.0]}, "y")
    batch = propose_catalog(d.schema(), 7, 0)
    assert sorted(batch.texts) == sorted(f"{k}()" for k in GLOBAL_AGGREGATES)


def test_catalog_deterministic_and_sized(radon):
    d, _, _ = radon
    a, b = propose_catalog(d.schema(), 24, 3), propose_catalog(d.schema(), 24, 3)
    assert a.texts == b.texts and a.family_size == 24
    assert propose_catalog(d.schema(), 24, 4).texts != a.texts


def test_catalog_covers_every_binary_feature():
    d = Dataset.from_columns(
        "t", {"a": [0, 1] * 4, "b": [True, False, False, True] * 2, "c": [1, 1, 2, 2] * 2, "y": list(range(8))}, "y")
    texts = propose_catalog(d.schema(), 10, 0).texts
    for col in ("a", "b", "c"):
        assert any(f"where {col} ==" in t for t in texts)


def test_validate_batch_conserves_family(radon):
    d, _, _ = radon
    batch = propose_catalog(d.schema(), 60, 0)
    valid = validate_batch(batch, d)
    assert valid.family_size == 60
    assert len(valid.accepted) + len(valid.rejected) == 60
    assert any(r == "duplicate" for _, r in valid.rejected)
    assert validate_batch(validate_batch(propose_catalog(d.schema(), 10, 0), d), d).texts == \
        validate_batch(propose_catalog(d.schema(), 10, 0), d).texts


def test_validate_batch_empty_slice(radon):
    d, _, _ = radon
    batch = validate_batch(parse_proposals(["mean(where floor == 7)", "mean()"], d), d)
    assert batch.texts == ["mean()"]
    assert batch.rejected[0][1].startswith("empty_slice")


def test_parse_proposals_bookkeeping(radon):
    d, _, _ = radon
    batch = parse_proposals(["mean()", "std(where soil2 == 1)", {"agg": "variance"}], d)
    assert (len(batch.accepted), len(batch.rejected), batch.family_size) == (2, 1, 3)
    bad = parse_proposals(["mean(where floor ==)"], d)
    assert "position" in bad.rejected[0][1]


def test_batch_family_size_conserved():
    with pytest.raises(ValueError):
        ProposalBatch([], [("x", "y")], 3)


def _request(radon):
    d, _, model = radon
    return ProposalRequest(RADON_METADATA, d.schema(), model, 6, {"temperature": 0.7})


def test_replay_fixture(radon):
    ep = EndpointConfig("https://proposals.example.test", model="stat-proposer")
    batch = propose_external(_request(radon), ep, transport=replay_transport(FIXTURE))
    assert batch.family_size == 6
    assert batch.texts == [
        "std(where floor == 0) - std(where floor == 1)",
        "mean(where floor == 1) - mean(where floor == 0)",
        "variance(where uppm in quantile_bin(3, 2))",
        "dispersion_ratio()",
    ]
    assert [r.split(":")[0] for _, r in batch.rejected] == ["unknown_column", "syntax"]


def test_wire_shape(radon):
    wire = _request(radon).to_wire()
    assert set(wire) >= {"system_prompt", "metadata", "model_program", "n", "sampling"}
    assert wire["sampling"] == {"temperature": 0.7}
    json.dumps(wire)


def test_retries_then_success(radon):
    calls, sleeps = [], []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json={"proposals": ["mean()"]})

    ep = EndpointConfig("https://x.test", max_retries=3, backoff=0.5)
    batch = propose_external(_request(radon), ep, httpx.MockTransport(handler), sleep=sleeps.append)
    assert batch.texts == ["mean()"] and len(calls) == 3
    assert sleeps == [0.5, 1.0]


def test_retries_exhausted(radon):
    ep = EndpointConfig("https://x.test", max_retries=2, backoff=0.0)
    with pytest.raises(TransportError):
        propose_external(_request(radon), ep, httpx.MockTransport(lambda r: httpx.Response(500)), sleep=lambda s: None)


def test_client_error_not_retried(radon):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400)

    with pytest.raises(TransportError):
        propose_external(_request(radon), EndpointConfig("https://x.test"), httpx.MockTransport(handler),
                         sleep=lambda s: None)
    assert len(calls) == 1


def test_malformed_batch(radon):
    t = httpx.MockTransport(lambda r: httpx.Response(200, json={"proposals": "mean()"}))
    with pytest.raises(MalformedBatchError):
        propose_external(_request(radon), EndpointConfig("https://x.test"), t)


def test_credential_from_environment(radon, monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"proposals": []})

    monkeypatch.setenv("MY_KEY", "s3cret")
    propose_external(_request(radon), EndpointConfig("https://x.test", api_key_env="MY_KEY"), httpx.MockTransport(handler))
    assert seen["auth"] == "Bearer s3cret"


def test_endpoint_file_rejects_credentials(tmp_path):
    p = tmp_path / "ep.json"
    p.write_text(json.dumps({"base_url": "https://x.test", "api_key": "no"}))
    with pytest.raises(ValueError):
        EndpointConfig.from_file(p)
    p.write_text(json.dumps({"base_url": "https://x.test", "model": "m"}))
    assert EndpointConfig.from_file(p).model == "m"
