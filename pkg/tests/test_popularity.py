import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from termbench.errors import DomainError, ParseError, ProtocolError, TransportError, PermanentHttpError
from termbench.ontology import Terminology
from termbench.pmc import PmcClient, QueryCache, identifier_query, term_query
from termbench.popularity import (
    PopularityRecord,
    laplace_log,
    load_annotation_counts,
    rank_frequency,
    read_popularity_csv,
    write_popularity_csv,
)
from termbench.ratelimit import TokenBucket


def _pop(identifier, count, label=None):
    return PopularityRecord(
        terminology=Terminology.HPO,
        identifier=identifier,
        label=label or identifier.lower(),
        id_count_pmc=count,
        term_count_pmc=0,
        annotation_count=0,
    )


def test_laplace_log_reference_points():
    assert laplace_log(0) == 0.0
    assert laplace_log(99) == 2.0
    assert laplace_log(999) == 3.0


@given(st.integers(0, 10**12), st.integers(0, 10**12))
def test_laplace_log_monotone(a, b):
    if a < b:
        assert laplace_log(a) < laplace_log(b)
    elif a == b:
        assert laplace_log(a) == laplace_log(b)


def test_rank_frequency_tie_break():
    dist = rank_frequency(
        [_pop("HP:0000001", 5, "a"), _pop("HP:0000002", 9, "b"), _pop("HP:0000003", 5, "c")],
        "id_count_pmc",
    )
    assert dist.entries == (
        ("HP:0000002", 9, 1),
        ("HP:0000001", 5, 2),
        ("HP:0000003", 5, 3),
    )


def test_rank_frequency_all_equal_is_lexicographic():
    records = [_pop(f"HP:{i:07d}", 7, f"t{i}") for i in (3, 1, 2)]
    dist = rank_frequency(records, "id_count_pmc")
    assert [e[0] for e in dist.entries] == ["HP:0000001", "HP:0000002", "HP:0000003"]


def test_rank_frequency_empty_raises():
    with pytest.raises(DomainError):
        rank_frequency([], "id_count_pmc")


def test_rank_frequency_preserves_multiset():
    records = [_pop(f"HP:{i:07d}", i % 5, f"t{i}") for i in range(1, 40)]
    dist = rank_frequency(records, "id_count_pmc")
    assert sorted((e[0], e[1]) for e in dist.entries) == sorted(
        (r.identifier, r.id_count_pmc) for r in records
    )
    assert [e[2] for e in dist.entries] == list(range(1, 40))


def test_rank_frequency_zipf_slope_near_minus_one():
    # Zipf-synthetic counts; slope of the log-log points fit by least squares.
    records = [_pop(f"HP:{i:07d}", 1000 // i, f"t{i}") for i in range(1, 101)]
    dist = rank_frequency(records, "id_count_pmc")
    points = dist.log_log_points()
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    slope = np.polyfit(x, y, 1)[0]
    assert abs(slope - (-1.0)) < 0.1


def test_load_annotation_counts():
    counts = load_annotation_counts(io.StringIO("HP:0001337\t42\n"), Terminology.HPO)
    assert counts == {"HP:0001337": 42}


def test_load_annotation_counts_duplicate_identifier():
    data = "HP:0001337\t42\nHP:0001337\t7\n"
    with pytest.raises(ParseError, match="HP:0001337"):
        load_annotation_counts(io.StringIO(data), Terminology.HPO)


def test_load_annotation_counts_empty():
    assert load_annotation_counts(io.StringIO(""), Terminology.HPO) == {}


def test_load_annotation_counts_negative():
    from termbench.errors import ValidationError

    with pytest.raises(ValidationError):
        load_annotation_counts(io.StringIO("HP:0001337\t-1\n"), Terminology.HPO)


def test_popularity_csv_round_trip():
    records = [_pop(f"HP:{i:07d}", i, f"term {i}") for i in range(3)]
    buf = io.StringIO()
    write_popularity_csv(records, buf)
    back = read_popularity_csv(io.StringIO(buf.getvalue()))
    assert back == records


# ---------------------------------------------------------------------------
# PMC client


class MockTransport:
    def __init__(self, script):
        # script: list of (status, body) or callables
        self.script = list(script)
        self.calls = 0

    def __call__(self, url, params):
        self.calls += 1
        step = self.script.pop(0) if len(self.script) > 1 else self.script[0]
        if isinstance(step, Exception):
            raise step
        return step


def _count_body(count):
    return json.dumps({"esearchresult": {"count": str(count)}})


def _client(tmp_path, script):
    transport = MockTransport(script)
    cache = QueryCache(tmp_path / "cache.jsonl")
    limiter = TokenBucket(1000.0, clock=lambda: 0.0, sleep=lambda s: None)
    client = PmcClient(cache=cache, transport=transport, api_key=None,
                       rate_limiter=limiter, sleep=lambda s: None)
    return client, transport


def test_fetch_count_parses_count(tmp_path):
    client, transport = _client(tmp_path, [(200, _count_body(1234))])
    assert client.fetch_count(identifier_query("HP:0001337")) == 1234
    assert transport.calls == 1


def test_fetch_count_retries_on_429(tmp_path):
    client, transport = _client(
        tmp_path, [(429, ""), (429, ""), (200, _count_body(7))]
    )
    assert client.fetch_count(identifier_query("HP:0001337")) == 7
    assert transport.calls == 3


def test_fetch_count_zero_hits(tmp_path):
    client, _ = _client(tmp_path, [(200, _count_body(0))])
    assert client.fetch_count(term_query("no such term")) == 0


def test_fetch_count_permanent_4xx(tmp_path):
    client, _ = _client(tmp_path, [(404, "not found")])
    with pytest.raises(PermanentHttpError):
        client.fetch_count(identifier_query("HP:0001337"))


def test_fetch_count_exhausts_retries(tmp_path):
    client, transport = _client(tmp_path, [(500, "boom")])
    with pytest.raises(TransportError):
        client.fetch_count(identifier_query("HP:0001337"))
    assert transport.calls == 5


def test_fetch_count_protocol_error(tmp_path):
    client, _ = _client(tmp_path, [(200, json.dumps({"esearchresult": {"count": "many"}}))])
    with pytest.raises(ProtocolError):
        client.fetch_count(identifier_query("HP:0001337"))


def test_cache_write_through_one_network_call(tmp_path):
    client, transport = _client(tmp_path, [(200, _count_body(55))])
    q = identifier_query("HP:0001337")
    assert client.fetch_count(q) == 55
    assert client.fetch_count(q) == 55
    assert transport.calls == 1
    # a fresh client over the same cache file needs no transport at all
    offline = PmcClient(cache=QueryCache(tmp_path / "cache.jsonl"), transport=None)
    assert offline.fetch_count(q) == 55


def test_offline_without_cache_entry_fails(tmp_path):
    offline = PmcClient(cache=QueryCache(tmp_path / "cache.jsonl"), transport=None)
    with pytest.raises(TransportError):
        offline.fetch_count(identifier_query("HP:0001337"))


def test_cache_last_entry_wins(tmp_path):
    path = tmp_path / "cache.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps({"query": "q", "db": "pmc", "count": 1, "retrieved_at": "t1"}) + "\n")
        fh.write(json.dumps({"query": "q", "db": "pmc", "count": 2, "retrieved_at": "t2"}) + "\n")
    client = PmcClient(cache=QueryCache(path), transport=None)
    assert client.fetch_count("q") == 2


def test_query_shapes():
    assert identifier_query("HP:0001337") == '"HP:0001337"[All Fields]'
    assert term_query("tremor") == '"tremor"[All Fields]'


def test_token_bucket_spaces_requests():
    now = [0.0]
    slept = []

    def clock():
        return now[0]

    def sleep(s):
        slept.append(s)
        now[0] += s

    bucket = TokenBucket(2.0, burst=1, clock=clock, sleep=sleep)
    for _ in range(3):
        bucket.acquire()
    assert len(slept) == 2
    assert all(abs(s - 0.5) < 1e-9 for s in slept)
