import json

import pytest
from hypothesis import given, strategies as st

from iotqos.errors import MalformedMessage
from iotqos.message import (Encoding, Kind, Message, ResourceAddress, Verb, WIRE_KEYS,
                            deserialize, serialize)

segment = st.text(st.characters(blacklist_characters="/", blacklist_categories=("Cs",)),
                  min_size=1, max_size=8)
addresses = st.builds(ResourceAddress, segment, st.lists(segment, min_size=1, max_size=4))
messages = st.builds(
    Message,
    kind=st.sampled_from(Kind),
    verb=st.sampled_from(Verb),
    correlation_id=st.text(min_size=1, max_size=12),
    source=addresses,
    destination=st.one_of(st.none(), addresses),
    payload=st.binary(max_size=300),
    encoding=st.sampled_from(Encoding),
    created_at=st.floats(min_value=0, max_value=1e7, allow_nan=False),
)


def sample(**kw):
    base = dict(kind=Kind.REQUEST, verb=Verb.RETRIEVE, correlation_id="req-000001",
                source=ResourceAddress.parse("app/navigation"),
                destination=ResourceAddress.parse("gw/maps/tile7"),
                payload=b"", created_at=12.5)
    base.update(kw)
    return Message(**base)


def test_address_canonical_text_round_trips():
    a = ResourceAddress.parse("gw1/maps/tile7")
    assert a.node_id == "gw1" and a.path == ("maps", "tile7")
    assert str(a) == "gw1/maps/tile7"
    assert ResourceAddress.parse(str(a)) == a


@pytest.mark.parametrize("text", ["gw1", "gw1/", "gw1//x", "/maps", ""])
def test_address_rejects_bad_text(text):
    with pytest.raises(ValueError):
        ResourceAddress.parse(text)


def test_wire_layout_is_fixed():
    b = serialize(sample(payload=b"hi"))
    assert b == (b'{"kind":"REQUEST","verb":"RETRIEVE","cid":"req-000001",'
                 b'"src":"app/navigation","dst":"gw/maps/tile7","enc":"identity",'
                 b'"payload_b64":"aGk=","t":12.5}')
    assert tuple(json.loads(b)) == WIRE_KEYS


def test_empty_payload():
    m = sample()
    assert json.loads(serialize(m))["payload_b64"] == ""
    assert deserialize(serialize(m)).payload == b""


def test_correlation_id_change_touches_only_that_field():
    a = serialize(sample(correlation_id="req-000001"))
    b = serialize(sample(correlation_id="req-000002"))
    # byte-diff: common prefix / suffix must bracket the cid value
    pre = next(i for i, (x, y) in enumerate(zip(a, b)) if x != y)
    suf = next(i for i, (x, y) in enumerate(zip(a[::-1], b[::-1])) if x != y)
    start = a.index(b'"cid":"') + len(b'"cid":"')
    end = a.index(b'"', start)
    assert start <= pre and len(a) - suf <= end
    assert a[:start] == b[:start] and a[end:] == b[end:]


@given(messages)
def test_round_trip(m):
    assert deserialize(serialize(m)) == m


@given(messages)
def test_wire_size_matches_serialization(m):
    assert m.wire_size == len(serialize(m))


@given(st.integers(0, 2000), st.integers(1, 50))
def test_size_grows_with_payload(n, extra):
    small = len(serialize(sample(payload=b"x" * n)))
    big = len(serialize(sample(payload=b"x" * (n + extra))))
    # base64 emits 4 characters per started 3-byte group
    if (n + extra + 2) // 3 > (n + 2) // 3:
        assert big > small
    else:
        assert big == small


def test_size_strictly_increases_per_base64_group():
    sizes = [len(serialize(sample(payload=b"a" * n))) for n in range(0, 300, 3)]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))


@pytest.mark.parametrize("raw", [
    b"",
    b"not json",
    b"[]",
    serialize(sample()).replace(b'"RETRIEVE"', b'"PATCH"'),
    serialize(sample()).replace(b'"REQUEST"', b'"NOTICE"'),
    serialize(sample()).replace(b'"identity"', b'"gzip"'),
    serialize(sample(payload=b"hi")).replace(b"aGk=", b"a$k="),
    serialize(sample(payload=b"hi")).replace(b"aGk=", b"aGk"),
    serialize(sample()).replace(b',"t":12.5', b""),
    serialize(sample()).replace(b'"t":12.5', b'"t":"soon"'),
    serialize(sample()).replace(b'"t":12.5', b'"t":NaN'),
    serialize(sample()).replace(b'"src":"app/navigation"', b'"src":"app"'),
    b'{"verb":"RETRIEVE","kind":"REQUEST","cid":"c","src":"a/b","dst":"c/d",'
    b'"enc":"identity","payload_b64":"","t":0}',
    b"\xff\xfe",
])
def test_malformed(raw):
    with pytest.raises(MalformedMessage):
        deserialize(raw)


def test_error_reply_keeps_correlation():
    m = sample()
    r = m.error_reply("NOT_FOUND", 3.0)
    assert r.kind is Kind.RESPONSE and r.correlation_id == m.correlation_id
    assert r.is_error and r.error_code == "NOT_FOUND"
    assert r.destination == m.source and r.source == m.destination
    assert not m.reply(b"\x00ERRORISH").is_error
