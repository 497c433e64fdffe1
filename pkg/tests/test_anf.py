import random

import pytest
from hypothesis import given, strategies as st

from helpers import middleware, retrieve
from oracles import BitWriter, fixed_literal, linear_scan_redirect
from iotqos import anf
from iotqos.anf import (PASS, CompressorConfig, DecompressorConfig, RedirectionPolicy,
                        compress, decompress, deflate, inflate, redirect)
from iotqos.autonomic import KnowledgeBase, NodeEffector, execute, plan, Symptom, SymptomKind
from iotqos.errors import CorruptStream, DoubleCompression, InvalidPolicy
from iotqos.message import Encoding, Kind, ResourceAddress
from iotqos.node import LocalNetwork


# -- RFC 1951 reference vectors, assembled bit by bit -------------------------------

def stored_block(data: bytes, final=True) -> bytes:
    n = len(data)
    return bytes([1 if final else 0]) + n.to_bytes(2, "little") + \
        (n ^ 0xFFFF).to_bytes(2, "little") + data


def fixed_block(symbols, final=True) -> BitWriter:
    """symbols: ints (literals) or (length_code, extra, nextra, dist_code, dextra, ndextra)."""
    w = BitWriter()
    w.write(1 if final else 0, 1)
    w.write(0b01, 2)
    for s in symbols:
        if isinstance(s, int):
            fixed_literal(w, s)
        else:
            lcode, lextra, nl, dcode, dextra, nd = s
            fixed_literal(w, lcode)
            w.write(lextra, nl)
            w.write_huffman(dcode, 5)
            w.write(dextra, nd)
    fixed_literal(w, 256)
    return w


REFERENCE_VECTORS = [
    ("empty fixed block", bytes([0x03, 0x00]), b""),
    ("stored block", stored_block(b"hello"), b"hello"),
    ("empty stored block", stored_block(b""), b""),
    ("fixed literals", fixed_block(b"abc").getvalue(), b"abc"),
    # 'abc' then <length 6 (code 260), distance 3 (code 2)>
    ("fixed back-reference", fixed_block([97, 98, 99, (260, 0, 0, 2, 0, 0)]).getvalue(),
     b"abcabcabc"),
    # 'x' then <length 100 = 99 + 1 (code 279, 4 extra bits), distance 1 (code 0)>
    ("fixed overlapping run", fixed_block([120, (279, 1, 4, 0, 0, 0)]).getvalue(), b"x" * 101),
    # distance 5 = code 4 with 1 extra bit (0)
    ("fixed distance extra bits", fixed_block([49, 50, 51, 52, 53, (259, 0, 0, 4, 0, 1)]).getvalue(),
     b"1234512345"),
    # 9-bit literal codes (>= 144)
    ("fixed high literals", fixed_block([200, 255, 144]).getvalue(), bytes([200, 255, 144])),
    ("stored then fixed", stored_block(b"ab", final=False) + fixed_block(b"cd").getvalue(),
     b"abcd"),
]


@pytest.mark.parametrize("name,stream,expected", REFERENCE_VECTORS, ids=[v[0] for v in REFERENCE_VECTORS])
def test_inflate_reference_vectors(name, stream, expected):
    assert inflate(stream) == expected


def test_known_deflate_lengths():
    # recorded from a reference raw-DEFLATE encoder (zlib, default level)
    assert len(deflate(b"a" * 10_000)) == 28
    assert deflate(b"") == bytes.fromhex("0300")
    assert deflate(b"a") == bytes.fromhex("4b0400")


@pytest.mark.parametrize("stream", [b"\xff\xff\xff", b"\x4b\x4c", b"", b"\x03\x00junk",
                                    stored_block(b"hello")[:-1]])
def test_corrupt_streams(stream):
    with pytest.raises(CorruptStream):
        inflate(stream)


@given(st.one_of(st.binary(max_size=2000),
                 st.builds(lambda b, n: b * n, st.binary(min_size=1, max_size=8),
                           st.integers(1, 500))))
def test_round_trip(data):
    assert inflate(deflate(data)) == data


# -- compressor / decompressor -------------------------------------------------------

def test_compress_repetitive_payload_forwards_short_stream():
    seen = []

    def forwarder(m, to):
        seen.append((m, to))
        return m.reply(b"ok")

    m = retrieve("gw/maps/tile0").evolve(payload=b"a" * 10_000)
    resp = compress(m, CompressorConfig("gw"), forwarder)
    (fwd, to), = seen
    assert to == "gw" and fwd.encoding is Encoding.DEFLATE
    assert len(fwd.payload) < 200 and len(fwd.payload) == 28
    assert resp.kind is Kind.RESPONSE and resp.payload == b"ok"
    assert resp.correlation_id == m.correlation_id


def test_compress_below_threshold_forwards_unchanged():
    seen = []
    m = retrieve("gw/maps/tile0")
    compress(m, CompressorConfig("gw", min_payload_bytes=1),
             lambda f, to: seen.append(f) or f.reply())
    assert seen[0].payload == b"" and seen[0].encoding is Encoding.IDENTITY


def test_double_compression():
    m = retrieve("gw/x").evolve(payload=deflate(b"abc"), encoding=Encoding.DEFLATE)
    with pytest.raises(DoubleCompression):
        compress(m, CompressorConfig("gw"), lambda f, to: f.reply())


def test_decompress():
    plain = retrieve("gw/x").evolve(payload=b"hello")
    assert decompress(plain) is plain
    packed = plain.evolve(payload=deflate(b"hello"), encoding=Encoding.DEFLATE)
    out = decompress(packed)
    assert out.payload == b"hello" and out.encoding is Encoding.IDENTITY
    with pytest.raises(CorruptStream):
        decompress(plain.evolve(payload=b"\xff\xff\xff", encoding=Encoding.DEFLATE))


@given(st.binary(max_size=3000), st.integers(0, 100))
def test_decompress_inverts_compress_transform(x, threshold):
    m = retrieve("gw/x").evolve(payload=x)
    assert decompress(anf.deflate_message(m, threshold)).payload == x


# -- redirector -----------------------------------------------------------------------

def test_policy_invariants():
    with pytest.raises(InvalidPolicy):
        RedirectionPolicy({"gw/a": "gw/a"})
    with pytest.raises(InvalidPolicy):
        RedirectionPolicy({"gw/a": "fog/a", "fog/a": "x/a"})


def test_empty_policy_passes():
    m = retrieve("gw/maps/tile7")
    assert redirect(m, RedirectionPolicy(), lambda f, to: pytest.fail("forwarded")) is PASS


def test_absent_destination_passes():
    m = retrieve("gw/x").evolve(destination=None)
    assert redirect(m, RedirectionPolicy({"gw/x": "fog/x"}), None) is PASS


def test_redirect_rewrites_destination_and_readdresses_response():
    seen = []

    def forwarder(m, to):
        seen.append((str(m.destination), to))
        return m.reply(b"tile-bytes", t=4.0)

    m = retrieve("server/maps/tile7", cid="r9")
    out = redirect(m, RedirectionPolicy({"server/maps/tile7": "fog/compress/maps/tile7"}),
                   forwarder)
    assert seen == [("fog/compress/maps/tile7", "fog")]
    assert out.payload == b"tile-bytes" and out.correlation_id == "r9"
    assert str(out.source) == "server/maps/tile7" and out.destination == m.source


def _random_policy(rng, n_rules, universe):
    keys = rng.sample(universe, n_rules)
    return [(k, f"fog/compress/{k.split('/', 1)[1]}") for k in keys]


@pytest.mark.parametrize("n_rules", range(6))
def test_redirector_matches_linear_scan(n_rules):
    rng = random.Random(n_rules)
    universe = [f"gw/maps/tile{i}" for i in range(8)] + ["server/a", "gw/other/x"]
    rules = _random_policy(rng, n_rules, universe)
    policy = RedirectionPolicy(dict(rules))
    for i in range(100):
        dst = rng.choice(universe + [None])
        m = retrieve("gw/x", cid=f"m{i}").evolve(
            destination=None if dst is None else ResourceAddress.parse(dst))
        hops = []
        out = redirect(m, policy, lambda f, to: hops.append(str(f.destination)) or f.reply(b"r"))
        expected = linear_scan_redirect(rules, dst)
        if expected is None:
            assert out is PASS and not hops
        else:
            assert hops == [expected] and out.correlation_id == m.correlation_id


# -- full chain transparency -----------------------------------------------------------

def _deploy(topo):
    symptom = Symptom(SymptomKind.QOS_DEGRADATION_PREDICTED, 1.0, 1.0, 1.0, 0.0)
    report = execute(plan(symptom, KnowledgeBase(), topo), NodeEffector(topo.nodes))
    assert report.ok


def test_chain_is_transparent_and_compresses_last_hop():
    rng = random.Random(3)
    store = {f"maps/tile{i}": (b"mesh" * rng.randint(0, 3000)) for i in range(6)}
    store["maps/noise"] = rng.randbytes(5000)
    topo = middleware(store)
    net = LocalNetwork(topo.nodes.values())
    before = {p: net.deliver(retrieve(f"gw/{p}"), "server") for p in store}
    _deploy(topo)
    hops = []
    deliver = net.deliver

    def spy(m, to, sender=None):
        r = deliver(m, to, sender)
        hops.append((sender, to, r))
        return r

    net.deliver = spy
    after = {p: net.deliver(retrieve(f"gw/{p}"), "server") for p in store}
    for p in store:
        assert after[p].payload == before[p].payload == store[p]
        assert after[p].encoding is Encoding.IDENTITY
    last_hop = [r for s, to, r in hops if s == "fog" and to == "gw"]
    assert len(last_hop) == len(store)
    assert any(r.encoding is Encoding.DEFLATE for r in last_hop)
    assert topo.nodes["fog"].completed == len(store)


def test_decompressor_without_peers_leaves_responses_alone():
    topo = middleware({"maps/t": b"z" * 1000})
    net = LocalNetwork(topo.nodes.values())
    from iotqos.node import PluginDescriptor, PluginKind
    gw = topo.nodes["gw"]
    gw.install_plugin(PluginDescriptor("u", PluginKind.DECOMPRESSOR, DecompressorConfig(), 1))
    gw.start_plugin("u")
    r = net.deliver(retrieve("gw/maps/t"), "server")
    assert r.encoding is Encoding.IDENTITY and r.payload == b"z" * 1000
