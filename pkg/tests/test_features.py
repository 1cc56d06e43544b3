import dataclasses
import inspect

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steersim.flowdata import FlowKey, FlowRecord, PacketMeta
from steersim.mlcore import FLOW_FEATURE_LENGTH, FlowEncoder, encode_flow_features, encode_radio_features
from steersim.mlcore.features import WELL_KNOWN_PORTS
from steersim.radioenv import RadioSample

KEY = FlowKey(0x0A140001, 0x5DB8D822, 51000, 443, 6)
SYN = PacketMeta(0.0, 60, "ul")


def test_documented_length():
    assert FLOW_FEATURE_LENGTH == 54
    assert len(encode_flow_features(KEY, SYN)) == 54


def test_identical_inputs_identical_vectors():
    assert encode_flow_features(KEY, SYN) == encode_flow_features(FlowKey(*dataclasses.astuple(KEY)), SYN)


def test_https_versus_ephemeral_port():
    a = encode_flow_features(KEY, SYN).values
    b = encode_flow_features(dataclasses.replace(KEY, dst_port=51001), SYN).values
    i443 = 2 + WELL_KNOWN_PORTS.index(443)
    assert a[1] == 443 and b[1] == 51001
    assert a[i443] == 1.0 and b[i443] == 0.0
    assert a[18] == 1.0 and b[18] == 0.0


def test_layout_fields():
    v = encode_flow_features(KEY, PacketMeta(0.0, 1234, "dl")).values
    assert v[0] == 51000 and v[19] == 6 and v[52] == 1234 and v[53] == 0.0
    # One hashed bucket set per (address, prefix length) block.
    for base in (20, 28, 36, 44):
        assert sum(v[base:base + 8]) == 1.0


def test_extractor_sees_only_key_and_first_packet():
    params = list(inspect.signature(encode_flow_features).parameters)
    assert params[:2] == ["key", "first_packet"]
    # Flows differing only in service class and later packets encode identically.
    enc = FlowEncoder()
    f1 = FlowRecord(1, KEY, (SYN, PacketMeta(1.0, 1500, "dl")), service_class=0)
    f2 = FlowRecord(2, KEY, (SYN,) + tuple(PacketMeta(1.0 + i, 1500, "dl") for i in range(9)), service_class=4)
    np.testing.assert_array_equal(enc.matrix([f1]), enc.matrix([f2]))


def test_fit_picks_most_frequent_ports_with_low_port_tiebreak():
    flows = []
    for i, port in enumerate([80] * 5 + [443] * 3 + [22] * 3):
        flows.append(FlowRecord(i, FlowKey(1, 2, 40000 + i, port, 6), (SYN,)))
    enc = FlowEncoder.fit(flows)
    assert enc.top_ports[:3] == (80, 22, 443)
    assert len(enc.top_ports) == 14  # 3 server ports + 11 distinct client ports
    assert enc.schema_id != FlowEncoder().schema_id


def radio(values, secondary=-90.0, covered=False, position=(1.0, 2.0)):
    return RadioSample(5, position, tuple(values), secondary, covered)


def test_radio_single_cell():
    v = encode_radio_features(radio([-80.0])).values
    assert v == (-80.0, 0.0, 1.0)


def test_radio_layout():
    v = encode_radio_features(radio([-95.0, -70.0, -80.0])).values
    assert v == (-70.0, -80.0, -95.0, 10.0, 0.0, 1.0, 0.0)


@given(st.lists(st.floats(-140, -40, allow_nan=False), min_size=2, max_size=7), st.randoms())
def test_sorted_part_is_permutation_invariant(values, rnd):
    shuffled = values[:]
    rnd.shuffle(shuffled)
    n = len(values)
    a = encode_radio_features(radio(values)).values
    b = encode_radio_features(radio(shuffled)).values
    assert a[: n + 1] == b[: n + 1]


def test_radio_features_ignore_ground_truth_fields():
    a = encode_radio_features(radio([-80.0, -90.0], secondary=-60.0, covered=True, position=(0.0, 0.0)))
    b = encode_radio_features(radio([-80.0, -90.0], secondary=-130.0, covered=False, position=(900.0, 9.0)))
    assert a == b


def test_radio_schema_depends_on_cell_count():
    assert encode_radio_features(radio([-80.0])).schema_id != encode_radio_features(radio([-80.0, -81.0])).schema_id


def test_too_many_top_ports():
    with pytest.raises(ValueError):
        FlowEncoder(tuple(range(17)))
