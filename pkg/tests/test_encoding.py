import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtomo.encoding import (
    EncodingSpec,
    decode,
    encode,
    mac_cumulative,
    mac_direct,
    quantize,
    radix2,
    unit_step,
)
from qtomo.errors import InvalidArgument

SPECS = [radix2(1), radix2(3), unit_step(3), mac_direct([1.0, 2.5]), mac_cumulative([0.5, 1.0, 3.0])]


@pytest.mark.parametrize(
    "spec,levels",
    [
        (radix2(2), [0, 1, 2, 3]),
        (unit_step(3), [0, 1, 2, 3]),
        (mac_direct([1.0, 2.5]), [0, 1, 2.5, 3.5]),
        (mac_cumulative([0.5, 1.0, 3.0]), [0.5, 1.0, 2.5, 3.0]),
        (mac_cumulative([0.0, 1.0, 2.0, 4.0]), [0, 1, 2, 3, 4]),
    ],
)
def test_level_tables(spec, levels):
    assert np.allclose(spec.levels(), levels)


def test_bit_counts():
    assert radix2(3).bits == 3 and unit_step(3).bits == 3
    assert mac_direct([1, 2, 3]).bits == 3
    assert mac_cumulative([0, 1, 2, 3]).bits == 3


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.mode)
def test_every_pattern_decodes_to_a_level(spec):
    lv = spec.levels()
    for p in itertools.product((0, 1), repeat=spec.bits):
        assert np.isclose(decode(p, spec), lv).any()


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.mode)
def test_encode_decode_round_trip(spec):
    for v in spec.levels():
        assert decode(encode(v, spec), spec) == pytest.approx(v)


def test_radix2_is_lsb_first():
    assert encode(6, radix2(3)).tolist() == [0, 1, 1]


def test_unit_step_codes_are_monotone():
    assert encode(2, unit_step(3)).tolist() == [1, 1, 0]
    assert encode(0, unit_step(3)).tolist() == [0, 0, 0]


@pytest.mark.parametrize("value", [4, 0.5, -1])
def test_unrepresentable(value):
    with pytest.raises(InvalidArgument):
        encode(value, radix2(2))


def test_quantize_ties_go_low():
    assert quantize([0.5, 1.5, 1.49, 1.51, -3, 9], radix2(2)).tolist() == [0, 1, 1, 2, 0, 3]


@given(st.lists(st.floats(-5, 10, allow_nan=False), min_size=1, max_size=20))
def test_quantize_lands_on_nearest_level(vals):
    spec = mac_direct([1.0, 2.5])
    lv = spec.levels()
    q = quantize(vals, spec)
    for v, got in zip(vals, q):
        assert got in lv
        assert abs(got - v) <= np.abs(lv - v).min() + 1e-12


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.mode)
def test_dict_round_trip(spec):
    assert EncodingSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize(
    "make",
    [
        lambda: radix2(0),
        lambda: EncodingSpec("gray"),
        lambda: mac_direct([]),
        lambda: mac_direct([0.0, 1.0]),
        lambda: mac_direct([2.0, 1.0]),
        lambda: mac_cumulative([1.0]),
        lambda: mac_cumulative([-1.0, 1.0]),
    ],
)
def test_validation(make):
    with pytest.raises(InvalidArgument):
        make()


def test_decode_wrong_length():
    with pytest.raises(InvalidArgument):
        decode([1, 0], radix2(3))
