import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphopt.exceptions import ConfigurationError, GridIndexError
from morphopt.geometry import (GRID_CSV_HEADER, DesignSpace, MorphShape, PanelChainSpec, VehicleGeometry,
                               angles_from_indices, chain_profile, decode_indices, enumerate_grid,
                               grid_indices, indices_from_angles, is_admissible, write_grid_csv)

index = st.integers(0, 64)
triples = st.tuples(index, index, index)


def brute_force_admissible_count(spec):
    """Scalar loop over the grid with math.sin, kept apart from the vectorised path."""
    lo = (-20.0, -30.0, -30.0)
    step = (33 / 64, 45 / 64, 45 / 64)
    floor = -spec.mount_height_above_bed + spec.min_bed_clearance
    sin1 = [math.sin(math.radians(lo[0] + i * step[0])) for i in range(65)]
    count = 0
    for i in range(65):
        a = lo[0] + i * step[0]
        for j in range(65):
            b = a + lo[1] + j * step[1]
            z2 = spec.panel_length * (sin1[i] + math.sin(math.radians(b)))
            for k in range(65):
                c = b + lo[2] + k * step[2]
                z3 = z2 + spec.panel_length * math.sin(math.radians(c))
                zs = (spec.panel_length * sin1[i], z2, z3)
                if min(zs) >= floor and max(zs) <= spec.max_rise_above_roof:
                    count += 1
    return count


def test_decode_lower_bounds():
    assert decode_indices((0, 0, 0)).theta == (-20.0, -30.0, -30.0)


def test_decode_upper_bounds():
    assert decode_indices((64, 64, 64)).theta == pytest.approx((13.0, 15.0, 15.0), abs=1e-12)


def test_decode_midpoint():
    assert decode_indices((32, 32, 32)).theta == pytest.approx((-3.5, -7.5, -7.5), abs=1e-12)


def test_resolutions():
    a = decode_indices((1, 1, 1)).theta
    b = decode_indices((0, 0, 0)).theta
    assert np.subtract(a, b) == pytest.approx([0.515625, 0.703125, 0.703125])


@pytest.mark.parametrize("bad, axis", [((65, 0, 0), 0), ((0, -1, 0), 1), ((0, 0, 100), 2)])
def test_decode_rejects_out_of_range(bad, axis):
    with pytest.raises(GridIndexError) as err:
        decode_indices(bad)
    assert err.value.axis == axis


def test_decode_rejects_non_integer():
    with pytest.raises(GridIndexError):
        decode_indices((1.5, 0, 0))


def test_round_trip_whole_grid():
    idx = grid_indices()
    theta = angles_from_indices(idx)
    back = np.rint((theta - np.array([-20.0, -30.0, -30.0])) / (np.array([33, 45, 45]) / 64))
    assert np.array_equal(back.astype(int), idx)
    assert len(idx) == 274_625


@given(triples)
def test_round_trip_scalar(indices):
    assert indices_from_angles(decode_indices(indices).theta) == indices


def test_neutral_profile_is_flat():
    pts = chain_profile(MorphShape.neutral())
    assert pts.shape == (4, 2)
    assert np.allclose(pts[:, 1], 0.0)
    assert pts[-1, 0] == pytest.approx(0.210)


def test_vertical_chain_kinematics():
    pts = chain_profile((-90.0, 0.0, 0.0))
    assert pts[-1, 1] == pytest.approx(-0.210)
    assert pts[-1, 0] == pytest.approx(0.0, abs=1e-12)


def test_upper_corner_tip_height():
    pts = chain_profile(decode_indices((64, 64, 64)))
    hand = 0.070 * (math.sin(math.radians(13)) + math.sin(math.radians(28)) + math.sin(math.radians(43)))
    assert pts[-1, 1] == pytest.approx(hand, rel=1e-12)
    assert pts[-1, 1] == pytest.approx(0.0963, abs=1e-4)


@given(triples)
def test_chain_length_preserved(indices):
    pts = chain_profile(decode_indices(indices))
    segments = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert segments == pytest.approx([0.070] * 3)


def test_neutral_is_admissible():
    assert is_admissible(MorphShape.neutral())


def test_rise_limit_rejects():
    # tip of the upper corner rises ~9.6 cm, well above the 2 cm allowance
    assert not is_admissible(decode_indices((64, 64, 64)))


def test_out_of_range_angles_are_inadmissible_not_errors():
    assert is_admissible((14.0, 0.0, 0.0)) is False
    assert is_admissible((0.0, -31.0, 0.0)) is False


def test_bed_clearance_binds():
    # steepest downward chain reaches about -0.16 m, below the -0.10 m floor
    assert not is_admissible(decode_indices((0, 0, 0)))
    loose = PanelChainSpec(mount_height_above_bed=1.0)
    assert is_admissible(decode_indices((0, 0, 0)), loose)


def test_unconstrained_count(full_grid):
    assert full_grid.size == 274_625


def test_default_count_matches_scalar_oracle(default_space):
    spec = PanelChainSpec()
    assert default_space.size == brute_force_admissible_count(spec) == 207_062


def test_zero_rise_spec_has_no_positive_apex():
    spec = PanelChainSpec(max_rise_above_roof=0.0)
    shapes = list(enumerate_grid(spec))
    assert shapes
    for shape in shapes[::97]:
        assert chain_profile(shape, spec)[:, 1].max() <= 1e-15


def test_enumeration_is_lexicographic_and_unique(default_space):
    idx = default_space.admissible_indices()
    keys = idx[:, 0] * 65 * 65 + idx[:, 1] * 65 + idx[:, 2]
    assert np.all(np.diff(keys) > 0)
    first = next(iter(enumerate_grid()))
    assert first.indices == tuple(idx[0])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.05), st.floats(0.0, 0.05))
def test_admissibility_monotone_in_rise(r1, r2):
    low, high = sorted((r1, r2))
    theta = angles_from_indices(grid_indices()[::53])
    from morphopt.geometry import admissible_mask
    small = admissible_mask(theta, PanelChainSpec(max_rise_above_roof=low))
    large = admissible_mask(theta, PanelChainSpec(max_rise_above_roof=high))
    assert np.all(large[small])


def test_domain_subset_of_grid(default_space, full_grid):
    assert np.all(full_grid.mask[default_space.mask])
    assert (64, 64, 64) not in default_space
    assert (70, 0, 0) not in default_space


def test_neutral_shape_serialization():
    shape = MorphShape.neutral()
    data = json.loads(json.dumps(shape.to_dict()))
    assert data == {"theta_deg": [0.0, 0.0, 0.0], "indices": list(shape.indices)}
    assert MorphShape.from_dict(data) == shape


@given(triples)
def test_grid_shape_serialization(indices):
    shape = decode_indices(indices)
    assert MorphShape.from_dict(shape.to_dict()) == shape


def test_grid_csv_export():
    spec = PanelChainSpec()
    buf = io.StringIO()
    write_grid_csv(spec, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert tuple(rows[0]) == GRID_CSV_HEADER
    assert len(rows) == 274_626
    assert sum(int(r[-1]) for r in rows[1:]) == DesignSpace(spec).size
    assert rows[1][:3] == ["0", "0", "0"]


def test_chain_spec_validation():
    with pytest.raises(ConfigurationError):
        PanelChainSpec(panel_length=0)
    with pytest.raises(ConfigurationError):
        PanelChainSpec(panel_count=4)


def test_vehicle_blockage_from_test_section():
    v = VehicleGeometry(test_section_area=1.5625)
    assert v.blockage_ratio == pytest.approx(0.034, abs=5e-4)
    assert VehicleGeometry().blockage_ratio == 0.034
    with pytest.raises(ConfigurationError):
        VehicleGeometry(frontal_area=-1)
