"""Piecewise dataset generation and CSV round trips."""

import numpy as np
import pytest

from lactose import (
    ConstantSegment,
    LinearSegment,
    NumericError,
    PiecewiseSpec,
    SineSegment,
    TrainRecord,
    ValidationError,
    generate,
    piecewise_value,
    read_dataset,
    validate_spec,
    write_dataset,
    write_predictions,
)

TWO_STEPS = (
    ConstantSegment(-1.0, 0.0, 0.0),
    ConstantSegment(0.0, 1.0, 1.0),
)


def two_step_spec(**overrides):
    base = dict(
        segments=TWO_STEPS, noise_sigma=0.0, sample_count=10, x_min=-1.0, x_max=1.0, seed=1
    )
    base.update(overrides)
    return PiecewiseSpec(**base)


# segment values


def test_constant_segments_interior_value():
    assert piecewise_value(two_step_spec(), -0.5) == 0.0


def test_boundary_takes_upper_segment():
    # Mirrors the router's left-closed intervals, so a breakpoint placed on
    # the boundary splits the data with no stragglers.
    assert piecewise_value(two_step_spec(), 0.0) == 1.0


def test_range_end_belongs_to_last_segment():
    assert piecewise_value(two_step_spec(), 1.0) == 1.0


def test_linear_segment_hand_value():
    spec = two_step_spec(segments=(LinearSegment(-1.0, 3.0, 2.0, 1.0),), x_max=3.0)
    assert piecewise_value(spec, 2.0) == 5.0


def test_sine_segment_value():
    spec = two_step_spec(segments=(SineSegment(-1.0, 1.0, 2.0, 4.0, 0.0),))
    assert piecewise_value(spec, 0.25) == 2.0 * np.sin(1.0)


def test_value_outside_range_rejected():
    with pytest.raises(ValidationError):
        piecewise_value(two_step_spec(), 2.0)


# spec validation


def test_gap_between_segments_rejected():
    segments = (ConstantSegment(-1.0, -0.2, 0.0), ConstantSegment(0.2, 1.0, 1.0))
    with pytest.raises(ValidationError, match=r"segments\[1\].*gap"):
        validate_spec(two_step_spec(segments=segments))


def test_overlapping_segments_rejected():
    segments = (ConstantSegment(-1.0, 0.2, 0.0), ConstantSegment(-0.2, 1.0, 1.0))
    with pytest.raises(ValidationError, match=r"segments\[1\].*overlap"):
        validate_spec(two_step_spec(segments=segments))


def test_segments_must_cover_the_range():
    segments = (ConstantSegment(-1.0, 0.5, 0.0),)
    with pytest.raises(ValidationError):
        validate_spec(two_step_spec(segments=segments))
    with pytest.raises(ValidationError):
        validate_spec(two_step_spec(x_min=-2.0))


def test_negative_noise_rejected():
    with pytest.raises(ValidationError):
        validate_spec(two_step_spec(noise_sigma=-0.1))


# generation


def test_noise_free_samples_sit_on_the_target():
    records = generate(two_step_spec(sample_count=50))
    for rec in records:
        assert rec.y[0] == piecewise_value(two_step_spec(), float(rec.x[0]))


def test_generate_is_deterministic():
    a = generate(two_step_spec(noise_sigma=0.1, seed=9))
    b = generate(two_step_spec(noise_sigma=0.1, seed=9))
    c = generate(two_step_spec(noise_sigma=0.1, seed=10))
    assert all(
        ra.x.tobytes() == rb.x.tobytes() and ra.y.tobytes() == rb.y.tobytes()
        for ra, rb in zip(a, b)
    )
    assert any(ra.x.tobytes() != rc.x.tobytes() for ra, rc in zip(a, c))


def test_generate_keeps_samples_in_range():
    records = generate(two_step_spec(sample_count=200, seed=3))
    xs = np.array([rec.x[0] for rec in records])
    assert xs.min() >= -1.0 and xs.max() <= 1.0


def test_noise_scale_tracks_sigma():
    spec = two_step_spec(noise_sigma=0.05, sample_count=2000, seed=4)
    residuals = np.array([rec.y[0] - piecewise_value(spec, float(rec.x[0])) for rec in generate(spec)])
    assert 0.04 < residuals.std() < 0.06


# dataset csv


def test_dataset_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(77)
    records = [TrainRecord(rng.standard_normal(2), rng.standard_normal(1)) for _ in range(20)]
    records.append(TrainRecord([0.1 + 0.2, 1e-300], [-0.0]))  # awkward floats on purpose
    path = str(tmp_path / "data.csv")
    write_dataset(path, records)
    loaded = read_dataset(path)
    assert len(loaded) == len(records)
    for original, parsed in zip(records, loaded):
        assert original.x.tobytes() == parsed.x.tobytes()
        assert original.y.tobytes() == parsed.y.tobytes()


def test_dataset_header_names_widths(tmp_path):
    path = str(tmp_path / "data.csv")
    write_dataset(path, [TrainRecord([1.0, 2.0], [3.0])])
    header = open(path).readline().strip()
    assert header == "x0,x1,y0"


def test_short_row_names_its_line(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x0,x1,y0\n1.0,2.0,3.0\n1.0,2.0\n")
    with pytest.raises(ValidationError, match=":3:"):
        read_dataset(str(path))


def test_non_numeric_cell_names_line_and_column(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x0,y0\n1.0,oops\n")
    with pytest.raises(ValidationError, match=":2:.*y0"):
        read_dataset(str(path))


def test_non_finite_cell_rejected(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x0,y0\n1.0,inf\n")
    with pytest.raises(NumericError):
        read_dataset(str(path))


def test_header_only_file_yields_empty_dataset(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x0,y0\n")
    assert read_dataset(str(path)) == []


def test_unrecognized_header_rejected(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(ValidationError, match="header"):
        read_dataset(str(path))


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("")
    with pytest.raises(ValidationError, match="empty"):
        read_dataset(str(path))


def test_write_empty_dataset_rejected(tmp_path):
    with pytest.raises(ValidationError):
        write_dataset(str(tmp_path / "data.csv"), [])


# predictions csv


def test_predictions_schema(tmp_path):
    records = [TrainRecord([0.5], [1.0]), TrainRecord([-0.5], [0.0])]
    predictions = [np.array([0.9]), np.array([0.1])]
    path = tmp_path / "pred.csv"
    write_predictions(str(path), records, predictions, [1, 0])
    lines = path.read_text().splitlines()
    assert lines[0] == "x0,y_true0,y_pred0,branch"
    assert len(lines) == 3
    assert lines[1].split(",") == ["0.5", "1.0", "0.9", "1"]


def test_predictions_length_mismatch_rejected(tmp_path):
    records = [TrainRecord([0.5], [1.0])]
    with pytest.raises(ValidationError):
        write_predictions(str(tmp_path / "pred.csv"), records, [], [0])
