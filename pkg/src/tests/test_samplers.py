from __future__ import annotations

import numpy as np
import pytest

from mongelab.errors import ConfigError, ZeroMassError
from mongelab.samplers import (
    SegmentMeasure,
    build_density,
    lebesgue_window,
    piecewise_constant,
    truncated_gaussian,
    uniform_box,
)
from mongelab.seeding import derive_rng
from mongelab.spaces import NormSpec


def test_uniform_box_density_is_inverse_volume() -> None:
    density = uniform_box([0.0, 0.0], [2.0, 0.5])

    np.testing.assert_allclose(density.density([[1.0, 0.25], [3.0, 0.25]]), [1.0, 0.0])
    assert density.describe()["name"] == "uniform"


def test_equal_seeds_give_identical_streams() -> None:
    density = uniform_box([0.0, 0.0], [1.0, 1.0])

    first = density.sample(derive_rng(5, 1), 100)
    second = density.sample(derive_rng(5, 1), 100)
    other = density.sample(derive_rng(5, 2), 100)

    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)


def test_sample_in_ball_respects_ball_and_support() -> None:
    density = uniform_box([0.0, 0.0], [1.0, 1.0])
    norm = NormSpec("euclidean", 2)
    center = np.array([0.0, 0.0])

    points = density.sample_in_ball(derive_rng(0, 0), norm, center, 0.3, 400)

    assert points.shape == (400, 2)
    assert np.all(norm.norm(points - center) < 0.3)
    assert np.all(points >= 0.0)


def test_sample_in_ball_outside_support_raises() -> None:
    density = uniform_box([0.0, 0.0], [1.0, 1.0])

    with pytest.raises(ZeroMassError):
        density.sample_in_ball(
            derive_rng(0, 0), NormSpec("euclidean", 2), np.array([3.0, 3.0]), 0.5, 10
        )


def test_lebesgue_window_is_a_wide_uniform_box() -> None:
    density = lebesgue_window(2, half_width=4.0)

    assert density.name == "lebesgue"
    np.testing.assert_allclose(density.low, [-4.0, -4.0])
    assert density.density([[0.0, 0.0]])[0] == pytest.approx(1.0 / 64.0)


def test_truncated_gaussian_density_integrates_to_one() -> None:
    density = truncated_gaussian([0.5, 0.5], [0.3, 0.3], [0.0, 0.0], [1.0, 1.0])
    cells = 400
    midpoints = (np.arange(cells) + 0.5) / cells
    grid = np.stack(np.meshgrid(midpoints, midpoints), axis=-1).reshape(-1, 2)

    total = float(density.density(grid).sum()) / cells**2

    assert total == pytest.approx(1.0, abs=1e-3)


def test_piecewise_constant_density_by_cell() -> None:
    density = piecewise_constant([0.0, 0.0], [1.0, 1.0], [[1.0, 3.0]])

    np.testing.assert_allclose(density.density([[0.5, 0.25], [0.5, 0.75]]), [0.5, 1.5])


def test_segment_samples_lie_on_the_segment_inside_the_ball() -> None:
    segment = SegmentMeasure([0.0, 0.0], [1.0, 0.0])
    norm = NormSpec("euclidean", 2)
    center = np.array([0.5, 0.1])

    points = segment.sample_in_ball(derive_rng(2, 0), norm, center, 0.2, 200)

    np.testing.assert_allclose(points[:, 1], 0.0)
    assert np.all(norm.norm(points - center) < 0.2)


def test_segment_ball_missing_the_segment_raises() -> None:
    segment = SegmentMeasure([0.0, 0.0], [1.0, 0.0])

    with pytest.raises(ZeroMassError):
        segment.sample_in_ball(
            derive_rng(2, 0), NormSpec("euclidean", 2), np.array([0.5, 1.0]), 0.2, 10
        )


def test_build_density_by_name() -> None:
    density = build_density("gaussian", {"mean": [0.0], "low": [-1.0], "high": [1.0]})

    assert density.name == "gaussian"
    assert build_density("lebesgue", {}, dim=3).dim == 3
    assert build_density("segment", {"start": [0.0, 0.0], "end": [1.0, 1.0]}).dim == 2


def test_build_density_rejects_unknown_names_and_missing_params() -> None:
    with pytest.raises(ConfigError, match="Unknown density"):
        build_density("cauchy", {})
    with pytest.raises(ConfigError, match="uniform.high"):
        build_density("uniform", {"low": [0.0]})


def test_box_rejects_inverted_bounds() -> None:
    with pytest.raises(ConfigError):
        uniform_box([1.0], [0.0])
