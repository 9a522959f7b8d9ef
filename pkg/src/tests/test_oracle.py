from __future__ import annotations

import math

import numpy as np
import pytest

from mongelab.errors import ConfigError
from mongelab.oracle import (
    brute_force_monotone,
    brute_force_ot,
    closed_forms,
    cone_contains_grid,
    cone_fraction,
    disk_fraction,
    euclidean_derivative,
    euclidean_derivative_at,
    finite_difference_derivative,
    lmtc_fraction,
    lp_distance,
    monotone_defect,
    pmtc_halfspace_fraction,
)


def test_brute_force_ot_on_the_crossing_instance() -> None:
    xs = [(0.0, 0.0), (1.0, 1.0)]
    ys = [(0.0, 1.0), (1.0, 0.0)]

    result = brute_force_ot(xs, ys)

    assert result.value == 1.0
    assert result.witness == (0, 1)
    assert result.work == 2


def test_brute_force_ot_rejects_bad_sizes() -> None:
    with pytest.raises(ConfigError, match="equal atom counts"):
        brute_force_ot([(0.0,)], [(0.0,), (1.0,)])
    with pytest.raises(ConfigError, match="Enumeration"):
        brute_force_ot([(float(i),) for i in range(9)], [(float(i),) for i in range(9)])


def test_monotone_defect_of_crossed_pairs() -> None:
    result = monotone_defect([(0.0,), (1.0,)], [(1.0,), (0.0,)])

    assert result.value == -2.0
    assert result.witness["permutation"] == (1, 0)
    assert not brute_force_monotone([(0.0,), (1.0,)], [(1.0,), (0.0,)])
    assert brute_force_monotone([(0.0,), (1.0,)], [(0.0,), (1.0,)])


def test_lp_distance() -> None:
    assert lp_distance(2.0)((0.0, 0.0), (3.0, 4.0)) == pytest.approx(5.0)
    assert lp_distance(math.inf)((0.0, 0.0), (3.0, -4.0)) == 4.0


def test_closed_forms_at_known_points() -> None:
    assert pmtc_halfspace_fraction(0.0, 1.0) == pytest.approx(0.5)
    assert cone_fraction(1.0, 1.0) == pytest.approx(0.5)
    assert cone_fraction(0.5, 1.0) == pytest.approx(1.0 / 6.0)
    assert euclidean_derivative(math.pi / 2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert lmtc_fraction(0.25, 1.0) == pytest.approx(1.0 / 3.0)
    assert disk_fraction(0.5) == pytest.approx(math.pi / 4)
    assert set(closed_forms()) == {
        "pmtc_halfspace_fraction",
        "cone_fraction",
        "euclidean_derivative",
        "lmtc_fraction",
        "disk_fraction",
    }


def test_closed_forms_reject_out_of_range_arguments() -> None:
    with pytest.raises(ConfigError):
        pmtc_halfspace_fraction(3.0, 1.0)
    with pytest.raises(ConfigError):
        lmtc_fraction(1.0, 1.0)
    with pytest.raises(ConfigError):
        disk_fraction(0.6)
    with pytest.raises(ConfigError):
        cone_fraction(0.0, 1.0)


def test_euclidean_derivative_at_matches_finite_differences() -> None:
    x, y, z = (0.0, 0.0), (1.0, 0.0), (0.6, 0.8)

    exact = euclidean_derivative_at(x, y, z)
    approx = finite_difference_derivative(np.linalg.norm, x, y, z)

    assert exact == pytest.approx(-0.6)
    assert approx.value == pytest.approx(exact, abs=1e-6)


def test_cone_contains_grid() -> None:
    inside = cone_contains_grid((0.5, 0.1), (0.0, 0.0), (1.0, 0.0), 0.5)
    outside = cone_contains_grid((0.0, 1.0), (0.0, 0.0), (1.0, 0.0), 0.5)

    assert inside.value < 0
    assert inside.witness == pytest.approx(0.5 + 0.1 / math.sqrt(3), abs=1e-4)
    assert outside.value == pytest.approx(math.sqrt(3) / 2, abs=1e-6)
