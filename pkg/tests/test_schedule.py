import math

import numpy as np
import pytest

from kamreduce.exceptions import ScheduleError
from kamreduce.schedule import IterationSchedule, fit_growth_constants


@pytest.fixture
def desk():
    return IterationSchedule.build(1e-3, 80, 0.1, 4)


def test_desk_values(desk):
    np.testing.assert_allclose(desk.eps[:3], [1e-3, 1e-4, 1e-4 ** (4 / 3)], rtol=1e-12)
    assert list(desk.cutoffs[:4]) == [139, 192, 269, 384]
    assert desk.strips[0] == pytest.approx(0.5)
    np.testing.assert_allclose(desk.strips[1:4], [0.4812, 0.4572, 0.4270], atol=5e-4)
    np.testing.assert_allclose(desk.gammas[:3], [0.1, 0.05, 0.025])
    assert desk.clamp_active


def test_cutoff_formula(desk):
    for nu in range(4):
        expected = math.ceil(10 / desk.strips[nu] * (4 / 3) ** nu * abs(math.log(1e-3)))
        assert desk.cutoffs[nu] == expected


def test_strip_shape_is_power_of_next_size(desk):
    raw = desk.eps[1:5] ** (1 / 80)
    np.testing.assert_allclose(desk.strips[:4] / raw, desk.strip_scale)


def test_monotone_invariants(desk):
    assert np.all(np.diff(desk.eps) < 0)
    assert np.all(np.diff(desk.strips) < 0)
    assert np.all(np.diff(desk.cutoffs) > 0)


def test_decay_invariant_is_diagnostic_unless_strict(desk):
    assert not desk.decay_invariant_holds
    with pytest.raises(ScheduleError, match="tail decay"):
        IterationSchedule.build(1e-3, 80, 0.1, 4, strict=True)


def test_small_N_needs_no_clamp():
    sch = IterationSchedule.build(1e-3, 2, 0.1, 2)
    assert not sch.clamp_active
    assert sch.strips[0] == pytest.approx(1e-4 ** 0.5)


def test_zero_epsilon_and_bad_input():
    sch = IterationSchedule.build(0.0, 80, 0.1, 3)
    assert np.all(sch.eps == 0)
    assert np.all(np.diff(sch.strips) < 0)
    for bad in (dict(epsilon=1.5), dict(gamma=0.0), dict(max_steps=0), dict(N=0)):
        args = dict(epsilon=1e-3, N=80, gamma=0.1, max_steps=3)
        args.update(bad)
        with pytest.raises(ScheduleError):
            IterationSchedule.build(**args)


def test_growth_fit():
    C1, C2 = fit_growth_constants([3.0, 6.0, 12.0, 24.0])
    assert C1 == pytest.approx(3.0) and C2 == pytest.approx(1.0)
    C1, C2 = fit_growth_constants([1.0, 5.0, 2.0])
    vals = C1 * 2.0 ** (C2 * np.arange(3))
    assert np.all(vals >= np.array([1.0, 5.0, 2.0]) * (1 - 1e-12))
    assert fit_growth_constants([]) == (0.0, 0.0)
