import math

import numpy as np
import pytest

from kamreduce.lemmas import (DIVISION_CONSTANT, divided_operator, division_ratio, lattice_sum,
                              lattice_sum_bound, shell_count)


def test_shell_count_brute_force():
    for n in (1, 2, 3):
        axes = [np.arange(-6, 7)] * n
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)
        norms = np.abs(grid).sum(1)
        for r in range(6):
            assert shell_count(n, r) == int((norms == r).sum())


def test_lattice_sum_closed_form():
    # n = 1, nu = 1: 2 sum r x^r = 2x/(1-x)^2 with x = exp(-2 delta)
    delta = 0.3
    x = math.exp(-2 * delta)
    assert lattice_sum(delta, 1.0, 1) == pytest.approx(2 * x / (1 - x) ** 2, rel=1e-13)


def test_lattice_sum_below_bound_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        delta = rng.uniform(0.02, 0.99)
        nu = rng.uniform(1.01, 8.0)
        n = int(rng.integers(1, 4))
        assert lattice_sum(delta, nu, n) <= lattice_sum_bound(delta, nu, n)


def test_division_bound_random():
    rng = np.random.default_rng(12)
    for _ in range(100):
        J = int(rng.integers(2, 65))
        A = rng.standard_normal((J, J)) + 1j * rng.standard_normal((J, J))
        assert division_ratio(A) <= DIVISION_CONSTANT


def test_divided_operator_entries():
    A = np.array([[5.0, -2.0, 3.0], [1.0, 7.0, 4.0], [6.0, 8.0, 9.0]])
    B = divided_operator(A)
    np.testing.assert_allclose(B, [[0, 2, 1.5], [1, 0, 4], [3, 8, 0]])
    assert division_ratio(np.zeros((3, 3))) == 0.0


def test_lattice_sum_rejects_bad_delta():
    with pytest.raises(ValueError):
        lattice_sum(0.0, 2.0, 1)
