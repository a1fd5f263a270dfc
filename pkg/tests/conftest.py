import numpy as np
import pytest

from softflow import BitSequence, ExplicitGraph, HyperGrid


@pytest.fixture
def chain():
    # s0 -> x with R(x) = 2
    return ExplicitGraph({0: [1]}, {1: 2.0})


@pytest.fixture
def diamond():
    # s0 -> {a, b} -> x with R(x) = 1
    return ExplicitGraph({0: [1, 2], 1: [3], 2: [3]}, {3: 1.0})


@pytest.fixture
def grid42():
    return HyperGrid(4, 2)


@pytest.fixture
def grid82():
    return HyperGrid(8, 2)


@pytest.fixture
def bitseq_tiny():
    # 16 terminal strings, 25 states in total
    return BitSequence(4, 2, ["0000", "1111"], reward_exponent=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
