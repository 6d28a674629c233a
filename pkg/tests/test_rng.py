import numpy as np

from qbcf import RandomStream


def test_same_key_bitwise_identical():
    a = RandomStream(1234, 7).gen.random(1000)
    b = RandomStream(1234, 7).gen.random(1000)
    assert np.array_equal(a, b)


def test_distinct_stream_ids_differ():
    a = RandomStream(1234, 0).gen.random(100)
    b = RandomStream(1234, 1).gen.random(100)
    assert not np.array_equal(a, b)


def test_substream_deterministic_and_independent_of_parent_state():
    base = RandomStream(99, 2)
    child_first = base.substream(5).gen.random(50)
    base.gen.random(1000)  # advancing the parent must not affect children
    child_second = base.substream(5).gen.random(50)
    assert np.array_equal(child_first, child_second)


def test_substream_paths_are_distinct():
    base = RandomStream(42)
    draws = [base.substream(k).gen.random(20) for k in range(6)]
    draws.append(base.substream(0, 1).gen.random(20))
    for i in range(len(draws)):
        for j in range(i + 1, len(draws)):
            assert not np.array_equal(draws[i], draws[j])


def test_streams_uncorrelated():
    n = 20000
    x = RandomStream(7, 0).gen.standard_normal(n)
    y = RandomStream(7, 1).gen.standard_normal(n)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4.0 / np.sqrt(n)
