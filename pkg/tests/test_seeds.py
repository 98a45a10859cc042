from __future__ import annotations

import numpy as np

from simdoe.seeds import (derive_seed, derive_seed_array, uniform,
                          uniform_block, uniform_stream)


def test_uniform_stream_matches_scalar():
    for seed in (0, 1, 2 ** 63, 12345678901234567):
        vec = uniform_stream(seed, 3, 20)
        for k in range(20):
            assert vec[k] == uniform(seed, 3 + k)


def test_uniforms_in_unit_interval_and_spread():
    u = uniform_stream(99, 0, 10000)
    assert np.all((0.0 <= u) & (u < 1.0))
    assert abs(u.mean() - 0.5) < 0.02
    assert abs(u.var() - 1 / 12) < 0.005


def test_derive_seed_array_matches_scalar():
    idx = np.arange(50)
    vec = derive_seed_array(321, idx)
    for i in range(50):
        assert int(vec[i]) == derive_seed(321, i)


def test_uniform_block_matches_stream():
    seeds = derive_seed_array(7, np.arange(5))
    block = uniform_block(seeds, 30)
    for s in range(5):
        np.testing.assert_array_equal(block[s],
                                      uniform_stream(int(seeds[s]), 0, 30))


def test_derive_seed_distinct_over_indices():
    seeds = {derive_seed(11, r, rep) for r in range(500) for rep in (1, 2)}
    assert len(seeds) == 1000
    assert derive_seed(11, 1, 2) != derive_seed(11, 2, 1)
    assert derive_seed(11, 5) != derive_seed(12, 5)
