#!/usr/bin/env python3
"""
Tests for signal generators, noise injection, metrics and file I/O
"""

import os
import sys
import tempfile

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pcsbl.errors import ConfigError, DataFormatError, DimensionError, DomainError
from pcsbl.fileio import (read_pgm, read_signal, read_vector_csv, write_pgm,
                          write_vector_csv)
from pcsbl.signals import (LETTER_GLYPHS, add_noise, count_runs, gen_block_sparse, gen_patch_2d,
                           largest_cluster, load_patch, nmse, success, unvectorize, vectorize)
from pcsbl.rng import make_rng


def test_block_sparse_examples():
    full = gen_block_sparse(10, 10, 1, seed=0)
    assert np.all(full != 0) and count_runs(full) == 1

    x = gen_block_sparse(200, 40, 6, seed=1)
    assert np.count_nonzero(x) == 40 and count_runs(x) == 6
    assert_allclose(np.linalg.norm(x), 1.0)

    isolated = gen_block_sparse(30, 7, 7, seed=2)
    assert np.count_nonzero(isolated) == 7 and count_runs(isolated) == 7


def test_block_sparse_support_statistics():
    draws = int(os.getenv("PCSBL_SUPPORT_DRAWS", "2000"))
    starts = np.zeros(200)
    for seed in range(draws):
        x = gen_block_sparse(200, 40, 6, seed=seed)
        assert np.count_nonzero(x) == 40
        assert count_runs(x) == 6
        starts += x != 0
    # every position is reachable
    assert np.all(starts > 0)


def test_block_sparse_is_deterministic():
    assert_array_equal(gen_block_sparse(50, 10, 3, seed=5), gen_block_sparse(50, 10, 3, seed=5))
    assert not np.array_equal(gen_block_sparse(50, 10, 3, seed=5), gen_block_sparse(50, 10, 3, seed=6))


def test_block_sparse_infeasible():
    for args in ((10, 8, 4), (5, 6, 1), (10, 2, 3)):
        try:
            gen_block_sparse(*args, seed=0)
        except ConfigError:
            pass
        else:
            assert False, f"{args} should be infeasible"


def test_patch_generator():
    for shape in ("letters", "strokes") + tuple(LETTER_GLYPHS):
        x = gen_patch_2d(shape, 16, 16, seed=3)
        assert x.shape == (256,)
        assert set(np.unique(x)) <= {0.0, 1.0}
        assert largest_cluster(unvectorize(x, 16, 16)) >= 3, shape
    assert_array_equal(gen_patch_2d("letters", 16, 16, seed=9), gen_patch_2d("letters", 16, 16, seed=9))
    try:
        gen_patch_2d("letters", 3, 16, seed=0)
    except ConfigError:
        pass
    else:
        assert False, "Q < 4 should be rejected"


def test_vectorization_is_column_major():
    image = np.arange(6.0).reshape(2, 3)
    x = vectorize(image)
    # n = l*Q + q
    assert x[1 * 2 + 1] == image[1, 1]
    assert_array_equal(unvectorize(x, 2, 3), image)


def test_add_noise_examples():
    z = make_rng(0).standard_normal(50)
    y, sigma2 = add_noise(z, None, seed=1)
    assert_array_equal(y, z)
    assert sigma2 == 0.0
    y, sigma2 = add_noise(z, float("inf"), seed=1)
    assert_array_equal(y, z)
    assert sigma2 == 0.0

    unit = np.ones(100)
    _, sigma2 = add_noise(unit, 20.0, seed=1)
    assert_allclose(sigma2, 0.01)

    big = make_rng(2).standard_normal(10000)
    y, _ = add_noise(big, 15.0, seed=3)
    noise = y - big
    empirical = 10 * np.log10((big @ big) / (noise @ noise))
    assert abs(empirical - 15.0) < 0.2

    try:
        add_noise(np.zeros(4), 10.0, seed=0)
    except DomainError:
        pass
    else:
        assert False, "zero signal with finite SNR should be rejected"


def test_nmse_and_success():
    x = make_rng(4).standard_normal(20)
    assert nmse(x, x) == 0.0 and success(x, x)
    assert nmse(x, np.zeros(20)) == 1.0 and not success(x, np.zeros(20))
    delta = make_rng(5).standard_normal(20)
    delta *= np.sqrt(1e-8 * (x @ x) / (delta @ delta))
    assert_allclose(nmse(x, x + delta), 1e-8, rtol=1e-9)
    assert success(x, x + delta)
    for bad in ((np.zeros(3), np.zeros(3), DomainError), (x, x[:5], DimensionError)):
        try:
            nmse(bad[0], bad[1])
        except bad[2]:
            pass
        else:
            assert False, "nmse should reject this input"


def test_pgm_round_trip():
    image = make_rng(6).integers(0, 256, size=(5, 7)) / 255.0
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "patch.pgm")
        write_pgm(path, image)
        assert_array_equal(read_pgm(path), image)
        assert_array_equal(read_signal(path), vectorize(image))

        ascii_path = os.path.join(tmp, "ascii.pgm")
        with open(ascii_path, "w") as f:
            f.write("P2\n3 2\n255\n0 255 0\n255 255 0\n")
        assert_array_equal(read_pgm(ascii_path), [[0, 1, 0], [1, 1, 0]])
        assert_array_equal(load_patch(ascii_path, 2, 3), [0, 1, 1, 1, 0, 0])

        blank = os.path.join(tmp, "blank.pgm")
        write_pgm(blank, np.zeros((4, 4)))
        assert_array_equal(load_patch(blank), np.zeros(16))

        bad = os.path.join(tmp, "bad.pgm")
        with open(bad, "w") as f:
            f.write("not an image")
        try:
            read_pgm(bad)
        except DataFormatError:
            pass
        else:
            assert False, "garbage should not parse as PGM"


def test_vector_csv_round_trip():
    values = make_rng(7).standard_normal(13)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "x.csv")
        write_vector_csv(path, values)
        assert_array_equal(read_vector_csv(path), values)
        with open(path) as f:
            first = f.read()
        write_vector_csv(path, read_vector_csv(path))
        with open(path) as f:
            assert f.read() == first
        try:
            read_vector_csv(os.path.join(tmp, "missing.csv"))
        except DataFormatError:
            pass
        else:
            assert False, "missing file should raise DataFormatError"


if __name__ == "__main__":
    for name, func in list(globals().items()):
        if name.startswith("test_") and callable(func):
            print(f"🔍 {name}")
            func()
    print("✅ All signal tests passed")
