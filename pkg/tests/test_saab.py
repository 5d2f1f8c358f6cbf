import math

import numpy as np
import pytest

from apixelhop.errors import DegenerateInputWarning, IndexOutOfRange, InsufficientPatches
from apixelhop.saab import (
    FilterShape,
    channel_features,
    extract_patches,
    jacobi_eigh,
    learn_unit,
    responses,
    sample_patches,
    transform,
)


def dense_oracle(patches):
    """Eigenvectors of the DC-removed second moment via LAPACK, descending."""
    r = patches - patches.mean(axis=1, keepdims=True)
    c = r.T @ r / len(r)
    w, v = np.linalg.eigh(c)
    order = np.argsort(-w)
    return w[order], v[:, order].T


def align_signs(a, b):
    sign = np.sign(np.sum(a * b, axis=1, keepdims=True))
    return a * sign


@pytest.mark.parametrize("s", [2, 3, 4])
def test_patch_geometry(s):
    shape = FilterShape(s)
    block = np.random.default_rng(s).random((16, 16, 3))
    p = extract_patches(block, shape)
    assert p.shape == ((17 - s) ** 2, s * s * 3)
    # row, column, channel flattening
    np.testing.assert_array_equal(p[0], block[:s, :s, :].ravel())
    np.testing.assert_array_equal(p[17 - s + 1], block[1:1 + s, 1:1 + s, :].ravel())


def test_constant_block_patches():
    p = extract_patches(np.full((16, 16, 3), 0.25), FilterShape(2))
    np.testing.assert_array_equal(p, np.full((225, 12), 0.25))


@pytest.mark.parametrize("s", [2, 3, 4])
def test_kernels_match_dense_oracle(s):
    shape = FilterShape(s)
    patches = np.random.default_rng(10 + s).normal(size=(500, shape.d)) * np.linspace(1, 2, shape.d)
    unit = learn_unit(patches, shape)
    w, v = dense_oracle(patches)
    ac = unit.kernels[1:]
    assert np.max(np.abs(align_signs(ac, v[:-1]) - v[:-1])) < 1e-6
    np.testing.assert_allclose(unit.eigenvalues, w[:-1], atol=1e-10)
    assert np.max(np.abs(unit.kernels @ unit.kernels.T - np.eye(shape.d))) < 1e-8


def test_dc_kernel():
    unit = learn_unit(np.random.default_rng(0).random((200, 12)), FilterShape(2))
    np.testing.assert_allclose(unit.kernels[0], 1 / math.sqrt(12), rtol=0, atol=1e-15)
    assert unit.kernels[0, 0] == pytest.approx(0.288675, abs=1e-6)


def test_sign_convention():
    unit = learn_unit(np.random.default_rng(1).random((400, 27)), FilterShape(3))
    for row in unit.kernels:
        assert row[np.argmax(np.abs(row))] > 0


def test_degenerate_patches_warn():
    with pytest.warns(DegenerateInputWarning):
        unit = learn_unit(np.full((200, 12), 0.7), FilterShape(2))
    assert np.all(unit.eigenvalues == 0)
    assert np.max(np.abs(unit.kernels @ unit.kernels.T - np.eye(12))) < 1e-12


def test_insufficient_patches():
    with pytest.raises(InsufficientPatches):
        learn_unit(np.zeros((100, 12)), FilterShape(2))


def test_jacobi_against_lapack():
    a = np.random.default_rng(2).normal(size=(20, 20))
    a = a + a.T
    w, v = jacobi_eigh(a)
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(a), atol=1e-10)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-10)


def learned(s, seed=0):
    shape = FilterShape(s)
    blocks = np.random.default_rng(seed).random((8, 16, 16, 3))
    return learn_unit(sample_patches(blocks, shape), shape)


def test_transform_matches_naive_loop():
    unit = learned(3)
    block = np.random.default_rng(9).random((16, 16, 3))
    cube = transform(block, unit)
    assert cube.grid.shape == (14, 14, 27)
    naive = np.empty((14, 14, 27))
    for i in range(14):
        for j in range(14):
            patch = block[i:i + 3, j:j + 3, :].ravel()
            for k in range(27):
                naive[i, j, k] = sum(unit.kernels[k, t] * patch[t] for t in range(27))
    assert np.max(np.abs(cube.grid - naive)) < 1e-12


def test_constant_block_response():
    unit = learned(2)
    cube = transform(np.full((16, 16, 3), 0.4), unit)
    np.testing.assert_allclose(cube.grid[..., 0], 0.4 * math.sqrt(12), atol=1e-12)
    assert np.max(np.abs(cube.grid[..., 1:])) < 1e-12
    f = channel_features(cube, 0)
    assert f.shape == (225,)
    assert np.ptp(f) < 1e-12


@pytest.mark.parametrize("s", [2, 3, 4])
def test_parseval(s):
    unit = learned(s, seed=s)
    block = np.random.default_rng(s).random((16, 16, 3))
    cube = transform(block, unit)
    energy = np.sum(cube.grid**2, axis=2).ravel()
    np.testing.assert_allclose(energy, np.sum(extract_patches(block, unit.shape) ** 2, axis=1), rtol=1e-10)


def test_channel_features_cover_cube():
    unit = learned(4)
    cube = transform(np.random.default_rng(3).random((16, 16, 3)), unit)
    stacked = np.stack([channel_features(cube, k) for k in range(48)], axis=1)
    np.testing.assert_array_equal(stacked, cube.grid.reshape(-1, 48))
    with pytest.raises(IndexOutOfRange):
        channel_features(cube, 48)


def test_channel_responses_independent_of_grouping():
    unit = learned(3)
    blocks = np.random.default_rng(4).random((5, 16, 16, 3))
    alone = responses(blocks, unit, [7])[0]
    grouped = responses(blocks, unit, [2, 7, 20])[1]
    np.testing.assert_array_equal(alone, grouped)


def test_subset_unit():
    unit = learned(2)
    sub = unit.subset([5, 1])
    assert sub.channels.tolist() == [1, 5]
    np.testing.assert_array_equal(sub.kernel(5), unit.kernel(5))
    with pytest.raises(IndexOutOfRange):
        sub.kernel(2)


def test_sample_patches_cap():
    blocks = np.random.default_rng(5).random((10, 16, 16, 3))
    shape = FilterShape(2)
    assert sample_patches(blocks, shape).shape == (2250, 12)
    capped = sample_patches(blocks, shape, cap=300, seed=1)
    assert capped.shape == (300, 12)
    np.testing.assert_array_equal(capped, sample_patches(blocks, shape, cap=300, seed=1))


def test_bad_filter_side():
    with pytest.raises(ValueError):
        FilterShape(5)
