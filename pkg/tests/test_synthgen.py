import numpy as np
import pytest

from apixelhop.blocks import block_array, partition
from apixelhop.corpus import load_image
from apixelhop.synthgen import SynthConfig, gen_fake, gen_real, upsample_kernel, write_corpus

CFG = SynthConfig(n_per_class=20, side=128, seed=1)


def block_residual_energy(img):
    _, blocks = block_array(img)
    return np.mean((blocks - blocks.mean(axis=(1, 2), keepdims=True)) ** 2)


def test_deterministic():
    np.testing.assert_array_equal(gen_real(CFG, 0), gen_real(CFG, 0))
    np.testing.assert_array_equal(gen_fake(CFG, 0), gen_fake(CFG, 0))
    assert not np.array_equal(gen_real(CFG, 0), gen_real(CFG, 1))


def test_shapes_and_range():
    for img in (gen_real(CFG, 3), gen_fake(CFG, 3)):
        assert img.shape == (128, 128, 3)
        assert img.min() >= 0 and img.max() <= 1
    assert len(partition(gen_real(SynthConfig(side=256), 0))) == 256


def test_reals_carry_more_block_detail():
    reals = np.mean([block_residual_energy(gen_real(CFG, i)) for i in range(20)])
    fakes = np.mean([block_residual_energy(gen_fake(CFG, i)) for i in range(20)])
    assert reals > fakes


def test_fake_spectrum_has_upsampling_peaks():
    side, f = 128, 4
    cfg = SynthConfig(n_per_class=4, side=side, seed=2, upsample_factor=f)
    peak = side // f

    def ratio(img):
        mag = np.abs(np.fft.fft2(img.mean(axis=2) - img.mean()))
        row = mag[0]
        local = np.median(np.concatenate([row[peak - 6:peak - 1], row[peak + 2:peak + 7]]))
        return row[peak] / local

    fake = np.mean([ratio(gen_fake(cfg, i)) for i in range(4)])
    real = np.mean([ratio(gen_real(cfg, i)) for i in range(4)])
    assert fake > 20 and real < 5


def test_factor_one_is_pass_through():
    cfg = SynthConfig(n_per_class=2, side=64, seed=3, upsample_factor=1)
    real_seed = SynthConfig(n_per_class=2, side=64, seed=3 ^ 0x5DEECE66D, upsample_factor=1)
    np.testing.assert_array_equal(gen_fake(cfg, 1), gen_real(real_seed, 1))


def test_upsample_kernel_sums_to_factor():
    for f in (2, 4, 8):
        assert upsample_kernel(f).sum() == pytest.approx(f)


def test_write_corpus(tmp_path):
    real, fake = write_corpus(SynthConfig(n_per_class=3, side=32, seed=0), tmp_path)
    assert len(real) == len(fake) == 3
    assert load_image(real[0]).shape == (32, 32, 3)


def test_bad_config():
    with pytest.raises(ValueError):
        SynthConfig(side=100)
    with pytest.raises(IndexError):
        gen_real(CFG, 20)
