import numpy as np
import pytest

from apixelhop import gbdt
from apixelhop.blocks import AttentionConfig
from apixelhop.channelsel import (
    BlockSet,
    ChannelKey,
    balanced_rows,
    build_block_dataset,
    gather_blocks,
    rank_and_select,
    write_channel_report,
)
from apixelhop.corpus import LabeledSet
from apixelhop.errors import EmptyClass
from apixelhop.pipeline import TrainConfig, learn_units


def labeled(corpus, n):
    return LabeledSet([(str(corpus / "real" / f"{i:05d}.png"), 0) for i in range(n)]
                      + [(str(corpus / "fake" / f"{i:05d}.png"), 1) for i in range(n)], "train")


def test_dataset_shape_and_balance(tiny_corpus):
    att = AttentionConfig(blocks_per_image=16)
    images = labeled(tiny_corpus, 10)
    bs = gather_blocks(images, att)
    units = learn_units(bs.blocks, TrainConfig())
    X, y = build_block_dataset(bs, units, ChannelKey(3, 4), att, seed=7)
    assert X.shape == (320, 196)
    assert np.sum(y == 0) == np.sum(y == 1) == 160
    X2, y2 = build_block_dataset(images, units, ChannelKey(3, 4), att, seed=7)
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)


def test_balanced_rows_downsamples_majority():
    labels = np.array([0] * 10 + [1] * 4)
    rows = balanced_rows(labels, seed=1)
    assert np.sum(labels[rows] == 0) == np.sum(labels[rows] == 1) == 4
    np.testing.assert_array_equal(rows, balanced_rows(labels, seed=1))
    with pytest.raises(EmptyClass):
        balanced_rows(np.zeros(5), seed=1)


@pytest.fixture(scope="module")
def small_sets(tiny_corpus):
    att = AttentionConfig(blocks_per_image=4)
    tr = gather_blocks(labeled(tiny_corpus, 8), att)
    va_items = LabeledSet([(str(tiny_corpus / c / f"{i:05d}.png"), lab)
                           for c, lab in (("real", 0), ("fake", 1)) for i in range(8, 12)], "val")
    return tr, gather_blocks(va_items, att), learn_units(tr.blocks, TrainConfig())


@pytest.mark.parametrize("n_sel", [2, 3])
def test_bank_size(small_sets, n_sel):
    tr, va, units = small_sets
    bank = rank_and_select(tr, va, units, gbdt.BoostConfig(n_trees=2, max_depth=1), n_sel)
    assert len(bank) == 3 * n_sel
    for s in (2, 3, 4):
        assert len(bank.channels_of(s)) == n_sel
    # selection is by validation AUC within each unit
    for s in (2, 3, 4):
        ranked = sorted((r for r in bank.ranking if r[0] == s), key=lambda r: (-r[3], r[1]))
        assert sorted(r[1] for r in ranked[:n_sel]) == bank.channels_of(s)
    assert len(bank.ranking) == 12 + 27 + 48


def test_dc_not_ranked_first(tiny_model):
    for s in (2, 3, 4):
        rows = sorted((r for r in tiny_model.bank.ranking if r[0] == s), key=lambda r: (-r[3], r[1]))
        assert rows[0][1] != 0


def test_channel_report(tiny_model, tmp_path):
    write_channel_report(tiny_model.bank, tmp_path / "ch.csv")
    lines = (tmp_path / "ch.csv").read_text().splitlines()
    assert lines[0] == "unit,channel,train_auc,val_auc,selected"
    assert len(lines) == 1 + 87
    assert sum(int(line.split(",")[-1]) for line in lines[1:]) == 6


def test_bad_selection_count(small_sets):
    tr, va, units = small_sets
    with pytest.raises(ValueError):
        rank_and_select(tr, va, units, n_sel_per_unit=5)


def test_image_blocks(small_sets):
    tr = small_sets[0]
    assert isinstance(tr, BlockSet)
    assert tr.image_blocks(3).shape == (4, 16, 16, 3)
