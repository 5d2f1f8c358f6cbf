import warnings

import numpy as np
import pytest

from apixelhop import gbdt
from apixelhop.blocks import AttentionConfig
from apixelhop.channelsel import ChannelBank, ChannelKey, ChannelRecord
from apixelhop.corpus import SplitConfig, scan_corpus
from apixelhop.ensemble import EnsembleConfig
from apixelhop.pipeline import TrainConfig, train_detector
from apixelhop.saab import UNIT_SIDES, FilterShape, learn_unit
from apixelhop.store import DetectorModel
from apixelhop.synthgen import SynthConfig, write_corpus

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []

TINY_TRAIN = TrainConfig(
    attention=AttentionConfig(blocks_per_image=8),
    boost=gbdt.BoostConfig(n_trees=5, max_depth=2),
    seed=7,
)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """16 real + 16 fake 64x64 synthetic images."""
    root = tmp_path_factory.mktemp("tiny")
    write_corpus(SynthConfig(n_per_class=16, side=64, seed=7), root)
    return root


@pytest.fixture(scope="session")
def tiny_model(tiny_corpus):
    train, val = scan_corpus(tiny_corpus / "real", tiny_corpus / "fake", SplitConfig(0.25, 7))
    return train_detector(train, val, TINY_TRAIN)


def leaf_model(n_features: int, value: float = 0.0) -> gbdt.GbdtModel:
    tree = gbdt.Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([value]))
    return gbdt.GbdtModel([tree], 0.1, 0.0, n_features)


def published_config_model(n_sel: int) -> DetectorModel:
    """Valid model with the published configuration and placeholder classifiers."""
    rng = np.random.default_rng(0)
    units = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for s in UNIT_SIDES:
            shape = FilterShape(s)
            units[s] = learn_unit(rng.normal(size=(20 * shape.d, shape.d)), shape)
    records = [ChannelRecord(ChannelKey(s, k), leaf_model(FilterShape(s).grid ** 2), 1.0, 1.0)
               for s in UNIT_SIDES for k in range(1, n_sel + 1)]
    bank = ChannelBank(records, n_sel)
    ens = EnsembleConfig()
    model = DetectorModel(AttentionConfig(), gbdt.BoostConfig(), ens, n_sel, 7, None, units, bank)
    model.meta = leaf_model(len(records) * 2 * ens.tail)
    return model
