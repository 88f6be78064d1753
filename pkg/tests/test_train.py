import dataclasses

import numpy as np
import pytest
from conftest import SMALL

from gcnlstm.data import generate_synthetic_corpus
from gcnlstm.decoder import DecoderDims
from gcnlstm.inference import greedy
from gcnlstm.model import Branch, mean_nll
from gcnlstm.train import TrainConfig, TrainingError, train_branch
from gcnlstm.vocab import build_vocab


def test_loss_falls_over_200_iterations(small_corpus):
    res = train_branch(small_corpus, "spatial", TrainConfig(max_iters=201, **SMALL))
    assert res.losses[200][1] < res.losses[0][1]


def test_reported_loss_is_batch_mean_nll():
    scenes = generate_synthetic_corpus(5, 3, 32, seed=8)
    for s in scenes:
        s.captions = s.captions[:1]
    cfg = TrainConfig(max_iters=1, seed=3, **{**SMALL, "batch_size": 5})
    res = train_branch(scenes, "spatial", cfg)
    vocab = build_vocab(c for s in scenes for c in s.captions)
    fresh = Branch.init("spa", vocab, DecoderDims(vocab=len(vocab), **cfg.dims_kwargs), cfg.n_sem, np.random.default_rng(3))
    items = [(s, s.spatial_graph(), s.captions[0]) for s in scenes]
    assert abs(res.losses[0][1] - mean_nll(fresh, items).item()) <= 1e-10


def test_one_step_moves_encoder_parameters(small_corpus):
    cfg = TrainConfig(max_iters=1, **SMALL)
    before = train_branch(small_corpus, "spatial", dataclasses.replace(cfg, lr=1e-300)).branch.params
    after = train_branch(small_corpus, "spatial", cfg).branch.params
    moved = [n for n in before if n.startswith("gcn.") and not np.array_equal(before[n].data, after[n].data)]
    assert moved


def test_same_seed_same_checkpoint(small_corpus):
    cfg = TrainConfig(max_iters=5, **SMALL)
    a = train_branch(small_corpus, "semantic", cfg).branch.dumps()
    b = train_branch(small_corpus, "semantic", cfg).branch.dumps()
    assert a == b
    assert train_branch(small_corpus, "semantic", dataclasses.replace(cfg, seed=1)).branch.dumps() != a


def test_single_scene_memorised():
    scene = generate_synthetic_corpus(1, 4, 32, seed=21)[0]
    scene.captions = scene.captions[:1]
    hit = []

    def stop(it, loss, branch):
        if it % 25 == 24 and greedy(scene, {"spa": branch}, mode="spa").words == scene.captions[0]:
            hit.append(it)
            return True

    train_branch([scene], "spatial", TrainConfig(max_iters=2000, **SMALL), on_step=stop)
    assert hit


def test_nan_loss_names_iteration_and_scene():
    scenes = generate_synthetic_corpus(2, 3, 32, seed=0)
    scenes[1].features[0, 0] = np.nan
    with pytest.raises(TrainingError, match=r"iteration 0.*syn00001"):
        train_branch(scenes, "spatial", TrainConfig(max_iters=3, **{**SMALL, "batch_size": 2}))


def test_scene_checks(small_corpus):
    with pytest.raises(ValueError, match="k_max"):
        train_branch(small_corpus, "spatial", TrainConfig(k_max=2, **SMALL))
    with pytest.raises(ValueError, match="feature width"):
        train_branch(small_corpus, "spatial", TrainConfig(**{**SMALL, "d_v": 16}))
    with pytest.raises(ValueError, match="graph kind"):
        train_branch(small_corpus, "visual", TrainConfig(**SMALL))


def test_config_presets(tmp_path):
    assert TrainConfig.from_json({"preset": "full"}).d_h == 1000
    assert TrainConfig.from_json({"preset": "full", "d_h": 7}).d_h == 7
    assert TrainConfig.from_json({}).batch_size == 8
    with pytest.raises(ValueError, match="unknown config keys"):
        TrainConfig.from_json({"learning_rate": 1})
    with pytest.raises(ValueError, match="preset"):
        TrainConfig.from_json({"preset": "huge"})
    with pytest.raises(ValueError):
        TrainConfig(lr=0)


def test_loss_curve_csv(tmp_path, small_corpus):
    res = train_branch(small_corpus, "spatial", TrainConfig(max_iters=3, **SMALL))
    res.write_loss_curve(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "iteration,loss" and len(lines) == 4
    assert float(lines[1].split(",")[1]) == res.losses[0][1]


def test_gradient_clipping_bounds_update(small_corpus):
    res = train_branch(small_corpus, "spatial", TrainConfig(max_iters=2, grad_clip=1e-3, **SMALL))
    assert np.isfinite(res.losses[-1][1])
