import itertools
import zlib

import numpy as np
import pytest

from rml_adapt.eval import (
    BeamConfig, RobustnessMatrix, beam_decode, beam_decode_batch, beam_search, greedy_decode, greedy_search,
    robustness_matrix,
)
from rml_adapt.model import EOS, MixTransformer, ModelConfig


def table_step(V, salt):
    """Deterministic pseudo-random next-token distribution per prefix."""
    def dist(prefix):
        rng = np.random.default_rng([salt, zlib.crc32(bytes(np.asarray(prefix, dtype=np.uint8)))])
        x = rng.normal(scale=2.0, size=V)
        return x - np.log(np.exp(x).sum())

    def step(rows, prefixes):
        return np.stack([dist(tuple(p)) for p in prefixes])

    return step, dist


def exhaustive_best(dist, V, limit):
    best = None
    for n in range(limit):
        for ids in itertools.product([t for t in range(V) if t != EOS], repeat=n):
            prefix = (1,)
            score = 0.0
            for t in ids + (EOS,):
                score += dist(prefix)[t]
                prefix += (t,)
            if best is None or score > best[1]:
                best = (list(ids), score)
    return best


@pytest.mark.parametrize("salt", range(20))
def test_wide_beam_matches_exhaustive_search(salt):
    V, limit = 5, 4
    step, dist = table_step(V, salt)
    hyp = beam_search(step, [limit], BeamConfig(beam_size=V ** limit))[0]
    ids, score = exhaustive_best(dist, V, limit)
    assert not hyp.truncated
    assert hyp.ids == ids
    assert hyp.logprob == pytest.approx(score, abs=1e-12)


@pytest.mark.parametrize("salt", range(20))
def test_beam_one_is_greedy_on_tables(salt):
    step, _ = table_step(6, salt)
    b = beam_search(step, [6], BeamConfig(beam_size=1))[0]
    g = greedy_search(step, 6)
    assert (b.ids, b.truncated) == (g.ids, g.truncated)
    assert b.logprob == pytest.approx(g.logprob, abs=1e-12)


def random_model(seed, mixed=True):
    cfg = ModelConfig(vocab_size=12, d_model=8, n_heads=2, d_ff=12, enc_layers=1, dec_layers=1,
                      k=2 if mixed else 1, mixed=mixed)
    model = MixTransformer(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    state = {k: v + rng.normal(scale=0.5, size=v.shape) for k, v in model.state().items()}
    model.load_state(state)
    return model


def test_beam_one_equals_greedy_on_100_random_models():
    rng = np.random.default_rng(0)
    config = BeamConfig(beam_size=1, max_length_offset=4)
    for seed in range(100):
        model = random_model(seed, mixed=bool(seed % 2))
        src = rng.integers(4, 12, size=int(rng.integers(1, 6))).tolist()
        b, g = beam_decode(model, src, config), greedy_decode(model, src, config)
        assert b.ids == g.ids and b.truncated == g.truncated
        assert b.logprob == pytest.approx(g.logprob, abs=1e-9)


def test_batched_decoding_matches_one_at_a_time():
    model = random_model(3)
    rng = np.random.default_rng(1)
    sources = [rng.integers(4, 12, size=int(rng.integers(1, 6))).tolist() for _ in range(7)]
    config = BeamConfig(beam_size=3, max_length_offset=3)
    batched = beam_decode_batch(model, sources, config, chunk=4)
    for src, hyp in zip(sources, batched):
        one = beam_decode(model, src, config)
        assert one.ids == hyp.ids
        assert one.logprob == pytest.approx(hyp.logprob, abs=1e-9)


def test_length_limit_and_truncation_flag():
    # a scorer that never wants EOS
    def step(rows, prefixes):
        out = np.full((len(rows), 6), -10.0)
        out[:, 4] = 0.0
        return out

    hyp = beam_search(step, [3], BeamConfig(beam_size=2))[0]
    assert hyp.truncated and hyp.ids == [4, 4, 4]
    assert BeamConfig(max_length=7).limit(100) == 7
    assert BeamConfig(max_length_offset=10).limit(5) == 15


def test_beam_config_errors():
    with pytest.raises(ValueError):
        BeamConfig(beam_size=0)
    with pytest.raises(ValueError):
        BeamConfig(max_length=0)
    with pytest.raises(ValueError):
        beam_decode_batch(random_model(0), [[]], BeamConfig())


def test_robustness_zero_when_every_model_is_the_reference():
    tests = {"a": (["x y", "y z"], ["x y", "y y"]), "b": (["z"], ["q"])}
    echo = lambda model, src: [f"{model} {s}" if model else s for s in src]
    rm = robustness_matrix({"a": "", "b": ""}, tests, "", echo)
    assert rm.avg_diff == 0.0
    assert rm.cells.shape == (2, 2)


def test_robustness_matrix_cells_and_average():
    tests = {"a": (["x y z w"], ["x y z w"]), "b": (["p q r s"], ["p q r s"])}
    # the model tuned on "a" translates only domain a correctly
    translate = lambda model, src: [s if model == "id" or s.startswith(model) else "k k k k" for s in src]
    rm = robustness_matrix({"a": "x", "b": "p"}, tests, "id", translate)
    np.testing.assert_allclose(rm.cells, [[100.0, 0.0], [0.0, 100.0]])
    np.testing.assert_allclose(rm.baseline, [100.0, 100.0])
    assert rm.avg_diff == pytest.approx(-50.0)
    assert isinstance(rm, RobustnessMatrix) and rm.to_dict()["avg_diff"] == pytest.approx(-50.0)
    with pytest.raises(ValueError, match="b"):
        robustness_matrix({"a": "x"}, tests, "id", translate)
