import math

import pytest

import ckpl


def test_closed_forms():
    p = ckpl.softmax_with_temperature([1.0, 0.0], 0.1)
    assert abs(p[0] - 1.0 / (1.0 + math.exp(-10.0))) < 1e-12
    assert abs(ckpl.cosine_similarity([1, 2, 3], [4, 5, 6]) - 32 / math.sqrt(14 * 77)) < 1e-12
    assert abs(ckpl.ckg_loss([0.5, 0.5], 0, 1) - 1.38629436) < 1e-6
    assert ckpl.ckg_loss([1.0, 0.0], 0, 0) == pytest.approx(0.0, abs=1e-12)
    assert abs(ckpl.difficulty([1, 0], [1, 1]) - (1 - 1 / math.sqrt(2))) < 1e-12
    assert ckpl.cosine_lr(50, 100, 0.003, 0.0001) == pytest.approx(0.00155, abs=1e-12)


def test_errors_map_to_value_error():
    with pytest.raises(ckpl.CkplError):
        ckpl.softmax_with_temperature([1.0], 0.0)
    with pytest.raises(ValueError):
        ckpl.ckg_loss([0.5, 0.5], 3, 0)


def test_gradient_check():
    r = ckpl.check_objective_gradients(1)
    assert r["ckg"]["passed"] and r["total"]["passed"]
    assert r["total"]["max_rel_error"] < 1e-3


def test_config_text_round_trip():
    c = ckpl.ExperimentConfig()
    c.mode = ckpl.Mode.EASY_TO_HARD
    c.shots = 8
    c.train.lambda_ = 0.5
    c.sweep_lambda = [0.1, 0.2]
    text = c.to_text()
    back = ckpl.ExperimentConfig.from_text(text)
    assert back.to_text() == text
    assert back.train.lambda_ == 0.5
    with pytest.raises(ckpl.CkplError):
        ckpl.ExperimentConfig.from_text("CKPL-CONFIG-v1\nnope = 1\n")


def test_run_and_eval(tmp_path):
    c = ckpl.ExperimentConfig()
    c.task.samples_per_class = 20
    c.train.epochs = 2
    c.shots = 4
    c.output_dir = str(tmp_path / "run")
    s = ckpl.run(c)
    assert s["base_sha256_before"] == s["base_sha256_after"]
    m = s["metrics"]["fewshot"]
    assert 0.0 <= m["accuracy"] <= 1.0
    ev = ckpl.evaluate_run(tmp_path / "run")
    assert ev["accuracy"] == m["accuracy"]
    assert (tmp_path / "run" / "metrics.csv").exists()


def test_base_error_band():
    spec = ckpl.SyntheticTaskSpec()
    spec.seed = 1
    assert 0.2 <= ckpl.base_error(spec) <= 0.6
