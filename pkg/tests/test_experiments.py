import math

import numpy as np
import pytest

from cdsar import experiments
from cdsar.classify import confusion
from cdsar.config import ExperimentConfig


@pytest.fixture(scope="module")
def trained():
    cfg = ExperimentConfig(seed=3, train_size=200, eval_size=200)
    grid, prof = experiments.setting(cfg)
    th, _ = experiments.train_thresholds(cfg, grid, prof)
    return cfg, th


def test_discriminate_high_contrast_and_null(tmp_path, trained):
    cfg, th = trained
    th_path = tmp_path / "th.json"
    from cdsar.io import write_json_container

    write_json_container(str(th_path), "thresholds", {}, th.to_record())
    hi = experiments.run_discriminate(cfg.replace(q=0.8), str(tmp_path / "hi"), thresholds_path=str(th_path))
    truth = np.array(hi["truth"])
    assert np.mean(hi["basic"][truth == "t"] == "t") >= 0.9
    null = experiments.run_discriminate(cfg.replace(q=0.0), str(tmp_path / "null"), thresholds_path=str(th_path))
    assert np.mean(null["confidence"] == "uncertain") > 0.5


def test_uncertain_rate_falls_with_contrast(trained):
    cfg, th = trained
    grid, prof = experiments.setting(cfg)
    ls = experiments.l_samples(cfg, grid, prof, experiments.ROLE_EVAL, (0.2, 0.8), 400)
    lo = confusion(*ls[0.2], th)
    hi = confusion(*ls[0.8], th)
    for a, b in ((lo.r2_s, hi.r2_s), (lo.r2_t, hi.r2_t)):
        sd = math.sqrt(a * (1 - a) / 400 + b * (1 - b) / 400)
        assert a - b > 3 * sd


def test_crossing_value():
    cfg = ExperimentConfig(kappa=2.5, zeta_max=18 * math.pi)
    b = 22.957715847378367
    assert experiments.crossing_value(cfg, "zeta_max", b) == pytest.approx(b / 2.5)
    assert experiments.crossing_value(cfg, "kappa", b) == pytest.approx(b / (18 * math.pi))
