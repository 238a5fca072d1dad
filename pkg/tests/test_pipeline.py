import csv
import json

import numpy as np
import pytest

from ksoscp.cli import run_command
from ksoscp.config import RunConfig, apply_overrides
from ksoscp.metrics import marginal_coverage
from ksoscp.pipeline import fixed_theta, run_pipeline, split_data


def test_fixed_theta_rules():
    cfg = RunConfig()
    train = split_data(apply_overrides(cfg, {"n": 20}))[0]
    lo, hi = 0.05 * np.ptp(train.X), np.ptp(train.X)
    assert fixed_theta(cfg, train) == pytest.approx((np.sqrt(lo * hi),))
    assert fixed_theta(apply_overrides(cfg, {"tuning.theta_f": "0.4"}), train) == (0.4,)


def test_case1_coverage_over_seeds():
    cov = []
    for seed in range(20):
        cfg = apply_overrides(RunConfig(), {"seed": seed, "tuning.enabled": False})
        train, calib, test = split_data(cfg)
        cov.append(marginal_coverage(run_pipeline(cfg, (train, calib)).calibrated, test))
    assert 0.88 <= np.mean(cov) <= 0.95


def test_pipeline_band_covers_pretraining(tmp_path):
    assert run_command(["pipeline", "--case", "1", "--n", "100", "--m", "200",
                        "--alpha", "0.1", "--seed", "3", "--theta-f", "0.4",
                        "--n-X", "5", "--n-Y", "20", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "band.csv", newline="") as fh:
        band = np.array([[float(v) for v in r] for r in list(csv.reader(fh))[1:]])
    with open(tmp_path / "train.csv", newline="") as fh:
        train = np.array([[float(v) for v in r] for r in list(csv.reader(fh))[1:]])
    assert band.shape == (100, 4)
    # band rows are sorted by x; match them to the training pairs
    train = train[np.argsort(train[:, 0], kind="stable")]
    np.testing.assert_array_equal(band[:, 0], train[:, 0])
    x, m_hat, lo, hi = band.T
    y = train[:, 1]
    q_hat = json.loads((tmp_path / "calibrated.json").read_text())["q_hat"]
    assert 0 < q_hat < np.inf
    # the band is m_hat +- sqrt(q_hat f); the fitted f satisfies the training
    # constraints to the solver's relative tolerance
    f = ((hi - lo) / 2) ** 2 / q_hat
    assert np.all(lo <= m_hat) and np.all(m_hat <= hi)
    assert np.all((y - m_hat) ** 2 - f <= 1e-4 * (1 + (y - m_hat) ** 2))
