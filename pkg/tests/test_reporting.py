"""Report files, R-squared, and cross-trial CVMSE aggregation."""

import json
import os

import numpy as np
import pytest

from meritopt.active_loop import Campaign
from meritopt.config import CampaignConfig, GAConfig
from meritopt.errors import DatasetError, ValidationError
from meritopt.learners import KINDS
from meritopt.merit import TARGETS
from meritopt.reporting import REPORT_DIR, amse_report, r_squared, write_amse, write_reports


def test_r_squared_values():
    assert r_squared(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0])) == 0.5
    assert r_squared(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0])) == 1.0
    # Predicting the mean scores zero; anything worse goes negative.
    assert r_squared(np.array([1.0, 3.0]), np.array([2.0, 2.0])) == 0.0
    assert r_squared(np.array([1.0, 3.0]), np.array([3.0, 1.0])) < 0.0


def test_r_squared_validation():
    with pytest.raises(ValidationError, match="equal-length"):
        r_squared(np.array([1.0, 2.0]), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValidationError, match="equal-length"):
        r_squared(np.array([1.0]), np.array([1.0]))
    with pytest.raises(ValidationError, match="constant"):
        r_squared(np.array([2.0, 2.0]), np.array([1.0, 3.0]))


@pytest.fixture(scope="module")
def reported_campaign(tmp_path_factory):
    directory = str(tmp_path_factory.mktemp("reporting") / "run")
    config = CampaignConfig(
        mode="mlga",
        seed=6,
        initial_samples=10,
        batch_reps=2,
        max_batches=2,
        cv_folds=2,
        ga=GAConfig(population=16, generations=10),
    )
    campaign = Campaign.create(directory, config)
    campaign.run()
    paths = write_reports(directory)
    return directory, campaign, paths


def _read_rows(path):
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_report_files_written(reported_campaign):
    directory, _, paths = reported_campaign
    names = sorted(os.path.basename(p) for p in paths)
    assert names == [
        "best_design.csv",
        "cvmse.csv",
        "merit_epsilon.csv",
        "r_squared.csv",
        "summary.json",
        "tuned_hyperparameters.csv",
    ]
    for p in paths:
        assert os.path.dirname(p) == os.path.join(directory, REPORT_DIR)
        assert os.path.getsize(p) > 0


def test_best_design_report(reported_campaign):
    directory, campaign, _ = reported_campaign
    header, rows = _read_rows(os.path.join(directory, REPORT_DIR, "best_design.csv"))
    assert header == ["section", "name", "value"]
    sections = [r[0] for r in rows]
    assert sections == ["design"] * 9 + ["objective"] * 5 + ["merit"]
    best = campaign.dataset.best()
    merit_row = rows[-1]
    assert float(merit_row[2]) == best.merit
    design_values = [float(r[2]) for r in rows[:9]]
    assert tuple(design_values) == best.point.values


def test_merit_epsilon_report(reported_campaign):
    directory, campaign, _ = reported_campaign
    header, rows = _read_rows(os.path.join(directory, REPORT_DIR, "merit_epsilon.csv"))
    assert header == ["iteration", "best_merit", "epsilon", "converged"]
    assert [int(r[0]) for r in rows] == [0, 1, 2]
    # The initial-sample row has no surrogate gap.
    assert rows[0][2] == ""
    assert all(float(r[2]) >= 0.0 for r in rows[1:])
    assert [float(r[1]) for r in rows] == [rec.best_merit for rec in campaign.records]


def test_r_squared_report(reported_campaign):
    directory, _, _ = reported_campaign
    header, rows = _read_rows(os.path.join(directory, REPORT_DIR, "r_squared.csv"))
    assert header == ["model"] + list(TARGETS)
    assert [r[0] for r in rows] == list(KINDS) + ["super_learner"]
    for row in rows:
        for cell in row[1:]:
            assert cell == "" or float(cell) <= 1.0


def test_cvmse_report_covers_every_cell(reported_campaign):
    directory, _, _ = reported_campaign
    header, rows = _read_rows(os.path.join(directory, REPORT_DIR, "cvmse.csv"))
    assert header == ["target", "learner", "default_cvmse", "tuned_cvmse"]
    assert [(r[0], r[1]) for r in rows] == [(t, k) for t in TARGETS for k in KINDS]
    # Default-hyperparameter mode: the tuned column is the default column.
    for row in rows:
        assert row[2] == row[3]


def test_hyperparameter_report_lists_defaults(reported_campaign):
    directory, _, _ = reported_campaign
    header, rows = _read_rows(
        os.path.join(directory, REPORT_DIR, "tuned_hyperparameters.csv")
    )
    assert header == ["target", "learner", "hyperparameter", "value"]
    cells = {(r[0], r[1]) for r in rows}
    assert cells == {(t, k) for t in TARGETS for k in KINDS}
    gbt_trees = [r for r in rows if r[1] == "gbt" and r[2] == "n_trees"]
    assert len(gbt_trees) == len(TARGETS)
    assert all(float(r[3]) == 1000 for r in gbt_trees)


def test_summary_report(reported_campaign):
    directory, campaign, _ = reported_campaign
    with open(os.path.join(directory, REPORT_DIR, "summary.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    assert summary["mode"] == "mlga"
    assert summary["seed"] == 6
    assert summary["converged"] is False
    assert summary["iterations"] == 2
    assert summary["dataset_size"] == 14
    assert summary["best_merit"] == campaign.dataset.best().merit
    assert len(summary["best_merit_history"]) == 3
    assert len(summary["epsilon_history"]) == 2


def test_reports_are_idempotent(reported_campaign):
    directory, _, paths = reported_campaign
    before = {p: open(p, "rb").read() for p in paths}
    write_reports(directory)
    after = {p: open(p, "rb").read() for p in paths}
    assert before == after


def test_reports_require_evaluations(tmp_path):
    directory = str(tmp_path / "fresh")
    Campaign.create(directory, CampaignConfig(initial_samples=10, cv_folds=2))
    with pytest.raises(DatasetError, match="has not evaluated"):
        write_reports(directory)


# -- cross-trial aggregation ----------------------------------------------------


def _write_diagnostics(directory, cvmse, default_cvmse, drop=None):
    os.makedirs(directory, exist_ok=True)
    cells = {}
    for target in TARGETS:
        cells[target] = {}
        for kind in KINDS:
            if drop == (target, kind):
                continue
            cells[target][kind] = {
                "cvmse": cvmse,
                "default_cvmse": default_cvmse,
                "r_squared": 0.9,
            }
    payload = {"mode": "automlga", "iteration0": cells}
    with open(os.path.join(directory, "diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def test_amse_report_averages_across_trials(tmp_path):
    d1, d2 = str(tmp_path / "t1"), str(tmp_path / "t2")
    _write_diagnostics(d1, cvmse=1.0, default_cvmse=2.0)
    _write_diagnostics(d2, cvmse=3.0, default_cvmse=4.0)
    rows = amse_report([d1, d2])
    assert len(rows) == len(TARGETS) * len(KINDS)
    for target, kind, default_amse, tuned_amse, n in rows:
        assert (default_amse, tuned_amse, n) == (3.0, 2.0, 2)


def test_amse_report_errors(tmp_path):
    with pytest.raises(ValidationError, match="at least one"):
        amse_report([])
    incomplete = str(tmp_path / "broken")
    _write_diagnostics(incomplete, 1.0, 2.0, drop=("isfc", "svr"))
    with pytest.raises(DatasetError, match="missing cell isfc/svr"):
        amse_report([incomplete])
    with pytest.raises(DatasetError, match="diagnostics.json"):
        amse_report([str(tmp_path / "absent")])


def test_write_amse(tmp_path):
    d = str(tmp_path / "t1")
    _write_diagnostics(d, cvmse=0.5, default_cvmse=1.5)
    out = write_amse([d], str(tmp_path / "out" / "amse.csv"))
    header, rows = _read_rows(out)
    assert header == ["target", "learner", "default_amse", "tuned_amse", "n_trials"]
    assert len(rows) == 25
    assert all(float(r[2]) == 1.5 and float(r[3]) == 0.5 for r in rows)
