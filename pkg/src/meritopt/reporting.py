"""Report generation from persisted campaign directories.

Reports are plain comma-separated text files with headers, plus one JSON
summary. Every number comes from a persisted record (dataset rows, iteration
log, diagnostics), so regenerating reports is idempotent and never retrains a
model.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .active_loop import DIAGNOSTICS_FILE, Campaign
from .design_space import VARIABLE_NAMES
from .errors import DatasetError, ValidationError
from .learners import KINDS
from .merit import TARGETS

REPORT_DIR = "report"
_MODEL_ROWS = list(KINDS) + ["super_learner"]


def r_squared(actual: np.ndarray, predicted: np.ndarray) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape or actual.ndim != 1 or len(actual) < 2:
        raise ValidationError(
            f"need two equal-length vectors of >= 2 values, "
            f"got {actual.shape} and {predicted.shape}"
        )
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValidationError("R-squared is undefined for a constant actual vector")
    ss_res = float(np.sum((actual - predicted) ** 2))
    return 1.0 - ss_res / ss_tot


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_diagnostics(directory: str) -> dict:
    path = os.path.join(directory, DIAGNOSTICS_FILE)
    if not os.path.exists(path):
        raise DatasetError(f"{directory}: no {DIAGNOSTICS_FILE}; run the campaign first")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_reports(directory: str) -> list[str]:
    """Emit every report file for one campaign directory; returns the paths."""
    campaign = Campaign.open(directory)
    if not campaign.records:
        raise DatasetError(f"{directory}: campaign has not evaluated anything yet")
    diagnostics = _load_diagnostics(directory)
    out_dir = os.path.join(directory, REPORT_DIR)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name: str, header: list[str], rows: list[list]):
        path = os.path.join(out_dir, name)
        _write_csv(path, header, rows)
        written.append(path)

    # Best design, its objectives, and its merit.
    best = campaign.dataset.best()
    rows = [["design", name, value] for name, value in zip(VARIABLE_NAMES, best.point.values)]
    rows += [["objective", name, value] for name, value in best.objectives.to_dict().items()]
    rows += [["merit", "merit", best.merit]]
    emit("best_design.csv", ["section", "name", "value"], rows)

    # Merit and surrogate gap per iteration.
    emit(
        "merit_epsilon.csv",
        ["iteration", "best_merit", "epsilon", "converged"],
        [
            [r.iteration, r.best_merit, r.epsilon, "yes" if r.converged else "no"]
            for r in campaign.records
        ],
    )

    # Out-of-fold R-squared at iteration 0: five learners plus the stack.
    cells = diagnostics["iteration0"]
    emit(
        "r_squared.csv",
        ["model"] + list(TARGETS),
        [
            [model] + [cells[target][model]["r_squared"] for target in TARGETS]
            for model in _MODEL_ROWS
        ],
    )

    # Default-vs-selected CVMSE per (target, learner) cell.
    emit(
        "cvmse.csv",
        ["target", "learner", "default_cvmse", "tuned_cvmse"],
        [
            [target, kind, cells[target][kind]["default_cvmse"], cells[target][kind]["cvmse"]]
            for target in TARGETS
            for kind in KINDS
        ],
    )

    # The hyperparameters each ensemble was trained with. Reports never
    # trigger tuning; a half-finished automlga campaign must be resumed first.
    if campaign.hyperparams is None:
        if campaign.config.mode == "automlga":
            raise DatasetError(
                f"{directory}: tuning has not completed; resume the campaign first"
            )
        from .learners import default_hyperparams

        campaign.hyperparams = {
            t: {kind: default_hyperparams(kind) for kind in KINDS} for t in TARGETS
        }
    emit(
        "tuned_hyperparameters.csv",
        ["target", "learner", "hyperparameter", "value"],
        [
            [target, kind, name, campaign.hyperparams[target][kind][name]]
            for target in TARGETS
            for kind in KINDS
            for name in campaign.hyperparams[target][kind]
        ],
    )

    state = campaign.state()
    summary = {
        "mode": campaign.config.mode,
        "seed": campaign.config.seed,
        "converged": state.converged,
        "iterations": state.iteration,
        "dataset_size": state.dataset_size,
        "best_merit": best.merit,
        "best_design": dict(zip(VARIABLE_NAMES, best.point.values)),
        "best_objectives": best.objectives.to_dict(),
        "best_merit_history": state.best_merit_history,
        "epsilon_history": state.epsilon_history,
    }
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def amse_report(trial_dirs: list[str]) -> list[list]:
    """Mean iteration-0 CVMSE across trial campaigns, default vs selected.

    Returns rows of (target, learner, default_amse, tuned_amse, n_trials).
    """
    if not trial_dirs:
        raise ValidationError("need at least one trial directory")
    per_trial = []
    for d in trial_dirs:
        cells = _load_diagnostics(d)["iteration0"]
        for target in TARGETS:
            for kind in KINDS:
                if target not in cells or kind not in cells[target]:
                    raise DatasetError(f"{d}: diagnostics missing cell {target}/{kind}")
        per_trial.append(cells)
    rows = []
    for target in TARGETS:
        for kind in KINDS:
            tuned = [c[target][kind]["cvmse"] for c in per_trial]
            default = [c[target][kind]["default_cvmse"] for c in per_trial]
            if any(v is None for v in tuned) or any(v is None for v in default):
                raise DatasetError(f"missing CVMSE values for {target}/{kind}")
            rows.append(
                [
                    target,
                    kind,
                    float(np.mean(default)),
                    float(np.mean(tuned)),
                    len(per_trial),
                ]
            )
    return rows


def write_amse(trial_dirs: list[str], out_path: str) -> str:
    rows = amse_report(trial_dirs)
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    _write_csv(out_path, ["target", "learner", "default_amse", "tuned_amse", "n_trials"], rows)
    return out_path
