"""Batched active-learning campaign over an expensive evaluator.

One campaign: evaluate a space-filling initial sample, tune hyperparameters
once (in ``automlga`` mode), then iterate: train ``batch_reps`` independent
stacked surrogates, let a GA find each one's predicted-merit optimum, evaluate
the proposed designs, and stop when the surrogate's error at the batch's best
point stays below a threshold for a full window of iterations with no merit
improvement.

Every artifact is persisted as it is produced (dataset rows, tuned table,
iteration log, the pending proposal batch), so a killed campaign resumes on
the exact trajectory an uninterrupted run would have taken.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .config import CampaignConfig, read_file, write_file
from .design_space import DesignPoint, denormalize, denormalize_batch, lhs_mdu_sample, normalize
from .errors import (
    BatchEvaluationError,
    ConfigError,
    DatasetError,
    TrainingError,
    ValidationError,
)
from .evaluators import (
    Dataset,
    DatasetFile,
    EvaluatedSample,
    ExternalCommandEvaluator,
    VirtualEngine,
    evaluate_batch,
    load_dataset,
)
from .genetic import optimize as ga_optimize
from .hyper_tuner import hyperparameter_table, tune_all
from .learners import HYPERPARAMETER_SCHEMA, KINDS, decode_hyperparams, default_hyperparams
from .merit import TARGETS
from .seeding import (
    PHASE_DIAGNOSTICS,
    PHASE_EVALUATION,
    PHASE_INITIAL_SAMPLE,
    PHASE_ITERATION,
    PHASE_TUNING,
    child_seed,
    rng_for,
)
from .super_learner import cv_mse, kfold_split, train_super_learner

CONFIG_FILE = "config.snapshot"
DATASET_FILE = "dataset.samples"
TUNED_FILE = "tuned_hyperparameters.table"
ITERATIONS_FILE = "iterations.table"
DIAGNOSTICS_FILE = "diagnostics.json"
PENDING_FILE = "pending_batch.json"

# Proposals must sit at least this far apart (and from every dataset point),
# measured as Euclidean distance between normalized, decoded designs.
MIN_PROPOSAL_DISTANCE = 1e-3
_RESEED_ATTEMPTS = 10
_PERTURB_SIGMA = 0.01
_PERTURB_TRIES = 1000


@dataclass(frozen=True)
class Proposal:
    """One surrogate-optimum candidate: which repetition proposed it, where,
    and the proposing ensemble's own merit prediction there."""

    rep: int
    point: DesignPoint
    predicted_merit: float

    def to_dict(self) -> dict:
        return {
            "rep": self.rep,
            "values": list(self.point.values),
            "predicted_merit": self.predicted_merit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Proposal":
        return cls(
            rep=int(data["rep"]),
            point=DesignPoint(tuple(data["values"])),
            predicted_merit=float(data["predicted_merit"]),
        )


@dataclass
class IterationRecord:
    iteration: int
    best_merit: float
    epsilon: float | None  # None for the initial sample row
    converged: bool


@dataclass
class LoopState:
    """Summary of where a campaign stands."""

    iteration: int
    dataset_size: int
    best_merit_history: list[float]
    epsilon_history: list[float]
    convergence_streak: int
    converged: bool

    @property
    def best_merit(self) -> float:
        return self.best_merit_history[-1]


def convergence_streak(
    epsilon_history,
    best_merit_history,
    threshold: float,
    improvement_delta: float,
    window: int = 4,
) -> int:
    """Length of the qualifying trailing run, capped at ``window``.

    Iteration j qualifies while every epsilon in the trailing run is below
    ``threshold`` and the best merit gained less than ``improvement_delta``
    over that run; a large epsilon or a real improvement resets the streak.
    ``best_merit_history`` carries one leading entry for the initial sample,
    so epsilon i pairs with best_merit_history[i + 1].
    """
    eps = list(epsilon_history)
    merits = list(best_merit_history)
    if len(merits) != len(eps) + 1:
        raise ValidationError(
            f"need len(best_merit_history) == len(epsilon_history) + 1, "
            f"got {len(merits)} and {len(eps)}"
        )
    streak = 0
    for k in range(1, min(window, len(eps)) + 1):
        if any(e >= threshold for e in eps[-k:]):
            break
        if merits[-1] - merits[-1 - k] >= improvement_delta:
            break
        streak = k
    return streak


def check_convergence(
    epsilon_history,
    best_merit_history,
    threshold: float = 1e-3,
    improvement_delta: float = 1e-6,
    window: int = 4,
) -> bool:
    """True iff the last ``window`` iterations all kept the surrogate gap
    below ``threshold`` while the best merit stayed flat."""
    return (
        convergence_streak(
            epsilon_history, best_merit_history, threshold, improvement_delta, window
        )
        >= window
    )


def compute_epsilon(proposals: list[Proposal], samples: list[EvaluatedSample]) -> float:
    """Surrogate gap at the batch point with the highest actual merit.

    The prediction compared against is the one made by the ensemble that
    proposed that specific point.
    """
    if not proposals or len(proposals) != len(samples):
        raise ValidationError(
            f"need matching nonempty proposals and samples, "
            f"got {len(proposals)} and {len(samples)}"
        )
    best = int(np.argmax([s.merit for s in samples]))
    return abs(proposals[best].predicted_merit - samples[best].merit)


def _decoded_unit(space, u: np.ndarray) -> np.ndarray:
    """Normalized coordinates of the decoded (integer-rounded) design."""
    return normalize(space, denormalize(space, u))


def propose_batch(
    dataset: Dataset,
    hyperparams: dict[str, dict[str, dict]],
    config: CampaignConfig,
    iteration: int,
    root_seed: int,
    optimizer=ga_optimize,
) -> list[Proposal]:
    """Propose ``batch_reps`` distinct surrogate optima.

    Each repetition retrains the full stacked surrogate under its own seed and
    maximizes its predicted merit with the GA. A proposal too close to the
    dataset or to an earlier repetition (below MIN_PROPOSAL_DISTANCE in
    normalized coordinates) is retried with fresh GA seeds, then separated by
    clamped Gaussian perturbation as a last resort.
    """
    space = config.space
    constants = config.constants
    X = dataset.design_matrix()
    Y = dataset.target_matrix()
    forbidden = [normalize(space, row) for row in X]

    def too_close(u: np.ndarray) -> bool:
        if not forbidden:
            return False
        d = np.linalg.norm(np.asarray(forbidden) - u, axis=1)
        return bool(np.min(d) < MIN_PROPOSAL_DISTANCE)

    proposals = []
    for rep in range(config.batch_reps):
        rep_seed = child_seed(root_seed, PHASE_ITERATION, iteration, rep)
        model = train_super_learner(
            X, Y, hyperparams, seed=rep_seed, k=config.cv_folds
        )

        def fitness(P: np.ndarray) -> np.ndarray:
            return model.predict_merit(denormalize_batch(space, P), constants)

        result = optimizer(fitness, len(space.variables), config.ga, child_seed(rep_seed, 9))
        u = _decoded_unit(space, result.best)
        attempt = 0
        while too_close(u) and attempt < _RESEED_ATTEMPTS:
            result = optimizer(
                fitness, len(space.variables), config.ga, child_seed(rep_seed, 10 + attempt)
            )
            u = _decoded_unit(space, result.best)
            attempt += 1
        if too_close(u):
            rng = rng_for(rep_seed, 20)
            for _ in range(_PERTURB_TRIES):
                candidate = np.clip(
                    u + _PERTURB_SIGMA * rng.standard_normal(len(u)), 0.0, 1.0
                )
                candidate = _decoded_unit(space, candidate)
                if not too_close(candidate):
                    u = candidate
                    break
            else:
                raise TrainingError(
                    f"iteration {iteration} rep {rep}: could not separate proposal"
                )
        point = denormalize(space, u)
        predicted = float(model.predict_merit(point.as_array(), constants)[0])
        proposals.append(Proposal(rep=rep, point=point, predicted_merit=predicted))
        forbidden.append(u)
    return proposals


def _write_atomic(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _format_float(v: float) -> str:
    return repr(float(v))


class Campaign:
    """A campaign directory plus the in-memory state loaded from it."""

    def __init__(self, directory: str, config: CampaignConfig):
        self.directory = directory
        self.config = config
        self.space = config.space
        self.constants = config.constants
        if config.evaluator_command:
            self.evaluator = ExternalCommandEvaluator(
                config.evaluator_command,
                space=self.space,
                timeout=config.evaluator_timeout,
            )
        else:
            self.evaluator = VirtualEngine(self.space)
        self.dataset = Dataset(self.space, self.constants)
        self.records: list[IterationRecord] = []
        self.hyperparams: dict | None = None
        self._tune_results = None

    # -- construction ------------------------------------------------------

    @classmethod
    def create(cls, directory: str, config: CampaignConfig) -> "Campaign":
        os.makedirs(directory, exist_ok=True)
        snapshot = os.path.join(directory, CONFIG_FILE)
        if os.path.exists(snapshot):
            raise ConfigError(
                f"{directory} already holds a campaign; open it instead"
            )
        write_file(config, snapshot)
        return cls(directory, config)

    @classmethod
    def open(cls, directory: str) -> "Campaign":
        snapshot = os.path.join(directory, CONFIG_FILE)
        if not os.path.exists(snapshot):
            raise ConfigError(f"{directory} is not a campaign directory (no {CONFIG_FILE})")
        campaign = cls(directory, read_file(snapshot))
        campaign._load()
        return campaign

    def _path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    def _load(self):
        if os.path.exists(self._path(DATASET_FILE)):
            self.dataset = load_dataset(
                self._path(DATASET_FILE), self.space, self.constants
            )
        self.records = self._read_iterations()
        if os.path.exists(self._path(TUNED_FILE)):
            self.hyperparams = self._read_tuned_table()
        elif self.config.mode == "mlga":
            self.hyperparams = None  # filled with defaults on run()

    # -- persisted tables ---------------------------------------------------

    def _read_iterations(self) -> list[IterationRecord]:
        path = self._path(ITERATIONS_FILE)
        if not os.path.exists(path):
            return []
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
        for line in lines[1:]:  # header row first
            parts = line.split()
            if len(parts) != 4:
                raise DatasetError(f"{ITERATIONS_FILE}: malformed row {line!r}")
            records.append(
                IterationRecord(
                    iteration=int(parts[0]),
                    best_merit=float(parts[1]),
                    epsilon=None if parts[2] == "-" else float(parts[2]),
                    converged=parts[3] == "yes",
                )
            )
        return records

    def _append_iteration(self, record: IterationRecord):
        path = self._path(ITERATIONS_FILE)
        if not os.path.exists(path):
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("iteration best_merit epsilon converged\n")
        eps = "-" if record.epsilon is None else _format_float(record.epsilon)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(
                f"{record.iteration} {_format_float(record.best_merit)} "
                f"{eps} {'yes' if record.converged else 'no'}\n"
            )
            fh.flush()
            os.fsync(fh.fileno())
        self.records.append(record)

    def _write_tuned_table(self, raw_table: dict[str, dict[str, dict[str, float]]]):
        lines = ["target kind name raw"]
        for target in TARGETS:
            for kind in KINDS:
                for name, value in raw_table[target][kind].items():
                    lines.append(f"{target} {kind} {name} {_format_float(value)}")
        _write_atomic(self._path(TUNED_FILE), "\n".join(lines) + "\n")

    def _read_tuned_table(self) -> dict[str, dict[str, dict]]:
        with open(self._path(TUNED_FILE), "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
        raw: dict[str, dict[str, dict[str, float]]] = {}
        for line in lines[1:]:
            parts = line.split()
            if len(parts) != 4:
                raise DatasetError(f"{TUNED_FILE}: malformed row {line!r}")
            target, kind, name, value = parts
            raw.setdefault(target, {}).setdefault(kind, {})[name] = float(value)
        table: dict[str, dict[str, dict]] = {}
        for target in TARGETS:
            table[target] = {}
            for kind in KINDS:
                specs = HYPERPARAMETER_SCHEMA[kind]
                try:
                    vec = [raw[target][kind][spec.name] for spec in specs]
                except KeyError as exc:
                    raise DatasetError(
                        f"{TUNED_FILE}: missing entry for {target}/{kind}: {exc}"
                    ) from exc
                table[target][kind] = decode_hyperparams(kind, vec)
        return table

    def _read_pending(self) -> tuple[int, list[Proposal]] | None:
        path = self._path(PENDING_FILE)
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return int(data["iteration"]), [Proposal.from_dict(p) for p in data["proposals"]]

    def _write_pending(self, iteration: int, proposals: list[Proposal]):
        payload = {
            "iteration": iteration,
            "proposals": [p.to_dict() for p in proposals],
        }
        _write_atomic(self._path(PENDING_FILE), json.dumps(payload, indent=2) + "\n")

    def _clear_pending(self):
        path = self._path(PENDING_FILE)
        if os.path.exists(path):
            os.remove(path)

    # -- evaluation with contiguous-prefix persistence -----------------------

    def _persist(self, sample: EvaluatedSample, sink: DatasetFile):
        sink.append(sample)
        self.dataset.append(sample)

    def _evaluate_and_persist(
        self, points: list[DesignPoint], iteration: int, first_index: int
    ) -> list[EvaluatedSample]:
        """Evaluate in order; on failure persist only the contiguous prefix of
        successes so a resumed run re-evaluates from the first gap."""
        seeds = [
            child_seed(self.config.seed, PHASE_EVALUATION, iteration, first_index + j)
            for j in range(len(points))
        ]
        sink = DatasetFile(self._path(DATASET_FILE), self.space, self.constants)
        try:
            samples = evaluate_batch(
                points,
                self.evaluator,
                self.constants,
                iteration=iteration,
                space=self.space,
                eval_seeds=seeds,
            )
        except BatchEvaluationError as exc:
            completed = dict(exc.completed)
            first_fail = min(exc.failed_indices)
            for idx in range(first_fail):
                if idx in completed:
                    self._persist(completed[idx], sink)
            raise
        for sample in samples:
            self._persist(sample, sink)
        return samples

    # -- campaign phases ------------------------------------------------------

    def _samples_at(self, iteration: int) -> list[EvaluatedSample]:
        return [s for s in self.dataset.samples if s.iteration == iteration]

    def _dataset_before(self, iteration: int) -> Dataset:
        subset = Dataset(self.space, self.constants)
        for s in self.dataset.samples:
            if s.iteration < iteration:
                subset.append(s)
        return subset

    def _ensure_initial_sample(self):
        have = self._samples_at(0)
        need = self.config.initial_samples
        if len(have) < need:
            points = lhs_mdu_sample(
                self.space, need, seed=child_seed(self.config.seed, PHASE_INITIAL_SAMPLE)
            )
            self._evaluate_and_persist(points[len(have) :], 0, first_index=len(have))
        if not self.records:
            self._append_iteration(
                IterationRecord(0, self.dataset.best().merit, None, False)
            )

    def _ensure_hyperparams(self):
        if self.hyperparams is not None:
            return
        if self.config.mode == "mlga":
            self.hyperparams = {
                t: {kind: default_hyperparams(kind) for kind in KINDS} for t in TARGETS
            }
            return
        initial = self._dataset_before(1)
        results = tune_all(
            initial.design_matrix(),
            initial.target_matrix(),
            seed=child_seed(self.config.seed, PHASE_TUNING),
            budget=self.config.tuning,
            k=self.config.cv_folds,
        )
        self._tune_results = results
        self._write_tuned_table(
            {t: {k: results[t][k].raw for k in KINDS} for t in TARGETS}
        )
        self.hyperparams = hyperparameter_table(results)

    def _ensure_diagnostics(self):
        """Per-learner and stacked CVMSE / R-squared on the initial sample,
        plus the default-hyperparameter baseline (identical folds and seeds).

        Persisted once at run time so report generation never retrains."""
        path = self._path(DIAGNOSTICS_FILE)
        if os.path.exists(path):
            return
        initial = self._dataset_before(1)
        X = initial.design_matrix()
        Y = initial.target_matrix()
        cells: dict[str, dict[str, dict]] = {t: {} for t in TARGETS}
        if self._tune_results is not None:
            for t_idx, target in enumerate(TARGETS):
                var = float(np.var(Y[:, t_idx]))
                for kind in KINDS:
                    res = self._tune_results[target][kind]
                    cells[target][kind] = {
                        "cvmse": res.cvmse,
                        "default_cvmse": res.default_cvmse,
                        "r_squared": 1.0 - res.cvmse / var if var > 0 else None,
                    }
        else:
            # Recompute on the exact fold split and seeds tuning would use.
            tuning_seed = child_seed(self.config.seed, PHASE_TUNING)
            folds = kfold_split(len(X), self.config.cv_folds, child_seed(tuning_seed, 0))
            cell = 0
            for t_idx, target in enumerate(TARGETS):
                y = Y[:, t_idx]
                var = float(np.var(y))
                for kind in KINDS:
                    mse = cv_mse(
                        kind,
                        X,
                        y,
                        self.hyperparams[target][kind],
                        folds,
                        child_seed(tuning_seed, 2, cell),
                    )
                    default_mse = (
                        mse
                        if self.config.mode == "mlga"
                        else cv_mse(
                            kind,
                            X,
                            y,
                            default_hyperparams(kind),
                            folds,
                            child_seed(tuning_seed, 2, cell),
                        )
                    )
                    cells[target][kind] = {
                        "cvmse": mse,
                        "default_cvmse": default_mse,
                        "r_squared": 1.0 - mse / var if var > 0 else None,
                    }
                    cell += 1
        # The stacked ensemble's own out-of-fold quality, one row per target.
        stacked = train_super_learner(
            X,
            Y,
            self.hyperparams,
            seed=child_seed(self.config.seed, PHASE_DIAGNOSTICS),
            k=self.config.cv_folds,
        )
        for t_idx, target in enumerate(TARGETS):
            var = float(np.var(Y[:, t_idx]))
            mse = stacked.ensembles[target].stacked_oof_mse
            cells[target]["super_learner"] = {
                "cvmse": mse,
                "default_cvmse": None,
                "r_squared": 1.0 - mse / var if var > 0 else None,
            }
        payload = {"mode": self.config.mode, "iteration0": cells}
        _write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def _run_iteration(self, iteration: int):
        pending = self._read_pending()
        if pending is not None and pending[0] == iteration:
            proposals = pending[1]
        else:
            proposals = propose_batch(
                self._dataset_before(iteration),
                self.hyperparams,
                self.config,
                iteration,
                self.config.seed,
            )
            self._write_pending(iteration, proposals)
        done = self._samples_at(iteration)
        todo = proposals[len(done) :]
        if todo:
            self._evaluate_and_persist(
                [p.point for p in todo], iteration, first_index=len(done)
            )
        samples = self._samples_at(iteration)
        epsilon = compute_epsilon(proposals, samples)
        best_merit = self.dataset.best().merit
        eps_history = [r.epsilon for r in self.records if r.epsilon is not None] + [epsilon]
        merit_history = [r.best_merit for r in self.records] + [best_merit]
        converged = check_convergence(
            eps_history,
            merit_history,
            threshold=self.config.epsilon_threshold,
            improvement_delta=self.config.improvement_delta,
            window=self.config.convergence_window,
        )
        self._append_iteration(IterationRecord(iteration, best_merit, epsilon, converged))
        self._clear_pending()

    # -- public driving -------------------------------------------------------

    def state(self) -> LoopState:
        merit_history = [r.best_merit for r in self.records]
        eps_history = [r.epsilon for r in self.records if r.epsilon is not None]
        converged = bool(self.records and self.records[-1].converged)
        streak = (
            convergence_streak(
                eps_history,
                merit_history,
                self.config.epsilon_threshold,
                self.config.improvement_delta,
                self.config.convergence_window,
            )
            if merit_history
            else 0
        )
        return LoopState(
            iteration=self.records[-1].iteration if self.records else -1,
            dataset_size=len(self.dataset.samples),
            best_merit_history=merit_history,
            epsilon_history=eps_history,
            convergence_streak=streak,
            converged=converged,
        )

    def run(self, max_new_iterations: int | None = None, progress=None) -> LoopState:
        """Advance the campaign until convergence, the batch cap, or the given
        number of additional iterations; safe to call again after a halt."""
        self._ensure_initial_sample()
        self._ensure_hyperparams()
        self._ensure_diagnostics()
        if progress:
            progress(self.state())
        remaining = max_new_iterations
        while not (self.records and self.records[-1].converged):
            next_iteration = self.records[-1].iteration + 1
            if next_iteration > self.config.max_batches:
                break
            if remaining is not None:
                if remaining <= 0:
                    break
                remaining -= 1
            self._run_iteration(next_iteration)
            if progress:
                progress(self.state())
        return self.state()


def run_campaign(
    directory: str, config: CampaignConfig, progress=None
) -> LoopState:
    """Create (or reopen) a campaign in ``directory`` and drive it to the end.

    Reopening requires the given config to match the persisted snapshot, so a
    campaign can never silently continue under different settings.
    """
    snapshot = os.path.join(directory, CONFIG_FILE)
    if os.path.exists(snapshot):
        campaign = Campaign.open(directory)
        from .config import to_text

        if to_text(campaign.config) != to_text(config):
            raise ConfigError(
                f"{directory} was started with different settings; "
                "resume it without a config, or use a fresh directory"
            )
    else:
        campaign = Campaign.create(directory, config)
    return campaign.run(progress=progress)


def resume_campaign(directory: str, progress=None) -> LoopState:
    """Continue a halted campaign from its persisted state."""
    return Campaign.open(directory).run(progress=progress)
