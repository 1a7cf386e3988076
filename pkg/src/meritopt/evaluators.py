"""Design evaluation: the built-in synthetic engine model, the external
process protocol, batched evaluation, and the on-disk dataset format.

The dataset file is newline-delimited JSON. The first line is a header
carrying the design-space bounds and the merit constants in force; every
following line is one evaluated sample. Appends are flushed immediately so a
killed campaign never loses a finished evaluation.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .design_space import DesignPoint, DesignSpace, denormalize_batch, normalize, validate
from .errors import (
    BatchEvaluationError,
    DatasetError,
    EvaluationTimeout,
    EvaluatorError,
    MeritoptError,
    ProtocolError,
    ValidationError,
)
from .merit import TARGETS, MeritConstants, ObjectiveVector, merit

_HEADER_FORMAT = "meritopt-dataset-v1"

# Synthetic engine response surface, defined on the normalized unit cube.
_VE_WEIGHTS = np.array([0.6, 1.0, 1.2, 1.4, 0.8, 1.1, 0.9, 1.3, 0.7])
_VE_CENTER = np.array([0.8, 0.4, 0.7, 0.35, 0.6, 0.55, 0.45, 0.65, 0.5])


@dataclass(frozen=True)
class EvaluatedSample:
    """One evaluated design with its outputs and bookkeeping fields."""

    point: DesignPoint
    objectives: ObjectiveVector
    merit: float
    iteration: int
    evaluator_id: str
    eval_seed: int = 0

    def to_json(self) -> str:
        rec = {
            "point": list(self.point.values),
            "objectives": self.objectives.to_dict(),
            "merit": self.merit,
            "iteration": self.iteration,
            "evaluator_id": self.evaluator_id,
            "eval_seed": self.eval_seed,
        }
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "EvaluatedSample":
        rec = json.loads(line)
        return cls(
            point=DesignPoint(tuple(rec["point"])),
            objectives=ObjectiveVector(**rec["objectives"]),
            merit=float(rec["merit"]),
            iteration=int(rec["iteration"]),
            evaluator_id=str(rec["evaluator_id"]),
            eval_seed=int(rec["eval_seed"]),
        )


class VirtualEngine:
    """Deterministic closed-form stand-in for an expensive engine simulation.

    All five outputs are smooth functions of the normalized design ``u``:
    a weighted quadratic bowl ``q`` drives fuel consumption up and NOx down,
    so the merit optimum sits on the NOx constraint boundary.
    """

    evaluator_id = "virtual"

    def __init__(self, space: DesignSpace | None = None):
        self.space = space or DesignSpace()

    def __call__(self, point: DesignPoint) -> ObjectiveVector:
        u = normalize(self.space, point)
        isfc, m_soot, m_nox, mprr, pmax = (float(v[0]) for v in self.outputs(u[None, :]))
        return ObjectiveVector(isfc=isfc, m_soot=m_soot, m_nox=m_nox, mprr=mprr, pmax=pmax)

    @staticmethod
    def outputs(U: np.ndarray) -> tuple[np.ndarray, ...]:
        """Vectorized outputs for an (m, 9) array of normalized designs."""
        U = np.asarray(U, dtype=float)
        q = np.sum(_VE_WEIGHTS * (U - _VE_CENTER) ** 2, axis=-1)
        isfc = 150.0 + 18.0 * q + 2.0 * (U[..., 3] - 0.5) * (U[..., 5] - 0.5)
        m_nox = 0.5 + 1.1 * np.exp(-3.0 * q)
        m_soot = 0.012 + 0.03 * U[..., 0] * (1.0 - U[..., 4])
        mprr = 9.0 + 9.0 * U[..., 2] * U[..., 7]
        pmax = 140.0 + 80.0 * U[..., 7] * (1.0 - 0.3 * U[..., 6])
        return isfc, m_soot, m_nox, mprr, pmax

    def merit_of_normalized(self, U: np.ndarray, constants: MeritConstants) -> np.ndarray:
        """True merit over normalized designs; decodes integral variables first."""
        from .merit import merit_formula

        X = denormalize_batch(self.space, np.atleast_2d(U))
        U_dec = (X - self.space._lower) / self.space._span
        return merit_formula(*self.outputs(U_dec), constants)


class ExternalCommandEvaluator:
    """Evaluate designs by running an external command per point.

    The command template must contain ``{request}`` and ``{response}``
    placeholders. For each call a request file is written with one
    ``name = value`` line per design variable; the command is expected to
    write a response file with one ``name = value`` line per output
    (isfc, m_soot, m_nox, mprr, pmax). Keys are case-sensitive; whitespace
    around keys, '=' and values is ignored.
    """

    def __init__(
        self,
        command_template: str,
        space: DesignSpace | None = None,
        timeout: float = 3600.0,
        workdir: str | None = None,
    ):
        if "{request}" not in command_template or "{response}" not in command_template:
            raise ValidationError(
                "command template must contain {request} and {response} placeholders"
            )
        self.command_template = command_template
        self.space = space or DesignSpace()
        self.timeout = timeout
        self.workdir = workdir
        self.evaluator_id = "external"

    def __call__(self, point: DesignPoint) -> ObjectiveVector:
        with tempfile.TemporaryDirectory(dir=self.workdir) as tmp:
            request = os.path.join(tmp, "request.txt")
            response = os.path.join(tmp, "response.txt")
            with open(request, "w") as fh:
                for spec, value in zip(self.space.variables, point.values):
                    fh.write(f"{spec.name} = {value!r}\n")
            cmd = self.command_template.format(request=request, response=response)
            try:
                proc = subprocess.run(
                    cmd, shell=True, capture_output=True, text=True, timeout=self.timeout
                )
            except subprocess.TimeoutExpired as exc:
                raise EvaluationTimeout(
                    f"evaluator exceeded {self.timeout}s: {cmd}"
                ) from exc
            if proc.returncode != 0:
                raise EvaluatorError(
                    f"evaluator exited with status {proc.returncode}: {cmd}\n"
                    f"stderr: {proc.stderr.strip()}"
                )
            if not os.path.exists(response):
                raise ProtocolError(f"evaluator wrote no response file: {response}")
            fields = _parse_keyvalue_file(response)
        values = {}
        for key in TARGETS:
            if key not in fields:
                raise ProtocolError(f"response missing field '{key}'")
            try:
                values[key] = float(fields[key])
            except ValueError:
                raise ProtocolError(
                    f"response field '{key}' is not a decimal: {fields[key]!r}"
                ) from None
        try:
            return ObjectiveVector(**values)
        except ValueError as exc:
            raise ProtocolError(f"response outputs invalid: {exc}") from exc


def _parse_keyvalue_file(path: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ProtocolError(f"malformed response line: {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    return fields


def evaluate_batch(
    points: list[DesignPoint],
    evaluator,
    constants: MeritConstants,
    iteration: int,
    space: DesignSpace,
    eval_seeds: list[int] | None = None,
    max_parallel: int = 1,
    sink=None,
) -> list[EvaluatedSample]:
    """Evaluate a batch of points, preserving input order.

    Each point is validated against the space first. With ``max_parallel > 1``
    evaluations run in a thread pool (evaluators are pure per point, so the
    result is identical to sequential). If any point fails, the successful
    samples are appended to ``sink`` (when given) before a
    :class:`BatchEvaluationError` is raised carrying the failed indices.
    """
    for idx, p in enumerate(points):
        problems = validate(space, p)
        if problems:
            raise ValidationError(f"point {idx} invalid: {'; '.join(problems)}")
    seeds = eval_seeds or [0] * len(points)

    def run_one(args):
        idx, point = args
        objectives = evaluator(point)
        return EvaluatedSample(
            point=point,
            objectives=objectives,
            merit=merit(objectives, constants),
            iteration=iteration,
            evaluator_id=evaluator.evaluator_id,
            eval_seed=seeds[idx],
        )

    results: list = [None] * len(points)
    failures: list[tuple[int, Exception]] = []
    if max_parallel > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            futures = [pool.submit(run_one, (i, p)) for i, p in enumerate(points)]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except MeritoptError as exc:
                    failures.append((i, exc))
    else:
        for i, p in enumerate(points):
            try:
                results[i] = run_one((i, p))
            except MeritoptError as exc:
                failures.append((i, exc))

    if failures:
        completed = [(i, s) for i, s in enumerate(results) if s is not None]
        if sink is not None:
            for _, sample in completed:
                sink.append(sample)
        raise BatchEvaluationError(
            failed_indices=[i for i, _ in failures],
            causes=[str(e) for _, e in failures],
            completed=completed,
        )
    return results


class Dataset:
    """In-memory sample collection bound to a space and merit constants."""

    def __init__(self, space: DesignSpace, constants: MeritConstants):
        self.space = space
        self.constants = constants
        self.samples: list[EvaluatedSample] = []

    def __len__(self) -> int:
        return len(self.samples)

    def append(self, sample: EvaluatedSample):
        self.samples.append(sample)

    def design_matrix(self) -> np.ndarray:
        return np.array([s.point.values for s in self.samples], dtype=float)

    def target_matrix(self) -> np.ndarray:
        return np.array([s.objectives.as_tuple() for s in self.samples], dtype=float)

    def target(self, name: str) -> np.ndarray:
        idx = TARGETS.index(name)
        return self.target_matrix()[:, idx]

    def merits(self) -> np.ndarray:
        return np.array([s.merit for s in self.samples], dtype=float)

    def best(self) -> EvaluatedSample:
        return max(self.samples, key=lambda s: s.merit)

    def max_iteration(self) -> int:
        return max((s.iteration for s in self.samples), default=-1)


class DatasetFile:
    """Append-only JSONL persistence for a :class:`Dataset`.

    The header line pins the design-space bounds and merit constants; loading
    against a mismatching space or constants raises :class:`DatasetError`.
    """

    def __init__(self, path: str, space: DesignSpace, constants: MeritConstants):
        self.path = path
        self.space = space
        self.constants = constants
        if not os.path.exists(path) or os.path.getsize(path) == 0:
            header = {
                "format": _HEADER_FORMAT,
                "space": space.to_dict(),
                "merit_constants": constants.to_dict(),
            }
            with open(path, "w") as fh:
                fh.write(json.dumps(header, sort_keys=True) + "\n")

    def append(self, sample: EvaluatedSample):
        with open(self.path, "a") as fh:
            fh.write(sample.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load(self) -> Dataset:
        return load_dataset(self.path, self.space, self.constants)


def load_dataset(
    path: str,
    space: DesignSpace | None = None,
    constants: MeritConstants | None = None,
) -> Dataset:
    """Load a dataset file, verifying the header and every record.

    When ``space``/``constants`` are given, the header must match them; when
    omitted, they are taken from the header. Each sample's stored merit is
    revalidated against the merit of its objectives.
    """
    if not os.path.exists(path):
        raise DatasetError(f"dataset file not found: {path}")
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetError("dataset file is empty (missing header)", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise DatasetError("dataset header is not valid JSON", line=1) from None
    if header.get("format") != _HEADER_FORMAT:
        raise DatasetError(f"unrecognized dataset format {header.get('format')!r}", line=1)
    file_space = DesignSpace.from_dict(header["space"])
    file_constants = MeritConstants.from_dict(header["merit_constants"])
    if space is not None and file_space != space:
        raise DatasetError("dataset header space does not match the campaign space", line=1)
    if constants is not None and file_constants != constants:
        raise DatasetError("dataset header merit constants do not match the campaign", line=1)

    ds = Dataset(file_space, file_constants)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            sample = EvaluatedSample.from_json(line)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"corrupted dataset record: {exc}", line=lineno) from None
        expected = merit(sample.objectives, file_constants)
        if not np.isclose(sample.merit, expected, rtol=0, atol=1e-9):
            raise DatasetError(
                f"stored merit {sample.merit} != recomputed {expected}", line=lineno
            )
        problems = validate(file_space, sample.point)
        if problems:
            raise DatasetError(f"invalid stored point: {'; '.join(problems)}", line=lineno)
        ds.append(sample)
    return ds
