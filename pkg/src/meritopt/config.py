"""Campaign configuration: a flat ``key = value`` text format.

Every knob has a default, so an empty file is a valid config. The same
serializer writes the resolved snapshot into a campaign directory, which makes
resumed runs byte-reproducible against the settings they started with.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .design_space import VARIABLE_NAMES, DesignSpace
from .errors import ConfigError
from .genetic import GAConfig
from .hyper_tuner import TuningBudget
from .merit import MeritConstants

MODES = ("automlga", "mlga")

_MERIT_KEYS = (
    "scale",
    "isfc_numerator",
    "pmax_limit",
    "pmax_weight",
    "mprr_limit",
    "mprr_weight",
    "soot_limit",
    "soot_weight",
    "nox_limit",
    "nox_weight",
)
_GA_KEYS = (
    "population",
    "generations",
    "tournament",
    "crossover_rate",
    "blend_alpha",
    "mutation_rate",
    "mutation_sigma",
    "elitism",
)


@dataclass(frozen=True)
class CampaignConfig:
    """Fully resolved settings for one optimization campaign."""

    mode: str = "automlga"
    seed: int = 0
    initial_samples: int = 150
    batch_reps: int = 5
    max_batches: int = 20
    epsilon_threshold: float = 1e-3
    improvement_delta: float = 1e-6
    convergence_window: int = 4
    cv_folds: int = 10
    evaluator_command: str = ""
    evaluator_timeout: float = 300.0
    tuning: TuningBudget = field(default_factory=TuningBudget)
    ga: GAConfig = field(default_factory=GAConfig)
    constants: MeritConstants = field(default_factory=MeritConstants)
    space: DesignSpace = field(default_factory=DesignSpace)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.initial_samples < max(self.cv_folds, 2):
            raise ConfigError(
                f"initial_samples must be >= cv_folds, got {self.initial_samples}"
            )
        if self.batch_reps < 1:
            raise ConfigError(f"batch_reps must be >= 1, got {self.batch_reps}")
        if self.max_batches < 1:
            raise ConfigError(f"max_batches must be >= 1, got {self.max_batches}")
        if self.epsilon_threshold <= 0:
            raise ConfigError(
                f"epsilon_threshold must be > 0, got {self.epsilon_threshold}"
            )
        if self.improvement_delta < 0:
            raise ConfigError(
                f"improvement_delta must be >= 0, got {self.improvement_delta}"
            )
        if self.convergence_window < 1:
            raise ConfigError(
                f"convergence_window must be >= 1, got {self.convergence_window}"
            )
        if self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.evaluator_timeout <= 0:
            raise ConfigError(
                f"evaluator_timeout must be > 0, got {self.evaluator_timeout}"
            )


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_text(config: CampaignConfig) -> str:
    """Serialize every setting, grouped for readability."""
    lines = [
        f"mode = {config.mode}",
        f"seed = {config.seed}",
        f"initial_samples = {config.initial_samples}",
        f"batch_reps = {config.batch_reps}",
        f"max_batches = {config.max_batches}",
        f"epsilon_threshold = {_format_value(config.epsilon_threshold)}",
        f"improvement_delta = {_format_value(config.improvement_delta)}",
        f"convergence_window = {config.convergence_window}",
        f"cv_folds = {config.cv_folds}",
        f"evaluator.command = {config.evaluator_command}",
        f"evaluator.timeout = {_format_value(config.evaluator_timeout)}",
        f"tuning.n_initial = {config.tuning.n_initial}",
        f"tuning.n_total = {config.tuning.n_total}",
    ]
    for key in _GA_KEYS:
        lines.append(f"ga.{key} = {_format_value(getattr(config.ga, key))}")
    for key in _MERIT_KEYS:
        lines.append(f"merit.{key} = {_format_value(getattr(config.constants, key))}")
    for spec in config.space.variables:
        lines.append(f"bound.{spec.name}.lower = {_format_value(spec.lower)}")
        lines.append(f"bound.{spec.name}.upper = {_format_value(spec.upper)}")
    return "\n".join(lines) + "\n"


def write_file(config: CampaignConfig, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_text(config))


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_text(text: str) -> CampaignConfig:
    """Build a config from ``key = value`` lines; unknown keys are errors."""
    pairs: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return from_pairs(pairs)


def from_pairs(pairs: dict[str, str]) -> CampaignConfig:
    pairs = dict(pairs)

    def take(key: str, default):
        if key not in pairs:
            return default
        raw = pairs.pop(key)
        value = _parse_scalar(raw)
        if default is not None and isinstance(default, (int, float)):
            if isinstance(default, int) and not isinstance(default, bool):
                if not isinstance(value, int):
                    raise ConfigError(f"{key}: expected an integer, got {raw!r}")
            elif not isinstance(value, (int, float)):
                raise ConfigError(f"{key}: expected a number, got {raw!r}")
        return value

    base = CampaignConfig()
    try:
        mode = str(take("mode", base.mode))
        seed = take("seed", base.seed)
        initial_samples = take("initial_samples", base.initial_samples)
        batch_reps = take("batch_reps", base.batch_reps)
        max_batches = take("max_batches", base.max_batches)
        epsilon_threshold = float(take("epsilon_threshold", base.epsilon_threshold))
        improvement_delta = float(take("improvement_delta", base.improvement_delta))
        convergence_window = take("convergence_window", base.convergence_window)
        cv_folds = take("cv_folds", base.cv_folds)
        evaluator_command = str(pairs.pop("evaluator.command", base.evaluator_command))
        evaluator_timeout = float(take("evaluator.timeout", base.evaluator_timeout))
        tuning = TuningBudget(
            n_initial=take("tuning.n_initial", base.tuning.n_initial),
            n_total=take("tuning.n_total", base.tuning.n_total),
        )
        ga_kwargs = {}
        for key in _GA_KEYS:
            default = getattr(base.ga, key)
            value = take(f"ga.{key}", default)
            ga_kwargs[key] = type(default)(value)
        ga = GAConfig(**ga_kwargs)
        merit_kwargs = {}
        for key in _MERIT_KEYS:
            merit_kwargs[key] = float(take(f"merit.{key}", getattr(base.constants, key)))
        constants = MeritConstants(**merit_kwargs)
        overrides = {}
        for name in VARIABLE_NAMES:
            lower = take(f"bound.{name}.lower", None)
            upper = take(f"bound.{name}.upper", None)
            if (lower is None) != (upper is None):
                raise ConfigError(f"bound.{name}: need both lower and upper")
            if lower is not None:
                overrides[name] = (float(lower), float(upper))
        space = DesignSpace().with_bounds(overrides) if overrides else DesignSpace()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if pairs:
        raise ConfigError(f"unknown config keys: {sorted(pairs)}")
    return CampaignConfig(
        mode=mode,
        seed=seed,
        initial_samples=initial_samples,
        batch_reps=batch_reps,
        max_batches=max_batches,
        epsilon_threshold=epsilon_threshold,
        improvement_delta=improvement_delta,
        convergence_window=convergence_window,
        cv_folds=cv_folds,
        evaluator_command=evaluator_command,
        evaluator_timeout=evaluator_timeout,
        tuning=tuning,
        ga=ga,
        constants=constants,
        space=space,
    )


def read_file(path: str) -> CampaignConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text)


def with_overrides(config: CampaignConfig, **kwargs) -> CampaignConfig:
    """A copy with the given top-level fields replaced (CLI flag overrides)."""
    return replace(config, **kwargs)
