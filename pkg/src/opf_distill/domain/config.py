"""
Run configuration.

A RunConfig is read from a single JSON document and can be adjusted from the
command line with dotted ``--key value`` overrides (``--apg.max_iter 50``).
Override values are decoded as JSON when possible and taken as strings
otherwise; pydantic then validates the merged document.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, get_origin

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from opf_distill.domain.models import ApgConfig, GroupMode, IpmOptions, Method, SyntheticConfig
from opf_distill.exceptions import ConfigError


class RunConfig(BaseModel):
    """
    Everything a fit, eval or sweep run needs.

    Attributes:
        feeder_dir: Directory with buses.csv and lines.csv (synthetic feeder when omitted)
        substation_id: Root bus id of the feeder files (inferred when omitted)
        scenarios: Scenario CSV (synthetic scenarios when omitted)
        synthetic: Generator settings for missing inputs
        methods: Methods to fit
        ks: Target feature counts
        lambdas: Penalty weights (lasso methods only)
        groups: Column grouping of the penalty
        nu: Quadratic slack penalty ν
        rho: Linear slack penalty ρ
        ipm: Interior point settings
        apg: Proximal gradient settings
        keep_constant: Keep constant features in θ
        normalize: Normalize scenarios (False keeps original units)
        sample_sizes: Scenario subsample sizes; every task is repeated per size
        maps: Map files to evaluate
        seed: Seed for generation, initialization and subsampling
        out_dir: Output directory
        jobs: Worker threads
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    feeder_dir: Optional[Path] = Field(default=None, description="Feeder CSV directory")
    substation_id: Optional[int] = Field(default=None, description="Substation bus id")
    scenarios: Optional[Path] = Field(default=None, description="Scenario CSV")
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)
    methods: List[Method] = Field(default_factory=lambda: [Method.GL2], min_length=1)
    ks: List[int] = Field(default_factory=list, description="Target feature counts")
    lambdas: List[float] = Field(default_factory=list, description="Penalty weights")
    groups: GroupMode = Field(default=GroupMode.COLUMN)
    nu: float = Field(default=1000.0, gt=0)
    rho: float = Field(default=100.0, gt=0)
    ipm: IpmOptions = Field(default_factory=IpmOptions)
    apg: ApgConfig = Field(default_factory=ApgConfig)
    keep_constant: bool = Field(default=False)
    normalize: bool = Field(default=True)
    sample_sizes: List[int] = Field(default_factory=list)
    maps: List[Path] = Field(default_factory=list)
    seed: int = Field(default=0)
    out_dir: Path = Field(default=Path("out"))
    jobs: int = Field(default=1, ge=1)

    @field_validator("ks", "sample_sizes")
    @classmethod
    def validate_counts(cls, v: List[int]) -> List[int]:
        if any(k < 1 for k in v):
            raise ValueError("counts must be positive")
        return v

    @field_validator("lambdas")
    @classmethod
    def validate_lambdas(cls, v: List[float]) -> List[float]:
        if any(lam < 0 for lam in v):
            raise ValueError("penalty weights must be nonnegative")
        return v

    @model_validator(mode="after")
    def validate_targets(self) -> "RunConfig":
        spectral = [m.value for m in self.methods if not m.uses_lambda]
        if spectral and not self.ks:
            raise ValueError(f"{', '.join(spectral)} need at least one K")
        return self

    def has_targets(self) -> bool:
        return bool(self.ks or self.lambdas)

    def seeded(self) -> "RunConfig":
        """Copy with the run seed pushed into the generator and engine settings."""
        return self.model_copy(
            update={
                "synthetic": self.synthetic.model_copy(update={"seed": self.seed}),
                "apg": self.apg.model_copy(update={"seed": self.seed}),
            }
        )

    def check_paths(self) -> None:
        """
        Raises:
            ConfigError: If an input path does not exist
        """
        if self.feeder_dir is not None and not self.feeder_dir.is_dir():
            raise ConfigError(f"feeder_dir: {self.feeder_dir} is not a directory")
        if self.scenarios is not None and not self.scenarios.is_file():
            raise ConfigError(f"scenarios: {self.scenarios} does not exist")
        for path in self.maps:
            if not path.is_file():
                raise ConfigError(f"maps: {path} does not exist")


def decode_value(text: str) -> Any:
    """JSON value of an override; comma-separated text becomes a list."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if "," in text:
            return [decode_value(item.strip()) for item in text.split(",") if item.strip()]
        return text


def _is_list_field(name: str) -> bool:
    field = RunConfig.model_fields.get(name)
    return field is not None and get_origin(field.annotation) in (list, List)


def apply_overrides(document: Dict[str, Any], overrides: Sequence[Tuple[str, str]]) -> Dict[str, Any]:
    """
    Merge ``--key value`` pairs into a config document.

    Dotted keys reach nested models; dashes in keys are read as underscores.

    Raises:
        ConfigError: If a dotted key runs into a non-object value
    """
    merged = json.loads(json.dumps(document))
    for key, text in overrides:
        parts = key.replace("-", "_").split(".")
        node = merged
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"--{key}: {part} is not a nested setting")
            node = child
        value = decode_value(text)
        if len(parts) == 1 and _is_list_field(parts[0]) and not isinstance(value, list):
            value = [value]
        node[parts[-1]] = value
    return merged


def load_run_config(path: Optional[Path] = None, overrides: Sequence[Tuple[str, str]] = ()) -> RunConfig:
    """
    Read a run configuration and apply overrides.

    Raises:
        ConfigError: If the file is unreadable, not a JSON object, or fails validation
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file {path} does not exist") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from e
        if not isinstance(document, dict):
            raise ConfigError(f"{path}: the configuration must be a JSON object")
    try:
        return RunConfig.model_validate(apply_overrides(document, overrides)).seeded()
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid configuration: {problems}") from e
