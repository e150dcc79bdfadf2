import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from errors import ConfigError

# Load .env from the same directory as this config file
env_path = Path(__file__).parent / '.env'
load_dotenv(dotenv_path=env_path)

# Run Settings
DEFAULT_SEED = int(os.getenv("SAIL_SEED", "7"))
DEFAULT_THREADS = int(os.getenv("SAIL_THREADS", "1"))  # 1 keeps runs bit-reproducible
DEFAULT_OUT_DIR = os.getenv("SAIL_OUT_DIR", "runs")
LOG_LEVEL = os.getenv("SAIL_LOG_LEVEL", "INFO")

# Numeric Settings
LAYER_NORM_EPS = 1e-5
LOG_PROB_FLOOR = 1e-12  # probabilities are clamped here before log
IOU_THRESHOLDS = (0.3, 0.5, 0.7)

# Output file names written next to every run
RESOLVED_CONFIG_FILE = "resolved_config.json"
RUN_SPEC_FILE = "run_spec.json"


class SailConfig(BaseModel):
    """Model, training and ablation settings for one localizer run"""
    model_config = ConfigDict(extra="forbid")

    d_f: int = Field(default=32, gt=0, description="Frame feature dimension (even, for temporal encoding)")
    d_r: int = Field(default=32, gt=0, description="Region feature dimension")
    d_g: int = Field(default=32, gt=0, description="Global image feature dimension")
    d_model: int = Field(default=32, gt=0, description="Total projection dimension of every attention (split across heads)")
    heads: int = Field(default=4, gt=0, description="Attention head count H")
    layers: int = Field(default=2, ge=1, description="Encoder layer count L")
    window: int = Field(default=8, ge=0, description="Local self-attention window radius w")
    d_ff: Optional[int] = Field(default=None, gt=0, description="Feed-forward hidden size (defaults to 4*d_f)")

    lr: float = Field(default=0.0005, ge=0.0, description="Adam learning rate")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    batch: int = Field(default=16, gt=0, description="Mini-batch size N_b")
    epochs: int = Field(default=30, gt=0)
    max_steps: Optional[int] = Field(default=None, gt=0, description="Stop after this many optimizer steps")
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    n_max: int = Field(default=200, gt=0, description="Longer frame sequences are downsampled to this length")
    threads: int = Field(default=DEFAULT_THREADS, gt=0)

    no_region_self_attention: bool = Field(default=False, description="Ablation w/o RS")
    no_multilevel_cross: bool = Field(default=False, description="Ablation w/o ML")
    no_local_attention: bool = Field(default=False, description="Ablation w/o LS")
    no_bidirectional: bool = Field(default=False, description="Ablation w/o BA")
    decode: Literal["independent", "constrained"] = "independent"

    flp_hidden: int = Field(default=64, gt=0, description="Hidden width of the frame-level baseline MLP")
    flp_epochs: int = Field(default=10, gt=0)
    flp_lr: float = Field(default=0.001, ge=0.0)

    @model_validator(mode="after")
    def _check_dims(self):
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.d_f % 2 != 0:
            raise ValueError(f"d_f={self.d_f} must be even for the temporal encoding")
        if self.d_ff is None:
            self.d_ff = 4 * self.d_f
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


class BenchConfig(BaseModel):
    """Synthetic planted-activity corpus settings"""
    model_config = ConfigDict(extra="forbid")

    n_classes: int = Field(default=40, gt=0, description="Leaf activity classes (sibling pairs under shared parents)")
    videos_per_class: int = Field(default=10, gt=0)
    n_min: int = Field(default=40, gt=0, description="Shortest raw video in frames")
    n_max: int = Field(default=160, gt=0, description="Longest raw video in frames")
    d_f: int = Field(default=32, gt=0, description="Frame, region and global feature dimension")
    d_sig: int = Field(default=16, gt=0, description="Class signature dimension")
    m_min: int = Field(default=4, gt=0, description="Fewest regions per image query")
    m_max: int = Field(default=10, gt=0)
    prototypes_per_class: int = Field(default=6, gt=0)
    prototype_spread: float = Field(default=0.3, ge=0.0, description="Spread of region prototypes around the class signature")
    min_len: int = Field(default=8, gt=0, description="Curation drops targets shorter than this")
    max_len: int = Field(default=120, gt=0, description="Curation drops targets longer than this")
    target_ratio: float = Field(default=0.353, gt=0.0, lt=1.0, description="Mean target/video length ratio")
    ratio_spread: float = Field(default=0.2, ge=0.0, lt=1.0)
    sibling_spread: float = Field(default=0.8, ge=0.0, description="How far sibling signatures sit from their parent")
    noise: float = Field(default=0.3, ge=0.0, description="Isotropic frame noise amplitude")
    distractor: float = Field(default=0.6, ge=0.0, description="Amplitude of foreign-class signatures in background")
    region_noise: float = Field(default=0.3, ge=0.0)
    global_noise: float = Field(default=0.1, ge=0.0)
    clutter_regions: int = Field(default=2, ge=0, description="Regions per query drawn from unrelated classes")
    multi_segment_prob: float = Field(default=0.3, ge=0.0, le=1.0)
    disjoint_segment_prob: float = Field(default=0.2, ge=0.0, le=1.0)
    simple_per_video: int = Field(default=3, ge=0)
    difficult_per_video: int = Field(default=2, ge=0)
    split_ratios: Tuple[int, int, int] = (8, 1, 1)
    float_decimals: int = Field(default=6, gt=0, description="Rounding applied when the corpus is written")

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        if self.m_min > self.m_max:
            raise ValueError("m_min must not exceed m_max")
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")
        if self.target_ratio - self.ratio_spread <= 0.0 or self.target_ratio + self.ratio_spread >= 1.0:
            raise ValueError("target_ratio +- ratio_spread must stay inside (0, 1)")
        if self.clutter_regions >= self.m_min:
            raise ValueError("clutter_regions must leave at least one query-class region")
        return self


class RunConfig(BaseModel):
    """Everything a CLI run needs; persisted as resolved_config.json"""
    model_config = ConfigDict(extra="forbid")

    model: SailConfig = Field(default_factory=SailConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(document: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """
    Apply dotted key=value overrides (e.g. "model.lr=0.001") to a config document.

    Values are parsed as JSON when possible, otherwise kept as strings.
    """
    merged = json.loads(json.dumps(document))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = merged
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{key}' descends into a non-section value")
        node[parts[-1]] = _parse_value(raw.strip())
    return merged


def load_config_document(path: Optional[str] = None, overrides: Optional[List[str]] = None) -> Dict[str, Any]:
    """The JSON config file (if any) with dotted overrides applied, not yet validated."""
    document: Dict[str, Any] = {}
    if path:
        with open(path, "r", encoding="utf-8") as f:
            try:
                document = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    return apply_overrides(document, overrides or [])


def load_run_config(path: Optional[str] = None, overrides: Optional[List[str]] = None) -> RunConfig:
    """
    Resolve defaults, an optional JSON config file and overrides into a RunConfig.

    Raises:
        ConfigError: unknown keys or invalid values
        FileNotFoundError: config path does not exist
    """
    document = load_config_document(path, overrides)
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def update_model_config(cfg: SailConfig, **changes: Any) -> SailConfig:
    """Copy of cfg with changes applied and re-validated."""
    data = cfg.model_dump()
    data.update(changes)
    try:
        return SailConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


class RunSpec(BaseModel):
    """How a CLI run was invoked; persisted as run_spec.json next to its outputs"""
    model_config = ConfigDict(extra="forbid")

    subcommand: str
    config_path: Optional[str] = None
    overrides: List[str] = Field(default_factory=list, description="key=value overrides, in order")
    seed: int
    out_dir: str
    flags: Dict[str, Any] = Field(default_factory=dict, description="Explicit flags applied after the overrides")
    arguments: Dict[str, Any] = Field(
        default_factory=dict,
        description="Inputs and run options that are not model settings (--data, --checkpoint, --split, ...)",
    )
