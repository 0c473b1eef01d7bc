"""Line-oriented ``key=value`` experiment configuration.

Top-level keys map onto :class:`ExperimentConfig` fields. Model-, dataset-
and tool-specific keys use dotted names (``capsnet.D1=8``) and are kept as
strings until the consumer converts them.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

MODELS = ("capsnet", "lenet", "fisherfaces", "tiny_resnet")

DEFAULT_BATCH = {"capsnet": 16, "lenet": 128, "tiny_resnet": 64, "fisherfaces": 1}
DEFAULT_LR = {"capsnet": 0.001, "lenet": 0.0001, "tiny_resnet": 0.001, "fisherfaces": 0.001}

SECTION_KEYS = {
    "capsnet": {"F", "D1", "D2", "stem_maps", "stem_kernel", "primary_kernel", "primary_stride",
                "routing_iterations", "m_plus", "m_minus", "lam", "recon_weight",
                "decoder_hidden", "route_stop_gradient"},
    "lenet": {"kernel", "channels", "hidden", "pool", "activation"},
    "tiny_resnet": {"blocks", "width"},
    "fisherfaces": {"n_components"},
    "synth": {"classes", "size", "jitter", "n_train", "n_val", "n_test", "n_per_class"},
    "equalize": {"mode", "range_fraction", "entropy_threshold"},
    "kfold": {"K", "repeats"},
    "gradcheck": {"corrupt", "tolerance", "samples"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: str
    dataset: str = "synth"
    name: str = ""
    preprocess: str = "none"
    epochs: int = 10
    batch_size: int | None = None       # None picks the per-model default
    learning_rate: float | None = None
    seed: int = 0
    output_dir: str = ""
    dtype: str = "float32"
    threads: int = 1
    timing: str = "wall"
    patience: int = 0
    stratified: bool = True
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.batch_size is None:
            self.batch_size = DEFAULT_BATCH[self.model]
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LR[self.model]
        if not self.name:
            self.name = f"{self.model}-{Path(self.dataset).name or self.dataset}"
        if not self.output_dir:
            self.output_dir = str(Path("runs") / self.name)
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.timing not in ("wall", "off"):
            raise ConfigError(f"timing must be 'wall' or 'off', got {self.timing!r}")

    def section(self, name: str) -> dict[str, str]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.extra.items() if k.startswith(prefix)}

    def get(self, key: str, default=None, cast=str):
        raw = self.extra.get(key)
        return default if raw is None else cast(raw)

    def to_items(self) -> dict[str, str]:
        items = {}
        for f in fields(self):
            if f.name != "extra":
                items[f.name] = _format(getattr(self, f.name))
        items.update(self.extra)
        return items


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).replace(",", " ").split())


def parse_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


_CASTS = {"epochs": int, "batch_size": int, "learning_rate": float, "seed": int,
          "threads": int, "patience": int, "stratified": parse_bool}


def config_from_items(items: dict[str, str]) -> ExperimentConfig:
    top = {f.name for f in fields(ExperimentConfig)} - {"extra"}
    unknown = []
    kwargs, extra = {}, {}
    for key, value in items.items():
        if key in top:
            kwargs[key] = _CASTS.get(key, str)(value)
        elif "." in key and key.split(".", 1)[1] in SECTION_KEYS.get(key.split(".", 1)[0], ()):
            extra[key] = value
        else:
            unknown.append(key)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "model" not in kwargs:
        raise ConfigError("missing required key 'model'")
    try:
        return ExperimentConfig(**kwargs, extra=extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path=None, overrides: dict[str, str] | None = None,
                 text: str | None = None) -> ExperimentConfig:
    """Read a config file (or ``text``) and apply ``overrides`` on top."""
    items: dict[str, str] = {}
    if text is not None:
        items.update(parse_lines(text))
    if path is not None:
        items.update(parse_lines(Path(path).read_text(encoding="utf-8")))
    items.update({k: str(v) for k, v in (overrides or {}).items()})
    return config_from_items(items)


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in cfg.to_items().items())
