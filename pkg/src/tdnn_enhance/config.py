"""Run configuration: ``section.key = value`` lines.

Example::

    model.preset = tdnn-f
    model.hidden = 256
    train.stages = noisy_clean:30, clean_clean:5, noise_silence:5, noisy_clean:5
    data.n_train = 20
    io.out_dir = runs/demo
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .datagen import SynthSpec
from .errors import DataError
from .network import CONTEXT_PRESETS, check_context
from .optim import INITIAL_LR
from .trainer import ModelConfig, StagePlan


class ConfigError(DataError):
    pass


def expand_preset(name: str):
    try:
        return CONTEXT_PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {', '.join(CONTEXT_PRESETS)}"
        ) from None


def parse_contexts(text: str):
    """``"-1:1, -2:2, 0:0"`` -> ((-1, 1), (-2, 2), (0, 0))."""
    out = []
    for item in text.split(","):
        left, sep, right = item.strip().partition(":")
        if not sep:
            raise ConfigError(f"context {item.strip()!r} must look like L:R")
        try:
            out.append(check_context((int(left), int(right))))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return tuple(out)


@dataclass
class RunConfig:
    preset: str | None = "tdnn-f"
    contexts: tuple | None = None
    hidden: int | tuple = 256
    model_seed: int = 0
    output_bias: float = 1.0
    plan: StagePlan = field(default_factory=StagePlan)
    learning_rate: float = INITIAL_LR
    batch: int = 1
    checkpoints: bool = False
    manifest: str | None = None
    seed: int = 0
    synth: SynthSpec = field(default_factory=SynthSpec)
    out_dir: str = "out"

    def layer_contexts(self):
        if self.contexts is not None:
            return self.contexts
        return expand_preset(self.preset)

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.layer_contexts(), self.hidden, self.model_seed, self.output_bias)

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, seed=seed, model_seed=seed)


def _int_tuple(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _hidden(text):
    values = _int_tuple(text)
    return values[0] if len(values) == 1 else values


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_SYNTH_TYPES = {f.name: f.type for f in fields(SynthSpec)}


def _synth_value(key, text):
    kind = _SYNTH_TYPES[key]
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if key == "snrs":
        return tuple(float(v) for v in text.split(","))
    if key == "noise_kinds":
        return tuple(v.strip() for v in text.split(",") if v.strip())
    return text.strip()


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    synth = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        section, dot, name = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        try:
            if section == "model":
                if name == "preset":
                    expand_preset(value)
                    cfg.preset, cfg.contexts = value.lower(), None
                elif name == "contexts":
                    cfg.contexts = parse_contexts(value)
                elif name == "hidden":
                    cfg.hidden = _hidden(value)
                elif name == "seed":
                    cfg.model_seed = int(value)
                elif name == "output_bias":
                    cfg.output_bias = float(value)
                else:
                    raise KeyError(name)
            elif section == "train":
                if name == "stages":
                    cfg.plan = StagePlan.parse(value)
                elif name == "learning_rate":
                    cfg.learning_rate = float(value)
                elif name == "batch":
                    cfg.batch = int(value)
                elif name == "checkpoints":
                    cfg.checkpoints = _bool(value)
                else:
                    raise KeyError(name)
            elif section == "data":
                if name == "manifest":
                    cfg.manifest = value
                elif name == "seed":
                    cfg.seed = int(value)
                elif name in _SYNTH_TYPES:
                    synth[name] = _synth_value(name, value)
                else:
                    raise KeyError(name)
            elif section == "io":
                if name == "out_dir":
                    cfg.out_dir = value
                else:
                    raise KeyError(name)
            else:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
        except KeyError:
            raise ConfigError(f"line {lineno}: unknown key {key!r}") from None
        except ConfigError as exc:
            if str(exc).startswith("line "):
                raise
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if synth:
        cfg.synth = replace(cfg.synth, **synth)
    if isinstance(cfg.hidden, tuple) and len(cfg.hidden) != len(cfg.layer_contexts()) - 1:
        raise ConfigError(
            f"model.hidden lists {len(cfg.hidden)} widths for {len(cfg.layer_contexts()) - 1} hidden layers"
        )
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())
