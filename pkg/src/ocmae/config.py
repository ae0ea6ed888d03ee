"""Flat key=value configuration.

Config files are plain text: one ``section.key = value`` per line, ``#``
comments, blank lines ignored. The same syntax is accepted by the CLI's
repeatable ``--override section.key=value`` flag. Unknown keys are
rejected with an error naming the key, so typos fail loudly.

``--config`` accepts either a file path or the name of a packaged preset
(desk, tetrominoes, mdsprites, clevr6, clevrtex). A preset describes a
whole experiment: generation reads its scene.* keys, training everything
else.
"""

from __future__ import annotations

import os
from dataclasses import fields
from importlib import resources

from .data import SHAPE_NAMES, SceneSpec
from .errors import ConfigError
from .model import ModelConfig
from .schedules import ScheduleConfig
from .train import AblationFlags, RunConfig

__all__ = ["parse_kv_text", "load_kv", "apply_overrides", "build_run_config",
           "build_scene_spec", "preset_names"]


def parse_kv_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse flat key=value lines into an ordered dict of strings."""
    out: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{ln}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{origin}:{ln}: empty key")
        if key in out:
            raise ConfigError(f"{origin}:{ln}: duplicate key {key!r}")
        out[key] = value
    return out


def preset_names() -> list[str]:
    files = resources.files("ocmae").joinpath("presets")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def load_kv(path_or_preset: str) -> dict[str, str]:
    """Load a config file, or a packaged preset when given a bare name."""
    if os.path.isfile(path_or_preset):
        with open(path_or_preset) as fh:
            return parse_kv_text(fh.read(), origin=path_or_preset)
    preset = resources.files("ocmae").joinpath("presets", f"{path_or_preset}.cfg")
    if preset.is_file():
        return parse_kv_text(preset.read_text(), origin=f"preset:{path_or_preset}")
    raise ConfigError(f"config not found: {path_or_preset!r} is neither a file "
                      f"nor a preset (presets: {', '.join(preset_names())})")


def apply_overrides(kv: dict[str, str], overrides: list[str]) -> dict[str, str]:
    out = dict(kv)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# -- typed casters -------------------------------------------------------------


def _cast_int(key, v):
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None


def _cast_float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _cast_bool(key, v):
    lv = v.lower()
    if lv in ("true", "1", "yes"):
        return True
    if lv in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {v!r}")


def _cast_str(key, v):
    return v


def _cast_opt_int(key, v):
    return None if v in ("", "none") else _cast_int(key, v)


def _cast_shapes(key, v):
    names = tuple(s.strip() for s in v.split(",") if s.strip())
    bad = [s for s in names if s not in SHAPE_NAMES]
    if bad:
        raise ConfigError(f"{key}: unknown shapes {bad}; valid: {', '.join(SHAPE_NAMES)}")
    return names


def _parse_color(key, item):
    item = item.strip().lstrip("#")
    if len(item) != 6:
        raise ConfigError(f"{key}: expected rrggbb hex colors, got {item!r}")
    try:
        return tuple(int(item[i:i + 2], 16) for i in (0, 2, 4))
    except ValueError:
        raise ConfigError(f"{key}: bad hex color {item!r}") from None


def _cast_palette(key, v):
    return tuple(_parse_color(key, c) for c in v.split(",") if c.strip())


def _cast_background(key, v):
    if v == "gray-random":
        return v
    return _parse_color(key, v)


def _numeric_caster(annotation):
    name = annotation if isinstance(annotation, str) \
        else getattr(annotation, "__name__", str(annotation))
    return _cast_int if name == "int" else _cast_float


# schema: dotted key -> (target object name, attribute, caster)
_RUN_SCHEMA = {}
for _f in fields(ModelConfig):
    _RUN_SCHEMA[f"model.{_f.name}"] = ("model", _f.name, _numeric_caster(_f.type))
for _f in fields(ScheduleConfig):
    _RUN_SCHEMA[f"schedule.{_f.name}"] = ("schedule", _f.name, _numeric_caster(_f.type))
for _f in fields(AblationFlags):
    _RUN_SCHEMA[f"ablation.{_f.name}"] = ("ablation", _f.name, _cast_bool)
_RUN_SCHEMA.update({
    "run.data_path": (None, "data_path", _cast_str),
    "run.out_dir": (None, "out_dir", _cast_str),
    "run.batch_size": (None, "batch_size", _cast_int),
    "run.seed": (None, "seed", _cast_int),
    "run.eval_every": (None, "eval_every", _cast_int),
    "run.split_fraction": (None, "split_fraction", _cast_float),
    "run.stop_after_epoch": (None, "stop_after_epoch", _cast_opt_int),
})

_SCENE_SCHEMA = {
    "scene.height": ("height", _cast_int),
    "scene.width": ("width", _cast_int),
    "scene.shapes": ("shapes", _cast_shapes),
    "scene.min_objects": ("min_objects", _cast_int),
    "scene.max_objects": ("max_objects", _cast_int),
    "scene.palette": ("palette", _cast_palette),
    "scene.background": ("background", _cast_background),
    "scene.allow_overlap": ("allow_overlap", _cast_bool),
    "scene.seed": ("seed", _cast_int),
}


def build_run_config(kv: dict[str, str], validate: bool = True) -> RunConfig:
    """Construct a RunConfig; scene.* keys are ignored so one file can
    describe a whole experiment.

    ``validate=False`` lets a caller merge in values from another source
    (the CLI's --data/--out/--seed flags) before validating.
    """
    run = RunConfig()
    for key, value in kv.items():
        if key.startswith("scene."):
            if key not in _SCENE_SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            continue
        spec = _RUN_SCHEMA.get(key)
        if spec is None:
            raise ConfigError(f"unknown config key {key!r}")
        target, attr, caster = spec
        obj = run if target is None else getattr(run, target)
        setattr(obj, attr, caster(key, value))
    return run.validate() if validate else run


def build_scene_spec(kv: dict[str, str]) -> SceneSpec:
    """Construct and validate a SceneSpec from the scene.* keys; non-scene
    keys are ignored (shared experiment files)."""
    spec = SceneSpec()
    for key, value in kv.items():
        if not key.startswith("scene."):
            if key not in _RUN_SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            continue
        entry = _SCENE_SCHEMA.get(key)
        if entry is None:
            raise ConfigError(f"unknown config key {key!r}")
        attr, caster = entry
        setattr(spec, attr, caster(key, value))
    return spec.validate()
