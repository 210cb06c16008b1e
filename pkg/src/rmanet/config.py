"""Line-oriented ``key = value`` config files and flag merging.

A config file supplies defaults for the known training/model/loss knobs;
explicit command-line flags win over the file, and built-in defaults fill
whatever is left.  Unknown keys are rejected with the offending line.  Every
command echoes its effective configuration into its output directory.
"""

import os

from .errors import ConfigError


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_tuple(text):
    return tuple(int(tok) for tok in text.replace(" ", "").split(","))


KNOWN_KEYS = {
    "seed": int,
    "k": int,
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "lr_decay_epoch": int,
    "hidden": int,
    "channels": _parse_int_tuple,
    "region": int,
    "classes": int,
    "image_size": int,
    "scale_threshold": float,
    "positive_threshold": float,
    "anchor_weight": float,
    "positive_weight": float,
    "loc_weight": float,
    "cell_tanh": _parse_bool,
    "top_k": int,
    "threshold": float,
    "views": str,
}


def read_config(path):
    """Parse a config file into typed values, validating every key."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path} line {lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{path} line {lineno}: unknown key {key!r}")
            try:
                values[key] = KNOWN_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path} line {lineno}: bad value for {key!r}: {value!r}") from exc
    return values


def merge(defaults, file_values, flag_values):
    """Built-in defaults, overridden by the file, overridden by explicit flags."""
    out = dict(defaults)
    out.update(file_values)
    out.update({k: v for k, v in flag_values.items() if v is not None})
    return out


def write_effective(values, out_dir, name="config.txt"):
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for key in sorted(values):
        v = values[key]
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{key} = {v}")
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
