"""Experiment configuration files.

INI-style text with one section per component (``data``, ``models``,
``schedule``, ``training``, ``grid``, ``experiment``). Values are Python
literals (numbers, lists, booleans, quoted or bare strings). Unknown
sections or keys are errors so that typos cannot silently fall back to
defaults.
"""

import ast
import configparser
import hashlib
import json
from dataclasses import dataclass

from . import __version__


class ConfigError(ValueError):
    pass


_STR, _INT, _FLOAT, _BOOL, _LIST, _OPT_INT, _OPT_STR = (
    "str", "int", "float", "bool", "list", "opt_int", "opt_str")

SCHEMA = {
    "data": {
        "source": (_STR, "two_moons"),
        "n": (_INT, 300),
        "noise_std": (_FLOAT, 0.1),
        "d": (_INT, 20),
        "num_classes": (_INT, 2),
        "separation": (_FLOAT, 4.0),
        "label_noise": (_FLOAT, 0.0),
        "val_fraction": (_FLOAT, 1 / 6),
        "test_fraction": (_FLOAT, 0.2),
        "seed": (_INT, 0),
        "amat_train": (_OPT_STR, None),
        "amat_valid": (_OPT_STR, None),
        "amat_test": (_OPT_STR, None),
        "n_features": (_INT, 784),
        "subsample": (_FLOAT, 1.0),
    },
    "models": {
        "classifier": (_STR, "toy_2d"),
        "scale": (_FLOAT, 1.0),
        "hidden": (_OPT_INT, None),
        "dropout": (_FLOAT, 0.25),
        "aux": (_STR, "fc_residual"),
        "aux_hidden": (_INT, 256),
        "aux_n_f": (_INT, 64),
        "aux_depth": (_INT, 1),
        "aux_scale": (_FLOAT, 1.0),
        "aux_residual": (_BOOL, True),
        "aux_activation": (_STR, "tanh"),
        "aux_frozen": (_BOOL, False),
        "dtype": (_STR, "float64"),
    },
    "schedule": {
        "gamma_max": (_INT, 200),
        "gamma_max_simp": (_INT, 170),
        "eta_max": (_FLOAT, 1000.0),
    },
    "training": {
        "regime": (_STR, "nft"),
        "batch_size": (_INT, 32),
        "alpha": (_FLOAT, 1e-3),
        "beta": (_FLOAT, 1e-4),
        "epochs": (_OPT_INT, None),
        "ft_tau_max": (_INT, 10),
        "ft_step": (_FLOAT, 0.1),
        "ft_eps_stop": (_FLOAT, 0.01),
        "eef_p0": (_FLOAT, 0.5),
        "eval_every": (_INT, 1),
        "reset_adam_on_drop": (_BOOL, False),
    },
    "grid": {
        "eta_max": (_LIST, [500.0, 1000.0, 2000.0]),
        "gamma_max_simp_frac": (_LIST, [0.25, 0.5, 0.85]),
        "beta": (_LIST, [1e-5, 1e-4, 5e-4]),
    },
    "experiment": {
        "name": (_STR, "run"),
        "seeds": (_LIST, [0]),
        "debug_checks": (_BOOL, False),
        "export_frames": (_LIST, []),
        "frame_grid_res": (_INT, 50),
        "frame_bounds": (_LIST, [-1.5, 2.5, -1.0, 1.5]),
    },
}


def _parse_value(section, key, kind, raw):
    raw = raw.strip()
    where = f"[{section}] {key}"
    if kind in (_STR, _OPT_STR):
        if kind == _OPT_STR and raw.lower() in ("", "none"):
            return None
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
            return raw[1:-1]
        return raw
    if kind == _BOOL:
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
    if kind == _OPT_INT and raw.lower() in ("", "none"):
        return None
    try:
        value = ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None
    if kind in (_INT, _OPT_INT):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {raw!r}")
        return value
    if kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {raw!r}")
        return float(value)
    if kind == _LIST:
        if isinstance(value, (int, float)):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {raw!r}")
        return list(value)
    raise AssertionError(kind)


@dataclass
class ExperimentConfig:
    sections: dict

    def __getitem__(self, section):
        return self.sections[section]

    def to_dict(self):
        return {s: dict(v) for s, v in self.sections.items()}

    def copy(self):
        return ExperimentConfig(json.loads(json.dumps(self.sections)))

    def override(self, section, key, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key [{section}] {key}")
        out = self.copy()
        out.sections[section][key] = value
        return out

    def hash(self):
        blob = json.dumps(self.sections, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self):
        grid = self["grid"]
        for axis in ("eta_max", "gamma_max_simp_frac", "beta"):
            if not grid[axis]:
                raise ConfigError(f"[grid] {axis}: axis must not be empty")
        for frac in grid["gamma_max_simp_frac"]:
            if not 0.0 < frac < 1.0:
                raise ConfigError(f"[grid] gamma_max_simp_frac: {frac} not in (0, 1)")
        if not self["experiment"]["seeds"]:
            raise ConfigError("[experiment] seeds must not be empty")
        if self["models"]["dtype"] not in ("float64", "float32"):
            raise ConfigError("[models] dtype must be float64 or float32")
        return self


def defaults():
    return ExperimentConfig({s: {k: v[1] for k, v in keys.items()} for s, keys in SCHEMA.items()})


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = defaults()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key [{section}] {key}")
            cfg.sections[section][key] = _parse_value(section, key, SCHEMA[section][key][0], raw)
    return cfg.validate()


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def dump_config(cfg):
    """Render a config back to parseable text."""
    lines = []
    for section, keys in cfg.sections.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            if value is None:
                value = "none"
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value!r}" if isinstance(value, (list, float, int)) else f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def header_fields(cfg):
    return {"config_hash": cfg.hash(), "version": __version__}
