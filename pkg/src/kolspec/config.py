"""Run configuration: strict JSON with every numeric knob present.

A config file only needs the keys it overrides; everything else falls
back to the defaults below.  Unknown keys anywhere are rejected so a
typo cannot silently revert a parameter to its default.
"""

import copy
import json

from .exceptions import ParameterError

DEFAULTS = {
    "seed": 0,
    "data": {
        "n": 10000,
        "tree_count": None,
        "generator": {"kind": "gaussian", "mean": [0.0, 0.0],
                      "cov_diag": [1.0, 1.0]},
    },
    "tuning": {
        "xi_min": -40.0,
        "xi_max": 40.0,
        "grid_size": 33,
        "delta": 1.0,
        "dense_pair_cap": 30000000,
    },
    "density": {
        "knn": 25,
        "eps": None,
        "dim": None,
        "delta_tol": 0.01,
    },
    "operator": {
        "c": 1.0,
        "beta": -0.25,
        "eps": None,
        "delta_tol": 0.01,
    },
    "spectra": {
        "n_modes": None,
        "tol": 1e-08,
    },
    "solver": {
        "min_eig_ratio": 1e-12,
        "g": {"kind": "coordinate", "index": 0, "scale": 1.0},
    },
    "gradient": {
        "max_tensor_entries": 40000000,
    },
    "dynamics": {
        "dt": 0.01,
        "steps": 100,
        "sigma": 1.0,
        "retune_every": 1,
        "velocity": {"kind": "zero"},
        "source": {"kind": "well", "amplitude": 35.0, "center": [1.0, 0.0],
                   "width": 20.0},
    },
}

# Keys whose dict values are replaced wholesale instead of merged, with
# the fields each kind may carry.
_SPEC_KEYS = {
    ("data", "generator"): {"kind", "mean", "cov_diag", "kappa", "mu"},
    ("solver", "g"): {"kind", "index", "scale", "direction"},
    ("dynamics", "velocity"): {"kind", "value"},
    ("dynamics", "source"): {"kind", "direction", "amplitude", "center",
                             "width"},
}


def _merge(base, override, trail):
    for key, value in override.items():
        path = trail + (key,)
        dotted = ".".join(str(p) for p in path)
        if key not in base:
            raise ParameterError(f"unknown config key '{dotted}'")
        if path in _SPEC_KEYS:
            if not isinstance(value, dict):
                raise ParameterError(f"'{dotted}' must be an object")
            extra = set(value) - _SPEC_KEYS[path]
            if extra:
                raise ParameterError(
                    f"unknown config key '{dotted}.{sorted(extra)[0]}'")
            base[key] = copy.deepcopy(value)
        elif isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ParameterError(f"'{dotted}' must be an object")
            _merge(base[key], value, path)
        else:
            base[key] = copy.deepcopy(value)


def load_config(path=None):
    """Resolved configuration: defaults overlaid with a JSON file."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ParameterError(f"{path}: config root must be an object")
        _merge(cfg, doc, ())
    return cfg


def dump_config(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True)
