"""Parameter loading from TOML config files.

Keys use the controller symbol names:

    [cbf]                       [lb]
    z0 = 0.10                   h = 0.6
    zeta = 0.02                 c = 10.0
    sigma = 0.02                r = 0.4
    eps = 0.02
    gamma = 100.0
    beta = 20.0
    v_max = 0.2
    eps_engage = 0.3
    breakaway_speed = 0.005
    orient_weight = 0.1
    dt = 0.01

Top-level "lb.h" style dotted keys are accepted as well.
"""
from __future__ import annotations

from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .assist import CbfParams, LbParams

_CBF_KEYS = {
    "z0": "z0", "zeta": "zeta", "sigma": "sigma", "eps": "eps",
    "gamma": "gamma", "beta": "beta", "v_max": "v_max",
    "eps_engage": "eps_engage", "breakaway_speed": "breakaway_speed",
    "orient_weight": "orient_weight", "dt": "dt",
}
_LB_KEYS = {"h": "h_scale", "c": "c_steep", "r": "r_center"}


def params_from_dict(data: dict) -> tuple[CbfParams, LbParams]:
    cbf_src = dict(data.get("cbf", {}))
    lb_src = dict(data.get("lb", {}))
    for key, value in data.items():
        if key in _CBF_KEYS:
            cbf_src[key] = value
        elif key.startswith("lb.") and key[3:] in _LB_KEYS:
            lb_src[key[3:]] = value
    cbf_kwargs = {_CBF_KEYS[k]: float(v) for k, v in cbf_src.items() if k in _CBF_KEYS}
    lb_kwargs = {_LB_KEYS[k]: float(v) for k, v in lb_src.items() if k in _LB_KEYS}
    return CbfParams(**cbf_kwargs), LbParams(**lb_kwargs)


def load_params(path: str | Path) -> tuple[CbfParams, LbParams]:
    """Read controller parameters from a TOML file; absent keys keep defaults."""
    with open(path, "rb") as f:
        data = tomllib.load(f)
    return params_from_dict(data)
