"""Config parsing, CSV/JSON writers and model/spec construction for the CLI."""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from importlib.metadata import version as _pkg_version
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kernels import FactorLaw
from . import inference as inf
from . import models as M
from . import simulate as sim

SCHEMA_VERSION = 1


def load_config(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        with open(p) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e


def check_keys(cfg, allowed, where):
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def require(cfg, key, where):
    if key not in cfg:
        raise ConfigError(f"missing key {key!r} in {where}")
    return cfg[key]


def fmt_float(x):
    return repr(float(x))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating))
                        else v for v in row])


def write_matrix_csv(path, data, columns=None):
    data = np.asarray(data)
    if columns is None:
        columns = [f"x{j + 1}" for j in range(data.shape[1])]
    write_csv(path, columns, data)


def read_matrix_csv(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"data file {path} not found")
    with open(p) as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r if row]
    return np.asarray(rows), header


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_manifest(out_dir, command, config, seed, scale_tag, counts):
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "scale_tag": scale_tag,
        "counts": counts,
        "version": _pkg_version("tailfactor"),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    write_json(Path(out_dir) / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# model / factor-spec construction from config dictionaries

_FAMILIES = ("hr", "mo", "skew-hr", "esn-hr", "shared-gate", "equi-gate")


def spatial_from_config(cfg, where="spatial"):
    check_keys(cfg, {"coords", "p1", "p2", "beta", "alpha0", "s0", "c0",
                     "rho_star"}, where)
    try:
        return inf.SpatialParam(
            coords=np.asarray(require(cfg, "coords", where), float),
            p1=float(require(cfg, "p1", where)),
            p2=float(require(cfg, "p2", where)),
            beta=tuple(cfg.get("beta", (0.0, 0.0, 0.0))),
            alpha0=float(cfg.get("alpha0", 1.0)),
            s0=tuple(cfg["s0"]) if cfg.get("s0") is not None else None,
            c0=cfg.get("c0"),
            rho_star=cfg.get("rho_star"))
    except Exception as e:
        raise ConfigError(f"invalid {where}: {e}") from e


def model_from_config(cfg):
    check_keys(cfg, {"family", "spatial", "lambda", "tau", "alpha", "c",
                     "rho", "rho0", "c0", "rho_star", "orthant_corr"}, "model")
    family = require(cfg, "family", "model")
    if family not in _FAMILIES:
        raise ConfigError(f"unknown family {family!r}; valid: {_FAMILIES}")
    try:
        if "spatial" in cfg:
            return inf.build_model(family, spatial_from_config(cfg["spatial"]))
        if family == "hr":
            return M.HuslerReiss(np.asarray(cfg["lambda"], float))
        if family == "mo":
            return M.MarshallOlkin(np.asarray(cfg["c"], float),
                                   np.asarray(cfg["orthant_corr"], float))
        if family == "skew-hr":
            return M.SkewHuslerReiss(np.asarray(cfg["alpha"], float),
                                     np.asarray(cfg["c"], float),
                                     np.asarray(cfg["rho"], float))
        if family == "esn-hr":
            if "lambda" in cfg:
                return M.EsnHuslerReiss.from_lambda_tau(
                    np.asarray(cfg["lambda"], float),
                    np.asarray(cfg["tau"], float))
            return M.EsnHuslerReiss(np.asarray(cfg["alpha"], float),
                                    float(cfg["c0"]),
                                    np.asarray(cfg["rho"], float),
                                    np.asarray(cfg["rho0"], float))
        if family == "shared-gate":
            return M.SharedGate(np.asarray(cfg["alpha"], float),
                                np.asarray(cfg["c"], float),
                                np.asarray(cfg["rho"], float))
        if family == "equi-gate":
            return M.EquiGate(np.asarray(cfg["alpha"], float),
                              np.asarray(cfg["c"], float),
                              np.asarray(cfg["rho"], float),
                              float(cfg["rho_star"]))
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"invalid model parameters: {e}") from e
    raise ConfigError(f"family {family!r} needs a 'spatial' block")


def factor_spec_from_config(cfg):
    check_keys(cfg, {"alpha", "c", "v0", "corr_z", "gates", "cross_corr"},
               "spec")
    v0cfg = cfg.get("v0", {"law": "exponential"})
    check_keys(v0cfg, {"law", "beta"}, "spec.v0")
    law = v0cfg.get("law", "exponential")
    try:
        v0 = FactorLaw(law, v0cfg.get("beta"))
    except Exception as e:
        raise ConfigError(f"invalid factor law: {e}") from e
    gates = cfg.get("gates", "common")
    if isinstance(gates, dict):
        check_keys(gates, {"equicorrelated"}, "spec.gates")
        gates = ("equicorrelated", float(gates["equicorrelated"]))
    elif isinstance(gates, list):
        gates = np.asarray(gates, float)
    elif gates != "common":
        raise ConfigError("gates must be 'common', {'equicorrelated': rho} "
                          "or a correlation matrix")
    c = np.asarray(require(cfg, "c", "spec"), dtype=float)
    try:
        return sim.FactorSpec(
            alpha=np.asarray(require(cfg, "alpha", "spec"), float),
            c=c, v0=v0,
            corr_z=np.asarray(require(cfg, "corr_z", "spec"), float),
            gates=gates,
            cross_corr=(np.asarray(cfg["cross_corr"], float)
                        if cfg.get("cross_corr") is not None else None))
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"invalid factor spec: {e}") from e
