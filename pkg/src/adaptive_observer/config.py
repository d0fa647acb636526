"""JSON run configurations, validation and the shipped presets.

A config is a JSON object::

    {
      "name": "siso",
      "description": "...",
      "provenance": "published-example" | "approximation" | "synthetic",
      "require_stable_plant": false,
      "plant": {"a_vec": [...], "B": [[...], ...]}
             | {"a_coeffs": [...], "numerators": [[[...]], ...]},
      "x0": [...],
      "observer": {
        "f_vec": [...],
        "x_hat0": [...],
        "initial_estimates": {"a_vec": [...], "B": [[...]]}   # or "p_hat0": [...]
      },
      "estimator": {"variant": "covariance_reset", "k0": 1000, "k_min": 1e-4,
                    "R": [[1, 0], [0, 1]], "lam": 1.0},
      "input": {"kind": "multisine", "amplitudes": [...],
                "frequencies": [[...]], "phases": [[...]], "table": [[...]]},
      "horizon": 300,
      "guard": 1e150,
      "normalize": true,
      "compare": {"forgetting_lam": 0.5},
      "output_dir": "runs"
    }

``a_vec`` and ``f_vec`` carry the negated denominator coefficients; ``B``
rows are the state dimension.  ``require_stable_plant`` makes loading fail
unless the plant matrix is Schur stable.  Missing optional keys take the defaults of
:class:`RunConfig`.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .estimator import EstimatorConfig
from .excitation import InputProfile
from .filter_bank import build_F
from .lti_model import (DimensionError, SystemRealization, TransferFunctionSpec,
                        is_schur_stable, pack_parameters, realization_from_matrices,
                        realize_observable_canonical)
from .observer import DEFAULT_GUARD

DEFAULT_FORGETTING = 0.5


class ConfigError(ValueError):
    """Validation failure; ``problems`` lists ``(field_path, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "\n".join(f"  {path}: {msg}" for path, msg in self.problems)
        super().__init__(f"invalid run configuration:\n{lines}")


@dataclass(frozen=True)
class RunConfig:
    name: str
    plant: SystemRealization
    x0: np.ndarray
    f_vec: np.ndarray
    x_hat0: np.ndarray
    estimator: EstimatorConfig
    input: InputProfile
    horizon: int
    guard: float = DEFAULT_GUARD
    normalize: bool = True
    forgetting_lam: float = DEFAULT_FORGETTING
    output_dir: str = "runs"
    description: str = ""
    provenance: str = "unspecified"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def true_p(self) -> np.ndarray:
        return pack_parameters(self.plant.a_vec, self.f_vec, self.plant.B).p

    def with_overrides(self, horizon=None, variant=None, lam=None, output_dir=None) -> "RunConfig":
        cfg = self
        if horizon is not None:
            if horizon < 1:
                raise ConfigError([("horizon", f"must be >= 1, got {horizon}")])
            cfg = replace(cfg, horizon=int(horizon))
        if variant is not None or lam is not None:
            est = cfg.estimator
            new_variant = variant or est.variant
            new_lam = lam if lam is not None else (
                cfg.forgetting_lam if new_variant == "forgetting" else est.lam)
            try:
                cfg = replace(cfg, estimator=replace(est, variant=new_variant, lam=new_lam))
            except ValueError as exc:
                raise ConfigError([("estimator", str(exc))]) from exc
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg


def _vec(raw, path, problems, length=None):
    try:
        arr = np.asarray(raw, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        problems.append((path, "must be a list of numbers"))
        return None
    if not np.all(np.isfinite(arr)):
        problems.append((path, "entries must be finite"))
        return None
    if length is not None and arr.size != length:
        problems.append((path, f"expected length {length}, got {arr.size}"))
        return None
    return arr


def _mat(raw, path, problems, shape=None):
    try:
        arr = np.atleast_2d(np.asarray(raw, dtype=float))
    except (TypeError, ValueError):
        problems.append((path, "must be a list of lists of numbers"))
        return None
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        problems.append((path, "must be a finite 2-D array"))
        return None
    if shape is not None and arr.shape != shape:
        problems.append((path, f"expected shape {shape}, got {arr.shape}"))
        return None
    return arr


def _parse_plant(raw, problems):
    if not isinstance(raw, dict):
        problems.append(("plant", "must be an object"))
        return None
    try:
        if "a_coeffs" in raw:
            return realize_observable_canonical(
                TransferFunctionSpec(raw["a_coeffs"], raw.get("numerators", [])))
        a_vec = _vec(raw.get("a_vec"), "plant.a_vec", problems)
        B = _mat(raw.get("B"), "plant.B", problems)
        if a_vec is None or B is None:
            return None
        return realization_from_matrices(a_vec, B)
    except (DimensionError, ValueError, TypeError) as exc:
        problems.append(("plant", str(exc)))
        return None


def _parse_input(raw, m, problems):
    if not isinstance(raw, dict):
        problems.append(("input", "must be an object"))
        return None
    try:
        prof = InputProfile(kind=raw.get("kind", ""),
                            amplitudes=tuple(raw.get("amplitudes", ())),
                            frequencies=tuple(map(tuple, raw.get("frequencies", ()))),
                            phases=tuple(map(tuple, raw.get("phases", ()))),
                            table=raw.get("table"))
    except (ValueError, TypeError) as exc:
        problems.append(("input", str(exc)))
        return None
    if prof.m != m:
        problems.append(("input.amplitudes", f"expected {m} channels, got {prof.m}"))
        return None
    return prof


def parse_config(raw: dict) -> RunConfig:
    """Validate a decoded JSON config; raises :class:`ConfigError` listing every problem."""
    problems: list = []
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    for key in ("plant", "x0", "observer", "estimator", "input", "horizon"):
        if key not in raw:
            problems.append((key, "required field missing"))
    if problems:
        raise ConfigError(problems)

    plant = _parse_plant(raw["plant"], problems)
    if plant is None:
        raise ConfigError(problems)
    dims = plant.dims
    if raw.get("require_stable_plant", False) and not is_schur_stable(plant.A):
        problems.append(("plant", "require_stable_plant is set but A is not Schur stable"))

    x0 = _vec(raw["x0"], "x0", problems, dims.n)
    obs = raw["observer"] if isinstance(raw["observer"], dict) else {}
    if not isinstance(raw["observer"], dict):
        problems.append(("observer", "must be an object"))
    f_vec = _vec(obs.get("f_vec"), "observer.f_vec", problems, dims.r)
    if f_vec is not None and not is_schur_stable(build_F(f_vec, dims.q)):
        problems.append(("observer.f_vec", "filter matrix F is not Schur stable"))
    x_hat0 = _vec(obs.get("x_hat0", [0.0] * dims.n), "observer.x_hat0", problems, dims.n)

    p_hat0 = None
    if "p_hat0" in obs:
        p_hat0 = _vec(obs["p_hat0"], "observer.p_hat0", problems, dims.d)
    elif "initial_estimates" in obs:
        ie = obs["initial_estimates"]
        a0 = _vec(ie.get("a_vec"), "observer.initial_estimates.a_vec", problems, dims.r)
        B0 = _mat(ie.get("B"), "observer.initial_estimates.B", problems, (dims.n, dims.m))
        if a0 is not None and B0 is not None and f_vec is not None:
            p_hat0 = pack_parameters(a0, f_vec, B0).p
    elif f_vec is not None:
        p_hat0 = np.zeros(dims.d)

    est_raw = raw["estimator"] if isinstance(raw["estimator"], dict) else {}
    R = _mat(est_raw.get("R", np.eye(dims.q).tolist()), "estimator.R", problems, (dims.q, dims.q))
    est = None
    if R is not None and p_hat0 is not None:
        try:
            est = EstimatorConfig(k0=float(est_raw.get("k0", 1000.0)),
                                  k_min=float(est_raw.get("k_min", 1e-4)),
                                  R=R, p_hat0=p_hat0,
                                  variant=est_raw.get("variant", "covariance_reset"),
                                  lam=float(est_raw.get("lam", 1.0)))
        except (ValueError, TypeError) as exc:
            problems.append(("estimator", str(exc)))

    prof = _parse_input(raw["input"], dims.m, problems)

    horizon = raw["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        problems.append(("horizon", f"must be an integer >= 1, got {horizon!r}"))
    guard = raw.get("guard", DEFAULT_GUARD)
    if not (isinstance(guard, (int, float)) and guard > 0):
        problems.append(("guard", "must be a positive number"))
    lam = raw.get("compare", {}).get("forgetting_lam", DEFAULT_FORGETTING)
    if not (isinstance(lam, (int, float)) and 0 < lam <= 1):
        problems.append(("compare.forgetting_lam", "must lie in (0, 1]"))

    if problems:
        raise ConfigError(problems)
    return RunConfig(name=str(raw.get("name", "run")), plant=plant, x0=x0, f_vec=f_vec,
                     x_hat0=x_hat0, estimator=est, input=prof, horizon=horizon,
                     guard=float(guard), normalize=bool(raw.get("normalize", True)),
                     forgetting_lam=float(lam), output_dir=str(raw.get("output_dir", "runs")),
                     description=str(raw.get("description", "")),
                     provenance=str(raw.get("provenance", "unspecified")),
                     raw=copy.deepcopy(raw))


def _preset_dir():
    return resources.files(__package__).joinpath("presets")


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in _preset_dir().iterdir() if p.name.endswith(".json"))


def load_raw(source) -> dict:
    """Read a config from a path, or from a preset name when no such file exists."""
    path = Path(source)
    if path.is_file():
        return json.loads(path.read_text())
    name = str(source)
    if name in preset_names():
        return json.loads(_preset_dir().joinpath(name + ".json").read_text())
    raise FileNotFoundError(f"{source}: no such config file or preset "
                            f"(presets: {', '.join(preset_names())})")


def load_config(source) -> RunConfig:
    return parse_config(load_raw(source))
