"""Scenario configuration: JSON in, ready-to-integrate objects out."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import WeightFamily, make_weights
from .geometry import as_lifted_ensemble, as_sphere_ensemble, rotation_from_point, sample_cap
from .graph import DirectedGraph, GraphSchedule, random_schedule
from .integrator import IntegrationConfig

SYSTEMS = ("sphere", "lifted", "rotations")
MONITORS = (
    "consensus",
    "hemisphere_invariance",
    "max_norm_lyapunov",
    "pairwise_lyapunov",
    "ratio_bound",
    "hull_invariance",
    "point_convergence",
    "origin_attraction",
    "circle_closed_form",
)
INTEGRATION_DEFAULTS = {"dt": 1e-3, "t0": 0.0, "tf": 1.0, "renormalize": True, "record_stride": 1}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    d: int
    n: int
    system: str
    initial: np.ndarray
    schedule: GraphSchedule
    weights: WeightFamily
    integration: IntegrationConfig
    monitors: list
    ball: tuple | None = None
    resolved: dict = field(default_factory=dict)
    defaults_applied: list = field(default_factory=list)
    sha256: str = ""
    seed: int | None = None


def bundled_scenarios() -> list[str]:
    root = resources.files("spheresync") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def read_config_text(path) -> tuple[str, Path | None]:
    """Read a config from disk, falling back to the bundled scenarios by name."""
    p = Path(path)
    if p.exists():
        return p.read_text(), p.parent
    bundled = resources.files("spheresync") / "scenarios" / p.name
    if bundled.is_file():
        return bundled.read_text(), None
    raise ConfigError(f"no such config: {path}")


def set_path(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = value


def load_config(path, seed: int | None = None, dt: float | None = None,
                overrides: dict | None = None) -> ScenarioConfig:
    text, base = read_config_text(path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    data = copy.deepcopy(raw)
    for k, v in (overrides or {}).items():
        set_path(data, k, v)
    if dt is not None:
        set_path(data, "integration.dt", dt)
    try:
        cfg = build_config(data, base, seed)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc!r}") from exc
    cfg.sha256 = hashlib.sha256(text.encode()).hexdigest()
    return cfg


def build_config(data: dict, base: Path | None = None, seed: int | None = None) -> ScenarioConfig:
    defaults = []
    resolved = copy.deepcopy(data)

    def default(key, value):
        if key not in resolved:
            resolved[key] = value
            defaults.append(key)
        return resolved[key]

    name = default("name", "scenario")
    d = int(data["d"])
    n = int(data["n"])
    if d < 2 or n < 1:
        raise ConfigError("need d >= 2 and n >= 1")

    initial = data["initial"]
    ball = None
    if "cap" in initial:
        cap = initial["cap"]
        if seed is not None:
            resolved["initial"]["cap"]["seed"] = seed
        cap_seed = resolved["initial"]["cap"].get("seed", 0)
        if "seed" not in cap:
            resolved["initial"]["cap"]["seed"] = 0
            defaults.append("initial.cap.seed")
        axis = np.asarray(cap["axis"], dtype=float)
        axis = axis / np.linalg.norm(axis)
        x0 = sample_cap(axis, float(cap["radius"]), n, seed=cap_seed)
        ball = (axis, float(cap["radius"]))
        default("system", "sphere")
    elif "explicit" in initial:
        x0 = as_sphere_ensemble(initial["explicit"], tol=1e-9)
        x0 = x0 / np.linalg.norm(x0, axis=1)[:, None]
        default("system", "sphere")
    elif "lifted" in initial:
        x0 = as_lifted_ensemble(initial["lifted"])
        default("system", "lifted")
    else:
        raise ConfigError("initial must contain one of: cap, explicit, lifted")
    system = resolved["system"]
    if system not in SYSTEMS:
        raise ConfigError(f"unknown system {system!r}")
    if x0.shape != (n, d):
        raise ConfigError(f"initial data has shape {x0.shape}, expected {(n, d)}")
    if system != "lifted" and "lifted" in initial:
        raise ConfigError("lifted initial data requires system 'lifted'")
    if system == "rotations":
        x0 = np.array([rotation_from_point(x) for x in x0])

    integ = dict(INTEGRATION_DEFAULTS)
    given = data.get("integration", {})
    unknown = set(given) - set(INTEGRATION_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown integration keys: {sorted(unknown)}")
    for k, v in INTEGRATION_DEFAULTS.items():
        if k in given:
            integ[k] = given[k]
        else:
            defaults.append(f"integration.{k}")
    resolved["integration"] = integ
    integration = IntegrationConfig(
        dt=float(integ["dt"]), t0=float(integ["t0"]), tf=float(integ["tf"]),
        renormalize=bool(integ["renormalize"]), record_stride=int(integ["record_stride"]),
    )

    schedule = _build_schedule(data["schedule"], n, integration, base, seed, resolved)
    if schedule.node_count != n:
        raise ConfigError("schedule node count differs from n")
    integration.validate(schedule)

    wspec = dict(data.get("weights", {"family": "constant", "value": 1.0}))
    if "weights" not in data:
        resolved["weights"] = dict(wspec)
        defaults.append("weights")
    family = wspec.pop("family")
    weights = make_weights(family, **wspec)

    monitors = []
    for m in default("monitors", []):
        spec = {"name": m} if isinstance(m, str) else dict(m)
        if spec.get("name") not in MONITORS:
            raise ConfigError(f"unknown monitor {spec.get('name')!r}")
        monitors.append(spec)

    return ScenarioConfig(
        name=name, d=d, n=n, system=system, initial=x0, schedule=schedule, weights=weights,
        integration=integration, monitors=monitors, ball=ball, resolved=resolved,
        defaults_applied=defaults, seed=seed,
    )


def _build_schedule(spec, n, integration, base, seed, resolved) -> GraphSchedule:
    if isinstance(spec, str):
        spec = {"file": spec}
    if "file" in spec:
        p = Path(spec["file"])
        if not p.is_absolute() and base is not None:
            p = base / p
        if not p.exists():
            p = resources.files("spheresync") / "scenarios" / Path(spec["file"]).name
        return GraphSchedule.from_json(p.read_text())
    if "complete" in spec:
        return GraphSchedule.static(DirectedGraph.complete(n))
    if "periodic" in spec:
        per = spec["periodic"]
        graphs = [DirectedGraph(n, frozenset(tuple(e) for e in edges)) for edges in per["graphs"]]
        period = float(per["period"])
        horizon = float(per.get("horizon", integration.tf))
        segs = []
        k = 0
        while k * period < horizon or k == 0:
            segs.append((k * period, graphs[k % len(graphs)]))
            k += 1
        return GraphSchedule(n, tuple(segs), 0.5 * period, len(graphs) * period, horizon)
    if "random" in spec:
        rnd = spec["random"]
        if seed is not None:
            resolved["schedule"]["random"]["seed"] = seed
        return random_schedule(
            n, float(rnd["switch_period"]), float(rnd.get("horizon", integration.tf)),
            rnd.get("mode", "quasi_strong"), seed=resolved["schedule"]["random"].get("seed", 0),
        )
    if "segments" in spec:
        spec = dict(spec)
        spec.setdefault("n", n)
        if len(spec["segments"]) == 1:
            # a single segment never switches; dwell data only matter for the checker
            spec.setdefault("tau_D", 1.0)
            spec.setdefault("T", 1.0)
        resolved["schedule"] = spec
        return GraphSchedule.from_dict(spec)
    raise ConfigError("schedule must be a file, complete, periodic, random or inline segments")
