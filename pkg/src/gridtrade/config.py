"""Run configuration: YAML file loading, validation, overrides, hashing.

A run config is a single human-editable YAML file covering the fleet,
scenario inputs, market mechanism, noise/disruption settings, the learner,
and the seed. Every key can be overridden through environment variables
with the ``GRIDTRADE_`` prefix, nesting expressed with double underscores
(``GRIDTRADE_LEARNER__GAMMA=0.9``). The parsed dictionary hashes stably so
run manifests can pin the exact configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .env import MECHANISMS, EnvConfig
from .errors import ConfigInvalid, IoError
from .marl.train import Hyperparams
from .microgrid import DEFAULT_FLEET, MicrogridParams
from .policies import POLICY_RULES
from .scenario import (
    HOURS,
    DailyProfile,
    DisruptionConfig,
    PriceSchedule,
    bundled_price_schedule,
)

ENV_PREFIX = "GRIDTRADE_"


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    learner: Hyperparams
    policy: str
    margin: float
    seed: int
    episodes: int
    raw: dict

    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """Stable digest of a parsed config dictionary."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def default_config_dict() -> dict:
    """The reference four-microgrid setup as a plain dictionary."""
    return {
        "seed": 1,
        "episodes": 10,
        "mechanism": "jpq",
        "policy": "net-position",
        "margin": 0.1,
        "fleet": [
            {
                "l_max": p.l_max,
                "g_max": p.g_max,
                "e_max": p.e_max,
                "t_charge_max": p.t_charge_max,
                "t_discharge_max": p.t_discharge_max,
                "e0": p.e0,
                "beta": p.beta,
            }
            for p in DEFAULT_FLEET
        ],
        "profiles": "bundled",
        "prices": "bundled",
        "market_factor": {"lower": -30.0, "upper": -20.0},
        "noise": {"process_sigma": 0.10, "obs_sigma": 0.05},
        "disruption": {
            "p_sudden": 0.15,
            "p_gradual": 0.10,
            "p_failure": 0.01,
            "use_reported": False,
        },
        "mrda": {"rounds": 3, "concession": 0.5},
        "window": {"past": 1, "future": 6},
        "carry_over_soc": False,
        "learner": {},
    }


def apply_env_overrides(raw: dict, environ: dict) -> dict:
    """Fold GRIDTRADE_* environment variables into the config dictionary."""
    out = json.loads(json.dumps(raw))  # deep copy of plain data
    for key, value in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        node = out
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[path[-1]] = yaml.safe_load(value)
    return out


def _profile_from_csv(path: Path) -> DailyProfile:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as e:
        raise IoError(f"cannot read profile {path}: {e}") from e
    if len(rows) != HOURS:
        raise ConfigInvalid(f"profiles: {path} must have {HOURS} rows, found {len(rows)}")
    try:
        load = np.array([float(r["load"]) for r in rows])
        pv = np.array([float(r["pv"]) for r in rows])
    except (KeyError, ValueError) as e:
        raise ConfigInvalid(f"profiles: {path} needs numeric hour,load,pv columns") from e
    try:
        return DailyProfile(load=load, pv=pv)
    except ValueError as e:
        raise ConfigInvalid(f"profiles: {path}: {e}") from e


def _prices_from_csv(path: Path, feed_in: float, day_ahead: float) -> PriceSchedule:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as e:
        raise IoError(f"cannot read price schedule {path}: {e}") from e
    if len(rows) != HOURS:
        raise ConfigInvalid(f"prices: {path} must have {HOURS} rows, found {len(rows)}")
    try:
        emergency = np.array([float(r["emergency"]) for r in rows])
    except (KeyError, ValueError) as e:
        raise ConfigInvalid(f"prices: {path} needs numeric hour,emergency columns") from e
    try:
        return PriceSchedule(feed_in=feed_in, emergency=emergency, day_ahead=day_ahead)
    except ValueError as e:
        raise ConfigInvalid(f"prices: {path}: {e}") from e


def config_from_dict(raw: dict, base_dir: Path | str = ".") -> RunConfig:
    """Validate a parsed config dictionary into typed objects."""
    base_dir = Path(base_dir)
    merged = default_config_dict()
    for key, value in raw.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value

    known = set(default_config_dict().keys())
    unknown = set(merged.keys()) - known
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")

    try:
        fleet = tuple(MicrogridParams(**entry) for entry in merged["fleet"])
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"fleet: {e}") from e

    profiles = None
    if merged["profiles"] != "bundled":
        paths = merged["profiles"]
        if isinstance(paths, str):
            paths = [paths]
        if len(paths) != len(fleet):
            raise ConfigInvalid(
                f"profiles: need one file per fleet member ({len(fleet)}), got {len(paths)}"
            )
        profiles = tuple(_profile_from_csv(base_dir / p) for p in paths)

    if merged["prices"] == "bundled":
        prices = bundled_price_schedule()
    elif isinstance(merged["prices"], dict):
        spec = merged["prices"]
        try:
            prices = PriceSchedule(
                feed_in=float(spec.get("feed_in", 0.2)),
                emergency=np.full(HOURS, float(spec["emergency_flat"]))
                if "emergency_flat" in spec
                else np.asarray(spec["emergency"], dtype=float),
                day_ahead=float(spec.get("day_ahead", 0.5)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"prices: {e}") from e
    else:
        prices = _prices_from_csv(base_dir / merged["prices"], 0.2, 0.5)

    dis = dict(merged["disruption"])
    use_reported = bool(dis.pop("use_reported", False))
    try:
        if use_reported:
            # reported rates win unless the user explicitly set a probability
            user_dis = raw.get("disruption") or {}
            base = DisruptionConfig.reported()
            for name in ("p_sudden", "p_gradual", "p_failure"):
                if name not in user_dis:
                    dis[name] = getattr(base, name)
        disruption = DisruptionConfig(**dis)
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"disruption: {e}") from e

    if merged["mechanism"] not in MECHANISMS:
        raise ConfigInvalid(
            f"mechanism: unknown name {merged['mechanism']!r}, expected one of {MECHANISMS}"
        )
    if merged["policy"] not in POLICY_RULES:
        raise ConfigInvalid(
            f"policy: unknown rule {merged['policy']!r}, expected one of {POLICY_RULES}"
        )

    try:
        env = EnvConfig(
            fleet=fleet,
            profiles=profiles,
            prices=prices,
            mechanism=merged["mechanism"],
            mrda_rounds=int(merged["mrda"]["rounds"]),
            mrda_concession=float(merged["mrda"]["concession"]),
            m_lower=float(merged["market_factor"]["lower"]),
            m_upper=float(merged["market_factor"]["upper"]),
            process_sigma=float(merged["noise"]["process_sigma"]),
            obs_sigma=float(merged["noise"]["obs_sigma"]),
            disruption=disruption,
            delta_past=int(merged["window"]["past"]),
            delta_future=int(merged["window"]["future"]),
            carry_over_soc=bool(merged["carry_over_soc"]),
        )
    except (TypeError, KeyError) as e:
        raise ConfigInvalid(str(e)) from e

    try:
        learner_kw = dict(merged["learner"])
        for key in ("actor_hidden", "critic_hidden", "action_bias"):
            if key in learner_kw:
                learner_kw[key] = tuple(learner_kw[key])
        learner = Hyperparams(**learner_kw)
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"learner: {e}") from e

    seed = merged["seed"]
    episodes = merged["episodes"]
    if not isinstance(seed, int) or seed < 0:
        raise ConfigInvalid(f"seed: must be a non-negative integer, got {seed!r}")
    if not isinstance(episodes, int) or episodes < 0:
        raise ConfigInvalid(f"episodes: must be a non-negative integer, got {episodes!r}")

    return RunConfig(
        env=env,
        learner=learner,
        policy=merged["policy"],
        margin=float(merged["margin"]),
        seed=seed,
        episodes=episodes,
        raw=merged,
    )


def load_config(
    path: str | Path | None, environ: dict | None = None, overrides: dict | None = None
) -> RunConfig:
    """Load a YAML config file (or the bundled defaults) with overrides.

    Precedence: file < environment variables < explicit overrides (CLI).
    """
    if path is None:
        raw = {}
        base_dir = Path(".")
    else:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise IoError(f"cannot read config {path}: {e}") from e
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigInvalid(f"config is not valid YAML: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigInvalid("config root must be a mapping")
        base_dir = path.parent
    if environ is not None:
        raw = apply_env_overrides(raw, environ)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return config_from_dict(raw, base_dir)
