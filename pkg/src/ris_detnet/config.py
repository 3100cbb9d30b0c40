"""Scenario configuration: plain-text schema, validation, canonical dump/hash.

The file format is INI-style sections of typed key = value lines.  Every
key has a default reproducing the reference simulation setup (AP (0,20),
RIS (50,20), Eve (50,0), 2 m user circle, PL0 -30 dB, alpha 4 / 2.2,
Rician factors 3, noise -85 dBm, decoding error rate 2e-6), so an empty
file is a valid scenario.  Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np

from .channel import FadingParams, Topology
from .fbc import SecrecyParams
from .mellin import ArrivalModel, DelayWindow, QuadratureSpec, SearchSpec


class ConfigError(ValueError):
    """Invalid scenario file: unknown key, bad type, or invariant failure."""


def _parse_float(text):
    return float(text)


def _parse_int(text):
    val = float(text)
    if val != int(val):
        raise ValueError(f"expected integer, got {text!r}")
    return int(val)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected boolean, got {text!r}")


def _parse_pair(text):
    parts = text.split()
    if len(parts) != 2:
        raise ValueError(f"expected two coordinates, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_floats(text):
    return tuple(float(p) for p in text.split())


def _parse_ints(text):
    return tuple(_parse_int(p) for p in text.split())


def _parse_auto_float(text):
    if text.strip().lower() == "auto":
        return None
    return float(text)


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return t
    return parse


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# (section, key) -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "topology": {
        "ap_pos": (_parse_pair, (0.0, 20.0)),
        "ris_pos": (_parse_pair, (50.0, 20.0)),
        "eve_pos": (_parse_pair, (50.0, 0.0)),
        "user_radius": (_parse_float, 2.0),
        "n_users": (_parse_int, 2),
        "n_elements": (_parse_int, 16),
        "carrier_wavelength": (_parse_float, 0.1),
        "element_spacing": (_parse_auto_float, None),
    },
    "fading": {
        "pl0_db": (_parse_float, -30.0),
        "alpha_direct": (_parse_float, 4.0),
        "alpha_ris": (_parse_float, 2.2),
        "rician_k_r": (_parse_float, 3.0),
        "rician_k_gk": (_parse_float, 3.0),
        "noise_power_dbm": (_parse_float, -85.0),
        "eve_mean_snr": (_parse_auto_float, None),
    },
    "arrival": {
        "lambda_pkts": (_parse_float, 0.2),
        "pkt_bits": (_parse_int, 256),
        "variant": (_choice("standard_compound", "paper_literal"), "standard_compound"),
    },
    "secrecy": {
        "epsilon_e": (_parse_float, 2e-6),
        "sigma_leak": (_parse_float, 1e-3),
    },
    "delay": {
        "t_min": (_parse_int, 2),
        "t_max": (_parse_int, 8),
        "slot_ms": (_parse_float, 1.0),
    },
    "budget": {
        "p_max": (_parse_float, 1.0),
        "n_max": (_parse_int, 512),
    },
    "codebook": {
        "n_power_levels": (_parse_int, 4),
        "n_codewords": (_parse_int, 4),
        "phase_mode": (_choice("quantized", "random", "aligned"), "aligned"),
        "phase_bits": (_parse_int, 3),
        "align_user": (_parse_int, 0),
        "n_floor": (_parse_int, 16),
        "n_ceiling": (_parse_auto_float, None),
    },
    "allocation": {
        "power": (_parse_auto_float, None),
        "cbl": (_parse_auto_float, None),
        "codeword": (_parse_int, 0),
    },
    "env": {
        "episode_steps": (_parse_int, 200),
        "violation_penalty": (_parse_float, 0.05),
        "observe_eve": (_parse_bool, True),
    },
    "agent": {
        "algo": (_choice("sid_pdqn", "dqn", "random"), "sid_pdqn"),
        "alpha": (_parse_float, 1e-3),
        "beta": (_parse_float, 1e-4),
        "gamma": (_parse_float, 0.9),
        "epsilon_start": (_parse_float, 1.0),
        "epsilon_end": (_parse_float, 0.05),
        "epsilon_decay_steps": (_parse_int, 4000),
        "n_step": (_parse_int, 3),
        "batch_size": (_parse_int, 32),
        "buffer_capacity": (_parse_int, 20000),
        "target_sync": (_parse_int, 100),
        "use_target": (_parse_bool, True),
        "actor_loss_mode": (_choice("paper_literal", "standard_pdqn"), "paper_literal"),
        "optimizer": (_choice("adam", "plain_sgd"), "adam"),
        "warmup": (_parse_auto_float, None),
        "grad_clip": (_parse_float, 10.0),
        "hidden": (_parse_ints, (128, 128)),
        "episodes": (_parse_int, 150),
        "per_user_networks": (_parse_bool, False),
        "cbl_levels": (_parse_int, 8),
        "eval_episodes": (_parse_int, 5),
        "checkpoint_every": (_parse_int, 50),
    },
    "quadrature.train": {
        "rel_tol": (_parse_float, 1e-3),
        "abs_tol": (_parse_float, 1e-12),
        "outer_truncation_mult": (_parse_float, 40.0),
        "inner_truncation_mult": (_parse_float, 40.0),
        "max_subdivisions": (_parse_int, 6),
        "grid_points": (_parse_int, 50),
        "golden_iters": (_parse_int, 24),
    },
    "quadrature.eval": {
        "rel_tol": (_parse_float, 1e-6),
        "abs_tol": (_parse_float, 1e-14),
        "outer_truncation_mult": (_parse_float, 40.0),
        "inner_truncation_mult": (_parse_float, 40.0),
        "max_subdivisions": (_parse_int, 8),
        "grid_points": (_parse_int, 200),
        "golden_iters": (_parse_int, 60),
    },
    "run": {
        "seed": (_parse_int, 1),
        "out_dir": (str, "out"),
        "workers": (_parse_int, 0),
    },
}


@dataclass
class ScenarioConfig:
    """Validated scenario: nested {section: {key: typed value}}."""

    values: dict

    def get(self, section: str, key: str):
        return self.values[section][key]

    def set_by_path(self, path: str, raw_value):
        """Assign a swept parameter by 'section.key' path; value may be raw text."""
        if "." not in path:
            raise ConfigError(f"parameter path must be section.key: {path!r}")
        section, key = path.rsplit(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown parameter path: {path!r}")
        parser = SCHEMA[section][key][0]
        value = parser(str(raw_value)) if not isinstance(raw_value, str) else parser(raw_value)
        self.values[section][key] = value
        _validate(self.values)

    def copy(self) -> "ScenarioConfig":
        return ScenarioConfig({s: dict(kv) for s, kv in self.values.items()})

    # -- derived model objects ------------------------------------------

    def sample_user_positions(self, rng: np.random.Generator) -> np.ndarray:
        """Users uniform on the disk of user_radius around Eve."""
        k = self.get("topology", "n_users")
        radius = self.get("topology", "user_radius")
        eve = np.asarray(self.get("topology", "eve_pos"))
        r = radius * np.sqrt(rng.random(k))
        ang = rng.uniform(0.0, 2 * np.pi, k)
        return eve[None, :] + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)

    def build_topology(self, user_pos: np.ndarray) -> Topology:
        t = self.values["topology"]
        return Topology(ap_pos=t["ap_pos"], ris_pos=t["ris_pos"], eve_pos=t["eve_pos"],
                        user_pos=user_pos, n_elements=t["n_elements"],
                        carrier_wavelength=t["carrier_wavelength"],
                        element_spacing=t["element_spacing"],
                        placement_radius=t["user_radius"])

    def build_fading(self) -> FadingParams:
        f = self.values["fading"]
        return FadingParams(**f)

    def build_arrival(self) -> ArrivalModel:
        a = self.values["arrival"]
        return ArrivalModel(lambda_pkts=a["lambda_pkts"], pkt_bits=a["pkt_bits"],
                            variant=a["variant"])

    def build_secrecy(self, blocklength: float) -> SecrecyParams:
        s = self.values["secrecy"]
        return SecrecyParams(epsilon_e=s["epsilon_e"], sigma_leak=s["sigma_leak"],
                             blocklength=blocklength)

    def build_window(self) -> DelayWindow:
        return DelayWindow(self.get("delay", "t_min"), self.get("delay", "t_max"))

    def build_quadrature(self, profile: str) -> QuadratureSpec:
        q = self.values[f"quadrature.{profile}"]
        return QuadratureSpec(rel_tol=q["rel_tol"], abs_tol=q["abs_tol"],
                              outer_truncation_mult=q["outer_truncation_mult"],
                              inner_truncation_mult=q["inner_truncation_mult"],
                              max_subdivisions=q["max_subdivisions"])

    def build_search(self, profile: str) -> SearchSpec:
        q = self.values[f"quadrature.{profile}"]
        return SearchSpec(grid_points=q["grid_points"], golden_iters=q["golden_iters"])

    @property
    def n_ceiling(self) -> float:
        explicit = self.get("codebook", "n_ceiling")
        if explicit is not None:
            return float(explicit)
        return float(self.get("budget", "n_max")) / self.get("topology", "n_users")

    @property
    def warmup_transitions(self) -> int:
        explicit = self.get("agent", "warmup")
        if explicit is not None:
            return int(explicit)
        return max(self.get("agent", "batch_size"), 500)


def _validate(values: dict):
    """Cross-field invariants, raised with section diagnostics."""
    try:
        DelayWindow(values["delay"]["t_min"], values["delay"]["t_max"])
    except ValueError as exc:
        raise ConfigError(f"[delay] invalid window: {exc}") from None
    try:
        SecrecyParams(values["secrecy"]["epsilon_e"], values["secrecy"]["sigma_leak"], 1.0)
    except ValueError as exc:
        raise ConfigError(f"[secrecy] {exc}") from None
    try:
        FadingParams(**values["fading"])
    except ValueError as exc:
        raise ConfigError(f"[fading] {exc}") from None
    try:
        ArrivalModel(values["arrival"]["lambda_pkts"], values["arrival"]["pkt_bits"],
                     values["arrival"]["variant"])
    except ValueError as exc:
        raise ConfigError(f"[arrival] {exc}") from None
    if values["budget"]["p_max"] <= 0:
        raise ConfigError("[budget] p_max must be positive")
    if values["budget"]["n_max"] < 1:
        raise ConfigError("[budget] n_max must be >= 1")
    cb = values["codebook"]
    if cb["n_power_levels"] < 1 or cb["n_codewords"] < 1:
        raise ConfigError("[codebook] counts must be >= 1")
    if cb["n_floor"] < 1:
        raise ConfigError("[codebook] n_floor must be >= 1")
    if cb["n_ceiling"] is not None and cb["n_ceiling"] < cb["n_floor"]:
        raise ConfigError("[codebook] n_ceiling must be >= n_floor")
    if not 0 <= cb["align_user"] < values["topology"]["n_users"]:
        raise ConfigError("[codebook] align_user out of range")
    if values["topology"]["n_users"] < 1:
        raise ConfigError("[topology] n_users must be >= 1")
    if values["topology"]["user_radius"] <= 0:
        raise ConfigError("[topology] user_radius must be positive")
    ag = values["agent"]
    if not 0.0 <= ag["gamma"] <= 1.0:
        raise ConfigError("[agent] gamma must be in [0, 1]")
    if ag["alpha"] <= 0 or ag["beta"] <= 0:
        raise ConfigError("[agent] learning rates must be positive")
    if ag["n_step"] < 1:
        raise ConfigError("[agent] n_step must be >= 1")
    for profile in ("quadrature.train", "quadrature.eval"):
        q = values[profile]
        try:
            QuadratureSpec(rel_tol=q["rel_tol"], abs_tol=q["abs_tol"],
                           outer_truncation_mult=q["outer_truncation_mult"],
                           inner_truncation_mult=q["inner_truncation_mult"],
                           max_subdivisions=q["max_subdivisions"])
        except ValueError as exc:
            raise ConfigError(f"[{profile}] {exc}") from None


def default_config() -> ScenarioConfig:
    values = {section: {key: spec[1] for key, spec in keys.items()}
              for section, keys in SCHEMA.items()}
    return ScenarioConfig(values)


def load_config_text(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    cfg = default_config()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            parse = SCHEMA[section][key][0]
            try:
                cfg.values[section][key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    _validate(cfg.values)
    return cfg


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config_text(fh.read())


def dump_config(cfg: ScenarioConfig) -> str:
    """Canonical text form: schema order, explicit values; hash-stable."""
    out = io.StringIO()
    for section, keys in SCHEMA.items():
        out.write(f"[{section}]\n")
        for key in keys:
            out.write(f"{key} = {_fmt(cfg.values[section][key])}\n")
        out.write("\n")
    return out.getvalue()


# execution-location knobs: not part of the scenario identity
_HASH_EXCLUDE = {("run", "out_dir"), ("run", "workers")}


def config_hash(cfg: ScenarioConfig) -> str:
    out = io.StringIO()
    for section, keys in SCHEMA.items():
        for key in keys:
            if (section, key) not in _HASH_EXCLUDE:
                out.write(f"{section}.{key}={_fmt(cfg.values[section][key])}\n")
    return hashlib.sha256(out.getvalue().encode("utf-8")).hexdigest()[:16]
