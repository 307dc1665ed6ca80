"""Flat key=value run configuration with sections, schema-checked.

The format is INI-style (configparser) with one section per concern.  Every
key is validated against the schema below, so a typo fails fast with the
section and key named.  Geometry keys omitted from a config fall back to
full-scale defaults, or to the reduced desk-scale defaults when the run is
invoked with --desk-scale.
"""

from __future__ import annotations

import configparser
from dataclasses import replace

from .experiments import ExperimentConfig
from .phantoms import Image, generate_phantom, load_image
from .solvers import SolverConfig
from .transforms import make_transform


class ConfigError(Exception):
    """Invalid, missing, or unparseable configuration."""


_SOLVER_KEYS = {
    "eta": float, "lambda_min": float, "lambda_max": float, "lambda0": float,
    "l_scale": float, "max_outer": int, "max_inner": int, "tol_rel_obj": float,
    "armijo_beta": float, "armijo_sigma": float, "bb_tau": float,
    "warm_restart": bool,
}

# section -> allowed keys
SCHEMA = {
    "experiment": {"regime", "p", "transform", "side", "levels", "weight_mode",
                   "rho", "parseval", "n_min", "n_max", "n_step", "n_points",
                   "k", "c_alpha", "c_delta_policy", "nonneg", "master_seed",
                   "n_ref"},
    "phantom": {"kind", "seed", "path", "format"},
    "solver": set(_SOLVER_KEYS),
    "gamma": {"p_list", "shared_seed"},
    "compare": {"strategies", "c_alphas"},
    "sc_build": {"p", "alpha_sc"},
    "sc_verify": {"beta", "k"},
}

FULL_DEFAULTS = {"side": 128, "n_min": 36, "n_max": 162, "n_step": 0,
                 "n_points": 8, "k": 30, "n_ref": 500}
DESK_DEFAULTS = {"side": 64, "n_min": 16, "n_max": 64, "n_step": 0,
                 "n_points": 6, "k": 10, "n_ref": 180}


def parse_real(text: str) -> float:
    """Plain float, or an exact-looking fraction such as 4/3."""
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"bad fraction {text!r}") from None
    return float(text)


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def load_config(path) -> dict[str, dict[str, str]]:
    """Parse and schema-check a config file into {section: {key: raw value}}."""
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    sections = {}
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigError(f"unknown config section [{name}] "
                              f"(known: {', '.join(sorted(SCHEMA))})")
        allowed = SCHEMA[name]
        body = {}
        for key, value in cp.items(name):
            if key not in allowed:
                raise ConfigError(f"unknown key {name}.{key} "
                                  f"(allowed: {', '.join(sorted(allowed))})")
            body[key] = value.strip()
        sections[name] = body
    return sections


class Settings:
    """Typed access to a loaded config plus the active geometry defaults."""

    def __init__(self, sections: dict, desk_scale: bool = False):
        self.sections = sections
        self.desk_scale = desk_scale
        self.geometry = DESK_DEFAULTS if desk_scale else FULL_DEFAULTS

    def _raw(self, section, key):
        return self.sections.get(section, {}).get(key)

    def require(self, section, key, parse):
        raw = self._raw(section, key)
        if raw is None or raw == "":
            raise ConfigError(f"missing required key {section}.{key}")
        return self._parse(section, key, raw, parse)

    def optional(self, section, key, parse, default):
        raw = self._raw(section, key)
        if raw is None or raw == "":
            return default
        return self._parse(section, key, raw, parse)

    @staticmethod
    def _parse(section, key, raw, parse):
        try:
            return parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}") from None

    def geo(self, key):
        """Geometry value: config wins, else the active scale's default."""
        return self.optional("experiment", key, int, self.geometry[key])


def _wrap_value_errors(where):
    def deco(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None
        return inner
    return deco


@_wrap_value_errors("[experiment] transform")
def build_transform(st: Settings, kind: str | None = None, side: int | None = None):
    kind = kind or st.require("experiment", "transform", str)
    side = side if side is not None else st.geo("side")
    return make_transform(
        kind, side,
        levels=st.optional("experiment", "levels", int, None),
        weight_mode=st.optional("experiment", "weight_mode", str, "uniform"),
        rho=st.optional("experiment", "rho", parse_real, 0.0),
        parseval=st.optional("experiment", "parseval", parse_bool, False),
    )


@_wrap_value_errors("[solver]")
def build_solver(st: Settings) -> SolverConfig:
    kwargs = {}
    for key, parse in _SOLVER_KEYS.items():
        parser = parse_bool if parse is bool else parse
        value = st.optional("solver", key, parser, None)
        if value is not None:
            kwargs["L_scale" if key == "l_scale" else key] = value
    kwargs.setdefault("tol_rel_obj", 1e-6)
    return SolverConfig(**kwargs)


@_wrap_value_errors("[experiment]")
def build_experiment(st: Settings, seed_override: int | None = None,
                     default_regime: str | None = None) -> ExperimentConfig:
    side = st.geo("side")
    master = st.optional("experiment", "master_seed", int, 0)
    if seed_override is not None:
        master = seed_override
    if default_regime is None:
        regime = st.require("experiment", "regime", str)
    else:
        regime = st.optional("experiment", "regime", str, default_regime)
    return ExperimentConfig(
        regime=regime,
        p=st.require("experiment", "p", parse_real),
        transform=build_transform(st, side=side),
        side=side,
        N_min=st.geo("n_min"),
        N_max=st.geo("n_max"),
        N_step=st.optional("experiment", "n_step", int, st.geometry["n_step"]),
        n_points=st.geo("n_points"),
        K=st.geo("k"),
        c_alpha=st.optional("experiment", "c_alpha", parse_real, None),
        c_delta_policy=st.optional("experiment", "c_delta_policy", str, "auto"),
        nonneg=st.optional("experiment", "nonneg", parse_bool, True),
        master_seed=master,
        n_ref=st.geo("n_ref"),
        solver=build_solver(st),
    )


@_wrap_value_errors("[phantom]")
def build_phantom(st: Settings) -> Image:
    side = st.geo("side")
    path = st.optional("phantom", "path", str, None)
    if path is not None:
        fmt = st.optional("phantom", "format", str, "raw_f64")
        img = load_image(path, fmt)
        if img.side != side:
            raise ValueError(f"phantom file side {img.side} != configured side {side}")
        return img
    kind = st.require("phantom", "kind", str)
    seed = st.optional("phantom", "seed", int, 0)
    return generate_phantom(kind, side, seed)


def gamma_params(st: Settings):
    raw = st.require("gamma", "p_list", str)
    try:
        p_list = tuple(parse_real(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for gamma.p_list: {exc}") from None
    if not p_list:
        raise ConfigError("gamma.p_list is empty")
    shared_seed = st.require("gamma", "shared_seed", int)
    return p_list, shared_seed


def compare_configs(st: Settings, seed_override: int | None = None):
    """Strategy list for the comparison: (kind:p)-pairs sharing one base config."""
    raw = st.require("compare", "strategies", str)
    tokens = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not tokens:
        raise ConfigError("compare.strategies is empty")
    base = _compare_base(st, seed_override)
    c_raw = st.optional("compare", "c_alphas", str, None)
    if c_raw is None:
        c_alphas = [None] * len(tokens)
    else:
        entries = [tok.strip() for tok in c_raw.split(",")]
        if len(entries) != len(tokens):
            raise ConfigError(
                f"compare.c_alphas lists {len(entries)} values for {len(tokens)} strategies")
        try:
            c_alphas = [None if e in ("", "pilot") else parse_real(e) for e in entries]
        except ValueError as exc:
            raise ConfigError(f"bad value for compare.c_alphas: {exc}") from None
    cfgs = []
    for token, c_alpha in zip(tokens, c_alphas):
        kind, sep, p_text = token.partition(":")
        if not sep:
            raise ConfigError(f"bad strategy {token!r}; expected transform:p")
        try:
            p = parse_real(p_text)
            transform = make_transform(kind.strip(), base.side)
            cfgs.append(replace(base, p=p, transform=transform, c_alpha=c_alpha))
        except ValueError as exc:
            raise ConfigError(f"bad strategy {token!r}: {exc}") from None
    return cfgs


def _compare_base(st: Settings, seed_override):
    side = st.geo("side")
    master = st.optional("experiment", "master_seed", int, 0)
    if seed_override is not None:
        master = seed_override
    try:
        return ExperimentConfig(
            regime=st.require("experiment", "regime", str),
            p=2.0,
            transform=make_transform("identity", side),
            side=side,
            N_min=st.geo("n_min"),
            N_max=st.geo("n_max"),
            N_step=st.optional("experiment", "n_step", int, st.geometry["n_step"]),
            n_points=st.geo("n_points"),
            K=st.geo("k"),
            c_alpha=None,
            c_delta_policy=st.optional("experiment", "c_delta_policy", str, "auto"),
            nonneg=st.optional("experiment", "nonneg", parse_bool, True),
            master_seed=master,
            n_ref=st.geo("n_ref"),
            solver=build_solver(st),
        )
    except ValueError as exc:
        raise ConfigError(f"[experiment]: {exc}") from None


def sc_build_params(st: Settings):
    p = st.require("sc_build", "p", parse_real)
    alpha_sc = st.require("sc_build", "alpha_sc", parse_real)
    return p, alpha_sc


def sc_verify_params(st: Settings):
    beta = st.require("sc_verify", "beta", parse_real)
    k = st.optional("sc_verify", "k", int, st.geo("k"))
    return beta, k
