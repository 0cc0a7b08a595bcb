"""Experiment description and its key = value config-file format.

The config grammar is INI-style (section headers, `key = value` pairs,
`;`/`#` comments); see the README for the documented keys.  Every run is
reproducible from the scenario plus its seed: randomness is split into named
streams (users, victims, symbols) indexed by realization.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

from .util import rng_stream

DEFAULT_PA_COEFFICIENTS = (1.0 + 0.0j, -0.03491 + 0.005650j)

OP_MODES = ("compression_1db", "explicit_power", "unit")
CHANNEL_KINDS = ("rayleigh", "los")


class ConfigError(ValueError):
    """A scenario file or scenario parameters are invalid."""


@dataclass
class Scenario:
    """Full description of one experiment."""

    n_antennas: int = 100
    n_users: int = 10
    channel_kind: str = "rayleigh"
    channel_taps: int = 75
    user_angles_deg: tuple | None = None
    victim_kind: str | None = None  # defaults to channel_kind

    rolloff: float = 0.22
    span: int = 32
    oversampling: int = 5
    symbol_period: float = 1.0

    pa_coefficients: tuple = DEFAULT_PA_COEFFICIENTS
    operating_point: str = "compression_1db"
    input_power: float | None = None
    per_antenna_scaling: bool = False

    allocation: tuple | None = None  # None means equal power
    pathloss: tuple | None = None  # None means all ones

    seed: int = 1
    output_dir: str = "out"
    nfft: int = 4096
    pattern_resolution_deg: float = 0.25
    spacing_over_wavelength: float = 0.5
    ccdf_freqs_over_b: tuple = (0.0, 0.5, 1.0, 1.5)

    def __post_init__(self):
        if self.oversampling < 2:
            raise ConfigError("oversampling must be >= 2")
        if not 1 <= self.n_users <= self.n_antennas:
            raise ConfigError("need 1 <= users <= antennas")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ConfigError(f"channel must be one of {CHANNEL_KINDS}")
        if self.victim_kind is not None and self.victim_kind not in CHANNEL_KINDS:
            raise ConfigError(f"victim kind must be one of {CHANNEL_KINDS}")
        if self.operating_point not in OP_MODES:
            raise ConfigError(f"operating_point must be one of {OP_MODES}")
        if self.operating_point == "explicit_power" and (self.input_power is None or self.input_power <= 0):
            raise ConfigError("explicit_power needs a positive input_power")
        if self.channel_kind == "rayleigh" and self.channel_taps < 1:
            raise ConfigError("channel_taps must be >= 1")
        if self.allocation is not None and len(self.allocation) != self.n_users:
            raise ConfigError("allocation must list one weight per user")
        if self.pathloss is not None and len(self.pathloss) != self.n_users:
            raise ConfigError("pathloss must list one coefficient per user")

    @property
    def bandwidth(self) -> float:
        return (1.0 + self.rolloff) / self.symbol_period

    def resolved_user_angles(self) -> np.ndarray:
        """LOS user directions in radians.

        Unless configured, directions are drawn once per seed: uniform over
        +-60 deg with at least 4 deg separation.  A perfectly regular grid is
        a degenerate geometry (the third-order intermod beams of evenly
        spaced users stack coherently), so the default is a generic draw.
        """
        if self.user_angles_deg is not None:
            return np.deg2rad(np.asarray(self.user_angles_deg, dtype=float))
        if self.n_users == 1:
            return np.zeros(1)
        rng = self.rng("user-angles")
        while True:
            angles = np.sort(rng.uniform(-60.0, 60.0, self.n_users))
            if np.diff(angles).min() >= 4.0:
                return np.deg2rad(angles)

    def resolved_pathloss(self) -> np.ndarray:
        if self.pathloss is None:
            return np.ones(self.n_users)
        return np.asarray(self.pathloss, dtype=float)

    def rng(self, stream: str, index: int = 0) -> np.random.Generator:
        return rng_stream(self.seed, stream, index)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _parse_complex_pairs(text: str) -> tuple:
    """Branch gains as comma-separated `re im` pairs, e.g. `1 0, -0.03 0.005`."""
    branches = []
    for part in text.split(","):
        fields = part.split()
        if len(fields) != 2:
            raise ConfigError(f"PA coefficient {part!r} is not a `re im` pair")
        branches.append(complex(float(fields[0]), float(fields[1])))
    if not branches:
        raise ConfigError("no PA coefficients given")
    return tuple(branches)


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    """Read a scenario config file; `overrides` wins over file values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error in {path}: {exc}") from exc

    kwargs = {}

    def grab(section, key, cast, target=None):
        if parser.has_option(section, key):
            try:
                kwargs[target or key] = cast(parser.get(section, key))
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc

    grab("system", "antennas", int, "n_antennas")
    grab("system", "users", int, "n_users")
    grab("system", "channel", str.strip, "channel_kind")
    grab("system", "channel_taps", int)
    grab("system", "user_angles_deg", _parse_floats)
    grab("system", "victim", str.strip, "victim_kind")
    grab("system", "spacing_over_wavelength", float)

    grab("pulse", "rolloff", float)
    grab("pulse", "span", int)
    grab("pulse", "oversampling", int)
    grab("pulse", "symbol_period", float)

    grab("pa", "coefficients", _parse_complex_pairs, "pa_coefficients")
    grab("pa", "operating_point", str.strip)
    grab("pa", "input_power", float)
    grab("pa", "per_antenna_scaling", lambda v: v.strip().lower() in ("1", "true", "yes"))

    if parser.has_option("power", "allocation"):
        raw = parser.get("power", "allocation").strip()
        kwargs["allocation"] = None if raw == "equal" else _parse_floats(raw)
    if parser.has_option("power", "pathloss"):
        vals = _parse_floats(parser.get("power", "pathloss"))
        kwargs["pathloss"] = vals

    grab("seeds", "seed", int)
    grab("output", "directory", str.strip, "output_dir")
    grab("output", "nfft", int)

    if overrides:
        kwargs.update(overrides)
    # a single pathloss value applies to every user
    users = kwargs.get("n_users", 10)
    if kwargs.get("pathloss") is not None and len(kwargs["pathloss"]) == 1:
        kwargs["pathloss"] = kwargs["pathloss"] * users
    try:
        return Scenario(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad scenario field: {exc}") from exc
