"""Scenario configuration: sectioned ``key = value`` text.

A scenario file looks like::

    [array]
    tx_shape = 8
    rx_shape = 8

    [channel]
    seed = 7
    kappa = 10

Sections are ``array``, ``channel``, ``beamforming``, ``cancellation``,
``budget``, ``users`` and ``output``. Lines starting with ``#`` or ``;``
are comments. Unknown sections or keys, malformed values and invariant
violations raise `ScenarioError` carrying the section and line number.
Every key left out is filled from its default and logged.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, fields, make_dataclass
from typing import Callable

from .channel import ClusteredChannelParams
from .errors import ScenarioError
from .geometry import ArrayGeometry, Pose, linear_array, planar_array

log = logging.getLogger(__name__)

SEED_ENV = "FDXSIM_SEED"
DEFAULT_SEED = 0
U64 = 2 ** 64


# value converters ---------------------------------------------------------

def _float(text: str) -> float:
    x = float(text)
    if math.isnan(x):
        raise ValueError("nan is not allowed")
    return x


def _finite(text: str) -> float:
    x = _float(text)
    if not math.isfinite(x):
        raise ValueError("value must be finite")
    return x


def _int(text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _seed(text: str) -> int:
    s = _int(text)
    if not 0 <= s < U64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return s


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _optional(conv):
    def inner(text):
        return None if text.lower() == "none" else conv(text)
    return inner


def _choice(*options):
    def inner(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return inner


def _float_list(text: str) -> tuple:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("list is empty")
    return tuple(_float(t) for t in items)


def _shape(text: str) -> tuple:
    """``"8"`` is a linear array, ``"4x4"`` a planar one."""
    parts = text.lower().split("x")
    if len(parts) > 2:
        raise ValueError(f"bad array shape {text!r}")
    dims = tuple(_int(p.strip()) for p in parts)
    if min(dims) < 1:
        raise ValueError("array dimensions must be >= 1")
    return dims


def _phase_bits(text: str):
    if text == "ideal":
        return "ideal"
    b = _int(text)
    if b < 1:
        raise ValueError("phase_bits must be >= 1 or ideal")
    return b


def _candidates(text: str) -> tuple:
    """``"A:4, B:4, C:2"`` -> ((A, 4), (B, 4), (C, 2))."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        uid, sep, n = item.partition(":")
        uid = uid.strip()
        if not sep or not uid:
            raise ValueError(f"candidate {item!r} must look like id:elements")
        k = _int(n.strip())
        if k < 1:
            raise ValueError(f"candidate {uid!r} needs at least one element")
        out.append((uid, k))
    if not out:
        raise ValueError("no candidates given")
    ids = [u for u, _ in out]
    if len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique")
    return tuple(out)


def _vector3(text: str) -> tuple:
    v = tuple(_finite(t.strip()) for t in text.split(","))
    if len(v) != 3:
        raise ValueError("expected three comma separated numbers")
    return v


# checks -------------------------------------------------------------------

def _positive(x):
    if not x > 0:
        raise ValueError("must be > 0")


def _nonneg(x):
    if x is not None and not x >= 0:
        raise ValueError("must be >= 0")


def _at_least_one(x):
    if x is not None and x < 1:
        raise ValueError("must be >= 1")


def _fraction(x):
    if not 0 < x <= 1:
        raise ValueError("must be in (0, 1]")


def _ranges(xs):
    if any(not x > 0 for x in xs):
        raise ValueError("ranges must be > 0 (inf allowed)")


def _nonneg_list(xs):
    if any(not x >= 0 for x in xs):
        raise ValueError("entries must be >= 0")


# dump helpers for serialization -------------------------------------------

def _dump(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{u}:{n}" for u, n in v)
        if v and isinstance(v[0], int) and not isinstance(v[0], bool):
            return "x".join(str(d) for d in v)
        return ", ".join(_dump(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class Key:
    conv: Callable
    default: object
    check: Callable | None = None
    doc: str = ""


SCHEMA: dict[str, dict[str, Key]] = {
    "array": {
        "tx_shape": Key(_shape, (8,), doc="elements, or rows x cols"),
        "rx_shape": Key(_shape, (8,)),
        "spacing": Key(_finite, 0.5, _positive, "element pitch in wavelengths"),
        "rx_gap": Key(_finite, 2.0, _nonneg, "edge-to-edge gap, wavelengths"),
        "rx_tilt_deg": Key(_finite, 0.0),
        "rx_offset": Key(_optional(_vector3), None,
                         doc="explicit rx translation; overrides rx_gap"),
        "af_ranges": Key(_float_list, (math.inf, 24.5), _ranges,
                         "array-factor ranges in wavelengths"),
        "af_points": Key(_int, 721, _at_least_one),
        "af_normalize": Key(_bool, False),
    },
    "channel": {
        "seed": Key(_optional(_seed), None, doc="master seed"),
        "kappa": Key(_float, 10.0, _nonneg),
        "isolation_db": Key(_finite, 40.0),
        "num_clusters": Key(_int, 3, _at_least_one),
        "rays_per_cluster": Key(_int, 5, _at_least_one),
        "ray_angle_stddev_deg": Key(_finite, 5.0, _nonneg),
    },
    "beamforming": {
        "n_streams": Key(_int, 1, _at_least_one),
        "n_rf": Key(_optional(_int), None, _at_least_one, "none = fully digital"),
        "phase_bits": Key(_phase_bits, "ideal"),
        "codebook_oversampling": Key(_int, 1, _at_least_one),
        "refine_budget_db": Key(_finite, 0.0, _nonneg),
    },
    "cancellation": {
        "strategy": Key(_choice("regularized", "zero_forcing"), "regularized"),
        "mu": Key(_finite, 1e5, _nonneg),
        "mu_grid": Key(_float_list, (0.0,) + tuple(10.0 ** k for k in range(-2, 9)),
                       _nonneg_list),
        "rank": Key(_optional(_int), None, _nonneg),
        "energy_fraction": Key(_finite, 0.99, _fraction),
        "design": Key(_choice("receive_aware", "sequential"), "receive_aware"),
        "rx_mode": Key(_choice("regularized", "zero_forcing"), "regularized"),
        "analog_sigma": Key(_optional(_finite), 0.1, _nonneg, "none disables analog SIC"),
        "digital_db": Key(_finite, 20.0, _nonneg),
        "perfect_sic": Key(_bool, False),
    },
    "budget": {
        "tx_power_dbm": Key(_finite, 30.0),
        "bandwidth_hz": Key(_finite, 400e6, _positive),
        "noise_figure_db": Key(_finite, 5.0),
        "lna_sat_dbm": Key(_finite, -10.0),
        "adc_sat_dbm": Key(_finite, -30.0),
        "rx_snr_db": Key(_finite, 10.0),
        "tx_snr_db": Key(_finite, 10.0),
        "adc_coupling_db": Key(_optional(_finite), None,
                               doc="set to use a plain dB chain for levels"),
        "lna_coupling_db": Key(_optional(_finite), None),
    },
    "users": {
        "downlink_elements": Key(_int, 4, _at_least_one),
        "uplink_elements": Key(_int, 4, _at_least_one),
        "candidates": Key(_candidates, (("A", 4), ("B", 4), ("C", 4))),
        "policy": Key(_choice("max_rate", "max_orthogonality"), "max_rate"),
    },
    "output": {
        "directory": Key(str, "fdxsim_out"),
        "figures": Key(_bool, True),
    },
}


def _section_class(name: str, keys: dict[str, Key]):
    cls = make_dataclass(name.capitalize() + "Config",
                         [(k, object) for k in keys], frozen=True)
    cls.__doc__ = f"Validated ``[{name}]`` section."
    return cls


SECTION_TYPES = {name: _section_class(name, keys) for name, keys in SCHEMA.items()}


@dataclass(frozen=True)
class Scenario:
    array: object
    channel: object
    beamforming: object
    cancellation: object
    budget: object
    users: object
    output: object

    def budget_obj(self):
        from .link import LinkBudget
        b = self.budget
        return LinkBudget(b.tx_power_dbm, b.bandwidth_hz, b.noise_figure_db,
                          b.lna_sat_dbm, b.adc_sat_dbm, b.rx_snr_db, b.tx_snr_db)


def _tokenize(text: str):
    """Yield (section, key, value, line) and report unknown sections."""
    section = None
    seen: dict[tuple, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"malformed section header {line!r}", line=lineno)
            section = line[1:-1].strip().lower()
            if section not in SCHEMA:
                raise ScenarioError(f"unknown section {section!r}", section, lineno)
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or not key:
            raise ScenarioError(f"expected key = value, got {line!r}", section, lineno)
        if section is None:
            raise ScenarioError(f"key {key!r} outside any section", line=lineno)
        if key not in SCHEMA[section]:
            raise ScenarioError(f"unknown key {key!r}", section, lineno)
        if (section, key) in seen:
            raise ScenarioError(f"duplicate key {key!r} (first on line {seen[section, key]})",
                                section, lineno)
        seen[section, key] = lineno
        yield section, key, value.strip(), lineno


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; log every default applied."""
    given: dict[str, dict] = {s: {} for s in SCHEMA}
    for section, key, value, lineno in _tokenize(text):
        entry = SCHEMA[section][key]
        try:
            parsed = entry.conv(value)
            if entry.check is not None:
                entry.check(parsed)
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"{key} = {value!r}: {exc}", section, lineno) from None
        given[section][key] = parsed
    sections = {}
    for section, keys in SCHEMA.items():
        values = {}
        for key, entry in keys.items():
            if key in given[section]:
                values[key] = given[section][key]
            else:
                values[key] = entry.default
                log.info("default [%s] %s = %s", section, key, _dump(entry.default))
        sections[section] = SECTION_TYPES[section](**values)
    scn = Scenario(**sections)
    _cross_check(scn)
    return scn


def _cross_check(scn: Scenario) -> None:
    bf = scn.beamforming
    n_tx, n_rx = n_elements(scn.array.tx_shape), n_elements(scn.array.rx_shape)
    if bf.n_streams > min(n_tx, n_rx):
        raise ScenarioError(f"n_streams {bf.n_streams} exceeds the array size", "beamforming")
    if bf.n_rf is not None and not bf.n_streams <= bf.n_rf <= min(n_tx, n_rx):
        raise ScenarioError("n_rf must satisfy n_streams <= n_rf <= array size", "beamforming")
    if bf.n_streams > min(scn.users.downlink_elements, scn.users.uplink_elements):
        raise ScenarioError("n_streams exceeds a user array size", "users")
    if scn.cancellation.rank is not None and scn.cancellation.rank > min(n_tx, n_rx):
        raise ScenarioError("rank exceeds min(Nr, Nt)", "cancellation")


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(scn: Scenario) -> str:
    """Text that parses back to an equal Scenario (every key explicit)."""
    out = []
    for section in SCHEMA:
        out.append(f"[{section}]")
        cfg = getattr(scn, section)
        for f in fields(cfg):
            out.append(f"{f.name} = {_dump(getattr(cfg, f.name))}")
        out.append("")
    return "\n".join(out)


# derived objects ----------------------------------------------------------

def n_elements(shape: tuple) -> int:
    return math.prod(shape)


def build_array(shape: tuple, spacing: float) -> ArrayGeometry:
    if len(shape) == 1:
        return linear_array(shape[0], spacing)
    return planar_array(shape[0], shape[1], spacing)


def arrays(scn: Scenario):
    a = scn.array
    return build_array(a.tx_shape, a.spacing), build_array(a.rx_shape, a.spacing)


def rx_pose(scn: Scenario, tx: ArrayGeometry, rx: ArrayGeometry) -> Pose:
    a = scn.array
    tilt = math.radians(a.rx_tilt_deg)
    if a.rx_offset is not None:
        return Pose.from_tilt(tilt, a.rx_offset)
    # gap measured on the tilted array's x extent
    tilted = Pose.from_tilt(tilt).apply(rx.elements)
    shift = tx.elements[:, 0].max() + a.rx_gap - tilted[:, 0].min()
    return Pose.from_tilt(tilt, (shift, 0.0, 0.0))


def resolve_seed(cli_seed: int | None, scn: Scenario, environ=None) -> int:
    """``--seed`` beats the config seed, which beats $FDXSIM_SEED, then 0."""
    environ = os.environ if environ is None else environ
    if cli_seed is not None:
        seed, source = cli_seed, "--seed"
    elif scn.channel.seed is not None:
        seed, source = scn.channel.seed, "config"
    elif environ.get(SEED_ENV, "").strip():
        try:
            seed = _seed(environ[SEED_ENV].strip())
        except ValueError as exc:
            raise ScenarioError(f"{SEED_ENV}: {exc}") from None
        source = SEED_ENV
    else:
        seed, source = DEFAULT_SEED, "default"
    if not 0 <= seed < U64:
        raise ScenarioError("seed must be an unsigned 64-bit integer")
    log.info("seed %d (from %s)", seed, source)
    return seed


def substream_seed(master: int, label: str) -> int:
    """Independent 64-bit seed for one purpose, derived from the master seed."""
    h = hashlib.blake2b(f"{master}:{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def cluster_params(scn: Scenario, master: int, label: str) -> ClusteredChannelParams:
    c = scn.channel
    return ClusteredChannelParams(c.num_clusters, c.rays_per_cluster,
                                  math.radians(c.ray_angle_stddev_deg),
                                  substream_seed(master, label))
