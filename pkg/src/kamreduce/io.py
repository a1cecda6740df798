"""Configuration files, reports and the binary transform dump.

Configuration and potentials share one TOML format.  Top-level keys describe
the potential (``n``, ``N``, ``M``, ``omega0``, ``gamma``, ``epsilon`` and
either ``fourier_modes`` or a ``[grid]`` table, or ``preset = "desk"``); a
``potential = "file.toml"`` key pulls those keys from another file.
Optional tables ``[reduction]`` and ``[verify]`` hold run settings.

Transform dump layout (little endian)::

    b"KAMR"  u32 version  u32 n  u32 J  u32 steps  steps * u32 mode_count
    per step, per mode:  n * i32 k  then J*J complex as interleaved float64
"""

from __future__ import annotations

import json
import math
import struct
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .engine import ReductionSettings
from .exceptions import ArtifactError, ConfigError
from .fourier import FourierMatrix
from .potential import PotentialSpec, desk_potential

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAGIC = b"KAMR"
VERSION = 1

POTENTIAL_KEYS = ("n", "N", "M", "omega0", "gamma", "epsilon", "fourier_modes", "grid", "preset")
SETTINGS_KEYS = {f.name for f in fields(ReductionSettings)}


@dataclass
class VerifySettings:
    T: float = 100.0
    tol: float = 1e-10
    samples: int = 1000
    lyapunov_T: float = 1000.0
    lyapunov_tol: float = 1e-8
    lyapunov_samples: int = 2000
    lyapunov_bound: float = 1e-3
    max_ratio: float | None = None
    residual_factor: float = 10.0


@dataclass
class RunConfig:
    spec: PotentialSpec
    settings: ReductionSettings
    verify: VerifySettings
    tau: float | str | None = None
    scan_count: int = 3
    seed: int = 0
    source: dict = field(default_factory=dict)


def load_toml(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _require(doc, key, kind):
    if key not in doc:
        raise ConfigError(f"missing key '{key}'")
    value = doc[key]
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for '{key}': {value!r}") from exc


def potential_from_dict(doc):
    """Build a :class:`PotentialSpec` from parsed keys."""
    if doc.get("preset") is not None:
        if doc["preset"] != "desk":
            raise ConfigError(f"unknown preset {doc['preset']!r}")
        kwargs = {k: doc[k] for k in ("epsilon", "N", "M", "gamma") if k in doc}
        return desk_potential(**kwargs)
    n = _require(doc, "n", int)
    if n < 1:
        raise ConfigError("n must be >= 1")
    N = _require(doc, "N", int)
    M = float(doc.get("M", 0.0))
    omega0 = np.atleast_1d(np.asarray(doc.get("omega0", [1.0] * n), dtype=float))
    if omega0.shape != (n,):
        raise ConfigError(f"omega0 must have {n} entries")
    gamma = _require(doc, "gamma", float)
    epsilon = _require(doc, "epsilon", float)
    if epsilon < 0 or not math.isfinite(epsilon):
        raise ConfigError("epsilon must be a finite number >= 0")
    if "fourier_modes" in doc and "grid" in doc:
        raise ConfigError("give either fourier_modes or grid, not both")
    if "fourier_modes" in doc:
        rows = doc["fourier_modes"]
        try:
            modes = [(int(r[0]), [int(x) for x in r[1]], float(r[2]), float(r[3])) for r in rows]
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError("fourier_modes rows must be [j, [k...], re, im]") from exc
        spec = PotentialSpec.from_modes(n, N, M, omega0, gamma, epsilon, modes)
    elif "grid" in doc:
        grid = doc["grid"]
        shape = tuple(int(s) for s in grid.get("shape", ()))
        samples = np.asarray(grid.get("samples", []), dtype=float)
        if len(shape) != n + 1 or samples.size != int(np.prod(shape)):
            raise ConfigError(f"grid samples do not match shape {shape}")
        spec = PotentialSpec.from_grid(n, N, M, omega0, gamma, epsilon, samples.reshape(shape),
                                       K_pot=grid.get("K_pot"), Jx=grid.get("Jx"))
    else:
        raise ConfigError("potential needs fourier_modes, grid or preset")
    return spec


def load_config(path, overrides=None):
    """Parse a run configuration; ``overrides`` maps setting names to values."""
    path = Path(path)
    doc = load_toml(path)
    pot_doc = dict(doc)
    if "potential" in doc:
        ref = Path(doc["potential"])
        if not ref.is_absolute():
            ref = path.parent / ref
        pot_doc = {**load_toml(ref), **{k: v for k, v in doc.items() if k in POTENTIAL_KEYS}}
    spec = potential_from_dict(pot_doc)

    red = dict(doc.get("reduction", {}))
    tau = red.pop("tau", None)
    scan_count = int(red.pop("scan_count", 3))
    seed = int(red.pop("seed", doc.get("seed", 0)))
    if "steps" in red:
        red["max_steps"] = red.pop("steps")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "tau":
            tau = value
        elif key == "seed":
            seed = int(value)
        else:
            red[key] = value
    unknown = set(red) - SETTINGS_KEYS
    if unknown:
        raise ConfigError(f"unknown reduction settings: {sorted(unknown)}")
    try:
        settings = ReductionSettings(**red).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    ver = dict(doc.get("verify", {}))
    unknown = set(ver) - {f.name for f in fields(VerifySettings)}
    if unknown:
        raise ConfigError(f"unknown verify settings: {sorted(unknown)}")
    verify = VerifySettings(**ver)
    if verify.T <= 0 or verify.tol <= 0 or verify.samples < 1:
        raise ConfigError("verify.T, verify.tol and verify.samples must be positive")

    if isinstance(tau, str):
        if tau != "scan":
            try:
                tau = float(tau)
            except ValueError as exc:
                raise ConfigError(f"tau must be a number or 'scan', got {tau!r}") from exc
    if isinstance(tau, (int, float)) and not isinstance(tau, bool):
        tau = float(tau)
        if not 1.0 <= tau <= 2.0:
            raise ConfigError(f"tau must lie in [1, 2], got {tau}")
    if scan_count < 1:
        raise ConfigError("scan_count must be >= 1")
    return RunConfig(spec, settings, verify, tau, scan_count, seed, doc)


# -- reports ---------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj):
    """Deterministic JSON text."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ArtifactError(f"missing artifact {path}") from exc
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"malformed JSON in {path}: {exc}") from exc


def retained_csv(history):
    """``step,a,b`` rows for every retained set in the history."""
    lines = ["step,a,b"]
    for step, pset in enumerate(history):
        for a, b in pset.intervals:
            lines.append(f"{step},{a!r},{b!r}")
    return "\n".join(lines) + "\n"


# -- transform dump ------------------------------------------------------------------

def write_transforms(path, maps, n, J):
    """Dump per-step maps ``G_m`` (nonzero modes only)."""
    blocks = []
    counts = []
    for G in maps:
        flat = G.flat()
        keep = np.nonzero(np.any(flat != 0, axis=(1, 2)))[0]
        ks = G.modes()[keep]
        counts.append(len(keep))
        parts = []
        for k, mat in zip(ks, flat[keep]):
            parts.append(np.asarray(k, dtype="<i4").tobytes())
            inter = np.empty(2 * J * J, dtype="<f8")
            inter[0::2] = mat.real.ravel()
            inter[1::2] = mat.imag.ravel()
            parts.append(inter.tobytes())
        blocks.append(b"".join(parts))
    header = MAGIC + struct.pack("<IIII", VERSION, n, J, len(maps))
    header += struct.pack(f"<{len(counts)}I", *counts)
    Path(path).write_bytes(header + b"".join(blocks))


def read_transforms(path):
    """Inverse of :func:`write_transforms`; returns ``(maps, n, J)``."""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise ArtifactError(f"missing artifact {path}") from exc
    if len(data) < 20 or data[:4] != MAGIC:
        raise ArtifactError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, n, J, steps = struct.unpack_from("<IIII", data, 4)
    if version != VERSION:
        raise ArtifactError(f"{path}: unsupported version {version}")
    off = 20
    if len(data) < off + 4 * steps:
        raise ArtifactError(f"{path}: truncated header")
    counts = struct.unpack_from(f"<{steps}I", data, off)
    off += 4 * steps
    rec = 4 * n + 16 * J * J
    if len(data) != off + rec * sum(counts):
        raise ArtifactError(f"{path}: size mismatch")
    maps = []
    for count in counts:
        modes = {}
        for _ in range(count):
            k = tuple(int(x) for x in np.frombuffer(data, "<i4", n, off))
            off += 4 * n
            inter = np.frombuffer(data, "<f8", 2 * J * J, off)
            off += 16 * J * J
            modes[k] = (inter[0::2] + 1j * inter[1::2]).reshape(J, J)
        maps.append(FourierMatrix.from_modes(modes, n, J) if modes
                    else FourierMatrix.zeros(n, J))
    return maps, n, J
