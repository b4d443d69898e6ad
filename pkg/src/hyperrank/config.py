"""Pipeline configuration: embedded TOML defaults, overrides and invariants."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .errors import ConfigInvalid
from .lacunary import tail

DEFAULT_TOML = """\
[run]
out = "hyperrank-run"
seed = 0
threads = 0  # 0 leaves the BLAS default

[lacunary]
truncation = 12
precision = 256
belov_m_max = 20

[cantor]
delta = 1e-3
resolution = 1048576
depth = 8

[quadrature]
panels = 2048
order = 16
levels = 36
sub_order = 8
direct_terms = 2
direct_order = 20

[identities]
lambdas = 32
path = "both"
continuity_per_octave = 8

[model]
sizes = [8, 16, 32, 64]

[decompose]
methods = ["te", "contraction"]

[orbit]
steps = 512
eps = 0.05
seeds = 5
trend_sizes = [8, 16, 32]
unitary_steps = 10000
weyl_steps = 100000
weyl_theta = 0.6180339887498949
"""

DEFAULTS = tomllib.loads(DEFAULT_TOML)


def _merge(base, override, where=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{where}{key}"
        if key not in base:
            raise ConfigInvalid(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigInvalid(f"{name!r} must be a table")
            out[key] = _merge(base[key], val, name + ".")
            continue
        ref = base[key]
        if isinstance(ref, bool) or isinstance(val, bool):
            ok = isinstance(val, type(ref))
        elif isinstance(ref, float):
            ok = isinstance(val, (int, float))
            val = float(val) if ok else val
        else:
            ok = isinstance(val, type(ref))
        if not ok:
            raise ConfigInvalid(f"{name!r} must be {type(ref).__name__}, got {type(val).__name__}")
        out[key] = val
    return out


class PipelineConfig:
    """Validated configuration; ``cfg["cantor"]["depth"]`` etc.

    Invariants checked on construction: ``9 N + 53 <= B`` (the top lacunary
    frequency still leaves double-precision bits in a B-bit angle),
    ``delta > tail(N)`` and ``m <= 2**depth`` for every requested lambda count.
    """

    def __init__(self, overrides=None):
        self.data = _merge(DEFAULTS, overrides or {})
        self.validate()

    @classmethod
    def from_toml(cls, text):
        try:
            return cls(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid(f"config is not valid TOML: {exc}") from exc

    @classmethod
    def load(cls, path):
        return cls.from_toml(Path(path).read_text())

    def __getitem__(self, key):
        return self.data[key]

    def replace(self, **sections):
        """Copy with ``section={key: value}`` overrides applied."""
        return PipelineConfig(_merge(self.data, sections))

    def validate(self):
        lac, can, ids = self.data["lacunary"], self.data["cantor"], self.data["identities"]
        N, B = lac["truncation"], lac["precision"]
        if N < 1:
            raise ConfigInvalid("truncation must be at least 1")
        if B <= 0 or B % 64:
            raise ConfigInvalid("precision must be a positive multiple of 64")
        if 9 * N + 53 > B:
            raise ConfigInvalid(f"9N + 53 = {9 * N + 53} exceeds the angle precision {B}")
        if not can["delta"] > tail(N):
            raise ConfigInvalid(f"delta = {can['delta']:g} must exceed tail(N) = {tail(N):.3g}")
        d = can["depth"]
        if d < 1:
            raise ConfigInvalid("depth must be at least 1")
        counts = [ids["lambdas"], *self.data["model"]["sizes"], *self.data["orbit"]["trend_sizes"]]
        if any(m < 1 for m in counts):
            raise ConfigInvalid("lambda counts must be positive")
        if max(counts) > 2**d:
            raise ConfigInvalid(f"lambda count {max(counts)} exceeds 2**depth = {2**d}")
        if not set(self.data["orbit"]["trend_sizes"]) <= set(self.data["model"]["sizes"]):
            raise ConfigInvalid("orbit.trend_sizes must be a subset of model.sizes")
        if ids["path"] not in ("analytic", "direct", "both"):
            raise ConfigInvalid("identities.path is analytic, direct or both")
        if not set(self.data["decompose"]["methods"]) <= {"te", "contraction"} or not self.data["decompose"]["methods"]:
            raise ConfigInvalid("decompose.methods must be a non-empty subset of te, contraction")
        orb = self.data["orbit"]
        if orb["eps"] <= 0 or min(orb["steps"], orb["seeds"], orb["unitary_steps"], orb["weyl_steps"]) < 1:
            raise ConfigInvalid("orbit budgets and eps must be positive")
        if can["resolution"] < 2 or self.data["run"]["threads"] < 0:
            raise ConfigInvalid("resolution must be at least 2 and threads non-negative")

    def to_toml(self):
        return tomli_w.dumps(self.data)

    def hash(self, *sections):
        """SHA-256 of the canonical JSON of ``sections`` (all when none given)."""
        keys = sections or tuple(sorted(self.data))
        blob = json.dumps({k: self.data[k] for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()
