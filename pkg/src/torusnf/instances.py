"""Instance files and report documents.

An instance is a JSON object::

    {"dim": 2, "omega": [[1, 0], [0, 2]], "b": [0.1, -0.05],
     "generator": [{"j": [3, 0], "k": [1, 0], "re": 0.01, "im": 0.02},
                   {"j": [3, 0], "k": [-1, 0], "re": 0.01, "im": -0.02}, ...],
     "degree_cap": 17, "seed": 0, "mode": "free",
     "tolerances": {"divisibility": 1e-9, "a3": 1e-8}}

``generator`` may instead be ``{"random": {...}}`` (keyword arguments of
``random_generator``, seeded by ``seed``), and ``hamiltonian`` may replace
``generator`` to give ``H`` term by term.  Reports are JSON with sorted keys,
``repr`` floats and non-finite values spelled as strings, so identical runs
produce byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .factory import make_instance, random_generator
from .homology import DIVISIBILITY_RTOL, QuadraticForm
from .normal_form import A3_RTOL, NormalFormProfile
from .series import DimensionMismatch, TFSeries, check_real_symmetric

__all__ = [
    "SCHEMA_VERSION",
    "InstanceError",
    "InstanceSpec",
    "load_instance",
    "dump_json",
    "sanitize",
    "file_digest",
]

SCHEMA_VERSION = 1
MODES = ("free", "compliant")


class InstanceError(ValueError):
    """Malformed instance; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"instance field {field_name!r}: {message}")


@dataclass
class InstanceSpec:
    dim: int
    omega: QuadraticForm
    b: tuple
    degree_cap: int
    generator: TFSeries | None = None
    hamiltonian: TFSeries | None = None
    seed: int = 0
    mode: str = "free"
    tolerances: dict = field(default_factory=dict)
    rho0: float = 1.0
    name: str = ""

    @property
    def profile(self) -> NormalFormProfile:
        return NormalFormProfile(self.omega, self.b)

    @property
    def divisibility_tol(self) -> float:
        return float(self.tolerances.get("divisibility", DIVISIBILITY_RTOL))

    @property
    def a3_tol(self) -> float:
        return float(self.tolerances.get("a3", A3_RTOL))

    def build_hamiltonian(self) -> TFSeries:
        if self.hamiltonian is not None:
            return self.hamiltonian.with_cap(self.degree_cap)
        return make_instance(self.profile, self.generator, self.degree_cap)

    @classmethod
    def from_dict(cls, doc: dict, name: str = "") -> "InstanceSpec":
        if not isinstance(doc, dict):
            raise InstanceError("<root>", "expected a JSON object")
        dim = _require(doc, "dim")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise InstanceError("dim", f"expected a positive integer, got {dim!r}")
        try:
            om = np.array(_require(doc, "omega"), dtype=float)
        except (TypeError, ValueError) as exc:
            raise InstanceError("omega", f"not a numeric matrix ({exc})") from None
        if om.shape != (dim, dim):
            raise InstanceError("omega", f"expected shape ({dim}, {dim}), got {om.shape}")
        try:
            omega = QuadraticForm(om)
        except ValueError as exc:
            raise InstanceError("omega", str(exc)) from None
        b = doc.get("b", [])
        if not isinstance(b, list) or not all(_is_number(x) for x in b):
            raise InstanceError("b", "expected a list of numbers [b2, b3, ...]")
        cap = _require(doc, "degree_cap")
        if not isinstance(cap, int) or isinstance(cap, bool) or cap < 2:
            raise InstanceError("degree_cap", f"expected an integer >= 2, got {cap!r}")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise InstanceError("seed", f"expected an integer, got {seed!r}")
        mode = doc.get("mode", "free")
        if mode not in MODES:
            raise InstanceError("mode", f"expected one of {MODES}, got {mode!r}")
        tol = doc.get("tolerances", {})
        if not isinstance(tol, dict) or not all(_is_number(v) and v > 0 for v in tol.values()):
            raise InstanceError("tolerances", "expected an object of positive numbers")
        unknown = set(tol) - {"divisibility", "a3"}
        if unknown:
            raise InstanceError("tolerances", f"unknown keys {sorted(unknown)}")
        rho0 = doc.get("rho0", 1.0)
        if not _is_number(rho0) or not 0 < rho0 <= 1:
            raise InstanceError("rho0", f"expected a number in (0, 1], got {rho0!r}")

        has_g, has_h = "generator" in doc, "hamiltonian" in doc
        if has_g == has_h:
            raise InstanceError("generator", "exactly one of 'generator' and 'hamiltonian' is required")
        spec = cls(dim, omega, tuple(float(x) for x in b), cap, seed=seed, mode=mode,
                   tolerances=dict(tol), rho0=float(rho0), name=name)
        if has_g:
            g = doc["generator"]
            if isinstance(g, dict) and "random" in g:
                opts = g["random"]
                if not isinstance(opts, dict):
                    raise InstanceError("generator", "'random' must map to an object of options")
                try:
                    spec.generator = random_generator(dim, seed, degree_cap=cap, **opts)
                except (TypeError, ValueError) as exc:
                    raise InstanceError("generator", str(exc)) from None
            else:
                spec.generator = _series_field(doc, "generator", dim, cap)
            if len(spec.generator) and spec.generator.min_degree < 2:
                raise InstanceError("generator", "terms of degree < 2 are not allowed")
            if len(spec.generator.zero_mode()):
                raise InstanceError("generator", "generator must have no k = 0 terms")
        else:
            spec.hamiltonian = _series_field(doc, "hamiltonian", dim, cap)
        return spec

    def to_dict(self) -> dict:
        doc = {"dim": self.dim, "omega": self.omega.omega.tolist(), "b": list(self.b),
               "degree_cap": self.degree_cap, "seed": self.seed, "mode": self.mode}
        if self.tolerances:
            doc["tolerances"] = dict(self.tolerances)
        if self.rho0 != 1.0:
            doc["rho0"] = self.rho0
        if self.generator is not None:
            doc["generator"] = self.generator.to_records()
        else:
            doc["hamiltonian"] = self.hamiltonian.to_records()
        return doc


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _require(doc: dict, key: str):
    if key not in doc:
        raise InstanceError(key, "missing")
    return doc[key]


def _series_field(doc: dict, key: str, dim: int, cap: int) -> TFSeries:
    records = doc[key]
    if not isinstance(records, list):
        raise InstanceError(key, "expected a list of {j, k, re, im} records")
    try:
        for r in records:
            for part in ("j", "k"):
                if not all(isinstance(x, int) and not isinstance(x, bool) for x in r[part]):
                    raise ValueError(f"{part} must hold integers")
            if any(x < 0 for x in r["j"]):
                raise ValueError("exponents j must be non-negative")
        series = TFSeries.from_records(dim, cap, records)
    except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
        raise InstanceError(key, f"bad term record ({exc})") from None
    scale = float(np.abs(series.coeffs).max()) if len(series) else 0.0
    ok, worst = check_real_symmetric(series, 1e-12 * scale)
    if not ok:
        raise InstanceError(key, f"series is not real: the term at -k must be the conjugate of the term at k "
                                 f"(mismatch {worst:.3e})")
    return series


def load_instance(path: str | Path) -> InstanceSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise InstanceError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InstanceError("<file>", f"not valid JSON ({exc})") from None
    return InstanceSpec.from_dict(doc, name=path.stem)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sanitize(obj):
    """Make ``obj`` strictly JSON-serializable with deterministic content."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dump_json(doc, path: str | Path | None = None) -> str:
    text = json.dumps(sanitize(doc), indent=1, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
