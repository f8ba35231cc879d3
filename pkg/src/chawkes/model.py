"""Model parameterization for constrained Hawkes processes with exponential kernels.

A model has ``p`` marks and ``q`` integer constraint components.  Mark ``i``
(1-based, as in the event log) is forbidden while the constraint vector ``S``
hits one of its per-component sets: ``S[j] in constraints[i-1][j]`` for some
component ``j``.  An empty per-component set never blocks.  Events of mark
``i`` shift ``S`` by ``jumps[i-1]``.

Arrays indexed by mark use position ``i-1`` for mark ``i``; the auxiliary
mark 0 has no row anywhere (its jump and weight are zero by convention).
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import SpecParseError, SpecValidationError

__all__ = [
    "ModelSpec",
    "PositivityWarning",
    "validate",
    "load_spec",
    "save_spec",
    "read_spec",
    "write_spec",
    "lob_preset",
    "mid_price_weights",
    "ask_weights",
    "bid_weights",
    "as_weights",
]


class PositivityWarning(UserWarning):
    """Constraint sets do not obviously keep ``S`` inside {1, 2, ...}."""


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModelSpec:
    p: int
    q: int
    beta: float
    fertility: np.ndarray
    mu0: np.ndarray
    mu0_null: float = 1.0
    constraints: tuple = ()
    jumps: np.ndarray = field(default=None)

    def __post_init__(self):
        fertility = _readonly(np.array(self.fertility, dtype=float, ndmin=2))
        mu0 = _readonly(np.array(self.mu0, dtype=float).reshape(-1))
        jumps = self.jumps
        if jumps is None:
            jumps = np.zeros((int(self.p), int(self.q)), dtype=np.int64)
        jumps = np.array(jumps, dtype=np.int64)
        if jumps.size == 0:
            jumps = jumps.reshape(int(self.p), 0) if jumps.ndim < 2 else jumps
        constraints = self.constraints
        if not constraints and int(self.q) == 0:
            constraints = tuple(() for _ in range(int(self.p)))
        constraints = tuple(
            tuple(frozenset(int(v) for v in comp) for comp in row) for row in constraints
        )
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "mu0_null", float(self.mu0_null))
        object.__setattr__(self, "fertility", fertility)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "jumps", _readonly(jumps))
        object.__setattr__(self, "constraints", constraints)

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.digest())

    def is_blocked(self, mark: int, S) -> bool:
        """True when ``mark`` (1-based) is forbidden at constraint value ``S``."""
        if mark == 0:
            return False
        row = self.constraints[mark - 1]
        return any(int(s) in comp for s, comp in zip(S, row))

    def blocked_marks(self, S) -> np.ndarray:
        return np.array([self.is_blocked(i, S) for i in range(1, self.p + 1)], dtype=bool)

    def jump_of(self, mark: int) -> np.ndarray:
        if mark == 0:
            return np.zeros(self.q, dtype=np.int64)
        return self.jumps[mark - 1]

    def blocking_table(self):
        """Dense lookup ``table[i, j, s]`` for ``s in A_i(j)``, padded to the largest member."""
        smax = max((max(c) for row in self.constraints for c in row if c), default=0)
        table = np.zeros((self.p, self.q, smax + 1), dtype=np.bool_)
        for i, row in enumerate(self.constraints):
            for j, comp in enumerate(row):
                for s in comp:
                    if 0 <= s <= smax:
                        table[i, j, s] = True
        return table

    def boundary_levels(self) -> np.ndarray:
        """Per component, one plus the largest value appearing in any constraint set (1 if none)."""
        out = np.ones(self.q, dtype=np.int64)
        for j in range(self.q):
            vals = [max(row[j]) for row in self.constraints if row[j]]
            if vals:
                out[j] = 1 + max(vals)
        return out

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "beta": self.beta,
            "mu0_null": self.mu0_null,
            "mu0": [float(x) for x in self.mu0],
            "fertility": [[float(x) for x in row] for row in self.fertility],
            "constraints": [[sorted(comp) for comp in row] for row in self.constraints],
            "jumps": [[int(x) for x in row] for row in self.jumps],
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def validate(spec: ModelSpec) -> list[str]:
    """Return every violated invariant of ``spec`` (empty when valid).

    Also warns with :class:`PositivityWarning` when a decrementing mark is
    not blocked near the boundary of the component it decrements; that case
    is left to the simulator, which raises on the first offending event.
    """
    out = []
    p, q = spec.p, spec.q
    if p < 1:
        out.append("p must be a positive integer")
    if q < 0:
        out.append("q must be a non-negative integer")
    if not (math.isfinite(spec.beta) and spec.beta > 0):
        out.append("beta must be positive")
    if not (math.isfinite(spec.mu0_null) and spec.mu0_null > 0):
        out.append("mu0_null must be positive")
    if spec.mu0.shape != (p,):
        out.append(f"mu0 length mismatch: expected {p}, got {spec.mu0.shape[0]}")
    elif not np.all(np.isfinite(spec.mu0)) or np.any(spec.mu0 <= 0):
        out.append("mu0 entries must be positive")
    if spec.fertility.shape != (p, p):
        out.append(f"fertility shape mismatch: expected ({p}, {p}), got {spec.fertility.shape}")
    elif not np.all(np.isfinite(spec.fertility)) or np.any(spec.fertility < 0):
        out.append("fertility entries must be non-negative")
    if spec.jumps.shape != (p, q):
        out.append(f"jumps shape mismatch: expected ({p}, {q}), got {spec.jumps.shape}")
    if len(spec.constraints) != p:
        out.append(f"constraints must list one entry per mark: expected {p}, got {len(spec.constraints)}")
    for i, row in enumerate(spec.constraints):
        if len(row) != q:
            out.append(f"constraints[{i}] has {len(row)} components, expected q={q}")
        for j, comp in enumerate(row):
            bad = sorted(s for s in comp if s < 1)
            if bad:
                out.append(f"constraints[{i}][{j}] contains values < 1: {bad}")
    if not out:
        _warn_positivity(spec)
    return out


def _warn_positivity(spec: ModelSpec):
    for i in range(spec.p):
        for j in range(spec.q):
            step = int(spec.jumps[i, j])
            if step >= 0:
                continue
            guard = set(range(1, -step + 1))
            if not guard <= spec.constraints[i][j]:
                warnings.warn(
                    f"mark {i + 1} decrements component {j} by {-step} but is not blocked "
                    f"on {sorted(guard - spec.constraints[i][j])}; positivity is checked at runtime",
                    PositivityWarning,
                    stacklevel=3,
                )


def _checked(spec: ModelSpec) -> ModelSpec:
    violations = validate(spec)
    if violations:
        raise SpecValidationError(violations)
    return spec


# -- serialization -----------------------------------------------------------

_KEYS = ("p", "q", "beta", "mu0_null", "mu0", "fertility", "constraints", "jumps")


def _reject_constant(name):
    raise SpecParseError(f"non-finite number {name!r} is not permitted")


def _number(value, where, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        kind = "integer" if integer else "number"
        raise SpecParseError(f"expected a {kind}, got {type(value).__name__}", where)
    if integer and not isinstance(value, int):
        raise SpecParseError("expected an integer", where)
    if not integer and not math.isfinite(value):
        raise SpecParseError("non-finite number", where)
    return value


def _array(value, where):
    if not isinstance(value, list):
        raise SpecParseError(f"expected an array, got {type(value).__name__}", where)
    return value


def load_spec(document: str) -> ModelSpec:
    """Parse and validate a JSON model document."""
    try:
        raw = json.loads(document, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, f"{exc.lineno}:{exc.colno}") from None
    if not isinstance(raw, dict):
        raise SpecParseError("top level must be an object")
    for key in _KEYS:
        if key not in raw and key != "mu0_null":
            raise SpecParseError(f"missing required field {key!r}", key)
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise SpecParseError(f"unknown field(s) {unknown}")

    p = _number(raw["p"], "p", integer=True)
    q = _number(raw["q"], "q", integer=True)
    beta = _number(raw["beta"], "beta")
    mu0_null = _number(raw.get("mu0_null", 1.0), "mu0_null")
    mu0 = [_number(v, f"mu0[{i}]") for i, v in enumerate(_array(raw["mu0"], "mu0"))]
    fertility = [
        [_number(v, f"fertility[{i}][{j}]") for j, v in enumerate(_array(row, f"fertility[{i}]"))]
        for i, row in enumerate(_array(raw["fertility"], "fertility"))
    ]
    if len({len(r) for r in fertility}) > 1:
        raise SpecParseError("rows have unequal lengths", "fertility")
    constraints = [
        [
            [_number(v, f"constraints[{i}][{j}][{k}]", integer=True)
             for k, v in enumerate(_array(comp, f"constraints[{i}][{j}]"))]
            for j, comp in enumerate(_array(row, f"constraints[{i}]"))
        ]
        for i, row in enumerate(_array(raw["constraints"], "constraints"))
    ]
    jumps = [
        [_number(v, f"jumps[{i}][{j}]", integer=True) for j, v in enumerate(_array(row, f"jumps[{i}]"))]
        for i, row in enumerate(_array(raw["jumps"], "jumps"))
    ]
    if len({len(r) for r in jumps}) > 1:
        raise SpecParseError("rows have unequal lengths", "jumps")
    jumps_arr = np.array(jumps, dtype=np.int64).reshape(len(jumps), len(jumps[0]) if jumps else 0)
    fert_arr = np.array(fertility, dtype=float).reshape(len(fertility), len(fertility[0]) if fertility else 0)

    spec = ModelSpec(
        p=p, q=q, beta=beta, mu0_null=mu0_null, mu0=mu0,
        fertility=fert_arr, constraints=constraints, jumps=jumps_arr,
    )
    return _checked(spec)


def save_spec(spec: ModelSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2) + "\n"


def read_spec(path) -> ModelSpec:
    return load_spec(Path(path).read_text(encoding="utf-8"))


def write_spec(spec: ModelSpec, path):
    Path(path).write_text(save_spec(spec), encoding="utf-8")


# -- limit order book preset ---------------------------------------------------

# Marks: 1 ask up, 2 ask down, 3 bid up, 4 bid down (one tick each).
LOB_JUMPS = (1, -1, -1, 1)


def lob_preset(mu0, fertility, beta: float = 1.0, mu0_null: float = 1.0) -> ModelSpec:
    """Best bid / best ask model with the spread as the single constraint.

    Marks 2 (ask down) and 3 (bid up) are forbidden while the spread is one
    tick.
    """
    spec = ModelSpec(
        p=4,
        q=1,
        beta=beta,
        mu0_null=mu0_null,
        mu0=mu0,
        fertility=fertility,
        constraints=[[set()], [{1}], [{1}], [set()]],
        jumps=np.array(LOB_JUMPS).reshape(4, 1),
    )
    return _checked(spec)


def mid_price_weights() -> np.ndarray:
    return np.array([0.5, -0.5, 0.5, -0.5])


def ask_weights() -> np.ndarray:
    return np.array([1.0, -1.0, 0.0, 0.0])


def bid_weights() -> np.ndarray:
    return np.array([0.0, 0.0, 1.0, -1.0])


def as_weights(w: Sequence[float], spec: ModelSpec) -> np.ndarray:
    """Coerce a weight function on marks 1..p to an array, checking its length."""
    arr = np.asarray(w, dtype=float).reshape(-1)
    if arr.shape != (spec.p,):
        raise ValueError(f"weight vector has length {arr.shape[0]}, expected p={spec.p}")
    return arr
