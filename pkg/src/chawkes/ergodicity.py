"""Ergodicity classification of constrained Hawkes models.

Analytic pieces (spectral radius, branching vector, drift indicators) are
exact linear algebra.  The induction over constraint subsets needs
stationary means of reduced models, which are estimated by simulation and
judged with a 3-standard-error band.

Constraint subsets are tuples of 0-based component indices.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import initial_state, keep_constraints, simulate
from .estimate import batch_means
from .exceptions import InsufficientData, NotSubcritical
from .model import ModelSpec, as_weights
from .runtime import map_ordered

__all__ = [
    "GEOMETRIC",
    "TRANSIENT",
    "INCONCLUSIVE",
    "spectral_radius",
    "branching_vector",
    "mean_rates",
    "is_invertible",
    "drift_indicator",
    "unconstrained_mark_moment",
    "AccessResult",
    "check_access",
    "MCSettings",
    "MCCondition",
    "InductionResult",
    "check_induction",
    "Classification",
    "classify",
    "ErgodicityReport",
    "analyze",
]

GEOMETRIC = "geometrically-ergodic"
TRANSIENT = "transient"
INCONCLUSIVE = "inconclusive"

SE_BAND = 3.0
BURN_IN_FRACTION = 0.2
BURN_IN_MIN = 10_000


def spectral_radius(fertility) -> float:
    m = np.asarray(fertility, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("fertility must be square")
    if np.any(m < 0):
        raise ValueError("fertility entries must be non-negative")
    p = m.shape[0]
    if p == 1:
        return float(m[0, 0])
    if p == 2:
        # Non-negative 2x2: discriminant (a-d)^2 + 4bc >= 0, Perron root is the larger root.
        a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        return float(0.5 * (a + d + math.sqrt((a - d) ** 2 + 4.0 * b * c)))
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def _subcritical(fertility) -> np.ndarray:
    m = np.asarray(fertility, dtype=float)
    rho = spectral_radius(m)
    if rho >= 1.0:
        raise NotSubcritical(rho)
    return m


def branching_vector(fertility) -> np.ndarray:
    """``u = (Id - fertility^T)^{-1} 1``: expected total progeny weights per mark."""
    m = _subcritical(fertility)
    return np.linalg.solve(np.eye(m.shape[0]) - m.T, np.ones(m.shape[0]))


def mean_rates(spec: ModelSpec) -> np.ndarray:
    """Stationary per-mark event rates of the unconstrained process."""
    m = _subcritical(spec.fertility)
    return np.linalg.solve(np.eye(spec.p) - m, spec.mu0)


def is_invertible(fertility) -> bool:
    sv = np.linalg.svd(np.asarray(fertility, dtype=float), compute_uv=False)
    return bool(sv[-1] > 1e-12 * sv[0]) if sv[0] > 0 else False


def _jump_sum(spec: ModelSpec, subset) -> np.ndarray:
    subset = tuple(subset)
    if not subset:
        raise ValueError("constraint subset must be nonempty")
    if any(not 0 <= j < spec.q for j in subset):
        raise ValueError(f"constraint subset {subset} out of range for q={spec.q}")
    return np.asarray(spec.jumps)[:, list(subset)].sum(axis=1).astype(float)


def drift_indicator(spec: ModelSpec, subset) -> float:
    """Stationary drift of the summed components ``subset`` in the unconstrained model.

    Negative values push the constraint back; positive values (with one
    component) mean transience.
    """
    return float(_jump_sum(spec, subset) @ mean_rates(spec))


def unconstrained_mark_moment(spec: ModelSpec, w) -> float:
    """Stationary mean of ``w(I)`` over embedded-chain events of the unconstrained model."""
    w = as_weights(w, spec)
    rates = mean_rates(spec)
    return float(w @ rates / (spec.mu0_null + rates.sum()))


# -- admissible paths ------------------------------------------------------------

@dataclass
class AccessResult:
    status: str  # "success", "failure" or "inconclusive"
    s_o: tuple | None = None
    m: int | None = None
    witnesses: dict = field(default_factory=dict)
    first_unreachable: tuple | None = None
    explored: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "s_o": list(self.s_o) if self.s_o is not None else None,
            "m": self.m,
            "first_unreachable": list(self.first_unreachable) if self.first_unreachable else None,
            "explored_states": self.explored,
            "message": self.message,
            "witnesses": [
                {"s": list(s), "path": list(path)} for s, path in sorted(self.witnesses.items())
            ],
        }


class _Budget(Exception):
    pass


class _Walker:
    """Moves of the constraint variable under admissible, positivity-preserving marks."""

    def __init__(self, spec: ModelSpec, upper: int, max_states: int):
        self.spec = spec
        self.upper = upper
        self.max_states = max_states
        self.explored = 0
        self.jumps = [tuple(int(x) for x in row) for row in spec.jumps]

    def move(self, s, mark):
        if self.spec.is_blocked(mark, s):
            return None
        nxt = tuple(a + b for a, b in zip(s, self.jumps[mark - 1]))
        if all(1 <= x <= self.upper for x in nxt):
            return nxt
        return None

    def reach(self, start, depth):
        """Shortest-path parents of every state reachable from ``start`` in ``depth`` steps."""
        parents = {start: None}
        frontier = deque([(start, 0)])
        while frontier:
            s, d = frontier.popleft()
            if d == depth:
                continue
            for mark in range(1, self.spec.p + 1):
                nxt = self.move(s, mark)
                if nxt is not None and nxt not in parents:
                    parents[nxt] = (s, mark)
                    frontier.append((nxt, d + 1))
                    self.explored += 1
                    if self.explored > self.max_states:
                        raise _Budget
        return parents

    def full_round(self, r):
        """Some ordering of all marks that is admissible from ``r``, or None."""
        p = self.spec.p
        seen = set()

        def dfs(s, used, path):
            if len(path) == p:
                return path
            key = (s, used)
            if key in seen:
                return None
            seen.add(key)
            for mark in range(1, p + 1):
                if used & (1 << mark):
                    continue
                nxt = self.move(s, mark)
                if nxt is not None:
                    found = dfs(nxt, used | (1 << mark), path + [mark])
                    if found:
                        return found
            return None

        return dfs(r, 0, [])


def _path_to(parents, target):
    path = []
    node = target
    while parents[node] is not None:
        prev, mark = parents[node]
        path.append(mark)
        node = prev
    return path[::-1]


def check_access(spec: ModelSpec, K: int = 5, max_len: int = 64, max_states: int = 2_000_000) -> AccessResult:
    """Search for a common target ``s_o`` reachable from every ``s`` in ``{1..K}^q``.

    Each witness path is admissible, keeps ``S >= 1``, has the same length
    ``m >= p + 1`` (padded with auxiliary marks 0) and ends with every mark
    ``1..p`` exactly once.  ``s_o`` is sought inside ``{1..K}^q`` so that
    starting points on both sides of it are exercised; targets at or above
    every constraint set are preferred.
    """
    if spec.q < 1:
        raise ValueError("check_access needs q >= 1")
    if K < 1 or max_len < spec.p + 1:
        raise ValueError("need K >= 1 and max_len >= p + 1")
    p, q = spec.p, spec.q
    jbar = int(np.abs(spec.jumps).sum(axis=1).max())
    upper = K + max_len * jbar
    walker = _Walker(spec, upper, max_states)
    total = tuple(int(x) for x in np.asarray(spec.jumps).sum(axis=0))
    starts = list(itertools.product(range(1, K + 1), repeat=q))
    floor = tuple(int(x) for x in spec.boundary_levels())

    def preference(r):
        s_o = tuple(a + b for a, b in zip(r, total))
        return (not all(x >= f for x, f in zip(s_o, floor)), sum(s_o), s_o)

    try:
        # Candidate meeting points r: a full round of marks from r lands on s_o = r + total in the box.
        candidates = {}
        for s_o in starts:
            r = tuple(a - b for a, b in zip(s_o, total))
            if all(1 <= x <= upper for x in r):
                suffix = walker.full_round(r)
                if suffix is not None:
                    candidates[r] = suffix
        if not candidates:
            return AccessResult("failure", first_unreachable=starts[0], explored=walker.explored,
                                message="no target in the box admits a round of all marks ending there")
        alive = set(candidates)
        trees = {}
        for s in starts:
            parents = walker.reach(s, max_len - p)
            trees[s] = parents
            alive &= parents.keys()
            if not alive:
                return AccessResult("failure", first_unreachable=s, explored=walker.explored,
                                    message=f"no common target reachable from {s} within {max_len} steps")
    except _Budget:
        return AccessResult("inconclusive", explored=walker.explored,
                            message=f"search exceeded {max_states} states")

    r = min(alive, key=preference)
    suffix = candidates[r]
    s_o = tuple(a + b for a, b in zip(r, total))
    prefixes = {s: _path_to(trees[s], r) for s in starts}
    m = max(p + 1, max(len(x) for x in prefixes.values()) + p)
    witnesses = {s: tuple(pre + [0] * (m - p - len(pre)) + suffix) for s, pre in prefixes.items()}
    return AccessResult("success", s_o=s_o, m=m, witnesses=witnesses, explored=walker.explored,
                        message=f"all {len(starts)} starting points reach s_o={s_o} in {m} steps")


# -- induction over constraint subsets -------------------------------------------

@dataclass
class MCSettings:
    events: int = 200_000
    replications: int = 4
    seed: int = 0
    batches: int = 32


@dataclass
class MCCondition:
    estimate: float
    se: float
    verdict: str  # "negative", "positive" or "inconclusive"
    note: str = ""

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "se": self.se, "verdict": self.verdict, "note": self.note}


@dataclass
class InductionResult:
    drift_indicators: dict
    mc_conditions: dict
    certified: dict

    def all_negative(self) -> bool:
        return all(v < 0 for v in self.drift_indicators.values()) and all(
            c.verdict == "negative" for c in self.mc_conditions.values()
        )


def _verdict(est, se):
    if est + SE_BAND * se < 0:
        return "negative"
    if est - SE_BAND * se > 0:
        return "positive"
    return "inconclusive"


def _zero_tol(spec, subset):
    scale = np.abs(_jump_sum(spec, subset)) @ np.abs(mean_rates(spec))
    return 1e-12 * max(scale, 1e-300)


def _reduced_mean(spec, kept, weights, mc: MCSettings, stream0, threads):
    reduced = keep_constraints(spec, kept)
    init = initial_state(reduced)
    burn = max(int(BURN_IN_FRACTION * mc.events), BURN_IN_MIN)
    if mc.events - burn < 2 * mc.batches:
        raise InsufficientData(f"{mc.events} events leave too few after a burn-in of {burn}")
    w_o = np.concatenate([[0.0], weights])

    def one(r):
        log = simulate(reduced, init, n_events=mc.events, seed=mc.seed, stream=stream0 + r, snapshots=False)
        mean, se, _ = batch_means(w_o[log.marks[burn:]], mc.batches)
        return mean, se

    parts = map_ordered(one, range(mc.replications), threads)
    means = np.array([m for m, _ in parts])
    ses = np.array([s for _, s in parts])
    return float(means.mean()), float(math.sqrt((ses ** 2).sum()) / len(parts))


def check_induction(spec: ModelSpec, mc: MCSettings | None = None, threads: int | None = None) -> InductionResult:
    """Walk constraint subsets by increasing size, checking drifts in order.

    For every nonempty subset ``J`` the unconstrained drift of the summed
    components must be negative; for every proper nonempty ``J' < J`` the
    stationary mean of the same summed jump under the model keeping only the
    constraints ``J'`` must be negative as well.  That model is only
    simulated once ``J'`` itself passed; otherwise the pair is inconclusive.
    Enumerates all ``2^q - 1`` subsets.
    """
    mc = mc or MCSettings()
    _subcritical(spec.fertility)
    indicators = {}
    conditions = {}
    certified = {}
    pair_index = 0
    for k in range(1, spec.q + 1):
        for J in itertools.combinations(range(spec.q), k):
            value = drift_indicator(spec, J)
            indicators[J] = value
            ok = value < -_zero_tol(spec, J)
            weights = _jump_sum(spec, J)
            for size in range(1, k):
                for Jp in itertools.combinations(J, size):
                    pair_index += 1
                    if not certified.get(Jp, False):
                        conditions[(J, Jp)] = MCCondition(math.nan, math.nan, "inconclusive",
                                                          f"subset {Jp} not certified")
                        ok = False
                        continue
                    est, se = _reduced_mean(spec, Jp, weights, mc, pair_index * 1_000_003, threads)
                    cond = MCCondition(est, se, _verdict(est, se))
                    conditions[(J, Jp)] = cond
                    ok = ok and cond.verdict == "negative"
            certified[J] = ok
    return InductionResult(indicators, conditions, certified)


# -- classification --------------------------------------------------------------

@dataclass
class Classification:
    label: str
    reasons: list

    def to_dict(self) -> dict:
        return {"label": self.label, "reasons": list(self.reasons)}


def classify(spec: ModelSpec, radius: float, invertible: bool, access: AccessResult | None,
             induction: InductionResult | None) -> Classification:
    trail = [f"spectral radius {radius:.6g}"]
    if radius >= 1.0:
        return Classification(INCONCLUSIVE, trail + ["fertility matrix is not subcritical"])
    trail.append("fertility matrix invertible" if invertible else "fertility matrix singular")

    if spec.q == 1 and induction is not None:
        (value,) = induction.drift_indicators.values()
        tol = _zero_tol(spec, (0,))
        trail.append(f"drift indicator {value:.6g}")
        if value > tol:
            return Classification(TRANSIENT, trail + ["positive drift with one constraint"])
        if value >= -tol:
            return Classification(INCONCLUSIVE, trail + ["drift indicator is zero"])

    if not invertible:
        return Classification(INCONCLUSIVE, trail + ["irreducibility needs an invertible fertility matrix"])
    if spec.q == 0:
        return Classification(GEOMETRIC, trail + ["unconstrained and subcritical"])
    if access is None or not access.ok:
        status = access.status if access is not None else "not run"
        return Classification(INCONCLUSIVE, trail + [f"admissible-path check: {status}"])
    trail.append(f"admissible paths reach s_o={access.s_o}")
    if induction is None:
        return Classification(INCONCLUSIVE, trail + ["induction not run"])
    for J, value in induction.drift_indicators.items():
        if not value < -_zero_tol(spec, J):
            return Classification(INCONCLUSIVE, trail + [f"drift indicator for {J} is {value:.6g}, not negative"])
    for (J, Jp), cond in induction.mc_conditions.items():
        if cond.verdict != "negative":
            return Classification(
                INCONCLUSIVE,
                trail + [f"stationary drift of {J} under constraints {Jp}: {cond.verdict} "
                         f"({cond.estimate:.4g} +/- {cond.se:.2g}) {cond.note}".rstrip()],
            )
    trail.append("all drift conditions negative")
    return Classification(GEOMETRIC, trail)


@dataclass
class ErgodicityReport:
    spectral_radius: float
    invertible: bool
    u: np.ndarray | None
    mean_rates: np.ndarray | None
    drift_indicators: dict
    mc_conditions: dict
    access: AccessResult | None
    classification: Classification

    @property
    def access_ok(self) -> bool:
        return self.access is not None and self.access.ok

    def to_dict(self) -> dict:
        def key(J):
            return ",".join(str(j) for j in J)

        return {
            "spectral_radius": self.spectral_radius,
            "fertility_invertible": self.invertible,
            "u": None if self.u is None else [float(x) for x in self.u],
            "mean_rates": None if self.mean_rates is None else [float(x) for x in self.mean_rates],
            "drift_indicators": {key(J): v for J, v in self.drift_indicators.items()},
            "mc_conditions": {f"{key(J)}|{key(Jp)}": c.to_dict() for (J, Jp), c in self.mc_conditions.items()},
            "access": None if self.access is None else self.access.to_dict(),
            "classification": self.classification.to_dict(),
        }

    def render(self) -> str:
        lines = [
            f"{'spectral radius':<28}{self.spectral_radius:.10g}",
            f"{'fertility invertible':<28}{self.invertible}",
        ]
        if self.u is not None:
            lines.append(f"{'branching vector u':<28}" + " ".join(f"{x:.6g}" for x in self.u))
            lines.append(f"{'mean rates':<28}" + " ".join(f"{x:.6g}" for x in self.mean_rates))
        for J, v in self.drift_indicators.items():
            lines.append(f"{'drift indicator ' + str(list(J)):<28}{v:+.6g}")
        for (J, Jp), c in self.mc_conditions.items():
            label = f"drift {list(J)} | keep {list(Jp)}"
            lines.append(f"{label:<28}{c.estimate:+.4g} +/- {c.se:.2g}  {c.verdict}")
        if self.access is not None:
            lines.append(f"{'admissible paths':<28}{self.access.status}: {self.access.message}")
        lines.append(f"{'classification':<28}{self.classification.label}")
        lines.extend(f"  - {r}" for r in self.classification.reasons)
        return "\n".join(lines)


def analyze(spec: ModelSpec, K: int = 5, max_len: int = 64, mc: MCSettings | None = None,
            threads: int | None = None) -> ErgodicityReport:
    radius = spectral_radius(spec.fertility)
    invertible = is_invertible(spec.fertility)
    access = check_access(spec, K, max_len) if spec.q >= 1 else None
    if radius < 1.0:
        u = branching_vector(spec.fertility)
        rates = mean_rates(spec)
        induction = check_induction(spec, mc, threads) if spec.q >= 1 else None
    else:
        u = rates = induction = None
    cls = classify(spec, radius, invertible, access, induction)
    return ErgodicityReport(
        spectral_radius=radius,
        invertible=invertible,
        u=u,
        mean_rates=rates,
        drift_indicators=induction.drift_indicators if induction else {},
        mc_conditions=induction.mc_conditions if induction else {},
        access=access,
        classification=cls,
    )
