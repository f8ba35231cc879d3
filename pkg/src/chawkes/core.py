"""Exact simulation of the embedded chain (delta, mark, S, lambda).

Between events the total hazard is ``a + b * exp(-beta * u)`` where ``a``
sums the immigrant rates (plus the auxiliary rate) and ``b`` sums the current
self-excitation intensities; blocked marks hand their hazard to the auxiliary
mark 0, so the total does not depend on ``S``.  Each event therefore costs two
uniforms: one inverted through the integrated hazard for the waiting time,
one picking the mark from the hazards evaluated at that time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .exceptions import StatePositivityViolation
from .model import ModelSpec
from .runtime import generator

__all__ = [
    "ChainState",
    "Event",
    "EventLog",
    "initial_state",
    "total_hazard_params",
    "cumulative_hazard",
    "sample_interarrival",
    "hazard_rates",
    "mark_probabilities",
    "step",
    "simulate",
    "draw_first_events",
    "intensity_at",
    "counting_functional",
    "reduce_constraints",
    "keep_constraints",
    "write_events_csv",
    "read_events_csv",
]

NEWTON_CAP = 200
_CHUNK = 1 << 16


@dataclass
class ChainState:
    S: np.ndarray
    lam: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.S = np.array(self.S, dtype=np.int64).reshape(-1)
        self.lam = np.array(self.lam, dtype=float).reshape(-1)
        self.t = float(self.t)

    def copy(self) -> "ChainState":
        return ChainState(self.S.copy(), self.lam.copy(), self.t)


@dataclass(frozen=True)
class Event:
    index: int
    time: float
    delta: float
    mark: int


def initial_state(spec: ModelSpec, S=None, lam=None) -> ChainState:
    """Empty-history start: ``lam = 0``, ``t = 0``.

    ``S`` defaults to the smallest level above every constraint set, which is
    always admissible.
    """
    if S is None:
        S = spec.boundary_levels()
    S = np.array(S, dtype=np.int64).reshape(-1)
    if S.shape != (spec.q,):
        raise ValueError(f"initial S has length {S.shape[0]}, expected q={spec.q}")
    if np.any(S < 1):
        raise ValueError("initial S must have components >= 1")
    lam = np.zeros(spec.p) if lam is None else np.array(lam, dtype=float).reshape(-1)
    if lam.shape != (spec.p,) or np.any(lam < 0):
        raise ValueError(f"initial lambda must be {spec.p} non-negative values")
    return ChainState(S, lam, 0.0)


# -- hazards -----------------------------------------------------------------

def total_hazard_params(state: ChainState, spec: ModelSpec) -> tuple[float, float]:
    return spec.mu0_null + float(spec.mu0.sum()), float(state.lam.sum())


def cumulative_hazard(a, b, beta, delta):
    """Integrated total hazard ``a*d + (b/beta)*(1 - exp(-beta*d))``."""
    return a * delta - (b / beta) * np.expm1(-beta * delta)


def hazard_rates(state: ChainState, delta: float, spec: ModelSpec) -> np.ndarray:
    """Hazards of marks ``0..p`` after ``delta`` time units without an event."""
    live = spec.mu0 + state.lam * math.exp(-spec.beta * delta)
    blocked = spec.blocked_marks(state.S)
    out = np.empty(spec.p + 1)
    out[1:] = np.where(blocked, 0.0, live)
    out[0] = spec.mu0_null + live[blocked].sum()
    return out


def mark_probabilities(state: ChainState, delta: float, spec: ModelSpec) -> np.ndarray:
    if delta < 0:
        raise ValueError("delta must be non-negative")
    h = hazard_rates(state, delta, spec)
    return h / h.sum()


@njit(cache=True, nogil=True)
def _interarrival(a, b, beta, E):
    if b <= 0.0:
        return E / a
    lo = E / (a + b)
    hi = E / a
    # E never exceeds -log(2**-54) ~ 37.4, so this keeps |residual| < 1e-10.
    tol = 1e-12 * max(1.0, E)
    # Integrated hazard is increasing and concave: Newton from the lower
    # bracket climbs monotonically to the root.
    x = lo
    for _ in range(NEWTON_CAP):
        f = a * x - (b / beta) * math.expm1(-beta * x) - E
        if abs(f) <= tol:
            return x
        step = f / (a + b * math.exp(-beta * x))
        nxt = x - step
        if not (lo <= nxt <= hi) or nxt == x:
            break
        x = nxt
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = a * mid - (b / beta) * math.expm1(-beta * mid) - E
        if abs(f) <= tol or mid == lo or mid == hi:
            return mid
        if f < 0.0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("interarrival inversion did not converge")


@njit(cache=True, nogil=True)
def _interarrival_many(a, b, beta, E):
    out = np.empty(E.shape[0])
    for k in range(E.shape[0]):
        out[k] = _interarrival(a[k], b[k], beta[k], E[k])
    return out


def sample_interarrival(a, b, beta, E):
    """Waiting time ``d`` solving ``a*d + (b/beta)*(1 - exp(-beta*d)) = E``.

    Scalars return a float; arrays are solved elementwise.
    """
    if np.ndim(a) or np.ndim(b) or np.ndim(beta) or np.ndim(E):
        a, b, beta, E = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, beta, E)))
        if np.any(a <= 0) or np.any(b < 0) or np.any(beta <= 0) or np.any(E <= 0):
            raise ValueError("need a > 0, b >= 0, beta > 0, E > 0")
        shape = a.shape
        return _interarrival_many(a.ravel(), b.ravel(), beta.ravel(), E.ravel()).reshape(shape)
    if not (a > 0 and b >= 0 and beta > 0 and E > 0):
        raise ValueError("need a > 0, b >= 0, beta > 0, E > 0")
    return _interarrival(float(a), float(b), float(beta), float(E))


@njit(cache=True, nogil=True)
def _hazard_ab(mu0, mu0_null, lam):
    a = mu0_null
    b = 0.0
    for i in range(mu0.shape[0]):
        a += mu0[i]
        b += lam[i]
    return a, b


@njit(cache=True, nogil=True)
def _blocked(i, S, table):
    for j in range(S.shape[0]):
        s = S[j]
        if s < table.shape[2] and table[i, j, s]:
            return True
    return False


@njit(cache=True, nogil=True)
def _exp_draw(u):
    if u <= 0.0:
        return 2.0 ** -54
    return -math.log1p(-u)


@njit(cache=True, nogil=True)
def _pick_mark(S, lam, decay, mu0, mu0_null, table, u, h):
    p = mu0.shape[0]
    h[0] = mu0_null
    for i in range(p):
        r = mu0[i] + lam[i] * decay
        if _blocked(i, S, table):
            h[0] += r
            h[i + 1] = 0.0
        else:
            h[i + 1] = r
    total = 0.0
    for i in range(p + 1):
        total += h[i]
    target = u * total
    acc = 0.0
    last = 0
    for i in range(p + 1):
        if h[i] > 0.0:
            acc += h[i]
            last = i
            if target < acc:
                return i
    return last


@njit(cache=True, nogil=True)
def _run(S, lam, t, mu0, mu0_null, beta, fert, jumps, table, uniforms, max_events,
         horizon, out_time, out_delta, out_mark, out_S, out_lam, snap, start):
    p = mu0.shape[0]
    q = S.shape[0]
    h = np.empty(p + 1)
    n = 0
    k = 0
    status = 0
    while n < max_events and k + 1 < uniforms.shape[0]:
        E = _exp_draw(uniforms[k])
        u = uniforms[k + 1]
        k += 2
        a, b = _hazard_ab(mu0, mu0_null, lam)
        d = _interarrival(a, b, beta, E)
        if t + d > horizon:
            status = 1
            break
        decay = math.exp(-beta * d)
        mark = _pick_mark(S, lam, decay, mu0, mu0_null, table, u, h)
        t += d
        for i in range(p):
            lam[i] *= decay
        if mark > 0:
            for i in range(p):
                lam[i] += beta * fert[i, mark - 1]
            for j in range(q):
                S[j] += jumps[mark - 1, j]
                if S[j] < 1:
                    status = 2
        w = start + n
        out_time[w] = t
        out_delta[w] = d
        out_mark[w] = mark
        if snap:
            for j in range(q):
                out_S[w, j] = S[j]
            for i in range(p):
                out_lam[w, i] = lam[i]
        n += 1
        if status == 2:
            break
    return n, t, status


@njit(cache=True, nogil=True)
def _first_events(S, lam, mu0, mu0_null, beta, table, uniforms, deltas, marks):
    p = mu0.shape[0]
    h = np.empty(p + 1)
    a, b = _hazard_ab(mu0, mu0_null, lam)
    for k in range(deltas.shape[0]):
        d = _interarrival(a, b, beta, _exp_draw(uniforms[2 * k]))
        deltas[k] = d
        marks[k] = _pick_mark(S, lam, math.exp(-beta * d), mu0, mu0_null, table,
                              uniforms[2 * k + 1], h)


# -- event log ---------------------------------------------------------------

@dataclass
class EventLog:
    """Sample path of the embedded chain.

    ``S`` and ``lam`` hold per-event snapshots (row ``n-1`` is the state
    right after event ``n``) or ``None`` when snapshots were disabled.
    """

    spec_hash: str
    init: ChainState
    times: np.ndarray
    deltas: np.ndarray
    marks: np.ndarray
    S: np.ndarray | None = None
    lam: np.ndarray | None = None
    seed: int | None = None
    stream: int = 0
    horizon: float | None = None
    final: ChainState | None = field(default=None, repr=False)
    jumps: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return int(self.times.shape[0])

    @property
    def events(self):
        return [
            Event(n + 1, float(self.times[n]), float(self.deltas[n]), int(self.marks[n]))
            for n in range(len(self))
        ]

    @property
    def end_time(self) -> float:
        if self.horizon is not None:
            return self.horizon
        return float(self.times[-1]) if len(self) else self.init.t

    def constraint_path(self) -> np.ndarray:
        """``S`` after each event, rebuilt from the marks when no snapshots are kept."""
        if self.S is not None:
            return self.S
        jumps = np.vstack([np.zeros((1, self.init.S.shape[0]), dtype=np.int64), self.jumps])
        return self.init.S + np.cumsum(jumps[self.marks], axis=0)


def _as_spec_arrays(spec: ModelSpec):
    return (
        np.ascontiguousarray(spec.mu0),
        float(spec.mu0_null),
        float(spec.beta),
        np.ascontiguousarray(spec.fertility),
        np.ascontiguousarray(spec.jumps),
        spec.blocking_table(),
    )


def step(state: ChainState, spec: ModelSpec, rng: np.random.Generator) -> tuple[Event, ChainState]:
    """Advance the chain by one event, drawing two uniforms from ``rng``.

    Consumes the generator exactly as :func:`simulate` does, so iterating
    ``step`` on ``generator(seed, stream)`` reproduces ``simulate``.
    """
    mu0, mu0_null, beta, fert, jumps, table = _as_spec_arrays(spec)
    u1, u2 = rng.random(2)
    a, b = _hazard_ab(mu0, mu0_null, state.lam)
    d = _interarrival(a, b, beta, _exp_draw(u1))
    decay = math.exp(-beta * d)
    mark = int(_pick_mark(state.S, state.lam, decay, mu0, mu0_null, table, u2, np.empty(spec.p + 1)))
    lam = state.lam * decay
    S = state.S.copy()
    if mark > 0:
        lam = lam + beta * fert[:, mark - 1]
        S = S + jumps[mark - 1]
    t = state.t + d
    if np.any(S < 1):
        raise StatePositivityViolation(None, mark, S)
    return Event(0, t, d, mark), ChainState(S, lam, t)


def simulate(spec: ModelSpec, init: ChainState | None = None, *, n_events: int | None = None,
             horizon: float | None = None, seed: int = 0, stream: int = 0,
             snapshots: bool = True) -> EventLog:
    """Run the chain until ``n_events`` events or time ``horizon``, whichever comes first."""
    if n_events is None and horizon is None:
        raise ValueError("give n_events or horizon")
    if n_events is not None and n_events < 0:
        raise ValueError("n_events must be >= 0")
    init = initial_state(spec) if init is None else init
    mu0, mu0_null, beta, fert, jumps, table = _as_spec_arrays(spec)
    rng = generator(seed, stream)
    p, q = spec.p, spec.q
    S = init.S.copy()
    lam = init.lam.copy()
    t = init.t
    limit = n_events if n_events is not None else np.iinfo(np.int64).max
    stop_time = horizon if horizon is not None else math.inf

    if n_events is not None:
        cap = n_events
    else:
        cap = int(1.2 * (stop_time - t) * (mu0_null + mu0.sum() + 3.0 * lam.sum())) + 64
    times = np.empty(cap)
    deltas = np.empty(cap)
    marks = np.empty(cap, dtype=np.int64)
    snapS = np.empty((cap, q), dtype=np.int64) if snapshots else np.empty((0, q), dtype=np.int64)
    snapL = np.empty((cap, p)) if snapshots else np.empty((0, p))

    count = 0
    reached = False
    while count < limit:
        want = min(limit - count, _CHUNK)
        if count + want > times.shape[0]:
            grow = max(2 * times.shape[0], count + want)
            times = np.resize(times, grow)
            deltas = np.resize(deltas, grow)
            marks = np.resize(marks, grow)
            if snapshots:
                snapS = np.resize(snapS, (grow, q))
                snapL = np.resize(snapL, (grow, p))
        uniforms = rng.random(2 * want)
        n, t, status = _run(S, lam, t, mu0, mu0_null, beta, fert, jumps, table, uniforms,
                            want, stop_time, times, deltas, marks, snapS, snapL, snapshots, count)
        count += n
        if status == 2:
            raise StatePositivityViolation(count, int(marks[count - 1]), S)
        if status == 1:
            reached = True
            break

    log = EventLog(
        spec_hash=spec.digest(),
        init=init.copy(),
        times=times[:count].copy(),
        deltas=deltas[:count].copy(),
        marks=marks[:count].copy(),
        S=snapS[:count].copy() if snapshots else None,
        lam=snapL[:count].copy() if snapshots else None,
        seed=seed,
        stream=stream,
        horizon=horizon if reached else None,
        final=ChainState(S, lam, t),
        jumps=np.asarray(spec.jumps),
    )
    return log


def draw_first_events(state: ChainState, spec: ModelSpec, rng: np.random.Generator, size: int):
    """Independent draws of ``(delta_1, mark_1)`` from a fixed state."""
    mu0, mu0_null, beta, _, _, table = _as_spec_arrays(spec)
    deltas = np.empty(size)
    marks = np.empty(size, dtype=np.int64)
    _first_events(state.S, state.lam, mu0, mu0_null, beta, table, rng.random(2 * size), deltas, marks)
    return deltas, marks


# -- functionals -------------------------------------------------------------

def intensity_at(log: EventLog, spec: ModelSpec, t: float) -> np.ndarray:
    """Self-excitation intensities at time ``t``, decayed from the last event at or before ``t``."""
    if log.lam is None:
        raise ValueError("intensity_at needs a log recorded with snapshots")
    if not (log.init.t <= t <= log.end_time):
        raise ValueError(f"t={t} outside [{log.init.t}, {log.end_time}]")
    n = int(np.searchsorted(log.times, t, side="right"))
    if n == 0:
        return log.init.lam * math.exp(-spec.beta * (t - log.init.t))
    return log.lam[n - 1] * math.exp(-spec.beta * (t - log.times[n - 1]))


def counting_functional(log: EventLog, w, u: float, t: float) -> float:
    """Sum of ``w(mark)`` over events in ``(u, t]``; auxiliary events count 0."""
    if not 0 <= u <= t:
        raise ValueError("need 0 <= u <= t")
    w_o = np.concatenate([[0.0], np.asarray(w, dtype=float)])
    lo = np.searchsorted(log.times, u, side="right")
    hi = np.searchsorted(log.times, t, side="right")
    return float(w_o[log.marks[lo:hi]].sum())


def reduce_constraints(spec: ModelSpec, remove) -> ModelSpec:
    """Drop constraint components ``remove`` (0-based) together with their sets and jumps."""
    remove = {int(j) for j in remove}
    bad = sorted(j for j in remove if not 0 <= j < spec.q)
    if bad:
        raise ValueError(f"constraint indices {bad} out of range for q={spec.q}")
    keep = [j for j in range(spec.q) if j not in remove]
    return ModelSpec(
        p=spec.p,
        q=len(keep),
        beta=spec.beta,
        mu0_null=spec.mu0_null,
        mu0=spec.mu0,
        fertility=spec.fertility,
        constraints=[[row[j] for j in keep] for row in spec.constraints],
        jumps=np.asarray(spec.jumps)[:, keep].reshape(spec.p, len(keep)),
    )


def keep_constraints(spec: ModelSpec, keep) -> ModelSpec:
    """Reduced model retaining only components ``keep``."""
    keep = {int(j) for j in keep}
    return reduce_constraints(spec, set(range(spec.q)) - keep)


# -- CSV ---------------------------------------------------------------------

def _g17(x) -> str:
    return format(float(x), ".17g")


def write_events_csv(log: EventLog, path, snapshots: bool = True):
    snapshots = snapshots and log.S is not None
    q = log.init.S.shape[0]
    p = log.init.lam.shape[0]
    header = ["n", "time", "delta", "mark"]
    if snapshots:
        header += [f"S_{j + 1}" for j in range(q)] + [f"lambda_{i + 1}" for i in range(p)]
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for n in range(len(log)):
            row = [n + 1, _g17(log.times[n]), _g17(log.deltas[n]), int(log.marks[n])]
            if snapshots:
                row += [int(s) for s in log.S[n]] + [_g17(x) for x in log.lam[n]]
            out.writerow(row)


def read_events_csv(path) -> dict:
    """Columns of an exported log as arrays, keyed by header name."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for k, name in enumerate(header):
        vals = [r[k] for r in body]
        if name in ("n", "mark") or name.startswith("S_"):
            cols[name] = np.array(vals, dtype=np.int64)
        else:
            cols[name] = np.array(vals, dtype=float)
    return cols
