"""Best bid / best ask application: price and spread paths and the mid-price diffusion demo.

Marks follow the preset: 1 ask up, 2 ask down, 3 bid up, 4 bid down, each
by one tick.  The spread (in ticks) is the constraint variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import EventLog, initial_state, simulate
from .estimate import fclt_experiment
from .model import ModelSpec, ask_weights, bid_weights, mid_price_weights
from .runtime import map_ordered

__all__ = [
    "PriceSeries",
    "mid_price_series",
    "ask_series",
    "bid_series",
    "spread_series",
    "visit_histogram",
    "successive_ratios",
    "LobDemoReport",
    "mid_price_scaling_demo",
]


@dataclass
class PriceSeries:
    times: np.ndarray
    values: np.ndarray
    tick: float = 1.0

    def __len__(self):
        return int(self.times.shape[0])

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time,value\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{float(t):.17g},{float(v):.17g}\n")


def _require_lob(log: EventLog):
    if log.init.lam.shape != (4,) or log.init.S.shape != (1,):
        raise ValueError("log does not come from a 4-mark, 1-constraint order book model")


def _weighted_path(log: EventLog, w, start: float, tick: float) -> PriceSeries:
    _require_lob(log)
    w_o = np.concatenate([[0.0], np.asarray(w, dtype=float)])
    values = start + tick * np.concatenate([[0.0], np.cumsum(w_o[log.marks])])
    times = np.concatenate([[log.init.t], log.times])
    return PriceSeries(times, values, tick)


def mid_price_series(log: EventLog, P0: float, tick: float = 1.0) -> PriceSeries:
    return _weighted_path(log, mid_price_weights(), P0, tick)


def ask_series(log: EventLog, ask0: float, tick: float = 1.0) -> PriceSeries:
    return _weighted_path(log, ask_weights(), ask0, tick)


def bid_series(log: EventLog, bid0: float, tick: float = 1.0) -> PriceSeries:
    return _weighted_path(log, bid_weights(), bid0, tick)


def spread_series(log: EventLog) -> PriceSeries:
    """Spread in ticks at time 0 and after each event."""
    _require_lob(log)
    path = log.constraint_path()[:, 0]
    values = np.concatenate([[int(log.init.S[0])], path]).astype(np.int64)
    times = np.concatenate([[log.init.t], log.times])
    return PriceSeries(times, values, 1.0)


def visit_histogram(values, burn_in: int = 0) -> dict:
    """Number of steps spent at each integer level after ``burn_in`` steps."""
    v = np.asarray(values, dtype=np.int64)[burn_in:]
    levels, counts = np.unique(v, return_counts=True)
    return {int(s): int(c) for s, c in zip(levels, counts)}


def successive_ratios(hist: dict, min_visits: int = 1000) -> dict:
    """``count(s + 1) / count(s)`` for consecutive levels both visited ``min_visits`` times."""
    out = {}
    for s, c in sorted(hist.items()):
        nxt = hist.get(s + 1, 0)
        if c >= min_visits and nxt >= min_visits:
            out[s] = nxt / c
    return out


# -- scaling demo ----------------------------------------------------------------

@dataclass
class LobDemoReport:
    horizons: list
    replications: int
    per_horizon: list = field(default_factory=list)
    results: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        spread = [h["spread_scaled_variance"] for h in self.per_horizon]
        diff = [h["diffusion_per_time"] for h in self.per_horizon]
        return {
            "horizons": self.horizons,
            "replications": self.replications,
            "per_horizon": self.per_horizon,
            "diffusion_ratio_last_to_first": diff[-1] / diff[0] if diff[0] else math.nan,
            "spread_variance_decreasing": bool(all(b < a for a, b in zip(spread, spread[1:]))),
        }


def _spread_endpoint(spec, init, horizon, seed, stream):
    log = simulate(spec, init, horizon=horizon, seed=seed, stream=stream, snapshots=False)
    return float(log.final.S[0])


def mid_price_scaling_demo(spec: ModelSpec, horizons=(1000.0, 4000.0), replications: int = 200,
                           seed: int = 0, t_grid=None, threads: int | None = None) -> LobDemoReport:
    """Mid-price scaling experiment at several horizons, plus the spread's vanishing scaled variance.

    Spread endpoints come from the very same paths as the mid-price
    replications (same seed and streams).
    """
    if spec.p != 4 or spec.q != 1:
        raise ValueError("the demo needs the 4-mark, 1-constraint order book model")
    t_grid = np.linspace(0.0, 1.0, 11) if t_grid is None else np.asarray(t_grid, dtype=float)
    init = initial_state(spec)
    report = LobDemoReport([float(h) for h in horizons], replications)
    for T in horizons:
        res = fclt_experiment(spec, mid_price_weights(), T, replications, t_grid, seed, init, threads)
        ends = np.array(map_ordered(lambda r: _spread_endpoint(spec, init, T, seed, r + 1),
                                    range(replications), threads))
        d = res.diagnostics
        report.results.append(res)
        report.per_horizon.append({
            "horizon": float(T),
            "E_w": res.pilot.E_w,
            "E_w_se": res.pilot.E_w_se,
            "diffusion_per_time": d["diffusion_increments"],
            "diffusion_per_time_se": d["diffusion_increments_se"],
            "diffusion_pilot": res.pilot.diffusion,
            "diffusion_pilot_se": res.pilot.diffusion_se,
            "v_w_per_event": res.pilot.v_w,
            "mean_delta": res.pilot.mean_delta,
            "ks_pvalue": d["ks_pvalue"],
            "endpoint_skewness": d["endpoint_skewness"],
            "endpoint_skewness_se": d["endpoint_skewness_se"],
            "spread_mean": float(ends.mean()),
            "spread_scaled_variance": float(ends.var(ddof=1) / T),
        })
    return report
