"""Monte Carlo oracle for the regime-switching model.

Paths are exact in distribution: the modulating chain is simulated by
exponential holding times, every switch time is merged into the time
grid, and each resulting segment uses the exact lognormal update for
the frozen-regime GBM. The only discretization is the trapezoidal
approximation of the running integral of spot, controlled by
``n_steps`` (steps per year).

Reproducibility contract: each fixed-size batch of paths draws from its
own counter-based stream keyed by ``(seed, batch_index)``, and batch
results are reduced in index order. Estimates are therefore
bit-identical for a given seed regardless of how many worker threads
run the batches (``PRICER_THREADS`` caps the pool size).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import AsianOptionSpec, MarketState, OptionStyle, RegimeModel, payoff, validate_model

_BATCH_SIZE = 250_000  # fixed so that batching never depends on thread count


@dataclass(frozen=True)
class McConfig:
    """Path count, average-grid resolution, seed, and antithetic flag."""

    n_paths: int
    n_steps: int = 252
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValidationError("n_paths not >= 2")
        if self.n_steps < 1:
            raise ValidationError("n_steps not >= 1")
        if self.antithetic and self.n_paths % 2:
            raise ValidationError("antithetic runs need an even n_paths")


@dataclass(frozen=True)
class McEstimate:
    price: float
    std_error: float
    n_paths: int


def _batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, batch_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate_chain(
    model: RegimeModel,
    t0: float,
    T: float,
    rng: np.random.Generator,
    regime0: int = 0,
) -> list[tuple[int, float]]:
    """One chain path as ``[(regime, entry_time), ...]`` up to ``horizon``.

    Holding times are exponential with the regime's exit rate; the next
    regime is drawn from the off-diagonal generator row normalized by
    that rate. A regime with exit rate zero is absorbing.
    """
    gen = model.gen_array()
    exit_rates = -np.diag(gen)
    segs = [(regime0, t0)]
    t, state = t0, regime0
    horizon = T
    while True:
        rate = exit_rates[state]
        if rate <= 0.0:
            return segs
        t = t + rng.exponential(1.0 / rate)
        if t >= horizon:
            return segs
        probs = np.maximum(gen[state], 0.0)
        probs[state] = 0.0
        probs /= probs.sum()
        state = int(rng.choice(len(probs), p=probs))
        segs.append((state, t))


def _simulate_chains_vec(
    rng: np.random.Generator,
    gen: np.ndarray,
    regime0: int,
    t0: float,
    horizon: float,
    n: int,
):
    """Vectorized chains: per-path switch times (padded +inf) and states.

    Returns ``(switch_times, next_states)`` with shape ``(n, k_max)``;
    column blocks are drawn lazily, so the realized shape is a
    deterministic function of the drawn values.
    """
    n_states = gen.shape[0]
    exit_rates = -np.diag(gen)
    # off-diagonal transition distribution per state (rows may be zero)
    trans = np.maximum(gen, 0.0)
    np.fill_diagonal(trans, 0.0)
    row_sums = trans.sum(axis=1, keepdims=True)
    trans = np.divide(trans, np.where(row_sums > 0, row_sums, 1.0))
    cum = np.cumsum(trans, axis=1)

    states = np.full(n, regime0, dtype=np.int64)
    t = np.full(n, t0, dtype=float)
    alive = exit_rates[states] > 0.0
    times_cols: list[np.ndarray] = []
    state_cols: list[np.ndarray] = []
    while alive.any():
        rates = exit_rates[states]
        safe = np.where(rates > 0.0, rates, 1.0)
        hold = rng.exponential(1.0, n) / safe
        u = rng.random(n)
        t_next = np.where(alive, t + hold, np.inf)
        switched = t_next < horizon
        nxt = np.empty(n, dtype=np.int64)
        for s in range(n_states):  # small loop over regimes
            mask = states == s
            if mask.any():
                nxt[mask] = np.searchsorted(cum[s], u[mask], side="right")
        nxt = np.minimum(nxt, n_states - 1)
        times_cols.append(np.where(switched, t_next, np.inf))
        state_cols.append(np.where(switched, nxt, states))
        t = np.where(switched, t_next, t)
        states = np.where(switched, nxt, states)
        alive = switched & (exit_rates[states] > 0.0)
    if not times_cols:
        return np.full((n, 1), np.inf), np.full((n, 1), regime0, dtype=np.int64)
    return np.stack(times_cols, axis=1), np.stack(state_cols, axis=1)


def _price_batch(
    model: RegimeModel,
    spec: AsianOptionSpec,
    state: MarketState,
    cfg: McConfig,
    batch_index: int,
    batch_n: int,
) -> tuple[float, float, int]:
    """Returns (sum, sum of squares, count) of per-unit discounted payoffs.

    A unit is a path, or an antithetic pair mean. The pair shares one
    chain path; only the Gaussian increments are mirrored.
    """
    rng = _batch_rng(cfg.seed, batch_index)
    gen = model.gen_array()
    r = model.r_array()
    q = model.q_array()
    sig = model.sigma_array()
    T = spec.T
    anti = cfg.antithetic
    n_units = batch_n // 2 if anti else batch_n

    sw_times, sw_states = _simulate_chains_vec(rng, gen, state.regime, state.t, T, n_units)
    k_max = sw_times.shape[1]

    need_avg = spec.style is not OptionStyle.EUROPEAN_PUT
    n_base = max(1, int(math.ceil((T - state.t) * cfg.n_steps - 1e-12)))
    grid = np.linspace(state.t, T, n_base + 1)

    s_p = np.full(n_units, state.s)
    s_m = s_p.copy() if anti else None
    a_p = np.full(n_units, state.a)
    a_m = a_p.copy() if anti else None
    disc = np.zeros(n_units)
    states = np.full(n_units, state.regime, dtype=np.int64)
    ptr = np.zeros(n_units, dtype=np.int64)
    cur = np.full(n_units, state.t)

    def advance_subset(idx, dt):
        z = rng.standard_normal(idx.size)
        vol = sig[states[idx]]
        drift = (r[states[idx]] - q[states[idx]] - 0.5 * vol * vol) * dt
        dw = vol * np.sqrt(dt) * z
        s_new = s_p[idx] * np.exp(drift + dw)
        if need_avg:
            a_p[idx] += 0.5 * (s_p[idx] + s_new) * dt
        s_p[idx] = s_new
        if anti:
            s_new_m = s_m[idx] * np.exp(drift - dw)
            if need_avg:
                a_m[idx] += 0.5 * (s_m[idx] + s_new_m) * dt
            s_m[idx] = s_new_m
        disc[idx] += r[states[idx]] * dt

    all_idx = np.arange(n_units)
    has_switches = np.isfinite(sw_times[:, 0]).any()
    for k in range(n_base):
        target = grid[k + 1]
        while has_switches:
            nxt = sw_times[all_idx, np.minimum(ptr, k_max - 1)]
            nxt = np.where(ptr < k_max, nxt, np.inf)
            inside = nxt < target
            if not inside.any():
                break
            idx = np.flatnonzero(inside)
            advance_subset(idx, nxt[idx] - cur[idx])
            cur[idx] = nxt[idx]
            states[idx] = sw_states[idx, np.minimum(ptr[idx], k_max - 1)]
            ptr[idx] += 1
        # remaining stretch of the base step, zero-length for untouched paths
        dt = target - cur
        z = rng.standard_normal(n_units)
        vol = sig[states]
        drift = (r[states] - q[states] - 0.5 * vol * vol) * dt
        dw = vol * np.sqrt(dt) * z
        s_new = s_p * np.exp(drift + dw)
        if need_avg:
            a_p += 0.5 * (s_p + s_new) * dt
        s_p = s_new
        if anti:
            s_new_m = s_m * np.exp(drift - dw)
            if need_avg:
                a_m += 0.5 * (s_m + s_new_m) * dt
            s_m = s_new_m
        disc += r[states] * dt
        cur[:] = target

    df = np.exp(-disc)
    pay_p = payoff(spec, s_p, a_p / T) * df
    if anti:
        pay_m = payoff(spec, s_m, a_m / T) * df
        units = 0.5 * (pay_p + pay_m)
    else:
        units = pay_p
    return float(units.sum()), float(np.dot(units, units)), n_units


def mc_price(
    spec: AsianOptionSpec,
    state: MarketState,
    model: RegimeModel,
    cfg: McConfig,
) -> McEstimate:
    """Discounted-payoff estimate with its standard error.

    At ``t = T`` the payoff is deterministic and returned exactly with
    zero standard error.
    """
    validate_model(model)
    if state.regime >= model.n_states:
        raise ValidationError(f"regime index {state.regime} out of range")
    if state.t > spec.T:
        raise ValidationError(f"t={state.t!r} beyond expiry {spec.T!r}")
    if state.t == spec.T:
        val = float(payoff(spec, state.s, state.a / spec.T))
        return McEstimate(price=val, std_error=0.0, n_paths=cfg.n_paths)

    sizes = []
    remaining = cfg.n_paths
    while remaining > 0:
        b = min(_BATCH_SIZE, remaining)
        if cfg.antithetic and b % 2:
            b += 1
        sizes.append(b)
        remaining -= b

    def run(args):
        i, b = args
        return _price_batch(model, spec, state, cfg, i, b)

    n_workers = max(1, int(os.environ.get("PRICER_THREADS", "1")))
    jobs = list(enumerate(sizes))
    if n_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    total = math.fsum(r[0] for r in results)
    total_sq = math.fsum(r[1] for r in results)
    n_units = sum(r[2] for r in results)
    mean = total / n_units
    var = max(total_sq / n_units - mean * mean, 0.0) * n_units / max(n_units - 1, 1)
    se = math.sqrt(var / n_units)
    return McEstimate(price=mean, std_error=se, n_paths=cfg.n_paths)
