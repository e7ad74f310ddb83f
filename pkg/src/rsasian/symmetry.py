"""Fixed/floating Asian option equivalences under the rate-dividend swap.

A floating-strike Asian option written at inception is worth a known
multiple of a fixed-strike Asian option of the opposite call/put type,
priced at the same spot under the model whose short-rate and
dividend-yield vectors have traded places. Writing ``mu`` for the
moneyness of the left-hand contract (the floating multiplier, or
``K / s0`` for a cash strike ``K``), the counterpart carries moneyness
``1 / mu`` and the prices satisfy::

    price(lhs) = mu * price(counterpart)

so the pairing is an involution on (style, moneyness) and the scale
factors of the two directions cancel. At ``mu = 1`` the scale drops out
and the floating call at spot ``s0`` matches the fixed put struck at
``s0`` exactly.

The equivalence rests on running the model backwards in time. Reversal
preserves the law of the modulating chain only when the chain starts
from its stationary distribution (two-state chains always satisfy the
required balance condition), so the price equality holds with the
starting regime drawn stationarily. Conditioning both sides on the same
fixed starting regime biases them in opposite directions whenever the
regimes differ and switching is active; the Monte Carlo checker reports
both views side by side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotApplicable, ValidationError
from .mc import McConfig, mc_price
from .model import (
    AsianOptionSpec,
    MarketState,
    OptionStyle,
    RegimeModel,
    validate_model,
)

_PAIRED = {
    OptionStyle.FLOATING_CALL: OptionStyle.FIXED_PUT,
    OptionStyle.FIXED_PUT: OptionStyle.FLOATING_CALL,
    OptionStyle.FIXED_CALL: OptionStyle.FLOATING_PUT,
    OptionStyle.FLOATING_PUT: OptionStyle.FIXED_CALL,
}

_FIXED = (OptionStyle.FIXED_CALL, OptionStyle.FIXED_PUT)


@dataclass(frozen=True)
class SymmetryCase:
    """One equivalence instance in six-argument report notation.

    Each side reads ``(spot, strike_or_multiplier, r_role, q_role,
    t_star, T)`` with the rate vectors spelled out, so a report row can
    be audited against the statement it instantiates. ``scale`` is the
    factor multiplying the right-hand price: ``lhs = scale * rhs``.
    """

    lhs: tuple
    rhs: tuple
    scale: float

    def __post_init__(self):
        if self.lhs[0] != self.rhs[0] or self.lhs[5] != self.rhs[5]:
            raise ValidationError("symmetry case sides disagree on spot or expiry")
        if not (self.scale > 0.0):
            raise ValidationError(f"symmetry scale must be positive, got {self.scale!r}")


def _moneyness(spec: AsianOptionSpec, s0: float) -> float:
    if spec.style in _FIXED:
        return spec.K / s0
    return spec.strike_multiplier


def symmetric_counterpart(
    spec: AsianOptionSpec,
    model: RegimeModel,
    state: MarketState,
) -> tuple[AsianOptionSpec, RegimeModel, float]:
    """Equivalent contract, swapped model, and price scale at inception.

    ``state`` supplies the inception spot (needed to convert between
    cash strikes and floating multipliers) and is validated: the
    equivalence is only claimed at ``t = 0`` with ``a = 0``, anything
    else raises ``NotApplicable``. The input contract priced under the
    input model equals ``scale`` times the returned contract priced at
    the same spot under the returned model, with the starting regime
    drawn from the chain's stationary law on both sides.
    """
    validate_model(model)
    if state.t != 0.0 or state.a != 0.0:
        raise NotApplicable(
            f"symmetry holds at inception only (t={state.t!r}, a={state.a!r})"
        )
    if spec.style not in _PAIRED:
        raise NotApplicable(f"no fixed/floating counterpart for {spec.style.value}")
    s0 = state.s
    mu = _moneyness(spec, s0)
    if not (mu > 0.0):
        raise ValidationError(f"moneyness must be positive, got {mu!r}")
    new_style = _PAIRED[spec.style]
    if new_style in _FIXED:
        new_spec = AsianOptionSpec(style=new_style, T=spec.T, K=s0 / mu)
    else:
        new_spec = AsianOptionSpec(style=new_style, T=spec.T, strike_multiplier=1.0 / mu)
    return new_spec, model.swap_rates_dividends(), mu


def _side_tuple(spec: AsianOptionSpec, model: RegimeModel, s0: float) -> tuple:
    strike_arg = spec.K if spec.style in _FIXED else spec.strike_multiplier
    return (s0, strike_arg, model.r, model.q, 0.0, spec.T)


def symmetry_case(
    spec: AsianOptionSpec,
    model: RegimeModel,
    state: MarketState,
) -> SymmetryCase:
    """Report record pairing a contract with its counterpart."""
    other_spec, other_model, scale = symmetric_counterpart(spec, model, state)
    return SymmetryCase(
        lhs=_side_tuple(spec, model, state.s),
        rhs=_side_tuple(other_spec, other_model, state.s),
        scale=scale,
    )


def _stationary_law(model: RegimeModel) -> np.ndarray:
    """Stationary distribution of the modulating chain.

    Solves ``pi A = 0`` with ``sum(pi) = 1`` by least squares; for the
    two-state generator this is ``(a21, a12) / (a12 + a21)``, falling
    back to uniform when the chain never switches.
    """
    gen = model.gen_array()
    n = gen.shape[0]
    if not gen.any():
        return np.full(n, 1.0 / n)
    lhs = np.vstack([gen.T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def symmetry_mc_check(
    spec: AsianOptionSpec,
    model: RegimeModel,
    state: MarketState,
    cfg: McConfig,
) -> dict:
    """Price both sides of one equivalence by Monte Carlo and compare.

    Left side: the input contract under the input model. Right side:
    ``scale`` times the counterpart contract under the swapped model at
    the same spot, simulated with an independent seed. Both sides are
    priced once per starting regime; the ``stationary`` block combines
    the regimes with the chain's stationary weights, which is where the
    equality is claimed. Per-regime rows carry their own gaps and
    z-scores so the conditional behaviour stays visible.

    Returns a plain dict (JSON-ready) with the case record, per-regime
    rows, and the stationary combination.
    """
    other_spec, other_model, scale = symmetric_counterpart(spec, model, state)
    case = symmetry_case(spec, model, state)
    rhs_cfg = McConfig(
        n_paths=cfg.n_paths,
        n_steps=cfg.n_steps,
        seed=cfg.seed + 1,
        antithetic=cfg.antithetic,
    )
    pi = _stationary_law(model)
    rows = []
    lhs_prices, lhs_ses, rhs_prices, rhs_ses = [], [], [], []
    for regime in range(model.n_states):
        st = MarketState(t=state.t, s=state.s, a=state.a, regime=regime)
        lhs = mc_price(spec, st, model, cfg)
        rhs = mc_price(other_spec, st, other_model, rhs_cfg)
        rhs_scaled = scale * rhs.price
        rhs_se = scale * rhs.std_error
        se = float(np.hypot(lhs.std_error, rhs_se))
        rows.append(
            {
                "regime": regime,
                "lhs_price": lhs.price,
                "lhs_se": lhs.std_error,
                "rhs_price_scaled": rhs_scaled,
                "rhs_se_scaled": rhs_se,
                "gap": lhs.price - rhs_scaled,
                "z": (lhs.price - rhs_scaled) / se,
            }
        )
        lhs_prices.append(lhs.price)
        lhs_ses.append(lhs.std_error)
        rhs_prices.append(rhs_scaled)
        rhs_ses.append(rhs_se)
    lhs_mix = float(np.dot(pi, lhs_prices))
    rhs_mix = float(np.dot(pi, rhs_prices))
    se_mix = float(
        np.sqrt(np.dot(pi**2, np.square(lhs_ses)) + np.dot(pi**2, np.square(rhs_ses)))
    )
    return {
        "lhs": case.lhs,
        "rhs": case.rhs,
        "scale": scale,
        "per_regime": rows,
        "stationary": {
            "weights": [float(w) for w in pi],
            "lhs_price": lhs_mix,
            "rhs_price_scaled": rhs_mix,
            "gap": lhs_mix - rhs_mix,
            "se": se_mix,
            "z": (lhs_mix - rhs_mix) / se_mix,
        },
    }
