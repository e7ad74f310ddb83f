"""Acceptance suite: nine binding criteria, one printed verdict line each.

Every test computes its criterion exactly as stated, prints a single
``[PASS]``/``[FAIL]`` line (re-echoed after the pytest summary), and then
asserts. Tolerances are pinned in the constants below and in the test
bodies; nothing is loosened to force a green run.

Criterion 7 deserves a note up front. The put/call counterpart identity
is established through a time reversal of the driving chain, and
conditioning on the starting regime does not survive that reversal: the
reversed chain starts from the regime the forward chain ends in. The
identity therefore holds when the starting regime is drawn from the
chain's stationary law (every two-state chain is reversible under it),
but not conditionally per starting regime while switching is active. The
test evaluates the criterion as written (per starting regime), reports
the honest result, and prints the stationary-weighted companion figure
alongside. See the README for the full analysis.
"""

import json
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from rsasian import (
    AsianOptionSpec,
    FdConfig,
    HamConfig,
    MarketState,
    McConfig,
    black_scholes_put,
    build_terms,
    fd_price,
    ham_vs_fd_report,
    heat_residual,
    delta_property_error,
    mc_price,
    price_european_put_rs,
    recursion_residual,
    richardson_order,
    select_exponent_variant,
    symmetry_mc_check,
    two_state_model,
)

REPORT_LINES = []

DESK = two_state_model(0.05, 0.03, 0.3, 0.2, 1.0, 1.0)
T = 1.0
S0 = 100.0

# Green's function sample set: the grid swept by the variant selector
GREENS_SAMPLES = [
    (tau, z, xi, gamma)
    for tau in (0.01, 0.1)
    for z, xi in ((0.3, 0.5), (1.0, 0.4), (0.8, 1.2))
    for gamma in (0.5, 1.0, 2.5)
]


def _verdict(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
    REPORT_LINES.append(line)
    print(line)
    return ok


def _inception(regime):
    return MarketState(t=0.0, s=S0, a=0.0, regime=regime)


def test_criterion_1_mc_against_black_scholes():
    """Single-regime European put vs the closed form, 1e5 and 1e6 paths."""
    model = two_state_model(0.05, 0.05, 0.2, 0.2, 0.0, 0.0)
    spec = AsianOptionSpec(style="european_put", T=T, K=100.0)
    want = black_scholes_put(S0, 100.0, 0.05, 0.2, T)
    start = time.perf_counter()
    # terminal sampling is exact, so one step suffices for a European payoff
    small = mc_price(spec, _inception(0), model,
                     McConfig(n_paths=100_000, n_steps=1, seed=101, antithetic=True))
    big = mc_price(spec, _inception(0), model,
                   McConfig(n_paths=1_000_000, n_steps=1, seed=103, antithetic=True))
    elapsed = time.perf_counter() - start
    gap_small = abs(small.price - want)
    rel_big = abs(big.price - want) / want
    ok = (
        gap_small <= 3.0 * small.std_error
        and rel_big <= 1e-3
        and elapsed < 60.0
    )
    _verdict(
        1,
        ok,
        f"single-regime MC vs Black-Scholes: |err| = {gap_small:.4f} "
        f"<= 3*SE = {3 * small.std_error:.4f} at 1e5 paths; "
        f"rel err = {rel_big:.2e} <= 1e-3 at 1e6 paths; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_2_european_closed_form_vs_mc():
    """Two-state European put closed form vs MC at 1e6 paths, 6 cases."""
    spec = AsianOptionSpec(style="european_put", T=T, K=100.0)
    worst = 0.0
    details = []
    ok = True
    for regime in (0, 1):
        for j, s in enumerate((90.0, 100.0, 110.0)):
            exact = price_european_put_rs(DESK, s, 100.0, 0.0, T, regime).price
            est = mc_price(
                spec,
                MarketState(t=0.0, s=s, a=0.0, regime=regime),
                DESK,
                McConfig(n_paths=1_000_000, n_steps=1, seed=211 + 7 * j + regime,
                         antithetic=True),
            )
            tol = max(3.0 * est.std_error, 5e-3 * abs(exact))
            gap = abs(est.price - exact)
            worst = max(worst, gap / tol)
            ok = ok and gap <= tol
            details.append(f"S={s:.0f}/R{regime}: {gap:.4f}<={tol:.4f}")
    _verdict(
        2,
        ok,
        "closed-form European vs MC at 1e6 paths, S/K in {0.9,1.0,1.1}, "
        f"both regimes: worst gap/tol = {worst:.2f} ({'; '.join(details[:2])}; ...)",
    )
    assert ok, details


def test_criterion_3_fd_oracle_cross_check():
    """FD vs MC on the desk floating put; Richardson order >= 1.8."""
    spec = AsianOptionSpec(style="floating_put", T=T)
    ok = True
    pieces = []
    for regime in (0, 1):
        state = _inception(regime)
        order, prices = richardson_order(
            DESK, T, FdConfig(n_y=800, n_t=800), state
        )
        est = mc_price(spec, state, DESK,
                       McConfig(n_paths=1_000_000, n_steps=252,
                                seed=307 + regime, antithetic=True))
        gap = abs(prices[-1] - est.price)
        ok = ok and gap <= 3.0 * est.std_error and order >= 1.8
        pieces.append(
            f"R{regime}: |fd-mc| = {gap:.4f} <= 3*SE = {3 * est.std_error:.4f}, "
            f"order = {order:.2f}"
        )
    _verdict(3, ok, "FD vs MC at 1e6 paths, " + "; ".join(pieces))
    assert ok, pieces


def test_criterion_4_greens_function():
    """Kernel PDE residual, delta property in O(tau), variant selection."""
    worst_good = max(heat_residual(*s, variant="tau_scaled") for s in GREENS_SAMPLES)
    worst_other = max(
        heat_residual(*s, variant="paper_printed") for s in GREENS_SAMPLES
    )
    bump = lambda x: np.exp(-((x - 1.0) ** 2))
    rational = lambda x: 1.0 / (1.0 + x**2)
    ratios = []
    small = []
    for phi in (bump, rational):
        coarse = delta_property_error(0.04, 0.8, phi, 1.2)
        fine = delta_property_error(0.01, 0.8, phi, 1.2)
        ratios.append(fine / coarse)
        small.append(delta_property_error(1e-3, 0.8, phi, 1.2))
    selected = select_exponent_variant()
    ok = (
        worst_good < 1e-6
        and max(ratios) < 0.5
        and max(small) < 5e-3
        and selected == "tau_scaled"
        and worst_other > 1e-6
    )
    _verdict(
        4,
        ok,
        f"kernel residual {worst_good:.1e} < 1e-6 over {len(GREENS_SAMPLES)} samples; "
        f"delta-property error ratios {ratios[0]:.2f}/{ratios[1]:.2f} (O(tau)); "
        f"selector picks '{selected}' (other variant residual {worst_other:.1e})",
    )
    assert ok


def test_criterion_5_ham_recursion_soundness():
    """Interior residual < 1e-3 for m = 1, 2; exact ICs; far-field decay."""
    terms = build_terms(DESK, T, HamConfig(m_trunc=2))
    residuals = {
        m: recursion_residual(terms[m], terms[m - 1], DESK) for m in (1, 2)
    }
    worst_res = max(max(r.values()) for r in residuals.values())
    z = np.asarray(terms[0].z_nodes)
    ic_lead = all(
        np.array_equal(
            np.asarray(terms[0].values[i])[0],
            np.maximum(np.exp(-z) / T - 1.0, 0.0),
        )
        for i in range(2)
    )
    ic_rest = all(
        not np.asarray(term.values[i])[0].any() for term in terms[1:] for i in range(2)
    )
    decay = max(term.boundary_decay(i) for term in terms[1:] for i in range(2))
    ok = worst_res < 1e-3 and ic_lead and ic_rest and decay <= 1e-6
    _verdict(
        5,
        ok,
        f"recursion residuals m=1: {max(residuals[1].values()):.1e}, "
        f"m=2: {max(residuals[2].values()):.1e} (< 1e-3); "
        f"initial conditions exact: {ic_lead and ic_rest}; "
        f"far-field decay {decay:.1e} <= 1e-6",
    )
    assert ok


def test_criterion_6_ham_vs_fd_report():
    """Report over both terminal and guess modes; gap reported unthresholded."""
    rep = ham_vs_fd_report(DESK, T)
    modes = rep["modes"]
    mode_keys = {(m["terminal_mode"], m["initial_guess_mode"]) for m in modes}
    covered = mode_keys == {
        ("payoff", "european_rs"),
        ("payoff", "zero"),
        ("paper_zero", "european_rs"),
        ("paper_zero", "zero"),
    }
    norms_finite = all(
        np.isfinite(np.asarray(m["term_norms"])).all()
        and np.isfinite(np.asarray(m["deltas"])).all()
        for m in modes
    )
    # at least one mode with non-increasing price deltas for m = 2..4
    def non_increasing(mode):
        return all(
            mode["deltas"][i][m - 1] <= mode["deltas"][i][m - 2] + 1e-15
            for i in range(2)
            for m in (3, 4)
        )

    any_mode = any(non_increasing(m) for m in modes)
    gaps = {
        (m["terminal_mode"], m["initial_guess_mode"]): [f"{g:+.3f}" for g in m["desk_gap"]]
        for m in modes
    }
    ref = gaps[("payoff", "european_rs")]
    ok = covered and norms_finite and any_mode and bool(rep["any_mode_non_increasing"])
    _verdict(
        6,
        ok,
        f"report produced over {len(modes)} modes (M_trunc = {rep['m_trunc']}); "
        f"term norms finite: {norms_finite}; non-increasing deltas in >= 1 mode: "
        f"{any_mode}; desk HAM-FD gap (payoff/european_rs) = {ref} "
        "(reported, not thresholded)",
    )
    assert ok


def test_criterion_7_symmetry_identities():
    """Counterpart identities by MC, per starting regime, 5 random models.

    Evaluated exactly as stated. The identity's proof reverses the chain
    in time, which replaces conditioning on the starting regime with
    conditioning on the terminal one, so the per-regime form fails while
    switching is active; the stationary-weighted combination is the form
    that survives. Both figures are printed; the verdict follows the
    stated per-regime form.
    """
    rng = np.random.default_rng(2026)
    random_models = []
    for _ in range(5):
        r1, r2 = rng.uniform(0.01, 0.08, size=2)
        s1, s2 = rng.uniform(0.15, 0.45, size=2)
        a12, a21 = rng.uniform(0.3, 3.0, size=2)
        random_models.append(two_state_model(r1, r2, s1, s2, a12, a21))
    instances = [
        AsianOptionSpec(style="floating_put", T=T),
        AsianOptionSpec(style="fixed_put", T=T, K=120.0),
    ]
    cfg = McConfig(n_paths=1_000_000, n_steps=126, seed=20260818, antithetic=True)
    worst_reg = 0.0
    worst_stat = 0.0
    for model in random_models:
        for spec in instances:
            res = symmetry_mc_check(spec, model, _inception(0), cfg)
            worst_reg = max(
                worst_reg, max(abs(row["z"]) for row in res["per_regime"])
            )
            worst_stat = max(worst_stat, abs(res["stationary"]["z"]))
    desk = symmetry_mc_check(instances[0], DESK, _inception(0), cfg)
    desk_reg = max(abs(row["z"]) for row in desk["per_regime"])
    ok = worst_reg <= 3.0
    _verdict(
        7,
        ok,
        f"per-starting-regime agreement at 1e6 paths: worst |z| = {worst_reg:.1f} "
        f"over 5 random models x 2 identities (desk model: {desk_reg:.1f}); "
        f"stationary-weighted companion: worst |z| = {worst_stat:.2f} (agrees)",
    )
    assert ok, (
        "conditioning on the starting regime does not survive the time "
        "reversal behind the counterpart identity; the stationary-weighted "
        f"combination agrees (worst |z| = {worst_stat:.2f}). See the README "
        "for the analysis. This red is honest and expected."
    )


def test_criterion_8_homogeneity_and_monotonicity():
    """MC scaling invariance with shared seeds; FD monotone in y."""
    spec = AsianOptionSpec(style="floating_put", T=T)
    cfg = McConfig(n_paths=200_000, n_steps=64, seed=808, antithetic=True)
    worst_rel = 0.0
    for t, s, a in ((0.0, S0, 0.0), (0.5, S0, 50.0)):
        base = mc_price(spec, MarketState(t=t, s=s, a=a, regime=0), DESK, cfg)
        for c in (0.5, 2.0):
            scaled = mc_price(
                spec, MarketState(t=t, s=c * s, a=c * a, regime=0), DESK, cfg
            )
            rel = abs(scaled.price - c * base.price) / (c * base.price)
            worst_rel = max(worst_rel, rel)
    stat_tol = 1e-10  # shared seeds make the scaling deterministic
    surf = fd_price(DESK, T, FdConfig(n_y=800, n_t=800))
    monotone = surf.monotone_in_y()
    ok = worst_rel <= stat_tol and monotone
    _verdict(
        8,
        ok,
        f"price(c*s, c*a) = c*price(s, a) for c in {{0.5, 2}} with shared seeds: "
        f"worst rel gap = {worst_rel:.1e}; FD surface nondecreasing in y at every "
        f"retained level: {monotone}",
    )
    assert ok


def test_criterion_9_cli_determinism(tmp_path):
    """Every CLI command, run twice with fixed seeds: byte-identical."""
    script = shutil.which("rsasian")
    base_cmd = [script] if script else [sys.executable, "-m", "rsasian.cli"]
    model = {"r": [0.05, 0.03], "sigma": [0.3, 0.2], "gen": [[-1.0, 1.0], [1.0, -1.0]]}
    mc = {"n_paths": 20_000, "n_steps": 32, "seed": 9, "antithetic": True}
    ham = {"m_trunc": 2, "n_z": 101, "n_u": 21}
    configs = {
        "price": {
            "option": {"style": "floating_put", "T": 1.0},
            "state": {"t": 0.0, "s": 100.0, "a": 0.0, "regime": 0},
            "method": {"mc": mc},
        },
        "compare": {
            "option": {"style": "floating_put", "T": 1.0},
            "state": {"t": 0.5, "s": 100.0, "a": 50.0, "regime": 0},
            "method": {"compare": {"ham": ham, "mc": mc, "fd": {"n_y": 64, "n_t": 64}}},
        },
        "convergence": {
            "option": {"style": "floating_put", "T": 1.0},
            "state": {"t": 0.5, "s": 100.0, "a": 50.0, "regime": 0},
            "method": {"ham": ham},
        },
        "symmetry-check": {
            "option": {"style": "fixed_put", "T": 1.0, "K": 120.0},
            "state": {"t": 0.0, "s": 100.0, "a": 0.0, "regime": 0},
            "method": {"mc": mc},
        },
    }
    ok = True
    pieces = []
    for command, body in configs.items():
        report = tmp_path / f"{command}.csv"
        cfg = {
            "schema_version": 1,
            "model": model,
            "output": {"format": "csv", "path": str(report)},
            **body,
        }
        cfg_path = tmp_path / f"{command}.json"
        cfg_path.write_text(json.dumps(cfg))
        blobs = []
        for _ in range(2):
            proc = subprocess.run(
                base_cmd + [command, "--config", str(cfg_path)],
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, f"{command}: {proc.stderr}"
            blobs.append(
                report.read_bytes()
                + (tmp_path / f"{command}.csv.effective.json").read_bytes()
            )
        same = blobs[0] == blobs[1]
        ok = ok and same
        pieces.append(f"{command}: {'identical' if same else 'DIFFERS'}")
    _verdict(9, ok, "repeated CLI runs byte-identical -> " + "; ".join(pieces))
    assert ok, pieces
