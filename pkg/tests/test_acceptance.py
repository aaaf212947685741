"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import time
from fractions import Fraction
from math import gcd

import numpy as np
import pytest

from cpsc_ris import SystemConfig
from cpsc_ris.analysis import (
    TapStatistics,
    ber_union_bound,
    conditional_pep,
    difference_columns,
    diversity_rank_scan,
    matrix_rank,
    q_function,
    unconditional_pep,
)
from cpsc_ris.channel import assemble_equivalent_cir, core_positions, draw_core_taps, generate_realization
from cpsc_ris.cli import main
from cpsc_ris.detection import im_low_complexity_detect, im_ml_detect
from cpsc_ris.estimation import theoretical_mse, theoretical_mse_trace, zadoff_chu_pilot
from cpsc_ris.harness import run_ber_sweep, run_mse_sweep
from cpsc_ris.numerics import cir, cyclic_shift
from cpsc_ris.transceiver import (
    PermutationCode,
    add_cp,
    apply_anchor,
    constellation,
    received_from_links,
    received_per_link,
    ris_phase_profile,
    spectral_efficiency,
    synthesize_received,
)

from .conftest import ACCEPTANCE_LOG

# tolerances and sizes pinned from the acceptance criteria
MSE_REL_TOL = 0.02
MSE_TRIALS = 10_000
MSE_BUDGET_S = 60.0
GRAM_TOL = 1e-10
MSE_FORM_TOL = 1e-10
N_RANDOM_PILOTS = 200
N_MODEL_CONFIGS = 1000
MODEL_TOL = 1e-10
SIGMAS = 3.0
BASELINE_GRID = (30.0, 32.0, 34.0, 36.0, 38.0, 40.0, 42.0, 44.0)
BASELINE_TRIALS = 200_000
BASELINE_BUDGET_S = 30 * 60.0
BOUND_RATIO = 3.0
PEP_PAIRS = 20
PEP_DRAWS = 1_000_000
PEP_REL_TOL = 0.10
PEP_WINDOW = (1e-4, 1e-1)
IM_TOL = 1e-12


def record(ac, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {ac} {detail}"
    ACCEPTANCE_LOG.append(line)
    print(line)
    assert ok, line


def binomial_sigma(p1, p2, n):
    return np.sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n)


# --- AC1 -------------------------------------------------------------------------


def test_ac1_estimation_mse_and_zc_gram():
    cfg = SystemConfig(N=16, R=4, m=3, L=2, taps=2, pdp_decay=1.0, min_trials=MSE_TRIALS, snr_db=tuple(range(0, 45, 5)))
    t0 = time.perf_counter()
    rows = run_mse_sweep(cfg)
    elapsed = time.perf_counter() - t0
    worst = max(abs(emp / (1 / inv) - 1) for inv, emp, _ in rows)
    theory_ok = all(np.isclose(theo, 1 / inv, rtol=1e-12) for inv, _, theo in rows)
    gram_err = 0.0
    for N in range(2, 65, 2):
        for varpi in (v for v in range(1, 2 * N) if gcd(v, N) == 1):
            X = cir(zadoff_chu_pilot(N, varpi).x_p)
            gram_err = max(gram_err, np.max(np.abs(X.conj().T @ X - N * np.eye(N))))
    ok = worst < MSE_REL_TOL and theory_ok and elapsed < MSE_BUDGET_S and gram_err < GRAM_TOL
    record(
        "AC1",
        ok,
        f"MSE worst rel. error {worst:.4f} (tol {MSE_REL_TOL}) over {len(rows)} points x {MSE_TRIALS} trials "
        f"in {elapsed:.1f}s (budget {MSE_BUDGET_S:.0f}s); ZC Gram max error {gram_err:.1e} for even N<=64",
    )


# --- AC2 -------------------------------------------------------------------------


def test_ac2_orthogonal_pilot_optimality():
    rng = np.random.default_rng(2)
    N0 = 0.37
    below, eq_mismatch, form_err = 0, 0, 0.0
    for t in range(N_RANDOM_PILOTS):
        N = 2 * int(rng.integers(1, 17))
        if t % 10 == 0:
            x = zadoff_chu_pilot(N, 1).x_p  # include orthogonal pilots so equality is exercised
        else:
            x = np.exp(2j * np.pi * rng.random(N))
        X = cir(x)
        orth = np.max(np.abs(X.conj().T @ X - N * np.eye(N))) < GRAM_TOL
        mse = theoretical_mse(x, N0)
        below += mse < N0 * (1 - 1e-9)
        eq_mismatch += (abs(mse / N0 - 1) < 1e-9) != orth
        form_err = max(form_err, abs(mse - theoretical_mse_trace(x, N0)) / mse)
    ok = below == 0 and eq_mismatch == 0 and form_err < MSE_FORM_TOL
    record(
        "AC2",
        ok,
        f"{N_RANDOM_PILOTS} pilots: {below} below N0, {eq_mismatch} equality/orthogonality mismatches, "
        f"trace vs spectral max rel. diff {form_err:.1e} (tol {MSE_FORM_TOL})",
    )


# --- AC3 -------------------------------------------------------------------------


def _random_config(rng):
    while True:
        R = int(rng.integers(0, 5))
        N = int(rng.integers(2, 17))
        L = int(rng.integers(1, N))
        if R and L > N // (R + 1):
            continue
        delta = int(rng.integers(L, N // (R + 1) + 1)) if R else L
        taps = tuple(int(v) for v in rng.integers(1, L + 1, size=R + 1))
        m = tuple(int(v) for v in rng.integers(1, 5, size=R + 1))
        scheme = "CPSC-RIS" if R else "CPSC"
        return SystemConfig(N=N, R=R, L=L, delta=delta, taps=taps, m=m, M=int(rng.choice([2, 4, 8])), scheme=scheme, detectors=("MMSE",))


def test_ac3_model_identities():
    rng = np.random.default_rng(3)
    worst_model, worst_cdd = 0.0, 0.0
    for _ in range(N_MODEL_CONFIGS):
        cfg = _random_config(rng)
        real = generate_realization(cfg, rng)
        x = constellation(cfg.M)[rng.integers(0, cfg.M, cfg.N)]
        delays = [cfg.delta * r for r in range(1, cfg.R + 1)]
        y9 = synthesize_received(x, assemble_equivalent_cir(real, None, cfg).g_eq, 0.0)
        y6 = received_from_links(x, real.links, delays, cfg.L)
        y7 = received_per_link(x, real.links, delays, cfg.N)
        scale = max(np.linalg.norm(y9), 1e-300)
        worst_model = max(worst_model, np.linalg.norm(y6 - y9) / scale, np.linalg.norm(y7 - y9) / scale)
        x_cp = add_cp(x, cfg.L)
        theta = ris_phase_profile(x_cp, delays, cfg.L)
        for r, d in enumerate(delays):
            worst_cdd = max(worst_cdd, np.max(np.abs(x_cp * np.exp(1j * theta[r]) - add_cp(cyclic_shift(x, d), cfg.L))))
    # symbol-for-symbol CP layout, N=8, R=3, delta=2, with distinct 8-PSK labels
    x = constellation(8)
    x_cp = add_cp(x, 2)
    theta = ris_phase_profile(x_cp, [2, 4, 6], 2)
    expected = {
        0: [7, 8, 1, 2, 3, 4, 5, 6, 7, 8],
        2: [5, 6, 7, 8, 1, 2, 3, 4, 5, 6],
        4: [3, 4, 5, 6, 7, 8, 1, 2, 3, 4],
        6: [1, 2, 3, 4, 5, 6, 7, 8, 1, 2],
    }
    rows = {0: x_cp, **{d: x_cp * np.exp(1j * theta[r]) for r, d in enumerate([2, 4, 6])}}
    layout_ok = all(
        np.max(np.abs(rows[d] - x[np.array(lbl) - 1])) < 1e-12 for d, lbl in expected.items()
    )
    ok = worst_model < MODEL_TOL and worst_cdd < 1e-12 and layout_ok
    record(
        "AC3",
        ok,
        f"{N_MODEL_CONFIGS} random configs: model max rel. diff {worst_model:.1e} (tol {MODEL_TOL}), "
        f"CDD reconstruction max error {worst_cdd:.1e}, CP layout {'reproduced' if layout_ok else 'MISMATCH'}",
    )


# --- AC4 / AC5 -------------------------------------------------------------------


@pytest.fixture(scope="module")
def baseline_sweep():
    cfg = SystemConfig(N=8, M=2, R=2, detectors=("ML", "MMSE", "ZF"), snr_db=BASELINE_GRID, min_trials=BASELINE_TRIALS, min_bit_errors=None)
    t0 = time.perf_counter()
    recs = run_ber_sweep(cfg)
    elapsed = time.perf_counter() - t0
    ber = {(r.detector, r.snr_db): r.ber for r in recs}
    bits = BASELINE_TRIALS * cfg.bits_per_block
    return cfg, ber, bits, elapsed


@pytest.mark.slow
def test_ac4_detector_ordering(baseline_sweep):
    cfg, ber, n, elapsed = baseline_sweep
    resolved, reversed_pts = [], []
    for s in BASELINE_GRID:
        ml, mmse, zf = ber[("ML", s)], ber[("MMSE", s)], ber[("ZF", s)]
        g1 = (zf - mmse) / binomial_sigma(zf, mmse, n)
        g2 = (mmse - ml) / max(binomial_sigma(mmse, ml, n), 1e-300)
        if g1 > SIGMAS and g2 > SIGMAS:
            resolved.append(s)
        if g1 < -SIGMAS or g2 < -SIGMAS:
            reversed_pts.append(s)
    ok = len(resolved) >= 3 and not reversed_pts and elapsed < BASELINE_BUDGET_S
    record(
        "AC4",
        ok,
        f"ZF > MMSE > ML with both gaps > {SIGMAS:.0f} sigma at {resolved} dB; reversed at {reversed_pts}; "
        f"sweep {elapsed:.0f}s (budget {BASELINE_BUDGET_S:.0f}s)",
    )


@pytest.mark.slow
def test_ac5_union_bound_validity(baseline_sweep):
    cfg, ber, n, _ = baseline_sweep
    bound = ber_union_bound(cfg, [cfg.noise_power(s) for s in BASELINE_GRID])
    sim = np.array([ber[("ML", s)] for s in BASELINE_GRID])
    above = bool(np.all(bound >= sim))
    usable = [i for i, p in enumerate(sim) if 0 < p <= 1e-3]
    i = usable[-1] if usable else None
    ratio = bound[i] / sim[i] if i is not None else np.inf
    ok = above and ratio < BOUND_RATIO
    pairs = ", ".join(f"{s:g}dB {b:.2e}/{p:.2e}" for s, b, p in zip(BASELINE_GRID, bound, sim))
    record(
        "AC5",
        ok,
        f"bound >= ML BER at every point: {above}; bound/BER at {BASELINE_GRID[i] if i is not None else '-'} dB = {ratio:.2f} "
        f"(limit {BOUND_RATIO}); bound/sim: {pairs}",
    )


# --- AC6 -------------------------------------------------------------------------


def test_ac6_pep_closed_form_vs_channel_average():
    cfg = SystemConfig(N=4, M=2, R=1, L=2, taps=2)
    pos = core_positions(cfg)
    stats = TapStatistics.from_config(cfg)
    rng = np.random.default_rng(6)
    core = draw_core_taps(cfg, rng, PEP_DRAWS)
    grid = np.arange(0.0, 80.0, 2.0)
    worst, checked = 0.0, 0
    for _ in range(PEP_PAIRS):
        while True:
            x, xh = (np.where(rng.integers(0, 2, 4) == 0, 1.0, -1.0) + 0j for _ in range(2))
            if not np.allclose(x, xh):
                break
        dist = np.sum(np.abs(core @ difference_columns(x, xh, pos).T) ** 2, axis=1)
        for snr in grid:
            N0 = cfg.noise_power(snr)
            closed = unconditional_pep(x, xh, stats, N0, pos)
            if not PEP_WINDOW[0] <= closed <= PEP_WINDOW[1]:
                continue
            avg = float(np.mean(q_function(np.sqrt(dist / (2 * N0)))))
            worst = max(worst, abs(closed / avg - 1))
            checked += 1
    ok = checked > 0 and worst <= PEP_REL_TOL
    record(
        "AC6",
        ok,
        f"{PEP_PAIRS} BPSK pairs, {checked} (pair, SNR) points with PEP in {PEP_WINDOW}: "
        f"max rel. gap closed-form vs {PEP_DRAWS}-draw channel average {worst:.2f} (tol {PEP_REL_TOL})",
    )


# --- AC7 -------------------------------------------------------------------------


def test_ac7_rank_facts():
    base = SystemConfig(N=8, M=2, R=2)
    r1 = matrix_rank(difference_columns(np.ones(8), -np.ones(8), core_positions(base)))
    cfg = SystemConfig(N=4, M=2, R=1, L=2, taps=2)
    a, b = diversity_rank_scan(cfg), diversity_rank_scan(cfg)
    ok = r1 == 1 and a.rank_min == 1 and a.histogram == b.histogram and np.array_equal(a.rank, b.rank)
    record("AC7", ok, f"all-ones vs all-minus-ones rank {r1}; N=4 R=1 min rank {a.rank_min}; histogram {a.histogram} (repeatable)")


# --- AC8 -------------------------------------------------------------------------


def test_ac8_index_modulation():
    cfg = SystemConfig(N=8, M=2, R=2, scheme="CPSC-RIS-IM", detectors=("IM-ML", "IM-LC"))
    code = PermutationCode(2)
    rng = np.random.default_rng(8)
    real = generate_realization(cfg, rng)
    g = {k: assemble_equivalent_cir(real, k, cfg).g_eq for k in code.table}
    ones = np.ones(8, dtype=complex)
    plain_gap = np.linalg.norm(cir(ones) @ (g[(1, 2)] - g[(2, 1)])) ** 2
    xa = apply_anchor(ones, 2)
    anchor_gap = np.linalg.norm(cir(xa) @ (g[(1, 2)] - g[(2, 1)])) ** 2

    # noiseless LC vs joint ML agreement
    B = 500
    core = draw_core_taps(cfg, rng, B)
    x = constellation(2)[rng.integers(0, 2, (B, 8))]
    ki = rng.integers(0, len(code), B)
    pos = np.stack([core_positions(cfg, k) for k in code.table])
    G = np.zeros((B, 8), dtype=complex)
    G[np.arange(B)[:, None], pos[ki]] = core
    y = synthesize_received(apply_anchor(x, 2), G, 0.0)
    ml = im_ml_detect(y, core, cfg, code)
    lc = im_low_complexity_detect(y, core, 0.0, cfg, code)
    agree = float(np.mean(np.all(lc.x_hat == ml.x_hat, axis=1) & (lc.k_hat == ml.k_hat)))
    exact = bool(np.array_equal(ml.k_hat, ki) and np.allclose(ml.x_hat, x))

    sweep = run_ber_sweep(cfg.replace(snr_db=(30.0, 35.0), min_trials=20_000, min_bit_errors=None))
    ber = {(r.detector, r.snr_db): r.ber for r in sweep}
    gaps = {s: ber[("IM-LC", s)] / max(ber[("IM-ML", s)], 1e-300) for s in (30.0, 35.0)}

    se_plain = spectral_efficiency(SystemConfig(N=16, L=2, M=2, R=3), im=False)
    se_im = spectral_efficiency(SystemConfig(N=16, L=2, M=2, R=3), im=True)
    single = SystemConfig(N=8, M=2, R=1)
    N0 = [single.noise_power(s) for s in (20.0, 30.0, 40.0)]
    b_im = ber_union_bound(single.replace(scheme="CPSC-RIS-IM", detectors=("IM-ML",)), N0)
    b_plain = ber_union_bound(single, N0)
    bound_diff = float(np.max(np.abs(b_im - b_plain) / b_plain))

    ok = (
        plain_gap < 1e-24
        and anchor_gap > 0
        and agree == 1.0
        and exact
        and se_plain == Fraction(16, 18)
        and se_im == 1
        and bound_diff < IM_TOL
    )
    record(
        "AC8",
        ok,
        f"constant-block metric gap without/with anchor {plain_gap:.1e}/{anchor_gap:.2e}; "
        f"noiseless LC=ML on {agree:.0%} of {B}; LC/ML BER ratio {', '.join(f'{s:g}dB {v:.2f}' for s, v in gaps.items())}; "
        f"SE {se_plain} and {se_im}; single-permutation IM bound rel. diff {bound_diff:.1e}",
    )


# --- AC9 -------------------------------------------------------------------------


def test_ac9_ris_benefit_and_csi_loss():
    snr = 35.0
    base = dict(N=16, L=2, taps=2, detectors=("MMSE",), snr_db=(snr,), min_trials=100_000, min_bit_errors=None)
    ber = {}
    for R, scheme in ((0, "CPSC"), (2, "CPSC-RIS"), (4, "CPSC-RIS")):
        ber[R] = run_ber_sweep(SystemConfig(R=R, scheme=scheme, **base))[0].ber
    n = 100_000 * 16
    g42 = (ber[2] - ber[4]) / binomial_sigma(ber[2], ber[4], n)
    g20 = (ber[0] - ber[2]) / binomial_sigma(ber[0], ber[2], n)

    grid = (25.0, 30.0, 35.0, 40.0)
    csi = dict(base, snr_db=grid, min_trials=50_000)
    perfect = [r.ber for r in run_ber_sweep(SystemConfig(R=4, **csi))]
    estimated = [r.ber for r in run_ber_sweep(SystemConfig(R=4, csi="estimated", **csi))]
    csi_ok = all(e > p for e, p in zip(estimated, perfect))
    ok = g42 > SIGMAS and g20 > SIGMAS and csi_ok
    record(
        "AC9",
        ok,
        f"MMSE BER at {snr:g} dB: R=4 {ber[4]:.2e} < R=2 {ber[2]:.2e} ({g42:.0f} sigma) < R=0 {ber[0]:.2e} ({g20:.0f} sigma); "
        f"estimated > perfect CSI at {sum(e > p for e, p in zip(estimated, perfect))}/{len(grid)} points",
    )


# --- AC10 ------------------------------------------------------------------------


def test_ac10_determinism_across_threads(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("N: 8\nR: 2\nchunk_size: 250\nmin_bit_errors: 40\n")
    commands = {
        "ber": ["ber", "--snr", "20:5:35", "--min-trials", "1500"],
        "mse": ["mse", "--snr", "0,20", "--min-trials", "1000"],
        "bound": ["bound", "--snr", "20:10:40"],
        "pep": ["pep", "--pair", "0,255", "--snr", "30", "--draws", "5000"],
        "rankscan": ["rankscan"],
    }
    same = {}
    for name, args in commands.items():
        outs = []
        for threads in (1, 3, 1):
            out = tmp_path / f"{name}-{threads}-{len(outs)}.csv"
            assert main([*args, "--config", str(cfg), "--seed", "11", "--threads", str(threads), "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        same[name] = len(set(outs)) == 1
    record("AC10", all(same.values()), "byte-identical CSVs across runs and thread counts 1/3: " + ", ".join(f"{k} {v}" for k, v in same.items()))
