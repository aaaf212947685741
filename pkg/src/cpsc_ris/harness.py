"""Monte Carlo BER/MSE sweeps and analytic tables.

Trials at an SNR point are split into fixed-size chunks. Chunk ``c`` of SNR
point ``s`` draws everything from its own stream seeded by
``(master_seed, s, c)``, and chunk results are reduced in chunk order, so
the output does not depend on how many worker threads ran the chunks.
"""

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import (
    TapStatistics,
    ber_union_bound,
    conditional_pep,
    diversity_rank_scan,
    enumerate_candidates,
    pairwise_statistic,
    q_function,
    unconditional_pep,
)
from .channel import core_positions, draw_core_taps, scatter_core
from .detection import fd_equalize, im_low_complexity_detect, im_ml_detect, ml_detect
from .estimation import ls_estimate, random_psk_pilot, theoretical_mse, zadoff_chu_pilot
from .numerics import cir
from .transceiver import PermutationCode, anchor_vector, complex_noise, psk_demodulate, psk_modulate

log = logging.getLogger(__name__)

BER_HEADER = ("scheme", "detector", "snr_db", "trials", "bit_errors", "ber", "seed", "wall_time_s")
BOUND_HEADER = ("scheme", "snr_db", "union_bound")
MSE_HEADER = ("inv_n0", "mse_empirical", "mse_theoretical")
PEP_HEADER = ("snr_db", "unconditional_pep", "channel_average_pep", "conditional_pep", "conditional_pep_mc")
RANK_HEADER = ("rank", "count")


@dataclass
class BerRecord:
    scheme: str
    detector: str
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    seed: int
    wall_time: float | None = None


def chunk_rng(master_seed, snr_index, chunk_index):
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(snr_index), int(chunk_index)]))


def _pilot(config, rng_seed):
    if config.pilot == "zc":
        return zadoff_chu_pilot(config.N, config.varpi)
    return random_psk_pilot(config.N, config.M, np.random.default_rng([int(rng_seed), 0xB10C]))


def _estimate_core(config, g_true, pos_pilot, pilot, rng, N0):
    """Send one pilot block through the true CIR and return LS core-tap estimates."""
    y_p = cir(g_true) @ pilot.x_p
    if N0 > 0:
        y_p = y_p + complex_noise(rng, y_p.shape, N0)
    support = pos_pilot if config.denoise else None
    g_hat = ls_estimate(y_p, pilot, support=support).g_hat
    return g_hat


def _ber_chunk(config, n, N0, rng, pilot):
    """Run ``n`` trials; returns bit errors per detector (in config order)."""
    N, M = config.N, config.M
    pos = core_positions(config)
    core = draw_core_taps(config, rng, n)
    bits = rng.integers(0, 2, size=(n, config.bits_per_block), dtype=np.int8)
    data_bits = bits[:, config.b1 :]
    x = psk_modulate(data_bits, M)
    if config.im:
        code = PermutationCode(config.R)
        pidx = bits[:, : config.b1].astype(np.int64) @ (1 << np.arange(config.b1 - 1, -1, -1)) if config.b1 else np.zeros(n, dtype=np.int64)
        all_pos = np.stack([core_positions(config, k) for k in code.table])
        g = np.zeros((n, N), dtype=np.complex128)
        g[np.arange(n)[:, None], all_pos[pidx]] = core
        a = anchor_vector(N, M) if len(code) > 1 else np.ones(N)
        tx = x * a
    else:
        g = scatter_core(core, pos, N)
        tx = x
    y = cir(g) @ tx[..., None]
    y = y[..., 0]
    if N0 > 0:
        y = y + complex_noise(rng, y.shape, N0)

    if config.csi == "estimated":
        # the pilot block is sent with the reference (identity) delay assignment
        g_ref = scatter_core(core, pos, N)
        g_hat = _estimate_core(config, g_ref, pos, pilot, rng, N0)
        core_hat = g_hat[:, pos]
    else:
        g_hat = scatter_core(core, pos, N)
        core_hat = core

    errors = []
    for det in config.detectors:
        if det == "ML":
            res = ml_detect(y, g_hat, M)
        elif det in ("ZF", "MMSE"):
            res = fd_equalize(y, g_hat, N0, det, M)
        elif det == "IM-ML":
            res = im_ml_detect(y, core_hat, config)
        else:
            res = im_low_complexity_detect(y, core_hat, N0, config)
        e = np.count_nonzero(psk_demodulate(res.x_hat, M) != data_bits)
        if config.im and config.b1:
            k_bits = ((res.k_hat[:, None] >> np.arange(config.b1 - 1, -1, -1)) & 1).astype(np.int8)
            e += np.count_nonzero(k_bits != bits[:, : config.b1])
        errors.append(int(e))
    return np.array(errors, dtype=np.int64)


def _chunk_sizes(config):
    full, rest = divmod(config.min_trials, config.chunk_size)
    return [config.chunk_size] * full + ([rest] if rest else [])


def _run_point(config, snr_index, N0, pilot, threads, work):
    """Reduce chunk results in order until the stopping rule fires."""
    sizes = _chunk_sizes(config)
    trials = 0
    errors = None
    floor = config.min_bit_errors
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        c = 0
        while c < len(sizes):
            wave = range(c, min(c + max(threads, 1), len(sizes)))
            args = [(config, sizes[i], N0, chunk_rng(config.master_seed, snr_index, i), pilot) for i in wave]
            results = list(pool.map(lambda a: work(*a), args)) if pool else [work(*a) for a in args]
            for i, res in zip(wave, results):
                trials += sizes[i]
                errors = res.copy() if errors is None else errors + res
                if floor is not None and errors.min() >= floor:
                    return trials, errors
            c = wave.stop
    finally:
        if pool:
            pool.shutdown()
    return trials, errors


def run_ber_sweep(config, threads=1, record_time=False):
    """Monte Carlo BER of every configured detector over the SNR grid.

    A point stops once ``min_trials`` trials ran or every detector has at
    least ``min_bit_errors`` bit errors, whichever comes first. All detectors
    see the same channel, data and noise draws.
    """
    config.validate()
    pilot = _pilot(config, config.master_seed) if config.csi == "estimated" else None
    records = []
    for s, snr in enumerate(config.snr_db):
        t0 = time.perf_counter()
        N0 = config.noise_power(snr)
        trials, errors = _run_point(config, s, N0, pilot, threads, _ber_chunk)
        wall = time.perf_counter() - t0
        for det, e in zip(config.detectors, errors):
            ber = int(e) / (trials * config.bits_per_block)
            records.append(BerRecord(config.scheme, det, snr, trials, int(e), ber, config.master_seed, wall if record_time else None))
        log.info("snr %.2f dB: %d trials, errors %s (%.1fs)", snr, trials, errors.tolist(), wall)
    return records


def _mse_chunk(config, n, N0, rng, pilot):
    pos = core_positions(config)
    g = scatter_core(draw_core_taps(config, rng, n), pos, config.N)
    g_hat = _estimate_core(config, g, pos, pilot, rng, N0)
    return np.array([np.sum(np.abs(g_hat - g) ** 2)])


def run_mse_sweep(config, threads=1):
    """Empirical vs closed-form estimation MSE; grid values are ``1/N0`` in dB."""
    cfg = config.replace(min_bit_errors=None)
    pilot = _pilot(cfg, cfg.master_seed)
    rows = []
    for s, inv_db in enumerate(cfg.snr_db):
        N0 = 10.0 ** (-inv_db / 10.0)
        trials, total = _run_point(cfg, s, N0, pilot, threads, _mse_chunk)
        rows.append((10.0 ** (inv_db / 10.0), float(total[0]) / trials, theoretical_mse(pilot, N0)))
    return rows


def run_bound(config):
    """Union bound on the ML BER over the SNR grid: ``[(snr_db, bound), ...]``."""
    N0 = np.array([config.noise_power(s) for s in config.snr_db])
    return list(zip(config.snr_db, ber_union_bound(config, N0).tolist()))


def run_pep(config, pair, draws=100_000, noise_draws=100_000):
    """Closed-form vs Monte Carlo PEP for one candidate pair over the SNR grid.

    ``pair`` indexes the candidate enumeration (bit-word order). The channel
    average draws ``draws`` realisations; the conditional check uses the
    first realisation and ``noise_draws`` noise samples of the decision
    statistic.
    """
    if config.im:
        raise ValueError("pep supports the non-IM schemes")
    cands = enumerate_candidates(config)
    i, j = pair
    x, x_hat = cands.symbols[i], cands.symbols[j]
    if i == j:
        raise ValueError("pair must reference two different blocks")
    pos = core_positions(config)
    stats = TapStatistics.from_config(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, i, j]))
    core = draw_core_taps(config, rng, draws)
    D = cir(x - x_hat)[:, pos]
    dist = np.sum(np.abs(core @ D.T) ** 2, axis=1)
    g0 = scatter_core(core[0], pos, config.N)
    rows = []
    for snr in config.snr_db:
        N0 = config.noise_power(snr)
        v = pairwise_statistic(x, x_hat, g0, N0, 0.0, rng, noise_draws)
        rows.append((
            snr,
            unconditional_pep(x, x_hat, stats, N0, pos),
            float(np.mean(q_function(np.sqrt(dist / (2 * N0))))),
            conditional_pep(x, x_hat, g0, N0),
            float(np.mean(v > 0)),
        ))
    return rows


def run_rankscan(config):
    spec = diversity_rank_scan(config)
    return spec, sorted(spec.histogram.items())


# --- output ------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def ber_rows(records):
    return [
        (r.scheme, r.detector, r.snr_db, r.trials, r.bit_errors, r.ber, r.seed, r.wall_time)
        for r in records
    ]


def write_metadata(path, config, command, extra=None):
    meta = {
        "command": command,
        "config": config.to_dict(),
        "stopping_rule": (
            f"stop a point at min_trials={config.min_trials} trials or once every detector "
            f"has min_bit_errors={config.min_bit_errors} bit errors, whichever comes first"
        ),
        "rng_streams": "numpy SeedSequence([master_seed, snr_index, chunk_index])",
    }
    meta.update(extra or {})
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, default=str)


GNUPLOT_TEMPLATE = """\
# generated plotting script; run with: gnuplot {name}
set datafile separator ','
set logscale y
set key outside
set xlabel '{xlabel}'
set ylabel '{ylabel}'
set terminal pngcairo size 900,600
set output '{png}'
plot {plots}
"""


def plot_script(kind, csv_path, series):
    """gnuplot script plotting ``series`` (list of (label, awk filter or None)) from ``csv_path``."""
    if kind == "ber":
        xlabel, ylabel, xcol, ycol = "Eb/N0 (dB)", "BER", 3, 6
    elif kind == "bound":
        xlabel, ylabel, xcol, ycol = "Eb/N0 (dB)", "union bound", 2, 3
    else:
        xlabel, ylabel, xcol, ycol = "1/N0", "MSE", 1, 2
    plots = []
    for label, filt in series:
        src = f"\"< awk -F, 'NR>1 && {filt}' {csv_path}\"" if filt else f"'{csv_path}' every ::1"
        plots.append(f"{src} using {xcol}:{ycol} with linespoints title '{label}'")
    if kind == "mse":
        plots.append(f"'{csv_path}' every ::1 using 1:3 with lines title 'theory'")
        xlabel = "1/N0"
    return GNUPLOT_TEMPLATE.format(
        name="plot.gp", xlabel=xlabel, ylabel=ylabel, png=f"{csv_path}.png", plots=", \\\n     ".join(plots)
    )

