"""Monte Carlo simulation of the two-user MIMO multiple-access link.

Every trial draws its own generator from
``SeedSequence(master_seed, spawn_key=(snr_index, trial_index))``, so a
sweep is a pure function of its :class:`SimConfig` no matter how trials are
scheduled across workers.
"""
from __future__ import annotations

import csv
import functools
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from macstbc._validation import check_positive_int, check_qam_order, snr_scale
from macstbc.design_algebra import ComplexLinearDesign, named_design
from macstbc.lattice import ChannelRealization, build_lattice_generator, receive_antennas
from macstbc.qr_structure import StructureClass, ZERO_TOL, extract_blocks, qr_decompose
from macstbc.sphere_decoder import (
    DecodeStats,
    DecoderRefusal,
    PamConstellation,
    decode_conditional,
    ml_bruteforce,
    sphere_decode_generic,
)

__all__ = [
    "DECODERS",
    "SimConfig",
    "SnrPoint",
    "SweepResult",
    "TrialResult",
    "measure_receive_snr",
    "run_sweep",
    "run_trial",
    "sample_channel",
    "sample_symbols",
    "trial_rng",
]

DECODERS = ("conditional", "generic", "bruteforce")

CSV_COLUMNS = ("snr_db", "trials", "ser_user1", "ser_user2", "ser_total", "mean_quantizer_calls",
               "mean_sort_comparisons", "mean_nodes", "max_nodes")


def sample_channel(Nt: int, Nr: int, rng: np.random.Generator) -> ChannelRealization:
    """I.i.d. CN(0, 1) channels for both users."""
    shape = (Nt, Nr)
    s = math.sqrt(0.5)
    H1 = s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    H2 = s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return ChannelRealization(H1, H2)


def sample_symbols(n: int, c: PamConstellation, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform PAM coordinates (``n = 4k`` for one channel use of both users)."""
    return c.levels[rng.integers(0, c.side, size=n)]


def trial_rng(master_seed: int, snr_index: int, trial_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(snr_index, trial_index))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class SimConfig:
    """Sweep parameters.

    ``design`` is a built-in name (with ``nt``/``k``) or a design object.
    ``jobs`` only changes scheduling, never results.
    """

    design: str | ComplexLinearDesign = "alamouti"
    nt: int | None = None
    k: int | None = None
    qam: int = 4
    snr_db: tuple = (0.0, 10.0, 20.0)
    trials: int = 500
    master_seed: int = 0
    decoder: str = "conditional"
    tol: float = ZERO_TOL
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(v) for v in np.atleast_1d(self.snr_db)))
        check_qam_order(self.qam)
        check_positive_int(self.trials, "trials")
        check_positive_int(self.jobs, "jobs")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")
        if not self.snr_db:
            raise ValueError("snr_db list is empty")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must fit in 64 bits")

    def resolve_design(self) -> ComplexLinearDesign:
        if isinstance(self.design, ComplexLinearDesign):
            return self.design
        return named_design(self.design, self.nt, self.k)


@functools.lru_cache(maxsize=32)
def _prepared(config: SimConfig):
    design = config.resolve_design()
    return design, receive_antennas(design), PamConstellation(config.qam)


@dataclass
class TrialResult:
    z: np.ndarray
    z_hat: np.ndarray
    errors_user1: int
    errors_user2: int
    stats: DecodeStats

    @property
    def errors(self) -> int:
        return self.errors_user1 + self.errors_user2


def run_trial(config: SimConfig, trial_index: int, snr_index: int = 0, noise_scale: float = 1.0) -> TrialResult:
    """One channel use of both users at ``config.snr_db[snr_index]``."""
    design, Nr, c = _prepared(config)
    rng = trial_rng(int(config.master_seed), snr_index, trial_index)
    rho = 10.0 ** (config.snr_db[snr_index] / 10.0)
    Nt, k = design.Nt, design.k
    ch = sample_channel(Nt, Nr, rng)
    z = sample_symbols(4 * k, c, rng)
    M = build_lattice_generator(design, ch).M
    noise = math.sqrt(0.5) * rng.standard_normal(M.shape[0])
    y = snr_scale(rho, Nt) * (M @ z) + noise_scale * noise

    if config.decoder == "bruteforce":
        result = ml_bruteforce(M, y, c, rho, Nt)
    else:
        Q, R = qr_decompose(M)
        y_tilde = Q.T @ y
        if config.decoder == "generic":
            result = sphere_decode_generic(R, y_tilde, c, rho, Nt)
        else:
            blocks = extract_blocks(R, k, config.tol)
            if blocks.classification == StructureClass.UNSTRUCTURED:
                raise DecoderRefusal(
                    f"design {design!r} has an unstructured R factor; the conditional decoder "
                    "needs a diagonal R11 (use decoder 'generic' or 'bruteforce')")
            result = decode_conditional(blocks, y_tilde, c, rho, Nt)

    wrong = c.index_of(result.z_hat) != c.index_of(z)
    h = 2 * k
    return TrialResult(z, result.z_hat, int(wrong[:h].sum()), int(wrong[h:].sum()), result.stats)


@dataclass
class SnrPoint:
    snr_db: float
    trials: int
    coords_per_user: int
    errors_user1: int
    errors_user2: int
    stats_sum: DecodeStats
    max_nodes: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ser_user1(self) -> float:
        return self.errors_user1 / (self.trials * self.coords_per_user)

    @property
    def ser_user2(self) -> float:
        return self.errors_user2 / (self.trials * self.coords_per_user)

    @property
    def ser_total(self) -> float:
        return (self.errors_user1 + self.errors_user2) / (2 * self.trials * self.coords_per_user)

    def mean(self, counter: str) -> float:
        return getattr(self.stats_sum, counter) / self.trials

    def row(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "trials": self.trials,
            "ser_user1": self.ser_user1,
            "ser_user2": self.ser_user2,
            "ser_total": self.ser_total,
            "mean_quantizer_calls": self.mean("quantizer_calls"),
            "mean_sort_comparisons": self.mean("sort_comparisons"),
            "mean_nodes": self.mean("nodes_visited"),
            "max_nodes": self.max_nodes,
        }


@dataclass
class SweepResult:
    config: SimConfig
    points: list

    @property
    def ser(self) -> list:
        return [p.ser_total for p in self.points]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for p in self.points:
            writer.writerow({key: _fmt(val) for key, val in p.row().items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        cfg = self.config
        design = cfg.resolve_design()
        return {
            "design": design.name or "custom",
            "Nt": design.Nt,
            "k": design.k,
            "T": design.T,
            "qam": cfg.qam,
            "decoder": cfg.decoder,
            "master_seed": int(cfg.master_seed),
            "points": [dict(p.row(), mean_stats={key: p.mean(key) for key in p.stats_sum.as_dict()})
                       for p in self.points],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _fmt(value):
    return repr(float(value)) if isinstance(value, float) else str(value)


def _run_block(config, snr_index, start, stop):
    stats = DecodeStats()
    e1 = e2 = max_nodes = 0
    for t in range(start, stop):
        r = run_trial(config, t, snr_index)
        e1 += r.errors_user1
        e2 += r.errors_user2
        stats = stats + r.stats
        max_nodes = max(max_nodes, r.stats.nodes_visited)
    return e1, e2, stats, max_nodes


def run_sweep(config: SimConfig) -> SweepResult:
    """All trials at every SNR point; results are independent of ``config.jobs``."""
    design, _, _ = _prepared(config)
    jobs = config.jobs
    points = []
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        for si, snr in enumerate(config.snr_db):
            t0 = time.perf_counter()
            if pool is None:
                parts = [_run_block(config, si, 0, config.trials)]
            else:
                edges = np.linspace(0, config.trials, 4 * jobs + 1).astype(int)
                futures = [pool.submit(_run_block, config, si, a, b)
                           for a, b in zip(edges[:-1], edges[1:]) if b > a]
                parts = [f.result() for f in futures]
            stats = DecodeStats()
            for part in parts:
                stats = stats + part[2]
            points.append(SnrPoint(
                snr_db=snr,
                trials=config.trials,
                coords_per_user=2 * design.k,
                errors_user1=sum(p[0] for p in parts),
                errors_user2=sum(p[1] for p in parts),
                stats_sum=stats,
                max_nodes=max(p[3] for p in parts),
                wall_time=time.perf_counter() - t0,
            ))
    finally:
        if pool is not None:
            pool.shutdown()
    return SweepResult(config, points)


def measure_receive_snr(config: SimConfig, trials: int, snr_index: int = 0) -> float:
    """Empirical signal-to-noise power ratio at the destination (linear)."""
    design, Nr, c = _prepared(config)
    rho = 10.0 ** (config.snr_db[snr_index] / 10.0)
    sig = noise = 0.0
    for t in range(trials):
        rng = trial_rng(int(config.master_seed), snr_index, t)
        ch = sample_channel(design.Nt, Nr, rng)
        z = sample_symbols(4 * design.k, c, rng)
        M = build_lattice_generator(design, ch).M
        n = math.sqrt(0.5) * rng.standard_normal(M.shape[0])
        s = snr_scale(rho, design.Nt) * (M @ z)
        sig += float(s @ s)
        noise += float(n @ n)
    return sig / noise
