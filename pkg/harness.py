"""
End-to-end feedback experiments.

For every (scheme, speed, seed) cell a channel trajectory is drawn, the
receiver computes the true precoders each frame and feeds back sign bits, the
transmitter rebuilds the full precoder grid from the decoded state alone, and
the grid is scored by zero-forcing rate and error metrics over the SNR grid.

Usage:
    cfg = load_config("configs/desk.toml")
    result = run_experiment(cfg, base_seed=1)
    write_results(result, "results/")
"""

import csv
import json
import logging
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy import stats

from allpass import snip_design_report
from baselines import (
    AngleDelayPrecoder,
    angle_delay_reconstruct,
    angle_delay_truncate,
    geodesic_interpolate_grid,
    givens_decompose,
    givens_interpolate_grid,
    givens_to_vector,
    givens_track_target,
    normalize_power,
    vector_to_givens,
)
from channel import (
    DopplerParams,
    PowerDelayProfile,
    doppler_alpha,
    evolve_ar1,
    pdp_to_taps,
    subcarrier_omegas,
)
from config import (
    BANDWIDTH_HZ,
    CLIP_MARGIN,
    DEFAULT_CARRIER_HZ,
    DEFAULT_SYMBOL_S,
    DESIGN_KAPPA_PENALTY,
    DESIGN_RESTARTS,
    DESIGN_TOL,
    DESK_N_FFT,
    FAILURES_HEADER,
    FLAG_PROFILE_HEADER,
    FULL_SCALE_N_FFT,
    INITIAL_STEP,
    KAPPA_HEADER,
    RATES_HEADER,
    SCHEMES,
    SIGMA,
    SUMMARY_HEADER,
    PROFILE_DELAYS_NS,
    PROFILE_POWERS_DB,
    BUDGET_TABLE,
    WORKERS,
)
from errors import ConfigError, DesignNotConverged, InvalidInput, PrecoderError
from feedback import (
    FeedbackFrame,
    Transcript,
    bit_budget,
    cold_params,
    decode_update,
    encode_update,
    new_tracker,
    write_transcript,
)
from lattice import LatticeParams, frequency_response_grid
from matcore import aligned_frobenius, flag_distance, phase_align
from precoder import RateConfig, grid_rate, optimal_precoders_from_channel

logger = logging.getLogger(__name__)

RATES_FILE = "rates.csv"
KAPPA_FILE = "kappa_errors.csv"
FLAG_PROFILE_FILE = "flag_profile.csv"
FAILURES_FILE = "failures.csv"
SUMMARY_FILE = "summary.csv"
TRANSCRIPT_DIR = "transcripts"


# --- Configuration --------------------------------------------------------------


class PDPModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    powers_db: list[float] = Field(default_factory=lambda: list(PROFILE_POWERS_DB))
    delays_ns: list[float] = Field(default_factory=lambda: list(PROFILE_DELAYS_NS))

    def profile(self) -> PowerDelayProfile:
        return PowerDelayProfile(powers_db=list(self.powers_db), delays_ns=list(self.delays_ns))


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    m: int = Field(4, ge=1)
    n_fft: int = Field(DESK_N_FFT, ge=2)
    n_pilots: int = Field(4, ge=2)
    lattice_order: int = Field(3, ge=1)
    pdp: PDPModel = Field(default_factory=PDPModel)
    bandwidth_hz: float = Field(BANDWIDTH_HZ, gt=0)
    speed_kmh: list[float] = Field(default_factory=lambda: [10.0, 50.0])
    carrier_hz: float = Field(DEFAULT_CARRIER_HZ, gt=0)
    symbol_s: float = Field(DEFAULT_SYMBOL_S, gt=0)
    snr_db: list[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    n_frames: int = Field(30, ge=1)
    n_seeds: int = Field(20, ge=1)
    schemes: list[str] = Field(default_factory=lambda: list(SCHEMES))
    # One multiplier for every speed, or one per speed (keys must cover speed_kmh).
    sigma: float | dict[float, float] = SIGMA
    initial_step: float = Field(INITIAL_STEP, gt=0)
    clip_margin: float = Field(CLIP_MARGIN, gt=0, lt=1)
    lattice_nodes: int | None = Field(None, ge=1)
    lattice_match: Literal["exact", "subspace"] = "subspace"
    design_tol: float = Field(DESIGN_TOL, gt=0)
    design_max_iter: int = Field(200, ge=1)
    design_kappa_penalty: float = Field(DESIGN_KAPPA_PENALTY, ge=0)
    angle_delay_taps: int | None = Field(None, ge=1)
    bootstrap: bool = True
    # Replaces the Doppler-derived AR(1) coefficient: a scalar or an m x m matrix of entries.
    alpha_override: float | list[list[float]] | None = None
    workers: int = Field(WORKERS, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "SimConfig":
        if self.n_pilots > self.n_fft:
            raise ValueError(f"n_pilots={self.n_pilots} exceeds n_fft={self.n_fft}.")
        if self.n_design_nodes > self.n_fft:
            raise ValueError(f"lattice_nodes={self.n_design_nodes} exceeds n_fft={self.n_fft}.")
        if self.n_design_nodes > self.lattice_order + 1:
            raise ValueError(
                f"Order {self.lattice_order} cannot interpolate {self.n_design_nodes} nodes; "
                f"use at most {self.lattice_order + 1}."
            )
        if self.n_taps > self.n_fft:
            raise ValueError(f"angle_delay_taps={self.n_taps} exceeds n_fft={self.n_fft}.")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes or len(set(self.schemes)) != len(self.schemes):
            raise ValueError(f"schemes must be distinct names from {SCHEMES}, got {self.schemes}.")
        if not self.speed_kmh or not self.snr_db:
            raise ValueError("speed_kmh and snr_db need at least one value each.")
        for speed in self.speed_kmh:
            try:
                doppler_alpha(DopplerParams(speed, self.carrier_hz, self.symbol_s))
            except PrecoderError as exc:
                raise ValueError(str(exc)) from exc
        sigmas = self.sigma.values() if isinstance(self.sigma, dict) else [self.sigma]
        if any(not s > 1 for s in sigmas):
            raise ValueError(f"sigma values must exceed 1, got {self.sigma}.")
        if isinstance(self.sigma, dict):
            missing = [s for s in self.speed_kmh if s not in self.sigma]
            if missing:
                raise ValueError(f"sigma has no entry for speed(s) {missing}.")
        if self.alpha_override is not None:
            alpha = np.asarray(self.alpha_override, dtype=float)
            if alpha.ndim not in (0, 2) or (alpha.ndim == 2 and alpha.shape != (self.m, self.m)):
                raise ValueError(f"alpha_override must be a scalar or {self.m}x{self.m}, got shape {alpha.shape}.")
            if np.any(alpha < 0) or np.any(alpha > 1):
                raise ValueError("alpha_override entries must lie in [0, 1].")
        try:
            self.pdp.profile()
        except InvalidInput as exc:
            raise ValueError(str(exc)) from exc
        return self

    @property
    def n_design_nodes(self) -> int:
        return self.lattice_nodes or self.lattice_order + 1

    @property
    def n_taps(self) -> int:
        return self.angle_delay_taps or self.n_pilots

    def sigma_for(self, speed_kmh: float) -> float:
        if not isinstance(self.sigma, dict):
            return float(self.sigma)
        if speed_kmh not in self.sigma:
            raise ConfigError(f"No sigma configured for {speed_kmh} km/h.")
        return float(self.sigma[speed_kmh])

    def alpha_for(self, speed_kmh: float):
        """AR(1) coefficient used at this speed: the override if set, else the Doppler model."""
        if self.alpha_override is not None:
            return np.asarray(self.alpha_override, dtype=float)
        return doppler_alpha(DopplerParams(speed_kmh, self.carrier_hz, self.symbol_s))

    def full_scale(self, size: str | None = None) -> "SimConfig":
        """The 4096-subcarrier profile, optionally with one published MIMO size column."""
        update = {"n_fft": FULL_SCALE_N_FFT}
        if size is not None:
            if size not in BUDGET_TABLE:
                raise ConfigError(f"Unknown MIMO size '{size}'; use one of {sorted(BUDGET_TABLE)}.")
            row = BUDGET_TABLE[size]
            update.update(m=row["m"], n_pilots=row["n_pilots"], lattice_order=row["lattice_order"])
        return self.with_overrides(**update)

    def with_overrides(self, **update) -> "SimConfig":
        """Validated copy with some fields replaced; invalid values raise ConfigError."""
        try:
            return SimConfig.model_validate({**self.model_dump(), **update})
        except ValidationError as exc:
            raise ConfigError(f"Invalid config override {sorted(update)}:\n{exc}") from exc


def load_config(path: str) -> SimConfig:
    """Read a SimConfig from a .toml or .json file. Every failure surfaces as ConfigError."""
    ext = os.path.splitext(path)[1].lower()
    try:
        if ext == ".toml":
            with open(path, "rb") as f:
                data = tomllib.load(f)
        elif ext == ".json":
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        else:
            raise ConfigError(f"Config file must be .toml or .json, got '{path}'.")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file '{path}': {exc}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Config file '{path}' is not valid {ext[1:].upper()}: {exc}") from exc
    try:
        return SimConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid config '{path}':\n{exc}") from exc


# --- Grids and channel ----------------------------------------------------------


def pilot_indices(n_fft: int, n_pilots: int) -> np.ndarray:
    """Equi-spaced over [0, n_fft - 1], both ends included."""
    if not 1 <= n_pilots <= n_fft:
        raise InvalidInput(f"Need 1 <= n_pilots <= n_fft, got {n_pilots} and {n_fft}.")
    return np.round(np.linspace(0, n_fft - 1, n_pilots)).astype(int)


def design_indices(n_fft: int, n_nodes: int) -> np.ndarray:
    """Equi-spaced around the unit circle: k_i = round(i * n_fft / n_nodes)."""
    if not 1 <= n_nodes <= n_fft:
        raise InvalidInput(f"Need 1 <= n_nodes <= n_fft, got {n_nodes} and {n_fft}.")
    return np.round(np.arange(n_nodes) * n_fft / n_nodes).astype(int)


def _speed_key(speed_kmh: float) -> int:
    return int(round(speed_kmh * 1000))


def channel_trajectory(cfg: SimConfig, speed_kmh: float, seed: int):
    """Frames 0..n_frames of one channel realisation; identical for every scheme."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _speed_key(speed_kmh)]))
    alpha = cfg.alpha_for(speed_kmh)
    ch = pdp_to_taps(cfg.pdp.profile(), cfg.m, cfg.bandwidth_hz, rng)
    yield ch
    for _ in range(cfg.n_frames):
        ch = evolve_ar1(ch, alpha, rng)
        yield ch


# --- Schemes --------------------------------------------------------------------
# Each scheme keeps a receiver-side and a transmitter-side copy of its trackers.
# reconstruct() reads only the transmitter side.


def _relay(truths, rx, tx):
    bits_total, new_rx, new_tx = 0, [], []
    for truth, r, t in zip(truths, rx, tx):
        bits, r = encode_update(truth, r)
        new_rx.append(r)
        new_tx.append(decode_update(bits, t))
        bits_total += bits.size
    return bits_total, new_rx, new_tx


class _Scheme:
    name = ""

    def __init__(self, cfg: SimConfig, speed_kmh: float | None = None):
        self.cfg = cfg
        self.speed_kmh = cfg.speed_kmh[0] if speed_kmh is None else speed_kmh

    def tracker_kwargs(self) -> dict:
        return dict(
            sigma=self.cfg.sigma_for(self.speed_kmh),
            initial_step=self.cfg.initial_step,
            clip_margin=self.cfg.clip_margin,
        )


class _Perfect(_Scheme):
    name = "perfect"

    def budget(self) -> int:
        return 0

    def start(self, V):
        pass

    def frame(self, V) -> int:
        self.P = V
        return 0

    def reconstruct(self):
        return self.P


class _Lattice(_Scheme):
    name = "lattice"

    def __init__(self, cfg: SimConfig, speed_kmh: float | None = None):
        super().__init__(cfg, speed_kmh)
        self.nodes_idx = design_indices(cfg.n_fft, cfg.n_design_nodes)
        self.node_omegas = subcarrier_omegas(cfg.n_fft, self.nodes_idx)
        self.median_idx = self.nodes_idx[np.argsort(self.node_omegas)[len(self.nodes_idx) // 2]]
        self.omegas = subcarrier_omegas(cfg.n_fft)
        self.truth: LatticeParams | None = None
        self.kappa_err = 0.0
        self.residue_err = 0.0

    def budget(self) -> int:
        return bit_budget("lattice", self.cfg.m, self.cfg.lattice_order)

    def _fit(self, nodes, initial, restarts: int) -> LatticeParams:
        return snip_design_report(
            nodes,
            self.cfg.lattice_order,
            tol=self.cfg.design_tol,
            match=self.cfg.lattice_match,
            initial=initial,
            max_iter=self.cfg.design_max_iter,
            restarts=restarts,
            kappa_penalty=self.cfg.design_kappa_penalty,
        ).params

    def _design(self, V, initial, restarts: int) -> LatticeParams:
        """Warm-started redesign; falls back to a flat start at the median node, keeping the better fit."""
        nodes = list(zip(self.node_omegas, V[self.nodes_idx]))
        try:
            return self._fit(nodes, initial, restarts)
        except DesignNotConverged as exc:
            best = exc
        if initial is not None:
            Vm = V[self.median_idx]
            residue = phase_align(initial.residue, Vm) if self.cfg.lattice_match == "subspace" else Vm
            reset = LatticeParams(kappas=np.zeros_like(initial.kappas), residue=residue)
            try:
                return self._fit(nodes, reset, 0)
            except DesignNotConverged as exc:
                if exc.residual < best.residual:
                    best = exc
        logger.warning("Lattice design kept best fit: %s", best)
        return best.params

    def start(self, V):
        self.truth = self._design(V, None, DESIGN_RESTARTS)
        initial = self.truth if self.cfg.bootstrap else cold_params(self.cfg.m, self.cfg.lattice_order)
        kw = self.tracker_kwargs()
        self.transcript = Transcript("lattice", kw["sigma"], kw["initial_step"], kw["clip_margin"], initial)
        self.rx = self.transcript.start()
        self.tx = self.rx

    def frame(self, V) -> int:
        self.truth = self._design(V, self.truth, 0)
        bits, self.rx = self.rx.encode(self.truth)
        self.tx = self.tx.decode(bits)
        self.transcript.frames.append(FeedbackFrame(bits=bits, scheme="lattice", t=len(self.transcript.frames) + 1))
        self.transcript.digests.append(self.tx.digest())
        est = self.tx.params()
        self.kappa_err = float(np.linalg.norm(est.kappas - self.truth.kappas))
        self.residue_err = float(np.linalg.norm(est.residue - self.truth.residue))
        return bits.size

    def reconstruct(self):
        return frequency_response_grid(self.tx.params(), self.omegas)


class _Geodesic(_Scheme):
    name = "geodesic"

    def __init__(self, cfg: SimConfig, speed_kmh: float | None = None):
        super().__init__(cfg, speed_kmh)
        self.pilots = pilot_indices(cfg.n_fft, cfg.n_pilots)

    def budget(self) -> int:
        return bit_budget("geodesic", self.cfg.m, self.cfg.n_pilots)

    def start(self, V):
        init = V[self.pilots] if self.cfg.bootstrap else [np.eye(self.cfg.m)] * len(self.pilots)
        self.rx = [new_tracker(W, "unitary", **self.tracker_kwargs()) for W in init]
        self.tx = list(self.rx)

    def frame(self, V) -> int:
        bits, self.rx, self.tx = _relay(V[self.pilots], self.rx, self.tx)
        return bits

    def reconstruct(self):
        return geodesic_interpolate_grid(self.pilots, [s.estimate for s in self.tx], self.cfg.n_fft)


class _Givens(_Scheme):
    name = "givens"

    def __init__(self, cfg: SimConfig, speed_kmh: float | None = None):
        super().__init__(cfg, speed_kmh)
        self.pilots = pilot_indices(cfg.n_fft, cfg.n_pilots)

    def budget(self) -> int:
        return bit_budget("givens", self.cfg.m, self.cfg.n_pilots)

    def _vectors(self, V):
        return [givens_to_vector(givens_decompose(V[p])) for p in self.pilots]

    def start(self, V):
        m = self.cfg.m
        init = self._vectors(V) if self.cfg.bootstrap else [np.zeros(m * m)] * len(self.pilots)
        self.rx = [new_tracker(x, "real", **self.tracker_kwargs()) for x in init]
        self.tx = list(self.rx)

    def frame(self, V) -> int:
        m = self.cfg.m
        targets = [givens_track_target(x, r.estimate, m) for x, r in zip(self._vectors(V), self.rx)]
        bits, self.rx, self.tx = _relay(targets, self.rx, self.tx)
        return bits

    def reconstruct(self):
        params = [vector_to_givens(s.estimate, self.cfg.m) for s in self.tx]
        return givens_interpolate_grid(self.pilots, params, self.cfg.n_fft)


class _AngleDelay(_Scheme):
    name = "angle_delay"

    def budget(self) -> int:
        return bit_budget("angle_delay", self.cfg.m, self.cfg.n_taps)

    def _taps(self, V):
        return angle_delay_truncate(V, self.cfg.n_taps).taps

    def start(self, V):
        if not self.cfg.bootstrap:
            V = np.broadcast_to(np.eye(self.cfg.m, dtype=np.complex128), V.shape)
        self.rx = [new_tracker(self._taps(V), "free", **self.tracker_kwargs())]
        self.tx = list(self.rx)

    def frame(self, V) -> int:
        bits, self.rx, self.tx = _relay([self._taps(V)], self.rx, self.tx)
        return bits

    def reconstruct(self):
        ad = AngleDelayPrecoder(taps=self.tx[0].estimate, n_fft=self.cfg.n_fft)
        return normalize_power(angle_delay_reconstruct(ad))


SCHEME_RUNNERS = {
    "perfect": _Perfect,
    "lattice": _Lattice,
    "geodesic": _Geodesic,
    "givens": _Givens,
    "angle_delay": _AngleDelay,
}


# --- Running --------------------------------------------------------------------


@dataclass
class RunResult:
    rates: list[tuple] = field(default_factory=list)
    kappa: list[tuple] = field(default_factory=list)
    flag_profile: list[tuple] = field(default_factory=list)
    failures: list[tuple] = field(default_factory=list)
    transcripts: dict = field(default_factory=dict)

    def extend(self, other: "RunResult") -> None:
        self.rates.extend(other.rates)
        self.kappa.extend(other.kappa)
        self.flag_profile.extend(other.flag_profile)
        self.failures.extend(other.failures)
        self.transcripts.update(other.transcripts)


def check_seed(seed: int) -> None:
    if seed < 0:
        raise ConfigError(f"Seeds must be non-negative, got {seed}.")


def run_cell(cfg: SimConfig, scheme: str, speed_kmh: float, seed: int) -> RunResult:
    """One (scheme, speed, seed) cell. A PrecoderError drops the cell's rows and records a failure."""
    check_seed(seed)
    result = RunResult()
    runner = SCHEME_RUNNERS[scheme](cfg, speed_kmh)
    budget = runner.budget()
    unitary = scheme != "angle_delay"
    rate_cfgs = [(snr, RateConfig.from_db(snr)) for snr in cfg.snr_db]
    try:
        flags = None
        for t, ch in enumerate(channel_trajectory(cfg, speed_kmh, seed)):
            H, grid = optimal_precoders_from_channel(ch, cfg.n_fft)
            V = grid.mats
            if t == 0:
                runner.start(V)
                continue
            bits = runner.frame(V)
            if bits != budget:
                raise InvalidInput(f"{scheme} sent {bits} bits in frame {t}; its budget is {budget}.")
            P = runner.reconstruct()
            frob = float(np.mean(aligned_frobenius(V, P)))
            flags = np.atleast_1d(flag_distance(V, P, require_unitary=unitary))
            flag_mean = float(np.mean(flags))
            for snr, rc in rate_cfgs:
                rate = grid_rate(H, P, rc)
                result.rates.append((scheme, speed_kmh, snr, seed, t, rate, bits, frob, flag_mean))
            if scheme == "lattice":
                result.kappa.append((scheme, speed_kmh, seed, t, runner.kappa_err, runner.residue_err))
        result.flag_profile.extend(
            (scheme, speed_kmh, seed, k, float(d)) for k, d in enumerate(flags)
        )
        if scheme == "lattice":
            result.transcripts[(speed_kmh, seed)] = runner.transcript
    except PrecoderError as exc:
        logger.error("Cell %s @ %s km/h, seed %d failed: %s", scheme, speed_kmh, seed, exc)
        return RunResult(failures=[(scheme, speed_kmh, seed, f"{type(exc).__name__}: {exc}")])
    logger.info("Cell %s @ %s km/h, seed %d done (%d frames).", scheme, speed_kmh, seed, cfg.n_frames)
    return result


def _run_job(job) -> RunResult:
    return run_cell(*job)


def _jobs(cfg: SimConfig, seeds) -> list[tuple]:
    return [
        (cfg, scheme, speed, seed)
        for seed in seeds
        for speed in cfg.speed_kmh
        for scheme in cfg.schemes
    ]


def run_simulation(cfg: SimConfig, seed: int) -> RunResult:
    """Every scheme and speed for one seed, sequentially."""
    check_seed(seed)
    result = RunResult()
    for job in _jobs(cfg, [seed]):
        result.extend(_run_job(job))
    return result


def run_experiment(cfg: SimConfig, base_seed: int = 0) -> RunResult:
    """Seeds base_seed .. base_seed + n_seeds - 1 over a process pool; merged in job order."""
    check_seed(base_seed)
    seeds = range(base_seed, base_seed + cfg.n_seeds)
    jobs = _jobs(cfg, seeds)
    logger.info("Running %d cells on %d worker(s).", len(jobs), cfg.workers)
    result = RunResult()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_run_job, jobs):
                result.extend(part)
    else:
        for job in jobs:
            result.extend(_run_job(job))
    return result


# --- Reporting ------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def summarize(rates) -> list[tuple]:
    """Mean rate per (scheme, speed, snr) with a 95% t-interval over per-seed means."""
    per_seed: dict[tuple, dict[int, list[float]]] = {}
    for scheme, speed, snr, seed, _frame, rate, *_ in rates:
        per_seed.setdefault((scheme, speed, snr), {}).setdefault(seed, []).append(rate)
    order = {s: i for i, s in enumerate(SCHEMES)}
    rows = []
    for key in sorted(per_seed, key=lambda k: (order.get(k[0], len(order)), k[1], k[2])):
        seeds = per_seed[key]
        means = np.array([math.fsum(seeds[s]) / len(seeds[s]) for s in sorted(seeds)])
        mean = math.fsum(means) / len(means)
        if len(means) > 1 and np.std(means) > 0:
            low, high = stats.t.interval(0.95, len(means) - 1, loc=mean, scale=stats.sem(means))
        else:
            low = high = mean
        rows.append((*key, len(means), mean, float(low), float(high)))
    return rows


def write_results(result: RunResult, out_dir: str) -> list[tuple]:
    """Write every CSV (and lattice transcripts) into out_dir; returns the summary rows."""
    if not result.rates:
        raise InvalidInput("No rate rows to report; every cell failed or nothing ran.")
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, RATES_FILE), RATES_HEADER, result.rates)
    _write_csv(os.path.join(out_dir, KAPPA_FILE), KAPPA_HEADER, result.kappa)
    _write_csv(os.path.join(out_dir, FLAG_PROFILE_FILE), FLAG_PROFILE_HEADER, result.flag_profile)
    _write_csv(os.path.join(out_dir, FAILURES_FILE), FAILURES_HEADER, result.failures)
    summary = summarize(result.rates)
    _write_csv(os.path.join(out_dir, SUMMARY_FILE), SUMMARY_HEADER, summary)
    if result.transcripts:
        tdir = os.path.join(out_dir, TRANSCRIPT_DIR)
        os.makedirs(tdir, exist_ok=True)
        for (speed, seed), transcript in sorted(result.transcripts.items()):
            write_transcript(transcript, os.path.join(tdir, f"lattice_{_fmt(float(speed))}kmh_seed{seed}.txt"))
    logger.info("Wrote %d rate rows and %d summary rows to %s.", len(result.rates), len(summary), out_dir)
    return summary


report = write_results

# Column parsers for load_results, in header order.
_RATE_TYPES = (str, float, float, int, int, float, int, float, float)
_KAPPA_TYPES = (str, float, int, int, float, float)
_FLAG_TYPES = (str, float, int, int, float)
_FAILURE_TYPES = (str, float, int, str)


def _read_csv(path: str, header: list[str], types) -> list[tuple]:
    if not os.path.exists(path):
        return []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        got = next(reader, None)
        if got != header:
            raise InvalidInput(f"{path} has header {got}, expected {header}.")
        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(types):
                raise InvalidInput(f"{path} line {line}: expected {len(types)} fields, got {len(row)}.")
            try:
                rows.append(tuple(conv(v) for conv, v in zip(types, row)))
            except ValueError as exc:
                raise InvalidInput(f"{path} line {line}: {exc}") from exc
        return rows


def load_results(in_dir: str) -> RunResult:
    """Read back the CSVs written by write_results (transcripts are left on disk)."""
    rates_path = os.path.join(in_dir, RATES_FILE)
    if not os.path.exists(rates_path):
        raise InvalidInput(f"No {RATES_FILE} in '{in_dir}'.")
    return RunResult(
        rates=_read_csv(rates_path, RATES_HEADER, _RATE_TYPES),
        kappa=_read_csv(os.path.join(in_dir, KAPPA_FILE), KAPPA_HEADER, _KAPPA_TYPES),
        flag_profile=_read_csv(os.path.join(in_dir, FLAG_PROFILE_FILE), FLAG_PROFILE_HEADER, _FLAG_TYPES),
        failures=_read_csv(os.path.join(in_dir, FAILURES_FILE), FAILURES_HEADER, _FAILURE_TYPES),
    )
