"""
One-bit adaptive tracking of precoder parameters over the feedback link.

Every real part of every tracked entry costs one sign bit per frame. The
receiver (encoder) and the transmitter (decoder) run the same recursion on the
same bits, so their estimates never drift apart:

    bit       = sign(truth - estimate)          sign(0) = +1
    estimate += bit * step
    step     *= sigma   if bit == last bit
    step     /= sigma   otherwise

Usage:
    tracker = LatticeTracker.start(params_at_frame_0)
    bits, tracker = tracker.encode(params_at_frame_t)    # receiver side
    tx_tracker = tx_tracker.decode(bits)                  # transmitter side
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.typing as npt

from allpass import dumps_params, loads_params
from config import CLIP_MARGIN, INITIAL_STEP, SIGMA
from errors import InvalidInput, ReplayMismatch
from lattice import LatticeParams, clip_contractive
from matcore import unitary_project

logger = logging.getLogger(__name__)

TRACKER_KINDS = ("free", "kappa", "unitary", "real")
TRANSCRIPT_HEADER = "transcript v1"
# Step sizes are held inside these bounds, like an ADPCM step table.
STEP_FLOOR = 1e-12
STEP_CEIL = 10.0

Bits = npt.NDArray[np.int8]


@dataclass(frozen=True)
class AdaptiveTrackerState:
    estimate: np.ndarray
    step: npt.NDArray[np.float64]
    last_sign: npt.NDArray[np.float64]
    sigma: float
    clip_margin: float = CLIP_MARGIN
    kind: str = "free"

    @property
    def n_bits(self) -> int:
        return int(self.step.size)


@dataclass(frozen=True)
class FeedbackFrame:
    bits: Bits
    scheme: str
    t: int

    @property
    def n_bits(self) -> int:
        return int(self.bits.size)


def _parts(x, kind: str) -> npt.NDArray[np.float64]:
    if kind == "real":
        return np.asarray(x, dtype=float)
    x = np.asarray(x, dtype=np.complex128)
    return np.stack([x.real, x.imag])


def _from_parts(parts, kind: str):
    if kind == "real":
        return parts
    return parts[0] + 1j * parts[1]


def _finish(estimate, kind: str, clip_margin: float):
    if kind == "kappa":
        return clip_contractive(estimate, clip_margin)
    if kind == "unitary":
        return unitary_project(estimate)
    return estimate


def new_tracker(
    initial,
    kind: str = "free",
    sigma: float = SIGMA,
    initial_step: float = INITIAL_STEP,
    clip_margin: float = CLIP_MARGIN,
) -> AdaptiveTrackerState:
    """Tracker starting at `initial` with every step at `initial_step` and last bit +1."""
    if kind not in TRACKER_KINDS:
        raise InvalidInput(f"Unknown tracker kind '{kind}'; use one of {TRACKER_KINDS}.")
    if not sigma > 1:
        raise InvalidInput(f"Step multiplier sigma must exceed 1, got {sigma}.")
    if not initial_step > 0:
        raise InvalidInput(f"Initial step must be positive, got {initial_step}.")
    if not 0 < clip_margin < 1:
        raise InvalidInput(f"Clip margin must lie in (0, 1), got {clip_margin}.")
    estimate = np.asarray(initial, dtype=float if kind == "real" else np.complex128)
    if not np.all(np.isfinite(estimate)):
        raise InvalidInput("Initial estimate contains NaN or Inf.")
    if kind in ("kappa", "unitary") and (estimate.ndim != 2 or estimate.shape[0] != estimate.shape[1]):
        raise InvalidInput(f"A '{kind}' tracker needs a square matrix, got shape {estimate.shape}.")
    estimate = _finish(estimate.copy(), kind, clip_margin)
    shape = _parts(estimate, kind).shape
    return AdaptiveTrackerState(
        estimate=estimate,
        step=np.full(shape, float(initial_step)),
        last_sign=np.ones(shape),
        sigma=float(sigma),
        clip_margin=float(clip_margin),
        kind=kind,
    )


def _advance(state: AdaptiveTrackerState, bits) -> AdaptiveTrackerState:
    """
    Move every part by its sign bit times the current step, then adapt the step:
    x sigma when the bit repeats the last one, / sigma otherwise.

    The adapted step is clamped to [STEP_FLOOR, STEP_CEIL], so at either bound
    the step no longer changes by exactly sigma and a shrink followed by a
    grow need not return to the step it started from.
    """
    b = np.asarray(bits, dtype=float).reshape(state.step.shape)
    parts = _parts(state.estimate, state.kind) + b * state.step
    step = np.where(b == state.last_sign, state.step * state.sigma, state.step / state.sigma)
    step = np.clip(step, STEP_FLOOR, STEP_CEIL)
    estimate = _finish(_from_parts(parts, state.kind), state.kind, state.clip_margin)
    return replace(state, estimate=estimate, step=step, last_sign=b)


def _target(truth, state: AdaptiveTrackerState):
    truth = np.asarray(truth, dtype=float if state.kind == "real" else np.complex128)
    if truth.shape != np.shape(state.estimate):
        raise InvalidInput(
            f"Tracked value has shape {truth.shape} but the tracker holds {np.shape(state.estimate)}."
        )
    if not np.all(np.isfinite(truth)):
        raise InvalidInput("Tracked value contains NaN or Inf.")
    if state.kind == "kappa":
        return clip_contractive(truth, state.clip_margin)
    return truth


def encode_update(truth, state: AdaptiveTrackerState) -> tuple[Bits, AdaptiveTrackerState]:
    """One sign bit per real part, then the same state update the decoder applies."""
    diff = _parts(_target(truth, state), state.kind) - _parts(state.estimate, state.kind)
    bits = np.where(diff >= 0, 1, -1).astype(np.int8).ravel()
    return bits, _advance(state, bits)


def decode_update(bits, state: AdaptiveTrackerState) -> AdaptiveTrackerState:
    bits = np.asarray(bits).ravel()
    if bits.size != state.n_bits:
        raise InvalidInput(f"Expected {state.n_bits} feedback bits, got {bits.size}.")
    if not np.all(np.abs(bits) == 1):
        raise InvalidInput("Feedback bits must be +1 or -1.")
    return _advance(state, bits)


def bit_budget(scheme: str, m: int, pilots_or_order: int) -> int:
    """
    Sign bits per frame.

    geodesic and angle_delay send 2 bits per complex entry per pilot (or tap),
    givens one bit per real angle per pilot, lattice 2 bits per complex entry of
    each of its M matrices (reflections plus residue). perfect sends nothing.
    """
    if m < 1 or pilots_or_order < 1:
        raise InvalidInput(f"MIMO size and pilot/order count must be positive, got {m}, {pilots_or_order}.")
    per_matrix = {
        "geodesic": 2 * m * m,
        "givens": m * m,
        "lattice": 2 * m * m,
        "angle_delay": 2 * m * m,
        "perfect": 0,
    }
    if scheme not in per_matrix:
        raise InvalidInput(f"Unknown feedback scheme '{scheme}'.")
    return per_matrix[scheme] * pilots_or_order


# --- Lattice bundle -------------------------------------------------------------


def cold_params(m: int, order: int) -> LatticeParams:
    """K = 0 at every stage and R = I."""
    zeros = np.zeros((order - 1, m, m), dtype=np.complex128)
    return LatticeParams(kappas=zeros, residue=np.eye(m, dtype=np.complex128))


@dataclass(frozen=True)
class LatticeTracker:
    """Per-matrix trackers for K_0..K_{M-2} (clipped) and the residue (polar-projected)."""

    kappas: tuple[AdaptiveTrackerState, ...]
    residue: AdaptiveTrackerState

    @classmethod
    def start(
        cls,
        initial: LatticeParams,
        sigma: float = SIGMA,
        initial_step: float = INITIAL_STEP,
        clip_margin: float = CLIP_MARGIN,
    ) -> "LatticeTracker":
        kw = dict(sigma=sigma, initial_step=initial_step, clip_margin=clip_margin)
        return cls(
            kappas=tuple(new_tracker(K, "kappa", **kw) for K in initial.kappas),
            residue=new_tracker(initial.residue, "unitary", **kw),
        )

    @classmethod
    def cold(cls, m: int, order: int, **kwargs) -> "LatticeTracker":
        return cls.start(cold_params(m, order), **kwargs)

    @property
    def states(self) -> tuple[AdaptiveTrackerState, ...]:
        return (*self.kappas, self.residue)

    @property
    def n_bits(self) -> int:
        return sum(s.n_bits for s in self.states)

    def params(self) -> LatticeParams:
        m = self.residue.estimate.shape[0]
        kappas = np.array([s.estimate for s in self.kappas], dtype=np.complex128).reshape(-1, m, m)
        return LatticeParams(kappas=kappas, residue=self.residue.estimate)

    def encode(self, truth: LatticeParams) -> tuple[Bits, "LatticeTracker"]:
        if truth.order != len(self.kappas) + 1 or truth.m != self.residue.estimate.shape[0]:
            raise InvalidInput(
                f"Lattice of order {truth.order}, size {truth.m} does not match the tracker."
            )
        chunks, states = [], []
        for target, state in zip(truth.matrices(), self.states):
            bits, state = encode_update(target, state)
            chunks.append(bits)
            states.append(state)
        return np.concatenate(chunks), LatticeTracker(kappas=tuple(states[:-1]), residue=states[-1])

    def decode(self, bits) -> "LatticeTracker":
        bits = np.asarray(bits).ravel()
        if bits.size != self.n_bits:
            raise InvalidInput(f"Expected {self.n_bits} lattice feedback bits, got {bits.size}.")
        states, pos = [], 0
        for state in self.states:
            states.append(decode_update(bits[pos:pos + state.n_bits], state))
            pos += state.n_bits
        return LatticeTracker(kappas=tuple(states[:-1]), residue=states[-1])

    def digest(self) -> str:
        return state_digest(*(s.estimate for s in self.states))


# --- Bits on the wire -----------------------------------------------------------


def pack_bits(bits) -> str:
    """Hex string, most significant bit first, +1 -> 1 and -1 -> 0."""
    raw = (np.asarray(bits).ravel() > 0).astype(np.uint8)
    return np.packbits(raw).tobytes().hex()


def unpack_bits(hex_str: str, n_bits: int) -> Bits:
    try:
        raw = np.frombuffer(bytes.fromhex(hex_str), dtype=np.uint8)
    except ValueError as exc:
        raise InvalidInput(f"Feedback payload is not valid hex: {exc}") from exc
    if raw.size != (n_bits + 7) // 8:
        raise InvalidInput(f"Payload of {raw.size} bytes cannot hold exactly {n_bits} bits.")
    unpacked = np.unpackbits(raw)[:n_bits].astype(np.int8)
    return 2 * unpacked - 1


def state_digest(*arrays) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


# --- Transcripts ----------------------------------------------------------------


@dataclass(frozen=True)
class Transcript:
    scheme: str
    sigma: float
    initial_step: float
    clip_margin: float
    initial: LatticeParams
    frames: list[FeedbackFrame] = field(default_factory=list)
    digests: list[str] = field(default_factory=list)

    def start(self) -> LatticeTracker:
        if self.scheme != "lattice":
            raise InvalidInput(f"Only lattice transcripts can be replayed, got scheme '{self.scheme}'.")
        return LatticeTracker.start(
            self.initial, sigma=self.sigma, initial_step=self.initial_step, clip_margin=self.clip_margin
        )


def record_session(
    truths,
    initial: LatticeParams,
    sigma: float = SIGMA,
    initial_step: float = INITIAL_STEP,
    clip_margin: float = CLIP_MARGIN,
) -> tuple[Transcript, LatticeTracker]:
    """Encode a sequence of lattice targets from frame 1 on, keeping bits and decoder digests."""
    transcript = Transcript("lattice", sigma, initial_step, clip_margin, initial)
    tracker = transcript.start()
    for t, truth in enumerate(truths, start=1):
        bits, tracker = tracker.encode(truth)
        transcript.frames.append(FeedbackFrame(bits=bits, scheme="lattice", t=t))
        transcript.digests.append(tracker.digest())
    return transcript, tracker


def dumps_transcript(transcript: Transcript) -> str:
    lines = [
        TRANSCRIPT_HEADER,
        f"scheme {transcript.scheme}",
        f"sigma {format(transcript.sigma, '.17g')}",
        f"initial_step {format(transcript.initial_step, '.17g')}",
        f"clip_margin {format(transcript.clip_margin, '.17g')}",
        dumps_params(transcript.initial).rstrip("\n"),
    ]
    for frame, digest in zip(transcript.frames, transcript.digests):
        lines.append(f"frame {frame.t} {frame.n_bits} {pack_bits(frame.bits)} {digest}")
    return "\n".join(lines) + "\n"


def loads_transcript(text: str) -> Transcript:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    try:
        if lines[0] != TRANSCRIPT_HEADER:
            raise InvalidInput(f"Unsupported transcript header '{lines[0]}'.")
        scheme = lines[1].split()[1]
        sigma = float(lines[2].split()[1])
        initial_step = float(lines[3].split()[1])
        clip_margin = float(lines[4].split()[1])
        end = lines.index("end")
        initial = loads_params("\n".join(lines[5:end + 1]))
        transcript = Transcript(scheme, sigma, initial_step, clip_margin, initial)
        for ln in lines[end + 1:]:
            tag, t, n_bits, payload, digest = ln.split()
            if tag != "frame":
                raise InvalidInput(f"Expected a frame line, got '{ln}'.")
            bits = unpack_bits(payload, int(n_bits))
            transcript.frames.append(FeedbackFrame(bits=bits, scheme=scheme, t=int(t)))
            transcript.digests.append(digest)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"Malformed transcript: {exc}") from exc
    return transcript


def write_transcript(transcript: Transcript, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_transcript(transcript))


def read_transcript(path: str) -> Transcript:
    with open(path, "r", encoding="utf-8") as f:
        return loads_transcript(f.read())


def replay_transcript(transcript: Transcript) -> LatticeTracker:
    """Run the decoder over every frame and check each digest; returns the final decoder state."""
    tracker = transcript.start()
    for frame, expected in zip(transcript.frames, transcript.digests):
        tracker = tracker.decode(frame.bits)
        got = tracker.digest()
        if got != expected:
            raise ReplayMismatch(
                f"Decoder state after frame {frame.t} has digest {got[:16]}..., "
                f"transcript recorded {expected[:16]}...."
            )
    logger.info("Replayed %d frames; decoder matches every recorded digest.", len(transcript.frames))
    return tracker
