"""Voiced-speech extraction, fixed-length segmentation, and the two audio
augmentation transforms (additive uniform noise, pitch lowering)."""

import warnings
from dataclasses import dataclass

import numpy as np

from .dsp import Signal

SEGMENT_SECONDS = 7.6
NOISE_ALPHAS = (0.01, 0.02, 0.03)
PITCH_SEMITONES = (0.5, 2.0, 2.5)
STRIP_THRESHOLD = 0.1  # fraction of the global RMS a window must reach
STRIP_WINDOW_MS = 25.0


@dataclass
class Segment:
    """A fixed-length speech segment tagged with how it was produced."""

    signal: Signal
    provenance: str = "original"


def strip_unvoiced(
    signal: Signal,
    energy_threshold: float = STRIP_THRESHOLD,
    window_ms: float = STRIP_WINDOW_MS,
) -> Signal:
    """Keep only short-time windows whose RMS reaches energy_threshold times
    the global RMS, preserving order.

    An entirely silent input yields an empty signal (with a warning) rather
    than an error.
    """
    if not 0.0 <= energy_threshold <= 1.0:
        raise ValueError("energy_threshold must be in [0, 1]")
    x = signal.samples
    window = max(1, int(round(window_ms * signal.sample_rate / 1000.0)))
    global_rms = np.sqrt(np.mean(x**2)) if x.size else 0.0
    if global_rms == 0.0:
        warnings.warn("strip_unvoiced: input is silent, returning empty signal")
        return Signal(np.empty(0), signal.sample_rate)

    kept = []
    for start in range(0, x.size, window):
        chunk = x[start : start + window]
        if np.sqrt(np.mean(chunk**2)) >= energy_threshold * global_rms:
            kept.append(chunk)
    if not kept:
        warnings.warn("strip_unvoiced: no window passed the energy gate")
        return Signal(np.empty(0), signal.sample_rate)
    return Signal(np.concatenate(kept), signal.sample_rate)


def segment_length(sample_rate: int, duration: float = SEGMENT_SECONDS) -> int:
    return int(round(duration * sample_rate))


def segment(signal: Signal, duration: float = SEGMENT_SECONDS) -> list[Segment]:
    """Split into consecutive non-overlapping segments of `duration` seconds.

    The trailing remainder shorter than one segment is dropped; an input
    shorter than one segment yields an empty list with a warning.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    seg_len = segment_length(signal.sample_rate, duration)
    count = len(signal) // seg_len
    if count == 0:
        warnings.warn(f"signal of {signal.duration:.2f}s is shorter than one {duration}s segment")
        return []
    return [
        Segment(Signal(signal.samples[i * seg_len : (i + 1) * seg_len], signal.sample_rate))
        for i in range(count)
    ]


def inject_noise(signal: Signal, alpha: float, rng) -> Signal:
    """Perturb each sample by -alpha times a Uniform[0,1) draw from rng."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    noise = rng.random(len(signal))
    return Signal(signal.samples - alpha * noise, signal.sample_rate)


def pitch_shift(signal: Signal, semitones: float) -> Signal:
    """Lower (positive semitones) or raise the pitch by resampling, keeping length.

    Every output sample is read from position i * 2^(-semitones/12) of the
    input (linear interpolation, wrapped periodically), so a pure tone at f
    moves to f * 2^(-semitones/12) and the output length equals the input
    length.
    """
    if abs(semitones) > 12:
        raise ValueError("semitone shift must be within +/-12")
    n = len(signal)
    if n == 0 or semitones == 0:
        return Signal(signal.samples.copy(), signal.sample_rate)
    ratio = 2.0 ** (-semitones / 12.0)
    positions = np.mod(np.arange(n, dtype=np.float64) * ratio, n)
    base = np.arange(n, dtype=np.float64)
    shifted = np.interp(positions, base, signal.samples)
    return Signal(shifted, signal.sample_rate)


def augment_corpus(
    segments: list[Segment],
    seed,
    noise_alphas=NOISE_ALPHAS,
    pitch_semitones=PITCH_SEMITONES,
) -> list[Segment]:
    """Expand each segment into original + noise and pitch variants.

    With the default factor lists each segment yields 7 variants. Noise draws
    come from a per-segment child stream of `seed` (an int or SeedSequence),
    so results do not depend on processing order.
    """
    if not segments:
        raise ValueError("augment_corpus requires at least one segment")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(len(segments))
    out = []
    for seg, child in zip(segments, children):
        rng = np.random.default_rng(child)
        out.append(seg)
        for alpha in noise_alphas:
            out.append(Segment(inject_noise(seg.signal, alpha, rng), f"noise-{alpha:g}"))
        for semis in pitch_semitones:
            out.append(Segment(pitch_shift(seg.signal, semis), f"pitch-{semis:g}"))
    return out
