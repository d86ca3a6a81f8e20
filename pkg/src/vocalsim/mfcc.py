"""Per-segment MFCC extraction: 60 ms Hamming frames at a 20 ms hop, 1024-point
magnitude spectra, 60 mel power bands, log10 + cosine transform, 60
coefficients. A 7.6 s segment at 16 kHz yields a 378x60 matrix."""

import numpy as np

from .dsp import (
    MelFilterBank,
    Signal,
    WindowSpec,
    apply_filterbank,
    dft_magnitude,
    frame_signal,
    hamming_window,
    log_dct,
    mel_filterbank,
)

SAMPLE_RATE = 16000
SEGMENT_SAMPLES = 121600  # 7.6 s
FRAME_LENGTH = 960  # 60 ms
HOP_LENGTH = 320  # 20 ms
N_FFT = 1024
NUM_FILTERS = 60
NUM_COEFFS = 60
NUM_FRAMES = 1 + (SEGMENT_SAMPLES - FRAME_LENGTH) // HOP_LENGTH  # 378

_window: np.ndarray | None = None
_bank: MelFilterBank | None = None


def _analysis_tables() -> tuple[np.ndarray, MelFilterBank]:
    global _window, _bank
    if _window is None:
        _window = hamming_window(WindowSpec(FRAME_LENGTH))
        _bank = mel_filterbank(NUM_FILTERS, N_FFT, SAMPLE_RATE)
    return _window, _bank


def extract_mfcc(segment: Signal) -> np.ndarray:
    """Return the (378, 60) coefficient matrix for one 7.6 s segment.

    Rows are frames in time order. Each row is the log10 mel power vector of
    a windowed frame projected onto the cosine basis; the mel energies use the
    squared magnitude spectrum.
    """
    if segment.sample_rate != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz audio, got {segment.sample_rate}")
    if len(segment) != SEGMENT_SAMPLES:
        raise ValueError(
            f"expected a segment of {SEGMENT_SAMPLES} samples, got {len(segment)}"
        )
    window, bank = _analysis_tables()
    frames = frame_signal(segment, FRAME_LENGTH, HOP_LENGTH)
    out = np.empty((frames.shape[0], NUM_COEFFS))
    for t in range(frames.shape[0]):
        spectrum = dft_magnitude(frames[t] * window, N_FFT)
        energies = apply_filterbank(spectrum**2, bank)
        out[t] = log_dct(energies, NUM_COEFFS)
    return out
