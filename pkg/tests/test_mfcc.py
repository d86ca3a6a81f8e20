"""Tests for segment-level MFCC extraction."""

import numpy as np
import pytest

from vocalsim.dsp import (
    Signal,
    WindowSpec,
    apply_filterbank,
    dft_magnitude,
    hamming_window,
    log_dct,
    mel_filterbank,
)
from vocalsim.mfcc import (
    FRAME_LENGTH,
    HOP_LENGTH,
    N_FFT,
    NUM_COEFFS,
    NUM_FILTERS,
    NUM_FRAMES,
    SAMPLE_RATE,
    SEGMENT_SAMPLES,
    extract_mfcc,
)


def make_segment(x: np.ndarray) -> Signal:
    assert x.size == SEGMENT_SAMPLES
    return Signal(x, SAMPLE_RATE)


def test_frame_grid_constants():
    assert SEGMENT_SAMPLES == 121600
    assert FRAME_LENGTH == 960 and HOP_LENGTH == 320
    assert NUM_FRAMES == 378


def test_shape_on_valid_segment():
    rng = np.random.default_rng(0)
    mat = extract_mfcc(make_segment(rng.normal(size=SEGMENT_SAMPLES)))
    assert mat.shape == (378, 60)
    assert np.all(np.isfinite(mat))


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        extract_mfcc(Signal(np.zeros(SEGMENT_SAMPLES - 1), SAMPLE_RATE))
    with pytest.raises(ValueError):
        extract_mfcc(Signal(np.zeros(SEGMENT_SAMPLES + 1), SAMPLE_RATE))


def test_wrong_sample_rate_rejected():
    with pytest.raises(ValueError):
        extract_mfcc(Signal(np.zeros(SEGMENT_SAMPLES), 8000))


def test_all_zero_segment_rows():
    # Every mel energy is floored to 1e-10, so each row is the cosine basis
    # applied to a constant -10 vector: c[0] = -600, even coefficients vanish,
    # odd ones follow the geometric-sum closed form -20*cos(n*pi/120).
    mat = extract_mfcc(make_segment(np.zeros(SEGMENT_SAMPLES)))
    n = np.arange(NUM_COEFFS)
    expected_row = np.where(
        n == 0,
        -600.0,
        np.where(n % 2 == 0, 0.0, -20.0 * np.cos(n * np.pi / (2 * NUM_FILTERS))),
    )
    for t in range(0, NUM_FRAMES, 37):
        np.testing.assert_allclose(mat[t], expected_row, atol=1e-8)
    np.testing.assert_allclose(mat, np.broadcast_to(expected_row, mat.shape), atol=1e-8)


def test_tone_column_zero_stationary_within_one_percent():
    t = np.arange(SEGMENT_SAMPLES) / SAMPLE_RATE
    mat = extract_mfcc(make_segment(np.sin(2.0 * np.pi * 1000.0 * t)))
    col = mat[:, 0]
    spread = col.max() - col.min()
    assert spread <= 0.01 * abs(np.mean(col))


def test_hop_shift_moves_rows_by_one():
    rng = np.random.default_rng(5)
    x = rng.normal(size=SEGMENT_SAMPLES + HOP_LENGTH)
    a = extract_mfcc(make_segment(x[:SEGMENT_SAMPLES]))
    b = extract_mfcc(make_segment(x[HOP_LENGTH:]))
    np.testing.assert_allclose(a[1:], b[:-1], atol=1e-6)


def test_matches_composed_operations_bit_for_bit():
    rng = np.random.default_rng(9)
    x = rng.normal(size=SEGMENT_SAMPLES)
    mat = extract_mfcc(make_segment(x))
    window = hamming_window(WindowSpec(FRAME_LENGTH))
    bank = mel_filterbank(NUM_FILTERS, N_FFT, SAMPLE_RATE)
    for t in (0, 1, 200, 377):
        frame = x[t * HOP_LENGTH : t * HOP_LENGTH + FRAME_LENGTH]
        spectrum = dft_magnitude(frame * window, N_FFT)
        row = log_dct(apply_filterbank(spectrum**2, bank), NUM_COEFFS)
        np.testing.assert_array_equal(mat[t], row)


def test_augmented_variants_keep_shape():
    from vocalsim.preprocess import Segment, augment_corpus

    t = np.arange(SEGMENT_SAMPLES) / SAMPLE_RATE
    seg = Segment(make_segment(0.5 * np.sin(2.0 * np.pi * 220.0 * t)))
    for variant in augment_corpus([seg], seed=3):
        assert extract_mfcc(variant.signal).shape == (378, 60)
