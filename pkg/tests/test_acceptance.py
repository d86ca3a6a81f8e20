"""Acceptance suite: eight end-to-end checks, one test (and one verbose
output line) per criterion. Tolerances and budgets are pinned in-line."""

import json
import time

import numpy as np
import pytest

from vocalsim import autodiff as ad
from vocalsim.config import ExperimentConfig
from vocalsim.dsp import Signal, dft_magnitude
from vocalsim.manifest import write_wav
from vocalsim.metrics import accuracy_from_confusion, evaluate, pearson_cc, rmse
from vocalsim.mfcc import SEGMENT_SAMPLES, extract_mfcc
from vocalsim.models import FeatureSet, ModelSpec, build_model
from vocalsim.pairs import SampleRef, make_pairs
from vocalsim.pipeline import run_pipeline
from vocalsim.preprocess import augment_corpus, Segment
from vocalsim.textfeat import Lexicon, TranscriptUtterance, extract_text
from vocalsim.training import TrainConfig, train
from vocalsim.vggish import extract_vggish, identity_pca, make_test_network

RATE = 16000


def spectral_peak_hz(samples: np.ndarray, rate: int = RATE) -> float:
    spectrum = np.abs(np.fft.rfft(samples))
    return float(np.argmax(spectrum) * rate / samples.size)


def band_noise(freq: float, seed: int, n: int = SEGMENT_SAMPLES) -> Signal:
    """Noise whose energy concentrates around `freq` (random phase walk)."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) / RATE
    phase = 2 * np.pi * freq * t + np.cumsum(rng.standard_normal(n)) * 0.05
    return Signal(0.45 * np.sin(phase) + 0.05 * rng.standard_normal(n), RATE)


def test_criterion_1_dft_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(1)
    for n_fft in (4, 8, 16, 32, 64, 128, 256, 512):
        frames = rng.standard_normal((100, n_fft))
        frames[50:, n_fft // 2 :] = 0.0  # half the frames exercise zero-padding
        k = np.arange(n_fft // 2 + 1)
        j = np.arange(n_fft)
        basis = np.exp(-2j * np.pi * np.outer(k, j) / n_fft)  # quadratic-cost DFT
        naive = np.abs(frames @ basis.T)
        mine = np.stack([dft_magnitude(frame, n_fft) for frame in frames])
        rel = np.max(np.abs(mine - naive)) / np.max(naive)
        assert rel < 1e-9, f"n_fft={n_fft}: relative error {rel:.2e}"
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"oracle sweep took {elapsed:.1f}s"


def test_criterion_2_feature_shapes():
    segment = band_noise(300.0, seed=2)
    assert extract_mfcc(segment).shape == (378, 60)
    assert extract_vggish(segment, make_test_network(), identity_pca()).shape == (14, 128)
    rng = np.random.default_rng(2)
    words = "the quick brown fox jumps over the lazy dog again and again".split()
    lexicon = Lexicon({w: rng.standard_normal(300) for w in words})
    utterances = [TranscriptUtterance(0.0, 7.0, "participant", " ".join(words))]
    assert extract_text(utterances, 0, lexicon).shape == (60, 9)


def _numeric_grad(build_scalar, value: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    grad = np.zeros_like(value)
    flat = value.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = build_scalar()
        flat[i] = keep - eps
        lo = build_scalar()
        flat[i] = keep
        out[i] = (hi - lo) / (2 * eps)
    return grad


def _check_op(make_graph, tensors) -> float:
    """Backprop vs central differences; returns the worst relative error."""
    loss = make_graph()
    for t in tensors:
        t.grad = np.zeros_like(t.data)
    loss.backward()
    worst = 0.0
    for t in tensors:
        numeric = _numeric_grad(lambda: float(make_graph().data), t.data)
        scale = max(1.0, float(np.max(np.abs(numeric))))
        worst = max(worst, float(np.max(np.abs(t.grad - numeric))) / scale)
    return worst


def test_criterion_3_gradient_suite():
    start = time.monotonic()
    worst_by_op = {}

    def probe(rng, out_shape):
        w = rng.standard_normal(out_shape)
        return lambda value: ad.weighted_sum(value, w)

    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        batch = 1 + seed % 3
        channels = 2 + seed % 3
        length = 6 + seed % 5
        filters = 1 + seed % 4
        kernel = 2 + seed % 2
        stride = 1 + seed % 2

        x = ad.Tensor(rng.standard_normal((batch, channels, length)))
        w = ad.Tensor(rng.standard_normal((filters, channels, kernel)))
        b = ad.Tensor(rng.standard_normal(filters))
        t_out = (length - kernel) // stride + 1
        reduce = probe(rng, (batch, filters, t_out))
        worst_by_op["conv1d"] = max(
            worst_by_op.get("conv1d", 0.0),
            _check_op(lambda: reduce(ad.conv1d(x, w, b, stride)), [x, w, b]),
        )

        x = ad.Tensor(rng.standard_normal((batch, 5)))
        w = ad.Tensor(rng.standard_normal((4, 5)))
        b = ad.Tensor(rng.standard_normal(4))
        reduce = probe(rng, (batch, 4))
        worst_by_op["dense"] = max(
            worst_by_op.get("dense", 0.0),
            _check_op(lambda: reduce(ad.dense(x, w, b)), [x, w, b]),
        )

        base = rng.standard_normal((batch, 6))
        for name, fn in (("tanh", ad.tanh), ("sigmoid", ad.sigmoid), ("relu", ad.relu)):
            data = base.copy()
            if name == "relu":  # keep x away from the kink
                data = np.where(np.abs(data) < 0.05, 0.3, data)
            x = ad.Tensor(data)
            reduce = probe(rng, x.data.shape)
            worst_by_op[name] = max(
                worst_by_op.get(name, 0.0), _check_op(lambda: reduce(fn(x)), [x])
            )

        x = ad.Tensor(rng.standard_normal((batch, 8)))
        reduce = probe(rng, x.data.shape)
        mask_seed = 300 + seed
        worst_by_op["dropout"] = max(
            worst_by_op.get("dropout", 0.0),
            _check_op(
                lambda: reduce(
                    ad.dropout(x, 0.4, np.random.default_rng(mask_seed), training=True)
                ),
                [x],
            ),
        )

        x = ad.Tensor(rng.standard_normal((batch, 3, 4)))
        reduce = probe(rng, (batch, 12))
        worst_by_op["flatten"] = max(
            worst_by_op.get("flatten", 0.0),
            _check_op(lambda: reduce(ad.flatten(x)), [x]),
        )

        a = ad.Tensor(rng.standard_normal((batch, 3)))
        c = ad.Tensor(rng.standard_normal((batch, 4)))
        reduce = probe(rng, (batch, 7))
        worst_by_op["concat"] = max(
            worst_by_op.get("concat", 0.0),
            _check_op(lambda: reduce(ad.concat([a, c])), [a, c]),
        )

        x = ad.Tensor(rng.standard_normal((batch,)))
        reduce = probe(rng, (batch, 1))
        worst_by_op["unsqueeze"] = max(
            worst_by_op.get("unsqueeze", 0.0),
            _check_op(lambda: reduce(ad.unsqueeze(x)), [x]),
        )

        a = ad.Tensor(rng.standard_normal((batch, 6)))
        c = ad.Tensor(a.data + 1.0 + rng.random((batch, 6)))  # keep distance > 0
        reduce = probe(rng, (batch,))
        worst_by_op["euclidean_distance"] = max(
            worst_by_op.get("euclidean_distance", 0.0),
            _check_op(lambda: reduce(ad.euclidean_distance(a, c)), [a, c]),
        )

        x = ad.Tensor(rng.standard_normal((batch, 5)))
        target = x.data + 0.5 + rng.random((batch, 5))  # keep loss > 0
        worst_by_op["rmse_loss"] = max(
            worst_by_op.get("rmse_loss", 0.0),
            _check_op(lambda: ad.rmse_loss(x, target), [x]),
        )

        x = ad.Tensor(rng.standard_normal((3, 4)))
        wsum = rng.standard_normal((3, 4))
        worst_by_op["weighted_sum"] = max(
            worst_by_op.get("weighted_sum", 0.0),
            _check_op(lambda: ad.weighted_sum(x, wsum), [x]),
        )

    for op, worst in worst_by_op.items():
        assert worst < 1e-4, f"{op}: worst relative error {worst:.2e}"
    elapsed = time.monotonic() - start
    assert elapsed < 120.0, f"gradient suite took {elapsed:.1f}s"


def test_criterion_4_pairing_invariants():
    refs = []
    for i in range(200):
        split = "train" if i < 140 else ("val" if i < 170 else "test")
        refs.append(SampleRef(f"s{i:03d}", f"s{i:03d}", i % 2, (i * 7) % 25, split))
    pairs = make_pairs(refs, "binary", 8, np.random.default_rng(11))
    train_ids = {r.sample_id for r in refs if r.split == "train"}
    classes = {r.sample_id: r.phq_binary for r in refs}

    for split_pairs in (pairs.train, pairs.val, pairs.test):
        assert all(p.left_id != p.right_id for p in split_pairs)

    for cls in (0, 1):
        anchored = [p for p in pairs.train if classes[p.left_id] == cls]
        same = sum(1 for p in anchored if p.similar)
        assert abs(same - len(anchored) / 2) <= 1, (
            f"class {cls}: {same} same-class of {len(anchored)}"
        )

    for split_pairs in (pairs.val, pairs.test):
        for p in split_pairs:
            assert (p.left_id in train_ids) + (p.right_id in train_ids) == 1


def test_criterion_5_end_to_end_learnability():
    start = time.monotonic()
    features = {}
    refs = []
    for i in range(40):
        cls = i % 2
        split = "train" if i < 32 else ("val" if i < 36 else "test")
        sid = f"subj{i:02d}"
        features[sid] = FeatureSet(
            mfcc=extract_mfcc(band_noise(220.0 if cls == 0 else 880.0, seed=i))
        )
        refs.append(SampleRef(sid, sid, cls, 2 if cls == 0 else 18, split))
    pairs = make_pairs(refs, "binary", 3, np.random.default_rng(7))
    assert len(pairs.train) == 96  # 48 similar + 48 non-similar

    model = build_model(
        ModelSpec(variant="mfcc", head="binary", filters=16, dense_width=256, init_seed=7)
    )
    result = train(
        model,
        pairs.train,
        pairs.val,
        features,
        TrainConfig(batch_size=32, epochs=15, lr=1e-3, decay=1e-6, patience=15),
        np.random.default_rng(7),
    )
    assert len(result.train_losses) <= 50
    report = evaluate(model, pairs.test, features)
    elapsed = time.monotonic() - start
    assert report.accuracy >= 90.0, f"held-out accuracy {report.accuracy:.1f}%"
    assert elapsed < 600.0, f"learnability run took {elapsed:.1f}s"


def test_criterion_6_metric_arithmetic():
    counts = np.array([[404, 158], [128, 374]])
    assert accuracy_from_confusion(counts) == pytest.approx(73.12, abs=0.005)
    assert 4.025 / 25 == pytest.approx(0.161, abs=5e-4)
    x = np.random.default_rng(6).standard_normal(100)
    assert pearson_cc(x, x) == pytest.approx(1.0, rel=1e-12)
    assert rmse(x, x) == 0.0


def test_criterion_7_augmentation_contract():
    t = np.arange(SEGMENT_SAMPLES) / RATE
    tone = Signal(0.5 * np.sin(2 * np.pi * 440.0 * t), RATE)
    variants = augment_corpus([Segment(tone)], seed=3)
    assert len(variants) == 7
    by_tag = {v.provenance: v for v in variants}
    assert set(by_tag) == {
        "original",
        "noise-0.01",
        "noise-0.02",
        "noise-0.03",
        "pitch-0.5",
        "pitch-2",
        "pitch-2.5",
    }

    mse = [
        float(np.mean((by_tag[f"noise-{a:g}"].signal.samples - tone.samples) ** 2))
        for a in (0.01, 0.02, 0.03)
    ]
    assert mse[0] < mse[1] < mse[2]

    # lowering two semitones takes 440 Hz to 440 * 2^(-2/12) = 392 Hz
    peak = spectral_peak_hz(by_tag["pitch-2"].signal.samples)
    assert abs(peak - 392.0) <= 2.0, f"peak at {peak:.1f} Hz"


def _tone_corpus(root, subjects=8):
    lines = ["subject_id,audio_path,transcript_path,phq_binary,phq_score,split\n"]
    splits = ("train", "train", "train", "train", "train", "train", "val", "test")
    for i in range(subjects):
        cls = i % 2
        wav = root / f"s{i}.wav"
        write_wav(wav, band_noise(220.0 if cls == 0 else 880.0, seed=i))
        tsv = root / f"s{i}.tsv"
        tsv.write_text(
            "start_time\tstop_time\tspeaker\tvalue\n"
            "0.0\t7.6\tparticipant\tcalm morning overall\n",
            encoding="utf-8",
        )
        lines.append(f"s{i},{wav.name},{tsv.name},{cls},{2 if cls == 0 else 18},{splits[i]}\n")
    manifest = root / "manifest.csv"
    manifest.write_text("".join(lines), encoding="utf-8")
    return manifest


def test_criterion_8_pipeline_determinism(tmp_path):
    manifest = _tone_corpus(tmp_path)

    def run(workdir):
        config = ExperimentConfig(
            manifest=str(manifest),
            workdir=str(workdir),
            augment=True,
            variant="mfcc",
            pairs_per_sample=4,
            filters=4,
            dense_width=16,
            batch_size=8,
            epochs=2,
            lr=1e-4,
        )
        return run_pipeline(config)

    first = run(tmp_path / "run-a")
    second = run(tmp_path / "run-b")

    cache_a = first.paths["cache"].read_bytes()
    cache_b = second.paths["cache"].read_bytes()
    assert cache_a == cache_b

    report_a = first.paths["report"].read_text(encoding="utf-8")
    report_b = second.paths["report"].read_text(encoding="utf-8")
    assert report_a == report_b
    assert json.loads(report_a) == json.loads(report_b)
    assert first.paths["pairs"].read_bytes() == second.paths["pairs"].read_bytes()
    assert (
        first.paths["confusion"].read_text(encoding="utf-8")
        == second.paths["confusion"].read_text(encoding="utf-8")
    )
