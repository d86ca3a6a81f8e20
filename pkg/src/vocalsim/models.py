"""Twin-encoder similarity networks over the three feature variants, plus
checkpointing and the relapse decision rule.

Each variant encodes a feature set into a 1024-vector through shared weights;
the Euclidean distance between the two encodings feeds a small output layer:
2 sigmoid units for the similar / non-similar head (index 0 = similar) or 25
linear units for the score-difference head.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Conv1dLayer, DenseLayer, Tensor
from .container import read_container, write_container
from .errors import DataError

VARIANTS = ("mfcc", "vggish", "fusion")
HEADS = {"binary": 2, "score25": 25}
MFCC_INPUT = (60, 378)  # channels x length
VGGISH_INPUT = (128, 14)
TEXT_FLAT = 540
SIMILAR_INDEX = 0


@dataclass
class FeatureSet:
    """Per-segment features; only the fields a variant needs must be present."""

    mfcc: np.ndarray | None = None  # (378, 60) frames x coefficients
    vggish: np.ndarray | None = None  # (14, 128) patches x embedding dims
    text: np.ndarray | None = None  # (60, 9) dims x words


@dataclass
class ModelSpec:
    variant: str = "mfcc"
    head: str = "binary"
    filters: int = 64
    kernel: int = 3
    stride: int = 1
    dropout: float = 0.0001
    dense_width: int = 1024
    fusion_width: int = 540
    init_seed: int = 7

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {tuple(HEADS)}, got {self.head!r}")
        if self.filters < 1 or self.kernel < 1 or self.stride < 1:
            raise ValueError("filters, kernel, and stride must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.dense_width < 1 or self.fusion_width < 1:
            raise ValueError("layer widths must be positive")

    @property
    def head_size(self) -> int:
        return HEADS[self.head]


class _ConvBranch:
    """conv -> relu -> conv -> relu -> dropout -> flatten, shared by twins."""

    def __init__(self, spec: ModelSpec, in_channels: int, in_length: int, rng):
        self.conv1 = Conv1dLayer(in_channels, spec.filters, spec.kernel, spec.stride, rng)
        self.conv2 = Conv1dLayer(spec.filters, spec.filters, spec.kernel, spec.stride, rng)
        self.dropout = spec.dropout
        self.flat_dim = spec.filters * self.conv2.out_length(self.conv1.out_length(in_length))

    def __call__(self, x: Tensor, training: bool, rng) -> Tensor:
        h = ad.relu(self.conv1(x))
        h = ad.relu(self.conv2(h))
        h = ad.dropout(h, self.dropout, rng, training)
        return ad.flatten(h)

    def params(self) -> list[Tensor]:
        return self.conv1.params() + self.conv2.params()


class SiameseModel:
    """Shared-weight encoder pair with a distance head.

    Both inputs of forward() run through the same layer objects, so one
    optimizer step moves both twins identically.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.init_seed)
        self.mfcc_branch = None
        self.vggish_branch = None
        if spec.variant in ("mfcc", "fusion"):
            self.mfcc_branch = _ConvBranch(spec, MFCC_INPUT[0], MFCC_INPUT[1], rng)
        if spec.variant in ("vggish", "fusion"):
            self.vggish_branch = _ConvBranch(spec, VGGISH_INPUT[0], VGGISH_INPUT[1], rng)
        if spec.variant == "fusion":
            concat_dim = (
                self.mfcc_branch.flat_dim + self.vggish_branch.flat_dim + TEXT_FLAT
            )
            self.fusion = DenseLayer(concat_dim, spec.fusion_width, rng)
            encoder_in = spec.fusion_width
        else:
            self.fusion = None
            branch = self.mfcc_branch or self.vggish_branch
            encoder_in = branch.flat_dim
        self.dense1 = DenseLayer(encoder_in, spec.dense_width, rng)
        self.dense2 = DenseLayer(spec.dense_width, spec.dense_width, rng)
        self.head = DenseLayer(1, spec.head_size, rng)

    def params(self) -> list[Tensor]:
        out: list[Tensor] = []
        for branch in (self.mfcc_branch, self.vggish_branch):
            if branch is not None:
                out.extend(branch.params())
        if self.fusion is not None:
            out.extend(self.fusion.params())
        out.extend(self.dense1.params() + self.dense2.params() + self.head.params())
        return out

    # ---- input staging -------------------------------------------------

    def stack_inputs(self, feature_sets: list[FeatureSet]) -> dict[str, Tensor]:
        """Batch feature sets into the channels-x-length tensors the branches
        expect. Raises DataError when a needed field is missing or misshaped."""
        if not feature_sets:
            raise ValueError("need at least one feature set")
        tensors: dict[str, Tensor] = {}
        if self.mfcc_branch is not None:
            tensors["mfcc"] = Tensor(
                np.stack([self._field(fs, "mfcc", (378, 60)).T for fs in feature_sets])
            )
        if self.vggish_branch is not None:
            tensors["vggish"] = Tensor(
                np.stack([self._field(fs, "vggish", (14, 128)).T for fs in feature_sets])
            )
        if self.spec.variant == "fusion":
            tensors["text"] = Tensor(
                np.stack([self._field(fs, "text", (60, 9)).ravel() for fs in feature_sets])
            )
        return tensors

    @staticmethod
    def _field(fs: FeatureSet, name: str, expected: tuple[int, int]) -> np.ndarray:
        value = getattr(fs, name)
        if value is None:
            raise DataError(f"feature set lacks the {name} matrix")
        value = np.asarray(value, dtype=np.float64)
        if value.shape != expected:
            raise DataError(f"{name} matrix must be {expected}, got {value.shape}")
        return value

    # ---- forward passes ------------------------------------------------

    def encode(self, inputs: dict[str, Tensor], training: bool = False, rng=None) -> Tensor:
        rng = rng or np.random.default_rng(0)
        parts = []
        if self.mfcc_branch is not None:
            parts.append(self.mfcc_branch(inputs["mfcc"], training, rng))
        if self.vggish_branch is not None:
            parts.append(self.vggish_branch(inputs["vggish"], training, rng))
        if self.spec.variant == "fusion":
            parts.append(inputs["text"])
            h = ad.tanh(self.fusion(ad.concat(parts)))
        else:
            h = parts[0]
        h = ad.tanh(self.dense1(h))
        return ad.tanh(self.dense2(h))

    def forward(
        self,
        left: dict[str, Tensor],
        right: dict[str, Tensor],
        training: bool = False,
        rng=None,
    ) -> Tensor:
        """Head output for a batch: (B, 2) sigmoid probabilities or (B, 25)."""
        rng = rng or np.random.default_rng(0)
        left_enc = self.encode(left, training, rng)
        right_enc = self.encode(right, training, rng)
        distance = ad.unsqueeze(ad.euclidean_distance(left_enc, right_enc))
        out = self.head(distance)
        if self.spec.head == "binary":
            out = ad.sigmoid(out)
        return out

    def encode_sets(self, feature_sets: list[FeatureSet]) -> np.ndarray:
        return self.encode(self.stack_inputs(feature_sets)).data

    def predict_similarity(self, left: FeatureSet, right: FeatureSet) -> float:
        """Probability that the two feature sets belong to the same class.

        Binary head only; dropout is off, so the score is deterministic and
        symmetric in its arguments.
        """
        if self.spec.head != "binary":
            raise ValueError("similarity scores require the binary head")
        out = self.forward(self.stack_inputs([left]), self.stack_inputs([right]))
        return float(out.data[0, SIMILAR_INDEX])


def build_model(spec: ModelSpec) -> SiameseModel:
    return SiameseModel(spec)


@dataclass
class RelapseDecision:
    relapse: bool
    mean_similarity: float
    num_pairs: int


def detect_relapse(
    model: SiameseModel,
    subject_segments: list[FeatureSet],
    references: list[FeatureSet],
    threshold: float = 0.5,
) -> RelapseDecision:
    """Average the similarity of every (segment, depressed reference) pair and
    flag relapse when the mean reaches the threshold."""
    if not subject_segments:
        raise ValueError("subject has no segments to score")
    if not references:
        raise ValueError("need at least one depressed reference segment")
    scores = [
        model.predict_similarity(seg, ref)
        for seg in subject_segments
        for ref in references
    ]
    mean = float(np.mean(scores))
    return RelapseDecision(mean >= threshold, mean, len(scores))


# ---- checkpoint io -----------------------------------------------------

_SPEC_FIELDS = (
    "filters",
    "kernel",
    "stride",
    "dropout",
    "dense_width",
    "fusion_width",
    "init_seed",
)


def _pack_scalar(value) -> np.ndarray:
    # the container stores float32 tensors; stashing the float64 bit pattern
    # in a pair of float32 words keeps spec scalars exact across a roundtrip
    return np.frombuffer(np.float64(value).tobytes(), dtype="<f4").copy()


def _unpack_scalar(tensor: np.ndarray) -> float:
    raw = np.asarray(tensor, dtype="<f4")
    if raw.shape != (2,):
        raise ValueError(f"spec scalar has shape {raw.shape}, expected (2,)")
    return float(np.frombuffer(raw.tobytes(), dtype="<f8")[0])


def save_checkpoint(path, model: SiameseModel, optimizer=None) -> None:
    """Store parameters (and optimizer cache) as named float32 tensors."""
    named: dict[str, np.ndarray] = {
        "spec/variant": _pack_scalar(VARIANTS.index(model.spec.variant)),
        "spec/head": _pack_scalar(list(HEADS).index(model.spec.head)),
    }
    for name in _SPEC_FIELDS:
        named[f"spec/{name}"] = _pack_scalar(getattr(model.spec, name))
    for i, p in enumerate(model.params()):
        named[f"param/{i}"] = p.data
    if optimizer is not None:
        named["opt/step"] = np.float64(optimizer.step_count)
        for i, cache in enumerate(optimizer.cache):
            named[f"opt/cache/{i}"] = cache
    write_container(path, [], named)


def load_checkpoint(path) -> SiameseModel:
    _, named = read_container(path)
    try:
        spec = ModelSpec(
            variant=VARIANTS[int(_unpack_scalar(named["spec/variant"]))],
            head=list(HEADS)[int(_unpack_scalar(named["spec/head"]))],
            filters=int(_unpack_scalar(named["spec/filters"])),
            kernel=int(_unpack_scalar(named["spec/kernel"])),
            stride=int(_unpack_scalar(named["spec/stride"])),
            dropout=_unpack_scalar(named["spec/dropout"]),
            dense_width=int(_unpack_scalar(named["spec/dense_width"])),
            fusion_width=int(_unpack_scalar(named["spec/fusion_width"])),
            init_seed=int(_unpack_scalar(named["spec/init_seed"])),
        )
    except KeyError as exc:
        raise DataError(f"{path}: checkpoint lacks spec tensor {exc}") from exc
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: invalid checkpoint spec: {exc}") from exc
    model = SiameseModel(spec)
    for i, p in enumerate(model.params()):
        key = f"param/{i}"
        if key not in named:
            raise DataError(f"{path}: checkpoint lacks tensor {key}")
        stored = named[key]
        if stored.shape != p.data.shape:
            raise DataError(
                f"{path}: tensor {key} has shape {stored.shape}, expected {p.data.shape}"
            )
        p.data = stored.astype(np.float64)
    return model
