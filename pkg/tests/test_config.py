"""Tests for config parsing, overrides, and validation."""

import pytest

from vocalsim.config import (
    ExperimentConfig,
    apply_overrides,
    load_config,
    parse_config_text,
)
from vocalsim.errors import DataError


class TestDefaults:
    def test_training_defaults(self):
        config = ExperimentConfig()
        assert config.batch_size == 100
        assert config.epochs == 300
        assert config.lr == pytest.approx(1e-5)
        assert config.decay == pytest.approx(1e-6)
        assert config.patience == 10

    def test_augmentation_defaults(self):
        config = ExperimentConfig()
        assert config.noise_alpha_values() == (0.01, 0.02, 0.03)
        assert config.pitch_semitone_values() == (0.5, 2.0, 2.5)
        assert config.augment and config.augment_train_only

    def test_defaults_validate(self):
        ExperimentConfig().validate()


class TestParsing:
    def test_basic_file(self):
        config = parse_config_text(
            "\n".join(
                [
                    "# experiment",
                    "manifest = corpus/manifest.csv",
                    "variant = fusion",
                    "epochs = 40",
                    "lr = 1e-3",
                    "augment = false",
                    "",
                    "pairs_per_sample=4  # denser later",
                ]
            )
        )
        assert config.manifest == "corpus/manifest.csv"
        assert config.variant == "fusion"
        assert config.epochs == 40
        assert config.lr == pytest.approx(1e-3)
        assert config.augment is False
        assert config.pairs_per_sample == 4

    def test_unknown_key_with_line(self):
        with pytest.raises(DataError, match=":2: unknown config key 'leraning_rate'"):
            parse_config_text("epochs = 3\nleraning_rate = 1\n")

    def test_bad_int(self):
        with pytest.raises(DataError, match="epochs"):
            parse_config_text("epochs = soon\n")

    def test_bad_bool(self):
        with pytest.raises(DataError, match="boolean"):
            parse_config_text("augment = perhaps\n")

    def test_missing_equals(self):
        with pytest.raises(DataError, match="key = value"):
            parse_config_text("epochs 3\n")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 99\n", encoding="utf-8")
        assert load_config(path).seed == 99

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_config(tmp_path / "none.cfg")


class TestOverrides:
    def test_set_overrides_file_values(self):
        config = parse_config_text("epochs = 10\n")
        apply_overrides(config, ["epochs=20", "variant=vggish"])
        assert config.epochs == 20
        assert config.variant == "vggish"

    def test_unknown_override(self):
        with pytest.raises(DataError, match="unknown config key"):
            apply_overrides(ExperimentConfig(), ["epoch=3"])

    def test_malformed_override(self):
        with pytest.raises(DataError, match="key=value"):
            apply_overrides(ExperimentConfig(), ["epochs"])


class TestValidation:
    def test_bad_variant(self):
        config = ExperimentConfig(variant="wavelet")
        with pytest.raises(DataError, match="variant"):
            config.validate()

    def test_bad_pair_mode(self):
        with pytest.raises(DataError, match="pair_mode"):
            ExperimentConfig(pair_mode="triplet").validate()

    def test_nonpositive_values(self):
        with pytest.raises(DataError, match="epochs"):
            ExperimentConfig(epochs=0).validate()
        with pytest.raises(DataError, match="lr"):
            ExperimentConfig(lr=-1.0).validate()

    def test_dropout_range(self):
        with pytest.raises(DataError, match="dropout"):
            ExperimentConfig(dropout=1.0).validate()

    def test_threshold_range(self):
        with pytest.raises(DataError, match="relapse_threshold"):
            ExperimentConfig(relapse_threshold=1.5).validate()

    def test_bad_alpha_list(self):
        with pytest.raises(DataError, match="noise_alphas"):
            ExperimentConfig(noise_alphas="0.01,loud").validate()
