import pytest

from subgcn.config import ConfigError, RunConfig, config_from_mapping, load_config


class TestRunConfig:
    def test_defaults_match_reference_setup(self):
        cfg = RunConfig()
        assert cfg.structure_dim == 200
        assert cfg.attribute_dim == 100 and cfg.subgraph_dim == 100
        assert cfg.margin_structure == cfg.margin_attribute == cfg.margin_subgraph == 3.0
        assert cfg.epochs == 5000
        assert cfg.negatives_per_side == 20
        assert cfg.train_fraction == 0.30
        assert (cfg.alpha, cfg.beta, cfg.gamma_weight) == (0.72, 0.2, 0.08)
        assert cfg.hits_levels == (1, 10, 50)
        assert cfg.attribute_vocab_cap == 2000
        assert cfg.adjacency_floor == 0.3

    def test_mode_channels(self):
        assert RunConfig(mode="se").channels == ("structure",)
        assert RunConfig(mode="se+ae").channels == ("structure", "attribute")
        assert RunConfig(mode="sub-gcn").channels == ("structure", "attribute",
                                                      "subgraph")

    def test_mode_alignment_weights(self):
        cfg = RunConfig()
        se = cfg.alignment_config("se")
        assert (se.alpha, se.beta, se.gamma_weight) == (1.0, 0.0, 0.0)
        seae = cfg.alignment_config("se+ae")
        assert (seae.alpha, seae.beta, seae.gamma_weight) == (0.8, 0.2, 0.0)
        full = cfg.alignment_config("sub-gcn")
        assert (full.alpha, full.beta, full.gamma_weight) == (0.72, 0.2, 0.08)

    def test_invalid_mode_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(mode="gcn")

    def test_inconsistent_values_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(alpha=0.9, beta=0.9, gamma_weight=0.9)
        with pytest.raises(ConfigError):
            RunConfig(margin_structure=-1.0)


class TestMappingAndFile:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            config_from_mapping({"learning_rte": "0.5"})

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            config_from_mapping({"epochs": "many"})

    def test_round_trip_through_file(self, tmp_path):
        cfg = RunConfig(dataset_dir="data/x", epochs=123, hits_levels=(1, 5),
                        mode="se+ae", learning_rate=0.25)
        path = tmp_path / "run.cfg"
        cfg.to_file(path)
        assert load_config(path) == cfg

    def test_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nepochs = 7\nhits_levels = 1,3\n\nmode=se\n")
        cfg = load_config(path)
        assert cfg.epochs == 7
        assert cfg.hits_levels == (1, 3)
        assert cfg.mode == "se"

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = 7\nepochs = 8\n")
        with pytest.raises(ConfigError, match="duplicate"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs 7\n")
        with pytest.raises(ConfigError, match="key = value"):
            load_config(path)
