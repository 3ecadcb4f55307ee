"""
Tests for run configuration loading and validation.
"""

import json
import os
from dataclasses import fields

import pytest
import yaml

from prevmap.core.config import EmOptions, RunConfig
from prevmap.core.errors import InvariantViolation, ParseError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in [n for n in os.environ if n.startswith("PREVMAP_")]:
        monkeypatch.delenv(name, raising=False)


class TestEmOptions:
    def test_defaults(self):
        opts = EmOptions()
        assert opts.grid_cells == 20
        assert opts.top_k_starts == 5

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_iter": 0}, {"rel_tol": 0.0}, {"grid_step": 0.3}, {"grid_step": 1.0}, {"top_k_starts": 0},
            {"min_active_subjects": -1.0}, {"min_active_var_ratio": 1.0},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvariantViolation):
            EmOptions(**kwargs)

    def test_grid_step_dividing_one(self):
        assert EmOptions(grid_step=0.1).grid_cells == 10

    def test_run_seed_does_not_reach_em(self):
        assert RunConfig(seed=1).em_options() == RunConfig(seed=2).em_options()
        assert "seed" not in {f.name for f in fields(EmOptions)}


class TestRunConfig:
    def test_defaults_validate(self):
        config = RunConfig.load()
        config.validate()
        assert config.q_level == 0.1
        assert config.workers >= 1

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "prevmap.yaml"
        path.write_text(yaml.safe_dump({"q-level": 0.05, "seed": 11, "families": ["gaussian"]}))
        config = RunConfig.load(str(path))
        assert (config.q_level, config.seed, config.families) == (0.05, 11, ["gaussian"])

    def test_load_json_ignores_unknown_keys(self, tmp_path):
        path = tmp_path / "prevmap.json"
        path.write_text(json.dumps({"max_iter": 50, "colour": "blue"}))
        config = RunConfig.load(str(path))
        assert config.max_iter == 50
        assert not hasattr(config, "colour")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            RunConfig.load(str(tmp_path / "absent.yaml"))

    def test_non_mapping_file(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(InvariantViolation):
            RunConfig.load(str(path))

    @pytest.mark.parametrize("name,text", [("broken.yml", "seed: [3\n"), ("broken.json", "{\"seed\": 3,")])
    def test_malformed_file(self, tmp_path, name, text):
        path = tmp_path / name
        path.write_text(text)
        with pytest.raises(ParseError, match=name):
            RunConfig.load(str(path))

    def test_environment_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "prevmap.json"
        path.write_text(json.dumps({"seed": 3}))
        monkeypatch.setenv("PREVMAP_SEED", "8")
        monkeypatch.setenv("PREVMAP_MAX_ITER", "not-a-number")
        config = RunConfig.load(str(path))
        assert config.seed == 8
        assert config.max_iter == 500

    def test_explicit_values_override_everything(self, monkeypatch):
        monkeypatch.setenv("PREVMAP_Q_LEVEL", "0.2")
        config = RunConfig.load().merged({"q_level": 0.01})
        assert config.q_level == 0.01

    @pytest.mark.parametrize(
        "overrides",
        [
            {"q_level": 1.0}, {"workers": 0}, {"active_fraction": 0.0}, {"alpha": 0.0}, {"reps": 0},
            {"grid_step": 0.3}, {"seed": -1}, {"fwhm": -1.0},
        ],
    )
    def test_validate_rejects(self, overrides):
        with pytest.raises(InvariantViolation):
            RunConfig().merged(overrides).validate()

    def test_em_options(self):
        opts = RunConfig(max_iter=40, grid_step=0.1, top_k=2).em_options()
        assert (opts.max_iter, opts.grid_cells, opts.top_k_starts) == (40, 10, 2)

    def test_save_round_trip(self, tmp_path):
        config = RunConfig(seed=5, workers=2, families=["laplace"])
        path = tmp_path / "nested" / "config.json"
        config.save(str(path))
        assert RunConfig.load(str(path)).to_dict() == config.to_dict()
