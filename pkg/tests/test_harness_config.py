"""Unit tests for harness configuration and presets.

Tests cover:
- ScenarioConfig validation (model invariants, tuning modes, meshes, rates)
- Flattening of validation errors into ConfigError
- override() and config hashing
- Loading from presets, JSON and TOML files
- HarnessSettings from PSRV_* environment variables
- EmpiricalConfig, NoiseConfig and IngestSettings validation
"""

import json

import pytest

from tests.conftest import make_param_set, make_scenario_config


# ═══════════════════════════════════════════════════════════════════════════════
# Scenario validation
# ═══════════════════════════════════════════════════════════════════════════════


class TestScenarioConfig:
    """Tests for ScenarioConfig built through build()."""

    def test_valid_scenario(self):
        from harness.config import ScenarioConfig, build

        cfg = build(ScenarioConfig, make_scenario_config())
        assert cfg.name == "unit"
        assert cfg.params().rho == -0.2
        assert cfg.layout().seconds_per_day == 21600.0
        assert cfg.noise_spec() is None
        assert cfg.warmup_days is None

    def test_rho_override(self):
        from harness.config import ScenarioConfig, build

        cfg = build(ScenarioConfig, make_scenario_config(rho_override=0.0))
        assert cfg.params().rho == 0.0
        assert cfg.param_set.rho == -0.2

    @pytest.mark.parametrize(
        "overrides,fragment",
        [
            ({"param_set": make_param_set(gamma=2.0)}, "Feller"),
            ({"tuning_mode": "fixed"}, "kappas"),
            ({"kappas": [1.0]}, "fixed mode"),
            ({"price_mesh_seconds": [45.0]}, "multiple"),
            ({"noise": {"zeta": 1.5}}, "sim_mesh_seconds"),
            ({"b": 0.5}, "rates"),
            ({"c": 1.0}, "rates"),
            ({"grid_multiples": [0]}, "grid_multiples"),
            ({"kappas": [-1.0], "tuning_mode": "fixed"}, "kappas"),
            ({"colour": "blue"}, "colour"),
        ],
    )
    def test_invalid(self, overrides, fragment):
        from harness.config import ScenarioConfig, build
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError, match=fragment):
            build(ScenarioConfig, make_scenario_config(**overrides))

    def test_error_names_the_model(self):
        from harness.config import ScenarioConfig, build
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError, match="^invalid my scenario: n_paths"):
            build(ScenarioConfig, make_scenario_config(n_paths=0), "my scenario")

    def test_frozen(self):
        from pydantic import ValidationError

        from harness.config import ScenarioConfig, build

        cfg = build(ScenarioConfig, make_scenario_config())
        with pytest.raises(ValidationError):
            cfg.n_paths = 10

    def test_noise_spec(self):
        from harness.config import ScenarioConfig, build

        cfg = build(ScenarioConfig, make_scenario_config(noise={"v_eta": 1e-8}))
        assert cfg.noise_spec().q_eta == pytest.approx(3e-16)
        silent = build(ScenarioConfig, make_scenario_config(noise={"v_eta": 0.0}))
        assert silent.noise_spec() is None


class TestOverrideAndHash:
    """Tests for override() and config_hash()."""

    def test_override_applies_and_revalidates(self):
        from harness.config import ScenarioConfig, build, override
        from psrv_lab.errors import ConfigError

        cfg = build(ScenarioConfig, make_scenario_config())
        changed = override(cfg, n_paths=9, master_seed=None)
        assert changed.n_paths == 9
        assert changed.master_seed == 7
        with pytest.raises(ConfigError):
            override(cfg, n_paths=-1)

    def test_override_without_changes_is_identity(self):
        from harness.config import ScenarioConfig, build, override

        cfg = build(ScenarioConfig, make_scenario_config())
        assert override(cfg, n_paths=None) is cfg

    def test_hash_is_stable_and_sensitive(self):
        from harness.config import ScenarioConfig, build, override

        cfg = build(ScenarioConfig, make_scenario_config())
        again = build(ScenarioConfig, make_scenario_config())
        assert cfg.config_hash() == again.config_hash()
        assert len(cfg.config_hash()) == 64
        assert override(cfg, master_seed=8).config_hash() != cfg.config_hash()


# ═══════════════════════════════════════════════════════════════════════════════
# Loading
# ═══════════════════════════════════════════════════════════════════════════════


class TestLoading:
    """Tests for presets, read_mapping and load_config."""

    def test_preset_scenarios(self):
        from harness.config import ScenarioConfig, load_config
        from harness.presets import PRESETS

        cfg = load_config("set2_scenario1", ScenarioConfig)
        assert cfg.param_set.alpha == 0.03
        assert cfg.param_set.rho == -0.8
        assert load_config("set3_scenario3_zeta1.5", ScenarioConfig).tuning_mode == "feasible"
        assert load_config("set1_sweep", ScenarioConfig).kappas
        assert load_config("set1_ckls_beta1.5", ScenarioConfig).param_set.beta == 1.5
        assert "thresholds" in PRESETS and "empirical_1min" in PRESETS

    def test_every_preset_is_valid(self):
        from harness.presets import PRESETS

        for name, preset in PRESETS.items():
            assert type(preset).model_validate(preset.model_dump()).model_dump() == preset.model_dump(), name

    def test_preset_of_wrong_type(self):
        from harness.config import ScenarioConfig, load_config
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError, match="ThresholdConfig"):
            load_config("thresholds", ScenarioConfig)

    def test_json_file(self, tmp_path):
        from harness.config import ScenarioConfig, load_config

        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(make_scenario_config(name="from_json")), encoding="utf-8")
        assert load_config(path, ScenarioConfig).name == "from_json"

    def test_toml_file(self, tmp_path):
        from harness.config import ScenarioConfig, load_config

        path = tmp_path / "scenario.toml"
        path.write_text(
            "\n".join(
                [
                    'name = "from_toml"',
                    "n_paths = 3",
                    "days = 2",
                    "sim_mesh_seconds = 60.0",
                    "price_mesh_seconds = [60.0]",
                    "",
                    "[param_set]",
                    "alpha = 0.2",
                    "theta = 5.0",
                    "gamma = 0.5",
                    "nu0 = 0.2",
                ]
            ),
            encoding="utf-8",
        )
        cfg = load_config(path, ScenarioConfig)
        assert cfg.name == "from_toml"
        assert cfg.n_paths == 3

    def test_missing_file(self, tmp_path):
        from harness.config import ScenarioConfig, load_config
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json", ScenarioConfig)

    def test_unparseable_file(self, tmp_path):
        from harness.config import read_mapping
        from psrv_lab.errors import ConfigError

        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="cannot parse"):
            read_mapping(bad)

    def test_top_level_must_be_mapping(self, tmp_path):
        from harness.config import read_mapping
        from psrv_lab.errors import ConfigError

        listed = tmp_path / "list.json"
        listed.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            read_mapping(listed)


# ═══════════════════════════════════════════════════════════════════════════════
# Settings and the remaining models
# ═══════════════════════════════════════════════════════════════════════════════


class TestSettingsAndModels:
    """Tests for HarnessSettings, NoiseConfig, EmpiricalConfig and IngestSettings."""

    def test_settings_from_environment(self, monkeypatch):
        from harness.config import HarnessSettings

        monkeypatch.setenv("PSRV_WORKERS", "3")
        monkeypatch.setenv("PSRV_OUTPUT_FORMAT", "json")
        settings = HarnessSettings()
        assert settings.workers == 3
        assert settings.output_format == "json"
        assert settings.paths_per_task == 8

    def test_settings_default_workers(self, monkeypatch):
        from harness.config import HarnessSettings

        monkeypatch.delenv("PSRV_WORKERS", raising=False)
        assert HarnessSettings().workers >= 1

    def test_noise_needs_exactly_one_field(self):
        from harness.config import NoiseConfig, build
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError):
            build(NoiseConfig, {"zeta": 1.0, "v_eta": 1e-8})
        with pytest.raises(ConfigError):
            build(NoiseConfig, {})

    def test_empirical_fixed_needs_kappa(self):
        from harness.config import EmpiricalConfig, build
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError, match="kappa"):
            build(EmpiricalConfig, {"kappa_mode": "fixed"})
        cfg = build(EmpiricalConfig, {"kappa_mode": "fixed", "kappa": 0.5, "beta": "auto"})
        assert cfg.beta == "auto"

    def test_ingest_session_bounds_go_together(self):
        from harness.config import IngestSettings, build
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError, match="session"):
            build(IngestSettings, {"session_start": "09:30"})

    def test_threshold_rate_bound(self):
        from harness.config import ThresholdConfig, build
        from harness.presets import SET1
        from psrv_lab.errors import ConfigError

        with pytest.raises(ConfigError):
            build(ThresholdConfig, {"param_sets": [SET1.model_dump()], "c": 0.5})
