"""配置解析与环境默认值测试"""
from pathlib import Path

import pytest

from torus2poles.config import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    get_settings,
    load_config,
    parse_classes,
    parse_config_text,
    parse_pairs,
    parse_point,
)
from torus2poles.errors import EXIT_CONFIG_ERROR, ConfigError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

VALID = """
[experiment]
name = distance
seed = 7

[profile]
kind = theorem_plateau
epsilon = 0.25   # 平台宽度 0.75

[distance]
pairs = 0,0.5 -> 3,1.5; 0,0 -> 2,0.3

[lattice]
classes = 1,0; 3,1
"""


def test_defaults():
    config = ExperimentConfig()
    assert config.experiment.name == "selftest"
    assert config.solver.method == "DOP853"
    assert config.solver.rtol == config.solver.atol == 1e-12
    assert config.pole.point == (0.0, 0.5)


def test_parse_valid_text():
    config = parse_config_text(VALID)
    assert config.experiment.name == "distance"
    assert config.experiment.seed == 7
    assert config.profile.epsilon == 0.25
    assert config.distance.pairs == (((0.0, 0.5), (3.0, 1.5)), ((0.0, 0.0), (2.0, 0.3)))
    assert config.lattice.classes == ((1, 0), (3, 1))


def test_unknown_key_reports_position():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[pole]\nhorizon = 10\nhorizn = 3\n", source="bad.cfg")
    assert info.value.diagnostics[0].startswith("bad.cfg:3:1:")
    assert info.value.exit_code == EXIT_CONFIG_ERROR


def test_unknown_section():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[experiment]\nname = classify\n\n[poles]\nhorizon = 3\n", source="x.cfg")
    assert info.value.diagnostics[0].startswith("x.cfg:4:1:")


def test_invalid_values():
    with pytest.raises(ConfigError):
        parse_config_text("[profile]\nkind = cosine\na = 0.3\nb = 0.5\n")
    with pytest.raises(ConfigError):
        parse_config_text("[profile]\nepsilon = 1.0\n")
    with pytest.raises(ConfigError):
        parse_config_text("[lattice]\nclasses = 1,0; 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("[experiment]\nname = everything\n")


def test_missing_section_header():
    with pytest.raises(ConfigError) as info:
        parse_config_text("kind = constant\n", source="h.cfg")
    assert info.value.diagnostics[0].startswith("h.cfg:1:1:")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_value_parsers():
    assert parse_point(" 1.5, -2 ") == (1.5, -2.0)
    assert parse_classes("1,0; 5 3") == ((1, 0), (5, 3))
    assert parse_pairs("0,0 -> 1,0") == (((0.0, 0.0), (1.0, 0.0)),)
    with pytest.raises(ValueError):
        parse_point("1,2,3")
    with pytest.raises(ValueError):
        parse_pairs("0,0 1,0")


def test_overrides():
    config = parse_config_text(VALID)
    moved = config.with_overrides(name="classify", seed=3, output_dir=Path("elsewhere"))
    assert (moved.experiment.name, moved.experiment.seed) == ("classify", 3)
    assert moved.experiment.output_dir == Path("elsewhere")
    assert config.with_overrides() is config
    with pytest.raises(ConfigError):
        config.with_overrides(name="nothing")


def test_selftest_case_list():
    assert parse_config_text("[selftest]\ncases = all\n").selftest.case_list is None
    config = parse_config_text("[selftest]\ncases = class-a, flat-distance\n")
    assert config.selftest.case_list == ["class-a", "flat-distance"]


def test_environment_settings(monkeypatch):
    monkeypatch.setenv("T2P_SEED", "11")
    monkeypatch.setenv("T2P_THREADS", "3")
    settings = get_settings()
    assert settings.seed == 11
    assert settings.is_parallel


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    config = load_config(path)
    assert config.experiment.name in EXPERIMENT_NAMES


def test_non_utf8_file(tmp_path):
    path = tmp_path / "latin1.cfg"
    path.write_bytes("[profile]\nkind = constant\n# température\n".encode("latin-1"))
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.exit_code == EXIT_CONFIG_ERROR
    assert "UTF-8" in str(info.value.diagnostics)
