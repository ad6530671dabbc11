import pytest
import yaml
from hypothesis import given, strategies as st

from deckinspect.config import SurveyConfig, load_defaults, merge, parse_override
from deckinspect.errors import ConfigError


def test_defaults_build_every_section():
    cfg = SurveyConfig.from_sources()
    assert cfg.deck().width == 6.1
    assert cfg.plan().n_lanes == 3
    assert cfg.controller().lam == 0.05
    assert cfg.physics().c_p == 4000.0
    assert cfg.crack_params().linking.window == 21
    assert cfg.camera().across_m == pytest.approx(1.83)


def test_round_trip():
    cfg = SurveyConfig.from_sources(overrides=[{"seed": 11, "deck": {"width_m": 7.5}}])
    back = SurveyConfig.loads(cfg.dumps())
    assert back.data == cfg.data
    assert back.sha256 == cfg.sha256


@given(st.integers(0, 2**31), st.floats(2.5, 30), st.sampled_from(["stop-move", "non-stop"]))
def test_round_trip_property(seed, width, mode):
    cfg = SurveyConfig.from_sources(overrides=[{"seed": seed, "deck": {"width_m": width}, "mission": {"mode": mode}}])
    assert SurveyConfig.loads(cfg.dumps()).data == cfg.data


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as e:
        SurveyConfig.from_sources(overrides=[{"deck": {"bogus": 1}}])
    assert e.value.field == "deck.bogus"
    with pytest.raises(ConfigError):
        merge(load_defaults(), {"nonsense": {}})


def test_field_level_validation():
    with pytest.raises(ConfigError) as e:
        SurveyConfig.from_sources(overrides=[{"deck": {"length_m": 0}}])
    assert e.value.field == "deck.length_m"
    with pytest.raises(ConfigError):
        SurveyConfig.from_sources(overrides=[{"mission": {"dwell_time_s": "long"}}])
    with pytest.raises(ConfigError):
        SurveyConfig.from_sources(overrides=[{"mission": {"mode": "hover"}}])


def test_override_parsing_and_file_layering(tmp_path):
    assert parse_override("deck.width_m=7") == {"deck": {"width_m": 7}}
    assert parse_override("crack.tau=12.5") == {"crack": {"tau": 12.5}}
    with pytest.raises(ConfigError):
        parse_override("deck.width_m")
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"deck": {"width_m": 9.0}, "seed": 3}))
    cfg = SurveyConfig.from_sources(path, [{"seed": 4}])
    assert cfg.deck().width == 9.0 and cfg.seed == 4
