import pytest

from psfmarket.config import (
    CONFIG_ENV,
    PRESETS_ENV,
    REQUIRED,
    SCHEMA,
    RunConfig,
    parse_config_text,
    preset_names,
    preset_path,
    resolve,
)
from psfmarket.errors import ConfigError


def test_parse_lines_and_comments():
    raw = parse_config_text("# header\n\ncustomer.alpha = 0.5  # trailing\n scenario.kind=customer\n")
    assert raw == {"customer": {"alpha": "0.5"}, "scenario": {"kind": "customer"}}


@pytest.mark.parametrize("text,needle", [
    ("customer.alpha 0.5", "expected 'section.key = value'"),
    ("alpha = 0.5", "expected 'section.key = value'"),
    ("shop.alpha = 1", "unknown section 'shop'"),
    ("customer.beta = 1", "unknown key customer.beta"),
    ("customer.mu = 1\ncustomer.mu = 2", ":2: customer.mu set twice"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ConfigError, match=needle.replace(".", r"\.").replace("(", r"\(")):
        parse_config_text(text, "f.cfg")


def test_schema_defaults_and_types():
    cfg = RunConfig({"customer": {"alpha": "1", "psi": ".1", "mu": ".02"}})
    assert cfg.get("customer", "nu") == SCHEMA["customer"]["nu"][1]
    assert cfg.customer().alpha == 1.0
    assert cfg.get("calibration", "psf_codes")[0] == "5411"
    assert cfg.get("report", "exclude_psf_rows") is False


def test_missing_required_key_is_named():
    with pytest.raises(ConfigError, match="missing required key customer.mu"):
        RunConfig({"customer": {"alpha": "1", "psi": ".1"}}).customer()


def test_bad_value():
    with pytest.raises(ConfigError, match="bad value for scenario.seed"):
        RunConfig({"scenario": {"seed": "seven"}}).get("scenario", "seed")


def test_invalid_parameters_become_config_errors():
    with pytest.raises(ConfigError, match="mu"):
        RunConfig({"customer": {"alpha": "1", "psi": ".1", "mu": "3"}}).customer()


def test_required_keys_have_no_default():
    assert SCHEMA["scenario"]["kind"][1] is REQUIRED


def test_resolution_order(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("scenario.seed = 5\nscenario.horizon = 10\n")
    cfg = resolve("growth-demo", cfg_file, {"scenario": {"seed": "9"}}, env={})
    assert cfg.get("scenario", "seed") == 9          # flag beats file
    assert cfg.get("scenario", "horizon") == 10.0    # file beats preset
    assert cfg.get("scenario", "dt") == 0.05         # preset beats default
    assert cfg.get("scenario", "demand") == "analytic"
    assert cfg.sources == ["preset:growth-demo", str(cfg_file), "flags"]


def test_config_from_environment(tmp_path):
    cfg_file = tmp_path / "env.cfg"
    cfg_file.write_text("output.dir = elsewhere\n")
    assert resolve(env={CONFIG_ENV: str(cfg_file)}).get("output", "dir") == "elsewhere"
    assert resolve(env={}).get("output", "dir") == "out"


def test_unknown_override_rejected():
    with pytest.raises(ConfigError):
        resolve(overrides={"scenario": {"colour": "red"}}, env={})


def test_presets():
    assert {"growth-demo", "consolidation-demo", "balanced-demo"} <= set(preset_names())
    for name in preset_names():
        resolve(name, env={})
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_path("nonesuch")


def test_balanced_preset_is_balanced():
    c = resolve("balanced-demo", env={}).customer()
    assert c.net_growth() == pytest.approx(0, abs=1e-15)


def test_preset_directory_override(tmp_path, monkeypatch):
    (tmp_path / "mine.cfg").write_text("scenario.kind = customer\n")
    monkeypatch.setenv(PRESETS_ENV, str(tmp_path))
    assert preset_names() == ["mine"]


def test_scenario_requires_coupled():
    cfg = resolve("balanced-demo", env={})
    with pytest.raises(ConfigError, match="coupled"):
        cfg.scenario()
    sc = resolve("consolidation-demo", env={}).scenario()
    assert sc.expertise.theta == 4.0 and sc.horizon == 60.0


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        resolve(config_path=tmp_path / "absent.cfg", env={})
