import pytest

from timebin_teleport.config import build_config, parse_config_text, parse_grid, preset_text
from timebin_teleport.errors import ConfigurationError


def test_grids():
    assert parse_grid("0:1:3") == (0.0, 0.5, 1.0)
    assert parse_grid("1e-3:1e-1:log3") == pytest.approx((1e-3, 1e-2, 1e-1))
    assert parse_grid("0.1, 0.2") == (0.1, 0.2)
    for bad in ("", "1:2", "a,b", "0:1:log3", " , "):
        with pytest.raises(ConfigurationError):
            parse_grid(bad)


def test_preset_loads_with_case_preserved():
    cfg = build_config(preset="paper")
    assert cfg.params.mu_A == 2.6e-3
    assert cfg.params.dark_prob == pytest.approx(2.5 * 800e-12)
    assert cfg.scenario == "teleport-x"
    assert "mu_A" in preset_text("paper")


def test_later_sources_win(tmp_path):
    f = tmp_path / "a.ini"
    f.write_text("[run]\nscenario = hom\n[params]\nzeta = 0.5\n[sweep]\nmu_A = 1e-3, 2e-3\n")
    cfg = build_config([f], preset="paper", overrides=["zeta=0.7"], sweeps=["eta_i=0.1,0.2"])
    assert cfg.scenario == "hom"
    assert cfg.params.zeta == 0.7
    assert dict(cfg.sweeps) == {"mu_A": (1e-3, 2e-3), "eta_i": (0.1, 0.2)}


def test_digest_is_stable_and_sensitive():
    a = build_config(preset="paper", seed=1)
    assert a.digest() == build_config(preset="paper", seed=1).digest()
    assert a.digest() != build_config(preset="paper", seed=2).digest()


@pytest.mark.parametrize(
    "text,match",
    [
        ("[params]\nmu_A = 1e-3\nzeta = 2.0\n", r"bad\.ini:3: zeta"),
        ("[params]\nnope = 1\n", r"bad\.ini:2: unknown parameter"),
        ("[params]\nmu_A = abc\n", r"bad\.ini:2: bad value"),
        ("[sweep]\n\nzeta = 0:2:3\n", r"bad\.ini:3: sweep value"),
        ("[sweep]\nzeta = 0:1\n", r"bad\.ini:2: malformed"),
        ("[run]\nfoo = 1\n", r"bad\.ini:2: unknown run option"),
        ("[other]\nx = 1\n", "unknown section"),
        ("[params]\ndark_rate_hz = 5\ndark_prob = 1e-9\n", "not both"),
    ],
)
def test_errors_name_file_and_line(tmp_path, text, match):
    f = tmp_path / "bad.ini"
    f.write_text(text)
    with pytest.raises(ConfigurationError, match=match):
        build_config([f])


def test_missing_file_and_bad_flags(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        build_config([tmp_path / "missing.ini"])
    with pytest.raises(ConfigurationError):
        build_config(overrides=["zeta"])
    with pytest.raises(ConfigurationError):
        build_config(scenario="nope")
    with pytest.raises(ConfigurationError):
        build_config(sweeps=["input_state=1,2"])


def test_inline_comments():
    sec = parse_config_text("[params]\nzeta = 0.8  # tuned\n")
    assert sec["params"] == [("zeta", "0.8")]
