import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frackin import cli
from frackin.config import REFERENCE_INI, load_config, parse_config, reference_config, valid_keys
from frackin.errors import InvalidInputError


def test_reference_config(ref_cfg):
    assert ref_cfg.eps_list == (0.2, 0.1, 0.05)
    assert ref_cfg["grid.transport"] == "exact"
    assert ref_cfg["grid.Y_max"] == "auto"
    assert ref_cfg.coefficients().lambda_plateau == 2.0
    assert ref_cfg.admissibility().ok


def test_missing_physics_has_no_default():
    text = REFERENCE_INI.replace("sigma = 1.5\n", "")
    with pytest.raises(InvalidInputError, match="coefficients.sigma"):
        parse_config(text)


@pytest.mark.parametrize("text, pattern", [
    (REFERENCE_INI + "\n[extras]\nfoo = 1\n", "unknown section"),
    (REFERENCE_INI.replace("[grid]\n", "[grid]\nnx = 64\n"), "unknown key grid.nx"),
    (REFERENCE_INI.replace("Nx = 128", "Nx = 12.5"), "cannot parse"),
    (REFERENCE_INI.replace("id = E1", "id = E9"), "experiment.id"),
    (REFERENCE_INI.replace("eps = 0.2, 0.1, 0.05", "eps = 0.2, -0.1"), "scaling.eps"),
])
def test_bad_input_rejected(text, pattern):
    with pytest.raises(InvalidInputError, match=pattern) as info:
        parse_config(text)
    if "unknown" in pattern:
        assert "valid keys" in str(info.value) and "grid.Nx" in str(info.value)


def test_overrides(ref_cfg):
    cfg = ref_cfg.with_overrides(["grid.Nx=64", "scaling.eps=0.1"])
    assert cfg["grid.Nx"] == 64 and cfg.eps_list == (0.1,)
    with pytest.raises(InvalidInputError, match="unknown key"):
        ref_cfg.with_overrides(["grid.bogus=1"])
    with pytest.raises(InvalidInputError):
        ref_cfg.with_overrides(["Nx=64"])


def test_inadmissible_set_still_parses():
    cfg = reference_config(["coefficients.s_exp=1.2"])
    rep = cfg.admissibility()
    assert not rep.ok and rep.names == {"s*beta > beta + sigma - 1"}


floats = st.floats(0.01, 100.0, allow_nan=False, allow_infinity=False)


@given(floats, floats, st.integers(8, 512), st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=5))
@settings(max_examples=60, deadline=None)
def test_ini_round_trip(T, L, Nx, eps):
    cfg = reference_config([f"run.T={T!r}", f"grid.L={L!r}", f"grid.Nx={Nx}",
                            "scaling.eps=" + ", ".join(repr(e) for e in eps)])
    back = parse_config(cfg.to_ini())
    assert back.values == cfg.values


# -- CLI ---------------------------------------------------------------------
@pytest.fixture
def ini(tmp_path):
    p = tmp_path / "ref.ini"
    p.write_text(REFERENCE_INI)
    return p


def test_cli_validate(ini, capsys):
    assert cli.main(["validate", "--config", str(ini)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ok mu=0.75 nu=0.373110254138 B0=5.50063763511")


def test_cli_validate_inadmissible(ini, capsys):
    assert cli.main(["validate", "--config", str(ini), "--set", "coefficients.s_exp=1.2"]) == 1
    out = capsys.readouterr().out
    assert "s*beta > beta + sigma - 1" in out and "2.4" in out and "2.5" in out


def test_cli_constants(ini, capsys):
    assert cli.main(["constants", "--config", str(ini)]) == 0
    out = capsys.readouterr().out
    assert "c1(alpha=-0.5, beta1=2) = 2.05234430595" in out
    assert "nu = 0.373110254138" in out
    assert "C_minus = 10" in out


@pytest.mark.parametrize("argv", [
    ["validate", "--config", "/nonexistent.ini"],
    ["validate"],
    ["frobnicate"],
])
def test_cli_input_errors(argv, capsys):
    assert cli.main(argv) == 2


def test_cli_unknown_key_lists_valid_keys(ini, capsys):
    assert cli.main(["validate", "--config", str(ini), "--set", "grid.bogus=1"]) == 2
    err = capsys.readouterr().err
    assert "valid keys" in err and "run.seed" in err


def test_cli_seed_and_threads(ini, monkeypatch):
    seen = {}
    orig = cli.load_config

    def spy(path, overrides=()):
        cfg = orig(path, overrides)
        seen["cfg"] = cfg
        return cfg

    monkeypatch.setattr(cli, "load_config", spy)
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.main(["validate", "--config", str(ini), "--seed", "42"]) == 0
    assert seen["cfg"]["run.seed"] == 42 and seen["cfg"]["run.threads"] == 3
    assert cli.main(["validate", "--config", str(ini), "--threads", "2"]) == 0
    assert seen["cfg"]["run.threads"] == 2
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    assert cli.main(["validate", "--config", str(ini)]) == 2
    monkeypatch.delenv(cli.THREADS_ENV)
    assert cli.main(["validate", "--config", str(ini), "--seed", "-1"]) == 2


def test_cli_fractional_and_report(ini, tmp_path, capsys):
    out = tmp_path / "frac"
    assert cli.main(["fractional", "--config", str(ini), "--out", str(out)]) == 0
    assert (out / "manifest.txt").is_file()
    assert cli.main(["report", "--out", str(out), "--verify"]) == 0
    assert "rebuild reproduces all hashes" in capsys.readouterr().out
    # tamper with an output: report flags the hash mismatch
    target = next((out / "fields").iterdir())
    target.write_text(target.read_text() + "\n")
    assert cli.main(["report", "--out", str(out)]) == 1
    assert cli.main(["report", "--out", str(tmp_path / "nothing")]) == 2


def test_load_config_missing(tmp_path):
    with pytest.raises(InvalidInputError):
        load_config(tmp_path / "no.ini")
    assert "coefficients.sigma" in valid_keys() and len(valid_keys()) == len(set(valid_keys()))
