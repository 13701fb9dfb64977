import dataclasses

import pytest

from rachcap.config import SystemConfig, load_config


def test_defaults():
    cfg = SystemConfig()
    assert cfg.d == 54
    assert cfg.delta_rao == 5
    assert cfg.m == 9
    assert cfg.mu == 3
    assert cfg.w_c == 20
    assert cfg.t_rar == 5
    assert cfg.t_crt == 48
    assert cfg.t_enb_proc == 3
    assert cfg.t_ue_proc == 3


def test_derived_quantities():
    cfg = SystemConfig()
    assert cfg.t_d == 15                      # mu * t_rar
    assert cfg.tau_q == pytest.approx(15 - 1 / 3)


def test_frozen():
    cfg = SystemConfig()
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.d = 10


@pytest.mark.parametrize(
    "kwargs",
    [
        {"d": 0},
        {"delta_rao": 0},
        {"delta_rao": 21},
        {"m": -1},
        {"mu": 0},
        {"w_c": 0},
        {"t_rar": 0},
        {"t_crt": 5, "t_rar": 5},   # contention deadline must exceed rar window
        {"t_enb_proc": -1},
        {"t_ue_proc": -1},
    ],
)
def test_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SystemConfig(**kwargs)


def test_load_config_roundtrip(tmp_path):
    p = tmp_path / "sys.cfg"
    p.write_text(
        "# comment line\n"
        "d = 20\n"
        "delta_rao=1   # trailing comment\n"
        "\n"
        "m = 0\n"
    )
    cfg = load_config(p)
    assert cfg.d == 20
    assert cfg.delta_rao == 1
    assert cfg.m == 0
    assert cfg.mu == 3          # untouched default


def test_load_config_overlays_base(tmp_path):
    p = tmp_path / "sys.cfg"
    p.write_text("t_rar = 10\n")
    base = SystemConfig(delta_rao=1)
    cfg = load_config(p, base)
    assert cfg.t_rar == 10
    assert cfg.delta_rao == 1


def test_load_config_rejects_unknown_key(tmp_path):
    p = tmp_path / "sys.cfg"
    p.write_text("nonsense = 3\n")
    with pytest.raises(ValueError, match="nonsense"):
        load_config(p)


def test_load_config_rejects_malformed_line(tmp_path):
    p = tmp_path / "sys.cfg"
    p.write_text("d 54\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "absent.cfg")
