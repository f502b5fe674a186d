from __future__ import annotations

from fractions import Fraction

import pytest

from wlseno.config import RunConfig, parse_config_text, read_config


def test_parse_types_and_comments(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# settings\n"
        "degree = 3\n"
        "cfl = 1/2   # fraction accepted\n"
        "characteristic = off\n"
        "stencil-size-1d = 9\n"
        "char_frame = cell\n"
        "t_final = none\n"
        "\n"
    )
    cfg = read_config(path)
    assert cfg.degree == 3
    assert cfg.cfl == 0.5
    assert cfg.characteristic is False
    assert cfg.stencil_size_1d == 9
    assert cfg.char_frame == "cell"
    assert cfg.t_final is None


def test_unknown_key_and_bad_line():
    with pytest.raises(ValueError, match="unknown key"):
        parse_config_text("speed = 3")
    with pytest.raises(ValueError, match="key = value"):
        parse_config_text("degree 3")
    with pytest.raises(ValueError, match="boolean"):
        parse_config_text("rebalance = maybe")


def test_overrides_skip_none():
    cfg = RunConfig(degree=2, cfl=0.4).with_overrides(degree=None, cfl=0.3)
    assert (cfg.degree, cfg.cfl) == (2, 0.3)


def test_recon_config_passthrough():
    rc = RunConfig(epsilon=0.5, max_depth=2.5, char_frame="cell").recon(3, stencil_size_1d=9)
    assert rc.degree == 3
    assert rc.epsilon == 0.5
    assert rc.max_depth == Fraction(5, 2)
    assert rc.stencil_size_1d == 9
    assert rc.char_frame == "cell"
    assert rc.rule_degree == 4
