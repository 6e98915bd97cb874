import math

import pytest
from hypothesis import given, strategies as st

from hycasim.config import (ArrayConfig, ConfigError, GROUPED, PECoord, check_config,
                            config_from_mapping, derive_sizing, dppu_layout, dppu_unit_counts,
                            dump_config, index_bits, load_config, parse_array, parse_kv_text,
                            validate_config)


def test_defaults():
    cfg = ArrayConfig()
    assert (cfg.rows, cfg.cols, cfg.dppu_size, cfg.dppu_group_size) == (32, 32, 32, 8)
    assert cfg.pe_bits == 64
    assert cfg.delay_d == cfg.cols
    assert cfg.dppu_structure == GROUPED
    assert validate_config(cfg) == []


def test_default_sizing():
    s = derive_sizing(ArrayConfig())
    assert s.wrf_irf_depth == 2048
    assert s.clb_bytes == 512
    assert (s.fpt_entries, s.fpt_bits_per_entry) == (32, 10)
    assert s.fpt_total_bits == 320


def test_degenerate_sizing():
    s = derive_sizing(ArrayConfig(rows=1, cols=1, delay_d=1))
    assert s.wrf_irf_depth == 2
    assert s.clb_bytes == 16
    assert (s.fpt_row_bits, s.fpt_col_bits) == (1, 1)


def test_sizing_64():
    # independent arithmetic: 2 * 64 * 64 and 4 * 4 * 64
    s = derive_sizing(ArrayConfig(rows=64, cols=64))
    assert s.wrf_irf_depth == 8192
    assert s.clb_bytes == 1024
    assert s.fpt_bits_per_entry == 12


def test_validation_reports_every_error():
    cfg = ArrayConfig(cols=32, delay_d=16, dppu_group_size=0, rows=0)
    errors = validate_config(cfg)
    assert "delay_d < cols" in errors
    assert "group size must be >= 1" in errors
    assert "rows must be >= 1" in errors
    with pytest.raises(ConfigError) as exc:
        derive_sizing(cfg)
    assert len(exc.value.errors) == 3


def test_unknown_structure_rejected():
    assert validate_config(ArrayConfig(dppu_structure="ring"))


@pytest.mark.parametrize("n,bits", [(1, 1), (2, 1), (3, 2), (32, 5), (33, 6), (128, 7)])
def test_index_bits(n, bits):
    assert index_bits(n) == bits


@given(st.integers(1, 256), st.integers(1, 256), st.integers(1, 8))
def test_sizing_identities(rows, cols, w):
    cfg = ArrayConfig(rows=rows, cols=cols, accum_width_w=w)
    s = derive_sizing(cfg)
    assert s.clb_bytes // (4 * w) == cols
    assert s.wrf_irf_depth // (2 * rows) == cols
    assert s.fpt_row_bits == max(1, math.ceil(math.log2(rows)))
    assert derive_sizing(cfg) == s


def test_replace_keeps_delay_tied_to_cols():
    cfg = ArrayConfig().replace(cols=16)
    assert cfg.delay_d == 16
    pinned = ArrayConfig(delay_d=40).replace(cols=16)
    assert pinned.delay_d == 40


def test_pecoord_order_and_unpack():
    assert sorted([PECoord(1, 0), PECoord(0, 3)]) == [PECoord(0, 3), PECoord(1, 0)]
    r, c = PECoord(4, 5)
    assert (r, c) == (4, 5)


def test_kv_roundtrip(tmp_path):
    cfg = ArrayConfig(rows=16, cols=8, dppu_size=24, dppu_structure="unified")
    path = tmp_path / "a.cfg"
    path.write_text("# comment\n" + dump_config(cfg))
    assert load_config(path) == cfg


def test_kv_errors():
    with pytest.raises(ConfigError, match="unknown config key"):
        config_from_mapping({"rowz": "3"})
    with pytest.raises(ConfigError, match="duplicate"):
        parse_kv_text("rows=1\nrows=2\n")
    with pytest.raises(ConfigError, match="expected key=value"):
        parse_kv_text("rows 1\n")
    with pytest.raises(ConfigError, match="integer"):
        config_from_mapping({"rows": "x"})
    with pytest.raises(ConfigError, match="delay_d < cols"):
        config_from_mapping({"delay_d": "8"})


def test_parse_array():
    assert parse_array("32x16") == (32, 16)
    for bad in ("32", "0x4", "axb"):
        with pytest.raises(ConfigError):
            parse_array(bad)


def test_dppu_layout_default():
    groups = dppu_layout(ArrayConfig())
    assert [g.size for g in groups] == [8, 8, 8, 8]
    # 8 multipliers -> two rings of 4+1; 7 adders -> rings of 3+1, 3+1, 1+1
    assert [len(r) for r in groups[0].mult_rings] == [5, 5]
    assert [len(r) for r in groups[0].adder_rings] == [4, 4, 2]
    assert dppu_unit_counts(ArrayConfig()) == (40, 40)
    flat = [u for g in groups for r in g.mult_rings for u in r]
    assert flat == list(range(40))


def test_dppu_layout_partial_group():
    groups = dppu_layout(ArrayConfig(dppu_size=20))
    assert [g.size for g in groups] == [8, 8, 4]
    assert [len(r) for r in groups[2].adder_rings] == [4]


def test_check_config_passthrough():
    cfg = ArrayConfig()
    assert check_config(cfg) is cfg
