import math

import pytest
from hypothesis import given, strategies as st

from hycasim.perf import (UNUSABLE, LayerSpec, LayerSpecError, aggregate_trials, benchmark_networks,
                          layer_cycles, load_network, network_cycles, network_name,
                          normalized_performance, parse_network_csv, perf_csv_header, perf_csv_row)


def sheet_cycles(layer, R, C):
    """Spreadsheet-style evaluation kept apart from the library code."""
    if layer.kind == "fc":
        folds = -(-layer.m // R)
        return folds * layer.c + R + 1
    oh = (layer.h - layer.k) // layer.stride + 1
    ow = (layer.w - layer.k) // layer.stride + 1
    return (-(-(oh * ow) // R)) * (-(-layer.m // C)) * layer.c * layer.k ** 2 + R + C


def test_worked_example():
    layer = LayerSpec.conv("l", 64, 34, 34, 64, 3)
    assert (layer.oh, layer.ow) == (32, 32)
    assert layer_cycles(layer, 32, 32) == 36_928


def test_single_fold_fit():
    layer = LayerSpec.conv("l", 16, 9, 9, 12, 3, 1)
    R, C = layer.oh * layer.ow, layer.m
    assert layer_cycles(layer, R, C) == 16 * 9 + R + C


def test_fc_single_column():
    fc = LayerSpec.fc("fc", 4096, 1000)
    assert layer_cycles(fc, 32, 32) == 32 * 4096 + 33
    assert len({layer_cycles(fc, 32, c) for c in range(1, 65)}) == 1


@pytest.mark.parametrize("net,count", [("alexnet", 8), ("vgg16", 16), ("yolo", 22), ("resnet18", 21)])
def test_layer_counts(net, count):
    assert len(load_network(net)) == count


@pytest.mark.parametrize("net,total", [("alexnet", 2_526_093), ("vgg16", 19_140_195),
                                       ("yolo", 18_559_968), ("resnet18", 2_151_249)])
def test_full_array_baselines(net, total):
    layers = load_network(net)
    assert sum(sheet_cycles(layer, 32, 32) for layer in layers) == total
    assert network_cycles(layers, 32, 32).total_cycles == total


def test_vgg_monotone_in_cols():
    vgg = load_network("vgg16")
    totals = [network_cycles(vgg, 32, c).total_cycles for c in (8, 16, 24, 32)]
    assert all(a > b for a, b in zip(totals, totals[1:]))


@pytest.mark.parametrize("net", ["alexnet", "vgg16", "yolo", "resnet18"])
def test_one_lost_column_fold_bound(net):
    layers = load_network(net)
    full = network_cycles(layers, 32, 32).total_cycles
    lost = network_cycles(layers, 32, 31).total_cycles
    worst = max(math.ceil(layer.m / 31) / math.ceil(layer.m / 32)
                for layer in layers if layer.kind == "conv")
    assert 1 <= lost / full <= worst


@given(st.integers(1, 64), st.integers(1, 40), st.integers(1, 5), st.integers(1, 3),
       st.integers(1, 70), st.integers(1, 64), st.integers(1, 64))
def test_conv_monotone(c, hw, k, s, m, R, C):
    layer = LayerSpec.conv("l", c, hw + k, hw + k, m, k, s)
    assert layer_cycles(layer, R, C) == sheet_cycles(layer, R, C)
    # more rows or columns never slow a layer down beyond the extra fill cost
    assert layer_cycles(layer, R + 1, C) - 1 <= layer_cycles(layer, R, C)
    assert layer_cycles(layer, R, C + 1) - 1 <= layer_cycles(layer, R, C)


@given(st.integers(1, 64), st.integers(1, 64))
def test_conv_folds_monotone(R, C):
    layer = LayerSpec.conv("l", 32, 30, 30, 100, 3)
    fold = lambda r, c: layer_cycles(layer, r, c) - r - c  # noqa: E731
    assert fold(R + 1, C) <= fold(R, C) and fold(R, C + 1) <= fold(R, C)


def test_layer_validation():
    with pytest.raises(LayerSpecError):
        LayerSpec.conv("bad", 3, 2, 2, 4, 3)
    with pytest.raises(LayerSpecError):
        LayerSpec("bad", "pool", 1, 1, 1, 1)
    with pytest.raises(LayerSpecError):
        LayerSpec("bad", "fc", 4, 2, 2, 4)
    with pytest.raises(LayerSpecError):
        LayerSpec.conv("bad", 0, 4, 4, 4, 1)
    with pytest.raises(ValueError):
        layer_cycles(LayerSpec.fc("fc", 4, 4), 0, 4)


def test_csv_parsing(tmp_path):
    text = "# net\n\nname,kind,c,h,w,m,k,stride\nc1,conv,3,6,6,8,3,1\n\nfc,fc,8,1,1,2,1,1\n"
    layers = parse_network_csv(text)
    assert [l.name for l in layers] == ["c1", "fc"]
    p = tmp_path / "tiny.csv"
    p.write_text(text)
    assert load_network(str(p)) == layers
    assert network_name(str(p)) == "tiny"
    assert network_name("VGG") == "vgg16"
    for bad in ("", "name,kind\nx,conv\n", "name,kind,c,h,w,m,k,stride\nx,conv,3,6,6\n",
                "name,kind,c,h,w,m,k,stride\nx,conv,a,6,6,8,3,1\n"):
        with pytest.raises(LayerSpecError):
            parse_network_csv(bad)


def test_benchmark_networks():
    assert set(benchmark_networks()) == {"alexnet", "vgg16", "yolo", "resnet18"}


def test_unusable_sentinel():
    rep = network_cycles(load_network("alexnet"), 32, 0)
    assert rep.total_cycles == UNUSABLE and not rep.usable


def test_dedup_equals_direct():
    net = load_network("resnet18")
    surviving = [32, 31, 32, 0, 17, 17, 32, 5, 0, 31]
    agg = aggregate_trials(net, 32, 32, surviving)
    full = network_cycles(net, 32, 32).total_cycles
    speeds = [0.0 if s == 0 else full / network_cycles(net, 32, s).total_cycles for s in surviving]
    assert agg.mean_speed == pytest.approx(sum(speeds) / len(speeds), rel=1e-15)
    assert agg.unique_dims == 5 and agg.unusable_fraction == 0.2
    assert agg.mean_cycles == UNUSABLE
    usable = [s for s in surviving if s]
    agg2 = aggregate_trials(net, 32, 32, usable)
    direct = sum(network_cycles(net, 32, s).total_cycles for s in usable) / len(usable)
    assert agg2.mean_cycles == pytest.approx(direct, rel=1e-15)
    with pytest.raises(ValueError):
        aggregate_trials(net, 32, 32, [])


def test_normalization():
    net = load_network("alexnet")
    reps = {s: aggregate_trials(net, 32, 32, [32] * 4) for s in ("rr", "cr", "dr", "hyca")}
    assert set(normalized_performance(reps).values()) == {1.0}
    reps["rr"] = aggregate_trials(net, 32, 32, [0, 0])
    ratios = normalized_performance(reps)
    assert ratios["rr"] == 1.0 and ratios["hyca"] == math.inf


def test_perf_csv():
    rep = aggregate_trials(load_network("alexnet"), 32, 32, [32])
    assert perf_csv_header() == "network,scheme,per,mean_cycles,normalized"
    assert perf_csv_row("alexnet", "dr", 0.01, rep, 1.0) == "alexnet,dr,0.01,2526093.000,1.000000"
    rep0 = aggregate_trials(load_network("alexnet"), 32, 32, [0])
    assert perf_csv_row("alexnet", "rr", 0.06, rep0, 1.0).split(",")[3] == "inf"
