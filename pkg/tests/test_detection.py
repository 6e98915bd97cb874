import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hycasim.config import ArrayConfig, PECoord
from hycasim.detection import (DetectionConfig, capacity_while_scanning, coverage_csv_header,
                               coverage_csv_row, detection_coverage, detection_rate, layer_covered,
                               scan_array, scan_cycles, update_fpt)
from hycasim.emulator import ArrayState, StuckMask, random_stuck_mask
from hycasim.faults import FaultMap
from hycasim.perf import LayerSpec, layer_cycles, load_network

CFG8 = ArrayConfig(rows=4, cols=4, dppu_size=4, dppu_group_size=4)


def _tensors(seed, c=3, h=6, m=4):
    rng = np.random.default_rng(seed)
    return (rng.integers(-128, 128, (c, h, h), dtype=np.int8),
            rng.integers(-128, 128, (m, c, 3, 3), dtype=np.int8))


def test_scan_cycles():
    assert scan_cycles(32, 32) == 1056
    assert scan_cycles(1, 1) == 2


def test_scan_time_independent_of_group():
    inp, w = _tensors(0)
    state = ArrayState(CFG8, inp, w, {})
    times = {scan_array(CFG8, DetectionConfig.for_array(CFG8, reserved_group_size=s), state).scan_cycles
             for s in (1, 2, 4, 8)}
    assert times == {scan_cycles(4, 4)}


def test_fault_free_scan():
    inp, w = _tensors(1)
    res = scan_array(CFG8, DetectionConfig.for_array(CFG8), ArrayState(CFG8, inp, w, {}))
    assert res.detected == frozenset() and res.fpt_after == ()
    assert res.checks == 16


def test_detects_accumulator_fault():
    inp, w = _tensors(2)
    pe = PECoord(1, 2)
    # bit 0 stuck at 1 breaks the sum as soon as the window adds an even product
    masks = {pe: StuckMask.from_bits([("accumulator", 0, 1)])}
    state = ArrayState(CFG8, inp, w, masks)
    bar = state.accumulator(1, 2, 0)
    ar = state.accumulator(1, 2, 4)
    pr = state.clean_partial(1, 2, 0, 4)
    assert ar != bar + pr
    res = scan_array(CFG8, DetectionConfig.for_array(CFG8), state)
    assert res.detected == {pe}
    assert res.fpt_after == (pe,)


def test_window_dependence():
    # an input bit stuck at its current value is invisible in that window
    inp = np.zeros((1, 4, 4), dtype=np.int8)
    w = np.ones((4, 1, 3, 3), dtype=np.int8)
    pe = PECoord(0, 0)
    masks = {pe: StuckMask.from_bits([("input", 3, 0)])}
    state = ArrayState(CFG8, inp, w, masks)
    assert not scan_array(CFG8, DetectionConfig.for_array(CFG8), state).detected
    inp2 = inp.copy()
    inp2[0, 0, 0] = 8
    state = ArrayState(CFG8, inp2, w, masks)
    assert scan_array(CFG8, DetectionConfig.for_array(CFG8), state).detected == {pe}
    # a window that skips the disturbed operand misses the fault
    late = DetectionConfig.for_array(CFG8, window_offset=1)
    assert not scan_array(CFG8, late, state).detected


@settings(max_examples=60)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(0, 6))
def test_no_false_positives(seed, n_faults, offset):
    rng = np.random.default_rng(seed)
    inp, w = _tensors(seed)
    cells = rng.choice(CFG8.n_pes, n_faults, replace=False)
    faulty = {PECoord(int(i) // 4, int(i) % 4) for i in cells}
    masks = {p: random_stuck_mask(rng, int(rng.integers(1, 4))) for p in faulty}
    det = DetectionConfig.for_array(CFG8, window_offset=offset)
    res = scan_array(CFG8, det, ArrayState(CFG8, inp, w, masks))
    assert res.detected <= faulty
    assert set(res.fpt_after) | set(res.overflow) == res.detected


def test_fpt_overflow_keeps_leftmost():
    kept, dropped = update_fpt([(0, 3)], [(5, 0), (1, 2), (2, 2)], 3)
    assert kept == (PECoord(5, 0), PECoord(1, 2), PECoord(2, 2))
    assert dropped == (PECoord(0, 3),)


def test_scan_overflow_reported():
    cfg = ArrayConfig(rows=4, cols=4, dppu_size=1, dppu_group_size=1)
    inp = np.ones((1, 6, 6), dtype=np.int8)
    w = np.ones((4, 1, 3, 3), dtype=np.int8)
    # a weight register stuck at zero turns every product into 0, while PR counts them
    dead = StuckMask.from_bits([("weight", b, 0) for b in range(8)])
    masks = {PECoord(0, 3): dead, PECoord(2, 1): dead}
    res = scan_array(cfg, DetectionConfig.for_array(cfg), ArrayState(cfg, inp, w, masks))
    assert res.detected == set(masks)
    assert res.fpt_after == (PECoord(2, 1),) and res.overflow == (PECoord(0, 3),)


def test_detection_config():
    det = DetectionConfig.for_array(ArrayConfig())
    assert det.reserved_group_size == 8
    assert det.clb_bytes == 512
    assert det.clb_entries == 2 * 2 * 32
    with pytest.raises(ValueError):
        DetectionConfig(reserved_group_size=0)
    with pytest.raises(ValueError):
        DetectionConfig(window_offset=-1)


def test_detection_rate_between_zero_and_one():
    inp, w = _tensors(3, c=4, h=8)
    rate = detection_rate(CFG8, DetectionConfig.for_array(CFG8), inp, w, trials=40, seed=1)
    assert 0.0 < rate < 1.0
    assert rate == detection_rate(CFG8, DetectionConfig.for_array(CFG8), inp, w, trials=40, seed=1)


def test_capacity_while_scanning():
    cfg = ArrayConfig()
    assert capacity_while_scanning(cfg) == 24
    dead = FaultMap(32, 32, frozenset(), frozenset({0, 1}))
    assert capacity_while_scanning(cfg, fault_map=dead) == 16
    assert capacity_while_scanning(ArrayConfig(dppu_size=8)) == 0


def test_coverage_boundary():
    layer = LayerSpec.conv("l", 8, 34, 34, 32, 3)
    assert layer_cycles(layer, 32, 32) == 32 * 72 + 64
    rows = cols = 32
    for layer in (LayerSpec.fc("a", 1056 - 33, 1), LayerSpec.fc("b", 1056 - 32, 1)):
        covered = layer_cycles(layer, rows, cols) >= scan_cycles(rows, cols)
        assert layer_covered(layer, rows, cols) == covered
    # exactly one cycle short
    short = LayerSpec.fc("s", 1056 - 34, 1)
    assert layer_cycles(short, rows, cols) == 1055
    assert not layer_covered(short, rows, cols)


@pytest.mark.parametrize("net,total", [("alexnet", 8), ("vgg16", 16), ("yolo", 22),
                                       ("resnet18", 21)])
def test_full_coverage_at_32(net, total):
    cov = detection_coverage(ArrayConfig(), load_network(net), net)
    assert (cov.layers_covered, cov.layers_total) == (total, total)
    assert cov.fraction == 1.0


def test_coverage_csv():
    cov = detection_coverage(ArrayConfig(rows=128, cols=128), load_network("alexnet"), "alexnet")
    assert coverage_csv_header() == "network,array,layers_total,layers_covered"
    assert coverage_csv_row(cov) == "alexnet,128x128,8,4"
