"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case runs the same inputs through both backends, checks the results
agree, and reports the best time per call and the speedup.
"""
import argparse
import timeit

import numpy as np

from hycasim import kernels
from hycasim.config import ArrayConfig
from hycasim.emulator import array_conv, mask_tables, random_stuck_mask
from hycasim.faults import FaultModelParams, gen_faults
from hycasim.repair import CR, DR, RR, surviving_cols


def repair_case(per, n_maps=50):
    cfg = ArrayConfig()
    maps = [gen_faults(cfg, FaultModelParams("random", per), s).arrays() for s in range(n_maps)]

    def run(backend):
        return [surviving_cols(scheme, cfg, fr, fc, 0, backend)
                for fr, fc in maps for scheme in (RR, CR, DR)]
    return f"repair rr/cr/dr x{n_maps} maps, per={per}", run


def conv_case():
    rng = np.random.default_rng(0)
    cfg = ArrayConfig(rows=16, cols=16)
    inp = rng.integers(-128, 128, (16, 18, 18), dtype=np.int8)
    w = rng.integers(-128, 128, (32, 16, 3, 3), dtype=np.int8)
    masks = {(r, r): random_stuck_mask(rng, 2) for r in range(8)}

    def run(backend):
        return array_conv(inp, w, cfg, masks, backend=backend).output
    return "conv 16x18x18 -> 32 ch on 16x16, 8 faulty PEs", run


def mac_case():
    rng = np.random.default_rng(1)
    x = rng.integers(-128, 128, 4608, dtype=np.int8)
    w = rng.integers(-128, 128, 4608, dtype=np.int8)
    cfg = ArrayConfig(rows=1, cols=1)
    and_m, or_m = mask_tables(cfg, {(0, 0): random_stuck_mask(rng, 3)})

    def run(backend):
        return backend.mac_accumulate(x, w, and_m[0, 0], or_m[0, 0], len(x))
    return "mac_accumulate 4608 steps", run


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.2 and number < 10_000:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels are not built; only the python backend is timed")
    cases = [repair_case(0.02), repair_case(0.06), conv_case(), mac_case()]
    print(f"{'case':<48}" + "".join(f"{b:>14}" for b in backends) + "   speedup")
    for name, run in cases:
        results = {b: run(kernels.get_backend(b)) for b in backends}
        ref = results["python"]
        for b, res in results.items():
            same = np.array_equal(res, ref) if isinstance(ref, np.ndarray) else res == ref
            if not same:
                raise SystemExit(f"{name}: {b} backend disagrees with python")
        times = {b: best_time(lambda b=b: run(kernels.get_backend(b)), args.repeat)
                 for b in backends}
        speed = f"{times['python'] / times['compiled']:9.1f}x" if "compiled" in times else ""
        print(f"{name:<48}" + "".join(f"{times[b] * 1e3:>11.3f} ms" for b in backends) + speed)


if __name__ == "__main__":
    main()
