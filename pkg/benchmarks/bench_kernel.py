"""Compare the compiled and pure-Python simulation kernels, and the two stationary solvers.

Run with ``python benchmarks/bench_kernel.py [--slots N]``.
"""
import argparse
import timeit

from pbgfid import build_transition_matrix, steady_state_full, steady_state_reduced
from pbgfid.physics import DiscreteModel, PhysicalConfig, derive_discrete_model
from pbgfid.sim import PolicyKind, SimConfig, available_backends, simulate


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(model: DiscreteModel, slots: int, repeat: int):
    cfg = SimConfig(model, PolicyKind.PURIFY_BEYOND_GENERATION, slots, 0, seed=7)
    times = {}
    for backend in available_backends():
        times[backend] = best_of(lambda: simulate(cfg, backend), repeat)
        rate = slots / times[backend] / 1e6
        print(f"kernel {backend:8s} {times[backend]*1e3:9.1f} ms  {rate:7.2f} Mslot/s")
    if "cython" in times:
        print(f"speedup cython/python: {times['python'] / times['cython']:.1f}x")
    # both backends consume the same random stream
    results = [simulate(cfg, b) for b in available_backends()]
    print("backends identical:", all(r == results[0] for r in results))


def bench_solvers(model: DiscreteModel, repeat: int):
    full = best_of(lambda: steady_state_full(build_transition_matrix(model)), repeat)
    reduced = best_of(lambda: steady_state_reduced(model), repeat)
    print(f"solver full    {full*1e3:9.2f} ms  (N={model.max_age})")
    print(f"solver reduced {reduced*1e3:9.2f} ms")
    print(f"speedup reduced/full: {full / reduced:.1f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--slots", type=int, default=500_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--length-km", type=float, default=15.0)
    args = ap.parse_args()
    model = derive_discrete_model(PhysicalConfig(args.length_km))
    bench_kernels(model, args.slots, args.repeat)
    bench_solvers(model, args.repeat)


if __name__ == "__main__":
    main()
