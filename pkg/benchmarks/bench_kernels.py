"""Compare the compiled and pure-Python kernel backends on SLIC workloads.

Usage: python benchmarks/bench_kernels.py [--size 256] [--segments 200] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from cosaliency import imagio, kernels, superpixel, synthetic


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def label_map(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--segments", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the python backend is available")
    rgb = synthetic.make_group(0, n_images=1, size=args.size).rgbs[0]
    lab = np.ascontiguousarray(imagio.rgb_to_lab(rgb))
    step = math.sqrt(args.size * args.size / args.segments)
    centers = superpixel._initial_centers(lab, step)
    weight = (0.1 / step) ** 2
    labels = kernels.slic_assign(lab, centers, int(math.ceil(step)), weight, backend="python")
    labels = np.ascontiguousarray(labels, dtype=np.int32)

    tasks = {
        "slic_assign": lambda b: kernels.slic_assign(lab, centers, int(math.ceil(step)), weight, backend=b),
        "label_components": lambda b: kernels.label_components(labels, backend=b),
        "slic (full)": lambda b: superpixel.slic(lab, args.segments, backend=b).labels,
    }
    print(f"{args.size}x{args.size} image, {args.segments} target segments, best of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, task in tasks.items():
        times, outs = {}, {}
        for b in backends:
            times[b], outs[b] = best_of(lambda: task(b), args.repeat)
        same = all(np.array_equal(label_map(o), label_map(outs["python"])) for o in outs.values())
        speed = f"{times['python'] / times['cython']:9.1f}x" if "cython" in times else f"{'n/a':>10}"
        row = "".join(f"{times[b] * 1e3:10.1f}ms" for b in backends)
        print(f"{name:<18}{row}{speed}{'' if same else '  (outputs differ!)'}")


if __name__ == "__main__":
    main()
