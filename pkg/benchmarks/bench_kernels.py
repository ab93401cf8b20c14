#!/usr/bin/env python3
"""Compare the compiled kernel backend against the pure-Python fallback.

Runs each byte-level kernel on a fixed workload under both backends, plus
one end-to-end encrypt/re-encrypt/decrypt round trip, and prints the best
wall time of each along with the speedup.  Call sites resolve kernels
through the dispatch module at call time, so the backends can be swapped
in-process.

Usage:
    python3 benchmarks/bench_kernels.py [--mib 1] [--repeat 5]
"""

import argparse
import time

import chainshare._kernels as kernels
from chainshare._kernels import _pure
from chainshare.crypto import (
    RandomSource,
    pre_decrypt,
    pre_encrypt,
    reencrypt,
    rekey,
    resolve_policy,
)

try:
    from chainshare._kernels import _speed
except ImportError:  # pragma: no cover - built extension missing
    _speed = None

KERNEL_NAMES = (
    "xor_bytes",
    "counter_blocks",
    "offset_counters",
    "xor_fold",
    "byte_histogram",
    "count_consistent_toy_keys",
)


def _patch(impl) -> None:
    for name in KERNEL_NAMES:
        setattr(kernels, name, getattr(impl, name))


def _best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def build_workloads(mib: int):
    rng = RandomSource(1)
    size = mib * 2**20
    a, b = rng.bytes(size), rng.bytes(size)
    blocks = size // 16
    base = rng.bytes(16)
    indices = list(range(1, blocks + 1, 7))
    toy_sbox = bytes(_toy_sbox())
    inputs, targets = bytes(range(4)), bytes((7, 1, 255, 3))
    key, new_key = rng.sym_key(), rng.sym_key()
    message = bytes(size)

    def round_trip():
        ct = pre_encrypt(key, message, "all", rng=RandomSource(3))
        dset = resolve_policy("all")(ct.block_count)
        rk = rekey(key, ct.nonce, new_key, dset, rng=RandomSource(4))
        assert pre_decrypt(new_key, reencrypt(rk, ct)) == message

    return [
        (f"xor_bytes ({mib} MiB)", lambda: kernels.xor_bytes(a, b)),
        (f"counter_blocks ({blocks})", lambda: kernels.counter_blocks(1, blocks)),
        (
            f"offset_counters ({len(indices)})",
            lambda: kernels.offset_counters(base, indices),
        ),
        (f"xor_fold ({mib} MiB)", lambda: kernels.xor_fold(a)),
        (f"byte_histogram ({mib} MiB)", lambda: kernels.byte_histogram(a)),
        (
            "count_consistent_toy_keys",
            lambda: kernels.count_consistent_toy_keys(toy_sbox, inputs, targets),
        ),
        (f"pre round trip ({mib} MiB, all)", round_trip),
    ]


def _toy_sbox():
    # any permutation works for timing; reuse the scaled-down cipher's own
    from chainshare.crypto import ToyCipher

    return ToyCipher(0).sbox


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mib", type=int, default=1, help="workload size in MiB")
    parser.add_argument("--repeat", type=int, default=5, help="repeats per cell")
    args = parser.parse_args()

    backends = [("pure", _pure)]
    if _speed is not None:
        backends.append(("compiled", _speed))
    else:
        print("compiled backend not built; timing the pure backend only\n")

    workloads = build_workloads(args.mib)
    results: dict[str, dict[str, float]] = {}
    original = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        for backend_name, impl in backends:
            _patch(impl)
            for label, fn in workloads:
                results.setdefault(label, {})[backend_name] = _best_time(
                    fn, args.repeat
                )
    finally:
        for name, fn in original.items():
            setattr(kernels, name, fn)

    width = max(len(label) for label, _ in workloads)
    header = f"{'workload'.ljust(width)}  {'pure':>12}  {'compiled':>12}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, _ in workloads:
        row = results[label]
        pure_ms = row["pure"] * 1e3
        if "compiled" in row:
            comp_ms = row["compiled"] * 1e3
            speedup = f"{row['pure'] / row['compiled']:.1f}x"
            print(
                f"{label.ljust(width)}  {pure_ms:>10.3f}ms  {comp_ms:>10.3f}ms  {speedup:>8}"
            )
        else:
            print(f"{label.ljust(width)}  {pure_ms:>10.3f}ms  {'-':>12}  {'-':>8}")


if __name__ == "__main__":
    main()
