"""Detection rate of a planted trigram as a function of the HP/LP injection rates.

    python scripts/power_simulation.py --seeds 50 --selection max

For each (rate_hp, rate_lp) cell, generates ``--seeds`` corpora and counts how
often the planted pattern comes out significant after Holm adjustment, and
how often a pattern unrelated to it does (related = a contiguous piece of the
trigram, or a pattern containing it).
"""

import argparse
import time

from _pipeline import run
from da_seqlab.synth import GeneratorSpec, PlantedPattern

TRIGRAM = ("[s]Q", "[t]Cp", "[s]R")
def related(pattern: tuple[str, ...]) -> bool:
    def inside(a, b):
        return any(b[i:i + len(a)] == a for i in range(len(b) - len(a) + 1))
    return inside(pattern, TRIGRAM) or inside(TRIGRAM, pattern)


CELLS = [(0.0, 0.0), (0.3, 0.1), (0.5, 0.1), (0.7, 0.1), (0.9, 0.1), (0.9, 0.5)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--selection", choices=["none", "conditional", "max"], default="max")
    args = ap.parse_args()

    print(f"selection={args.selection}, {args.seeds} seeds per cell")
    print(f"{'rate_hp':>7} {'rate_lp':>7} {'detected':>9} {'unrelated':>9} {'sec':>6}")
    for hp, lp in CELLS:
        t0 = time.perf_counter()
        detected = other = 0
        for seed in range(args.seeds):
            spec = GeneratorSpec(seed=seed, planted=PlantedPattern(TRIGRAM, hp, lp))
            sig = {r.pattern for r in run(spec, args.selection) if r.flag == "*"}
            detected += TRIGRAM in sig
            other += any(not related(p) for p in sig)
        print(f"{hp:7.1f} {lp:7.1f} {detected:5d}/{args.seeds:<3d} {other:5d}/{args.seeds:<3d} "
              f"{time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
