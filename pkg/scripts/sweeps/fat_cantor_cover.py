from argparse import ArgumentParser
from time import time

from brickint.algorithms.directional import (
    DirectionalConfig,
    decide_k_integrability,
    dis2_cover,
)
from brickint.gallery import endpoint_closure_cover, resolve


def run_sweep(
    stages: int,
    min_depth: int,
    max_depth: int,
    samples: int,
    seed: int,
    progress_file: str,
    show_tqdm: bool = False,
):
    fixture = resolve(f"f_prop41c?k={stages}")
    T = fixture.ambient
    config = DirectionalConfig(samples=samples, seed=seed)
    # any closed cover of the removed-interval endpoints is at least this large
    endpoint_bound = endpoint_closure_cover(stages).total_volume

    for depth in range(min_depth, max_depth + 1):
        time_start = time()
        cover = dis2_cover(fixture, T, depth, config, no_progress=not show_tqdm)
        total_time = time() - time_start
        decision = decide_k_integrability(
            fixture, T, (depth,), config=config, no_progress=not show_tqdm
        )
        row = decision.rows[0]

        desc_string = (
            f"{stages},{depth},{samples},{seed},"
            f"{float(cover.total_volume):.6f},{float(endpoint_bound):.6f},"
            f"{float(row.fraction):.6f},{decision.verdict.value},{total_time:.4f}"
        )
        with open(progress_file, "a") as f:
            f.write(desc_string + "\n")


if __name__ == "__main__":
    p = ArgumentParser()
    p.add_argument("--stages", type=int, default=6, help="Fat Cantor stages k")
    p.add_argument("--min_depth", type=int, default=3, help="Smallest dyadic depth")
    p.add_argument("--max_depth", type=int, default=6, help="Largest dyadic depth")
    p.add_argument("--samples", type=int, default=64, help="Samples per radius")
    p.add_argument("--seed", type=int, default=0, help="Seed for the probes")
    p.add_argument(
        "--show_tqdm", action="store_true", help="Toggle for showing progress bar"
    )
    p.add_argument(
        "--progress_file",
        default="progress_fat_cantor_cover.txt",
        type=str,
        help="Location to store results",
    )
    args = p.parse_args()
    args = vars(args)
    run_sweep(**args)
