from argparse import ArgumentParser
from time import time

from brickint import dsl, gallery
from brickint.algorithms.integrator import IntegrandSpec, darboux
from brickint.geometry import parse_brick


def run_sweep(
    spec: str,
    ambient: str,
    m_values: str,
    samples_per_cell: int,
    seed: int,
    progress_file: str,
    show_tqdm: bool = False,
):
    if spec.startswith("gallery:") and ambient == "NA":
        function = gallery.resolve(spec)
    else:
        function = dsl.parse(spec, ambient=None if ambient == "NA" else parse_brick(ambient))
    f = IntegrandSpec.from_function(function)

    for m in [int(part) for part in m_values.split(",")]:
        time_start = time()
        lower, upper = darboux(
            f, m, samples_per_cell=samples_per_cell, seed=seed, no_progress=not show_tqdm
        )
        total_time = time() - time_start

        # commas inside the expression would break the row
        name = spec.replace(",", ";")
        desc_string = (
            f"{name},{m},{samples_per_cell},{seed},"
            f"{float(lower):.8f},{float(upper):.8f},{float(upper - lower):.8f},"
            f"{total_time:.4f}"
        )
        with open(progress_file, "a") as f_out:
            f_out.write(desc_string + "\n")


if __name__ == "__main__":
    p = ArgumentParser()
    p.add_argument("--spec", type=str, default="gallery:thomae", help="Expression or gallery reference")
    p.add_argument("--ambient", type=str, default="NA", help="Ambient brick, e.g. [0,1]x[0,1]")
    p.add_argument("--m_values", type=str, default="16,64,256,1024", help="Comma-separated m values")
    p.add_argument("--samples_per_cell", type=int, default=4, help="Extra probes per cell")
    p.add_argument("--seed", type=int, default=0, help="Seed for the probes")
    p.add_argument(
        "--show_tqdm", action="store_true", help="Toggle for showing progress bar"
    )
    p.add_argument(
        "--progress_file",
        default="progress_darboux_gap.txt",
        type=str,
        help="Location to store results",
    )
    args = p.parse_args()
    args = vars(args)
    run_sweep(**args)
