#!/usr/bin/env python3
# UATomo performs ultrasound attenuation tomography with a passive reflector.
# Copyright (C) 2024 The UATomo Development Team
#
# This file is part of UATomo.
#
# UATomo is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# UATomo is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
# --
"""Main command-line interface to uatomo.

Every command reads its settings from the layered configuration (see
``uatomo.config``) and writes its results in the output directory.
Exit codes: 0 success, 2 file error, 3 invalid input, 4 no convergence.
"""

import argparse
import logging
import os
import sys

from .calibration import normalize, reshape_to_matrix
from .config import CONFIG_ENV, load_config
from .fileio import (
    read_amplitude_matrix,
    read_image,
    read_mask,
    write_amplitude_matrix,
    write_image,
    write_mask,
    write_normalized_data,
    write_pgm,
)
from .metrics import MetricsReport, evaluate
from .raypath import GridMismatchError, build_system_matrix
from .recon import solve
from .simulator import NoiseSpec, inclusion_mask, rasterize, simulate_phantom


__all__ = ["main", "EXIT_OK", "EXIT_IO", "EXIT_INVALID", "EXIT_NOT_CONVERGED"]


EXIT_OK = 0
EXIT_IO = 2
EXIT_INVALID = 3
EXIT_NOT_CONVERGED = 4

SWEEP_LEVELS = (0.0, 0.025, 0.05, 0.075, 0.10, 0.13)

logger = logging.getLogger(__name__)


def main(args=None):
    """Tomography command-line interface, returns the exit code."""
    args = parse_args(args)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(
            args.config or os.environ.get(CONFIG_ENV), overrides_from_args(args)
        )
        return COMMANDS[args.command](config, args)
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID


def overrides_from_args(args):
    """Translate command-line flags into a nested config layer."""
    overrides = {}

    def put(block, key, value):
        if value is not None:
            overrides.setdefault(block, {})[key] = value

    put("noise", "seed", args.seed)
    put("noise", "level", args.noise)
    put("recon", "lambda", args.lam)
    put("recon", "absolute", args.absolute)
    put("paths", "output_dir", args.output_dir)
    put("simulation", "phantom", args.phantom)
    put("output", "binary", args.binary or None)
    put("output", "pgm", args.pgm or None)
    put("output", "export_matrix", args.export_matrix or None)
    return overrides


def _filename(config, name):
    """Location of an output, with the binary suffix when requested."""
    path = config.path(name)
    if config.section("output")["binary"] and name not in ("report", "metrics", "metrics_csv"):
        path = os.path.splitext(path)[0] + ".f64"
    return path


def _prepare(path):
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    return path


def _written(path):
    print("Written {}".format(path))


def _write_pgm_copy(config, path, image):
    output = config.section("output")
    if output["pgm"]:
        fn_pgm = os.path.splitext(path)[0] + ".pgm"
        write_pgm(fn_pgm, image.db_per_cm, output["pgm_window_db_cm"])
        _written(fn_pgm)


def _write_truth(config, truth, mask):
    fn_truth = _prepare(_filename(config, "truth"))
    write_image(fn_truth, truth)
    _written(fn_truth)
    _write_pgm_copy(config, fn_truth, truth)
    fn_mask = _prepare(_filename(config, "mask"))
    write_mask(fn_mask, mask, truth.grid)
    _written(fn_mask)


def cmd_phantom(config, args):
    """Rasterize the phantom into ground-truth image and mask files."""
    geom = config.geometry()
    grid = config.grid(geom)
    phantom = config.phantom(geom)
    _write_truth(config, rasterize(phantom, grid), inclusion_mask(phantom, grid))
    return EXIT_OK


def cmd_simulate(config, args):
    """Simulate tissue and water amplitude matrices of the phantom."""
    geom = config.geometry()
    grid = config.grid(geom)
    refine = int(config.section("simulation")["refine"])
    tissue, water, metadata, truth, mask = simulate_phantom(
        config.phantom(geom), geom, grid, config.media(), config.noise(), refine
    )
    for name, amplitudes in ("tissue", tissue), ("water", water):
        fn_out = _prepare(_filename(config, name))
        write_amplitude_matrix(fn_out, amplitudes, metadata)
        _written(fn_out)
    _write_truth(config, truth, mask)
    return EXIT_OK


def _load_data(config):
    geom = config.geometry()
    tissue = read_amplitude_matrix(_filename(config, "tissue"))
    water = read_amplitude_matrix(_filename(config, "water"))
    media = config.media()
    data = normalize(
        tissue, water, media.tissue, media.water, media.reflector, geom, config.absolute
    )
    return geom, data


def cmd_calibrate(config, args):
    """Normalize the amplitude matrices with the water calibration."""
    _geom, data = _load_data(config)
    fn_data = _prepare(_filename(config, "data"))
    write_normalized_data(fn_data, data)
    _written(fn_data)
    output = config.section("output")
    if output["pgm"]:
        fn_pgm = os.path.splitext(fn_data)[0] + ".pgm"
        matrix = -reshape_to_matrix(data)
        low, high = matrix.min(), matrix.max()
        write_pgm(fn_pgm, matrix, (low, high if high > low else low + 1.0))
        _written(fn_pgm)
    return EXIT_OK


def cmd_reconstruct(config, args):
    """Calibrate and reconstruct the attenuation image."""
    geom, data = _load_data(config)
    grid = config.grid(geom)
    L = build_system_matrix(geom, grid)
    if config.section("output")["export_matrix"]:
        fn_matrix = _prepare(config.path("matrix"))
        L.save_triplets(fn_matrix)
        _written(fn_matrix)
    image, report = solve(L, data, config.recon())
    fn_recon = _prepare(_filename(config, "recon"))
    write_image(fn_recon, image)
    _written(fn_recon)
    _write_pgm_copy(config, fn_recon, image)
    fn_report = _prepare(config.path("report"))
    with open(fn_report, "w") as f:
        f.write(report.to_text())
    _written(fn_report)
    if not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_evaluate(config, args):
    """Compare a reconstruction with the ground truth."""
    recon = read_image(args.recon or _filename(config, "recon"))
    truth = read_image(args.truth or _filename(config, "truth"))
    mask, mask_grid = read_mask(args.mask or _filename(config, "mask"))
    if recon.grid != truth.grid or truth.grid != mask_grid:
        raise GridMismatchError("Reconstruction, ground truth and mask grids differ.")
    report = evaluate(recon, truth, mask)
    fn_metrics = _prepare(config.path("metrics"))
    with open(fn_metrics, "w") as f:
        f.write(report.to_text())
    _written(fn_metrics)
    return EXIT_OK


def cmd_sweep(config, args):
    """Reconstruct the phantom at increasing noise levels for several seeds."""
    geom = config.geometry()
    grid = config.grid(geom)
    media = config.media()
    phantom = config.phantom(geom)
    recon_config = config.recon()
    refine = int(config.section("simulation")["refine"])
    L = build_system_matrix(geom, grid)
    first_seed = config.noise().seed
    levels = SWEEP_LEVELS if args.levels is None else args.levels
    fn_csv = _prepare(config.path("metrics_csv"))
    result = EXIT_OK
    with open(fn_csv, "w") as fcsv:
        fcsv.write(",".join(("level", "seed", "converged") + MetricsReport.FIELDS) + "\n")
        for level in levels:
            for seed in range(first_seed, first_seed + args.seeds):
                noise = NoiseSpec(level, seed)
                tissue, water, _metadata, truth, mask = simulate_phantom(
                    phantom, geom, grid, media, noise, refine
                )
                data = normalize(
                    tissue, water, media.tissue, media.water, media.reflector, geom,
                    config.absolute,
                )
                image, report = solve(L, data, recon_config)
                metrics = evaluate(image, truth, mask)
                fn_metrics = _prepare(
                    os.path.join(
                        config.section("paths")["output_dir"],
                        "metrics-noise{:.3f}-seed{:d}.txt".format(level, seed),
                    )
                )
                with open(fn_metrics, "w") as f:
                    f.write(metrics.to_text())
                _written(fn_metrics)
                fcsv.write(
                    "{:.4f},{:d},{:d},".format(level, seed, int(report.converged))
                    + metrics.to_csv_row()
                )
                if not report.converged:
                    result = EXIT_NOT_CONVERGED
    _written(fn_csv)
    return result


COMMANDS = {
    "phantom": cmd_phantom,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def _add_common_arguments(parser):
    parser.add_argument(
        "-c",
        "--config",
        default=None,
        help="YAML configuration file. [default=${}]".format(CONFIG_ENV),
    )
    parser.add_argument("--seed", type=int, default=None, help="Seed of the noise stream.")
    parser.add_argument(
        "--noise",
        type=float,
        default=None,
        help="Noise standard deviation as a fraction of max|b|, e.g. 0.05.",
    )
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        default=None,
        help="Regularization weight of the reconstruction.",
    )
    parser.add_argument(
        "-o", "--output-dir", default=None, help="Directory for all input and output files."
    )
    parser.add_argument(
        "--phantom", default=None, help="Phantom preset name or phantom YAML file."
    )
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--absolute",
        dest="absolute",
        action="store_true",
        default=None,
        help="Restore the water attenuation in the normalized data.",
    )
    group.add_argument(
        "--relative",
        dest="absolute",
        action="store_false",
        help="Reconstruct the attenuation relative to water.",
    )
    parser.add_argument(
        "--binary",
        action="store_true",
        default=False,
        help="Use flat float64 files with a .hdr sidecar instead of text.",
    )
    parser.add_argument(
        "--pgm", action="store_true", default=False, help="Also write 16-bit PGM images."
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", default=False, help="Log progress."
    )


def parse_args(args=None):
    """Parse command-line arguments."""
    description = "Ultrasound attenuation tomography with a passive reflector."
    parser = argparse.ArgumentParser(prog="uatomo", description=description)
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("phantom", help=cmd_phantom.__doc__)
    subparsers.add_parser("simulate", help=cmd_simulate.__doc__)
    subparsers.add_parser("calibrate", help=cmd_calibrate.__doc__)
    reconstruct = subparsers.add_parser("reconstruct", help=cmd_reconstruct.__doc__)
    reconstruct.add_argument(
        "--export-matrix",
        action="store_true",
        default=False,
        help="Write the ray-path matrix as row,col,value triplets.",
    )
    evaluate_parser = subparsers.add_parser("evaluate", help=cmd_evaluate.__doc__)
    evaluate_parser.add_argument("--recon", default=None, help="Reconstructed image file.")
    evaluate_parser.add_argument("--truth", default=None, help="Ground-truth image file.")
    evaluate_parser.add_argument("--mask", default=None, help="Inclusion mask file.")
    sweep = subparsers.add_parser("sweep", help=cmd_sweep.__doc__)
    sweep.add_argument(
        "--levels",
        type=float,
        nargs="+",
        default=None,
        help="Noise levels as fractions. [default={}]".format(
            " ".join(str(level) for level in SWEEP_LEVELS)
        ),
    )
    sweep.add_argument(
        "--seeds",
        type=int,
        default=1,
        help="Number of seeds per level, counting up from --seed. [default=%(default)s]",
    )
    for subparser in subparsers.choices.values():
        _add_common_arguments(subparser)
    args = parser.parse_args(args)
    if not hasattr(args, "export_matrix"):
        args.export_matrix = False
    for name in "recon", "truth", "mask":
        if not hasattr(args, name):
            setattr(args, name, None)
    return args


if __name__ == "__main__":
    sys.exit(main())
