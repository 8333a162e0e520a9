"""Command-line driver: simulate, solve, evaluate and render."""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io
from .decoder import DecoderConfig
from .errors import DivergenceError, FormatError, ValidationError
from .hio import HioConfig, solve_hio
from .metrics import metrics_record
from .optimize import SidgpConfig, solve_pixel_least_squares, solve_sidgp
from .simulate import CrystalParams, ToyParams, simulate_crystal, simulate_toy

log = logging.getLogger("prdecoder")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    p = Parser(prog="prdecoder", description="Fourier phase retrieval with an untrained decoder prior.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    sim = sub.add_parser("simulate", help="generate a ground truth and its diffraction pattern")
    kinds = sim.add_subparsers(dest="kind", required=True, parser_class=Parser)
    cr = kinds.add_parser("crystal")
    cr.add_argument("--seed", type=int, required=True)
    cr.add_argument("--out", required=True)
    cr.add_argument("--frame", type=int, default=128)
    cr.add_argument("--region", type=int, default=110)
    cr.add_argument("--points-min", type=int, default=6)
    cr.add_argument("--points-max", type=int, default=12)
    cr.add_argument("--shape", choices=("convex", "concave"), default="convex")
    cr.add_argument("--defects", type=int, default=2)
    cr.add_argument("--strength-min", type=float, default=0.5)
    cr.add_argument("--strength-max", type=float, default=1.5)
    cr.add_argument("--q", type=float, default=2 * np.pi, help="momentum-transfer projection")
    cr.add_argument("--photons", type=float, default=None, help="total counts for Poisson noise")
    toy = kinds.add_parser("toy")
    toy.add_argument("--seed", type=int, required=True)
    toy.add_argument("--out", required=True)
    toy.add_argument("--frame", type=int, default=ToyParams.frame)
    toy.add_argument("--content", type=int, default=ToyParams.content, help="side of the box holding the shapes")
    toy.add_argument("--shapes-min", type=int, default=ToyParams.num_shapes[0])
    toy.add_argument("--shapes-max", type=int, default=ToyParams.num_shapes[1])
    toy.add_argument("--max-shift", type=int, default=None)
    toy.add_argument("--photons", type=float, default=None)

    hio = sub.add_parser("hio", help="plain hybrid input-output baseline")
    hio.add_argument("--meas", required=True)
    hio.add_argument("--n", type=int, required=True)
    hio.add_argument("--out", required=True)
    hio.add_argument("--beta", type=float, default=0.9)
    hio.add_argument("--iters", type=int, default=2000)
    hio.add_argument("--tau", type=float, default=0.04)
    hio.add_argument("--real", action="store_true")
    hio.add_argument("--nonneg", action="store_true")
    hio.add_argument("--seed", type=int, default=0)
    hio.add_argument("--support", default=None, help="m-by-m real array file; nonzero entries form the support")

    sg = sub.add_parser("sidgp", help="untrained decoder prior solver")
    sg.add_argument("--meas", required=True)
    sg.add_argument("--config", required=True, help="JSON solver configuration")
    sg.add_argument("--out", required=True)

    ls = sub.add_parser("baseline-ls", help="pixel-wise least squares baseline")
    ls.add_argument("--meas", required=True)
    ls.add_argument("--n", type=int, required=True)
    ls.add_argument("--iters", type=int, required=True)
    ls.add_argument("--out", required=True)
    ls.add_argument("--lr", type=float, default=0.01)
    ls.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="symmetry-resolved comparison with ground truth")
    ev.add_argument("--gt", required=True)
    ev.add_argument("--rec", required=True)
    ev.add_argument("--json", action="store_true")

    rd = sub.add_parser("render", help="write magnitude and phase PNGs")
    rd.add_argument("--in", dest="inp", required=True)
    rd.add_argument("--out-mag", required=True)
    rd.add_argument("--out-phase", required=True)
    return p


def load_sidgp_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    try:
        return SidgpConfig.from_dict(raw)
    except TypeError as exc:
        raise ValidationError(f"bad solver configuration: {exc}") from exc


def write_solve(out, result, solver_config, inputs, argv):
    os.makedirs(out, exist_ok=True)
    paths = {
        "recovery": os.path.join(out, "recovery.prtk"),
        "trace": os.path.join(out, "trace.csv"),
        "magnitude_png": os.path.join(out, "recovery_mag.png"),
        "phase_png": os.path.join(out, "recovery_phase.png"),
    }
    io.write_array(paths["recovery"], result.image)
    io.write_trace(paths["trace"], result.trace)
    io.render_png(result.image, paths["magnitude_png"], paths["phase_png"])
    if result.weights is not None:
        paths["weights"] = os.path.join(out, "weights")
        io.save_weights(paths["weights"], result.weights, solver_config["decoder"])
    seeds = {k: v for k, v in solver_config.items() if k.endswith("seed")}
    manifest = {
        "solver": result.solver,
        "argv": list(argv),
        "config": {k: (v.__dict__ if isinstance(v, DecoderConfig) else v) for k, v in solver_config.items()},
        "rng_seeds": seeds,
        "inputs": inputs,
        "outputs": paths,
        "wall_time_ms": result.wall_time_ms,
        "metrics": {"best_loss": result.best_loss, "fourier_residual": result.final_residual},
        "info": result.info,
    }
    io.write_json(os.path.join(out, "manifest.json"), manifest)
    return manifest


def cmd_simulate(args, argv):
    if args.kind == "crystal":
        params = CrystalParams(
            frame=args.frame, region=args.region, num_points=(args.points_min, args.points_max),
            shape_kind=args.shape, num_defects=args.defects,
            defect_strength=(args.strength_min, args.strength_max), q=args.q,
            rng_seed=args.seed, photons=args.photons,
        )
        x, y = simulate_crystal(params)
    else:
        params = ToyParams(
            frame=args.frame, content=args.content, num_shapes=(args.shapes_min, args.shapes_max),
            max_shift=args.max_shift, rng_seed=args.seed, photons=args.photons,
        )
        x, y = simulate_toy(params)
    os.makedirs(args.out, exist_ok=True)
    io.write_array(os.path.join(args.out, "gt.prtk"), x)
    io.write_array(os.path.join(args.out, "meas.prtk"), y)
    io.render_png(x, os.path.join(args.out, "gt_mag.png"), os.path.join(args.out, "gt_phase.png"))
    io.write_json(os.path.join(args.out, "params.json"), {"kind": args.kind, "argv": list(argv), **params.to_dict()})
    return 0


def cmd_hio(args, argv):
    y = io.read_array(args.meas)
    cfg = HioConfig(beta=args.beta, iterations=args.iters, tau=args.tau, real=args.real,
                    nonneg=args.nonneg, rng_seed=args.seed)
    support = None
    if args.support:
        support = io.read_array(args.support) != 0
    result = solve_hio(y, args.n, cfg, support=support)
    inputs = {"meas": args.meas, "support": args.support}
    write_solve(args.out, result, {"n": args.n, **cfg.to_dict()}, inputs, argv)
    return 0


def cmd_sidgp(args, argv):
    y = io.read_array(args.meas)
    cfg = load_sidgp_config(args.config)
    result = solve_sidgp(y, cfg)
    inputs = {"meas": args.meas, "config": args.config}
    write_solve(args.out, result, {"decoder": cfg.decoder, **{k: v for k, v in cfg.to_dict().items() if k != "decoder"}},
                inputs, argv)
    return 0


def cmd_baseline(args, argv):
    y = io.read_array(args.meas)
    result = solve_pixel_least_squares(y, args.n, iterations=args.iters, lr=args.lr, rng_seed=args.seed)
    config = {"n": args.n, "iterations": args.iters, "lr": args.lr, "rng_seed": args.seed}
    write_solve(args.out, result, config, {"meas": args.meas}, argv)
    return 0


def cmd_eval(args, argv):
    gt = io.read_array(args.gt)
    rec = io.read_array(args.rec)
    record = metrics_record(gt, rec)
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(f"rel_error        {record['rel_error']:.6g}")
        print(f"shift            ({record['shift_row']}, {record['shift_col']})")
        print(f"flipped          {record['flipped']}")
        print(f"phase            {record['phase']:.6g}")
        print(f"fourier_residual {record['fourier_residual']:.6g}")
    return 0


def cmd_render(args, argv):
    io.render_png(io.read_array(args.inp), args.out_mag, args.out_phase)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "hio": cmd_hio,
    "sidgp": cmd_sidgp,
    "baseline-ls": cmd_baseline,
    "eval": cmd_eval,
    "render": cmd_render,
}


def run_cli(argv=None):
    """Run one subcommand; returns 0 on success, 1 on usage or validation
    errors and 2 on I/O or file-format errors."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except (ValidationError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())
