"""Command-line interface."""

import json
import logging
import math
import os
import os.path as osp
import sys
from argparse import ArgumentParser
from collections import OrderedDict
from configparser import ConfigParser
from dataclasses import dataclass, field, replace
from functools import wraps

import numpy as np
import pandas as pd
from prompt_toolkit import prompt
from prompt_toolkit.completion import WordCompleter

from notchkin import run_log
from notchkin.calibration import (as_arrays, calibrate, dump_trials,
                                  fit_result_to_dict, linear_tension, load_trials,
                                  synthesize_trials)
from notchkin.exceptions import DomainError, NotchkinError, NotEngagedError
from notchkin.geometry import load_tube, preset_path, validate_tube
from notchkin.kinematics import (check_tendon, load_tendon, notch_closure_limit,
                                 predict_deflection, predict_series, tip_polyline)
from notchkin.plotting import (plot_backbones, plot_cycles, plot_model_vs_data,
                               plot_sweep)
from notchkin.toolpath import (compile_pass_plan, emit_job, emit_pattern_svg,
                               load_recipe, unroll_pattern)

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("validate", "predict", "fit", "toolpath", "synth")

# Files each subcommand needs before it can start
REQUIRED = {
    "validate": ("tube",),
    "predict": ("tube", "tendon"),
    "fit": ("tube", "tendon", "trials"),
    "toolpath": ("tube", "recipe"),
    "synth": ("tube", "tendon"),
}

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


@dataclass
class RunConfig:
    """Inputs of one subcommand, all parsed before any computation."""
    out: str
    tube: object = None
    tendon: object = None
    recipe: object = None
    trials: list = field(default_factory=list)
    trial_paths: list = field(default_factory=list)
    seed: int = None


def make_parser():
    """Define command-line arguments."""
    parser = ArgumentParser(description="Notched-tube joint design, calibration "
                                        "and toolpath tool", prog="notchkin")
    parser.add_argument('subcommand', type=str, choices=SUBCOMMANDS, nargs='?',
                        help="Action to run")
    parser.add_argument('--tube', type=str, help="Tube JSON file or preset name")
    parser.add_argument('--tendon', type=str, help="Tendon JSON file or preset name")
    parser.add_argument('--recipe', type=str, help="Laser recipe JSON file or preset name")
    parser.add_argument('--trials', type=str, action='append', default=[],
                        help="Trial CSV (repeat for several samples; "
                             "output path for synth)")
    parser.add_argument('--out', '-o', type=str, default='.', help="Output directory")
    parser.add_argument('--seed', type=int, help="Random seed for synth")
    parser.add_argument('--config', type=str, help="Extra configuration file")
    parser.add_argument('--verbose', '-v', action='store_true', default=False,
                        help="Log to stderr")

    predict = parser.add_argument_group("predict")
    predict.add_argument('--stroke', type=float, default=0.0, help="Tendon stroke [mm]")
    predict.add_argument('--force', type=float, default=0.0, help="Tendon tension [N]")
    predict.add_argument('--sweep', action='store_true', default=False,
                         help="Also write a stroke sweep CSV and SVG")
    predict.add_argument('--stroke-max', type=float, help="Sweep range [mm]")
    predict.add_argument('--resolution', type=int, help="Sweep rows")

    fit = parser.add_argument_group("fit")
    fit.add_argument('--select', type=str,
                     help="Cycles to fit: first, transient, steady, all or a-b")

    toolpath = parser.add_argument_group("toolpath")
    toolpath.add_argument('--repeats', type=int, help="Override the recipe repeat count")

    synth = parser.add_argument_group("synth")
    synth.add_argument('--cycles', type=int, help="Number of cycles")
    synth.add_argument('--slack', type=float, help="Tendon slack [mm]")
    synth.add_argument('--noise', type=float, help="Deflection noise sigma [deg]")
    synth.add_argument('--first-cycle-scale', type=float,
                       help="Deflection scale of the first cycle")
    synth.add_argument('--drift', type=float, help="Initial transient drift (fraction)")
    synth.add_argument('--max-stroke', type=float, help="Peak stroke [mm]")
    synth.add_argument('--stiffness', type=float, help="Tension per engaged mm [N/mm]")
    return parser


def read_config(path=None):
    """Packaged defaults, then ``~/.notchkin.ini``, then ``path``."""
    config = ConfigParser()
    files = [osp.join(osp.dirname(__file__), 'config.ini'),
             osp.expanduser('~/.notchkin.ini')]
    if path is not None:
        if not osp.exists(path):
            raise OSError("Config file {} not found".format(path))
        files.append(path)
    config.read(files)
    return config


def prompt_subcommand():
    """Prompt for the subcommand to run if not given on the command-line."""
    mapped = OrderedDict([
        ("validate", "Check a tube design"),
        ("predict", "Predict joint deflection"),
        ("fit", "Calibrate the tendon modulus"),
        ("toolpath", "Compile a laser pass plan"),
        ("synth", "Generate a synthetic trial"),
    ])
    completer = WordCompleter(list(mapped.values()) + list(mapped.keys()))
    cmd = ''
    while cmd not in SUBCOMMANDS:
        res = prompt("Action: ", completer=completer,
                     bottom_toolbar="Press tab to see options").strip()
        for key in mapped:
            if res in (key, mapped[key]):
                cmd = key
    return cmd


def log(func):
    """Decorator for logging the outcome of a subcommand to the run log."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            status = func(*args, **kwargs)
            if status == EXIT_OK:
                run_log.info("%s successfully completed", func.__name__)
            else:
                run_log.error("%s failed!", func.__name__)
        except Exception:
            run_log.error("Uncaught exception from %s", func.__name__,
                          exc_info=True)
            raise
        return status
    return wrapper


def _resolve(path):
    """Use a shipped preset when ``path`` does not exist but names one."""
    if osp.exists(path):
        return path
    candidate = preset_path(osp.splitext(osp.basename(path))[0])
    if osp.exists(candidate):
        logger.debug("Using preset %s for %s", candidate, path)
        return candidate
    return path


def load_run_config(args, subcommand):
    """Read every file the subcommand needs.

    :raises OSError: if a required file is missing or unreadable.

    """
    run = RunConfig(out=args.out, seed=args.seed)
    required = REQUIRED[subcommand]
    for name in required:
        if not getattr(args, name):
            raise OSError("--{} is required for {}".format(name, subcommand))
    if args.tube:
        run.tube = load_tube(_resolve(args.tube))
    if args.tendon:
        run.tendon = load_tendon(_resolve(args.tendon))
    if args.recipe:
        run.recipe = load_recipe(_resolve(args.recipe))
    run.trial_paths = list(args.trials)
    if subcommand == "fit":
        run.trials = [load_trials(path) for path in args.trials]
    return run


def _write(path, text):
    with open(path, 'w') as f:
        f.write(text)
    print("Wrote", path)


@log
def cmd_validate(run, args, config):
    violations = validate_tube(run.tube)
    for violation in violations:
        print("{}: violates {}".format(violation.field, violation.constraint))
    if violations:
        return EXIT_DOMAIN
    print("Tube is valid")
    return EXIT_OK


@log
def cmd_predict(run, args, config):
    check_tendon(run.tendon, run.tube)
    try:
        theta = predict_deflection(run.tube, run.tendon, args.stroke, args.force)
        print("theta = {:.4f} deg ({:.6f} rad)".format(math.degrees(theta), theta))
    except NotEngagedError as e:
        print("theta = 0.0000 deg (0.000000 rad) [not engaged, slack {:.6f} mm]".format(
            e.slack))

    if args.sweep:
        resolution = args.resolution or config.getint('plot', 'resolution')
        if resolution < 2:
            raise DomainError("Sweep resolution must be at least 2")
        stroke_max = (args.stroke_max or run.tube.max_stroke
                      or config.getfloat('synth', 'max_stroke_mm'))
        stroke = np.linspace(0.0, stroke_max, resolution)
        prediction = predict_series(run.tube, run.tendon,
                                    np.column_stack([stroke, np.full(resolution, args.force)]))
        frame = pd.DataFrame({
            "stroke_mm": stroke,
            "deflection_deg": np.degrees(prediction.deflection),
            "deflection_rad": prediction.deflection,
            "engaged": prediction.engaged,
        })
        csv_path = osp.join(run.out, "sweep.csv")
        frame.to_csv(csv_path, index=False, lineterminator="\n")
        print("Wrote", csv_path)
        plot_sweep(stroke, np.degrees(prediction.deflection),
                   osp.join(run.out, "sweep.svg"),
                   title="F = {:.3f} N".format(args.force))

        limit = notch_closure_limit(run.tube)
        angles = np.linspace(0.0, min(prediction.deflection.max(), limit), 5)
        segments = config.getint('plot', 'polyline_segments')
        plot_backbones([tip_polyline(run.tube, theta, segments) for theta in angles],
                       osp.join(run.out, "shape.svg"))
    return EXIT_OK


@log
def cmd_fit(run, args, config):
    section = config['calibration']
    calibration = calibrate(
        run.tube, run.tendon, run.trials,
        which=args.select or section.get('cycles'),
        band=section.getfloat('hysteresis_band_mm'),
        threshold=section.getfloat('engagement_threshold_deg'),
        sustain=section.getint('sustain_samples'),
        window_fraction=section.getfloat('fit_window_fraction'),
        min_fit_samples=section.getint('min_fit_samples'),
        lower=section.getfloat('modulus_min_mpa'),
        upper=section.getfloat('modulus_max_mpa'),
        tolerance=section.getfloat('modulus_tolerance'),
        max_iterations=section.getint('max_iterations'),
        scan_points=section.getint('scan_points'))
    result = calibration.result

    _write(osp.join(run.out, "fit.json"),
           json.dumps(fit_result_to_dict(result), indent=2, sort_keys=True) + "\n")

    fitted = replace(run.tendon, modulus=result.modulus)
    last_cycles = []
    for segments in calibration.segments:
        _, stroke, tension, deflection = as_arrays(segments[-1])
        used = stroke >= 0
        model = predict_series(run.tube, fitted,
                               np.column_stack([stroke[used], tension[used]])).deflection
        last_cycles.append((stroke[used], np.degrees(deflection[used]), np.degrees(model)))
    plot_model_vs_data(last_cycles, osp.join(run.out, "fit.svg"))
    for k, cycle_set in enumerate(calibration.cycle_sets, start=1):
        plot_cycles(cycle_set, osp.join(run.out, "cycles_{:d}.svg".format(k)))

    print("E_t = {:.1f} MPa ({:.2f} GPa)".format(result.modulus, result.modulus / 1000))
    print("RMSE = {:.4f} deg over {:d} samples".format(result.rmse, result.samples_used))
    print("Deadband = {:.4f} mm".format(result.deadband_offset))
    for path, rmse in zip(run.trial_paths, result.rmse_by_sample):
        print("  {}: RMSE {:.4f} deg".format(path, rmse))
    return EXIT_OK


@log
def cmd_toolpath(run, args, config):
    section = config['toolpath']
    recipe = run.recipe
    if args.repeats is not None:
        recipe = replace(recipe, repeat_count=args.repeats)
    layout = dict(hole_size=section.getfloat('hole_size_mm'),
                  proximal_margin=section.getfloat('proximal_margin_mm'),
                  overlap_tolerance=section.getfloat('overlap_tolerance_mm'))
    plan = compile_pass_plan(run.tube, recipe,
                             direction=section.get('drill_direction'), **layout)
    _write(osp.join(run.out, "job.json"), emit_job(plan, recipe))
    _write(osp.join(run.out, "pattern.svg"),
           emit_pattern_svg(unroll_pattern(run.tube, **layout)))
    print(len(plan))
    return EXIT_OK


@log
def cmd_synth(run, args, config):
    section = config['synth']

    def pick(value, key, getter=section.getfloat):
        return value if value is not None else getter(key)

    cycles = pick(args.cycles, 'cycles', section.getint)
    slack = pick(args.slack, 'slack_mm')
    noise = pick(args.noise, 'noise_deg')
    stiffness = pick(args.stiffness, 'tension_stiffness_n_per_mm')
    max_stroke = args.max_stroke or run.tube.max_stroke or section.getfloat('max_stroke_mm')
    if cycles < 1:
        raise DomainError("--cycles must be at least 1")
    if slack < 0 or noise < 0 or stiffness < 0:
        raise DomainError("--slack, --noise and --stiffness must be non-negative")
    if not max_stroke > slack:
        raise DomainError("Peak stroke must exceed the slack")

    records = synthesize_trials(
        run.tube, run.tendon, cycles=cycles, slack=slack,
        first_cycle_scale=pick(args.first_cycle_scale, 'first_cycle_scale'),
        drift=pick(args.drift, 'drift'), noise=noise,
        tension=linear_tension(stiffness), max_stroke=max_stroke,
        samples_per_stroke=section.getint('samples_per_stroke'),
        sample_period=section.getfloat('sample_period_s'),
        seed=pick(run.seed, 'seed', section.getint))
    path = run.trial_paths[0] if run.trial_paths else osp.join(run.out, "trials.csv")
    dump_trials(records, path)
    print("Wrote {:d} records to {}".format(len(records), path))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "predict": cmd_predict,
    "fit": cmd_fit,
    "toolpath": cmd_toolpath,
    "synth": cmd_synth,
}


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)

    package_log = logging.getLogger("notchkin")
    console, level = None, package_log.level
    if args.verbose:
        console = logging.StreamHandler()
        console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        package_log.addHandler(console)
        package_log.setLevel(logging.DEBUG)
    try:
        return _run(parser, args)
    finally:
        if console is not None:
            package_log.removeHandler(console)
            package_log.setLevel(level)
            console.close()


def _run(parser, args):
    try:
        subcommand = args.subcommand
        if subcommand is None:
            if not sys.stdin.isatty():
                parser.error("a subcommand is required")
            subcommand = prompt_subcommand()
    except KeyboardInterrupt:
        print("Aborting!")
        return EXIT_DOMAIN

    try:
        config = read_config(args.config)
        os.makedirs(args.out, exist_ok=True)
    except OSError as e:
        print("error:", e, file=sys.stderr)
        return EXIT_IO

    handler = logging.FileHandler(osp.join(args.out, "notchkin.log"))
    handler.setFormatter(logging.Formatter(fmt="[%(asctime)s] %(message)s"))
    run_log.addHandler(handler)
    try:
        # JSON and CSV parse errors are ValueErrors too
        try:
            run = load_run_config(args, subcommand)
        except (OSError, ValueError) as e:
            print("error:", e, file=sys.stderr)
            return EXIT_IO
        return COMMANDS[subcommand](run, args, config)
    except OSError as e:
        print("error:", e, file=sys.stderr)
        return EXIT_IO
    except (NotchkinError, ValueError) as e:
        print("error:", e, file=sys.stderr)
        return EXIT_DOMAIN
    except KeyboardInterrupt:
        print("Aborting!")
        return EXIT_DOMAIN
    finally:
        run_log.removeHandler(handler)
        handler.close()
