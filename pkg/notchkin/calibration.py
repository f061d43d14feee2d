"""Calibration of the stroke model against cyclic bench trials.

The pipeline is load -> segment -> deadband -> fit -> rmse:

* :func:`load_trials` reads a trial CSV (``time_s,stroke_mm,force_n,
  deflection_deg``); deflection is converted to radians on the way in.
* :func:`segment_cycles` splits the stroke signal into actuation/relaxation
  cycles and labels them ``first``, ``transient`` or ``steady``.
* :func:`remove_deadband` shifts an actuation segment so that zero stroke is
  where the joint starts to move.
* :func:`fit_tendon_modulus` finds the tendon modulus that minimises the RMSE
  between model and measured deflection.

"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from notchkin.exceptions import (FitConvergenceError, InsufficientEngagementError,
                                 NoCyclesFoundError, NonIdentifiableError,
                                 PipelineError, TrialFormatError)
from notchkin.kinematics import check_tendon, moment_arm, predict_series

logger = logging.getLogger(__name__)

COLUMNS = ("time_s", "stroke_mm", "force_n", "deflection_deg")

FIRST, TRANSIENT, STEADY = "first", "transient", "steady"
LABELS = (FIRST, TRANSIENT, STEADY)

# Band layout of the 50-cycle bench protocol
PROTOCOL_CYCLES = 50
PROTOCOL_STEADY = 20

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2

TrialRecord = namedtuple("TrialRecord", ["time", "stroke", "tension", "deflection"])
TrialRecord.__doc__ = """One bench sample.

:param float time: [s]
:param float stroke: ``L_t`` [mm]
:param float tension: ``F`` [N]
:param float deflection: measured ``theta`` [rad]
"""

CycleSummary = namedtuple("CycleSummary",
                          ["index", "label", "peak_stroke", "peak_deflection"])
Calibration = namedtuple("Calibration", ["result", "cycle_sets", "segments"])


@dataclass
class Cycle:
    """One actuation/relaxation cycle; ``index`` is 1-based."""
    index: int
    label: str
    actuation: list
    relaxation: list = field(default_factory=list)


@dataclass
class CycleSet:
    """Cycles of one trial.

    Records before the first actuation (a descending lead-in) are kept in
    ``lead_in`` so that every record belongs to exactly one segment.

    """
    cycles: list
    lead_in: list = field(default_factory=list)

    def __len__(self):
        return len(self.cycles)

    def labelled(self, label):
        return [cycle for cycle in self.cycles if cycle.label == label]


@dataclass(frozen=True)
class FitResult:
    """Outcome of a tendon modulus fit.

    :param float modulus: estimated ``E_t`` [MPa]
    :param float rmse: model vs measured deflection [deg]
    :param float deadband_offset: mean removed slack [mm]
    :param int samples_used:
    :param tuple rmse_by_sample: per-trial RMSE [deg] when several trials
        were fitted jointly.

    """
    modulus: float
    rmse: float
    deadband_offset: float
    samples_used: int
    rmse_by_sample: tuple = ()


def as_arrays(records):
    """Columns of a record list as float arrays ``(time, stroke, tension, deflection)``."""
    if not len(records):
        return tuple(np.empty(0) for _ in TrialRecord._fields)
    return tuple(np.asarray(column, dtype=float) for column in zip(*records))


def load_trials(path):
    """Read and validate a trial CSV.

    :param str path:
    :returns: list of :class:`TrialRecord` with deflection in radians.
    :raises TrialFormatError: on a schema violation, naming row and column.

    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                            encoding="utf-8-sig")
    except pd.errors.EmptyDataError:
        logger.info("Trial file %s is empty", path)
        return []
    except pd.errors.ParserError as e:
        raise TrialFormatError("Malformed CSV: {}".format(e))

    header = tuple(column.strip() for column in frame.columns)
    if header != COLUMNS:
        raise TrialFormatError("Expected header {}, got {}".format(
            ",".join(COLUMNS), ",".join(header)), row=0)
    frame.columns = COLUMNS

    values = {}
    for column in COLUMNS:
        parsed = pd.to_numeric(frame[column].str.strip(), errors="coerce")
        bad = np.flatnonzero(~np.isfinite(parsed.to_numpy(dtype=float)))
        if len(bad):
            raise TrialFormatError("Not a finite number: {!r}".format(
                frame[column].iloc[bad[0]]), row=int(bad[0]) + 1, column=column)
        values[column] = parsed.to_numpy(dtype=float)

    negative = np.flatnonzero(values["force_n"] < 0)
    if len(negative):
        raise TrialFormatError("Negative tension", row=int(negative[0]) + 1,
                               column="force_n")
    backwards = np.flatnonzero(np.diff(values["time_s"]) <= 0)
    if len(backwards):
        raise TrialFormatError("Time is not strictly increasing",
                               row=int(backwards[0]) + 2, column="time_s")

    records = [TrialRecord(*row) for row in zip(
        values["time_s"], values["stroke_mm"], values["force_n"],
        np.radians(values["deflection_deg"]))]
    logger.info("Loaded %d records from %s", len(records), path)
    return records


def dump_trials(records, path):
    """Write records as a trial CSV (deflection in degrees, LF line endings)."""
    time, stroke, tension, deflection = as_arrays(records)
    frame = pd.DataFrame({
        "time_s": time,
        "stroke_mm": stroke,
        "force_n": tension,
        "deflection_deg": np.degrees(deflection),
    }, columns=list(COLUMNS))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def cycle_labels(count):
    """Band label of each cycle.

    With the full protocol the bands are cycle 1, cycles 2-30 and the last 20
    cycles; shorter trials keep the first cycle and call the last 40% steady.

    """
    if count < 1:
        return []
    if count >= PROTOCOL_CYCLES:
        steady = PROTOCOL_STEADY
    else:
        steady = min(int(math.ceil(0.4 * count)), count - 1)
    return [FIRST] + [TRANSIENT] * (count - 1 - steady) + [STEADY] * steady


def _extrema(stroke, band):
    """Alternating ``(index, is_peak)`` turning points of the stroke signal."""
    peaks, _ = find_peaks(stroke, prominence=band)
    valleys, _ = find_peaks(-stroke, prominence=band)
    events = sorted([(i, True) for i in peaks] + [(i, False) for i in valleys])

    merged = []
    for index, is_peak in events:
        if merged and merged[-1][1] == is_peak:
            previous = merged[-1][0]
            higher = stroke[index] > stroke[previous]
            if higher == is_peak:
                merged[-1] = (index, is_peak)
            continue
        merged.append((index, is_peak))
    return merged


def segment_cycles(records, band=0.05):
    """Split a trial into actuation/relaxation cycles.

    Turning points of the stroke are found with a hysteresis band: a peak or
    valley counts only if the stroke moves at least ``band`` away from it.

    :param list records: :class:`TrialRecord` list.
    :param float band: hysteresis band [mm].
    :returns: :class:`CycleSet`
    :raises NoCyclesFoundError: if the stroke never leaves the band.

    """
    if not len(records):
        raise NoCyclesFoundError("No records to segment")
    stroke = as_arrays(records)[1]
    if np.ptp(stroke) <= band:
        raise NoCyclesFoundError(
            "Stroke never exceeds the {} mm hysteresis band".format(band))

    events = _extrema(stroke, band)
    start = 0
    if events and not events[0][1]:
        start = events.pop(0)[0]
        logger.warning("Trial starts with a %.3f mm descent; keeping %d "
                       "records as lead-in", stroke[0] - stroke[start], start)

    peaks = [i for i, is_peak in events if is_peak]
    valleys = [i for i, is_peak in events if not is_peak]

    # A final rise without a turning point still counts as an actuation
    if len(valleys) == len(peaks):
        last_valley = valleys[-1] if valleys else start
        tail = stroke[last_valley:]
        if tail.max() - stroke[last_valley] > band:
            peaks.append(last_valley + int(np.argmax(tail)))
        elif not peaks:
            raise NoCyclesFoundError("Stroke never rises beyond the band")
    # the last relaxation runs to the end of the trial
    valleys = valleys[:len(peaks) - 1]

    starts = [start] + valleys
    ends = valleys + [len(records)]
    labels = cycle_labels(len(peaks))
    cycles = [Cycle(index=k + 1, label=labels[k],
                    actuation=records[starts[k]:peaks[k] + 1],
                    relaxation=records[peaks[k] + 1:ends[k]])
              for k in range(len(peaks))]
    logger.info("Found %d cycles", len(cycles))
    return CycleSet(cycles=cycles, lead_in=records[:start])


def select_cycles(cycle_set, which="steady"):
    """Cycles by band label, ``all``, or an inclusive 1-based range ``a-b``."""
    if which == "all":
        return list(cycle_set.cycles)
    if which in LABELS:
        return cycle_set.labelled(which)
    try:
        first, last = (int(part) for part in which.split("-"))
    except ValueError:
        raise ValueError("Unknown cycle selection {!r}".format(which))
    return [cycle for cycle in cycle_set.cycles if first <= cycle.index <= last]


def summarize_cycles(cycle_set):
    """Peak stroke and peak deflection of every cycle."""
    summaries = []
    for cycle in cycle_set.cycles:
        _, stroke, _, deflection = as_arrays(cycle.actuation + cycle.relaxation)
        summaries.append(CycleSummary(cycle.index, cycle.label,
                                      float(stroke.max()), float(deflection.max())))
    return summaries


def remove_deadband(segment, threshold=0.5, sustain=3, window_fraction=0.2,
                    min_fit_samples=5):
    """Remove the tendon-slack deadband from an actuation segment.

    The joint is taken to engage at the first sample where the deflection
    stays at or above ``threshold`` for ``sustain`` consecutive samples. A line
    is fitted to deflection vs stroke over the following ``window_fraction`` of
    the stroke range and extrapolated back to zero deflection; that stroke is
    the offset.

    :param list segment: :class:`TrialRecord` list (actuation only).
    :param float threshold: engagement threshold [deg].
    :returns: ``(shifted_segment, offset_mm)``
    :raises InsufficientEngagementError:

    """
    _, stroke, _, deflection = as_arrays(segment)
    above = deflection >= math.radians(threshold)
    if len(above) < sustain:
        raise InsufficientEngagementError("Segment is shorter than the sustain window")
    sustained = np.flatnonzero(
        np.lib.stride_tricks.sliding_window_view(above, sustain).all(axis=1))
    if not len(sustained):
        raise InsufficientEngagementError(
            "Deflection never sustains {} deg".format(threshold))

    onset = sustained[0]
    upper = stroke[onset] + window_fraction * np.ptp(stroke)
    window = np.zeros(len(stroke), dtype=bool)
    window[onset:] = True
    window &= (stroke >= stroke[onset]) & (stroke <= upper)
    if np.count_nonzero(window) < min_fit_samples:
        raise InsufficientEngagementError(
            "Only {:d} samples in the fit window".format(np.count_nonzero(window)))

    slope, intercept = np.polyfit(stroke[window], deflection[window], 1)
    if not slope > 0:
        raise InsufficientEngagementError("Deflection does not grow with stroke")
    offset = -intercept / slope
    shifted = [record._replace(stroke=record.stroke - offset) for record in segment]
    logger.debug("Deadband offset %.6f mm (onset at sample %d)", offset, onset)
    return shifted, float(offset)


def rmse_degrees(model, measured):
    """Root-mean-square error between two deflection series, both in degrees."""
    model = np.asarray(model, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if model.shape != measured.shape:
        raise ValueError("Length mismatch: {} vs {}".format(len(model), len(measured)))
    if not model.size:
        raise ValueError("Cannot compute RMSE of empty series")
    return float(np.sqrt(np.mean((model - measured) ** 2)))


def golden_section(f, a, b, tol, max_iterations=200):
    """Golden-section search for the minimum of a unimodal ``f`` on ``[a, b]``.

    :returns: ``(x, f(x), (a, b), iterations)`` where ``(a, b)`` is the final
        bracket.
    :raises FitConvergenceError: if the bracket is still wider than ``tol``
        after ``max_iterations``.

    """
    a, b = min(a, b), max(a, b)
    h = b - a
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    iterations = 0
    while b - a > tol:
        if iterations >= max_iterations:
            raise FitConvergenceError("Golden-section search did not converge",
                                      (a, b))
        iterations += 1
        if yc < yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
    x = c if yc < yd else d
    return x, min(yc, yd), (a, b), iterations


def _stack(segments):
    arrays = [as_arrays(segment) for segment in segments]
    if not arrays:
        return np.empty(0), np.empty(0), np.empty(0)
    _, stroke, tension, deflection = (np.concatenate(column) for column in zip(*arrays))
    used = stroke >= 0
    return stroke[used], tension[used], deflection[used]


def modulus_objective(tube, tendon, stroke, tension, deflection):
    """RMSE [deg] as a function of the tendon modulus [MPa]."""
    samples = np.column_stack([stroke, tension])
    measured = np.degrees(deflection)

    def objective(modulus):
        predicted = predict_series(tube, replace(tendon, modulus=modulus),
                                   samples, warn=False).deflection
        return rmse_degrees(np.degrees(predicted), measured)
    return objective


def scan_modulus_objective(objective, lower, upper, points=200):
    """Objective on a log-spaced grid of moduli.

    :returns: ``(log_moduli, values)``

    """
    grid = np.linspace(math.log(lower), math.log(upper), points)
    return grid, np.array([objective(math.exp(x)) for x in grid])


def _is_unimodal(values):
    steps = np.sign(np.diff(values))
    steps = steps[steps != 0]
    return not np.any((steps[:-1] > 0) & (steps[1:] < 0))


def _polish(tube, tendon, stroke, tension, deflection, modulus):
    """Least-squares step in ``1/E_t`` over the samples engaged at ``modulus``.

    Deflection is affine in ``1/E_t`` on engaged samples, so one step lands on
    the exact optimum of that subset.

    """
    arm = moment_arm(tube, tendon)
    gain = tension * tendon.free_length / (math.pi * tendon.radius ** 2 * arm)
    engaged = predict_series(tube, replace(tendon, modulus=modulus),
                             np.column_stack([stroke, tension]), warn=False).engaged
    b = gain[engaged]
    residual = stroke[engaged] / arm - deflection[engaged]
    denominator = np.dot(b, b)
    if denominator <= 0:
        return None
    compliance = np.dot(b, residual) / denominator
    if compliance <= 0:
        return None
    return 1.0 / compliance


def fit_tendon_modulus(tube, tendon, segments, deadband_offset=0.0,
                       lower=1000.0, upper=300000.0, tolerance=1e-3,
                       max_iterations=200, scan_points=200):
    """Estimate the tendon modulus from deadband-free actuation segments.

    The RMSE objective is first scanned on a log grid; golden-section search on
    ``log(E_t)`` then refines the bracket around the best grid point to
    ``tolerance`` relative width, and a closed-form step in ``1/E_t`` polishes
    the result when it lowers the error. Samples at negative (slack) stroke
    are not used.

    :param TubeSpec tube:
    :param TendonSpec tendon: its modulus is ignored.
    :param list segments: lists of :class:`TrialRecord`.
    :param float deadband_offset: reported as is [mm].
    :param float lower: search range lower bound [MPa].
    :param float upper: search range upper bound [MPa].
    :param float tolerance: relative bracket width at convergence.
    :returns: :class:`FitResult`
    :raises NonIdentifiableError: if tension is zero everywhere or the
        objective is flat.
    :raises FitConvergenceError: if the minimum sits on the search boundary or
        the search does not converge.

    """
    check_tendon(tendon, tube, require_modulus=False)
    stroke, tension, deflection = _stack(segments)
    if not len(stroke):
        raise InsufficientEngagementError("No engaged samples to fit")
    if not np.any(tension > 0):
        raise NonIdentifiableError(
            "Tension is zero in every sample; the modulus has no effect")

    objective = modulus_objective(tube, tendon, stroke, tension, deflection)
    grid, values = scan_modulus_objective(objective, lower, upper, scan_points)
    if np.ptp(values) <= 1e-12 * max(1.0, values.max()):
        raise NonIdentifiableError("Fit objective is flat over the search range")
    if not _is_unimodal(values):
        logger.warning("Fit objective is not unimodal on the scan grid; "
                       "searching around the best grid point")

    best = int(np.argmin(values))
    if best in (0, len(grid) - 1):
        raise FitConvergenceError("Minimum lies on the search boundary",
                                  (math.exp(grid[0]), math.exp(grid[-1])))

    try:
        x, error, _, iterations = golden_section(
            lambda x: objective(math.exp(x)), grid[best - 1], grid[best + 1],
            math.log1p(tolerance), max_iterations)
    except FitConvergenceError as e:
        raise FitConvergenceError("Golden-section search on E_t did not converge",
                                  tuple(math.exp(x) for x in e.bracket))
    modulus = math.exp(x)
    logger.info("Golden-section search: E_t = %.1f MPa, RMSE %.4f deg after %d "
                "iterations", modulus, error, iterations)

    polished = _polish(tube, tendon, stroke, tension, deflection, modulus)
    if polished is not None and lower <= polished <= upper:
        polished_error = objective(polished)
        if polished_error < error:
            logger.debug("Polished E_t %.1f -> %.1f MPa", modulus, polished)
            modulus, error = polished, polished_error

    return FitResult(modulus=modulus, rmse=error, deadband_offset=deadband_offset,
                     samples_used=int(len(stroke)))


def calibrate(tube, tendon, trials, which="steady", band=0.05, threshold=0.5,
              sustain=3, window_fraction=0.2, min_fit_samples=5, **fit_options):
    """Run the full pipeline on one or more trials of the same tube.

    The modulus is fitted jointly over every trial; RMSE is also reported per
    trial.

    :param list trials: list of :class:`TrialRecord` lists, one per sample.
    :param str which: cycle selection, see :func:`select_cycles`.
    :returns: :class:`Calibration` ``(result, cycle_sets, segments)`` where
        ``segments`` holds the shifted actuation segments of each trial.
    :raises PipelineError: naming the failing stage.

    """
    cycle_sets, segments, offsets = [], [], []
    for records in trials:
        try:
            cycle_set = segment_cycles(records, band=band)
            selected = select_cycles(cycle_set, which)
            if not selected:
                raise NoCyclesFoundError("No cycles match selection {!r}".format(which))
        except (NoCyclesFoundError, ValueError) as e:
            raise PipelineError("segment", e)
        cycle_sets.append(cycle_set)

        shifted = []
        try:
            for cycle in selected:
                segment, offset = remove_deadband(
                    cycle.actuation, threshold=threshold, sustain=sustain,
                    window_fraction=window_fraction,
                    min_fit_samples=min_fit_samples)
                shifted.append(segment)
                offsets.append(offset)
        except InsufficientEngagementError as e:
            raise PipelineError("deadband", e)
        segments.append(shifted)

    try:
        result = fit_tendon_modulus(
            tube, tendon, [s for shifted in segments for s in shifted],
            deadband_offset=float(np.mean(offsets)), **fit_options)
    except (NonIdentifiableError, FitConvergenceError,
            InsufficientEngagementError) as e:
        raise PipelineError("fit", e)

    fitted = replace(tendon, modulus=result.modulus)
    by_sample = []
    for shifted in segments:
        stroke, tension, deflection = _stack(shifted)
        predicted = predict_series(tube, fitted, np.column_stack([stroke, tension]),
                                   warn=False).deflection
        by_sample.append(rmse_degrees(np.degrees(predicted), np.degrees(deflection)))
    result = replace(result, rmse_by_sample=tuple(by_sample))
    return Calibration(result, cycle_sets, segments)


def fit_result_to_dict(result):
    return {
        "e_t_mpa": result.modulus,
        "rmse_deg": result.rmse,
        "deadband_mm": result.deadband_offset,
        "samples_used": result.samples_used,
        "rmse_by_sample_deg": list(result.rmse_by_sample),
    }


def fit_result_from_dict(data):
    return FitResult(modulus=data["e_t_mpa"], rmse=data["rmse_deg"],
                     deadband_offset=data["deadband_mm"],
                     samples_used=data["samples_used"],
                     rmse_by_sample=tuple(data.get("rmse_by_sample_deg", ())))


def linear_tension(stiffness):
    """Tension profile ``F = stiffness * engaged_stroke`` [N/mm]."""
    return lambda engaged: stiffness * np.asarray(engaged, dtype=float)


def synthesize_trials(tube, tendon, cycles=50, slack=0.3, first_cycle_scale=1.15,
                      drift=0.05, noise=0.2, tension=None, max_stroke=None,
                      samples_per_stroke=200, sample_period=0.01, seed=None):
    """Generate a cyclic trial from the model.

    Stroke is a triangle wave from zero to ``max_stroke``. The tendon takes up
    ``slack`` before it pulls; tension follows ``tension(engaged_stroke)``. The
    first cycle's deflection is scaled by ``first_cycle_scale``; transient
    cycles start ``drift`` above the model and settle linearly onto it; steady
    cycles follow the model. Gaussian noise of ``noise`` degrees is added to
    the deflection.

    :param TubeSpec tube:
    :param TendonSpec tendon: with the ground-truth modulus.
    :param callable tension: engaged stroke [mm] -> tension [N]; defaults to
        :func:`linear_tension` at 0.5 N/mm.
    :param float max_stroke: [mm]; defaults to ``tube.max_stroke`` or 2.5 mm.
    :param int seed: seed for the noise generator.
    :returns: list of :class:`TrialRecord`

    """
    if tension is None:
        tension = linear_tension(0.5)
    if max_stroke is None:
        max_stroke = tube.max_stroke or 2.5
    rng = np.random.default_rng(seed)

    phase = np.arange(2 * samples_per_stroke) / samples_per_stroke
    wave = max_stroke * np.where(phase <= 1, phase, 2 - phase)
    stroke = np.concatenate([np.tile(wave, cycles), [0.0]])

    labels = cycle_labels(cycles)
    last_transient = max([k + 1 for k, label in enumerate(labels)
                          if label == TRANSIENT] or [2])
    scales = []
    for k, label in enumerate(labels, start=1):
        if label == FIRST:
            scales.append(first_cycle_scale)
        elif label == TRANSIENT:
            scales.append(1 + drift * (last_transient - k) / max(last_transient - 1, 1))
        else:
            scales.append(1.0)
    scale = np.concatenate([np.repeat(scales, len(wave)), [scales[-1]]])

    engaged = np.maximum(stroke - slack, 0.0)
    force = tension(engaged)
    deflection = predict_series(tube, tendon, np.column_stack([engaged, force]),
                                warn=False).deflection
    deflection = deflection * scale
    if noise:
        deflection = deflection + math.radians(noise) * rng.standard_normal(len(stroke))

    time = np.arange(len(stroke)) * sample_period
    return [TrialRecord(*row) for row in zip(time, stroke, force, deflection)]
