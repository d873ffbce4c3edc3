# [file name]: atomsense/cli.py
"""
Command-line scenario runner: static-run, dynamic-run, velocimetry, allan,
hybridize and budget. Each writes CSV tables (and optional SVG plots) into
the output directory.
"""

import argparse
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from atomsense import __version__
from atomsense.analysis import (
    AdevCurve,
    allan_deviation,
    correlation_coefficient,
    fit_contrast_decay,
    fit_noise_floors,
    systematic_budget,
)
from atomsense.errors import AtomSenseError, ConfigError, FitFailed, InputFormatError
from atomsense.fusion import HybridSeries, pick_gain, run_hybrid
from atomsense.interferometer import contrast_decay
from atomsense.raman_velocimetry import (
    TplsParams,
    default_grid,
    fit_velocity,
    rabi_lineshape,
    run_velocimetry_campaign,
    simulate_spectrum,
    tpls_comparison,
)
from atomsense.rng import stream
from atomsense.sensors_and_noise import SensorTrace
from atomsense.sequencer import CONFIG_NAMES, DynamicDrive, StaticCampaign, demodulate_dynamic, run_fringe_scan
from utils.config_manager import ScenarioConfig, get_config_manager
from utils.log import get_logger, setup_logging
from utils.plot_renderer import PlotRenderer
from utils.run_data_manager import RunDataManager, read_csv_columns
from utils.stream_processor import CAMPAIGN_HEADER, CampaignStreamProcessor
from utils.worker_pool import ParallelMap

logger = get_logger("CLI")

ADEV_HEADER = ("tau_s", "sigma", "ci_low", "ci_high")
HYBRID_HEADER = ("t_s", "hybrid_value", "classical_value", "bias_estimate", "atomic_value_if_present")
DYNAMIC_HEADER = (
    "omega_d_rad_s", "v_sign", "effective_rate_rad_s", "classical_rad_s", "recovered_rad_s", "contrast_plus",
    "contrast_minus", "contrast", "contrast_model", "euler_fraction", "temperature_fit_uk", "fit_ok",
)
LAUNCH_DIRECTIONS = (1, -1)


def adev_rows(curve: AdevCurve):
    return zip(curve.taus, curve.sigmas, curve.ci_low, curve.ci_high)


def hybrid_rows(series: HybridSeries):
    return zip(series.t, series.hybrid, series.classical, series.bias, series.atomic)


class RunContext:
    """Resolved config plus the output helpers of one subcommand."""

    def __init__(self, command: str, args: argparse.Namespace):
        overrides: dict = {}
        if args.seed is not None:
            overrides.setdefault("run", {})["master_seed"] = args.seed
        if args.threads is not None:
            overrides.setdefault("run", {})["threads"] = args.threads
        if args.out_dir is not None:
            overrides.setdefault("run", {})["out_dir"] = str(args.out_dir)
        if getattr(args, "duration", None) is not None:
            overrides.setdefault("run", {})["duration_s"] = float(args.duration)
        if args.plot is not None:
            overrides.setdefault("output", {})["plot"] = bool(args.plot)

        self.config: ScenarioConfig = get_config_manager().load(args.config, overrides)
        self.seed = self.config.seed
        out_dir = Path(self.config.value("run", "out_dir"))
        self.data = RunDataManager(out_dir, command, self.config.hash, self.seed)
        self.plots = PlotRenderer(out_dir, bool(self.config.value("output", "plot")), self.config.hash, self.seed)
        threads = int(self.config.value("run", "threads"))
        self.pool = ParallelMap(threads or None)

    def close(self):
        self.pool.close()


def hybridize_axis(ctx: RunContext, name: str, classical: SensorTrace, atomic_t, atomic_values,
                   window: float, configured_gain: float):
    """ADEVs, gain choice and hybrid series for one axis; writes its CSVs."""
    atomic_t = np.asarray(atomic_t, dtype=float)
    atomic_values = np.asarray(atomic_values, dtype=float)
    block_classical = classical.block_means(atomic_t, window)
    atomic_adev = allan_deviation(atomic_values, window)
    classical_adev = allan_deviation(block_classical, window)

    if configured_gain > 0:
        gain, tau_cross, fallback = configured_gain, float("nan"), False
    else:
        fallback_gain = float(ctx.config.value("fusion", "fallback_gain"))
        gain, tau_cross, fallback = pick_gain(atomic_adev, classical_adev, window, fallback_gain)

    series = run_hybrid(classical, atomic_t, atomic_values, window, gain)
    hybrid_adev = allan_deviation(series.block_hybrid, window)
    ctx.data.write_csv(f"hybrid_{name}.csv", HYBRID_HEADER, hybrid_rows(series))
    ctx.data.write_csv(f"adev_classical_{name}.csv", ADEV_HEADER, adev_rows(classical_adev))
    ctx.data.write_csv(f"adev_hybrid_{name}.csv", ADEV_HEADER, adev_rows(hybrid_adev))
    return {
        "gain": gain, "tau_cross": tau_cross, "fallback": fallback,
        "atomic": atomic_adev, "classical": classical_adev, "hybrid": hybrid_adev, "series": series,
    }


def consume_campaign(processor: CampaignStreamProcessor, records) -> list:
    """Drain a static campaign through the processor, logging its progress events."""
    for event in processor.process(records):
        kind = event["type"]
        if kind == "progress":
            logger.info(f"{event['blocks']}/{event['total']} blocks, t={event['t']:.0f} s")
        elif kind == "fringe_lost":
            logger.error(f"fringe lost after {event['blocks']} blocks: {event['message']}")
        elif kind == "done":
            logger.info(f"campaign complete, {event['blocks']} blocks")
    return processor.records


def cmd_static_run(args: argparse.Namespace) -> int:
    ctx = RunContext("static-run", args)
    try:
        config = ctx.config
        scene, cycle = config.static_scene(), config.cycle_config()
        campaign = StaticCampaign(config.si("run", "duration_s"), scene, cycle)
        processor = CampaignStreamProcessor(campaign.n_blocks)
        records = consume_campaign(processor, campaign.records())
        data = ctx.data
        block = cycle.block_duration

        data.write_csv("campaign.csv", CAMPAIGN_HEADER, processor.campaign_rows())
        data.write_csv(
            "classical.csv", ("t_s", "accel_mps2", "gyro_rads"),
            zip(campaign.classical_accel.times, campaign.classical_accel.samples, campaign.classical_gyro.samples),
        )
        shots = campaign.shots
        centered = shots.centered_alpha()
        data.write_csv("correlation.csv",
                       ("t_s", "config", "alpha_accel_mps2", "alpha_centered_mps2", "a_conv_mps2"),
                       zip(shots.t, shots.config, shots.alpha_accel, centered, shots.a_conv))
        if config.value("output", "save_traces"):
            data.write_trace("vibration.bin", campaign.vibration)

        t = processor.column("t")
        series = {
            "accel": processor.column("a"),
            "accel_uncorrected": processor.column("a_uncorrected"),
            "rotation": processor.column("omega"),
            "rotation_uncorrected": processor.column("omega_uncorrected"),
        }
        curves = {}
        for name, values in series.items():
            curves[name] = allan_deviation(values, block)
            data.write_csv(f"adev_{name}.csv", ADEV_HEADER, adev_rows(curves[name]))

        accel = hybridize_axis(ctx, "accel", campaign.classical_accel, t, series["accel"], block,
                               float(config.value("fusion", "accel_gain")))
        rotation = hybridize_axis(ctx, "rotation", campaign.classical_gyro, t, series["rotation"], block,
                                  float(config.value("fusion", "rotation_gain")))

        floor_rows = []
        for name, curve in list(curves.items()) + [("classical_accel", accel["classical"]),
                                                   ("classical_rotation", rotation["classical"])]:
            floors = fit_noise_floors(curve)
            floor_rows.append((name, floors.white, floors.flicker, floors.random_walk))
        data.write_csv("noise_floors.csv", ("series", "white", "flicker", "random_walk"), floor_rows)
        data.write_csv(
            "gains.csv", ("axis", "gain", "tau_cross_s", "fallback_used"),
            [("accel", accel["gain"], accel["tau_cross"], accel["fallback"]),
             ("rotation", rotation["gain"], rotation["tau_cross"], rotation["fallback"])],
        )

        r = correlation_coefficient(shots.a_conv, centered) if len(shots.t) > 2 else float("nan")
        logger.info(f"{len(records)} blocks; per-shot vibration correlation r = {r:.3f}")

        plots = ctx.plots
        plots.adev("adev_accel.svg", {"atomic": curves["accel"], "classical": accel["classical"],
                                      "hybrid": accel["hybrid"]}, "Acceleration", "m/s²")
        plots.adev("adev_rotation.svg", {"atomic": curves["rotation"],
                                         "atomic, uncorrected": curves["rotation_uncorrected"],
                                         "classical": rotation["classical"], "hybrid": rotation["hybrid"]},
                   "Rotation", "rad/s")
        plots.tracks("tracks.svg", t, {"a − mean (m/s²)": series["accel"] - np.mean(series["accel"]),
                                       "Ω − mean (rad/s)": series["rotation"] - np.mean(series["rotation"])},
                     "deviation")
        plots.correlation("correlation.svg", shots.a_conv, centered, r)
    finally:
        ctx.close()
    return 0


def _omega_label(omega_mrad: float) -> str:
    return f"{omega_mrad:g}".replace(".", "p").replace("-", "m")


def cmd_dynamic_run(args: argparse.Namespace) -> int:
    ctx = RunContext("dynamic-run", args)
    try:
        config = ctx.config
        settings = config.dynamic_settings()
        n_shots = config.cycle_config().shots_per_point
        omegas_mrad = args.omega_d if args.omega_d else config.value("dynamic", "omega_d_mrad_s")
        k_eff = settings.species.k_eff
        sigma_v = settings.species.velocity_dispersion(settings.temperature)
        T, v_l = settings.T, settings.v_l

        # one ±k reference pair per launch direction, scan indices 0..3
        reference = config.dynamic_drive(0.0)
        references = {}
        for j, v_sign in enumerate(LAUNCH_DIRECTIONS):
            references[v_sign] = (
                run_fringe_scan(reference, 1, v_sign, n_shots, settings, scan_index=2 * j, pool=ctx.pool),
                run_fringe_scan(reference, -1, v_sign, n_shots, settings, scan_index=2 * j + 1, pool=ctx.pool),
            )

        summary = []
        fringe_plot = []
        for i, omega_mrad in enumerate(omegas_mrad):
            drive: DynamicDrive = config.dynamic_drive(float(omega_mrad) * 1e-3)
            effective = drive.effective_rate(T)
            model_contrast = contrast_decay(k_eff, sigma_v, T, abs(effective))
            euler = drive.euler_fraction(settings.offset, v_l, T)
            rows = []
            for j, v_sign in enumerate(LAUNCH_DIRECTIONS):
                index = 4 + 4 * i + 2 * j
                try:
                    plus = run_fringe_scan(drive, 1, v_sign, n_shots, settings, scan_index=index, pool=ctx.pool)
                    minus = run_fringe_scan(drive, -1, v_sign, n_shots, settings, scan_index=index + 1,
                                            pool=ctx.pool)
                except FitFailed as e:
                    logger.warning(f"Ω_d = {omega_mrad} mrad/s, v {v_sign:+d}: {e}")
                    summary.append([drive.omega_d, v_sign, effective] + [float("nan")] * 5
                                   + [model_contrast, euler, float("nan"), 0])
                    continue
                ref_plus, ref_minus = references[v_sign]
                recovered = demodulate_dynamic(
                    (plus.alpha_star, minus.alpha_star, ref_plus.alpha_star, ref_minus.alpha_star),
                    v_sign * v_l, k_eff,
                )
                # gyroscope readings projected on this launch axis, drive minus reference
                classical = 0.5 * (plus.classical_rate + minus.classical_rate
                                   - ref_plus.classical_rate - ref_minus.classical_rate)
                for k_sign, scan in ((1, plus), (-1, minus)):
                    label = CONFIG_NAMES[(k_sign, v_sign)]
                    rows.extend((label, a, ac, p) for a, ac, p in zip(scan.alphas, scan.alphas_corrected, scan.p2))
                    fringe_plot.append((f"{omega_mrad:g} mrad/s {label}", scan.alphas_corrected, scan.p2, scan.fit))
                summary.append([
                    drive.omega_d, v_sign, effective, classical, recovered,
                    plus.fit.contrast / settings.contrast, minus.fit.contrast / settings.contrast,
                    0.5 * (plus.ensemble_contrast + minus.ensemble_contrast), model_contrast, euler,
                    float("nan"), 1,
                ])
            if rows:
                ctx.data.write_csv(f"fringe_{_omega_label(float(omega_mrad))}mrad.csv",
                                   ("config", "alpha_rad_s2", "alpha_corrected_rad_s2", "p2"), rows)

        column = DYNAMIC_HEADER.index
        for v_sign in LAUNCH_DIRECTIONS:
            ok = [row for row in summary if row[column("v_sign")] == v_sign and row[column("fit_ok")] == 1]
            if len(ok) < 3 or settings.rabi_weighting:
                continue
            try:
                decay = fit_contrast_decay([r[column("effective_rate_rad_s")] for r in ok],
                                           [r[column("contrast")] for r in ok], k_eff, T, settings.species)
            except FitFailed as e:
                logger.warning(f"contrast decay fit, v {v_sign:+d}: {e}")
                continue
            logger.info(f"contrast decay temperature, v {v_sign:+d}: {decay.temperature * 1e6:.3f} µK")
            for row in ok:
                row[column("temperature_fit_uk")] = decay.temperature * 1e6

        ctx.data.write_csv("dynamic_summary.csv", DYNAMIC_HEADER, summary)

        ctx.plots.fringes("fringes.svg", fringe_plot, T)
        for v_sign in LAUNCH_DIRECTIONS:
            rows = [r for r in summary if r[column("v_sign")] == v_sign]
            ctx.plots.linearity(f"linearity_{'plus' if v_sign > 0 else 'minus'}_v.svg",
                                [r[column("omega_d_rad_s")] for r in rows],
                                [r[column("recovered_rad_s")] for r in rows],
                                [r[column("classical_rad_s")] for r in rows])
    finally:
        ctx.close()
    return 0


def cmd_velocimetry(args: argparse.Namespace) -> int:
    ctx = RunContext("velocimetry", args)
    try:
        config = ctx.config
        settings = config.velocimetry_settings()
        n_spectra = args.n_spectra if args.n_spectra is not None else int(config.value("velocimetry", "n_spectra"))
        if n_spectra < 1:
            raise ConfigError(f"--n-spectra must be >= 1, got {n_spectra}")
        v0 = config.launch_speed()
        drift = config.drift_model()
        species = settings.species

        series = run_velocimetry_campaign(v0, n_spectra, settings, drift, ctx.seed, pool=ctx.pool)
        ctx.data.write_csv("velocity.csv", ("t_s", "v_m_per_s", "stat_err", "v_true_m_per_s"),
                           zip(series.t, series.v, series.stat_err, series.v_true))

        grid = default_grid(v0, species.k_eff, settings.pulse_duration, settings.n_points)
        example = simulate_spectrum(series.v_true[0], settings.pulse_duration, settings.rabi, grid,
                                    stream(ctx.seed, "spectrum", 0), species, settings.noise,
                                    settings.copropagating_amplitude)
        ctx.data.write_csv("spectrum_example.csv", ("freq_offset_hz", "p2", "p2_err"),
                           zip(example.freq_offset_hz, example.p2, example.p2_err))

        if n_spectra >= 3:
            curve = allan_deviation(series.v, settings.spectrum_period)
            ctx.data.write_csv("adev_velocity.csv", ADEV_HEADER, adev_rows(curve))
            ctx.plots.adev("adev_velocity.svg", {"velocity": curve}, "Launch velocity", "m/s")
        else:
            logger.warning(f"{n_spectra} spectra: too few for an Allan deviation")

        pulses = config.si("velocimetry", "tpls_pulses_us")
        rows = tpls_comparison(v0, pulses, settings, ctx.seed)
        ctx.data.write_csv("tpls_comparison.csv", ("pulse_us", "v_uncorrected", "v_corrected", "stat_err"),
                           [(r.pulse_duration * 1e6, r.v_uncorrected, r.v_corrected, r.stat_err) for r in rows])

        model = sum(line.amplitude * rabi_lineshape(grid, line.center, example.rabi, example.pulse_duration)
                    for line in example.lines)
        ctx.plots.spectrum("spectrum_example.svg", example.freq_offset_hz, example.p2, model)
        ctx.plots.tpls("tpls_comparison.svg", [r.pulse_duration for r in rows], [r.v_uncorrected for r in rows],
                       [r.v_corrected for r in rows], [r.stat_err for r in rows], v0)
        ctx.plots.tracks("velocity.svg", series.t, {"fitted": series.v, "true": series.v_true}, "v (m/s)")

        tpls = TplsParams(settings.rabi, species.k_eff * v0, species.recoil_frequency)
        v_first, err_first = fit_velocity(example, species.k_eff, settings.correct_tpls, tpls)
        logger.info(f"first spectrum: v = {v_first:.6f} ± {err_first:.1e} m/s")
    finally:
        ctx.close()
    return 0


def _uniform_dt(t: np.ndarray, path) -> float:
    if t.size < 2:
        raise InputFormatError(path, 1, "need at least two samples to infer the sample interval")
    steps = np.diff(t)
    dt = float(np.median(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise InputFormatError(path, 1, "t_s is not uniformly sampled; pass --dt")
    return dt


def cmd_allan(args: argparse.Namespace) -> int:
    ctx = RunContext("allan", args)
    try:
        if args.dt is not None:
            columns = read_csv_columns(args.input, [args.column])
            dt = float(args.dt)
        else:
            columns = read_csv_columns(args.input, ["t_s", args.column])
            dt = _uniform_dt(columns["t_s"], args.input)
        curve = allan_deviation(columns[args.column], dt)
        ctx.data.write_csv(f"adev_{args.column}.csv", ADEV_HEADER, adev_rows(curve))
        ctx.plots.adev(f"adev_{args.column}.svg", {args.column: curve}, args.column, "")
    finally:
        ctx.close()
    return 0


def cmd_hybridize(args: argparse.Namespace) -> int:
    ctx = RunContext("hybridize", args)
    try:
        config = ctx.config
        window = config.cycle_config().block_duration
        campaign = read_csv_columns(args.campaign, ["t_s", "a_mps2", "omega_rads"])
        classical = read_csv_columns(args.classical, ["t_s", "accel_mps2", "gyro_rads"])
        dt = _uniform_dt(classical["t_s"], args.classical)
        start = float(classical["t_s"][0])
        results = {}
        for name, column, atomic, gain_key in (("accel", "accel_mps2", "a_mps2", "accel_gain"),
                                               ("rotation", "gyro_rads", "omega_rads", "rotation_gain")):
            trace = SensorTrace(1.0 / dt, classical[column], start)
            results[name] = hybridize_axis(ctx, name, trace, campaign["t_s"], campaign[atomic], window,
                                           float(config.value("fusion", gain_key)))
        ctx.data.write_csv(
            "gains.csv", ("axis", "gain", "tau_cross_s", "fallback_used"),
            [(name, r["gain"], r["tau_cross"], r["fallback"]) for name, r in results.items()],
        )
    finally:
        ctx.close()
    return 0


def cmd_budget(args: argparse.Namespace) -> int:
    ctx = RunContext("budget", args)
    try:
        entries = systematic_budget(ctx.config.budget_inputs())
        ctx.data.write_csv("budget.csv", ("term", "axis", "value", "units", "inputs_hash"),
                           [(e.term, e.axis, e.value, e.units, e.inputs_hash) for e in entries])
        ctx.plots.budget_table("budget.svg", entries)
    finally:
        ctx.close()
    return 0


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="scenario file (TOML, YAML or JSON)")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out-dir", type=Path, default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    common.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None, help="write SVG plots")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress (INFO)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="atomsense", description="Cold-atom accelerometer-gyroscope simulator")
    parser.add_argument("--version", action="version", version=f"atomsense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("static-run", parents=[common], help="static ±k/±v campaign")
    p.add_argument("--duration", type=float, default=None, help="simulated duration (s)")
    p.set_defaults(handler=cmd_static_run)

    p = sub.add_parser("dynamic-run", parents=[common], help="fringe scans under a driven rotation")
    p.add_argument("--omega-d", type=float, nargs="+", default=None, help="drive amplitudes (mrad/s)")
    p.set_defaults(handler=cmd_dynamic_run)

    p = sub.add_parser("velocimetry", parents=[common], help="Raman spectra and launch velocity")
    p.add_argument("--n-spectra", type=int, default=None, help="number of spectra")
    p.set_defaults(handler=cmd_velocimetry)

    p = sub.add_parser("allan", parents=[common], help="Allan deviation of a CSV column")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--dt", type=float, default=None, help="sample interval (s); inferred from t_s if omitted")
    p.set_defaults(handler=cmd_allan)

    p = sub.add_parser("hybridize", parents=[common], help="hybridize campaign and classical CSVs")
    p.add_argument("--campaign", type=Path, required=True)
    p.add_argument("--classical", type=Path, required=True)
    p.set_defaults(handler=cmd_hybridize)

    p = sub.add_parser("budget", parents=[common], help="systematic error budget")
    p.set_defaults(handler=cmd_budget)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("INFO" if args.verbose else None)
    try:
        return args.handler(args)
    except AtomSenseError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"Error: unexpected {type(e).__name__}: {e}", file=sys.stderr)
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
