"""Command-line entry point: ``jrc-rsp {simulate,sweep,complexity,psf,plot}``.

Exit codes: 0 success, 1 invalid input (bad flags, scenario or values),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, plots
from .clean import psf
from .complexity import complexity_table
from .fxp import parse_mode
from .music import dump_spectrum_csv
from .params import RadarParams, ScenarioParseError, ValidationError, bundled_configs, load_scenario
from .rsp_ra import RangeAzimuthImage, dump_image_csv

log = logging.getLogger("jrc_rsp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this CLI reserves 2 for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _mode(text: str) -> str:
    try:
        return str(parse_mode(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _music_mode(text: str) -> str:
    return text if text == "follow" else _mode(text)


def _add_common(p: argparse.ArgumentParser, scenario_default: str | None = "ci") -> None:
    p.add_argument("--scenario", default=scenario_default,
                   help=f"scenario file or bundled name ({', '.join(bundled_configs())})")
    p.add_argument("--mode", type=_mode, default="f64",
                   help="MF-stage arithmetic: f64, f32, fx<W,L> or fxW_L (default f64)")
    p.add_argument("--music-mode", type=_music_mode, default="f64",
                   help="MUSIC arithmetic, same choices as --mode (default f64)")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario rng_seed")
    p.add_argument("--trials", type=int, help="override the scenario trial count")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jrc-rsp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run trials of one scenario; write detections and MUSIC spectra")
    _add_common(p)
    p.add_argument("--snr", type=float, action="append",
                   help="SNR in dB (repeatable; default: the scenario's list)")
    p.set_defaults(trials_default=1)

    p = sub.add_parser("sweep", help="Monte Carlo RMSE while varying one parameter")
    p.add_argument("kind", choices=bench.SWEEP_KINDS)
    _add_common(p)
    p.add_argument("--values", help="start:step:stop or comma list; word lengths as mode names")
    p.add_argument("--threads", type=int, help="worker threads (default RSP_THREADS or CPU count)")
    p.add_argument("--snr", type=float, action="append",
                   help="fixed SNR in dB for non-snr sweeps (repeatable; default: the scenario's list)")

    p = sub.add_parser("complexity", help="operation counts and direct/efficient ratios")
    p.add_argument("--config", default="default",
                   help="'default' for the built-in radar parameters, or a scenario file/bundled name")
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.add_argument("--out-dir", type=Path, help="also write complexity.csv here")

    p = sub.add_parser("psf", help="dump the point spread image used by CLEAN")
    p.add_argument("--scenario", default="ci", help="scenario file or bundled name")
    p.add_argument("--range-bin", type=int, default=100)
    p.add_argument("--azimuth-bin", type=int, help="default: broadside")
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("plot", help="render a CSV written by this tool as SVG")
    p.add_argument("csv", type=Path)
    p.add_argument("-o", "--output", type=Path, help="default: the CSV path with .svg")
    return parser


def _scenario(args):
    sc = load_scenario(args.scenario)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["rng_seed"] = args.seed
    trials = getattr(args, "trials", None)
    if trials is None:
        trials = getattr(args, "trials_default", None)
    if trials is not None:
        changes["trials"] = trials
    return sc.with_(**changes) if changes else sc


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    snrs = tuple(args.snr) if args.snr else sc.snr_db
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    music_mode = args.mode if args.music_mode == "follow" else args.music_mode
    results = []
    for snr in snrs:
        for t in range(sc.trials):
            r = bench.run_trial(sc, t, snr, args.mode, music_mode, keep_spectra=True)
            results.append(r)
            for d, spec in zip(r.detections, r.spectra):
                path = out / f"music_t{t}_snr{snr:g}_d{d.iteration}.csv"
                dump_spectrum_csv(spec, path)
    _write(out / "detections.csv", bench.rows_to_csv(bench.detection_rows(results), bench.DETECTION_FIELDS))
    for r in results:
        for d in r.detections:
            print(f"trial {r.trial} snr {r.snr_db:g} dB: r={d.range_m:.3f} m az={d.azimuth_deg:g} deg "
                  f"v={d.velocity_mps:.2f} m/s |a|={d.amplitude:.4g}")
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    if args.snr:
        sc = sc.with_(snr_db=tuple(args.snr))
    if args.values is None:
        if args.kind != "snr":
            raise ValidationError(f"sweep {args.kind} needs --values")
        values = list(sc.snr_db)
    else:
        values = args.values
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rows = bench.sweep(args.kind, sc, values, args.mode, args.music_mode, args.threads,
                       progress=log.info)
    csv_path = args.out_dir / f"rmse_vs_{args.kind}.csv"
    _write(csv_path, bench.rows_to_csv(rows))
    plots.plot_rmse(csv_path, csv_path.with_suffix(".svg"))
    log.info("wrote %s", csv_path.with_suffix(".svg"))
    return 0


def cmd_complexity(args) -> int:
    params = RadarParams() if args.config == "default" else load_scenario(args.config).params
    params.validate()
    rows = complexity_table(params)
    fields = ("path", "cm", "ca_inputs", "mem_words")
    csv_text = bench.rows_to_csv(rows, fields)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        _write(args.out_dir / "complexity.csv", csv_text)
    if args.format == "csv":
        sys.stdout.write(csv_text)
    else:
        print(f"K={params.K} Q={params.Q} I={params.I} (per packet)\n")
        print("| " + " | ".join(fields) + " |")
        print("|" + "---|" * len(fields))
        for r in rows:
            print("| " + " | ".join(str(r[f]) for f in fields) + " |")
    return 0


def cmd_psf(args) -> int:
    sc = load_scenario(args.scenario)
    p = sc.params
    pipe = bench.pipeline_for(p)
    az = p.I // 2 if args.azimuth_bin is None else args.azimuth_bin
    img = psf(p, pipe.waveform, pipe.steering, 1.0, args.range_bin, az)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    path = args.out_dir / "psf.csv"
    dump_image_csv(RangeAzimuthImage(img, parse_mode("f64"), np.arange(img.shape[1])), path)
    log.info("wrote %s", path)
    plots.plot_image(path, path.with_suffix(".svg"), p.range_res)
    log.info("wrote %s", path.with_suffix(".svg"))
    return 0


def cmd_plot(args) -> int:
    out = plots.plot_csv(args.csv, args.output)
    print(out)
    return 0


COMMANDS = dict(simulate=cmd_simulate, sweep=cmd_sweep, complexity=cmd_complexity,
                psf=cmd_psf, plot=cmd_plot)


def _join_negative_values(argv: list[str]) -> list[str]:
    # "--values -15:5:10" would otherwise read as an unknown option
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--values", "--snr") and i + 1 < len(argv) and argv[i + 1][:1] == "-":
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, ScenarioParseError, FileNotFoundError, ValueError) as exc:
        print(f"jrc-rsp: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"jrc-rsp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
