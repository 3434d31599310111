"""Command-line front end.

    eventoptics double-slit [--seed N] [--events N] ...
    eventoptics two-beam ...
    eventoptics biprism --screen-offset 7mm,15mm,55mm ...
    eventoptics custom --config run.cfg

Each run writes ``<stem>.csv`` (counts profile), ``<stem>.fit.txt`` (fit
report) and ``<stem>.cfg`` (the exact configuration, re-usable with
``custom --config``) into the output directory, which defaults to
``$EVENTOPTICS_OUT`` or the current directory.

Exit status: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

from . import harness
from .errors import EventOpticsError
from .harness import ExperimentConfig
from .optics import BiprismSpec, PlaneScreen, SemicircleScreen
from .sources import BiprismPoint, DoubleSlit, GaussianTwin, SourceSpec

OUT_ENV = "EVENTOPTICS_OUT"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

LENGTH_UNITS = {"nm": Fraction(1, 10**9), "um": Fraction(1, 10**6), "µm": Fraction(1, 10**6),
                "mm": Fraction(1, 10**3), "cm": Fraction(1, 100), "m": Fraction(1)}
ANGLE_UNITS = {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180.0}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zµ]*)\s*$")

LENGTH_KEYS = {"wavelength", "slit_width", "separation", "sigma", "apex_x", "source_x",
               "radius", "distance"}
ANGLE_KEYS = {"summit_angle", "aperture_start", "aperture_stop"}
FLOAT_KEYS = {"refractive_index", "gamma"}
INT_KEYS = {"detectors", "events", "seed", "replicas"}
WORD_KEYS = {"experiment", "screen"}
ALL_KEYS = LENGTH_KEYS | ANGLE_KEYS | FLOAT_KEYS | INT_KEYS | WORD_KEYS | {"screen_start", "screen_stop"}


class UsageError(Exception):
    pass


def _split(text: str):
    m = _QUANTITY.match(text)
    if not m:
        raise UsageError(f"cannot parse quantity {text!r}")
    return m.group(1), m.group(2)


def parse_length(text: str) -> float:
    """``'670nm'`` -> ``6.7e-07``; the unit is mandatory.

    Conversion is exact rational arithmetic, so the result is the double
    nearest the decimal value written.
    """
    number, unit = _split(text)
    if unit not in LENGTH_UNITS:
        raise UsageError(f"length {text!r} needs a unit ({', '.join(LENGTH_UNITS)})")
    return float(Fraction(number) * LENGTH_UNITS[unit])


def parse_angle(text: str) -> float:
    number, unit = _split(text)
    if unit not in ANGLE_UNITS:
        raise UsageError(f"angle {text!r} needs a unit ({', '.join(ANGLE_UNITS)})")
    if unit == "deg":
        return math.radians(float(number))
    if unit == "rad":
        return float(number)
    return float(Fraction(number) / 1000)


def parse_lengths(text: str) -> List[float]:
    return [parse_length(part) for part in text.split(",") if part.strip()]


def _argtype(fn):
    def convert(text):
        try:
            return fn(text)
        except (UsageError, ValueError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    convert.__name__ = fn.__name__
    return convert


# -- config files ---------------------------------------------------------

def format_config(config: ExperimentConfig) -> str:
    """Flat ``key = value`` text with explicit units; reads back exactly."""
    angular = isinstance(config.screen, SemicircleScreen)
    lines = []
    for key, value in config.items():
        if key in LENGTH_KEYS or (key in ("screen_start", "screen_stop") and not angular):
            text = f"{value!r}m"
        elif key in ANGLE_KEYS or key in ("screen_start", "screen_stop"):
            text = f"{value!r}rad"
        else:
            text = str(value) if not isinstance(value, float) else repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def read_config_text(text: str) -> dict:
    values = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"line {number}: expected key = value")
        if key not in ALL_KEYS:
            raise UsageError(f"line {number}: unknown key {key!r}")
        if key in values:
            raise UsageError(f"line {number}: duplicate key {key!r}")
        values[key] = value
    return values


def config_from_mapping(values: dict) -> ExperimentConfig:
    """Build a configuration from raw ``key -> text`` pairs.

    Unspecified keys take the canonical defaults of the named experiment.
    """
    values = dict(values)
    experiment = values.pop("experiment", None)
    if experiment not in ("double-slit", "two-beam", "biprism"):
        raise UsageError("config needs experiment = double-slit | two-beam | biprism")
    default_screen = "semicircle" if experiment == "double-slit" else "plane"
    screen_kind = values.pop("screen", default_screen)
    if screen_kind not in ("semicircle", "plane"):
        raise UsageError(f"unknown screen {screen_kind!r}")
    if experiment == "biprism" and screen_kind != "plane":
        raise UsageError("the biprism experiment needs a plane screen")

    parsed = {}
    for key, text in values.items():
        try:
            if key in LENGTH_KEYS:
                parsed[key] = parse_length(text)
            elif key in ANGLE_KEYS:
                parsed[key] = parse_angle(text)
            elif key in ("screen_start", "screen_stop"):
                parsed[key] = parse_angle(text) if screen_kind == "semicircle" else parse_length(text)
            elif key in FLOAT_KEYS:
                parsed[key] = float(text)
            elif key in INT_KEYS:
                parsed[key] = int(text)
        except ValueError as exc:
            raise UsageError(f"{key}: {exc}") from None

    run = {k: parsed.pop(k) for k in ("detectors", "gamma", "events", "seed", "replicas") if k in parsed}
    wavelength = parsed.pop("wavelength", harness.WAVELENGTH)
    if experiment == "double-slit":
        base = harness.double_slit_config(wavelength=wavelength)
        variant = DoubleSlit(parsed.pop("slit_width", wavelength), parsed.pop("separation", 5 * wavelength))
    elif experiment == "two-beam":
        base = harness.two_beam_config(wavelength=wavelength)
        variant = GaussianTwin(parsed.pop("sigma", wavelength), parsed.pop("separation", 8 * wavelength))
    else:
        base = harness.biprism_config(wavelength=wavelength)
        prism = base.source.variant.biprism
        prism = BiprismSpec(parsed.pop("summit_angle", prism.summit_angle),
                            parsed.pop("refractive_index", prism.refractive_index),
                            parsed.pop("apex_x", prism.apex_x))
        variant = BiprismPoint(parsed.pop("sigma", base.source.variant.sigma), prism,
                               parsed.pop("source_x", 0.0))
    aperture = None
    if "aperture_start" in parsed or "aperture_stop" in parsed:
        if not ("aperture_start" in parsed and "aperture_stop" in parsed):
            raise UsageError("aperture_start and aperture_stop go together")
        aperture = (parsed.pop("aperture_start"), parsed.pop("aperture_stop"))
    source = SourceSpec(variant, wavelength, aperture)

    if screen_kind == "semicircle":
        default_radius = base.screen.radius if isinstance(base.screen, SemicircleScreen) else base.screen.distance
        screen = SemicircleScreen(parsed.pop("radius", default_radius),
                                  parsed.pop("screen_start", -math.pi / 2),
                                  parsed.pop("screen_stop", math.pi / 2))
    else:
        if isinstance(variant, BiprismPoint):
            distance = parsed.pop("distance", variant.biprism.apex_x + harness.DEFAULT_OFFSET)
            half = 4.0 * variant.sigma
        elif isinstance(variant, GaussianTwin):
            distance = parsed.pop("distance", harness.TWO_BEAM_DISTANCE)
            half = harness.envelope_half_width(variant.separation, variant.sigma, distance, wavelength)
        else:
            distance = parsed.pop("distance", harness.DOUBLE_SLIT_RADIUS)
            half = distance
        screen = PlaneScreen(distance, parsed.pop("screen_start", -half), parsed.pop("screen_stop", half))
    if parsed:
        raise UsageError(f"keys not used by {experiment}: {', '.join(sorted(parsed))}")
    return ExperimentConfig(source, screen,
                            run.get("detectors", base.detector_count),
                            run.get("gamma", base.gamma),
                            run.get("events", base.total_events),
                            run.get("seed", base.seed),
                            run.get("replicas", base.replicas))


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    configs: List[ExperimentConfig]
    output_dir: str
    emit_theory: bool = True
    stems: List[str] = field(default_factory=list)
    workers: int = 1
    verbose: bool = False

    @property
    def config(self) -> ExperimentConfig:
        return self.configs[0]


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="default 0")
    p.add_argument("--events", type=int, default=None, help="events per run (default 10^7)")
    p.add_argument("--detectors", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None, help="default 1")
    p.add_argument("--workers", type=int, default=1, help="threads for replicas")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--no-theory", action="store_true", help="skip the wave-theory comparison")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    length = _argtype(parse_length)
    angle = _argtype(parse_angle)
    parser = _Parser(prog="eventoptics", description="Event-by-event simulation of single-photon interference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("double-slit", help="two slits, semicircular detector screen")
    _common(p)
    p.add_argument("--wavelength", type=length, default=None)
    p.add_argument("--slit-width", type=length, default=None, help="default: one wavelength")
    p.add_argument("--separation", type=length, default=None, help="default: five wavelengths")
    p.add_argument("--radius", type=length, default=None, help="default: 0.05mm")

    p = sub.add_parser("two-beam", help="two Gaussian line sources, plane screen")
    _common(p)
    p.add_argument("--wavelength", type=length, default=None)
    p.add_argument("--sigma", type=length, default=None, help="default: one wavelength")
    p.add_argument("--separation", type=length, default=None, help="default: eight wavelengths")
    p.add_argument("--distance", type=length, default=None, help="default: 0.1mm")

    p = sub.add_parser("biprism", help="Fresnel biprism, plane screen")
    _common(p)
    p.add_argument("--screen-offset", type=_argtype(parse_lengths), default=None,
                   help="comma-separated screen distances beyond the apex (default 7mm)")
    p.add_argument("--wavelength", type=length, default=None)
    p.add_argument("--sigma", type=length, default=None)
    p.add_argument("--summit-angle", type=angle, default=None)
    p.add_argument("--index", type=float, default=None)
    p.add_argument("--apex-x", type=length, default=None)
    p.add_argument("--source-x", type=length, default=None)

    p = sub.add_parser("custom", help="run a configuration file")
    _common(p)
    p.add_argument("--config", required=True)
    return parser


def _kw(args, **names):
    """Keyword arguments for a config builder from the flags that were given."""
    out = {}
    for flag, key in names.items():
        value = getattr(args, flag)
        if value is not None:
            out[key] = value
    return out


def _length_label(value: float) -> str:
    return f"{value * 1e3:g}mm"


def parse_args(argv: Optional[List[str]] = None) -> RunManifest:
    """Turn a command line into a manifest; exits with status 1 on bad usage."""
    parser = build_parser()
    args = parser.parse_args(argv)
    run_kw = _kw(args, seed="seed", events="events", detectors="detectors", gamma="gamma",
                 replicas="replicas")
    seed = 0 if args.seed is None else args.seed
    try:
        configs, stems = [], []
        if args.command == "double-slit":
            configs.append(harness.double_slit_config(
                **_kw(args, wavelength="wavelength", slit_width="width", separation="separation",
                      radius="radius"), **run_kw))
            stems.append(f"double-slit-seed{seed}")
        elif args.command == "two-beam":
            configs.append(harness.two_beam_config(
                **_kw(args, wavelength="wavelength", sigma="sigma", separation="separation",
                      distance="distance"), **run_kw))
            stems.append(f"two-beam-seed{seed}")
        elif args.command == "biprism":
            offsets = args.screen_offset or [7e-3]
            for offset in offsets:
                configs.append(harness.biprism_config(
                    offset=offset,
                    **_kw(args, wavelength="wavelength", sigma="sigma", summit_angle="summit_angle",
                          index="refractive_index", apex_x="apex_x", source_x="source_x"), **run_kw))
                stems.append(f"biprism-{_length_label(offset)}-seed{seed}")
        else:
            try:
                with open(args.config) as fh:
                    values = read_config_text(fh.read())
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from None
            values.update({k: str(v) for k, v in run_kw.items()})
            config = config_from_mapping(values)
            configs.append(config)
            stem = os.path.splitext(os.path.basename(args.config))[0]
            stems.append(stem if stem else "custom")
    except (UsageError, EventOpticsError, ValueError) as exc:
        parser.error(str(exc))
    out = args.out or os.environ.get(OUT_ENV) or "."
    return RunManifest(configs, out, not args.no_theory, stems, args.workers, args.verbose)


def _fmt(value: float, unit: str) -> str:
    return "nan" if math.isnan(value) else f"{value:.6g}{unit}"


def execute(manifest: RunManifest) -> int:
    """Run every configuration of the manifest and write its outputs."""
    os.makedirs(manifest.output_dir, exist_ok=True)
    for config, stem in zip(manifest.configs, manifest.stems):
        result = harness.run(config, workers=manifest.workers, theory=manifest.emit_theory)
        base = os.path.join(manifest.output_dir, stem)
        harness.write_csv(result.profile, base + ".csv")
        if result.report is not None:
            harness.atomic_write(base + ".fit.txt", result.report.to_text())
        harness.atomic_write(base + ".cfg", format_config(config))
        unit = result.profile.unit
        print(f"[{stem}] digest={config.digest()} events={config.total_events} "
              f"off_screen={result.profile.off_screen} absorbed={result.profile.absorbed} "
              f"wall_time={result.wall_time:.2f}s")
        if result.report is not None:
            r = result.report
            print(f"[{stem}] rmse={r.normalized_rmse:.4g} period_sim={_fmt(r.fringe_period_sim, unit)} "
                  f"period_theory={_fmt(r.fringe_period_theory, unit)} "
                  f"period_predicted={_fmt(result.predicted_period, unit)}")
        print(f"[{stem}] wrote {base}.csv")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    manifest = parse_args(argv)
    logging.basicConfig(level=logging.INFO if manifest.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return execute(manifest)
    except (EventOpticsError, OSError, ValueError, RuntimeError) as exc:
        print(f"eventoptics: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
