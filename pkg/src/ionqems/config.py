"""Run configuration: defaults, unit parsing, file/flag merging, guardrails.

Precedence is flags > config file (JSON) > built-in defaults.  The built-in
operating point is the reference device: nbar_a0 = 4000, kappa = 2 pi x 52.5
kHz, Q = 30000, f = 19.7 MHz, nbar_b0 = 0, delta = 0, bath at 4 K.

Frequencies given with a Hz/kHz/MHz suffix are ordinary frequencies and are
multiplied by 2 pi on ingestion; bare numbers are rad/s already.  Damping
and heating rates (gamma_a, mu1, mu2, ion damping) are plain 1/s and take no
suffix.

Redundant parameter pairs are cross-checked, not silently preferred: giving
both --q-factor and --gamma-a, or both --kappa and the (--v0, --c0) pair,
with inconsistent values is a configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
from dataclasses import dataclass, replace
from typing import Any, Sequence

from ._version import __version__
from .device import (
    DeviceParams,
    coupling_kappa,
    default_device,
    gamma_a as gamma_a_of,
    lamb_dicke,
    required_bias_product,
    thermal_occupation,
)
from .errors import ConfigError, GuardrailError
from .hilbert import truncation_for
from .params import SystemParams

__all__ = [
    "COMMANDS",
    "EVOLVE_NBAR_LIMIT",
    "OUTPUT_DIR_ENV",
    "RunConfig",
    "parse_config",
    "parse_frequency",
    "default_n_levels",
    "evolve_cost_estimate",
    "resolve_evolve_levels",
    "check_evolve_guardrail",
]

COMMANDS = ("params", "exchange", "evolve", "readout", "cool", "force", "sweep")

#: full density-matrix evolution is refused above this bath occupancy
#: unless explicitly overridden (truncation would need hundreds of levels)
EVOLVE_NBAR_LIMIT = 10.0

OUTPUT_DIR_ENV = "IONQEMS_OUTPUT_DIR"

_FREQ_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(hz|khz|mhz)?\s*$", re.IGNORECASE)
_FREQ_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6}

_REL_TOL = 1e-9  # consistency tolerance for redundantly specified pairs


def parse_frequency(value: str | float | int) -> float:
    """Parse a frequency into rad/s.

    Strings may carry a Hz/kHz/MHz suffix (ordinary frequency, multiplied by
    2 pi); bare numbers are taken as rad/s unchanged.
    """
    if isinstance(value, (int, float)):
        return float(value)
    m = _FREQ_RE.match(value)
    if m is None:
        raise ConfigError(f"cannot parse frequency {value!r}")
    try:
        number = float(m.group(1))
    except ValueError as exc:
        raise ConfigError(f"cannot parse frequency {value!r}") from exc
    suffix = m.group(2)
    if suffix is None:
        return number
    return 2.0 * math.pi * number * _FREQ_SCALE[suffix.lower()]


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run request for one CLI command."""

    command: str
    params: SystemParams
    device: DeviceParams
    nbar_b0: float
    t_max: float
    n_points: int
    seed: int
    output: str | None
    output_dir: str | None
    shots: int
    tau: float | None
    drive_g: float
    drive_duration: float
    nbar: float | None
    scheme: str
    cycles: int
    recool_time: float
    ion_damping: float
    force: float | None
    sweep_vary: str
    sweep_from: float
    sweep_to: float
    sweep_points: int
    jobs: int
    allow_large: bool
    n_levels: int | None
    timestamp: bool
    server: str | None
    with_undamped: bool

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n_points < 2:
            raise ConfigError(f"grid needs n_points >= 2, got {self.n_points}")
        if self.t_max <= 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if self.shots <= 0:
            raise ConfigError(f"shots must be positive, got {self.shots}")
        if self.sweep_points < 1:
            raise ConfigError(f"sweep needs points >= 1, got {self.sweep_points}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionqems",
        description=(
            "Trapped-ion / nanomechanical-oscillator transducer toolkit: "
            "exchange dynamics, sideband thermometry, cooling and force sensing."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with option defaults")
        p.add_argument("--output", "-o", help="output CSV path")
        p.add_argument(
            "--output-dir",
            help=f"directory for default-named outputs (or ${OUTPUT_DIR_ENV})",
        )
        p.add_argument("--seed", type=int, help="RNG seed (default 12345)")
        p.add_argument("--timestamp", action="store_true", default=None,
                       help="include a timestamp line in the CSV preamble")
        p.add_argument("--server", help="base URL of a running service "
                                        "(default: run in-process)")
        # model-parameter overrides
        p.add_argument("--kappa", help="exchange coupling (rad/s, or Hz/kHz/MHz suffix)")
        p.add_argument("--gamma-a", type=float, help="oscillator damping rate (1/s)")
        p.add_argument("--q-factor", type=float, help="oscillator quality factor")
        p.add_argument("--frequency", help="shared secular/cantilever frequency "
                                           "(rad/s, or Hz/kHz/MHz suffix)")
        p.add_argument("--delta", help="detuning (rad/s, or Hz/kHz/MHz suffix)")
        p.add_argument("--nbar-a0", type=float, help="initial/bath oscillator occupancy")
        p.add_argument("--nbar-b0", type=float, help="initial ion occupancy")
        p.add_argument("--mu1", type=float, help="ion de-excitation rate (1/s)")
        p.add_argument("--mu2", type=float, help="ion excitation rate (1/s)")
        p.add_argument("--t-bath", type=float, help="bath temperature (K)")
        p.add_argument("--v0", type=float, help="bias voltage (V); 0 switches "
                                                "the coupling off")
        p.add_argument("--c0", type=float, help="gate capacitance (F)")
        p.add_argument("--distance", type=float, help="ion-cantilever separation (m)")
        p.add_argument("--ion-mass", type=float, help="ion mass (kg)")
        p.add_argument("--cantilever-mass", type=float, help="cantilever mass (kg)")

    p_params = sub.add_parser("params", help="emit the resolved parameter table")
    add_common(p_params)

    p_exchange = sub.add_parser(
        "exchange", help="moment-equation exchange dynamics time series"
    )
    add_common(p_exchange)
    p_exchange.add_argument("--t-max", type=float, help="grid end time (s)")
    p_exchange.add_argument("--n-points", type=int, help="grid size (default 2001)")
    p_exchange.add_argument(
        "--with-undamped", action="store_true", default=None,
        help="append the undamped-exchange ion occupancy as a reference column",
    )

    p_evolve = sub.add_parser(
        "evolve", help="full density-matrix evolution (small occupancies only)"
    )
    add_common(p_evolve)
    p_evolve.add_argument("--t-max", type=float, help="grid end time (s)")
    p_evolve.add_argument("--n-points", type=int, help="grid size (default 201)")
    p_evolve.add_argument("--n-levels", type=int, help="Fock levels per mode")
    p_evolve.add_argument(
        "--allow-large", action="store_true", default=None,
        help=f"override the nbar_a0 <= {EVOLVE_NBAR_LIMIT:g} guardrail "
             "(prints a cost estimate)",
    )

    p_readout = sub.add_parser(
        "readout", help="sideband thermometry (direct, or two-stage protocol)"
    )
    add_common(p_readout)
    p_readout.add_argument("--nbar", type=float,
                           help="thermometer a thermal state of this occupancy "
                                "directly instead of running stage I")
    p_readout.add_argument("--tau", type=float,
                           help="stage-I coupling time (s); default satisfies "
                                "nbar_a0 (kappa tau)^2 = 1")
    p_readout.add_argument("--shots", type=int, help="shots per sideband (default 100000)")
    p_readout.add_argument("--drive-g", help="sideband Rabi frequency "
                                             "(rad/s, or Hz/kHz/MHz suffix)")
    p_readout.add_argument("--drive-time", type=float, help="pulse duration (s)")

    p_cool = sub.add_parser("cool", help="cooling schemes")
    add_common(p_cool)
    p_cool.add_argument("--scheme", choices=(
        "single_exchange", "dump_ion", "two_traps", "iterative", "continuous"),
        help="cooling scheme (default single_exchange)")
    p_cool.add_argument("--cycles", type=int, help="iterative cycles (default 10)")
    p_cool.add_argument("--recool-time", type=float,
                        help="ion re-cooling window per cycle (s)")
    p_cool.add_argument("--ion-damping", type=float,
                        help="continuous-scheme ion damping rate (1/s)")

    p_force = sub.add_parser("force", help="phonon-shift force sensitivity")
    add_common(p_force)
    p_force.add_argument("--force", type=float, help="applied force (N); default f_min")

    p_sweep = sub.add_parser("sweep", help="parameter sweep of the exchange point")
    add_common(p_sweep)
    p_sweep.add_argument("--vary", dest="sweep_vary",
                         help="parameter to sweep (kappa)")
    p_sweep.add_argument("--from", dest="sweep_from",
                         help="sweep start (units of the varied parameter)")
    p_sweep.add_argument("--to", dest="sweep_to", help="sweep end")
    p_sweep.add_argument("--points", type=int, help="sweep size (default 10)")
    p_sweep.add_argument("--jobs", type=int, help="parallel workers (default 1)")
    return parser


# every option any command accepts, for config-file validation
_ALL_KEYS = frozenset({
    "output", "output_dir", "seed", "timestamp", "server",
    "kappa", "gamma_a", "q_factor", "frequency", "delta",
    "nbar_a0", "nbar_b0", "mu1", "mu2", "t_bath", "v0", "c0",
    "distance", "ion_mass", "cantilever_mass",
    "t_max", "n_points", "with_undamped", "n_levels", "allow_large",
    "nbar", "tau", "shots", "drive_g", "drive_time",
    "scheme", "cycles", "recool_time", "ion_damping", "force",
    "sweep_vary", "sweep_from", "sweep_to", "points", "jobs",
})

# options holding a frequency that accepts a unit suffix (sweep bounds are
# interpreted later, once the varied parameter is known)
_FREQUENCY_KEYS = {"kappa", "delta", "frequency", "drive_g"}


def _load_file(path: str) -> dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    values = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = set(values) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown config-file keys: {', '.join(sorted(unknown))}")
    return values


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    """Resolve argv (+ optional JSON config file) into a complete RunConfig."""
    ns = _build_parser().parse_args(argv)
    cli = {k: v for k, v in vars(ns).items() if k != "config"}

    file_values = _load_file(ns.config) if ns.config else {}

    merged: dict[str, Any] = {}
    explicit: set[str] = set()
    for key, cli_value in cli.items():
        value = cli_value if cli_value is not None else file_values.get(key)
        if value is not None and key != "command":
            explicit.add(key)
        if value is not None and key in _FREQUENCY_KEYS:
            value = parse_frequency(value)
        merged[key] = value

    return _resolve(merged, explicit)


def _resolve(v: dict[str, Any], explicit: set[str]) -> RunConfig:
    def pick(key: str, default: Any) -> Any:
        value = v.get(key)
        return default if value is None else value

    command = v["command"]
    omega = pick("frequency", 2.0 * math.pi * 19.7e6)

    # --- oscillator damping: Q and gamma_a are redundant; cross-check ---
    if "gamma_a" in explicit and "q_factor" in explicit:
        from_q = gamma_a_of(omega, v["q_factor"])
        if not math.isclose(from_q, v["gamma_a"], rel_tol=_REL_TOL):
            raise ConfigError(
                f"inconsistent damping: Q = {v['q_factor']} gives gamma_a = "
                f"{from_q:.6g} 1/s but --gamma-a = {v['gamma_a']:.6g} 1/s"
            )
        q_factor, gam = v["q_factor"], v["gamma_a"]
    elif "gamma_a" in explicit:
        gam = v["gamma_a"]
        q_factor = omega / gam if gam > 0 else math.inf
    else:
        q_factor = pick("q_factor", 30000.0)
        gam = gamma_a_of(omega, q_factor)

    # --- device record; kappa and (V0, C0) are redundant; cross-check ---
    base = default_device()
    device = replace(
        base,
        ion_mass=pick("ion_mass", base.ion_mass),
        cantilever_mass=pick("cantilever_mass", base.cantilever_mass),
        nu=omega,
        omega=omega,
        v0=pick("v0", base.v0),
        c0=pick("c0", base.c0),
        d=pick("distance", base.d),
        q_factor=q_factor,
        t_bath=pick("t_bath", base.t_bath),
    )
    bias_given = "v0" in explicit or "c0" in explicit
    if "kappa" in explicit and bias_given:
        from_bias = coupling_kappa(device)
        if not math.isclose(from_bias, v["kappa"], rel_tol=_REL_TOL):
            raise ConfigError(
                f"inconsistent coupling: V0/C0 give kappa = {from_bias:.6g} rad/s "
                f"but --kappa = {v['kappa']:.6g} rad/s"
            )
        kappa = v["kappa"]
    elif "kappa" in explicit:
        kappa = v["kappa"]
        if kappa > 0 and device.v0 > 0:
            device = replace(device, c0=required_bias_product(kappa, device) / device.v0)
    elif bias_given:
        kappa = coupling_kappa(device)
    else:
        kappa = 2.0 * math.pi * 52.5e3
        device = replace(device, c0=required_bias_product(kappa, device) / device.v0)

    # --- occupancies; an explicit bath temperature implies nbar_a0 ---
    if "nbar_a0" in explicit:
        nbar_a0 = v["nbar_a0"]
    elif "t_bath" in explicit:
        nbar_a0 = thermal_occupation(device.t_bath, omega)
    else:
        nbar_a0 = 4000.0

    params = SystemParams(
        kappa=kappa,
        gamma_a=gam,
        nbar_a0=nbar_a0,
        delta=pick("delta", 0.0),
        mu1=pick("mu1", 0.0),
        mu2=pick("mu2", 0.0),
    )

    drive_g = v.get("drive_g")
    if drive_g is None:
        drive_g = lamb_dicke(device).eta * device.rabi_frequency
    drive_duration = pick("drive_time", math.pi / (4.0 * drive_g))

    sweep_vary = pick("sweep_vary", "kappa")
    if sweep_vary != "kappa":
        raise ConfigError(f"unsupported sweep parameter {sweep_vary!r} (only kappa)")
    if command == "sweep":
        if v.get("sweep_from") is None or v.get("sweep_to") is None:
            raise ConfigError("sweep needs --from and --to")
        sweep_from = parse_frequency(v["sweep_from"])
        sweep_to = parse_frequency(v["sweep_to"])
        if sweep_from <= 0 or sweep_to <= 0:
            raise ConfigError("sweep bounds must be positive")
    else:
        sweep_from = 0.0
        sweep_to = 0.0

    default_points = 201 if command == "evolve" else 2001
    return RunConfig(
        command=command,
        params=params,
        device=device,
        nbar_b0=pick("nbar_b0", 0.0),
        t_max=pick("t_max", 50e-6),
        n_points=pick("n_points", default_points),
        seed=pick("seed", 12345),
        output=v.get("output"),
        output_dir=pick("output_dir", os.environ.get(OUTPUT_DIR_ENV)),
        shots=pick("shots", 100_000),
        tau=v.get("tau"),
        drive_g=drive_g,
        drive_duration=drive_duration,
        nbar=v.get("nbar"),
        scheme=pick("scheme", "single_exchange"),
        cycles=pick("cycles", 10),
        recool_time=pick("recool_time", 0.0),
        ion_damping=pick("ion_damping", 1e5),
        force=v.get("force"),
        sweep_vary=sweep_vary,
        sweep_from=sweep_from,
        sweep_to=sweep_to,
        sweep_points=pick("points", 10),
        jobs=pick("jobs", 1),
        allow_large=bool(pick("allow_large", False)),
        n_levels=v.get("n_levels"),
        timestamp=bool(pick("timestamp", False)),
        server=v.get("server"),
        with_undamped=bool(pick("with_undamped", False)),
    )


def default_n_levels(nbar_a0: float, nbar_b0: float) -> int:
    """Per-mode truncation covering the hotter mode's tail to 1e-8."""
    target = max(nbar_a0, nbar_b0, 0.25)
    return truncation_for(target, 1e-8)


def evolve_cost_estimate(n_levels: int) -> tuple[float, float]:
    """Rough (memory MB, seconds per exchange period) for the sparse generator.

    Scaling anchored to a measured point (25 levels/mode: ~65 MB, ~15 s per
    period at default tolerances); both grow as the fourth power of the
    per-mode truncation.
    """
    scale = (n_levels / 25.0) ** 4
    return 66.0 * scale, 15.0 * scale


def resolve_evolve_levels(
    nbar_a0: float,
    nbar_b0: float,
    n_levels: int | None,
    allow_large: bool,
) -> tuple[int, str | None]:
    """Enforce the occupancy guardrail for full density-matrix evolution.

    Returns (n_levels, cost message or None).  With ``allow_large`` the run
    proceeds and the returned message describes the estimated cost; without
    it, occupancies above EVOLVE_NBAR_LIMIT raise GuardrailError.
    """
    if n_levels is None:
        n_levels = default_n_levels(nbar_a0, nbar_b0)
    hot = max(nbar_a0, nbar_b0)
    if hot <= EVOLVE_NBAR_LIMIT:
        return n_levels, None
    mem_mb, secs = evolve_cost_estimate(n_levels)
    if not allow_large:
        raise GuardrailError(
            f"full evolution at occupancy {hot:g} needs ~{n_levels} levels/mode "
            f"(~{mem_mb:.0f} MB, ~{secs:.0f} s per exchange period); "
            "pass --allow-large to proceed, or use the exchange command"
        )
    return n_levels, (
        f"occupancy {hot:g}: ~{n_levels} levels/mode, estimated ~{mem_mb:.0f} MB "
        f"and ~{secs:.0f} s per exchange period"
    )


def check_evolve_guardrail(config: RunConfig) -> tuple[int, str | None]:
    """RunConfig wrapper around resolve_evolve_levels."""
    return resolve_evolve_levels(
        config.params.nbar_a0, config.nbar_b0, config.n_levels, config.allow_large
    )
