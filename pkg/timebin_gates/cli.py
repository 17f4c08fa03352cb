"""CLI entry point for timebin-gates."""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .circuit_simulator import (
    DEFAULT_BIN_SEPARATION,
    BasisMeasurement,
    GateCircuit,
    build_gate,
    simulate,
    validate_timing,
)
from .main import PACKAGE_VERSION, verify_reference
from .photonic_components import DEFAULT_LOSSES, GROUP_INDEX, LossProfile, timing_feasibility
from .protocols.chsh import ChshConfig, analytic_threshold, chsh_analytic, chsh_threshold, chsh_value
from .protocols.qkd import ChannelModel, qkd_run
from .protocols.sampling import fresh_seed
from .qudit_core import QuditError, UnitaryMatrix, make_state
from .reck_synthesis import decompose, reconstruct
from .text_formats import (
    FormatError,
    format_complex,
    format_decomposition,
    format_matrix,
    format_netlist,
    format_number,
    load_decomposition,
    load_matrix,
    load_netlist,
    load_state,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERRUPTED = 130

FORMATS_HELP = """\
file formats (blank lines and text after '#' are ignored):

  matrix         first line d, then d rows of d entries "re,im"
                   2
                   0.70710678118654757,0 0.70710678118654757,0
                   0.70710678118654757,0 -0.70710678118654757,0

  state          first line d, then d amplitudes "re,im" (normalized on load)
                   2
                   1,0
                   0,1

  decomposition  first line d, one "m n theta phi" line per coupler in the
                 order the photon meets them, then "P: p1 ... pd"
                   2
                   2 1 0.78539816339744828 0
                   P: 0 0

  netlist        one component per line, KEYWORD key=value ...; keywords and
                 keys are case-insensitive, unknown keys are rejected
                   SWITCH_DEMUX k=2 loss_db=1.5
                   DELAY rail=1 dt=1e-10
                   PHASE rail=1 phi=0
                   COUPLER m=2 n=1 theta=0.785398163397 phi=0.0 loss_db=0.1
                   SWAP m=3 n=1
                   LOSS rail=all loss_db=0.5
                   DELAY rail=2 dt=1e-10
                   SWITCH_MUX k=2 order=1,2 loss_db=1.5
                 measurement gates end in DETECTOR rail=k eff=0.88 outcome=j
                 instead of a multiplexer

exit codes: 0 success, 1 validation failure, 2 I/O or parse error, 130 interrupted
"""


def setup_logging(verbose: bool = False) -> None:
    """Configure logging for the CLI.

    Reports go to stdout, so log records are written to stderr.

    Args:
        verbose: Enable verbose (DEBUG level) logging
    """
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def emit(key: str, value) -> None:
    if isinstance(value, float | np.floating):
        value = format_number(value)
    elif isinstance(value, complex | np.complexfloating):
        value = format_complex(value)
    print(f"{key} {value}")


def _losses(args: argparse.Namespace) -> LossProfile:
    return LossProfile.lossless() if args.lossless else DEFAULT_LOSSES


def _seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
        logger.info(f"No --seed given, using generated seed {args.seed}")
    return args.seed


def run_decompose(args: argparse.Namespace) -> int:
    decomposition = decompose(UnitaryMatrix(load_matrix(args.matrix_file)))
    sys.stdout.write(format_decomposition(decomposition))
    return EXIT_OK


def run_reconstruct(args: argparse.Namespace) -> int:
    sys.stdout.write(format_matrix(reconstruct(load_decomposition(args.decomposition_file))))
    return EXIT_OK


def run_build_gate(args: argparse.Namespace) -> int:
    decomposition = decompose(UnitaryMatrix(load_matrix(args.matrix)))
    circuit = build_gate(
        decomposition,
        apply_phase_correction=not args.no_phase_correction,
        losses=_losses(args),
        bin_separation=args.dt,
    )
    sys.stdout.write(format_netlist(circuit.netlist))
    return EXIT_OK


def run_simulate(args: argparse.Namespace) -> int:
    circuit = GateCircuit.from_netlist(load_netlist(args.netlist))
    validate_timing(circuit)
    state = load_state(args.state)
    result = simulate(circuit, state)
    emit("template", circuit.template)
    for index, amplitude in enumerate(result.output_state.amplitudes):
        emit(f"amplitude_{index}", complex(amplitude))
    emit("transmission", result.transmission)
    if result.click_probabilities is not None:
        seed = _seed(args)
        for index, probability in enumerate(result.click_probabilities):
            emit(f"click_{index}", float(probability))
        emit("seed", seed)
        cumulative = np.cumsum(result.click_probabilities)
        outcome = int(np.searchsorted(cumulative, np.random.default_rng(seed).random(), side="right"))
        emit("outcome", outcome if outcome < circuit.dim else "none")
    return EXIT_OK


def run_measure(args: argparse.Namespace) -> int:
    rows = load_matrix(args.basis)
    basis = [make_state(row) for row in rows]
    state = load_state(args.state)
    seed = _seed(args)
    measurement = BasisMeasurement(basis, args.eff, _losses(args))
    probabilities = measurement.click_probabilities(state)
    outcome = measurement.sample(state, np.random.default_rng(seed))
    emit("seed", seed)
    for index, probability in enumerate(probabilities):
        emit(f"click_{index}", float(probability))
    emit("outcome", "none" if outcome is None else outcome)
    return EXIT_OK


def run_qkd(args: argparse.Namespace) -> int:
    seed = _seed(args)
    channel = ChannelModel(
        depolarizing=args.p,
        loss_db=args.loss_db,
        efficiency=args.eff,
        hardware=DEFAULT_LOSSES if args.hardware_losses else LossProfile.lossless(),
    )
    session = qkd_run(args.rounds, channel, seed, keep_records=args.csv is not None)
    emit("seed", seed)
    emit("rounds", session.rounds)
    emit("sifted", session.sifted)
    emit("errors", session.errors)
    emit("qber", session.qber)
    emit("sift_rate", session.sift_rate)
    for basis, stats in session.per_basis.items():
        emit(f"basis_{basis}", f"sifted={stats.sifted} errors={stats.errors} qber={format_number(stats.qber)}")
    if args.csv is not None:
        session.records.to_csv(args.csv)
        logger.info(f"Wrote {len(session.records)} round records to {args.csv}")
    return EXIT_OK


def _parse_scan(text: str) -> tuple[float, float, float]:
    try:
        low, high, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    return low, high, step


def run_bell(args: argparse.Namespace) -> int:
    seed = _seed(args)
    config = ChshConfig(fair_sampling=args.fair_sampling)
    emit("seed", seed)
    if args.scan is not None:
        low, high, step = args.scan
        threshold = chsh_threshold(config, step, args.rounds, seed, low=low, high=high)
        for eta, s_value, stderr in threshold.scan:
            emit("scan", f"{format_number(eta)} {format_number(s_value)} {format_number(stderr)}")
        if threshold.violated:
            emit("eta_threshold", threshold.eta)
            emit("s_value", threshold.s_value)
            emit("stderr", threshold.stderr)
        else:
            emit("eta_threshold", "not-violated")
        emit("analytic_threshold", analytic_threshold())
        if args.csv is not None:
            np.savetxt(
                args.csv,
                np.array(threshold.scan),
                fmt="%.17g",
                delimiter=",",
                header="eta,s_value,stderr",
                comments="",
            )
        return EXIT_OK

    config = config.with_efficiency(args.eta)
    result = chsh_value(config, args.rounds, seed, keep_records=args.csv is not None)
    emit("eta", args.eta)
    for x in range(2):
        for y in range(2):
            emit(f"correlator_{x}{y}", f"{format_number(result.correlators[x, y])} {format_number(result.correlator_stderr[x, y])}")
    emit("s_value", result.s_value)
    emit("stderr", result.stderr)
    emit("s_analytic", chsh_analytic(config))
    if args.csv is not None:
        result.records.to_csv(args.csv)
        logger.info(f"Wrote {len(result.records)} round records to {args.csv}")
    return EXIT_OK


def run_verify_reference(args: argparse.Namespace) -> int:
    results = verify_reference()
    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name} {result.detail}")
    return EXIT_OK if all(result.passed for result in results) else EXIT_VALIDATION


def run_feasibility(args: argparse.Namespace) -> int:
    timing = timing_feasibility(args.dt, args.rate, group_index=args.group_index)
    emit("status", "feasible" if timing.feasible else "infeasible")
    emit("bin_separation_s", timing.bin_separation)
    emit("switch_rate_hz", timing.switch_rate)
    emit("group_index", timing.group_index)
    emit("path_difference_m", timing.path_difference)
    emit("thermal_tolerance_k", timing.thermal_tolerance)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timebin-gates",
        description="Synthesize, compile and simulate time-bin qudit gates",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {PACKAGE_VERSION}")
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Enable verbose logging (DEBUG level)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str, aliases: tuple[str, ...] = ()) -> argparse.ArgumentParser:
        subparser = subparsers.add_parser(
            name,
            aliases=list(aliases),
            help=help_text,
            epilog=FORMATS_HELP,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        subparser.set_defaults(handler=handler)
        return subparser

    decompose_parser = add("decompose", run_decompose, "Factorize a unitary matrix file into couplers")
    decompose_parser.add_argument("matrix_file", type=Path)

    reconstruct_parser = add("reconstruct", run_reconstruct, "Multiply a decomposition file back into a matrix")
    reconstruct_parser.add_argument("decomposition_file", type=Path)

    gate_parser = add("build-gate", run_build_gate, "Compile a unitary matrix file into a netlist")
    gate_parser.add_argument("--matrix", type=Path, required=True)
    gate_parser.add_argument("--no-phase-correction", action="store_true", help="Omit the output phase modulators")
    gate_parser.add_argument("--dt", type=float, default=DEFAULT_BIN_SEPARATION, help="Time-bin separation in seconds")
    gate_parser.add_argument("--lossless", action="store_true", help="Give every component 0 dB insertion loss")

    simulate_parser = add("simulate", run_simulate, "Propagate a state through a netlist")
    simulate_parser.add_argument("--netlist", type=Path, required=True)
    simulate_parser.add_argument("--state", type=Path, required=True)
    simulate_parser.add_argument("--seed", type=int, default=None, help="Seed for sampling a detector click")

    measure_parser = add("measure", run_measure, "Measure a state in the basis given by the rows of a matrix file")
    measure_parser.add_argument("--basis", type=Path, required=True)
    measure_parser.add_argument("--state", type=Path, required=True)
    measure_parser.add_argument("--eff", type=float, default=1.0, help="Detector efficiency")
    measure_parser.add_argument("--seed", type=int, default=None)
    measure_parser.add_argument("--lossless", action="store_true", help="Give every component 0 dB insertion loss")

    qkd_parser = add("qkd", run_qkd, "Run the four-basis qutrit QKD protocol")
    qkd_parser.add_argument("--rounds", type=int, required=True)
    qkd_parser.add_argument("--p", type=float, default=0.0, help="Depolarizing probability")
    qkd_parser.add_argument("--loss-db", type=float, default=0.0, help="Channel loss in dB")
    qkd_parser.add_argument("--eff", type=float, default=1.0, help="Detector efficiency")
    qkd_parser.add_argument("--seed", type=int, default=None)
    qkd_parser.add_argument("--hardware-losses", action="store_true", help="Apply default component losses to Bob's circuits")
    qkd_parser.add_argument("--csv", type=Path, default=None, help="Write per-round records to this CSV file")

    bell_parser = add("bell", run_bell, "Estimate the CHSH value or scan for the efficiency threshold")
    mode = bell_parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--eta", type=float, help="Detector efficiency")
    mode.add_argument("--scan", type=_parse_scan, help="Efficiency grid lo:hi:step")
    bell_parser.add_argument("--rounds", type=int, required=True)
    bell_parser.add_argument("--seed", type=int, default=None)
    bell_parser.add_argument("--fair-sampling", action="store_true", help="Keep only rounds where both detectors click")
    bell_parser.add_argument("--csv", type=Path, default=None, help="Write per-round records (or the scan) to this CSV file")

    add(
        "verify-paper",
        run_verify_reference,
        "Check the published qutrit construction and figures",
        aliases=("verify-reference",),
    )

    feasibility_parser = add("feasibility", run_feasibility, "Check switch speed against the bin separation")
    feasibility_parser.add_argument("--dt", type=float, required=True, help="Time-bin separation in seconds")
    feasibility_parser.add_argument("--rate", type=float, required=True, help="Switching frequency in Hz")
    feasibility_parser.add_argument("--group-index", type=float, default=GROUP_INDEX)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point.

    Returns:
        Exit code (0 success, 1 validation failure, 2 I/O or parse error, 130 interrupted)
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(verbose=args.verbose)

    try:
        return args.handler(args)

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INTERRUPTED

    except (FormatError, OSError) as e:
        logger.error(f"Cannot read input: {e}")
        return EXIT_IO

    except QuditError as e:
        logger.error(f"Validation failed: {e}")
        return EXIT_VALIDATION

    except Exception as e:
        logger.exception(f"Fatal error in {args.command}: {e}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
