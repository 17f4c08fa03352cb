"""Plain-text formats for matrices, states, decompositions and netlists.

Complex numbers are written "re,im" with 17 significant digits. Blank lines and
anything after '#' are ignored in every format.
"""

import logging
from collections.abc import Iterable, Iterator
from pathlib import Path

import numpy as np

from .photonic_components import Component, ComponentKind, InvalidComponentError
from .qudit_core import QuditError, QuditState, make_state
from .reck_synthesis import CouplerStep, Decomposition, PhaseCorrection

logger = logging.getLogger(__name__)

NUMBER_FORMAT = ".17g"


class FormatError(ValueError):
    """Raised when a text file cannot be parsed"""

    def __init__(self, message: str, source: str = "<input>", line: int | None = None):
        self.source = source
        self.line = line
        location = source if line is None else f"{source}:{line}"
        super().__init__(f"{location}: {message}")


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if content:
            yield number, content


def format_number(value: float) -> str:
    return format(float(value), NUMBER_FORMAT)


def format_complex(value: complex) -> str:
    return f"{format_number(value.real)},{format_number(value.imag)}"


def parse_complex(token: str, source: str = "<input>", line: int | None = None) -> complex:
    parts = token.split(",")
    if len(parts) != 2:
        raise FormatError(f"Expected a complex entry 're,im', got {token!r}", source, line)
    try:
        real, imag = (float(part) for part in parts)
    except ValueError:
        raise FormatError(f"Invalid number in complex entry {token!r}", source, line) from None
    return complex(real, imag)


def _read_dimension(lines: list[tuple[int, str]], source: str) -> int:
    if not lines:
        raise FormatError("File is empty", source)
    number, header = lines[0]
    try:
        dim = int(header)
    except ValueError:
        raise FormatError(f"Expected the dimension d on the first line, got {header!r}", source, number) from None
    if dim < 2:
        raise FormatError(f"Dimension must be at least 2, got {dim}", source, number)
    return dim


def parse_matrix(text: str, source: str = "<input>") -> np.ndarray:
    """Parse a d x d complex matrix.

    Format: the first line is d, followed by d lines of d whitespace-separated
    "re,im" entries. Unitarity is not checked here.

    Raises:
        FormatError: On a malformed header, row or entry
    """
    lines = list(_content_lines(text))
    dim = _read_dimension(lines, source)
    rows = lines[1:]
    if len(rows) != dim:
        raise FormatError(f"Expected {dim} matrix rows, found {len(rows)}", source)
    matrix = np.empty((dim, dim), dtype=complex)
    for index, (number, content) in enumerate(rows):
        tokens = content.split()
        if len(tokens) != dim:
            raise FormatError(f"Expected {dim} entries, found {len(tokens)}", source, number)
        matrix[index] = [parse_complex(token, source, number) for token in tokens]
    return matrix


def format_matrix(matrix) -> str:
    entries = np.asarray(getattr(matrix, "entries", matrix))
    lines = [str(entries.shape[0])]
    lines.extend(" ".join(format_complex(value) for value in row) for row in entries)
    return "\n".join(lines) + "\n"


def parse_state(text: str, source: str = "<input>") -> QuditState:
    """Parse a state file (d, then d lines "re,im"); the vector is normalized."""
    lines = list(_content_lines(text))
    dim = _read_dimension(lines, source)
    entries = lines[1:]
    if len(entries) != dim:
        raise FormatError(f"Expected {dim} amplitudes, found {len(entries)}", source)
    amplitudes = [parse_complex(content, source, number) for number, content in entries]
    return make_state(amplitudes)


def format_state(state: QuditState) -> str:
    lines = [str(state.dim)]
    lines.extend(format_complex(value) for value in state.amplitudes)
    return "\n".join(lines) + "\n"


def parse_decomposition(text: str, source: str = "<input>") -> Decomposition:
    """Parse a decomposition: d, one "m n theta phi" line per coupler, then "P: p1 ... pd".

    Raises:
        FormatError: On malformed lines or a missing phase line
        DecompositionError: If the steps do not follow the triangular order
    """
    lines = list(_content_lines(text))
    dim = _read_dimension(lines, source)
    steps = []
    phases = None
    for number, content in lines[1:]:
        if phases is not None:
            raise FormatError("Unexpected content after the phase line", source, number)
        if content.upper().startswith("P:"):
            try:
                phases = tuple(float(token) for token in content[2:].split())
            except ValueError:
                raise FormatError("Invalid phase value", source, number) from None
            continue
        tokens = content.split()
        if len(tokens) != 4:
            raise FormatError(f"Expected 'm n theta phi', got {content!r}", source, number)
        try:
            m, n = int(tokens[0]), int(tokens[1])
            theta, phi = float(tokens[2]), float(tokens[3])
        except ValueError:
            raise FormatError(f"Invalid coupler step {content!r}", source, number) from None
        steps.append(CouplerStep(m, n, theta, phi))
    if phases is None:
        raise FormatError("Missing final 'P:' phase line", source)
    return Decomposition(dim, tuple(steps), PhaseCorrection(phases))


def format_decomposition(decomposition: Decomposition) -> str:
    lines = [str(decomposition.dim)]
    for step in decomposition.steps:
        lines.append(f"{step.m} {step.n} {format_number(step.theta)} {format_number(step.phi)}")
    lines.append("P: " + " ".join(format_number(phase) for phase in decomposition.correction.phases))
    return "\n".join(lines) + "\n"


# Keys accepted per component keyword, besides loss_db
NETLIST_KEYS = {
    ComponentKind.SWITCH_DEMUX: {"k"},
    ComponentKind.SWITCH_MUX: {"k", "order"},
    ComponentKind.DELAY: {"rail", "dt"},
    ComponentKind.COUPLER: {"m", "n", "theta", "phi"},
    ComponentKind.PHASE: {"rail", "phi"},
    ComponentKind.SWAP: {"m", "n"},
    ComponentKind.LOSS: {"rail"},
    ComponentKind.DETECTOR: {"rail", "eff", "outcome"},
    ComponentKind.PBSC: set(),
    ComponentKind.POLCTRL: {"matrix"},
}

REQUIRED_KEYS = {
    ComponentKind.SWITCH_DEMUX: {"k"},
    ComponentKind.SWITCH_MUX: {"k"},
    ComponentKind.DELAY: {"rail", "dt"},
    ComponentKind.COUPLER: {"m", "n", "theta"},
    ComponentKind.PHASE: {"rail", "phi"},
    ComponentKind.SWAP: {"m", "n"},
    ComponentKind.DETECTOR: {"rail"},
    ComponentKind.POLCTRL: {"matrix"},
}


def _netlist_fields(tokens: list[str], kind: ComponentKind, source: str, line: int) -> dict[str, str]:
    fields = {}
    for token in tokens:
        key, separator, value = token.partition("=")
        key = key.lower()
        if not separator or not value:
            raise FormatError(f"Expected key=value, got {token!r}", source, line)
        if key != "loss_db" and key not in NETLIST_KEYS[kind]:
            raise FormatError(f"Unknown key {key!r} for {kind}", source, line)
        if key in fields:
            raise FormatError(f"Duplicate key {key!r}", source, line)
        fields[key] = value
    missing = REQUIRED_KEYS.get(kind, set()) - fields.keys()
    if missing:
        raise FormatError(f"{kind} is missing {', '.join(sorted(missing))}", source, line)
    return fields


def _build_component(kind: ComponentKind, fields: dict[str, str], source: str, line: int) -> Component:
    try:
        loss_db = float(fields.get("loss_db", 0.0))
        match kind:
            case ComponentKind.SWITCH_DEMUX:
                return Component(kind, loss_db, ports=int(fields["k"]))
            case ComponentKind.SWITCH_MUX:
                order = fields.get("order")
                routing = tuple(int(rail) for rail in order.split(",")) if order else ()
                return Component(kind, loss_db, ports=int(fields["k"]), routing=routing)
            case ComponentKind.DELAY:
                return Component(kind, loss_db, rails=(int(fields["rail"]),), duration=float(fields["dt"]))
            case ComponentKind.COUPLER:
                return Component(
                    kind,
                    loss_db,
                    rails=(int(fields["m"]), int(fields["n"])),
                    theta=float(fields["theta"]),
                    phi=float(fields.get("phi", 0.0)),
                )
            case ComponentKind.PHASE:
                return Component(kind, loss_db, rails=(int(fields["rail"]),), phi=float(fields["phi"]))
            case ComponentKind.SWAP:
                return Component(kind, loss_db, rails=(int(fields["m"]), int(fields["n"])))
            case ComponentKind.LOSS:
                rail = fields.get("rail", "all")
                rails = () if rail.lower() == "all" else (int(rail),)
                return Component(kind, loss_db, rails=rails)
            case ComponentKind.DETECTOR:
                outcome = fields.get("outcome")
                return Component(
                    kind,
                    loss_db,
                    rails=(int(fields["rail"]),),
                    efficiency=float(fields.get("eff", 1.0)),
                    outcome=None if outcome is None else int(outcome),
                )
            case ComponentKind.PBSC:
                return Component(kind, loss_db)
            case ComponentKind.POLCTRL:
                entries = [parse_complex(token, source, line) for token in fields["matrix"].split(";")]
                if len(entries) != 4:
                    raise FormatError("POLCTRL matrix needs 4 entries 're,im;re,im;re,im;re,im'", source, line)
                return Component(kind, loss_db, matrix=np.array(entries).reshape(2, 2))
    except ValueError as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"Invalid value in {kind} line: {e}", source, line) from None
    except QuditError as e:
        logger.error(f"{source}:{line}: {e}")
        raise


def parse_netlist(text: str, source: str = "<input>") -> list[Component]:
    """Parse a netlist, one component per line.

    Example line: ``COUPLER m=2 n=1 theta=0.785398163397 phi=0.0 loss_db=0.1``.
    Keywords and keys are case-insensitive; unknown keywords or keys are errors.
    A missing loss_db means a lossless component.

    Raises:
        FormatError: On an unknown keyword, unknown key or malformed value
        InvalidComponentError: On a component constraint, or a detector outcome
            not below the demultiplexer port count
    """
    components = []
    dim = None
    for number, content in _content_lines(text):
        keyword, *tokens = content.split()
        try:
            kind = ComponentKind(keyword.upper())
        except ValueError:
            raise FormatError(f"Unknown component {keyword!r}", source, number) from None
        fields = _netlist_fields(tokens, kind, source, number)
        component = _build_component(kind, fields, source, number)
        if kind is ComponentKind.SWITCH_DEMUX and dim is None:
            dim = component.ports
        elif kind is ComponentKind.DETECTOR and dim is not None and (component.outcome or 0) >= dim:
            raise InvalidComponentError(
                f"{source}:{number}: DETECTOR outcome {component.outcome} out of range for d={dim}"
            )
        components.append(component)
    logger.debug(f"Parsed {len(components)} components from {source}")
    return components


def format_component(component: Component) -> str:
    kind = component.kind
    match kind:
        case ComponentKind.SWITCH_DEMUX:
            fields = [f"k={component.ports}"]
        case ComponentKind.SWITCH_MUX:
            fields = [f"k={component.ports}"]
            if component.routing:
                fields.append("order=" + ",".join(str(rail) for rail in component.routing))
        case ComponentKind.DELAY:
            fields = [f"rail={component.rails[0]}", f"dt={format_number(component.duration)}"]
        case ComponentKind.COUPLER:
            m, n = component.rails
            fields = [f"m={m}", f"n={n}", f"theta={format_number(component.theta)}", f"phi={format_number(component.phi)}"]
        case ComponentKind.PHASE:
            fields = [f"rail={component.rails[0]}", f"phi={format_number(component.phi)}"]
        case ComponentKind.SWAP:
            fields = [f"m={component.rails[0]}", f"n={component.rails[1]}"]
        case ComponentKind.LOSS:
            fields = [f"rail={component.rails[0] if component.rails else 'all'}"]
        case ComponentKind.DETECTOR:
            fields = [f"rail={component.rails[0]}", f"eff={format_number(component.efficiency)}"]
            if component.outcome is not None:
                fields.append(f"outcome={component.outcome}")
        case ComponentKind.POLCTRL:
            fields = ["matrix=" + ";".join(format_complex(value) for value in component.matrix.ravel())]
        case _:
            fields = []
    fields.append(f"loss_db={format_number(component.insertion_loss_db)}")
    return " ".join([str(kind), *fields])


def format_netlist(components: Iterable[Component]) -> str:
    return "".join(format_component(component) + "\n" for component in components)


def read_text(path: str | Path) -> str:
    """Read a UTF-8 text file; OSError propagates to the caller.

    Raises:
        FormatError: If the file is not valid UTF-8
    """
    path = Path(path)
    logger.debug(f"Reading {path}")
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"Not a UTF-8 text file (byte {e.start}: {e.reason})", str(path)) from e


def load_matrix(path: str | Path) -> np.ndarray:
    return parse_matrix(read_text(path), str(path))


def load_state(path: str | Path) -> QuditState:
    return parse_state(read_text(path), str(path))


def load_decomposition(path: str | Path) -> Decomposition:
    return parse_decomposition(read_text(path), str(path))


def load_netlist(path: str | Path) -> list[Component]:
    return parse_netlist(read_text(path), str(path))
