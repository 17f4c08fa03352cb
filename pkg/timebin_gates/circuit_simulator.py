"""Gate netlists built from decompositions, single-photon propagation and basis measurements.

Rail convention: the demultiplexer routes time bin k to line k (bin 1, the
earliest, is |short>), and line k is delayed by (d-k) dt so every line is
synchronized before the first coupler. A source has no demultiplexer: one
photon enters rail 1 and every line starts at offset 0.
"""

import logging
import os
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.linalg import null_space

from .photonic_components import (
    DEFAULT_LOSSES,
    UNITARY_KINDS,
    Component,
    ComponentKind,
    LossProfile,
    component_matrix,
    coupler,
    db_to_transmission,
    delay,
    detector,
    pbsc,
    phase_modulator,
    polarization_controller,
    rail_swap,
    switch_demux,
    switch_mux,
)
from .qudit_core import (
    DimensionMismatchError,
    Encoding,
    EncodingMismatchError,
    QuditError,
    QuditState,
    UnitaryMatrix,
    apply,
    from_polarization,
    make_state,
    to_polarization,
)
from .reck_synthesis import Decomposition, decompose

logger = logging.getLogger(__name__)

DEFAULT_BIN_SEPARATION = float(os.getenv("TIMEBIN_BIN_SEPARATION_S", "1e-10"))
ORTHONORMAL_TOLERANCE = 1e-10


class CircuitError(QuditError):
    """Raised when a netlist does not form a valid gate"""

    pass


class TimingError(CircuitError):
    """Raised when rails are not synchronized where they interfere"""

    pass


class BasisNotOrthonormalError(QuditError):
    """Raised when measurement basis vectors are not orthonormal"""

    pass


class GateTemplate(StrEnum):
    DUAL_RAIL = "dual-rail"
    POLARIZATION_GATE = "polarization"
    MEASUREMENT_GATE = "measurement"
    QUDIT_GATE = "qudit"
    SOURCE = "source"


@dataclass(frozen=True)
class GateCircuit:
    dim: int
    netlist: tuple[Component, ...]
    template: GateTemplate
    bin_separation: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "netlist", tuple(self.netlist))
        if self.template is GateTemplate.SOURCE:
            if not self.netlist or any(c.kind is ComponentKind.SWITCH_DEMUX for c in self.netlist):
                raise CircuitError("A source starts from one photon on rail 1 and has no demultiplexer")
        elif not self.netlist or self.netlist[0].kind is not ComponentKind.SWITCH_DEMUX:
            raise CircuitError("A gate must begin with a demultiplexing switch")
        elif self.netlist[0].ports != self.dim:
            raise CircuitError(
                f"Demultiplexer has {self.netlist[0].ports} ports for a {self.dim}-level gate"
            )
        if self.template is not GateTemplate.MEASUREMENT_GATE:
            last = self.netlist[-1]
            if last.kind is not ComponentKind.SWITCH_MUX or last.ports != self.dim:
                raise CircuitError(f"A {self.template} gate must end with a {self.dim}x1 switch")
        for index, component in enumerate(self.netlist):
            if any(rail > self.dim for rail in component.rails):
                raise CircuitError(
                    f"{component.kind} references rail(s) {component.rails} beyond d={self.dim}"
                )
            if component.outcome is not None and not 0 <= component.outcome < self.dim:
                raise CircuitError(
                    f"Component {index} ({component.kind}) has outcome {component.outcome}, expected 0..{self.dim - 1}"
                )

    @classmethod
    def from_netlist(cls, netlist: list[Component]) -> "GateCircuit":
        """Infer dimension, template and bin separation of a parsed netlist."""
        if not netlist or netlist[0].kind is not ComponentKind.SWITCH_DEMUX:
            raise CircuitError("Netlist must begin with SWITCH_DEMUX")
        dim = netlist[0].ports
        kinds = {component.kind for component in netlist}
        if ComponentKind.DETECTOR in kinds:
            template = GateTemplate.MEASUREMENT_GATE
        elif ComponentKind.POLCTRL in kinds:
            template = GateTemplate.POLARIZATION_GATE
        elif dim == 2:
            template = GateTemplate.DUAL_RAIL
        else:
            template = GateTemplate.QUDIT_GATE
        durations = [c.duration for c in netlist if c.kind is ComponentKind.DELAY and c.duration > 0]
        return cls(dim, tuple(netlist), template, min(durations) if durations else None)

    @property
    def couplers(self) -> list[Component]:
        return [c for c in self.netlist if c.kind is ComponentKind.COUPLER]

    @property
    def detectors(self) -> list[Component]:
        return [c for c in self.netlist if c.kind is ComponentKind.DETECTOR]


@dataclass(frozen=True, eq=False)
class SimulationResult:
    output_state: QuditState
    transmission: float
    click_probabilities: np.ndarray | None = None


def _route_couplers(
    decomposition: Decomposition, losses: LossProfile
) -> tuple[list[Component], list[int]]:
    """Place each coupler step on adjacent physical lines.

    Returns the components and the final line -> logical rail assignment
    (index 0 unused).
    """
    dim = decomposition.dim
    line_of = list(range(dim + 1))
    rail_on = list(range(dim + 1))
    components = []
    for step in decomposition.steps:
        m_line, n_line = line_of[step.m], line_of[step.n]
        if abs(m_line - n_line) != 1:
            target = m_line - 1 if n_line < m_line else m_line + 1
            components.append(rail_swap(n_line, target))
            displaced = rail_on[target]
            rail_on[target], rail_on[n_line] = step.n, displaced
            line_of[step.n], line_of[displaced] = target, n_line
            logger.debug(f"Swapped lines {n_line} and {target} to bring rail {step.n} next to rail {step.m}")
            n_line = target
        components.append(phase_modulator(n_line, step.phi, losses))
        components.append(coupler(m_line, n_line, step.theta, 0.0, losses))
    return components, rail_on


def _demux_section(dim: int, bin_separation: float, losses: LossProfile) -> list[Component]:
    components = [switch_demux(dim, losses)]
    for line in range(1, dim):
        components.append(delay(line, (dim - line) * bin_separation, losses))
    return components


def _mux_section(
    decomposition: Decomposition,
    rail_on: list[int],
    apply_phase_correction: bool,
    bin_separation: float,
    losses: LossProfile,
) -> list[Component]:
    """Phase correction, re-timing delays and the d x 1 switch after the couplers."""
    dim = decomposition.dim
    components = []
    if apply_phase_correction:
        for line in range(1, dim + 1):
            phase = decomposition.correction.phases[rail_on[line] - 1]
            components.append(phase_modulator(line, phase, losses))
    for line in range(1, dim + 1):
        if rail_on[line] > 1:
            components.append(delay(line, (rail_on[line] - 1) * bin_separation, losses))
    routing = tuple(rail_on[1:]) if rail_on[1:] != list(range(1, dim + 1)) else ()
    components.append(switch_mux(dim, routing, losses))
    return components


def build_gate(
    decomposition: Decomposition,
    apply_phase_correction: bool = True,
    losses: LossProfile = DEFAULT_LOSSES,
    bin_separation: float = DEFAULT_BIN_SEPARATION,
) -> GateCircuit:
    """Compile a decomposition into a time-bin gate netlist.

    Args:
        decomposition: Coupler sequence and phase correction to realize
        apply_phase_correction: Append the output phase modulators P
        losses: Insertion losses for the generated components
        bin_separation: Time-bin separation dt in seconds

    Returns:
        GateCircuit (dual-rail template for d=2, qudit template otherwise)
    """
    dim = decomposition.dim
    netlist = _demux_section(dim, bin_separation, losses)
    routed, rail_on = _route_couplers(decomposition, losses)
    netlist.extend(routed)
    netlist.extend(_mux_section(decomposition, rail_on, apply_phase_correction, bin_separation, losses))

    template = GateTemplate.DUAL_RAIL if dim == 2 else GateTemplate.QUDIT_GATE
    circuit = GateCircuit(dim, tuple(netlist), template, bin_separation)
    validate_timing(circuit)
    logger.info(
        f"Built {template} gate: {len(circuit.couplers)} couplers, "
        f"{sum(c.kind is ComponentKind.SWAP for c in netlist)} swaps, {len(netlist)} components"
    )
    return circuit


def build_source(
    state: QuditState,
    losses: LossProfile = DEFAULT_LOSSES,
    bin_separation: float = DEFAULT_BIN_SEPARATION,
) -> GateCircuit:
    """Compile a preparation netlist for a time-bin state.

    One photon enters rail 1. Couplers set the split ratios over the d rails,
    phase modulators set the relative phases, line k is delayed by (k-1) dt and
    a d x 1 switch merges the rails into consecutive bins. For a qubit this is
    a single coupler and phase followed by a 2x1 switch.

    Args:
        state: Target state; only its amplitudes are used
        losses: Insertion losses for the generated components
        bin_separation: Time-bin separation dt in seconds

    Returns:
        GateCircuit with the source template; `prepare` gives its output
    """
    # columns after the first complete the target to a unitary
    completion = null_space(state.amplitudes.conj()[np.newaxis, :])
    decomposition = decompose(UnitaryMatrix(np.column_stack([state.amplitudes, completion])))
    netlist, rail_on = _route_couplers(decomposition, losses)
    netlist.extend(_mux_section(decomposition, rail_on, True, bin_separation, losses))
    circuit = GateCircuit(state.dim, tuple(netlist), GateTemplate.SOURCE, bin_separation)
    validate_timing(circuit)
    logger.debug(f"Built {state.dim}-level source with {len(circuit.couplers)} couplers")
    return circuit


def build_measurement(
    decomposition: Decomposition,
    efficiency: float = 1.0,
    losses: LossProfile = DEFAULT_LOSSES,
    bin_separation: float = DEFAULT_BIN_SEPARATION,
) -> GateCircuit:
    """Measurement gate: the rail couplers followed directly by one detector per line.

    Detector outcomes are labelled with the 0-based logical rail each line carries.
    No phase correction is needed since detection follows the couplers.
    """
    dim = decomposition.dim
    netlist = _demux_section(dim, bin_separation, losses)
    routed, rail_on = _route_couplers(decomposition, losses)
    netlist.extend(routed)
    netlist.extend(detector(line, efficiency, rail_on[line] - 1) for line in range(1, dim + 1))
    circuit = GateCircuit(dim, tuple(netlist), GateTemplate.MEASUREMENT_GATE, bin_separation)
    validate_timing(circuit)
    return circuit


def validate_timing(circuit: GateCircuit) -> None:
    """Check structurally that interfering rails are synchronized.

    Line k starts at offset (k-1) dt, or at 0 in a source. Every coupler must see
    equal offsets on its two lines; at the multiplexer the line carrying rail k
    must sit k-1 bins after the synchronized time.

    Raises:
        TimingError: On any mismatch
    """
    dt = circuit.bin_separation
    if dt is None:
        if any(c.kind is ComponentKind.DELAY for c in circuit.netlist):
            raise TimingError("Delays present but no bin separation known")
        return
    if circuit.template is GateTemplate.SOURCE:
        offsets = [0.0] * circuit.dim
        synchronized = 0.0
    else:
        offsets = [(line - 1) * dt for line in range(1, circuit.dim + 1)]
        synchronized = (circuit.dim - 1) * dt
    tolerance = 1e-9 * dt
    for index, component in enumerate(circuit.netlist):
        match component.kind:
            case ComponentKind.DELAY:
                offsets[component.rails[0] - 1] += component.duration
            case ComponentKind.SWAP:
                i, j = (rail - 1 for rail in component.rails)
                offsets[i], offsets[j] = offsets[j], offsets[i]
            case ComponentKind.COUPLER | ComponentKind.DETECTOR:
                for rail in component.rails:
                    if abs(offsets[rail - 1] - synchronized) > tolerance:
                        raise TimingError(
                            f"Component {index} ({component.kind}) sees line {rail} at "
                            f"{offsets[rail - 1]:.3e} s, expected {synchronized:.3e} s"
                        )
            case ComponentKind.SWITCH_MUX:
                routing = component.routing or tuple(range(1, circuit.dim + 1))
                for line, rail in enumerate(routing, start=1):
                    expected = synchronized + (rail - 1) * dt
                    if abs(offsets[line - 1] - expected) > tolerance:
                        raise TimingError(
                            f"Line {line} reaches the multiplexer at {offsets[line - 1]:.3e} s, "
                            f"expected {expected:.3e} s for bin {rail}"
                        )


def transfer_matrix(circuit: GateCircuit) -> UnitaryMatrix:
    """Unitary part of a circuit; for measurement gates rows are ordered by outcome."""
    product = np.eye(circuit.dim, dtype=complex)
    for component in circuit.netlist:
        if component.kind in UNITARY_KINDS:
            product = component_matrix(component, circuit.dim).entries @ product
    if circuit.template is GateTemplate.MEASUREMENT_GATE:
        product = product[_outcome_order(circuit)]
    return UnitaryMatrix(product)


def _outcome_order(circuit: GateCircuit) -> list[int]:
    """Line index (0-based) read out as each outcome."""
    order = [None] * circuit.dim
    for component in circuit.detectors:
        outcome = component.outcome if component.outcome is not None else component.rails[0] - 1
        order[outcome] = component.rails[0] - 1
    if None in order:
        raise CircuitError("Detectors must cover every rail exactly once")
    return order


def simulate(circuit: GateCircuit, state: QuditState) -> SimulationResult:
    """Propagate a single photon through the netlist.

    Args:
        circuit: Gate to simulate
        state: Time-bin input state

    Returns:
        SimulationResult with the normalized output state, the survival
        probability and, for measurement gates, per-outcome click probabilities

    Raises:
        DimensionMismatchError: If the state and circuit dimensions differ
        CircuitError: For a source, which takes no input state
    """
    if circuit.template is GateTemplate.SOURCE:
        raise CircuitError("A source takes no input state; use prepare()")
    if state.dim != circuit.dim:
        raise DimensionMismatchError(
            f"Input has dimension {state.dim}, circuit has dimension {circuit.dim}"
        )
    if state.encoding is not Encoding.TIME_BIN:
        raise EncodingMismatchError(f"Gates take time-bin inputs, got {state.encoding}")

    amplitudes, transmission, efficiencies = _propagate(circuit, state.amplitudes)

    if circuit.template is GateTemplate.MEASUREMENT_GATE:
        order = _outcome_order(circuit)
        amplitudes = amplitudes[order]
        clicks = transmission * efficiencies[order] * np.abs(amplitudes) ** 2
        output = make_state(amplitudes, Encoding.RAIL)
        return SimulationResult(output, transmission, clicks)

    output = make_state(amplitudes, Encoding.TIME_BIN, state.bin_separation)
    return SimulationResult(output, transmission)


def prepare(circuit: GateCircuit) -> SimulationResult:
    """Time-bin state emitted by a source when one photon enters rail 1.

    Raises:
        CircuitError: If the circuit is not a source
    """
    if circuit.template is not GateTemplate.SOURCE:
        raise CircuitError(f"prepare() needs a source, got a {circuit.template} circuit")
    photon = np.zeros(circuit.dim, dtype=complex)
    photon[0] = 1.0
    amplitudes, transmission, _ = _propagate(circuit, photon)
    output = make_state(amplitudes, Encoding.TIME_BIN, circuit.bin_separation)
    return SimulationResult(output, transmission)


def _propagate(circuit: GateCircuit, amplitudes: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Run rail amplitudes through the netlist; returns amplitudes, transmission and detector efficiencies."""
    amplitudes = amplitudes.copy()
    transmission = 1.0
    efficiencies = np.ones(circuit.dim)
    for component in circuit.netlist:
        if component.kind is ComponentKind.LOSS and component.rails:
            rail = component.rails[0] - 1
            amplitudes[rail] *= np.sqrt(db_to_transmission(component.insertion_loss_db))
            survival = float(np.vdot(amplitudes, amplitudes).real)
            transmission *= survival
            amplitudes /= np.sqrt(survival)
            continue
        transmission *= db_to_transmission(component.insertion_loss_db)
        if component.kind is ComponentKind.DETECTOR:
            efficiencies[component.rails[0] - 1] = component.efficiency
        elif component.kind is not ComponentKind.LOSS:
            amplitudes = component_matrix(component, circuit.dim).entries @ amplitudes
    return amplitudes, transmission, efficiencies


def basis_change_matrix(basis: list[QuditState]) -> UnitaryMatrix:
    """Unitary sending basis[k] to rail k.

    Raises:
        BasisNotOrthonormalError: If the vectors are not orthonormal within 1e-10
    """
    dim = basis[0].dim if basis else 0
    if len(basis) != dim or any(vector.dim != dim for vector in basis):
        raise BasisNotOrthonormalError(f"Need {dim} vectors of dimension {dim}, got {len(basis)}")
    rows = np.array([vector.amplitudes.conj() for vector in basis])
    gram_error = float(np.linalg.norm(rows @ rows.conj().T - np.eye(dim)))
    if gram_error > ORTHONORMAL_TOLERANCE:
        raise BasisNotOrthonormalError(f"Basis Gram matrix deviates from identity by {gram_error:.3e}")
    return UnitaryMatrix(rows)


class BasisMeasurement:
    """Prebuilt measurement circuit for one basis, reusable across many photons."""

    def __init__(
        self,
        basis: list[QuditState],
        efficiency: float = 1.0,
        losses: LossProfile = DEFAULT_LOSSES,
        bin_separation: float = DEFAULT_BIN_SEPARATION,
    ):
        self.basis = list(basis)
        self.circuit = build_measurement(
            decompose(basis_change_matrix(self.basis)), efficiency, losses, bin_separation
        )

    @property
    def dim(self) -> int:
        return self.circuit.dim

    def click_probabilities(self, state: QuditState) -> np.ndarray:
        return simulate(self.circuit, state).click_probabilities

    def sample(self, state: QuditState, rng: np.random.Generator) -> int | None:
        """Draw one outcome index, or None when no detector clicks."""
        cumulative = np.cumsum(self.click_probabilities(state))
        outcome = int(np.searchsorted(cumulative, rng.random(), side="right"))
        return outcome if outcome < self.dim else None


def measure_in_basis(
    basis: list[QuditState],
    state: QuditState,
    efficiency: float = 1.0,
    rng_seed: int = 0,
    losses: LossProfile = DEFAULT_LOSSES,
) -> int | None:
    """Measure a time-bin photon in an arbitrary orthonormal basis.

    Args:
        basis: d orthonormal states; outcome k corresponds to basis[k]
        state: Normalized time-bin input
        efficiency: Detector efficiency
        rng_seed: Seed of the sampling generator
        losses: Insertion losses of the measurement circuit

    Returns:
        Outcome index, or None for no click

    Raises:
        BasisNotOrthonormalError: If the basis is not orthonormal
    """
    measurement = BasisMeasurement(basis, efficiency, losses)
    return measurement.sample(state, np.random.default_rng(rng_seed))


def polarization_gate(
    matrix: UnitaryMatrix,
    state: QuditState,
    losses: LossProfile = DEFAULT_LOSSES,
    bin_separation: float = DEFAULT_BIN_SEPARATION,
) -> SimulationResult:
    """Apply a qubit unitary by converting the time-bin qubit to polarization and back.

    The photon walks the netlist (two switches, two PBSCs, one polarization
    controller). The first PBSC maps |short> -> |V> and |long> -> |H>, the
    controller acts on (V, H) and the second PBSC maps back.

    Raises:
        DimensionMismatchError: Unless both the matrix and the state are 2-dimensional
    """
    if state.dim != 2 or matrix.dim != 2:
        raise DimensionMismatchError(
            f"The polarization gate acts on qubits, got state d={state.dim}, matrix d={matrix.dim}"
        )
    netlist = (
        switch_demux(2, losses),
        delay(1, bin_separation, losses),
        pbsc(losses),
        polarization_controller(matrix.entries, losses),
        pbsc(losses),
        delay(2, bin_separation, losses),
        switch_mux(2, (), losses),
    )
    circuit = GateCircuit(2, netlist, GateTemplate.POLARIZATION_GATE, bin_separation)
    validate_timing(circuit)
    photon = state
    transmission = 1.0
    for component in circuit.netlist:
        transmission *= db_to_transmission(component.insertion_loss_db)
        if component.kind is not ComponentKind.PBSC:
            photon = apply(component_matrix(component, 2), photon)
        elif photon.encoding is Encoding.POLARIZATION:
            photon = from_polarization(photon, state.bin_separation)
        else:
            photon = to_polarization(photon)
    return SimulationResult(photon, transmission)
