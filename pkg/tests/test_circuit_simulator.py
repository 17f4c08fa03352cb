"""Unit and integration tests for circuit_simulator module."""

from unittest.mock import patch

import numpy as np
import pytest
from timebin_gates.circuit_simulator import (
    BasisMeasurement,
    BasisNotOrthonormalError,
    CircuitError,
    GateCircuit,
    GateTemplate,
    TimingError,
    basis_change_matrix,
    build_gate,
    build_measurement,
    build_source,
    measure_in_basis,
    polarization_gate,
    prepare,
    simulate,
    transfer_matrix,
    validate_timing,
)
from timebin_gates.photonic_components import (
    ComponentKind,
    LossProfile,
    coupler,
    delay,
    detector,
    loss,
    loss_budget,
    polarization_controller,
    switch_demux,
    switch_mux,
)
from timebin_gates.protocols.mub import mub_qutrit
from timebin_gates.qudit_core import (
    DimensionMismatchError,
    Encoding,
    UnitaryMatrix,
    apply,
    basis_state,
    fidelity,
    make_state,
    random_state,
    random_unitary,
    same_up_to_phase,
)
from timebin_gates.reck_synthesis import decompose, reference_qutrit_unitary

LOSSLESS = LossProfile.lossless()
DT = 1e-10


def phase_count(circuit) -> int:
    return sum(c.kind is ComponentKind.PHASE for c in circuit.netlist)


class TestBuildGate:
    """Unit tests for build_gate function."""

    def test_qutrit_topology(self):
        """Should use three couplers and one swap for the qutrit basis change."""
        circuit = build_gate(decompose(reference_qutrit_unitary()), apply_phase_correction=False)

        kinds = [component.kind for component in circuit.netlist]
        assert len(circuit.couplers) == 3
        assert kinds.count(ComponentKind.SWAP) == 1
        assert kinds[0] is ComponentKind.SWITCH_DEMUX
        assert kinds[-1] is ComponentKind.SWITCH_MUX
        assert circuit.template is GateTemplate.QUDIT_GATE

    def test_synchronizing_delays(self):
        """Should delay line k by (d - k) dt after the demultiplexer."""
        circuit = build_gate(decompose(random_unitary(4, np.random.default_rng(1))), bin_separation=DT)

        delays = circuit.netlist[1:4]
        assert [c.rails[0] for c in delays] == [1, 2, 3]
        assert [c.duration for c in delays] == pytest.approx([3 * DT, 2 * DT, DT])

    def test_qubit_template(self):
        """Should use the dual-rail template for d = 2."""
        circuit = build_gate(decompose(random_unitary(2, np.random.default_rng(2))))

        assert circuit.template is GateTemplate.DUAL_RAIL
        assert len(circuit.couplers) == 1

    def test_couplers_on_adjacent_lines(self):
        """Should only mix adjacent physical lines."""
        circuit = build_gate(decompose(random_unitary(6, np.random.default_rng(3))))

        assert all(abs(c.rails[0] - c.rails[1]) == 1 for c in circuit.couplers)
        assert len(circuit.couplers) == 15

    def test_phase_correction_modulators(self):
        """Should add d phase modulators for P."""
        decomposition = decompose(random_unitary(3, np.random.default_rng(4)))

        with_p = build_gate(decomposition)
        without_p = build_gate(decomposition, apply_phase_correction=False)

        assert phase_count(with_p) - phase_count(without_p) == 3

    def test_timing_valid(self):
        """Should produce a synchronized netlist."""
        circuit = build_gate(decompose(random_unitary(5, np.random.default_rng(5))), bin_separation=DT)

        validate_timing(circuit)


class TestGateEquivalence:
    """Integration tests: simulated gates act as U."""

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_matches_direct_product(self, dim):
        """Should match U psi with fidelity >= 1 - 1e-9 over 100 random pairs."""
        rng = np.random.default_rng(200 + dim)
        for _ in range(100):
            unitary = random_unitary(dim, rng)
            state = random_state(dim, rng)
            decomposition = decompose(unitary)
            expected = apply(unitary, state)

            with_p = simulate(build_gate(decomposition), state)
            without_p = simulate(build_gate(decomposition, apply_phase_correction=False), state)

            assert fidelity(with_p.output_state, expected) >= 1 - 1e-9
            assert np.allclose(with_p.output_state.amplitudes, expected.amplitudes, atol=1e-9)
            assert np.allclose(
                without_p.output_state.probabilities(), expected.probabilities(), rtol=0, atol=1e-12
            )

    def test_transfer_matrix_is_unitary_gate(self):
        """Should reproduce U as the netlist's transfer matrix."""
        unitary = random_unitary(4, np.random.default_rng(8))

        circuit = build_gate(decompose(unitary))

        assert np.allclose(transfer_matrix(circuit).entries, unitary.entries, atol=1e-10)

    def test_reference_basis_change(self):
        """Should send |a'> to |a>."""
        circuit = build_gate(decompose(reference_qutrit_unitary()))
        primed = make_state([1, 1, 1])

        result = simulate(circuit, primed)

        assert fidelity(result.output_state, basis_state(3, 0)) == pytest.approx(1.0, abs=1e-12)


class TestSimulate:
    """Unit tests for simulate function."""

    def test_transmission_equals_budget(self):
        """Should report the loss-budget transmission without rail-specific loss."""
        circuit = build_gate(decompose(random_unitary(3, np.random.default_rng(6))))

        result = simulate(circuit, basis_state(3, 1))

        assert result.transmission == pytest.approx(loss_budget(circuit.netlist).transmission, rel=1e-12)
        assert result.click_probabilities is None
        assert result.output_state.encoding is Encoding.TIME_BIN

    def test_rail_specific_loss(self):
        """Should attenuate one rail and renormalize the output."""
        netlist = [
            switch_demux(2, LOSSLESS),
            delay(1, DT, LOSSLESS),
            loss(10 * np.log10(2), rail=1),
            delay(2, DT, LOSSLESS),
            switch_mux(2, (), LOSSLESS),
        ]
        circuit = GateCircuit(2, netlist, GateTemplate.DUAL_RAIL, DT)

        result = simulate(circuit, make_state([1, 1]))

        assert result.transmission == pytest.approx(0.75, abs=1e-12)
        assert np.allclose(result.output_state.amplitudes, [np.sqrt(1 / 3), np.sqrt(2 / 3)], atol=1e-12)

    def test_uniform_loss(self):
        """Should scale transmission without changing amplitudes."""
        netlist = [switch_demux(2, LOSSLESS), loss(3.0), switch_mux(2, (), LOSSLESS)]
        circuit = GateCircuit(2, netlist, GateTemplate.DUAL_RAIL)

        result = simulate(circuit, make_state([1, 1j]))

        assert result.transmission == pytest.approx(10**-0.3, rel=1e-12)
        assert np.allclose(result.output_state.amplitudes, make_state([1, 1j]).amplitudes)

    def test_dimension_mismatch(self):
        """Should reject an input of the wrong dimension."""
        circuit = build_gate(decompose(random_unitary(3, np.random.default_rng(7))))

        with pytest.raises(DimensionMismatchError):
            simulate(circuit, basis_state(2, 0))


class TestBuildSource:
    """Unit tests for build_source and prepare."""

    def test_qubit_topology(self):
        """Should use one coupler, a delayed second line and a 2x1 switch."""
        circuit = build_source(make_state([3, 4j]), LOSSLESS, DT)

        kinds = [c.kind for c in circuit.netlist]
        assert circuit.template is GateTemplate.SOURCE
        assert ComponentKind.SWITCH_DEMUX not in kinds
        assert kinds.count(ComponentKind.COUPLER) == 1
        assert kinds[-1] is ComponentKind.SWITCH_MUX
        assert [(c.rails, c.duration) for c in circuit.netlist if c.kind is ComponentKind.DELAY] == [((2,), DT)]

    def test_qubit_amplitudes(self):
        """Should emit alpha|short> + beta|long>."""
        target = make_state([3, 4j])

        result = prepare(build_source(target, LOSSLESS))

        assert same_up_to_phase(result.output_state, target, tol=1e-12)
        assert result.transmission == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("dim", [2, 3, 4, 5])
    def test_reproduces_random_states(self, dim):
        """Should prepare Haar-random states of any dimension."""
        rng = np.random.default_rng(40 + dim)
        for _ in range(10):
            target = random_state(dim, rng)

            circuit = build_source(target, LOSSLESS)

            assert len(circuit.couplers) == dim * (dim - 1) // 2
            assert same_up_to_phase(prepare(circuit).output_state, target, tol=1e-10)

    @pytest.mark.parametrize("index", [0, 1, 2])
    def test_basis_states(self, index):
        """Should prepare a single time bin."""
        result = prepare(build_source(basis_state(3, index), LOSSLESS))

        assert result.output_state.probabilities()[index] == pytest.approx(1.0, abs=1e-12)

    def test_transmission_equals_budget(self):
        """Should lose the insertion losses of every source component."""
        circuit = build_source(make_state([1, 1, 1]))

        assert prepare(circuit).transmission == pytest.approx(loss_budget(circuit.netlist).transmission, rel=1e-12)

    def test_simulate_rejects_source(self):
        """Should refuse an input state for a source."""
        with pytest.raises(CircuitError):
            simulate(build_source(make_state([1, 1])), basis_state(2, 0))

    def test_prepare_rejects_gate(self):
        """Should only prepare from a source."""
        with pytest.raises(CircuitError):
            prepare(build_gate(decompose(reference_qutrit_unitary())))


class TestGateCircuit:
    """Unit tests for GateCircuit validation and inference."""

    def test_must_start_with_demux(self):
        """Should reject a netlist without a leading demultiplexer."""
        with pytest.raises(CircuitError):
            GateCircuit(2, [coupler(2, 1, 0.3), switch_mux(2)], GateTemplate.DUAL_RAIL)

    def test_must_end_with_mux(self):
        """Should require a multiplexer for non-measurement gates."""
        with pytest.raises(CircuitError):
            GateCircuit(2, [switch_demux(2), coupler(2, 1, 0.3)], GateTemplate.DUAL_RAIL)

    def test_rail_beyond_dimension(self):
        """Should reject components addressing missing rails."""
        with pytest.raises(CircuitError):
            GateCircuit(2, [switch_demux(2), coupler(3, 2, 0.3), switch_mux(2)], GateTemplate.DUAL_RAIL)

    def test_detector_outcome_beyond_dimension(self):
        """Should reject an outcome label that is not below d."""
        netlist = [switch_demux(2), delay(1, DT), detector(1, 1.0, outcome=5), detector(2, 1.0, outcome=0)]

        with pytest.raises(CircuitError, match="outcome 5"):
            GateCircuit(2, netlist, GateTemplate.MEASUREMENT_GATE, DT)

    def test_from_netlist_inference(self):
        """Should infer the template and bin separation."""
        gate = build_gate(decompose(random_unitary(3, np.random.default_rng(9))), bin_separation=2e-10)
        measurement = build_measurement(decompose(random_unitary(2, np.random.default_rng(9))))

        inferred_gate = GateCircuit.from_netlist(list(gate.netlist))
        inferred_measurement = GateCircuit.from_netlist(list(measurement.netlist))

        assert inferred_gate.template is GateTemplate.QUDIT_GATE
        assert inferred_gate.bin_separation == pytest.approx(2e-10)
        assert inferred_measurement.template is GateTemplate.MEASUREMENT_GATE


class TestValidateTiming:
    """Unit tests for validate_timing function."""

    def test_missing_delay(self):
        """Should reject a coupler whose lines are not synchronized."""
        netlist = [
            switch_demux(2, LOSSLESS),
            coupler(2, 1, 0.4, 0.0, LOSSLESS),
            delay(1, DT, LOSSLESS),
            delay(2, DT, LOSSLESS),
            switch_mux(2, (), LOSSLESS),
        ]
        circuit = GateCircuit(2, netlist, GateTemplate.DUAL_RAIL, DT)

        with pytest.raises(TimingError):
            validate_timing(circuit)

    def test_wrong_remux_delay(self):
        """Should reject a line reaching the multiplexer in the wrong bin."""
        netlist = [
            switch_demux(2, LOSSLESS),
            delay(1, DT, LOSSLESS),
            coupler(2, 1, 0.4, 0.0, LOSSLESS),
            switch_mux(2, (), LOSSLESS),
        ]
        circuit = GateCircuit(2, netlist, GateTemplate.DUAL_RAIL, DT)

        with pytest.raises(TimingError):
            validate_timing(circuit)


class TestMeasurement:
    """Unit tests for measurement gates and basis measurements."""

    def test_clicks_sum_to_transmission(self):
        """Should give click probabilities summing to transmission times efficiency."""
        decomposition = decompose(random_unitary(3, np.random.default_rng(10)))
        circuit = build_measurement(decomposition, efficiency=0.88)

        result = simulate(circuit, random_state(3, np.random.default_rng(11)))

        expected = loss_budget(circuit.netlist).transmission * 0.88
        assert result.click_probabilities.sum() == pytest.approx(expected, abs=1e-12)
        assert result.output_state.encoding is Encoding.RAIL

    def test_phase_correction_irrelevant(self):
        """Should give identical clicks from gates with and without P."""
        rng = np.random.default_rng(12)
        decomposition = decompose(random_unitary(4, rng))
        state = random_state(4, rng)

        detected = simulate(build_measurement(decomposition, losses=LOSSLESS), state).click_probabilities
        with_p = simulate(build_gate(decomposition, losses=LOSSLESS), state).output_state.probabilities()

        assert np.allclose(detected, with_p, rtol=0, atol=1e-12)

    def test_basis_states_are_deterministic(self):
        """Should click outcome k with certainty for basis state k."""
        for basis in mub_qutrit().bases:
            measurement = BasisMeasurement(list(basis), 1.0, LOSSLESS)
            for index, state in enumerate(basis):
                clicks = measurement.click_probabilities(state)
                assert clicks[index] == pytest.approx(1.0, abs=1e-12)
                assert clicks.sum() == pytest.approx(1.0, abs=1e-12)

    def test_transfer_rows_follow_basis(self):
        """Should order transfer-matrix rows by outcome."""
        basis = list(mub_qutrit().bases[2])
        measurement = BasisMeasurement(basis, 1.0, LOSSLESS)

        moduli = np.abs(transfer_matrix(measurement.circuit).entries)

        assert np.allclose(moduli, np.abs(basis_change_matrix(basis).entries), atol=1e-12)

    def test_detector_outcome_labels(self):
        """Should label every outcome exactly once."""
        circuit = build_measurement(decompose(reference_qutrit_unitary()))

        assert sorted(c.outcome for c in circuit.detectors) == [0, 1, 2]

    def test_non_orthonormal_basis(self):
        """Should reject a basis with overlapping vectors."""
        with pytest.raises(BasisNotOrthonormalError):
            basis_change_matrix([make_state([1, 0]), make_state([1, 1])])

    def test_wrong_vector_count(self):
        """Should reject d - 1 vectors."""
        with pytest.raises(BasisNotOrthonormalError):
            basis_change_matrix([basis_state(3, 0), basis_state(3, 1)])

    def test_detector_netlist(self):
        """Should accept an explicit detector stage."""
        netlist = [switch_demux(2, LOSSLESS), delay(1, DT, LOSSLESS), coupler(2, 1, np.pi / 4, 0.0, LOSSLESS)]
        netlist += [detector(1, 1.0), detector(2, 1.0)]
        circuit = GateCircuit(2, netlist, GateTemplate.MEASUREMENT_GATE, DT)

        result = simulate(circuit, make_state([1, 1]))

        assert np.allclose(result.click_probabilities, [1.0, 0.0], atol=1e-12)


class TestMeasureInBasis:
    """Unit tests for measure_in_basis function."""

    def test_deterministic_for_seed(self):
        """Should return the same outcome for the same seed."""
        basis = list(mub_qutrit().bases[1])
        state = basis_state(3, 0)

        outcomes = {measure_in_basis(basis, state, 1.0, rng_seed=42, losses=LOSSLESS) for _ in range(5)}

        assert len(outcomes) == 1

    def test_eigenstate(self):
        """Should return k for basis state k with a perfect detector."""
        basis = list(mub_qutrit().bases[3])

        assert measure_in_basis(basis, basis[2], 1.0, rng_seed=0, losses=LOSSLESS) == 2

    def test_blind_detector(self):
        """Should never click at zero efficiency."""
        basis = [basis_state(2, 0), basis_state(2, 1)]

        assert measure_in_basis(basis, basis[0], 0.0, rng_seed=3) is None

    def test_frequencies(self):
        """Should sample unbiased outcomes from a mutually unbiased basis."""
        measurement = BasisMeasurement(list(mub_qutrit().bases[1]), 1.0, LOSSLESS)
        rng = np.random.default_rng(13)

        counts = np.zeros(3)
        for _ in range(3000):
            counts[measurement.sample(basis_state(3, 1), rng)] += 1

        assert np.all(np.abs(counts / 3000 - 1 / 3) < 0.04)


class TestPolarizationGate:
    """Unit tests for polarization_gate function."""

    def test_applies_matrix(self):
        """Should apply the 2x2 unitary to the time-bin qubit."""
        matrix = UnitaryMatrix(np.array([[1, 1j], [1j, 1]]) / np.sqrt(2))
        state = make_state([0.6, 0.8])

        result = polarization_gate(matrix, state)

        assert np.allclose(result.output_state.amplitudes, matrix.entries @ state.amplitudes, atol=1e-12)
        assert result.output_state.encoding is Encoding.TIME_BIN

    def test_switch_losses(self):
        """Should lose the two switch insertion losses."""
        result = polarization_gate(UnitaryMatrix.identity(2), basis_state(2, 0), LossProfile(switch_db=1.5, pbsc_db=0.0, polctrl_db=0.0))

        assert result.transmission == pytest.approx(10**-0.3, rel=1e-12)

    def test_output_follows_netlist_controller(self):
        """Should take the output from the controller placed in the netlist."""
        swap = np.array([[0, 1], [1, 0]])
        state = make_state([0.6, 0.8])

        with patch(
            "timebin_gates.circuit_simulator.polarization_controller",
            side_effect=lambda _, losses: polarization_controller(swap, losses),
        ):
            result = polarization_gate(UnitaryMatrix.identity(2), state, LOSSLESS)

        assert np.allclose(result.output_state.amplitudes, [0.8, 0.6], atol=1e-12)

    def test_all_component_losses(self):
        """Should multiply the losses of every component on the path."""
        losses = LossProfile(switch_db=1.5, pbsc_db=0.2, polctrl_db=0.5, delay_db=0.05)

        result = polarization_gate(UnitaryMatrix.identity(2), basis_state(2, 1), losses)

        assert result.transmission == pytest.approx(10 ** (-(3.0 + 0.4 + 0.5 + 0.1) / 10), rel=1e-12)

    def test_qutrit_rejected(self):
        """Should only act on qubits."""
        with pytest.raises(DimensionMismatchError):
            polarization_gate(UnitaryMatrix.identity(3), basis_state(3, 0))
