import logging
from collections.abc import Callable
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .circuit_simulator import build_gate, transfer_matrix
from .photonic_components import (
    ComponentKind,
    LossProfile,
    loss_budget,
    switch_demux,
    switch_mux,
    timing_feasibility,
)
from .protocols.chsh import ChshConfig, analytic_threshold, chsh_analytic
from .protocols.mub import mub_qutrit
from .reck_synthesis import (
    REFERENCE_TOLERANCE,
    coupler_count,
    decompose,
    reference_qutrit_unitary,
    reconstruct,
    verify_reference_example,
)

logger = logging.getLogger(__name__)

try:
    PACKAGE_VERSION = version("timebin-gates")
except PackageNotFoundError:
    PACKAGE_VERSION = "unknown"

# Quoted figures the check suite reproduces
GATE_LOSS_DB = 3.0
PATH_DIFFERENCE_M = 0.0204
PATH_DIFFERENCE_TOLERANCE_M = 5e-4
EFFICIENCY_THRESHOLD = 0.83
EFFICIENCY_TOLERANCE = 0.01


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_reference_factorization() -> CheckResult:
    report = verify_reference_example()
    return CheckResult(
        "reference-factorization",
        report.passed,
        f"residual={report.factorization_residual:.3e} off_diagonal={report.off_diagonal_norm:.3e}",
    )


def check_product_moduli() -> CheckResult:
    moduli = verify_reference_example().product_moduli
    deviation = float(np.max(np.abs(moduli - 1 / np.sqrt(3))))
    return CheckResult("reference-product-moduli", deviation <= REFERENCE_TOLERANCE, f"max_deviation={deviation:.3e}")


def check_reference_decomposition() -> CheckResult:
    unitary = reference_qutrit_unitary()
    decomposition = decompose(unitary)
    residual = float(np.linalg.norm(reconstruct(decomposition).entries - unitary.entries))
    passed = residual <= 1e-10 and len(decomposition.steps) == coupler_count(3)
    return CheckResult("qutrit-decomposition", passed, f"residual={residual:.3e} couplers={len(decomposition.steps)}")


def check_qutrit_topology() -> CheckResult:
    circuit = build_gate(decompose(reference_qutrit_unitary()), apply_phase_correction=False)
    swaps = sum(component.kind is ComponentKind.SWAP for component in circuit.netlist)
    couplers = len(circuit.couplers)
    # without P the gate equals U up to output phases
    moduli = np.abs(transfer_matrix(circuit).entries)
    deviation = float(np.max(np.abs(moduli - np.abs(reference_qutrit_unitary().entries))))
    passed = couplers == 3 and swaps == 1 and deviation <= 1e-10
    return CheckResult("qutrit-gate-topology", passed, f"couplers={couplers} swaps={swaps}")


def check_mub() -> CheckResult:
    within, across = mub_qutrit().deviations()
    passed = within <= REFERENCE_TOLERANCE and across <= REFERENCE_TOLERANCE
    return CheckResult("qutrit-mub", passed, f"within={within:.3e} across={across:.3e}")


def check_gate_loss() -> CheckResult:
    losses = LossProfile(switch_db=1.5)
    budget = loss_budget([switch_demux(2, losses), switch_mux(2, (), losses)])
    passed = abs(budget.total_db - GATE_LOSS_DB) <= 1e-12
    return CheckResult("gate-loss-budget", passed, f"total_db={budget.total_db:.12g} transmission={budget.transmission:.12g}")


def check_timing() -> CheckResult:
    timing = timing_feasibility(1e-10, 1e10, group_index=1.468)
    passed = timing.feasible and abs(timing.path_difference - PATH_DIFFERENCE_M) <= PATH_DIFFERENCE_TOLERANCE_M
    return CheckResult("timing-10GHz", passed, f"path_difference_m={timing.path_difference:.12g}")


def check_efficiency_threshold() -> CheckResult:
    eta = analytic_threshold()
    config = ChshConfig()
    below = chsh_analytic(config.with_efficiency(eta - 1e-3))
    above = chsh_analytic(config.with_efficiency(eta + 1e-3))
    passed = abs(eta - EFFICIENCY_THRESHOLD) <= EFFICIENCY_TOLERANCE and below < 2.0 < above
    return CheckResult("chsh-efficiency-threshold", passed, f"eta={eta:.12g}")


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_reference_factorization,
    check_product_moduli,
    check_reference_decomposition,
    check_qutrit_topology,
    check_mub,
    check_gate_loss,
    check_timing,
    check_efficiency_threshold,
)


def verify_reference(checks=CHECKS) -> list[CheckResult]:
    """Run the reproduction checks; a check that raises is recorded as a failure.

    Returns:
        One CheckResult per check, in order
    """
    results = []
    errors = 0
    for check in checks:
        try:
            result = check()
        except Exception as e:
            logger.error(f"Check {check.__name__} raised: {e}", exc_info=True)
            result = CheckResult(check.__name__.removeprefix("check_").replace("_", "-"), False, f"error={e}")
        if not result.passed:
            errors += 1
        results.append(result)
    logger.info(f"Verification complete: {len(results) - errors}/{len(results)} checks passed")
    return results
