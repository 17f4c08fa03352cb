"""Fiber components: unitary transfer matrices, insertion-loss budgets and timing feasibility."""

import logging
import os
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .qudit_core import QuditError, RailOutOfRangeError, UnitaryMatrix
from .reck_synthesis import CouplerStep, coupler_unitary, embed

logger = logging.getLogger(__name__)

SWITCH_LOSS_DB = float(os.getenv("TIMEBIN_SWITCH_LOSS_DB", "1.5"))
COUPLER_LOSS_DB = float(os.getenv("TIMEBIN_COUPLER_LOSS_DB", "0.1"))
PHASE_LOSS_DB = float(os.getenv("TIMEBIN_PHASE_LOSS_DB", "0.0"))
PBSC_LOSS_DB = float(os.getenv("TIMEBIN_PBSC_LOSS_DB", "0.0"))
DELAY_LOSS_DB = float(os.getenv("TIMEBIN_DELAY_LOSS_DB", "0.0"))
POLCTRL_LOSS_DB = float(os.getenv("TIMEBIN_POLCTRL_LOSS_DB", "0.0"))

# Standard single-mode fiber near 1550 nm
GROUP_INDEX = float(os.getenv("TIMEBIN_GROUP_INDEX", "1.468"))
THERMAL_TOLERANCE_K = float(os.getenv("TIMEBIN_THERMAL_TOLERANCE_K", "0.1"))


class InvalidComponentError(QuditError):
    """Raised when a component description violates its constraints"""

    pass


class NonUnitaryComponentError(QuditError):
    """Raised when a transfer matrix is requested for a loss or detector element"""

    pass


class ComponentKind(StrEnum):
    SWITCH_DEMUX = "SWITCH_DEMUX"
    SWITCH_MUX = "SWITCH_MUX"
    DELAY = "DELAY"
    COUPLER = "COUPLER"
    PHASE = "PHASE"
    SWAP = "SWAP"
    LOSS = "LOSS"
    DETECTOR = "DETECTOR"
    PBSC = "PBSC"
    POLCTRL = "POLCTRL"


UNITARY_KINDS = frozenset(ComponentKind) - {ComponentKind.LOSS, ComponentKind.DETECTOR}


@dataclass(frozen=True, eq=False)
class Component:
    """One element of a netlist.

    Rails are 1-based physical lines. Which fields matter depends on the kind:
    switches use ``ports`` (and ``routing`` for a multiplexer), couplers ``rails=(m, n)``
    with ``theta``/``phi``, phase modulators ``rails=(k,)`` with ``phi``, delays
    ``duration``, detectors ``efficiency`` and ``outcome``, polarization
    controllers ``matrix``. A LOSS with empty ``rails`` attenuates every rail.
    """

    kind: ComponentKind
    insertion_loss_db: float = 0.0
    rails: tuple[int, ...] = ()
    ports: int = 0
    theta: float = 0.0
    phi: float = 0.0
    duration: float = 0.0
    efficiency: float = 1.0
    outcome: int | None = None
    routing: tuple[int, ...] = ()
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ComponentKind(self.kind))
        object.__setattr__(self, "rails", tuple(self.rails))
        object.__setattr__(self, "routing", tuple(self.routing))
        if self.insertion_loss_db < 0:
            raise InvalidComponentError(
                f"{self.kind}: insertion loss must be >= 0 dB, got {self.insertion_loss_db}"
            )
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidComponentError(
                f"{self.kind}: detector efficiency must lie in [0, 1], got {self.efficiency}"
            )
        if self.duration < 0:
            raise InvalidComponentError(f"{self.kind}: negative delay {self.duration}")
        if any(rail < 1 for rail in self.rails):
            raise RailOutOfRangeError(f"{self.kind}: rails are 1-based, got {self.rails}")
        if self.outcome is not None and self.outcome < 0:
            raise InvalidComponentError(f"{self.kind}: outcome labels are 0-based, got {self.outcome}")
        expected_rails = {
            ComponentKind.COUPLER: 2,
            ComponentKind.SWAP: 2,
            ComponentKind.PHASE: 1,
            ComponentKind.DELAY: 1,
            ComponentKind.DETECTOR: 1,
        }.get(self.kind)
        if expected_rails is not None and len(self.rails) != expected_rails:
            raise InvalidComponentError(
                f"{self.kind} needs {expected_rails} rail(s), got {self.rails}"
            )
        if self.kind is ComponentKind.POLCTRL:
            if self.matrix is None:
                raise InvalidComponentError("POLCTRL needs a 2x2 matrix")
            object.__setattr__(self, "matrix", UnitaryMatrix(self.matrix).entries)


@dataclass(frozen=True)
class LossProfile:
    """Default insertion losses in dB applied by the component factories."""

    switch_db: float = SWITCH_LOSS_DB
    coupler_db: float = COUPLER_LOSS_DB
    phase_db: float = PHASE_LOSS_DB
    pbsc_db: float = PBSC_LOSS_DB
    delay_db: float = DELAY_LOSS_DB
    polctrl_db: float = POLCTRL_LOSS_DB

    @classmethod
    def lossless(cls) -> "LossProfile":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


DEFAULT_LOSSES = LossProfile()


def switch_demux(ports: int, losses: LossProfile = DEFAULT_LOSSES) -> Component:
    return Component(ComponentKind.SWITCH_DEMUX, losses.switch_db, ports=ports)


def switch_mux(
    ports: int, routing: Iterable[int] = (), losses: LossProfile = DEFAULT_LOSSES
) -> Component:
    return Component(
        ComponentKind.SWITCH_MUX, losses.switch_db, ports=ports, routing=tuple(routing)
    )


def delay(rail: int, duration: float, losses: LossProfile = DEFAULT_LOSSES) -> Component:
    return Component(ComponentKind.DELAY, losses.delay_db, rails=(rail,), duration=duration)


def coupler(
    m: int, n: int, theta: float, phi: float = 0.0, losses: LossProfile = DEFAULT_LOSSES
) -> Component:
    return Component(ComponentKind.COUPLER, losses.coupler_db, rails=(m, n), theta=theta, phi=phi)


def phase_modulator(rail: int, phi: float, losses: LossProfile = DEFAULT_LOSSES) -> Component:
    return Component(ComponentKind.PHASE, losses.phase_db, rails=(rail,), phi=phi)


def rail_swap(m: int, n: int) -> Component:
    return Component(ComponentKind.SWAP, rails=(m, n))


def loss(loss_db: float, rail: int | None = None) -> Component:
    return Component(ComponentKind.LOSS, loss_db, rails=() if rail is None else (rail,))


def detector(rail: int, efficiency: float, outcome: int | None = None) -> Component:
    return Component(ComponentKind.DETECTOR, rails=(rail,), efficiency=efficiency, outcome=outcome)


def pbsc(losses: LossProfile = DEFAULT_LOSSES) -> Component:
    return Component(ComponentKind.PBSC, losses.pbsc_db)


def polarization_controller(matrix, losses: LossProfile = DEFAULT_LOSSES) -> Component:
    return Component(ComponentKind.POLCTRL, losses.polctrl_db, matrix=matrix)


@dataclass(frozen=True)
class LossBudget:
    per_component: tuple[tuple[int, float], ...]
    total_db: float
    transmission: float


@dataclass(frozen=True)
class TimingSpec:
    bin_separation: float
    switch_rate: float
    group_index: float
    path_difference: float
    thermal_tolerance: float
    feasible: bool


def _check_rails(component: Component, dim: int) -> None:
    for rail in component.rails:
        if rail > dim:
            raise RailOutOfRangeError(f"{component.kind} references rail {rail} but d={dim}")


def _routing_matrix(routing: tuple[int, ...], dim: int) -> np.ndarray:
    if not routing:
        return np.eye(dim, dtype=complex)
    if sorted(routing) != list(range(1, dim + 1)):
        raise InvalidComponentError(f"Routing {routing} is not a permutation of 1..{dim}")
    permutation = np.zeros((dim, dim), dtype=complex)
    for line, target in enumerate(routing):
        permutation[target - 1, line] = 1.0
    return permutation


def component_matrix(component: Component, dim: int) -> UnitaryMatrix:
    """Unitary transfer matrix of a component acting on d rails.

    Raises:
        NonUnitaryComponentError: For LOSS and DETECTOR components
        RailOutOfRangeError: If the component addresses a rail above d
    """
    _check_rails(component, dim)
    match component.kind:
        case ComponentKind.COUPLER:
            m, n = component.rails
            block = coupler_unitary(CouplerStep(m, n, component.theta, component.phi))
            if n < m:
                return embed(block, m, n, dim)
            # block row 0 belongs to rail n, which is the higher line here
            swap = np.array([[0, 1], [1, 0]])
            return embed(swap @ block @ swap, n, m, dim)
        case ComponentKind.PHASE:
            phases = np.ones(dim, dtype=complex)
            phases[component.rails[0] - 1] = np.exp(1j * component.phi)
            return UnitaryMatrix(np.diag(phases))
        case ComponentKind.SWAP:
            m, n = component.rails
            permutation = np.eye(dim, dtype=complex)
            permutation[[m - 1, n - 1]] = permutation[[n - 1, m - 1]]
            return UnitaryMatrix(permutation)
        case ComponentKind.SWITCH_MUX:
            return UnitaryMatrix(_routing_matrix(component.routing, dim))
        case ComponentKind.POLCTRL:
            return UnitaryMatrix(component.matrix)
        case ComponentKind.SWITCH_DEMUX | ComponentKind.DELAY | ComponentKind.PBSC:
            return UnitaryMatrix.identity(dim)
        case _:
            raise NonUnitaryComponentError(f"{component.kind} has no unitary transfer matrix")


def db_to_transmission(loss_db: float) -> float:
    return float(10 ** (-loss_db / 10))


def loss_budget(netlist: Iterable[Component]) -> LossBudget:
    """Sum insertion losses along the photon path.

    Args:
        netlist: Components in path order

    Returns:
        LossBudget with per-component losses keyed by netlist position
    """
    per_component = tuple(
        (index, float(component.insertion_loss_db))
        for index, component in enumerate(netlist)
    )
    total_db = float(sum(db for _, db in per_component))
    logger.debug(f"Loss budget over {len(per_component)} components: {total_db:.4f} dB")
    return LossBudget(per_component, total_db, db_to_transmission(total_db))


def timing_feasibility(
    bin_separation: float,
    switch_rate: float,
    group_index: float = GROUP_INDEX,
    thermal_tolerance: float = THERMAL_TOLERANCE_K,
) -> TimingSpec:
    """Check that the switches can separate bins and size the delay lines.

    Args:
        bin_separation: Delay between consecutive time bins in seconds
        switch_rate: Switching frequency in Hz
        group_index: Group index of the fiber
        thermal_tolerance: Temperature stability requirement reported as configured, in kelvin

    Returns:
        TimingSpec, feasible iff bin_separation >= 1 / switch_rate

    Raises:
        InvalidComponentError: If any input is not positive
    """
    if min(bin_separation, switch_rate, group_index) <= 0:
        raise InvalidComponentError(
            f"Timing inputs must be positive: dt={bin_separation}, rate={switch_rate}, n={group_index}"
        )
    path_difference = bin_separation * SPEED_OF_LIGHT / group_index
    # tolerate rounding in dt * rate
    feasible = bin_separation * switch_rate >= 1.0 - 1e-12
    logger.info(
        f"Timing: dt={bin_separation:.3e} s, rate={switch_rate:.3e} Hz, "
        f"path difference {path_difference:.4e} m, feasible={feasible}"
    )
    return TimingSpec(
        bin_separation=bin_separation,
        switch_rate=switch_rate,
        group_index=group_index,
        path_difference=path_difference,
        thermal_tolerance=thermal_tolerance,
        feasible=feasible,
    )
