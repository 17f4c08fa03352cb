"""CHSH test on time-bin entangled pairs with deterministic basis measurements.

Each party measures its time-bin qubit with a measurement gate whose coupler
ratio and phase select the basis. Outcome 0 scores +1 and outcome 1 scores -1.
A missing click is scored +1 as well, so no round is discarded; the optional
fair-sampling mode instead keeps only rounds where both detectors click.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..circuit_simulator import BasisMeasurement, transfer_matrix
from ..photonic_components import LossProfile
from ..qudit_core import QuditError, make_state
from .records import ProtocolRecords
from .sampling import iter_blocks

logger = logging.getLogger(__name__)

NO_CLICK_VALUE = 1
CLASSICAL_BOUND = 2.0
TSIRELSON_BOUND = 2.0 * np.sqrt(2.0)
OPTIMAL_ALICE_ANGLES = (0.0, np.pi / 4)
OPTIMAL_BOB_ANGLES = (np.pi / 8, -np.pi / 8)


def entangled_pair(alpha: complex, beta: complex) -> np.ndarray:
    """Normalized alpha|short,short> + beta|long,long> over (ss, sl, ls, ll)."""
    return make_state([alpha, 0, 0, beta]).amplitudes


def maximally_entangled() -> np.ndarray:
    return entangled_pair(1, 1)


@dataclass(frozen=True, eq=False)
class ChshConfig:
    """Two-qubit state, two settings per party and the detector efficiency.

    A setting is an angle t (and optional phase f) selecting the basis
    {cos t |s> + e^{if} sin t |l>, -e^{-if} sin t |s> + cos t |l>}.
    """

    state: np.ndarray = field(default_factory=maximally_entangled)
    alice_angles: tuple[float, float] = OPTIMAL_ALICE_ANGLES
    bob_angles: tuple[float, float] = OPTIMAL_BOB_ANGLES
    efficiency: float = 1.0
    alice_phases: tuple[float, float] = (0.0, 0.0)
    bob_phases: tuple[float, float] = (0.0, 0.0)
    fair_sampling: bool = False

    def __post_init__(self):
        state = np.asarray(self.state, dtype=complex)
        if state.shape != (4,) or abs(np.linalg.norm(state) - 1.0) > 1e-12:
            raise QuditError("CHSH state must be a normalized vector over (ss, sl, ls, ll)")
        if not 0.0 <= self.efficiency <= 1.0:
            raise QuditError(f"Detector efficiency must lie in [0, 1], got {self.efficiency}")
        object.__setattr__(self, "state", state)

    def with_efficiency(self, efficiency: float) -> "ChshConfig":
        return replace(self, efficiency=efficiency)

    def swapped(self) -> "ChshConfig":
        """Exchange the two parties' settings."""
        return replace(
            self,
            alice_angles=self.bob_angles,
            bob_angles=self.alice_angles,
            alice_phases=self.bob_phases,
            bob_phases=self.alice_phases,
        )


@dataclass(frozen=True, eq=False)
class ChshResult:
    s_value: float
    stderr: float
    correlators: np.ndarray
    correlator_stderr: np.ndarray
    rounds: int
    records: ProtocolRecords | None = None


@dataclass(frozen=True)
class ThresholdResult:
    eta: float | None
    s_value: float | None
    stderr: float | None
    scan: tuple[tuple[float, float, float], ...]

    @property
    def violated(self) -> bool:
        return self.eta is not None


def local_measurement(angle: float, phase: float = 0.0) -> np.ndarray:
    """Transfer matrix of the measurement gate for one setting, rows ordered by outcome."""
    plus = make_state([np.cos(angle), np.exp(1j * phase) * np.sin(angle)])
    minus = make_state([-np.exp(-1j * phase) * np.sin(angle), np.cos(angle)])
    measurement = BasisMeasurement([plus, minus], 1.0, LossProfile.lossless())
    return transfer_matrix(measurement.circuit).entries


def joint_probabilities(config: ChshConfig) -> np.ndarray:
    """Born-rule outcome probabilities [x, y, 2*a + b] for setting pair (x, y)."""
    alice = [local_measurement(t, f) for t, f in zip(config.alice_angles, config.alice_phases)]
    bob = [local_measurement(t, f) for t, f in zip(config.bob_angles, config.bob_phases)]
    table = np.empty((2, 2, 4))
    for x in range(2):
        for y in range(2):
            amplitudes = np.kron(alice[x], bob[y]) @ config.state
            table[x, y] = np.abs(amplitudes) ** 2
    return table


def _s_from_correlators(correlators: np.ndarray) -> float:
    return float(
        abs(correlators[0, 0] + correlators[0, 1] + correlators[1, 0] - correlators[1, 1])
    )


def chsh_analytic(config: ChshConfig) -> float:
    """Exact S for the configured efficiency under the +1 no-click assignment."""
    table = joint_probabilities(config)
    signs = np.array([1, -1, -1, 1])
    alice_signs = np.array([1, 1, -1, -1])
    bob_signs = np.array([1, -1, 1, -1])
    eta = config.efficiency
    correlators = np.empty((2, 2))
    for x in range(2):
        for y in range(2):
            ideal = table[x, y] @ signs
            if config.fair_sampling:
                correlators[x, y] = ideal
                continue
            mean_a = table[x, y] @ alice_signs
            mean_b = table[x, y] @ bob_signs
            correlators[x, y] = (
                eta**2 * ideal + eta * (1 - eta) * (mean_a + mean_b) + (1 - eta) ** 2
            )
    return _s_from_correlators(correlators)


def analytic_threshold() -> float:
    """Efficiency above which the maximally entangled state violates CHSH: 2/(1+sqrt 2)."""
    return 2.0 / (1.0 + np.sqrt(2.0))


def chsh_value(
    config: ChshConfig, rounds: int, seed: int, keep_records: bool = False
) -> ChshResult:
    """Monte Carlo estimate of S = |E(a,b) + E(a,b') + E(a',b) - E(a',b')|.

    Each round picks a setting pair uniformly, samples the joint outcome from the
    measurement circuits and an independent click for each detector.

    Args:
        config: State, settings and efficiency
        rounds: Number of pair emissions
        seed: Master seed; block b uses default_rng([seed, b])
        keep_records: Keep per-round records (needed for CSV dumps)

    Returns:
        ChshResult with S, its standard error and the four correlators
    """
    if rounds < 1:
        raise QuditError(f"Need at least one round, got {rounds}")
    cumulative = np.cumsum(joint_probabilities(config), axis=2)[:, :, :3]
    counts = np.zeros((2, 2), dtype=np.int64)
    sums = np.zeros((2, 2), dtype=np.int64)
    blocks = []
    for size, rng in iter_blocks(rounds, seed):
        x = rng.integers(0, 2, size)
        y = rng.integers(0, 2, size)
        draw = rng.random(size)
        click_a = rng.random(size) < config.efficiency
        click_b = rng.random(size) < config.efficiency

        joint = (draw[:, None] >= cumulative[x, y]).sum(axis=1)
        value_a = np.where(click_a, 1 - 2 * (joint // 2), NO_CLICK_VALUE)
        value_b = np.where(click_b, 1 - 2 * (joint % 2), NO_CLICK_VALUE)
        kept = click_a & click_b if config.fair_sampling else np.ones(size, dtype=bool)
        product = value_a * value_b

        np.add.at(counts, (x[kept], y[kept]), 1)
        np.add.at(sums, (x[kept], y[kept]), product[kept])
        if keep_records:
            blocks.append(
                {
                    "alice_setting": x,
                    "bob_setting": y,
                    "alice_click": click_a,
                    "bob_click": click_b,
                    "alice_value": value_a,
                    "bob_value": value_b,
                    "kept": kept,
                }
            )

    safe_counts = np.maximum(counts, 1)
    correlators = sums / safe_counts
    correlator_stderr = np.sqrt(np.clip(1.0 - correlators**2, 0.0, None) / safe_counts)
    result = ChshResult(
        s_value=_s_from_correlators(correlators),
        stderr=float(np.sqrt((correlator_stderr**2).sum())),
        correlators=correlators,
        correlator_stderr=correlator_stderr,
        rounds=rounds,
        records=ProtocolRecords.concatenate(blocks) if keep_records else None,
    )
    logger.info(
        f"CHSH: eta={config.efficiency:.4f}, rounds={rounds}, "
        f"S={result.s_value:.6f} +/- {result.stderr:.6f}"
    )
    return result


def efficiency_grid(resolution: float, low: float | None = None, high: float = 1.0) -> np.ndarray:
    if resolution <= 0:
        raise QuditError(f"Scan resolution must be positive, got {resolution}")
    low = resolution if low is None else low
    if not 0.0 < low <= high <= 1.0:
        raise QuditError(f"Scan range must satisfy 0 < low <= high <= 1, got {low}:{high}")
    count = int(np.floor((high - low) / resolution + 1e-9)) + 1
    return np.round(low + resolution * np.arange(count), 12)


def chsh_threshold(
    config: ChshConfig,
    resolution: float,
    rounds: int,
    seed: int,
    low: float | None = None,
    high: float = 1.0,
) -> ThresholdResult:
    """Smallest efficiency on the scan grid whose estimated S exceeds 2.

    Every grid point reuses ``seed`` so the estimates share their random numbers.
    The config's own efficiency is ignored.

    Returns:
        ThresholdResult; ``eta`` is None when no grid point violates the bound
    """
    scan = []
    for eta in efficiency_grid(resolution, low, high):
        result = chsh_value(config.with_efficiency(float(eta)), rounds, seed)
        scan.append((float(eta), result.s_value, result.stderr))
        if result.s_value > CLASSICAL_BOUND:
            logger.info(f"CHSH bound first exceeded at eta={eta:.4f}")
            return ThresholdResult(float(eta), result.s_value, result.stderr, tuple(scan))
    logger.warning("No efficiency on the scan grid violates the CHSH bound")
    return ThresholdResult(None, None, None, tuple(scan))
