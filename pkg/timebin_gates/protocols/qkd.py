"""Prepare-and-measure qutrit QKD with four mutually unbiased bases.

Each round Alice sends one of the twelve basis states, the channel
depolarizes it with probability p, and Bob measures in a uniformly chosen
basis with a deterministic time-bin measurement circuit. Rounds where the
bases match and a detector clicks are kept (sifted).

Depolarization is sampled rather than tracked as a density matrix: with
probability p the photon is replaced by a uniformly random time-of-arrival
state. On sifted rounds this gives an error rate of 2p/3.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..circuit_simulator import BasisMeasurement
from ..photonic_components import LossProfile, db_to_transmission
from ..qudit_core import QuditError
from .mub import mub_qutrit
from .records import ProtocolRecords
from .sampling import iter_blocks

logger = logging.getLogger(__name__)

NO_CLICK = -1
NUM_BASES = 4
DIM = 3
# probabilities below this are rounding residue of orthogonal outcomes
CLICK_FLOOR = 1e-15


@dataclass(frozen=True)
class ChannelModel:
    """Noise and loss seen by a photon between Alice's source and Bob's detectors.

    ``hardware`` sets the insertion losses of Bob's measurement circuits.
    """

    depolarizing: float = 0.0
    loss_db: float = 0.0
    efficiency: float = 1.0
    hardware: LossProfile = field(default_factory=LossProfile.lossless)

    def __post_init__(self):
        if not 0.0 <= self.depolarizing <= 1.0:
            raise QuditError(f"Depolarizing probability must lie in [0, 1], got {self.depolarizing}")
        if self.loss_db < 0:
            raise QuditError(f"Channel loss must be >= 0 dB, got {self.loss_db}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise QuditError(f"Detector efficiency must lie in [0, 1], got {self.efficiency}")


@dataclass(frozen=True)
class BasisStats:
    sifted: int
    errors: int

    @property
    def qber(self) -> float:
        return self.errors / self.sifted if self.sifted else float("nan")


@dataclass(frozen=True)
class QkdSession:
    rounds: int
    seed: int
    channel: ChannelModel
    sifted: int
    errors: int
    per_basis: dict[int, BasisStats]
    records: ProtocolRecords | None = None

    @property
    def qber(self) -> float:
        return self.errors / self.sifted if self.sifted else float("nan")

    @property
    def sift_rate(self) -> float:
        return self.sifted / self.rounds


def click_table(channel: ChannelModel) -> np.ndarray:
    """Click probabilities [bob basis, sent state, outcome] including every loss.

    Entries below CLICK_FLOOR are set to exactly 0, so a matching basis never
    samples a wrong outcome.
    """
    mubs = mub_qutrit()
    states = mubs.states()
    survival = db_to_transmission(channel.loss_db)
    table = np.empty((NUM_BASES, len(states), DIM))
    for bob_basis, basis in enumerate(mubs.bases):
        measurement = BasisMeasurement(list(basis), channel.efficiency, channel.hardware)
        for index, state in enumerate(states):
            table[bob_basis, index] = survival * measurement.click_probabilities(state)
    table[table < CLICK_FLOOR] = 0.0
    return table


def _run_block(
    size: int, rng: np.random.Generator, table: np.ndarray, depolarizing: float
) -> dict[str, np.ndarray]:
    alice_basis = rng.integers(0, NUM_BASES, size)
    alice_state = rng.integers(0, DIM, size)
    depolarized = rng.random(size) < depolarizing
    replacement = rng.integers(0, DIM, size)
    bob_basis = rng.integers(0, NUM_BASES, size)
    draw = rng.random(size)

    sent = np.where(depolarized, replacement, DIM * alice_basis + alice_state)
    cumulative = np.cumsum(table[bob_basis, sent], axis=1)
    outcome = (draw[:, None] >= cumulative).sum(axis=1)
    outcome = np.where(outcome == DIM, NO_CLICK, outcome)
    sifted = (alice_basis == bob_basis) & (outcome != NO_CLICK)
    return {
        "alice_basis": alice_basis,
        "alice_state": alice_state,
        "depolarized": depolarized,
        "bob_basis": bob_basis,
        "outcome": outcome,
        "sifted": sifted,
    }


def qkd_run(
    rounds: int, channel: ChannelModel, seed: int, keep_records: bool = False
) -> QkdSession:
    """Simulate the qutrit protocol.

    Args:
        rounds: Number of photons sent
        channel: Depolarization, loss and detector model
        seed: Master seed; block b uses default_rng([seed, b])
        keep_records: Keep per-round records (needed for CSV dumps)

    Returns:
        QkdSession with QBER and sift rate over sifted, clicked rounds

    Raises:
        QuditError: If rounds < 1
    """
    if rounds < 1:
        raise QuditError(f"Need at least one round, got {rounds}")
    table = click_table(channel)

    sifted = 0
    errors = 0
    basis_sifted = np.zeros(NUM_BASES, dtype=np.int64)
    basis_errors = np.zeros(NUM_BASES, dtype=np.int64)
    blocks = []
    for size, rng in iter_blocks(rounds, seed):
        block = _run_block(size, rng, table, channel.depolarizing)
        wrong = block["sifted"] & (block["outcome"] != block["alice_state"])
        sifted += int(block["sifted"].sum())
        errors += int(wrong.sum())
        basis_sifted += np.bincount(block["bob_basis"][block["sifted"]], minlength=NUM_BASES)
        basis_errors += np.bincount(block["bob_basis"][wrong], minlength=NUM_BASES)
        if keep_records:
            blocks.append(block)

    if sifted == 0:
        logger.warning(f"No sifted rounds out of {rounds}; QBER is undefined")
    per_basis = {
        basis: BasisStats(int(basis_sifted[basis]), int(basis_errors[basis]))
        for basis in range(NUM_BASES)
    }
    records = ProtocolRecords.concatenate(blocks) if keep_records else None
    session = QkdSession(rounds, seed, channel, sifted, errors, per_basis, records)
    logger.info(
        f"QKD run: {rounds} rounds, {sifted} sifted, QBER={session.qber:.6f}, "
        f"sift rate={session.sift_rate:.6f}"
    )
    return session
