"""Factorization of U(d) into a triangular sequence of 2x2 couplers plus output phases.

The factor order is

    U = P . B~(2,1) ... B~(d-1,1) . B~(d,1),    B~(k,1) = B(k,1) ... B(k,k-2) . B(k,k-1)

so the first coupler acting on the photon mixes rails (d, d-1), then (d, d-2), ...,
(d, 1), then (d-1, d-2), and so on down to (2, 1).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .qudit_core import (
    DimensionMismatchError,
    NotUnitaryError,
    QuditError,
    RailOutOfRangeError,
    UnitaryMatrix,
    check_unitary,
    unitarity_residual,
)

logger = logging.getLogger(__name__)

# Below this magnitude an entry is treated as already nulled
NULL_TOLERANCE = 1e-14
REFERENCE_TOLERANCE = 1e-12


class DecompositionError(QuditError):
    """Raised when a decomposition is internally inconsistent"""

    pass


def wrap_phase(angle: float) -> float:
    """Map an angle onto (-pi, pi]."""
    return float(np.pi - (np.pi - angle) % (2 * np.pi))


@dataclass(frozen=True)
class CouplerStep:
    """One lossless coupler mixing rails m and n (1-based), preceded by a phase on rail n."""

    m: int
    n: int
    theta: float
    phi: float

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.m == self.n:
            raise RailOutOfRangeError(
                f"Coupler rails must be distinct and >= 1, got m={self.m}, n={self.n}"
            )
        if not -1e-12 <= self.theta <= np.pi / 2 + 1e-12:
            raise DecompositionError(f"Mixing angle {self.theta} outside [0, pi/2]")


@dataclass(frozen=True)
class PhaseCorrection:
    phases: tuple[float, ...]

    def __post_init__(self):
        phases = tuple(wrap_phase(float(p)) for p in self.phases)
        object.__setattr__(self, "phases", phases)

    def matrix(self) -> np.ndarray:
        return np.diag(np.exp(1j * np.array(self.phases)))


@dataclass(frozen=True)
class Decomposition:
    """Couplers in application order (first element acts first) and the final phase correction."""

    dim: int
    steps: tuple[CouplerStep, ...]
    correction: PhaseCorrection

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.correction.phases) != self.dim:
            raise DecompositionError(
                f"Phase correction has {len(self.correction.phases)} entries for dimension {self.dim}"
            )
        order = [(step.m, step.n) for step in self.steps]
        expected = expected_step_order(self.dim)
        if order != expected:
            raise DecompositionError(
                f"Coupler order {order} does not follow the triangular order {expected}"
            )


@dataclass
class VerificationReport:
    unitarity_residuals: dict[str, float]
    correction: np.ndarray
    off_diagonal_norm: float
    factorization_residual: float
    product_moduli: np.ndarray
    passed: bool = field(init=False)

    def __post_init__(self):
        unit_modulus = np.allclose(
            np.abs(np.diag(self.correction)), 1.0, rtol=0.0, atol=REFERENCE_TOLERANCE
        )
        self.passed = (
            self.factorization_residual <= REFERENCE_TOLERANCE
            and self.off_diagonal_norm <= REFERENCE_TOLERANCE
            and unit_modulus
            and all(r <= REFERENCE_TOLERANCE for r in self.unitarity_residuals.values())
        )


def expected_step_order(dim: int) -> list[tuple[int, int]]:
    return [(k, j) for k in range(dim, 1, -1) for j in range(k - 1, 0, -1)]


def coupler_count(dim: int) -> int:
    """Number of couplers produced by the triangular construction, d(d-1)/2."""
    if dim < 2:
        raise DimensionMismatchError(f"Dimension must be at least 2, got {dim}")
    return dim * (dim - 1) // 2


def quoted_coupler_count(dim: int) -> int:
    """The (d-1)(d-2)/2 bound quoted alongside the construction; it undercounts by d-1."""
    if dim < 2:
        raise DimensionMismatchError(f"Dimension must be at least 2, got {dim}")
    return (dim - 1) * (dim - 2) // 2


def coupler_unitary(step: CouplerStep) -> np.ndarray:
    """2x2 transfer matrix B(theta, phi) = R(theta) . diag(e^{i phi}, 1).

    Row/column 0 belongs to rail n, row/column 1 to rail m.
    """
    s, c = np.sin(step.theta), np.cos(step.theta)
    phase = np.exp(1j * step.phi)
    return np.array([[phase * s, c], [phase * c, -s]], dtype=complex)


def embed(block, m: int, n: int, dim: int) -> UnitaryMatrix:
    """Extend a 2x2 block to d x d acting on rails n < m only.

    Raises:
        RailOutOfRangeError: Unless 1 <= n < m <= dim
    """
    if not 1 <= n < m <= dim:
        raise RailOutOfRangeError(f"Need 1 <= n < m <= {dim}, got m={m}, n={n}")
    block = np.asarray(block.entries if isinstance(block, UnitaryMatrix) else block)
    if block.shape != (2, 2):
        raise DimensionMismatchError(f"Coupler block must be 2x2, got {block.shape}")
    full = np.eye(dim, dtype=complex)
    i, j = n - 1, m - 1
    full[i, i], full[i, j] = block[0, 0], block[0, 1]
    full[j, i], full[j, j] = block[1, 0], block[1, 1]
    return UnitaryMatrix(full)


def _nulling_step(work: np.ndarray, m: int, n: int) -> CouplerStep:
    target = work[m - 1, n - 1]
    pivot = work[m - 1, m - 1]
    if abs(target) < NULL_TOLERANCE:
        return CouplerStep(m, n, np.pi / 2, 0.0)
    theta = float(np.arctan2(abs(pivot), abs(target)))
    phi = wrap_phase(np.angle(target) - np.angle(pivot) + np.pi)
    return CouplerStep(m, n, theta, phi)


def decompose(unitary: UnitaryMatrix) -> Decomposition:
    """Factorize a unitary into d(d-1)/2 coupler steps and a diagonal phase correction.

    Args:
        unitary: Matrix to factorize

    Returns:
        Decomposition whose reconstruction equals the input within 1e-10

    Raises:
        NotUnitaryError: If the matrix fails the unitarity check
    """
    entries = np.asarray(unitary.entries if isinstance(unitary, UnitaryMatrix) else unitary)
    if not check_unitary(entries):
        raise NotUnitaryError(
            f"Cannot decompose a non-unitary matrix (residual {unitarity_residual(entries):.3e})"
        )
    dim = entries.shape[0]
    work = np.array(entries, dtype=complex)
    steps = []
    for m, n in expected_step_order(dim):
        step = _nulling_step(work, m, n)
        work = work @ embed(coupler_unitary(step), m, n, dim).entries.conj().T
        logger.debug(
            f"Nulled entry ({m},{n}): theta={step.theta:.6f} phi={step.phi:.6f} "
            f"residue={abs(work[m - 1, n - 1]):.2e}"
        )
        steps.append(step)

    off_diagonal = float(np.linalg.norm(work - np.diag(np.diag(work))))
    if off_diagonal > 1e-9:
        logger.warning(f"Residual matrix is not diagonal (off-diagonal norm {off_diagonal:.2e})")
    correction = PhaseCorrection(tuple(np.angle(np.diag(work))))
    logger.info(f"Decomposed {dim}x{dim} unitary into {len(steps)} couplers")
    return Decomposition(dim, tuple(steps), correction)


def reconstruct(decomposition: Decomposition) -> UnitaryMatrix:
    """Multiply the factors back together: P . B_K ... B_1."""
    dim = decomposition.dim
    product = np.eye(dim, dtype=complex)
    for step in decomposition.steps:
        product = embed(coupler_unitary(step), step.m, step.n, dim).entries @ product
    return UnitaryMatrix(decomposition.correction.matrix() @ product)


def reference_qutrit_unitary() -> UnitaryMatrix:
    """Qutrit basis change taking the second QKD basis onto the time-of-arrival basis."""
    w = np.exp(2j * np.pi / 3)
    return UnitaryMatrix(
        np.array([[1, 1, 1], [1, w.conjugate(), w], [1, w, w.conjugate()]]) / np.sqrt(3)
    )


def reference_coupler_matrices() -> dict[str, np.ndarray]:
    """The three printed 2x2 coupler matrices, keyed by rail pair."""
    e = np.exp
    return {
        "B32": np.array([[e(1j * np.pi / 3), 1], [e(4j * np.pi / 3), 1]]) / np.sqrt(2),
        "B31": np.array(
            [[np.sqrt(2) * e(-1j * np.pi / 3), 1], [e(-1j * np.pi / 3), -np.sqrt(2)]]
        )
        / np.sqrt(3),
        "B21": np.array([[1j, 1], [-1j, 1]]) / np.sqrt(2),
    }


def verify_reference_example() -> VerificationReport:
    """Check the printed qutrit factorization U = P . B'(2,1) . B'(3,1) . B'(3,2).

    P is not printed; it is recovered as U . (B'(2,1) B'(3,1) B'(3,2))^{-1}
    and must come out diagonal with unit-modulus entries.
    """
    unitary = reference_qutrit_unitary().entries
    blocks = reference_coupler_matrices()
    residuals = {name: unitarity_residual(block) for name, block in blocks.items()}
    residuals["U"] = unitarity_residual(unitary)

    product = (
        embed(blocks["B21"], 2, 1, 3).entries
        @ embed(blocks["B31"], 3, 1, 3).entries
        @ embed(blocks["B32"], 3, 2, 3).entries
    )
    correction = unitary @ product.conj().T
    diagonal = np.diag(np.diag(correction))
    report = VerificationReport(
        unitarity_residuals=residuals,
        correction=diagonal,
        off_diagonal_norm=float(np.linalg.norm(correction - diagonal)),
        factorization_residual=float(np.linalg.norm(unitary - diagonal @ product)),
        product_moduli=np.abs(product),
    )
    logger.info(
        f"Reference factorization residual {report.factorization_residual:.3e}, passed={report.passed}"
    )
    return report
