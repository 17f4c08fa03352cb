"""Qudit state vectors, unitary matrices and the numeric predicates shared by every module."""

import logging
import os
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.stats import unitary_group

logger = logging.getLogger(__name__)

UNITARY_TOLERANCE = float(os.getenv("TIMEBIN_UNITARY_TOL", "1e-10"))
NORMALIZATION_TOLERANCE = 1e-12
ZERO_NORM = 1e-12


class QuditError(Exception):
    """Base class for every validation failure raised by this package"""

    pass


class ZeroVectorError(QuditError):
    """Raised when a state vector has (numerically) zero norm"""

    pass


class DimensionMismatchError(QuditError):
    """Raised when operands have incompatible dimensions"""

    pass


class EncodingMismatchError(QuditError):
    """Raised when two states are expressed in different encodings"""

    pass


class NotNormalizedError(QuditError):
    """Raised when a state vector is not of unit norm"""

    pass


class NonFiniteError(QuditError):
    """Raised when an amplitude or matrix entry is NaN or infinite"""

    pass


class NotUnitaryError(QuditError):
    """Raised when a matrix fails the unitarity check"""

    pass


class RailOutOfRangeError(QuditError):
    """Raised when a rail index does not address a rail of the circuit"""

    pass


class Encoding(StrEnum):
    TIME_BIN = "time-bin"
    RAIL = "rail"
    POLARIZATION = "polarization"


def _as_complex_array(values, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=complex)
    if array.ndim != ndim:
        raise DimensionMismatchError(
            f"Expected a {ndim}-dimensional array, got shape {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise NonFiniteError("Amplitudes and matrix entries must be finite")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class QuditState:
    """Pure normalized state of a single photon over d time bins, rails or polarizations.

    Amplitudes are stored in bin (or rail) order: index 0 is the earliest bin
    (|short>), which is also rail 1. For the polarization encoding the order is
    (V, H), so |short> -> |V> and |long> -> |H> keep their amplitudes.
    """

    amplitudes: np.ndarray
    encoding: Encoding = Encoding.TIME_BIN
    bin_separation: float | None = None

    def __post_init__(self):
        amplitudes = _as_complex_array(self.amplitudes, ndim=1)
        if amplitudes.size < 2:
            raise DimensionMismatchError(
                f"A qudit needs at least 2 levels, got {amplitudes.size}"
            )
        norm_squared = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm_squared - 1.0) > NORMALIZATION_TOLERANCE:
            raise NotNormalizedError(
                f"State norm squared is {norm_squared!r}, expected 1 within {NORMALIZATION_TOLERANCE}"
            )
        encoding = Encoding(self.encoding)
        if encoding is Encoding.POLARIZATION and amplitudes.size != 2:
            raise DimensionMismatchError(
                f"Polarization encoding requires dimension 2, got {amplitudes.size}"
            )
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "encoding", encoding)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """d x d complex matrix checked for unitarity at construction."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _as_complex_array(self.entries, ndim=2)
        if entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(f"Matrix must be square, got {entries.shape}")
        residual = unitarity_residual(entries)
        if residual > UNITARY_TOLERANCE:
            raise NotUnitaryError(
                f"Matrix is not unitary: ||M^dagger M - I||_F = {residual:.3e} > {UNITARY_TOLERANCE:.1e}"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "UnitaryMatrix":
        return cls(np.eye(dim, dtype=complex))

    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries.conj().T)

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        if self.dim != other.dim:
            raise DimensionMismatchError(
                f"Cannot multiply {self.dim}x{self.dim} by {other.dim}x{other.dim}"
            )
        return UnitaryMatrix(self.entries @ other.entries)


def unitarity_residual(matrix) -> float:
    """Return ||M^dagger M - I||_F."""
    entries = np.asarray(matrix.entries if isinstance(matrix, UnitaryMatrix) else matrix)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise DimensionMismatchError(f"Matrix must be square, got {entries.shape}")
    identity = np.eye(entries.shape[0])
    return float(np.linalg.norm(entries.conj().T @ entries - identity))


def check_unitary(matrix, tol: float = UNITARY_TOLERANCE) -> bool:
    """Check whether a square matrix is unitary.

    Args:
        matrix: Square complex matrix (array-like or UnitaryMatrix)
        tol: Frobenius-norm tolerance on M^dagger M - I

    Returns:
        True if ||M^dagger M - I||_F <= tol
    """
    return unitarity_residual(matrix) <= tol


def make_state(
    amplitudes,
    encoding: Encoding | str = Encoding.TIME_BIN,
    bin_separation: float | None = None,
) -> QuditState:
    """Build a normalized qudit state from unnormalized amplitudes.

    Args:
        amplitudes: Complex amplitude vector of length d >= 2
        encoding: Encoding label of the state
        bin_separation: Delay between consecutive time bins in seconds (time-bin only)

    Returns:
        QuditState with the amplitudes scaled to unit norm

    Raises:
        ZeroVectorError: If the vector norm is below 1e-12
        DimensionMismatchError: If d < 2, or the polarization encoding is used with d != 2
    """
    vector = _as_complex_array(amplitudes, ndim=1)
    norm = float(np.linalg.norm(vector))
    if norm < ZERO_NORM:
        raise ZeroVectorError(f"Cannot normalize a vector of norm {norm:.3e}")
    return QuditState(vector / norm, Encoding(encoding), bin_separation)


def basis_state(
    dim: int,
    index: int,
    encoding: Encoding | str = Encoding.TIME_BIN,
    bin_separation: float | None = None,
) -> QuditState:
    """Computational basis state |index> (0-based) of a d-level system."""
    if not 0 <= index < dim:
        raise RailOutOfRangeError(f"Basis index {index} out of range for dimension {dim}")
    amplitudes = np.zeros(dim, dtype=complex)
    amplitudes[index] = 1.0
    return QuditState(amplitudes, Encoding(encoding), bin_separation)


def _check_compatible(a: QuditState, b: QuditState) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"States have dimensions {a.dim} and {b.dim}")
    if a.encoding is not b.encoding:
        raise EncodingMismatchError(
            f"States are encoded as {a.encoding} and {b.encoding}"
        )


def inner_product(a: QuditState, b: QuditState) -> complex:
    """Return <a|b> = sum_k conj(a_k) b_k."""
    _check_compatible(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: QuditState, b: QuditState) -> float:
    """Return |<a|b>|^2."""
    return abs(inner_product(a, b)) ** 2


def same_up_to_phase(a: QuditState, b: QuditState, tol: float = 1e-10) -> bool:
    return abs(1.0 - abs(inner_product(a, b))) <= tol


def apply(matrix: UnitaryMatrix, state: QuditState) -> QuditState:
    """Apply a unitary to a state, keeping its encoding and bin separation.

    Raises:
        DimensionMismatchError: If the matrix and state dimensions differ
    """
    if matrix.dim != state.dim:
        raise DimensionMismatchError(
            f"Cannot apply a {matrix.dim}x{matrix.dim} matrix to a {state.dim}-level state"
        )
    return QuditState(
        matrix.entries @ state.amplitudes, state.encoding, state.bin_separation
    )


def to_polarization(state: QuditState) -> QuditState:
    """Relabel a time-bin qubit as a polarization qubit (|short> -> |V>, |long> -> |H>)."""
    if state.dim != 2:
        raise DimensionMismatchError(
            f"Only qubits can be mapped to polarization, got dimension {state.dim}"
        )
    if state.encoding is not Encoding.TIME_BIN:
        raise EncodingMismatchError(f"Expected a time-bin qubit, got {state.encoding}")
    return QuditState(state.amplitudes, Encoding.POLARIZATION)


def from_polarization(
    state: QuditState, bin_separation: float | None = None
) -> QuditState:
    """Inverse of to_polarization: |V> -> |short>, |H> -> |long>."""
    if state.encoding is not Encoding.POLARIZATION:
        raise EncodingMismatchError(
            f"Expected a polarization qubit, got {state.encoding}"
        )
    return QuditState(state.amplitudes, Encoding.TIME_BIN, bin_separation)


def random_unitary(dim: int, rng: np.random.Generator) -> UnitaryMatrix:
    """Haar-random element of U(d)."""
    return UnitaryMatrix(unitary_group.rvs(dim, random_state=rng))


def random_state(
    dim: int, rng: np.random.Generator, encoding: Encoding | str = Encoding.TIME_BIN
) -> QuditState:
    """Haar-random pure state."""
    vector = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return make_state(vector, encoding)
