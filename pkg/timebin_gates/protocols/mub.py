"""The four mutually unbiased qutrit bases used by the QKD protocol."""

import logging
from dataclasses import dataclass

import numpy as np

from ..qudit_core import QuditError, QuditState, basis_state, inner_product, make_state

logger = logging.getLogger(__name__)

MUB_TOLERANCE = 1e-12
OMEGA = np.exp(2j * np.pi / 3)


@dataclass(frozen=True)
class MubSet:
    bases: tuple[tuple[QuditState, ...], ...]

    @property
    def dim(self) -> int:
        return self.bases[0][0].dim

    def states(self) -> list[QuditState]:
        """All states, basis-major: index = 3 * basis + state."""
        return [state for basis in self.bases for state in basis]

    def deviations(self) -> tuple[float, float]:
        """Largest orthonormality error within bases and largest unbiasedness error across bases."""
        within, across = 0.0, 0.0
        target = 1.0 / self.dim
        for i, basis_i in enumerate(self.bases):
            for j, basis_j in enumerate(self.bases):
                for p, psi in enumerate(basis_i):
                    for q, chi in enumerate(basis_j):
                        overlap = inner_product(psi, chi)
                        if i == j:
                            within = max(within, abs(overlap - (1.0 if p == q else 0.0)))
                        else:
                            across = max(across, abs(abs(overlap) ** 2 - target))
        return within, across


def _cyclic_shifts(coefficients: np.ndarray) -> tuple[QuditState, ...]:
    # forward rotation a -> b -> c -> a of the coefficient vector
    return tuple(make_state(np.roll(coefficients, shift)) for shift in range(3))


def mub_qutrit() -> MubSet:
    """Build the four qutrit bases.

    Basis 0 is the time-of-arrival basis {|a>, |b>, |c>}, basis 1 the Fourier
    basis {|a'>, |b'>, |c'>}, bases 2 and 3 the cyclic shifts of
    (w|a> + |b> + |c>)/sqrt(3) and (w*|a> + |b> + |c>)/sqrt(3), w = e^{2 pi i/3}.

    Raises:
        QuditError: If the constructed set violates orthonormality or unbiasedness
    """
    w = OMEGA
    computational = tuple(basis_state(3, k) for k in range(3))
    fourier = (
        make_state([1, 1, 1]),
        make_state([1, w, w.conjugate()]),
        make_state([1, w.conjugate(), w]),
    )
    third = _cyclic_shifts(np.array([w, 1, 1]))
    fourth = _cyclic_shifts(np.array([w.conjugate(), 1, 1]))
    mubs = MubSet((computational, fourier, third, fourth))

    within, across = mubs.deviations()
    if within > MUB_TOLERANCE or across > MUB_TOLERANCE:
        raise QuditError(
            f"Qutrit bases are not mutually unbiased: within={within:.2e}, across={across:.2e}"
        )
    logger.debug(f"Qutrit MUB deviations: within={within:.2e}, across={across:.2e}")
    return mubs
