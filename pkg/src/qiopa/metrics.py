"""Entanglement metrics for the attenuated two-qubit regime.

Concurrence follows the standard spin-flip construction; the Peres partial
transpose test is exact for 2x2 systems and one-directional (negative partial
transpose implies entanglement) for larger splits.  Closed forms are provided
for the attenuated amplifier states, including imperfect injection and the
critical injection probability, and are validated against brute-force
diagonalization of the corresponding matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .amplifier import GainParams
from .channels import (
    InjectionParams,
    LossParams,
    attenuated_state_with_injection,
    coherence_parameter,
)
from .fock import ConditioningError

_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SPIN_FLIP = np.kron(_SIGMA_Y, _SIGMA_Y)


@dataclass(frozen=True)
class ConcurrenceReport:
    """Concurrence value with the parameters that produced it.

    ``surviving_fraction`` is the ratio of the concurrence to ``eta / 2``,
    meaningful as the surviving entanglement fraction in the high-gain
    regime; it is reported, never asserted.
    """

    concurrence: float
    params: dict = field(default_factory=dict)
    surviving_fraction: float | None = None


@dataclass(frozen=True)
class PptReport:
    """Partial-transpose spectrum, negativity and the separability verdict.

    The ``separable`` flag means "positive partial transpose": exact
    separability for a 2x2 split, only a necessary condition beyond it.
    """

    eigenvalues: np.ndarray
    negativity: float
    separable: bool


def _check_two_qubit_state(rho: np.ndarray, tol: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise ValueError("density matrix is not trace one")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ValueError("density matrix has a negative eigenvalue beyond tolerance")
    return rho


def concurrence_2x2(rho: np.ndarray, params: dict | None = None, tol: float = 1e-9) -> ConcurrenceReport:
    """Two-qubit concurrence via the spin-flip eigenvalue construction.

    Eigenvalues of ``rho (sy x sy) rho* (sy x sy)`` are clipped at -1e-12
    before the square roots; the basis order is (HH, HV, VH, VV).
    """
    rho = _check_two_qubit_state(rho, tol)
    flipped = _SPIN_FLIP @ rho.conj() @ _SPIN_FLIP
    evals = np.linalg.eigvals(rho @ flipped).real
    if evals.min() < -1e-12:
        evals = np.clip(evals, 0.0, None)
    lambdas = np.sort(np.sqrt(np.clip(evals, 0.0, None)))[::-1]
    value = max(0.0, lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3])
    surviving = None
    if params and params.get("eta"):
        surviving = value / (params["eta"] / 2.0)
    return ConcurrenceReport(float(value), dict(params or {}), surviving)


def analytic_concurrence(gain: GainParams, loss: LossParams) -> float:
    """Concurrence of the attenuated amplified singlet, ``(1-t^2)/(1+3t^2)``
    with ``t = (1-eta) tanh g``; strictly positive for every finite gain and
    any nonzero transmittivity."""
    t2 = coherence_parameter(gain, loss) ** 2
    return (1.0 - t2) / (1.0 + 3.0 * t2)


def concurrence_with_injection(
    gain: GainParams, loss: LossParams, p: InjectionParams
) -> float:
    """Closed-form concurrence of the attenuated state at injection ``p``.

    With ``x = sinh^2(g) (1 - eta)`` the value is
    ``(1 - t^2)(p - (1-p) x) / (p (1 + 3 t^2) + 2 (1-p) x (1 - t^2))`` above
    the critical injection probability and zero at or below it.  The factor
    ``x`` equals ``t sinh(g) cosh(g)`` and reproduces the brute-force
    concurrence of the mixed-injection matrix exactly.
    """
    t = coherence_parameter(gain, loss)
    t2 = t * t
    x = gain.sinh_g**2 * loss.R
    numerator = (1.0 - t2) * (p.p - (1.0 - p.p) * x)
    if numerator <= 0.0:
        return 0.0
    denominator = p.p * (1.0 + 3.0 * t2) + 2.0 * (1.0 - p.p) * x * (1.0 - t2)
    return numerator / denominator


def critical_injection_probability(gain: GainParams, loss: LossParams) -> float:
    """Injection probability below which the attenuated state is separable:
    ``x / (1 + x)`` with ``x = sinh^2(g) (1 - eta)``."""
    x = gain.sinh_g**2 * loss.R
    return x / (1.0 + x)


def critical_injection_scan(
    gain: GainParams,
    loss: LossParams,
    tol: float = 1e-6,
) -> float:
    """Brute-force critical injection probability.

    Bisects the sign change of the minimal partial-transpose eigenvalue of
    the closed-form attenuated matrix over ``p``; independent of the
    analytic formula above.
    """
    def npt(p: float) -> bool:
        try:
            rho = attenuated_state_with_injection(InjectionParams(p), gain, loss)
        except ConditioningError:
            # no photon ever reaches the detector (p = 0 at zero gain)
            return False
        return not ppt_test(rho, (2, 2)).separable

    lo, hi = 0.0, 1.0
    if npt(lo):
        return 0.0
    if not npt(hi):
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if npt(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def partial_transpose(rho: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Transpose the second factor of a bipartite density matrix."""
    da, db = dims
    rho = np.asarray(rho)
    if rho.shape != (da * db, da * db):
        raise ValueError(
            f"matrix of shape {rho.shape} does not factor as {da} x {db}"
        )
    blocks = rho.reshape(da, db, da, db)
    return blocks.transpose(0, 3, 2, 1).reshape(da * db, da * db)


def ppt_test(rho: np.ndarray, dims: tuple[int, int], tol: float = 1e-9) -> PptReport:
    """Peres positive-partial-transpose test.

    Exact separability verdict for a 2x2 split; for larger local dimensions a
    negative partial transpose still certifies entanglement while positivity
    remains inconclusive.
    """
    pt = partial_transpose(rho, dims)
    evals = np.linalg.eigvalsh((pt + pt.conj().T) / 2.0)
    negativity = float(-np.sum(evals[evals < 0.0]))
    return PptReport(evals, negativity, bool(evals[0] >= -tol))
