"""Entanglement tests for the micro-macro system.

All three-term criteria are reported as the absolute-value combination
``S = sum_i |<sigma_i x D_i>|`` so that the two-photon singlet scores 3 under
each of them; ``S > 1`` certifies entanglement for the qubit-qubit and
pseudo-Pauli criteria, while the threshold-filter variant exceeds 1 even for
a class of separable states and is only a witness under a supplementary
assumption on the source.  The assumption-free bound for dichotomic
measurements is ``sqrt(3)``, attained by Bloch vectors along the main
diagonals; the spin (Stokes) criterion bounds separable states at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .amplifier import GainParams, MicroMacroState
from .channels import LossParams, loss_kraus_images
from .fock import (
    DensityOperator,
    PolarizationBasis,
    TwoModeVector,
    fock_space,
    rotate_basis,
    rotate_dense,
    transfer_matrix,
)
from .measurement import (
    PseudoPauliOperator,
    pauli_matrix,
    sigma_operator,
    stokes_terms,
    threshold_povm,
)

SEPARABLE_BOUND = 1.0
DICHOTOMIC_BOUND = math.sqrt(3.0)

_PAULI_HV = tuple(pauli_matrix(axis) for axis in (1, 2, 3))


@dataclass(frozen=True)
class WitnessReport:
    """Outcome of one entanglement test.

    ``value`` is the reported combination of the three signed per-basis
    ``terms`` (their absolute values summed, minus the photon number for the
    spin criterion); ``bound`` is what separable states cannot exceed.
    """

    value: float
    bound: float
    terms: tuple[float, float, float]
    criterion: str
    params: dict = field(default_factory=dict)
    note: str | None = None

    @property
    def violated(self) -> bool:
        return self.value > self.bound


@dataclass(frozen=True)
class DichotomicBound:
    """Numerically maximized dichotomic-criterion bound and its maximizer."""

    value: float
    bloch_vector: np.ndarray


@dataclass(frozen=True)
class SeparableCounterexample:
    """Phase-averaged anticorrelated product construction.

    An equal-weight mixture over ``nodes`` polarization angles of a product
    of a single equatorial photon with ``n_photons`` orthogonally polarized
    photons; separable by construction, yet it drives the threshold-filter
    criterion above 1 for suitable thresholds.
    """

    n_photons: int
    nodes: int
    state: DensityOperator


# --------------------------------------------------------------------------
# qubit-qubit criterion
# --------------------------------------------------------------------------

def micro_micro_witness(rho: np.ndarray, params: dict | None = None) -> WitnessReport:
    """Three-axis Pauli correlation test on a two-qubit state
    (basis order HH, HV, VH, VV); separable states satisfy ``S <= 1``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got {rho.shape}")
    terms = tuple(
        float(np.einsum("ij,ji->", rho, np.kron(sig, sig)).real)
        for sig in _PAULI_HV
    )
    value = sum(abs(t) for t in terms)
    return WitnessReport(value, SEPARABLE_BOUND, terms, "micro-micro", dict(params or {}))


# --------------------------------------------------------------------------
# pseudo-Pauli micro-macro criterion
# --------------------------------------------------------------------------

def _joint_term(
    rho_blocks: np.ndarray, sig: np.ndarray, op: PseudoPauliOperator
) -> float:
    """``Tr[rho (sigma x (|u><u| - |w><w|))]`` from the reshaped joint matrix."""
    u, w = op.plus_vector, op.minus_vector
    a_u = np.einsum("e,setf,f->st", u.conj(), rho_blocks, u)
    a_w = np.einsum("e,setf,f->st", w.conj(), rho_blocks, w)
    return float((np.trace(a_u @ sig) - np.trace(a_w @ sig)).real)


def micro_macro_sigma_witness(
    joint: DensityOperator | MicroMacroState,
    gain: GainParams,
    sigmas: tuple[PseudoPauliOperator, ...] | None = None,
) -> WitnessReport:
    """Pseudo-Pauli correlation test on the joint micro-macro state.

    The dichotomic operators are built at the same gain and cutoff as the
    state; prebuilt operators may be supplied but must match.  The amplified
    singlet scores 3 at unit transmittivity for any gain.
    """
    if isinstance(joint, MicroMacroState):
        rho = DensityOperator(
            joint.density_matrix(), joint.cutoff, joint.basis, micro_dim=2
        )
        return micro_macro_sigma_witness(rho, gain, sigmas)
    if joint.micro_dim != 2:
        raise ValueError("the pseudo-Pauli witness requires a joint state")
    d = joint.fock_dim
    if sigmas is None:
        sigmas = tuple(
            sigma_operator(axis, gain, joint.cutoff, basis=joint.basis)
            for axis in (1, 2, 3)
        )
    for op in sigmas:
        if op.cutoff != joint.cutoff or op.basis != joint.basis:
            raise ValueError(
                "pseudo-Pauli operators do not match the state's cutoff or basis"
            )
        if op.gain != gain:
            raise ValueError("pseudo-Pauli operators were built at a different gain")
    blocks = joint.matrix.reshape(2, d, 2, d)
    terms = tuple(
        _joint_term(blocks, pauli_matrix(op.axis, joint.basis), op) for op in sigmas
    )
    value = sum(abs(t) for t in terms)
    return WitnessReport(
        value,
        SEPARABLE_BOUND,
        terms,
        "micro-macro-sigma",
        {"g": gain.g, "cutoff": joint.cutoff},
    )


def sigma_witness_lossy(
    state: MicroMacroState, loss: LossParams
) -> WitnessReport:
    """Pseudo-Pauli test after loss on the macro arm of a pure joint state.

    Evaluates ``Tr[(I x L)(|psi><psi|) (sigma_i x Sigma_i)]`` through the
    Kraus images of the pure state, avoiding the full density matrix; agrees
    with applying :func:`~qiopa.channels.lossy_channel` and then
    :func:`micro_macro_sigma_witness`.
    """
    images = loss_kraus_images(state, loss)

    def projected_correlation(vec: np.ndarray, sig: np.ndarray) -> float:
        x = np.einsum("ksd,d->ks", images, vec.conj())
        return float(np.einsum("ks,st,kt->", x.conj(), sig, x).real)

    terms = []
    for axis in (1, 2, 3):
        op = sigma_operator(axis, state.gain, state.cutoff, basis=state.basis)
        sig = pauli_matrix(axis, state.basis)
        terms.append(
            projected_correlation(op.plus_vector, sig)
            - projected_correlation(op.minus_vector, sig)
        )
    value = sum(abs(t) for t in terms)
    return WitnessReport(
        value,
        SEPARABLE_BOUND,
        tuple(terms),
        "micro-macro-sigma",
        {"g": state.gain.g, "eta": loss.eta, "cutoff": state.cutoff},
    )


# --------------------------------------------------------------------------
# threshold-filter criterion
# --------------------------------------------------------------------------

_OFILTER_NOTE = (
    "not an entanglement witness without the coherent-amplification "
    "assumption on the source"
)


def ofilter_witness(
    joint: DensityOperator, k: int, params: dict | None = None
) -> WitnessReport:
    """Three-basis threshold-filter correlation test on a joint state.

    The nominal separable bound 1 only applies under a supplementary
    assumption on the source; phase-averaged separable product states can
    exceed it, see :func:`separable_counterexample`.
    """
    if joint.micro_dim != 2:
        raise ValueError("the threshold-filter witness requires a joint state")
    d = joint.fock_dim
    terms = []
    for axis in (1, 2, 3):
        basis = PolarizationBasis.canonical(axis)
        rotated = joint.rotated(basis)
        povm = threshold_povm(basis, k, joint.cutoff)
        diag = rotated.matrix.diagonal().real.reshape(2, d)
        term = float(np.dot(diag[0] - diag[1], povm.difference_diagonal()))
        terms.append(term)
    value = sum(abs(t) for t in terms)
    merged = {"k": k, "cutoff": joint.cutoff}
    merged.update(params or {})
    return WitnessReport(
        value, SEPARABLE_BOUND, tuple(terms), "micro-macro-ofilter", merged,
        note=_OFILTER_NOTE,
    )


def ofilter_witness_lossy(
    state: MicroMacroState, loss: LossParams, k: int
) -> WitnessReport:
    """Threshold-filter test after loss on the macro arm of a pure state."""
    space = fock_space(state.cutoff)
    images = loss_kraus_images(state, loss)
    terms = []
    for axis in (1, 2, 3):
        basis = PolarizationBasis.canonical(axis)
        povm = threshold_povm(basis, k, state.cutoff)
        rot = rotate_dense(space, images, state.basis, basis, axis=2)
        t = transfer_matrix(state.basis, basis)
        rot = np.einsum("sp,ksd->kpd", t, rot)
        weights = np.abs(rot) ** 2
        per_micro = weights @ povm.difference_diagonal()
        term = float(per_micro[:, 0].sum() - per_micro[:, 1].sum())
        terms.append(term)
    value = sum(abs(t) for t in terms)
    return WitnessReport(
        value,
        SEPARABLE_BOUND,
        tuple(terms),
        "micro-macro-ofilter",
        {"k": k, "eta": loss.eta, "g": state.gain.g, "cutoff": state.cutoff},
        note=_OFILTER_NOTE,
    )


# --------------------------------------------------------------------------
# generalized dichotomic bound
# --------------------------------------------------------------------------

def _abs_pauli_sum(theta: float, phi: float) -> float:
    return (
        abs(math.sin(theta) * math.cos(phi))
        + abs(math.sin(theta) * math.sin(phi))
        + abs(math.cos(theta))
    )


def generalized_dichotomic_bound(grid: int = 241) -> DichotomicBound:
    """Maximize ``sum_j |<psi| sigma_j |psi>|`` over pure qubit states.

    A dense Bloch-sphere grid is refined by a deterministic local search; the
    maximum is ``sqrt(3)``, attained at Bloch vectors ``(+-1, +-1, +-1) /
    sqrt(3)``.  By convexity no mixed state exceeds the pure-state maximum.
    """
    thetas = np.linspace(0.0, math.pi, grid)
    phis = np.linspace(0.0, 2.0 * math.pi, 2 * grid)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    values = (
        np.abs(np.sin(tt) * np.cos(pp))
        + np.abs(np.sin(tt) * np.sin(pp))
        + np.abs(np.cos(tt))
    )
    best = np.unravel_index(np.argmax(values), values.shape)
    x0 = np.array([thetas[best[0]], phis[best[1]]])
    result = minimize(
        lambda x: -_abs_pauli_sum(x[0], x[1]),
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000},
    )
    theta, phi = result.x
    bloch = np.array(
        [
            math.sin(theta) * math.cos(phi),
            math.sin(theta) * math.sin(phi),
            math.cos(theta),
        ]
    )
    return DichotomicBound(float(-result.fun), bloch)


# --------------------------------------------------------------------------
# separable counterexample
# --------------------------------------------------------------------------

def separable_counterexample(
    n_photons: int, nodes: int = 64
) -> SeparableCounterexample:
    """Equal-weight phase average of anticorrelated product states.

    Each node pairs a single photon at equatorial angle ``phi`` on the micro
    arm with ``n_photons`` photons polarized orthogonally on the macro arm.
    The quadrature is exact (the integrand is a trigonometric polynomial) once
    ``nodes > 2 n_photons + 2``; 64 nodes cover every ``n_photons <= 20``.
    """
    if n_photons < 1:
        raise ValueError("the macro component needs at least one photon")
    if nodes < 8:
        raise ValueError("use at least 8 quadrature nodes")
    cutoff = n_photons
    space = fock_space(cutoff)
    d = space.dim
    hv = PolarizationBasis.hv()
    mat = np.zeros((2 * d, 2 * d), dtype=complex)
    for node in range(nodes):
        phi = 2.0 * math.pi * node / nodes
        micro = np.array([1.0, np.exp(1j * phi)]) / math.sqrt(2.0)
        macro = rotate_basis(
            TwoModeVector(
                {(0, n_photons): 1.0}, cutoff, PolarizationBasis.equatorial(phi)
            ),
            hv,
        ).dense(space)
        vec = np.kron(micro, macro)
        mat += np.outer(vec, vec.conj())
    mat /= nodes
    state = DensityOperator(mat, cutoff, hv, micro_dim=2)
    return SeparableCounterexample(n_photons, nodes, state)


# --------------------------------------------------------------------------
# spin (Stokes) criterion
# --------------------------------------------------------------------------

def simon_spin_witness(
    joint: DensityOperator | MicroMacroState, params: dict | None = None
) -> WitnessReport:
    """Spin-criterion test ``|<sigma . J>| - <N>``; separable states stay at
    or below zero, the lossy amplified singlet reaches ``2 eta``."""
    terms, mean_n = stokes_terms(joint)
    value = float(abs(terms.sum()) - mean_n)
    merged = {"mean_photons_b": mean_n}
    merged.update(params or {})
    return WitnessReport(value, 0.0, tuple(float(t) for t in terms), "simon-spin", merged)


def simon_spin_witness_lossy(
    state: MicroMacroState, loss: LossParams
) -> WitnessReport:
    """Spin-criterion test after loss ``eta`` on the macro arm of a pure
    state; photon-number-linear observables rescale by ``eta`` exactly."""
    terms, mean_n = stokes_terms(state)
    value = float(loss.eta * (abs(terms.sum()) - mean_n))
    return WitnessReport(
        value,
        0.0,
        tuple(float(loss.eta * t) for t in terms),
        "simon-spin",
        {
            "g": state.gain.g,
            "eta": loss.eta,
            "cutoff": state.cutoff,
            "mean_photons_b": loss.eta * mean_n,
        },
    )
