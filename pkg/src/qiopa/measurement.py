"""Measurement operators for the amplified two-mode field.

Four measurement families are implemented:

* pseudo-Pauli dichotomic operators, the amplifier images of the qubit Pauli
  operators, which act as rank-two projector differences onto the two
  amplified seeds of a basis;
* the threshold filter POVM assigning +1 / -1 when the photon-number
  imbalance between the two modes of a basis exceeds a threshold ``k`` and an
  inconclusive 0 otherwise;
* a multi-detector coincidence scheme with non-number-resolving clicks;
* quantum Stokes operators (per-basis photon-number differences) and the
  total photon number.

The measurement-basis convention is 1 -> {H,V}, 2 -> {R,L}, 3 -> {+,-}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .amplifier import (
    GainParams,
    MicroMacroState,
    _hv_macro_vector_unchecked,
    _macro_vector_unchecked,
    macro_qubit,
    required_cutoff,
)
from .channels import LossParams
from .fock import (
    Cutoff,
    DensityOperator,
    PolarizationBasis,
    TwoModeVector,
    UndefinedVisibilityError,
    fock_space,
    rotate_dense,
    transfer_matrix,
)


def pauli_matrix(axis: int, basis: PolarizationBasis | None = None) -> np.ndarray:
    """Qubit Pauli operator of a canonical measurement axis, written in the
    coordinates of ``basis`` (H/V by default)."""
    rep = basis or PolarizationBasis.hv()
    t = transfer_matrix(PolarizationBasis.canonical(axis), rep)
    return np.outer(t[0], t[0].conj()) - np.outer(t[1], t[1].conj())


# --------------------------------------------------------------------------
# pseudo-Pauli operators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PseudoPauliOperator:
    """Amplifier image of a Pauli operator: ``|A+><A+| - |A-><A-|`` where
    ``A+-`` are the normalized truncated amplified seeds of the measurement
    axis.  Eigenvalues are exactly +1, -1 and 0 on the truncated space."""

    axis: int
    gain: GainParams
    cutoff: int
    basis: PolarizationBasis
    plus_vector: np.ndarray
    minus_vector: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.outer(self.plus_vector, self.plus_vector.conj()) - np.outer(
            self.minus_vector, self.minus_vector.conj()
        )

    def expectation(self, fock_matrix: np.ndarray) -> float:
        u, w = self.plus_vector, self.minus_vector
        return float(
            (u.conj() @ fock_matrix @ u - w.conj() @ fock_matrix @ w).real
        )


def _axis_seed_vectors(
    axis: int, gain: GainParams, n_max: int
) -> tuple[TwoModeVector, TwoModeVector]:
    if axis == 1:
        return (
            _hv_macro_vector_unchecked("H", gain, n_max),
            _hv_macro_vector_unchecked("V", gain, n_max),
        )
    if axis in (2, 3):
        phi = PolarizationBasis.canonical(axis).phi
        return (
            _macro_vector_unchecked(phi, gain, n_max),
            _macro_vector_unchecked(phi + math.pi, gain, n_max),
        )
    raise ValueError(f"measurement axis must be 1, 2 or 3, got {axis}")


@lru_cache(maxsize=64)
def _sigma_operator_cached(
    axis: int, g: float, n_max: int, basis: PolarizationBasis
) -> PseudoPauliOperator:
    gain = GainParams(g)
    space = fock_space(n_max)
    plus, minus = _axis_seed_vectors(axis, gain, n_max)
    vectors = []
    for vec in (plus, minus):
        dense = vec.normalized().dense(space)
        dense = rotate_dense(space, dense, vec.basis, basis)
        dense.setflags(write=False)
        vectors.append(dense)
    return PseudoPauliOperator(axis, gain, n_max, basis, vectors[0], vectors[1])


def sigma_operator(
    axis: int,
    gain: GainParams,
    cutoff: int | Cutoff,
    basis: PolarizationBasis | None = None,
) -> PseudoPauliOperator:
    """Pseudo-Pauli operator of a measurement axis at the given gain.

    At ``g = 0`` it reduces to the plain Pauli operator on the one-photon
    subspace.  ``basis`` selects the representation; the operator's own
    measurement basis is used when omitted.
    """
    n_max = cutoff.n_max if isinstance(cutoff, Cutoff) else int(cutoff)
    rep = basis or PolarizationBasis.canonical(axis)
    return _sigma_operator_cached(axis, gain.g, n_max, rep)


# --------------------------------------------------------------------------
# threshold filter POVM
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdPOVM:
    """Three-outcome photon-imbalance filter in a polarization basis.

    Outcome +1 on ``n - m > k``, -1 on ``m - n > k``, inconclusive 0 on
    ``|n - m| <= k`` (ties at ``|n - m| = k`` are inconclusive, which keeps
    the three effects an exact resolution of the identity).
    """

    basis: PolarizationBasis
    k: int
    cutoff: int
    signs: np.ndarray

    def effects(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Diagonal vectors of the +1, -1 and 0 effects, in basis order."""
        plus = (self.signs > 0).astype(float)
        minus = (self.signs < 0).astype(float)
        return plus, minus, 1.0 - plus - minus

    def difference_diagonal(self) -> np.ndarray:
        """Diagonal of the dichotomic combination ``E+ - E-``."""
        return self.signs.astype(float)


def threshold_povm(basis: PolarizationBasis, k: int, cutoff: int) -> ThresholdPOVM:
    if k < 0:
        raise ValueError(f"threshold must be non-negative, got {k}")
    space = fock_space(cutoff)
    diff = space.n - space.m
    signs = np.where(diff > k, 1, np.where(-diff > k, -1, 0)).astype(np.int8)
    signs.setflags(write=False)
    return ThresholdPOVM(basis, k, cutoff, signs)


def _fock_populations(
    state: TwoModeVector | DensityOperator, basis: PolarizationBasis
) -> np.ndarray:
    """Diagonal of a state in the photon-number basis of ``basis``, with the
    micro factor (if any) traced out.  Computed sector by sector."""
    if isinstance(state, TwoModeVector):
        space = fock_space(state.cutoff)
        dense = rotate_dense(space, state.dense(space), state.basis, basis)
        return np.abs(dense) ** 2
    space = fock_space(state.cutoff)
    d = space.dim
    md = state.micro_dim
    mat = state.matrix.reshape(md, d, md, d)
    from .fock import _sector_rotations

    pops = np.zeros(d)
    if basis == state.basis:
        for s in range(md):
            pops += mat[s, :, s, :].diagonal().real
        return pops
    blocks = _sector_rotations(space.n_max, state.basis, basis)
    for total, sl in enumerate(space.sector_slices):
        r = blocks[total]
        for s in range(md):
            pops[sl] += np.einsum(
                "pn,nm,pm->p", r, mat[s, sl, s, sl], r.conj()
            ).real
    return pops


def ofilter_probabilities(
    state: TwoModeVector | DensityOperator, basis: PolarizationBasis, k: int
) -> tuple[float, float, float]:
    """Outcome probabilities (+1, -1, 0) of the threshold filter.

    The state is re-expressed in the measurement basis internally; the three
    probabilities sum to the state's trace.
    """
    cutoff = state.cutoff
    povm = threshold_povm(basis, k, cutoff)
    pops = _fock_populations(state, basis)
    p_plus = float(pops[povm.signs > 0].sum())
    p_minus = float(pops[povm.signs < 0].sum())
    p_zero = float(pops[povm.signs == 0].sum())
    return p_plus, p_minus, p_zero


# --------------------------------------------------------------------------
# visibility of the macro fringe under loss
# --------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _binomial_thinning_kernel(n_max: int, eta: float) -> np.ndarray:
    """Column-stochastic matrix ``K[a, n] = C(n, a) eta^a (1-eta)^(n-a)``."""
    size = n_max + 1
    log_fact = np.array([math.lgamma(k + 1) for k in range(size)])
    kernel = np.zeros((size, size))
    for n in range(size):
        a = np.arange(n + 1)
        log_c = log_fact[n] - log_fact[a] - log_fact[n - a]
        kernel[: n + 1, n] = (
            np.exp(log_c) * np.power(eta, a) * np.power(1.0 - eta, n - a)
        )
    kernel.setflags(write=False)
    return kernel


def lossy_fringe_probabilities(
    phi: float,
    gain: GainParams,
    loss: LossParams,
    k: int,
    cutoff: Cutoff | None = None,
) -> tuple[float, float, float]:
    """Threshold-filter outcome probabilities of the lossy amplified seed.

    The macro-qubit at ``phi`` is sent through the loss channel and measured
    in its own equatorial basis.  Only Fock populations matter for these
    diagonal effects, so the channel acts as independent binomial thinning of
    the two modes, which is exact at any cutoff.
    """
    if k < 0:
        raise ValueError(f"threshold must be non-negative, got {k}")
    if cutoff is None:
        cutoff = Cutoff(required_cutoff(gain, 1e-10), 1e-9)
    state = macro_qubit(phi, gain, cutoff).state
    n_max = cutoff.n_max
    q = np.zeros((n_max + 1, n_max + 1))
    for (n, m), amp in state.amplitudes.items():
        q[n, m] = abs(amp) ** 2
    q /= q.sum()
    kernel = _binomial_thinning_kernel(n_max, loss.eta)
    q = kernel @ q @ kernel.T
    a = np.arange(n_max + 1)
    diff = a[:, None] - a[None, :]
    p_plus = float(q[diff > k].sum())
    p_minus = float(q[-diff > k].sum())
    return p_plus, p_minus, max(0.0, 1.0 - p_plus - p_minus)


def visibility(
    phi: float,
    gain: GainParams,
    loss: LossParams,
    k: int,
    cutoff: Cutoff | None = None,
) -> float:
    """Fringe visibility ``(P+ - P-) / (P+ + P-)`` of the amplified seed
    after loss, measured with threshold ``k`` in its own equatorial basis.

    Raises :class:`UndefinedVisibilityError` when every outcome is
    inconclusive (for example ``eta = 0`` with ``k >= 1``).
    """
    p_plus, p_minus, _ = lossy_fringe_probabilities(phi, gain, loss, k, cutoff)
    if p_plus + p_minus <= 0.0:
        raise UndefinedVisibilityError(
            f"all outcomes inconclusive at eta={loss.eta}, k={k}"
        )
    return (p_plus - p_minus) / (p_plus + p_minus)


# --------------------------------------------------------------------------
# multi-detector coincidence scheme
# --------------------------------------------------------------------------

def all_detectors_click_probability(photons: np.ndarray, detectors: int) -> np.ndarray:
    """Probability that ``photons`` photons split evenly over ``detectors``
    non-number-resolving detectors fire all of them (surjection count by
    inclusion-exclusion)."""
    photons = np.asarray(photons)
    out = np.zeros(photons.shape, dtype=float)
    for j in range(detectors + 1):
        out += (-1.0) ** j * math.comb(detectors, j) * ((detectors - j) / detectors) ** photons
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class MultiDetectorScheme:
    """Coincidence detection with ``detectors`` non-number-resolving
    detectors per polarization branch, each branch split into equal parts.

    The outcome is +1 when every detector of the first branch fires while
    the second branch misses at least one, -1 symmetrically, and 0 otherwise
    (no full coincidence, or full coincidences on both branches at once).
    """

    detectors: int

    def __post_init__(self) -> None:
        if self.detectors < 1:
            raise ValueError("at least one detector per branch is required")

    def all_click_probability(self, photons: np.ndarray) -> np.ndarray:
        return all_detectors_click_probability(photons, self.detectors)

    def outcome_probabilities(
        self, state: TwoModeVector | DensityOperator, basis: PolarizationBasis
    ) -> tuple[float, float, float]:
        return multi_detector_probabilities(state, basis, self.detectors)


def multi_detector_probabilities(
    state: TwoModeVector | DensityOperator,
    basis: PolarizationBasis,
    detectors: int,
) -> tuple[float, float, float]:
    """Outcome probabilities of the N-fold coincidence scheme.

    Each polarization branch is split evenly over ``detectors`` detectors;
    +1 requires every detector of the first branch to click while the second
    branch misses at least one, and symmetrically for -1.  Simultaneous full
    coincidences on both branches are inconclusive.
    """
    if detectors < 1:
        raise ValueError("at least one detector per branch is required")
    space = fock_space(state.cutoff)
    pops = _fock_populations(state, basis)
    s_n = all_detectors_click_probability(space.n, detectors)
    s_m = all_detectors_click_probability(space.m, detectors)
    p_plus = float(np.sum(pops * s_n * (1.0 - s_m)))
    p_minus = float(np.sum(pops * s_m * (1.0 - s_n)))
    total = float(pops.sum())
    return p_plus, p_minus, total - p_plus - p_minus


# --------------------------------------------------------------------------
# quantum Stokes operators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StokesOperators:
    """Photon-number-difference operators of the three canonical bases plus
    the total photon number, stored as blocks over total-photon sectors."""

    cutoff: int
    basis: PolarizationBasis
    blocks: tuple[tuple[np.ndarray, ...], ...]
    number_diagonal: np.ndarray

    def dense(self, axis: int) -> np.ndarray:
        space = fock_space(self.cutoff)
        out = np.zeros((space.dim, space.dim), dtype=complex)
        for total, sl in enumerate(space.sector_slices):
            out[sl, sl] = self.blocks[axis - 1][total]
        return out


@lru_cache(maxsize=16)
def stokes_operators(
    cutoff: int, basis: PolarizationBasis = PolarizationBasis.hv()
) -> StokesOperators:
    space = fock_space(cutoff)
    from .fock import _sector_rotations

    all_blocks = []
    for axis in (1, 2, 3):
        rot = _sector_rotations(cutoff, basis, PolarizationBasis.canonical(axis))
        blocks = []
        for total, sl in enumerate(space.sector_slices):
            diff = (space.n[sl] - space.m[sl]).astype(float)
            r = rot[total]
            block = r.conj().T @ (diff[:, None] * r)
            block.setflags(write=False)
            blocks.append(block)
        all_blocks.append(tuple(blocks))
    number_diag = space.total.astype(float)
    number_diag.setflags(write=False)
    return StokesOperators(cutoff, basis, tuple(all_blocks), number_diag)


def _stokes_terms_pure(joint: MicroMacroState) -> tuple[np.ndarray, float]:
    """Per-axis ``<sigma_i x J_i>`` and ``<N>`` of a pure joint state."""
    space = fock_space(joint.cutoff)
    ops = stokes_operators(joint.cutoff, joint.basis)
    vec = joint.dense(space)
    terms = np.zeros(3)
    for axis in (1, 2, 3):
        sig = pauli_matrix(axis, joint.basis)
        total = 0.0j
        for t, sl in enumerate(space.sector_slices):
            sub = vec[:, sl]
            total += np.einsum("se,st,ef,tf->", sub.conj(), sig, ops.blocks[axis - 1][t], sub)
        terms[axis - 1] = total.real
    mean_n = float(np.einsum("se,e,se->", vec.conj(), ops.number_diagonal, vec).real)
    return terms, mean_n


def stokes_terms(
    joint: DensityOperator | MicroMacroState,
) -> tuple[np.ndarray, float]:
    """Per-axis correlations ``<sigma_i x J_i>`` and the mean photon number
    ``<N>`` of the macro arm, for a pure or mixed joint state."""
    if isinstance(joint, MicroMacroState):
        return _stokes_terms_pure(joint)
    if joint.micro_dim != 2:
        raise ValueError("Stokes correlations require a joint micro-macro state")
    space = fock_space(joint.cutoff)
    ops = stokes_operators(joint.cutoff, joint.basis)
    d = space.dim
    mat = joint.matrix.reshape(2, d, 2, d)
    terms = np.zeros(3)
    for axis in (1, 2, 3):
        sig = pauli_matrix(axis, joint.basis)
        x = np.zeros((2, 2), dtype=complex)
        for t, sl in enumerate(space.sector_slices):
            x += np.einsum("nm,smtn->st", ops.blocks[axis - 1][t], mat[:, sl, :, sl])
        terms[axis - 1] = float(np.trace(x @ sig).real)
    mean_n = 0.0
    for s in range(2):
        mean_n += float((mat[s, :, s, :].diagonal().real * ops.number_diagonal).sum())
    return terms, mean_n


def stokes_correlation(joint: DensityOperator | MicroMacroState) -> float:
    """The spin-criterion combination ``|<sigma . J>| - <N>`` on arm B.

    Non-positive for every separable state; equals ``2 eta`` for the
    amplified singlet after loss ``eta`` on the macro arm.
    """
    terms, mean_n = stokes_terms(joint)
    return float(abs(terms.sum()) - mean_n)


def stokes_correlation_lossy(joint: MicroMacroState, loss: LossParams) -> float:
    """``|<sigma . J>| - <N>`` after loss on the macro arm of a pure state.

    Equal-transmittivity loss rescales every photon-number-linear observable
    by ``eta`` exactly (the channel adjoint maps ``J -> eta J`` and
    ``N -> eta N`` at any cutoff), so the lossy value is ``eta`` times the
    lossless one; the identity is verified against the explicit Kraus sum in
    the test suite.
    """
    terms, mean_n = _stokes_terms_pure(joint)
    return float(loss.eta * (abs(terms.sum()) - mean_n))
