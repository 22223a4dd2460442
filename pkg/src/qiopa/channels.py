"""Photon-loss channels and state reductions.

Loss with transmittivity ``eta`` acts independently on both polarization
modes through the Kraus family ``K_{pq}``, where ``K_{pq}`` removes ``p``
photons from the first mode and ``q`` from the second with amplitude
``sqrt(C(n,p) C(m,q)) (1-eta)^{(p+q)/2} eta^{(n+m-p-q)/2}``.  On a joint
micro-macro state the channel acts on the amplified arm only; the micro arm
is lossless.

The highly attenuated regime is the exact conditioning of the lossy state on
one surviving photon in the amplified arm, which yields a two-qubit density
matrix in the basis (HH, HV, VH, VV).  Imperfect injection mixes the singlet
seed with a vacuum seed before amplification.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .amplifier import GainParams, MicroMacroState, amplified_vacuum
from .fock import (
    ConditioningError,
    Cutoff,
    CutoffError,
    DensityOperator,
    PolarizationBasis,
    TwoModeVector,
    fock_space,
)


@dataclass(frozen=True)
class LossParams:
    """Channel transmittivity ``eta``; ``R = 1 - eta`` is the losses parameter."""

    eta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmittivity must lie in [0, 1], got {self.eta}")

    @classmethod
    def from_losses(cls, r: float) -> "LossParams":
        return cls(1.0 - r)

    @property
    def R(self) -> float:
        return 1.0 - self.eta


@dataclass(frozen=True)
class InjectionParams:
    """Probability ``p`` that the seed photon couples into the amplifier mode."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"injection probability must lie in [0, 1], got {self.p}")


def coherence_parameter(gain: GainParams, loss: LossParams) -> float:
    """The combination ``t = (1 - eta) tanh g`` controlling the attenuated state."""
    return loss.R * gain.tanh_g


def conditioning_cutoff(
    gain: GainParams, loss: LossParams, tol: float = 1e-8
) -> Cutoff:
    """Cutoff that converges the single-photon conditional state to ``tol``.

    The conditional matrix entries are power series in ``t^2`` with quadratic
    pair-index weights, so truncating at pair index ``p`` leaves a relative
    residual of order ``(p+1)(p+2) t^(2p)``; the loop below sums the heaviest
    series directly until its remaining fraction is two orders below ``tol``.
    The result also keeps the truncated state mass itself below ``tol``.
    """
    from .amplifier import required_cutoff

    x = coherence_parameter(gain, loss) ** 2
    n_max = 3
    if x > 0.0:
        full = 2.0 / (1.0 - x) ** 3
        partial = 0.0
        p = 0
        while (full - partial) / full >= 0.01 * tol:
            partial += (p + 1) * (p + 2) * x**p
            p += 1
            if p > 100_000:
                raise CutoffError(
                    f"conditional series does not converge to {tol} at t^2={x}"
                )
        n_max = 2 * p + 3
    n_max = max(n_max, required_cutoff(gain, min(tol, 1e-9)))
    return Cutoff(n_max, tol)


# --------------------------------------------------------------------------
# Kraus machinery
# --------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _loss_structure(n_max: int):
    """Static index structure of the two-mode loss Kraus family.

    Flat arrays over every (source state, Kraus operator) pair: stacked row
    index ``kraus_id * dim + destination``, source column index, square-rooted
    binomial factor, and lost / kept photon counts.  Kraus operators share the
    triangular indexing of the state space itself.
    """
    space = fock_space(n_max)
    d = space.dim
    n_arr, m_arr = space.n, space.m
    log_fact = np.array([math.lgamma(k + 1) for k in range(n_max + 1)])
    rows, cols, binsq, lost, kept = [], [], [], [], []
    for k in range(d):
        p = int(n_arr[k])
        q = int(m_arr[k])
        sel = np.flatnonzero((n_arr >= p) & (m_arr >= q))
        ns, ms = n_arr[sel], m_arr[sel]
        left = ns - p + ms - q
        dst = left * (left + 1) // 2 + (ns - p)
        log_bin = 0.5 * (
            log_fact[ns] - log_fact[p] - log_fact[ns - p]
            + log_fact[ms] - log_fact[q] - log_fact[ms - q]
        )
        rows.append(k * d + dst)
        cols.append(sel)
        binsq.append(np.exp(log_bin))
        lost.append(np.full(sel.size, p + q, dtype=np.int64))
        kept.append(left)
    return (
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(binsq),
        np.concatenate(lost).astype(float),
        np.concatenate(kept).astype(float),
        d,
    )


def _kraus_matrix(n_max: int, eta: float) -> sp.csr_matrix:
    """Stacked Kraus action: maps a vector to all ``K_{pq} |psi>`` images."""
    rows, cols, binsq, lost, kept, d = _loss_structure(n_max)
    data = binsq * np.power(1.0 - eta, 0.5 * lost) * np.power(eta, 0.5 * kept)
    return sp.csr_matrix((data, (rows, cols)), shape=(d * d, d))


def loss_kraus_images(
    state: TwoModeVector | MicroMacroState, loss: LossParams
) -> np.ndarray:
    """All Kraus images of a pure state under two-mode loss.

    Shape ``(n_kraus, dim)`` for a two-mode vector, ``(n_kraus, 2, dim)`` for
    a joint state (loss on the amplified arm only).  The lossy density
    operator is the sum over rows of their outer products.
    """
    if isinstance(state, MicroMacroState):
        space = fock_space(state.cutoff)
        kr = _kraus_matrix(space.n_max, loss.eta)
        images = kr @ state.dense(space).T  # (n_kraus * dim, 2)
        return images.reshape(space.dim, space.dim, 2).transpose(0, 2, 1)
    space = fock_space(state.cutoff)
    kr = _kraus_matrix(space.n_max, loss.eta)
    return np.asarray((kr @ state.dense(space)).reshape(space.dim, space.dim))


def lossy_channel(
    state: TwoModeVector | MicroMacroState | DensityOperator, loss: LossParams
) -> DensityOperator:
    """Apply symmetric two-mode photon loss.

    Trace preserving and completely positive; Fock populations transform by
    the binomial kernel ``P(n -> k) = C(n, k) eta^k (1 - eta)^(n - k)`` on
    each mode, and composing channels multiplies their transmittivities.
    """
    if isinstance(state, TwoModeVector):
        v = loss_kraus_images(state, loss)
        return DensityOperator(v.T @ v.conj(), state.cutoff, state.basis)
    if isinstance(state, MicroMacroState):
        v = loss_kraus_images(state, loss)
        flat = v.reshape(v.shape[0], -1)
        return DensityOperator(
            flat.T @ flat.conj(), state.cutoff, state.basis, micro_dim=2
        )
    if isinstance(state, DensityOperator):
        return _lossy_density(state, loss)
    raise TypeError(f"cannot apply a loss channel to {type(state).__name__}")


def _lossy_density(rho: DensityOperator, loss: LossParams) -> DensityOperator:
    """Kraus sum on a density operator, one monomial operator at a time."""
    space = fock_space(rho.cutoff)
    d = space.dim
    md = rho.micro_dim
    n_arr, m_arr = space.n, space.m
    log_fact = np.array([math.lgamma(k + 1) for k in range(rho.cutoff + 1)])
    src_mat = rho.matrix.reshape(md, d, md, d)
    out = np.zeros_like(src_mat)
    micro_ix = np.arange(md)
    for k in range(d):
        p = int(n_arr[k])
        q = int(m_arr[k])
        sel = np.flatnonzero((n_arr >= p) & (m_arr >= q))
        ns, ms = n_arr[sel], m_arr[sel]
        left = ns - p + ms - q
        dst = left * (left + 1) // 2 + (ns - p)
        log_bin = 0.5 * (
            log_fact[ns] - log_fact[p] - log_fact[ns - p]
            + log_fact[ms] - log_fact[q] - log_fact[ms - q]
        )
        # numpy power keeps 0^0 = 1, covering the eta = 0 and eta = 1 edges
        c = (
            np.exp(log_bin)
            * loss.R ** (0.5 * (p + q))
            * np.power(loss.eta, 0.5 * left.astype(float))
        )
        if not np.any(c):
            continue
        sub = src_mat[np.ix_(micro_ix, sel, micro_ix, sel)]
        out[np.ix_(micro_ix, dst, micro_ix, dst)] += (
            sub * c[None, :, None, None] * c[None, None, None, :]
        )
    return DensityOperator(
        out.reshape(md * d, md * d), rho.cutoff, rho.basis, rho.micro_dim
    )


# --------------------------------------------------------------------------
# single-photon conditioning (highly attenuated regime)
# --------------------------------------------------------------------------

def _conditioned_block(
    ensemble: list[tuple[float, tuple[TwoModeVector, TwoModeVector]]],
    loss: LossParams,
) -> tuple[np.ndarray, float]:
    """Unnormalized two-qubit block of an ensemble after loss, conditioned on
    exactly one photon surviving on the amplified arm.

    Each ensemble member is a pure joint state given by its two micro
    components in the (H, V) representation.  Kraus terms that leave a single
    photon are grouped by the lost photon pattern; terms within a group add
    coherently, groups add incoherently.
    """
    eta, r = loss.eta, loss.R
    sqrt_eta = math.sqrt(eta)
    rho = np.zeros((4, 4), dtype=complex)
    for weight, comps in ensemble:
        bucket: dict[tuple[int, int], np.ndarray] = defaultdict(
            lambda: np.zeros((2, 2), dtype=complex)
        )
        for s, comp in enumerate(comps):
            for (n, m), c in comp.amplitudes.items():
                if n >= 1:
                    amp = c * math.sqrt(n) * r ** (0.5 * (n - 1 + m)) * sqrt_eta
                    if amp != 0.0:
                        bucket[(n - 1, m)][s, 0] += amp
                if m >= 1:
                    amp = c * math.sqrt(m) * r ** (0.5 * (n + m - 1)) * sqrt_eta
                    if amp != 0.0:
                        bucket[(n, m - 1)][s, 1] += amp
        for block in bucket.values():
            v = block.reshape(4)
            rho += weight * np.outer(v, v.conj())
    prob = float(np.trace(rho).real)
    return rho, prob


def attenuate_to_single_photon(
    joint: MicroMacroState, loss: LossParams
) -> np.ndarray:
    """Two-qubit state of the joint system in the highly attenuated regime.

    Applies loss to the amplified arm and conditions on exactly one surviving
    photon there; the result is the normalized 4x4 matrix over
    (HH, HV, VH, VV).  Raises :class:`ConditioningError` when the
    single-photon probability vanishes (for example at ``eta = 0``).
    """
    joint_hv = joint.rotated(PolarizationBasis.hv())
    rho, prob = _conditioned_block([(1.0, joint_hv.components)], loss)
    if prob <= 0.0:
        raise ConditioningError(
            f"single-photon probability vanishes at eta={loss.eta}"
        )
    return rho / prob


# --------------------------------------------------------------------------
# imperfect injection
# --------------------------------------------------------------------------

def mixed_injection_state(p: InjectionParams, cutoff: int = 1) -> DensityOperator:
    """Pre-amplification seed: singlet with probability ``p``, otherwise a
    maximally mixed polarization qubit next to a vacuum amplifier input."""
    space = fock_space(cutoff)
    d = space.dim
    vec = np.zeros(2 * d, dtype=complex)
    vec[0 * d + space.index(0, 1)] = 1.0 / math.sqrt(2.0)
    vec[1 * d + space.index(1, 0)] = -1.0 / math.sqrt(2.0)
    mat = p.p * np.outer(vec, vec.conj())
    vac = space.index(0, 0)
    for s in range(2):
        mat[s * d + vac, s * d + vac] += (1.0 - p.p) / 2.0
    return DensityOperator(mat, cutoff, PolarizationBasis.hv(), micro_dim=2)


def attenuated_state_with_injection(
    p: InjectionParams, gain: GainParams, loss: LossParams
) -> np.ndarray:
    """Closed-form attenuated two-qubit state for injection probability ``p``.

    Weighted sum of the singlet-seeded conditional block and the diagonal
    vacuum-seeded block, normalized by its trace; ``p = 1`` recovers the
    perfectly injected attenuated state.  Basis order (HH, HV, VH, VV).
    """
    t = coherence_parameter(gain, loss)
    seeded = _seeded_conditional_matrix(t)
    a = 2.0 * p.p / (gain.cosh_g**2 * (1.0 - t * t)) if t < 1.0 else 0.0
    b = (1.0 - p.p) * gain.tanh_g * t
    mat = a * seeded + b * np.eye(4)
    trace = float(np.trace(mat).real)
    if trace <= 0.0:
        raise ConditioningError(
            "conditional state undefined: no photon ever reaches the lossy arm"
        )
    return mat / trace


def _seeded_conditional_matrix(t: float) -> np.ndarray:
    """Unnormalized singlet-seeded conditional block; its normalized form has
    diagonal ``(t^2, (1+t^2)/2, (1+t^2)/2, t^2) / (1+3t^2)`` and coherence
    ``-(1+t^2) / (2 (1+3t^2))`` between HV and VH."""
    t2 = t * t
    half = 0.5 * (1.0 + t2)
    return np.array(
        [
            [t2, 0.0, 0.0, 0.0],
            [0.0, half, -half, 0.0],
            [0.0, -half, half, 0.0],
            [0.0, 0.0, 0.0, t2],
        ],
        dtype=complex,
    )


def attenuated_injection_pipeline(
    p: InjectionParams, gain: GainParams, loss: LossParams, cutoff: Cutoff
) -> np.ndarray:
    """Numeric route to the imperfect-injection attenuated state.

    Amplifies the mixed seed as an ensemble of pure states, pushes each
    branch through the loss channel and conditions on a single surviving
    photon.  Converges to :func:`attenuated_state_with_injection` as the
    cutoff grows.
    """
    from .amplifier import micro_macro_state_hv

    singlet = micro_macro_state_hv(gain, cutoff)
    vac = amplified_vacuum(gain, cutoff).normalized()
    zero = TwoModeVector({}, cutoff.n_max, PolarizationBasis.hv())
    ensemble = [
        (p.p, singlet.components),
        ((1.0 - p.p) / 2.0, (vac, zero)),
        ((1.0 - p.p) / 2.0, (zero, vac)),
    ]
    rho, prob = _conditioned_block(ensemble, loss)
    if prob <= 0.0:
        raise ConditioningError(
            f"single-photon probability vanishes at eta={loss.eta}, p={p.p}"
        )
    return rho / prob
