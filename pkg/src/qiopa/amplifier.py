"""Collinear optical parametric amplifier seeded at the single-photon level.

The device amplifies any equatorial polarization seed into a multiphoton
"macro-qubit" whose expansion over two-mode Fock states carries a strict
parity signature: an odd photon count in the seeded mode and an even count
in the orthogonal one.  Seeding with H or V instead produces photon-pair
ladders on top of the seed photon.  Amplifying one photon of a polarization
singlet yields the joint micro-macro state used throughout this package.

All constructors truncate at a total photon number ``n_max`` and check the
dropped probability mass against ``Cutoff.tail_tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    Cutoff,
    CutoffError,
    FockSpace,
    PolarizationBasis,
    TwoModeVector,
    fock_space,
    rotate_basis,
    transfer_matrix,
)


@dataclass(frozen=True)
class GainParams:
    """Dimensionless nonlinear gain ``g`` (optionally ``g = chi * t``)."""

    g: float

    def __post_init__(self) -> None:
        if self.g < 0.0:
            raise ValueError(f"gain must be non-negative, got {self.g}")

    @classmethod
    def from_coupling(cls, chi: float, t: float) -> "GainParams":
        return cls(chi * t)

    @property
    def tanh_g(self) -> float:
        return math.tanh(self.g)

    @property
    def cosh_g(self) -> float:
        return math.cosh(self.g)

    @property
    def sinh_g(self) -> float:
        return math.sinh(self.g)

    @property
    def mean_photon_number(self) -> float:
        """Mean total photon number of any single-photon-seeded output."""
        return 1.0 + 4.0 * self.sinh_g**2


@dataclass(frozen=True)
class MacroQubit:
    """Amplified image of an equatorial single-photon seed."""

    injected_phase: float
    gain: GainParams
    state: TwoModeVector


@dataclass(frozen=True)
class MicroMacroState:
    """Joint pure state of an unamplified qubit A and an amplified arm B.

    ``components[s]`` is the (unnormalized) two-mode vector multiplying the
    micro basis state ``s`` of ``basis``; micro and macro labels always refer
    to the same polarization-mode pair.
    """

    components: tuple[TwoModeVector, TwoModeVector]
    gain: GainParams
    basis: PolarizationBasis

    @property
    def cutoff(self) -> int:
        return self.components[0].cutoff

    def dense(self, space: FockSpace | None = None) -> np.ndarray:
        space = space or fock_space(self.cutoff)
        return np.stack([c.dense(space) for c in self.components])

    def norm(self) -> float:
        return math.sqrt(sum(c.norm() ** 2 for c in self.components))

    def rotated(self, target: PolarizationBasis) -> "MicroMacroState":
        if target == self.basis:
            return self
        t = transfer_matrix(self.basis, target)
        rotated = [rotate_basis(c, target) for c in self.components]
        new = tuple(
            TwoModeVector.from_dense(
                t[0, p] * rotated[0].dense() + t[1, p] * rotated[1].dense(),
                self.cutoff,
                target,
            )
            for p in range(2)
        )
        return MicroMacroState(new, self.gain, target)

    def density_matrix(self) -> np.ndarray:
        vec = self.dense().reshape(-1)
        return np.outer(vec, vec.conj())


# --------------------------------------------------------------------------
# expansion coefficients
# --------------------------------------------------------------------------

def macro_qubit_amplitude(i: int, j: int, phi: float, gain: GainParams) -> complex:
    """Coefficient of ``|(2i+1) phi, (2j) phi_perp>`` in the amplified seed.

    Evaluated in the log domain so that the factorial ratio
    ``sqrt((2i+1)!(2j)!) / (i! j!)`` never overflows.  The modulus is
    independent of the seed phase ``phi``.
    """
    if i < 0 or j < 0:
        raise ValueError("indices must be non-negative")
    if gain.g == 0.0:
        return 1.0 + 0.0j if (i, j) == (0, 0) else 0.0j
    tanh_g = gain.tanh_g
    log_mod = (i + j) * math.log(tanh_g / 2.0) + 0.5 * (
        math.lgamma(2 * i + 2) + math.lgamma(2 * j + 1)
    ) - math.lgamma(i + 1) - math.lgamma(j + 1)
    sign = -1.0 if j % 2 else 1.0
    return sign * math.exp(log_mod) * np.exp(-1j * (i + j) * phi)


def seed_pair_amplitude(n: int, gain: GainParams) -> float:
    """Coefficient of the n-pair term on top of an H or V seed photon."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if gain.g == 0.0:
        return 1.0 if n == 0 else 0.0
    return gain.tanh_g**n * math.sqrt(n + 1.0) / gain.cosh_g**2


def pair_ladder_tail(n_pairs: int, gain: GainParams) -> float:
    """Probability mass of a seeded output beyond ``n_pairs`` photon pairs.

    Closed form of ``1 - sum_{n <= n_pairs} (n+1) x^n / cosh^4 g`` with
    ``x = tanh^2 g``; this is also the total-photon tail of every
    single-photon-seeded output, equatorial or linear.
    """
    if gain.g == 0.0:
        return 0.0
    x = gain.tanh_g**2
    p = n_pairs
    return x ** (p + 1) * ((p + 2) - (p + 1) * x)


def required_cutoff(gain: GainParams, tail_tolerance: float, n_cap: int = 200_001) -> int:
    """Smallest odd ``n_max`` whose truncated seeded output loses less than
    ``tail_tolerance`` of its probability mass."""
    if gain.g == 0.0:
        return 1
    for p in range(n_cap // 2):
        if pair_ladder_tail(p, gain) < tail_tolerance:
            return 2 * p + 1
    raise CutoffError(
        f"no cutoff below {n_cap} reaches tail {tail_tolerance} at g={gain.g}",
        tail_mass=pair_ladder_tail(n_cap // 2 - 1, gain),
    )


# --------------------------------------------------------------------------
# amplified states
# --------------------------------------------------------------------------

def _macro_vector_unchecked(phi: float, gain: GainParams, n_max: int) -> TwoModeVector:
    """Truncated amplified equatorial seed without the tail-tolerance gate."""
    basis = PolarizationBasis.equatorial(phi)
    inv_c2 = 1.0 / gain.cosh_g**2
    amps: dict[tuple[int, int], complex] = {}
    k_max = (n_max - 1) // 2
    for i in range(k_max + 1):
        for j in range(k_max - i + 1):
            amp = macro_qubit_amplitude(i, j, phi, gain) * inv_c2
            if abs(amp) == 0.0:
                continue
            amps[(2 * i + 1, 2 * j)] = amp
    return TwoModeVector(amps, n_max, basis)


def macro_qubit(phi: float, gain: GainParams, cutoff: Cutoff) -> MacroQubit:
    """Amplify the equatorial seed at phase ``phi``.

    The returned state is expressed in ``equatorial(phi)`` and populates only
    indices ``(2i + 1, 2j)``: odd in the seeded mode, even in the orthogonal
    mode.  Its norm falls short of one by the truncated tail, which must stay
    below ``cutoff.tail_tolerance``.
    """
    state = _macro_vector_unchecked(phi, gain, cutoff.n_max)
    tail = max(0.0, 1.0 - state.norm() ** 2)
    if tail >= cutoff.tail_tolerance:
        raise CutoffError(
            f"cutoff {cutoff.n_max} keeps tail mass {tail:.3e} at g={gain.g}, "
            f"above the allowed {cutoff.tail_tolerance:.3e}",
            tail_mass=tail,
        )
    return MacroQubit(phi, gain, state)


def _hv_macro_vector_unchecked(seed: str, gain: GainParams, n_max: int) -> TwoModeVector:
    if seed not in ("H", "V"):
        raise ValueError(f"seed must be 'H' or 'V', got {seed!r}")
    amps: dict[tuple[int, int], complex] = {}
    for n in range((n_max - 1) // 2 + 1):
        c = seed_pair_amplitude(n, gain)
        if c == 0.0:
            continue
        key = (n + 1, n) if seed == "H" else (n, n + 1)
        amps[key] = complex(c)
    return TwoModeVector(amps, n_max, PolarizationBasis.hv())


def hv_macro_state(seed: str, gain: GainParams, cutoff: Cutoff) -> TwoModeVector:
    """Amplify a linear H or V seed photon.

    The output is a ladder of photon pairs on top of the seed:
    ``sum_n c_n |n+1, n>`` for H and ``sum_n c_n |n, n+1>`` for V, with
    ``c_n`` from :func:`seed_pair_amplitude`.
    """
    state = _hv_macro_vector_unchecked(seed, gain, cutoff.n_max)
    tail = max(0.0, 1.0 - state.norm() ** 2)
    if tail >= cutoff.tail_tolerance:
        raise CutoffError(
            f"cutoff {cutoff.n_max} keeps tail mass {tail:.3e} at g={gain.g}",
            tail_mass=tail,
        )
    return state


def amplified_vacuum(gain: GainParams, cutoff: Cutoff) -> TwoModeVector:
    """Unseeded output: a two-mode squeezed vacuum ``sum_n (tanh g)^n |n, n> / cosh g``."""
    amps: dict[tuple[int, int], complex] = {}
    mass = 0.0
    inv_c = 1.0 / gain.cosh_g
    for n in range(cutoff.n_max // 2 + 1):
        c = inv_c * gain.tanh_g**n
        amps[(n, n)] = complex(c)
        mass += c * c
    tail = max(0.0, 1.0 - mass)
    if tail >= cutoff.tail_tolerance:
        raise CutoffError(
            f"cutoff {cutoff.n_max} keeps tail mass {tail:.3e} at g={gain.g}",
            tail_mass=tail,
        )
    return TwoModeVector(amps, cutoff.n_max, PolarizationBasis.hv())


def micro_macro_state(phi: float, gain: GainParams, cutoff: Cutoff) -> MicroMacroState:
    """Amplified polarization singlet, written in the equatorial basis ``phi``.

    The qubit state along mode ``phi`` multiplies the amplified orthogonal
    seed and vice versa, with a relative minus sign; at ``g = 0`` this is the
    two-photon singlet restricted to one photon on each arm.  The truncated
    vector is normalized globally, which preserves the equal weight of the
    two components exactly.
    """
    basis = PolarizationBasis.equatorial(phi)
    plus = macro_qubit(phi, gain, cutoff).state
    minus = rotate_basis(macro_qubit(phi + math.pi, gain, cutoff).state, basis)
    norm = math.sqrt(plus.norm() ** 2 + minus.norm() ** 2)
    components = (minus.scaled(1.0 / norm), plus.scaled(-1.0 / norm))
    return MicroMacroState(components, gain, basis)


def micro_macro_state_hv(gain: GainParams, cutoff: Cutoff) -> MicroMacroState:
    """The same amplified singlet built directly in the (H, V) representation.

    Agrees with :func:`micro_macro_state` at any equatorial phase up to a
    global phase; this construction avoids basis rotations entirely, which
    keeps large-cutoff pipelines cheap.
    """
    phi_v = hv_macro_state("V", gain, cutoff)
    phi_h = hv_macro_state("H", gain, cutoff)
    norm = math.sqrt(phi_v.norm() ** 2 + phi_h.norm() ** 2)
    components = (phi_v.scaled(1.0 / norm), phi_h.scaled(-1.0 / norm))
    return MicroMacroState(components, gain, PolarizationBasis.hv())


