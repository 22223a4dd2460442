"""Two-mode Fock-space algebra on a truncated basis.

States live on the basis ``{|n, m> : n + m <= n_max}`` where ``n`` counts
photons in the first polarization mode of a :class:`PolarizationBasis` and
``m`` photons in the second.  Basis changes between polarization-mode pairs
are passive SU(2) transformations; they are computed exactly, sector by
sector in the total photon number, by binomial expansion of the transformed
creation-operator monomials.  Sector matrices are cached per basis pair.

Everything here is immutable after construction and safe to evaluate
concurrently; the rotation cache is write-once-read-many.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

TWO_PI = 2.0 * math.pi

# Amplitudes with modulus below this threshold are absent from sparse maps.
DROP_THRESHOLD = 1e-14

_NORM_TOL = 1e-8


class CutoffError(ValueError):
    """A truncated construction left more probability mass behind than allowed."""

    def __init__(self, message: str, tail_mass: float | None = None):
        super().__init__(message)
        self.tail_mass = tail_mass


class UndefinedVisibilityError(ArithmeticError):
    """Raised when every detection outcome is inconclusive (no fringe signal)."""


class ConditioningError(ArithmeticError):
    """Raised when a conditional state has zero probability."""


@dataclass(frozen=True)
class Cutoff:
    """Truncation budget: keep ``|n, m>`` with ``n + m <= n_max``.

    ``tail_tolerance`` bounds the probability mass a constructor may drop;
    constructors raise :class:`CutoffError` when they cannot meet it.
    """

    n_max: int
    tail_tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if not 0.0 < self.tail_tolerance < 1.0:
            raise ValueError("tail_tolerance must lie in (0, 1)")


@dataclass(frozen=True)
class PolarizationBasis:
    """An ordered pair of orthonormal polarization modes.

    ``kind == "hv"`` is the linear pair (H, V).  ``kind == "equatorial"`` is
    the pair ``((H + e^{i phi} V)/sqrt(2), (H - e^{i phi} V)/sqrt(2))``;
    ``phi = 0`` gives (+, -) and ``phi = pi/2`` gives (R, L).  The second
    mode of ``equatorial(phi)`` is the first mode of ``equatorial(phi + pi)``.
    """

    kind: str
    phi: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("hv", "equatorial"):
            raise ValueError(f"unknown polarization basis kind {self.kind!r}")
        if self.kind == "hv" and self.phi != 0.0:
            raise ValueError("the hv basis carries no phase parameter")
        # Canonicalize phi so that equal bases compare and hash equal; phases
        # next to a multiple of pi/4 snap onto it exactly, which keeps the
        # canonical bases and their orthogonal partners free of rounding.
        phi = self.phi % TWO_PI
        eighth = math.pi / 4.0
        snapped = round(phi / eighth)
        if abs(phi - snapped * eighth) < 1e-12:
            phi = (snapped * eighth) % TWO_PI
        object.__setattr__(self, "phi", phi)

    @classmethod
    def hv(cls) -> "PolarizationBasis":
        return cls("hv")

    @classmethod
    def equatorial(cls, phi: float) -> "PolarizationBasis":
        return cls("equatorial", phi)

    @classmethod
    def plus_minus(cls) -> "PolarizationBasis":
        return cls("equatorial", 0.0)

    @classmethod
    def right_left(cls) -> "PolarizationBasis":
        """Circular pair with first mode ``(H - iV)/sqrt(2)``.

        This handedness makes the three canonical measurement axes a
        right-handed Pauli triplet (cyclic commutators with positive sign);
        the opposite convention would flip the sign of every axis-2
        correlation together with its operator, leaving all reported
        quantities unchanged.
        """
        return cls("equatorial", 3.0 * math.pi / 2.0)

    @classmethod
    def canonical(cls, index: int) -> "PolarizationBasis":
        """Measurement bases by the convention 1 -> {H,V}, 2 -> {R,L}, 3 -> {+,-}."""
        if index == 1:
            return cls.hv()
        if index == 2:
            return cls.right_left()
        if index == 3:
            return cls.plus_minus()
        raise ValueError(f"canonical basis index must be 1, 2 or 3, got {index}")

    @property
    def mode_matrix(self) -> np.ndarray:
        """2x2 unitary whose rows are the mode vectors in (H, V) components."""
        if self.kind == "hv":
            return np.eye(2, dtype=complex)
        e = np.exp(1j * self.phi)
        return np.array([[1.0, e], [1.0, -e]], dtype=complex) / math.sqrt(2.0)

    @property
    def label(self) -> str:
        if self.kind == "hv":
            return "hv"
        if self.phi == 0.0:
            return "pm"
        if abs(self.phi - 3.0 * math.pi / 2.0) < 1e-9:
            return "rl"
        return f"eq({self.phi:.6g})"


class FockSpace:
    """Ordered truncated basis of two-mode Fock states.

    States are grouped by total photon number ``N = n + m`` and ordered by
    ``n`` ascending within each sector, so ``index(n, m)`` has the closed
    form ``N (N + 1) / 2 + n`` and any photon-number-conserving operator is
    block diagonal over :attr:`sector_slices`.
    """

    def __init__(self, n_max: int):
        if n_max < 0:
            raise ValueError("n_max must be non-negative")
        self.n_max = n_max
        totals = np.concatenate([np.full(t + 1, t, dtype=np.int64) for t in range(n_max + 1)])
        ns = np.concatenate([np.arange(t + 1, dtype=np.int64) for t in range(n_max + 1)])
        self.total = totals
        self.n = ns
        self.m = totals - ns
        self.dim = int(len(ns))
        self.sector_slices = [
            slice(t * (t + 1) // 2, (t + 1) * (t + 2) // 2) for t in range(n_max + 1)
        ]

    def index(self, n: int, m: int) -> int:
        total = n + m
        if n < 0 or m < 0 or total > self.n_max:
            raise ValueError(f"|{n}, {m}> is outside the cutoff {self.n_max}")
        return total * (total + 1) // 2 + n

    def __repr__(self) -> str:  # pragma: no cover
        return f"FockSpace(n_max={self.n_max}, dim={self.dim})"


@lru_cache(maxsize=None)
def fock_space(n_max: int) -> FockSpace:
    return FockSpace(n_max)


# --------------------------------------------------------------------------
# basis rotations
# --------------------------------------------------------------------------

def transfer_matrix(src: PolarizationBasis, dst: PolarizationBasis) -> np.ndarray:
    """2x2 matrix T with ``a_src_i^dag = sum_j T[i, j] a_dst_j^dag``."""
    return src.mode_matrix @ dst.mode_matrix.conj().T


def _sector_matrix(total: int, transfer: np.ndarray) -> np.ndarray:
    """Exact rotation block on the sector of ``total`` photons.

    ``R[p, n]`` is the amplitude ``<p, total - p|n, total - n>`` between
    destination and source basis states, obtained by expanding
    ``(b1^dag)^n (b2^dag)^m |vac>`` in destination-mode creation operators.
    """
    t00, t01 = transfer[0]
    t10, t11 = transfer[1]
    size = total + 1
    mods = np.abs(transfer)

    # Pure mode permutation or pure per-mode phase: exact closed forms.
    off_diag = mods[0, 0] < 1e-15 and mods[1, 1] < 1e-15
    diag = mods[0, 1] < 1e-15 and mods[1, 0] < 1e-15
    ns = np.arange(size)
    ms = total - ns
    if diag:
        return np.diag(t00 ** ns * t11 ** ms)
    if off_diag:
        r = np.zeros((size, size), dtype=complex)
        r[total - ns, ns] = t01 ** ns * t10 ** ms
        return r

    logf = np.array([math.lgamma(k + 1) for k in range(size)])
    r = np.empty((size, size), dtype=complex)
    for n in range(size):
        m = total - n
        # Coefficient polynomial of (t00 z + t01)^n (t10 z + t11)^m in z.
        a = np.array([math.comb(n, k) for k in range(n + 1)], dtype=complex)
        a *= t00 ** np.arange(n + 1) * t01 ** (n - np.arange(n + 1))
        b = np.array([math.comb(m, k) for k in range(m + 1)], dtype=complex)
        b *= t10 ** np.arange(m + 1) * t11 ** (m - np.arange(m + 1))
        conv = np.convolve(a, b)  # length total + 1, index p
        pref = np.exp(0.5 * (logf + logf[::-1] - logf[n] - logf[m]))
        r[:, n] = conv * pref
    return r


@lru_cache(maxsize=128)
def _sector_rotations(
    n_max: int, src: PolarizationBasis, dst: PolarizationBasis
) -> tuple[np.ndarray, ...]:
    transfer = transfer_matrix(src, dst)
    blocks = tuple(_sector_matrix(total, transfer) for total in range(n_max + 1))
    for block in blocks:
        block.setflags(write=False)
    return blocks


def rotate_dense(
    space: FockSpace,
    array: np.ndarray,
    src: PolarizationBasis,
    dst: PolarizationBasis,
    axis: int = -1,
) -> np.ndarray:
    """Apply the src -> dst rotation along one Fock axis of a dense array."""
    if src == dst:
        return array
    blocks = _sector_rotations(space.n_max, src, dst)
    moved = np.moveaxis(np.asarray(array, dtype=complex), axis, -1)
    out = np.empty_like(moved)
    for total, sl in enumerate(space.sector_slices):
        out[..., sl] = moved[..., sl] @ blocks[total].T
    return np.moveaxis(out, -1, axis)


# --------------------------------------------------------------------------
# state containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoModeVector:
    """Sparse two-mode state vector: map ``(n, m) -> amplitude``.

    The squared-amplitude sum may fall below one (truncated states); it must
    never exceed one beyond numerical tolerance.  Amplitudes below
    :data:`DROP_THRESHOLD` are absent from the map.
    """

    amplitudes: Mapping[tuple[int, int], complex]
    cutoff: int
    basis: PolarizationBasis

    def __post_init__(self) -> None:
        total = 0.0
        for (n, m), amp in self.amplitudes.items():
            if n < 0 or m < 0 or n + m > self.cutoff:
                raise ValueError(f"index ({n}, {m}) outside cutoff {self.cutoff}")
            total += abs(amp) ** 2
        if total > 1.0 + _NORM_TOL:
            raise ValueError(f"squared-amplitude sum {total} exceeds 1")

    @classmethod
    def from_dense(
        cls,
        vec: np.ndarray,
        cutoff: int,
        basis: PolarizationBasis,
        drop_threshold: float = DROP_THRESHOLD,
    ) -> "TwoModeVector":
        space = fock_space(cutoff)
        amps = {
            (int(space.n[i]), int(space.m[i])): complex(vec[i])
            for i in np.flatnonzero(np.abs(vec) > drop_threshold)
        }
        return cls(amps, cutoff, basis)

    def dense(self, space: FockSpace | None = None) -> np.ndarray:
        space = space or fock_space(self.cutoff)
        if space.n_max < self.cutoff:
            raise ValueError("target space smaller than the state's cutoff")
        out = np.zeros(space.dim, dtype=complex)
        for (n, m), amp in self.amplitudes.items():
            out[space.index(n, m)] = amp
        return out

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self) -> "TwoModeVector":
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self.scaled(1.0 / norm)

    def scaled(self, factor: complex) -> "TwoModeVector":
        return TwoModeVector(
            {k: factor * v for k, v in self.amplitudes.items()}, self.cutoff, self.basis
        )

    def overlap(self, other: "TwoModeVector") -> complex:
        """Inner product ``<self|other>``; both states must share a basis."""
        if self.basis != other.basis:
            raise ValueError("overlap requires a common basis")
        small, big = self.amplitudes, other.amplitudes
        if len(big) < len(small):
            return complex(np.conj(other.overlap(self)))
        return sum(np.conj(v) * big.get(k, 0.0) for k, v in small.items())

    def mean_total_photons(self) -> float:
        return sum((n + m) * abs(a) ** 2 for (n, m), a in self.amplitudes.items())


def rotate_basis(state: TwoModeVector, target: PolarizationBasis) -> TwoModeVector:
    """Re-express a state in another polarization-mode pair.

    The transformation is passive, so the total-photon-number distribution is
    preserved exactly and the rotation never overflows the cutoff.
    """
    if not isinstance(target, PolarizationBasis):
        raise ValueError(f"unknown target basis {target!r}")
    if target == state.basis:
        return state
    space = fock_space(state.cutoff)
    out = rotate_dense(space, state.dense(space), state.basis, target)
    return TwoModeVector.from_dense(out, state.cutoff, target)


def photon_distribution(
    state: TwoModeVector, basis: PolarizationBasis
) -> dict[tuple[int, int], float]:
    """Photon-number distribution of ``state`` measured in ``basis``."""
    rotated = rotate_basis(state, basis)
    return {k: abs(v) ** 2 for k, v in rotated.amplitudes.items()}


@dataclass
class DensityOperator:
    """Hermitian trace-normalized operator over (micro qubit) x Fock space.

    ``micro_dim == 1`` is a plain two-mode operator; ``micro_dim == 2``
    prepends a polarization qubit whose two levels are the modes of
    :attr:`basis`.  The joint index is ``s * fock_dim + f`` (micro major).
    """

    matrix: np.ndarray
    cutoff: int
    basis: PolarizationBasis
    micro_dim: int = 1

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        expected = self.micro_dim * fock_space(self.cutoff).dim
        if self.matrix.shape != (expected, expected):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match dimension {expected}"
            )

    @property
    def fock_dim(self) -> int:
        return fock_space(self.cutoff).dim

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2.0)[0])

    def normalized(self) -> "DensityOperator":
        tr = np.trace(self.matrix)
        if abs(tr) == 0.0:
            raise ValueError("cannot normalize a traceless operator")
        return DensityOperator(self.matrix / tr, self.cutoff, self.basis, self.micro_dim)

    def validate(self, tol: float = 1e-9) -> None:
        if self.hermiticity_defect() > tol:
            raise ValueError("operator is not Hermitian within tolerance")
        if abs(self.trace() - 1.0) > tol:
            raise ValueError("operator is not trace one within tolerance")
        if self.min_eigenvalue() < -tol:
            raise ValueError("operator has a negative eigenvalue beyond tolerance")

    @classmethod
    def from_pure(cls, state: TwoModeVector) -> "DensityOperator":
        vec = state.dense()
        return cls(np.outer(vec, vec.conj()), state.cutoff, state.basis)

    def rotated(self, target: PolarizationBasis) -> "DensityOperator":
        if target == self.basis:
            return self
        space = fock_space(self.cutoff)
        d = space.dim
        mat = self.matrix.reshape(self.micro_dim, d, self.micro_dim, d)
        mat = rotate_dense(space, mat, self.basis, target, axis=1)
        mat = rotate_dense(space, mat.conj(), self.basis, target, axis=3).conj()
        if self.micro_dim == 2:
            # Micro components transform with T^t where T is the transfer matrix.
            t = transfer_matrix(self.basis, target)
            mat = np.einsum("sp,setf,tq->peqf", t, mat, t.conj())
            mat = np.ascontiguousarray(mat)
        return DensityOperator(
            mat.reshape(self.dim, self.dim), self.cutoff, target, self.micro_dim
        )


def expectation(rho: DensityOperator, op: np.ndarray) -> float | complex:
    """``Tr(rho op)``; returns a real number when the imaginary part is negligible."""
    op = np.asarray(op)
    if op.shape != rho.matrix.shape:
        raise ValueError(f"operator shape {op.shape} does not match state {rho.matrix.shape}")
    value = complex(np.einsum("ij,ji->", rho.matrix, op))
    scale = max(1.0, abs(value))
    if abs(value.imag) < 1e-10 * scale:
        return float(value.real)
    return value
