"""Correlated-noise description: correlation kernels, rate matrices, jump channels.

The environment couples to every qubit through all three Pauli axes, so its
second-order statistics live on the 3L-dimensional flat channel index of
:mod:`.operators`.  Integrating the bath correlation function over time lag
produces two 3L x 3L Hermitian matrices: A (dissipative rates, positive
semidefinite) and B (coherent frequency shifts).  Diagonalizing A by a
unitary U gives the jump channels

    s_n = sum_m U[n, m] sigma_m,      xi_n >= 0,

and the non-Hermitian generator of no-jump evolution

    H_eff = (1/2) sum_{m',m} B[m', m] sigma_{m'} sigma_m
            - (i/2) sum_n xi_n s_n^dag s_n.

Spatial structure interpolates between independent noise (A diagonal) and
collective noise (A of rank one on a single axis); both extremes and the
exponentially decaying intermediate case are provided as kernel factories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SimulationError
from .operators import (
    AXIS_LABELS,
    channel_index,
    channel_qubit_axis,
    hermitian_eigensystem,
    pauli_operator,
    _check_qubit_count,
)

_HERM_TOL = 1e-10
_PSD_FLOOR = -1e-10
_RECON_TOL = 1e-9
_ROW_NORM_TOL = 1e-10
_DAMPING_TOL = 1e-9
# Channels whose rate is this far below the largest one are kept but inert,
# preserving the fixed 3L channel count and numbering.
_INERT_RATIO = 1e-12

# Per-qubit (x, y) axis block whose unit-rate eigenchannel is sqrt(2) * |0><1|,
# the lowering operator that annihilates |0>.
LOWERING_BLOCK = 0.5 * np.array(
    [[1.0, 1.0j, 0.0], [-1.0j, 1.0, 0.0], [0.0, 0.0, 0.0]], dtype=complex
)


def _frozen_array(m, dtype=complex) -> np.ndarray:
    out = np.array(m, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CorrelationKernel:
    """Factorized bath correlation: f(tau) = spatial * exp(-|tau|/tau_c).

    `spatial` is the 3L x 3L table C over flat channel indices; Hermiticity
    of the correlation function requires C to be Hermitian as a matrix.
    `tau_c` is the bath memory time (seconds), `g1` the coupling (rad/s).
    """

    num_qubits: int
    spatial: np.ndarray
    tau_c: float
    g1: float
    kind: str = "custom"

    def __post_init__(self):
        _check_qubit_count(self.num_qubits)
        dim = 3 * self.num_qubits
        spatial = np.asarray(self.spatial, dtype=complex)
        if spatial.shape != (dim, dim):
            raise DomainError(
                f"spatial table must be {dim}x{dim} for {self.num_qubits} qubits, "
                f"got {spatial.shape}"
            )
        if not np.all(np.isfinite(spatial.view(float))):
            raise DomainError("spatial table contains non-finite entries")
        herm = np.max(np.abs(spatial - spatial.conj().T))
        if herm > _HERM_TOL:
            raise DomainError(
                f"spatial correlation table is not Hermitian: residual {herm:.3e}"
            )
        if not self.tau_c > 0:
            raise DomainError(f"tau_c must be positive, got {self.tau_c}")
        if not np.isfinite(self.g1):
            raise DomainError(f"g1 must be finite, got {self.g1}")
        object.__setattr__(self, "spatial", _frozen_array(spatial))


def independent_kernel(
    num_qubits: int, amplitude: float = 1.0, tau_c: float = 0.5, g1: float = 1.0
) -> CorrelationKernel:
    """Uncorrelated noise: C = amplitude * identity over (qubit, axis)."""
    spatial = amplitude * np.eye(3 * num_qubits, dtype=complex)
    return CorrelationKernel(num_qubits, spatial, tau_c, g1, kind="independent")


def collective_axis_kernel(
    num_qubits: int,
    axis: int = 3,
    amplitude: float = 1.0,
    tau_c: float = 0.5,
    g1: float = 1.0,
) -> CorrelationKernel:
    """Maximally correlated noise on one axis: every qubit pair couples alike."""
    if axis not in AXIS_LABELS:
        raise DomainError(f"axis must be 1, 2 or 3, got {axis}")
    spatial = np.zeros((3 * num_qubits, 3 * num_qubits), dtype=complex)
    for l in range(1, num_qubits + 1):
        for lp in range(1, num_qubits + 1):
            spatial[channel_index(lp, axis), channel_index(l, axis)] = amplitude
    return CorrelationKernel(num_qubits, spatial, tau_c, g1, kind="collective_axis")


def exponential_kernel(
    num_qubits: int,
    amplitude: float = 1.0,
    correlation_length: float = 1.0,
    tau_c: float = 0.5,
    g1: float = 1.0,
    axis: int | None = None,
) -> CorrelationKernel:
    """Axis-diagonal correlations decaying as exp(-|l - l'| / correlation_length).

    With ``axis=None`` every Pauli axis carries the same spatial profile.
    Passing an axis (1, 2, or 3) restricts the noise to that axis alone,
    e.g. axis=3 gives spatially correlated dephasing.  The restricted form
    keeps the total rate within a small multiple of the largest eigenvalue,
    which is what the repetition-scaling experiments need: with all three
    axes active the summed rate at unit max eigenvalue is large enough that
    the smallest repetition counts leave the perturbative regime.
    """
    if not correlation_length > 0:
        raise DomainError(
            f"correlation_length must be positive, got {correlation_length}"
        )
    if axis is None:
        axes = (1, 2, 3)
    elif axis in (1, 2, 3):
        axes = (axis,)
    else:
        raise DomainError(f"axis must be 1, 2, or 3, got {axis}")
    spatial = np.zeros((3 * num_qubits, 3 * num_qubits), dtype=complex)
    for l in range(1, num_qubits + 1):
        for lp in range(1, num_qubits + 1):
            c = amplitude * np.exp(-abs(l - lp) / correlation_length)
            for ax in axes:
                spatial[channel_index(lp, ax), channel_index(l, ax)] = c
    return CorrelationKernel(num_qubits, spatial, tau_c, g1, kind="exponential")


def cross_axis_kernel(
    num_qubits: int,
    axis_block: np.ndarray,
    tau_c: float = 0.5,
    g1: float = 1.0,
) -> CorrelationKernel:
    """Identical 3x3 axis block on every qubit, no inter-qubit correlation.

    The block mixes Pauli axes on each site, e.g. :data:`LOWERING_BLOCK`
    yields one lowering channel per qubit.
    """
    block = np.asarray(axis_block, dtype=complex)
    if block.shape != (3, 3):
        raise DomainError(f"axis_block must be 3x3, got {block.shape}")
    spatial = np.kron(np.eye(num_qubits), block)
    return CorrelationKernel(num_qubits, spatial, tau_c, g1, kind="cross_axis")


def lowering_kernel(
    num_qubits: int, tau_c: float = 0.5, g1: float = 1.0
) -> CorrelationKernel:
    """Per-qubit lowering noise (sqrt(2) |0><1| channels), uncorrelated in space."""
    return cross_axis_kernel(num_qubits, LOWERING_BLOCK, tau_c=tau_c, g1=g1)


@dataclass(frozen=True)
class NoiseSpec:
    """Validated rate matrix A (Hermitian PSD) and shift matrix B (Hermitian)."""

    num_qubits: int
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen_array(self.A))
        object.__setattr__(self, "B", _frozen_array(self.B))


def noise_spec_direct(A, B=None, num_qubits: int | None = None) -> NoiseSpec:
    """Build a NoiseSpec from explicit matrices, bypassing any kernel.

    A must be Hermitian within 1e-10 and positive semidefinite: eigenvalues in
    [-1e-10, 0) are clamped to zero (A is reconstructed from the clamped
    spectrum), anything lower is rejected.  B must be Hermitian; it defaults
    to zero.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 3 != 0:
        raise DomainError(f"A must be square 3L x 3L, got shape {A.shape}")
    inferred = A.shape[0] // 3
    if num_qubits is None:
        num_qubits = inferred
    elif num_qubits != inferred:
        raise DomainError(
            f"A is {A.shape[0]}x{A.shape[0]} but num_qubits={num_qubits} implies "
            f"{3 * num_qubits}x{3 * num_qubits}"
        )
    _check_qubit_count(num_qubits)
    if B is None:
        B = np.zeros_like(A)
    B = np.asarray(B, dtype=complex)
    if B.shape != A.shape:
        raise DomainError(f"B shape {B.shape} does not match A shape {A.shape}")
    for name, m in (("A", A), ("B", B)):
        if not np.all(np.isfinite(m.view(float))):
            raise DomainError(f"{name} contains non-finite entries")
        herm = np.max(np.abs(m - m.conj().T))
        if herm > _HERM_TOL:
            raise DomainError(f"{name} is not Hermitian: residual {herm:.3e}")

    w, v = hermitian_eigensystem(A, tol=_HERM_TOL)
    if w.min(initial=0.0) < _PSD_FLOOR:
        raise DomainError(
            f"A is not positive semidefinite: eigenvalue {w.min():.6e} "
            f"below the {_PSD_FLOOR:.1e} floor"
        )
    if w.min(initial=0.0) < 0.0:
        w = np.clip(w, 0.0, None)
        A = (v * w) @ v.conj().T
    return NoiseSpec(num_qubits=num_qubits, A=A, B=0.5 * (B + B.conj().T))


@dataclass(frozen=True)
class DirectNoise:
    """Explicit A/B input with validation deferred to resolve().

    Lets a config file carry deliberately bad matrices to the validation
    suite, which reports the gate failure instead of dying at load time.
    """

    A: object
    B: object = None
    num_qubits: int | None = None

    def resolve(self) -> NoiseSpec:
        return noise_spec_direct(self.A, self.B, num_qubits=self.num_qubits)


def integrate_kernel(kernel: CorrelationKernel) -> NoiseSpec:
    """Time-integrate a factorized exponential kernel into rate matrices.

    With f(tau) = C * exp(-|tau|/tau_c) the full-line integral is closed form,
    A = g1^2 * 2 tau_c * C, and the shift matrix B vanishes because the
    temporal profile is even in tau.
    """
    A = kernel.g1**2 * 2.0 * kernel.tau_c * kernel.spatial
    B = np.zeros_like(A)
    return noise_spec_direct(A, B, num_qubits=kernel.num_qubits)


def max_rate(spec: NoiseSpec) -> float:
    """Largest jump rate xi_max = largest eigenvalue of A."""
    return float(np.linalg.eigvalsh(spec.A).max(initial=0.0))


def rescale_to_unit_max_rate(spec: NoiseSpec) -> NoiseSpec:
    """Rescale time units so the largest jump rate is exactly 1.

    Both A and B are rates, so dividing both by xi_max leaves the physics
    unchanged up to the time relabeling.  A zero spec is returned as is.
    """
    xi_max = max_rate(spec)
    if xi_max <= 0.0:
        return spec
    return NoiseSpec(spec.num_qubits, spec.A / xi_max, spec.B / xi_max)


@dataclass(frozen=True)
class JumpChannelSet:
    """Diagonalized noise: rates, mixing unitary, jump operators, H_eff.

    `eigenvalues[n]` and `jump_ops[n]` follow the flat channel index; the
    mixing matrix satisfies A = U^dag diag(xi) U and each jump operator is
    s_n = sum_m U[n, m] sigma_m.  `inert[n]` flags channels whose rate is
    negligible relative to the largest; they carry zero jump probability but
    keep index n occupied.
    """

    num_qubits: int
    eigenvalues: np.ndarray
    U: np.ndarray
    jump_ops: np.ndarray
    H_eff: np.ndarray
    inert: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen_array(self.eigenvalues, float))
        object.__setattr__(self, "U", _frozen_array(self.U))
        object.__setattr__(self, "jump_ops", _frozen_array(self.jump_ops))
        object.__setattr__(self, "H_eff", _frozen_array(self.H_eff))
        object.__setattr__(self, "inert", _frozen_array(self.inert, bool))

    @property
    def dim(self) -> int:
        return self.H_eff.shape[0]

    @property
    def num_channels(self) -> int:
        return self.eigenvalues.shape[0]


def pauli_stack(num_qubits: int) -> np.ndarray:
    """All 3L single-qubit Paulis as one (3L, 2^L, 2^L) array in flat order."""
    ops = [
        pauli_operator(*channel_qubit_axis(n), num_qubits)
        for n in range(3 * num_qubits)
    ]
    return np.stack(ops)


def assemble_channel_set(
    spec: NoiseSpec, xi: np.ndarray, U: np.ndarray
) -> JumpChannelSet:
    """Assemble jump operators and H_eff from an explicit eigensystem of A.

    build_channels is the normal entry point; this one accepts any valid
    (xi, U) pair so alternative degenerate-eigenbasis choices can be compared
    (the dissipator must not depend on the choice).
    """
    sigmas = pauli_stack(spec.num_qubits)
    jump_ops = np.einsum("nm,mij->nij", U, sigmas)

    xi_max = xi.max(initial=0.0)
    inert = xi < _INERT_RATIO * xi_max if xi_max > 0 else np.ones_like(xi, dtype=bool)

    damping = np.einsum(
        "n,nji,njk->ik", xi, jump_ops.conj(), jump_ops, optimize=True
    )
    if np.any(spec.B):
        shift = 0.5 * np.einsum(
            "pq,pij,qjk->ik", spec.B, sigmas, sigmas, optimize=True
        )
    else:
        shift = np.zeros_like(damping)
    h_eff = shift - 0.5j * damping

    # Construction self-checks; failure means a numerics bug, not bad input.
    recon = np.max(np.abs(U.conj().T @ (xi[:, None] * U) - spec.A))
    if recon > _RECON_TOL:
        raise SimulationError(f"rate-matrix reconstruction residual {recon:.3e}")
    row_norms = np.abs(U) ** 2 @ np.ones(U.shape[1])
    if np.max(np.abs(row_norms - 1.0)) > _ROW_NORM_TOL:
        raise SimulationError("channel mixing matrix rows are not normalized")
    anti = 1j * (h_eff - h_eff.conj().T)
    if np.max(np.abs(anti - damping)) > _DAMPING_TOL:
        raise SimulationError("H_eff damping part does not match the dissipator")

    return JumpChannelSet(
        num_qubits=spec.num_qubits,
        eigenvalues=xi,
        U=U,
        jump_ops=jump_ops,
        H_eff=h_eff,
        inert=inert,
    )


def build_channels(spec: NoiseSpec) -> JumpChannelSet:
    """Diagonalize A into jump channels and assemble H_eff.

    Eigenvalues come out in ascending order; any orthonormal basis of a
    degenerate eigenspace is acceptable, the resulting dissipator is basis
    independent.
    """
    w, v = hermitian_eigensystem(spec.A, tol=_HERM_TOL)
    if w.min(initial=0.0) < _PSD_FLOOR:
        raise DomainError(
            f"rate matrix eigenvalue {w.min():.6e} below the PSD floor"
        )
    xi = np.clip(w, 0.0, None)
    # A = V diag(xi) V^dag, so the mixing matrix with A = U^dag diag U is V^dag.
    return assemble_channel_set(spec, xi, v.conj().T)
