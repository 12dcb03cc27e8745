"""Deterministic density-matrix integrator for the correlated-noise master equation.

This is the ground-truth engine: classical RK4 applied directly to the
2^L x 2^L density matrix,

    d rho / dt = -i H_eff rho + i rho H_eff^dag + sum_n xi_n s_n rho s_n^dag,

with no stochastic element.  Trajectory sampling and the first-order error
channel are validated against it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IntegrationError
from .noise import JumpChannelSet

logger = logging.getLogger(__name__)

# Trace-drift policy: below _DRIFT_FIX leave alone, between _DRIFT_FIX and
# _DRIFT_FAIL renormalize and log, above _DRIFT_FAIL abort.
_DRIFT_FIX = 1e-9
_DRIFT_FAIL = 1e-7

# Default internal step targets xi_max * dt <= 1e-3.
_DEFAULT_RATE_STEP = 1e-3


@dataclass(frozen=True)
class EvolutionConfig:
    """Integrator settings: internal step, total time, snapshot cadence.

    `dt_integrator` is the RK4 step, unrelated to the correction interval;
    `record_every = k` keeps every k-th step (plus the final state) when a
    snapshot list is requested, 0 disables recording.
    """

    dt_integrator: float
    t_final: float
    record_every: int = 0

    def __post_init__(self):
        if not self.dt_integrator > 0:
            raise DomainError(f"dt_integrator must be positive, got {self.dt_integrator}")
        if self.t_final < 0:
            raise DomainError(f"t_final must be nonnegative, got {self.t_final}")
        if self.record_every < 0:
            raise DomainError(f"record_every must be nonnegative, got {self.record_every}")


def default_dt_integrator(ch: JumpChannelSet) -> float:
    """Step size keeping xi_max * dt at 1e-3; 1e-3 outright for a silent spec."""
    xi_max = float(ch.eigenvalues.max(initial=0.0))
    return _DEFAULT_RATE_STEP / xi_max if xi_max > 0 else _DEFAULT_RATE_STEP


def _scaled_jump_ops(ch: JumpChannelSet) -> np.ndarray:
    # sqrt(xi_n) s_n stacked; inert channels enter with weight ~0 harmlessly.
    return np.sqrt(ch.eigenvalues)[:, None, None] * ch.jump_ops


def lindblad_rhs(rho: np.ndarray, ch: JumpChannelSet) -> np.ndarray:
    """Right-hand side -i H_eff rho + i rho H_eff^dag + sum_n xi_n s_n rho s_n^dag."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != ch.H_eff.shape:
        raise DomainError(
            f"density matrix shape {rho.shape} does not match channel dimension "
            f"{ch.H_eff.shape}"
        )
    return _rhs_precomposed(rho, ch.H_eff, _scaled_jump_ops(ch))


def _rhs_precomposed(rho: np.ndarray, h_eff: np.ndarray, s_scaled: np.ndarray) -> np.ndarray:
    out = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
    s_rho = s_scaled @ rho
    out += np.einsum("nij,nkj->ik", s_rho, s_scaled.conj())
    return out


def evolve_exact(
    rho0: np.ndarray,
    ch: JumpChannelSet,
    cfg: EvolutionConfig,
    snapshots: list | None = None,
):
    """Integrate the master equation from rho0 for cfg.t_final.

    If `snapshots` is a list and cfg.record_every > 0, tuples (t, rho_copy)
    are appended every record_every steps and at the final time.  Returns the
    final density matrix; trace drift beyond 1e-9 is repaired by
    renormalization (and logged), beyond 1e-7 it raises IntegrationError.
    """
    rho = np.array(rho0, dtype=complex)
    if rho.shape != ch.H_eff.shape:
        raise DomainError(
            f"density matrix shape {rho.shape} does not match channel dimension "
            f"{ch.H_eff.shape}"
        )
    h_eff = ch.H_eff
    s_scaled = _scaled_jump_ops(ch)

    n_full, remainder = divmod(cfg.t_final, cfg.dt_integrator)
    n_full = int(n_full)
    # Fold a remainder indistinguishable from float roundoff into the last step.
    if remainder < 1e-12 * max(cfg.t_final, cfg.dt_integrator):
        remainder = 0.0

    if snapshots is not None and cfg.record_every > 0:
        snapshots.append((0.0, rho.copy()))

    renorm_count = 0
    t = 0.0
    total_steps = n_full + (1 if remainder else 0)
    for step in range(total_steps):
        dt = cfg.dt_integrator if step < n_full else remainder
        k1 = _rhs_precomposed(rho, h_eff, s_scaled)
        k2 = _rhs_precomposed(rho + 0.5 * dt * k1, h_eff, s_scaled)
        k3 = _rhs_precomposed(rho + 0.5 * dt * k2, h_eff, s_scaled)
        k4 = _rhs_precomposed(rho + dt * k3, h_eff, s_scaled)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        t = (step + 1) * cfg.dt_integrator if step < n_full else cfg.t_final

        tr = float(rho.trace().real)
        drift = abs(tr - 1.0)
        if drift >= _DRIFT_FAIL:
            raise IntegrationError(
                f"trace drift {drift:.3e} at t={t:.6g} exceeds {_DRIFT_FAIL:.1e}; "
                f"reduce dt_integrator below {cfg.dt_integrator:.3g}"
            )
        if drift > _DRIFT_FIX:
            rho = rho / tr
            renorm_count += 1

        if (
            snapshots is not None
            and cfg.record_every > 0
            and ((step + 1) % cfg.record_every == 0 or step == total_steps - 1)
        ):
            snapshots.append((t, rho.copy()))

    if renorm_count:
        logger.info(
            "renormalized trace %d time(s) over t_final=%g (dt=%g)",
            renorm_count,
            cfg.t_final,
            cfg.dt_integrator,
        )

    lowest = float(np.linalg.eigvalsh(rho).min())
    if lowest < -1e-8:
        raise IntegrationError(
            f"integration lost positivity: eigenvalue {lowest:.3e}; "
            f"reduce dt_integrator below {cfg.dt_integrator:.3g}"
        )
    return rho


def apply_first_order_channel(rho0: np.ndarray, channel) -> np.ndarray:
    """Apply sum_n p_n Q_n rho Q_n^dag and renormalize to unit trace.

    `channel` is a trajectory-engine FirstOrderChannel; the output matches
    evolve_exact over the same interval up to O(delta_t^2).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    out = np.zeros_like(rho0)
    for p, q in zip(channel.probabilities, channel.operators):
        if p <= 0.0:
            continue
        out += p * (q @ rho0 @ q.conj().T)
    tr = float(out.trace().real)
    if tr <= 0.0:
        raise DomainError("first-order channel output has nonpositive trace")
    return out / tr
