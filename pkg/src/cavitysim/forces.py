"""Analytic low-saturation light forces at a phase-space point.

Everything here is derived from the two coupled mean-field equations

    d<a>/dt     = -d_c <a> - 1j g(r) <sigma> + eta
    d<sigma>/dt = -d_a <sigma> - 1j g(r) <a>

with d_c = kappa - 1j*delta_pc and d_a(r) = gamma - 1j*delta_pa(r):

* mean dipole force  F = -hbar grad(g) 2 Re(<a> <sigma>*) plus, optionally,
  the Stark-gradient force +hbar grad(delta_pa) |<sigma>|^2 from the
  trap-shifted atomic term of the Hamiltonian;
* friction by linear response: for velocity v, the first-order amplitude lag
  solves A psi_1 = (v . grad) psi_0 with the same system matrix A;
* momentum diffusion  D = D_sp + D_dp with
  D_sp = (hbar k)^2 gamma P_e  and per axis j
  D_dp[j] = hbar^2 |d_j <sigma>|^2 gamma + hbar^2 |d_j <a>|^2 kappa.

The per-axis split of D_sp is (3/10, 3/10, 2/5) on (x, y, z): the sigma+
dipole emission pattern about the cavity axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import g as G_STANDARD, hbar

from .qed import (
    P_EXCITED_VALID_MAX,
    coupling_at,
    coupling_gradient,
    effective_atom_detuning,
    trap_intensity_at,
    trap_intensity_gradient,
)

__all__ = [
    "ForceOptions",
    "DiffusionParts",
    "ForceBreakdown",
    "SP_AXIS_FRACTIONS",
    "trap_force",
    "mean_dipole_force",
    "friction_tensor",
    "diffusion",
    "steady_state_gradients",
    "total_force_and_noise",
]

#: fractions of the spontaneous-emission diffusion on (x, y, z)
SP_AXIS_FRACTIONS = np.array([0.3, 0.3, 0.4])


@dataclass(frozen=True)
class ForceOptions:
    """Switches for force terms whose presence the model leaves configurable.

    gravity : include -m g along x (atoms are injected from below along +x).
    stark_force : include the trap-induced detuning-gradient contribution to
        the probe force (and to its velocity response).
    """

    gravity: bool = True
    stark_force: bool = True


@dataclass(frozen=True)
class DiffusionParts:
    """Momentum-diffusion decomposition at one point (kg^2 m^2 / s^3)."""

    d_sp: float
    d_sp_axis: np.ndarray
    d_dp_atom_axis: np.ndarray
    d_dp_cavity_axis: np.ndarray

    @property
    def d_dp_axis(self):
        return self.d_dp_atom_axis + self.d_dp_cavity_axis

    @property
    def d_dp(self):
        return float(np.sum(self.d_dp_axis))

    @property
    def total(self):
        """D = D_sp + D_dp."""
        return self.d_sp + self.d_dp


@dataclass(frozen=True)
class ForceBreakdown:
    """All force and noise components at one phase-space point."""

    f_trap: np.ndarray
    f_dipole: np.ndarray
    f_gravity: np.ndarray
    friction: np.ndarray
    d_sp: float
    d_sp_axis: np.ndarray
    d_dp_axis: np.ndarray
    d_dp_atom_axis: np.ndarray
    d_dp_cavity_axis: np.ndarray
    p_excited: float
    low_saturation: bool

    def total_force(self, velocity=None):
        """Deterministic force; includes -friction @ v when a velocity is given."""
        f = self.f_trap + self.f_dipole + self.f_gravity
        if velocity is not None:
            f = f - self.friction @ np.asarray(velocity, dtype=float)
        return f

    @property
    def d_total(self):
        return self.d_sp + float(np.sum(self.d_dp_axis))


def _eps_intensity(drive, eps):
    """Effective trap intensity scale: (U0, S0) times power_scale times eps."""
    return drive.trap_depth_eff * eps, drive.stark_coeff_eff * eps


def trap_force(pos, drive, params, eps=1.0):
    """Conservative trap force F = -grad U with U(r) = -U0 eps f_t(r)."""
    u0, _ = _eps_intensity(drive, eps)
    return u0 * trap_intensity_gradient(pos, params)


def trap_potential(pos, drive, params, eps=1.0):
    """Dipole-trap potential U(r) = -U0 eps f_t(r) (J)."""
    u0, _ = _eps_intensity(drive, eps)
    return -u0 * trap_intensity_at(pos, params)


def steady_state_gradients(pos, drive, params, eps=1.0):
    """Steady-state amplitudes and their analytic position gradients.

    Returns ``(a, sigma, grad_a, grad_sigma)`` with the gradients as complex
    length-3 arrays.  The chain rule runs through both g(r) and the
    Stark-shifted detuning delta_pa(r).
    """
    pos = np.asarray(pos, dtype=float)
    g = coupling_at(pos, params)
    dg = coupling_gradient(pos, params)
    _, s0 = _eps_intensity(drive, eps)
    dpa = effective_atom_detuning(pos, drive, params, eps)
    grad_dpa = -s0 * trap_intensity_gradient(pos, params)

    d_c = params.kappa - 1j * drive.delta_pc
    d_a = params.gamma - 1j * dpa
    den = d_c * d_a + g * g
    eta = drive.eta_eff
    a = eta * d_a / den
    sig = -1j * g * eta / den

    grad_da = -1j * grad_dpa
    grad_den = d_c * grad_da + 2.0 * g * dg
    grad_a = eta * (grad_da * den - d_a * grad_den) / den ** 2
    grad_sig = -1j * eta * (dg * den - g * grad_den) / den ** 2
    return a, sig, grad_a, grad_sig


def mean_dipole_force(pos, drive, params, eps=1.0, options=ForceOptions()):
    """Mean force of the probe field on the atom at rest.

    The coupling term gives -hbar grad(g) 2 Re(<a><sigma>*); with
    ``options.stark_force`` the trap-induced gradient of the atomic detuning
    adds +hbar grad(delta_pa) |<sigma>|^2.
    """
    pos = np.asarray(pos, dtype=float)
    dg = coupling_gradient(pos, params)
    a, sig, _, _ = steady_state_gradients(pos, drive, params, eps)
    f = -hbar * dg * 2.0 * np.real(a * np.conj(sig))
    if options.stark_force:
        _, s0 = _eps_intensity(drive, eps)
        grad_dpa = -s0 * trap_intensity_gradient(pos, params)
        f = f + hbar * grad_dpa * abs(sig) ** 2
    return f


def friction_tensor(pos, drive, params, eps=1.0, options=ForceOptions()):
    """Velocity-response tensor beta (kg/s): first-order force = -beta @ v.

    Column j is obtained by solving A psi_1 = d_j psi_0 for a unit velocity
    along axis j and inserting the lag correction into the force expression.
    Positive diagonal entries damp the motion (cooling).
    """
    pos = np.asarray(pos, dtype=float)
    g = coupling_at(pos, params)
    dg = coupling_gradient(pos, params)
    _, s0 = _eps_intensity(drive, eps)
    dpa = effective_atom_detuning(pos, drive, params, eps)
    grad_dpa = -s0 * trap_intensity_gradient(pos, params)
    d_c = params.kappa - 1j * drive.delta_pc
    d_a = params.gamma - 1j * dpa
    den = d_c * d_a + g * g
    a, sig, grad_a, grad_sig = steady_state_gradients(pos, drive, params, eps)

    beta = np.zeros((3, 3))
    for j in range(3):
        # A^{-1} = [[-d_a, 1j g], [1j g, -d_c]] / den applied to grad_j psi_0
        a1 = (-d_a * grad_a[j] + 1j * g * grad_sig[j]) / den
        s1 = (1j * g * grad_a[j] - d_c * grad_sig[j]) / den
        df = -hbar * dg * 2.0 * np.real(np.conj(a) * s1 + np.conj(a1) * sig)
        if options.stark_force:
            df = df + hbar * grad_dpa * 2.0 * np.real(np.conj(sig) * s1)
        beta[:, j] = -df
    return beta


def diffusion(pos, drive, params, eps=1.0):
    """Momentum-diffusion decomposition at ``pos``.

    Returns a :class:`DiffusionParts` with D_sp = (hbar k)^2 gamma P_e split
    (3/10, 3/10, 2/5) over (x, y, z), and the per-axis dipole-fluctuation
    terms hbar^2 |d_j<sigma>|^2 gamma (atom) and hbar^2 |d_j<a>|^2 kappa
    (cavity).
    """
    _, sig, grad_a, grad_sig = steady_state_gradients(pos, drive, params, eps)
    p_e = abs(sig) ** 2
    d_sp = params.hbar_k ** 2 * params.gamma * p_e
    d_dp_atom = hbar ** 2 * np.abs(grad_sig) ** 2 * params.gamma
    d_dp_cav = hbar ** 2 * np.abs(grad_a) ** 2 * params.kappa
    return DiffusionParts(d_sp=float(d_sp), d_sp_axis=d_sp * SP_AXIS_FRACTIONS,
                          d_dp_atom_axis=d_dp_atom, d_dp_cavity_axis=d_dp_cav)


def total_force_and_noise(state, drive, params, eps=1.0, options=ForceOptions()):
    """Assemble the full :class:`ForceBreakdown` for an atom state.

    ``state`` needs ``pos`` (m) and ``mom`` (kg m/s) attributes.  The result
    is a pure function of the inputs.
    """
    pos = np.asarray(state.pos, dtype=float)
    f_trap = trap_force(pos, drive, params, eps)
    f_dip = mean_dipole_force(pos, drive, params, eps, options)
    beta = friction_tensor(pos, drive, params, eps, options)
    parts = diffusion(pos, drive, params, eps)
    f_grav = np.array([-params.mass * G_STANDARD, 0.0, 0.0]) if options.gravity \
        else np.zeros(3)
    _, sig, _, _ = steady_state_gradients(pos, drive, params, eps)
    p_e = abs(sig) ** 2
    return ForceBreakdown(
        f_trap=f_trap, f_dipole=f_dip, f_gravity=f_grav, friction=beta,
        d_sp=parts.d_sp, d_sp_axis=parts.d_sp_axis, d_dp_axis=parts.d_dp_axis,
        d_dp_atom_axis=parts.d_dp_atom_axis, d_dp_cavity_axis=parts.d_dp_cavity_axis,
        p_excited=float(p_e), low_saturation=bool(p_e <= P_EXCITED_VALID_MAX))
