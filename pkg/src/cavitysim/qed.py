"""Coupled atom-cavity algebra: mode geometry, dressed states, weak-driving steady state.

Conventions used throughout the package:

* All frequencies are angular (rad/s), all detunings are laser-minus-resonance.
* ``delta_pc = omega_laser - omega_cavity``, ``delta_pa = omega_laser - omega_atom``.
* The atom-cavity detuning is ``Delta = omega_cavity - omega_atom = delta_pa0 - delta_pc``.
* ``kappa`` and ``gamma`` are half widths (HWHM); the bare lines have full
  widths ``2*kappa`` and ``2*gamma``.
* The cavity axis is z, gravity acts along -x, positions are metres.

The steady-state amplitudes are written in the frame rotating at the probe
frequency.  With ``d_c = kappa - 1j*delta_pc`` and ``d_a = gamma - 1j*delta_pa``::

    <a>     = eta * d_a / (d_c * d_a + g**2)
    <sigma> = -1j * g * eta / (d_c * d_a + g**2)

which reduce to the empty-cavity Lorentzian for g = 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import atomic_mass, c as c_light, hbar

__all__ = [
    "SystemParams",
    "DriveSettings",
    "SteadyState",
    "DressedPair",
    "kappa_from_finesse",
    "rb85_cavity_params",
    "coupling_at",
    "coupling_gradient",
    "trap_intensity_at",
    "trap_intensity_gradient",
    "effective_atom_detuning",
    "dressed_states",
    "steady_state",
    "transmission_map",
    "excitation_map",
]

#: mass of 85Rb in kg
MASS_RB85 = 84.911789738 * atomic_mass

#: saturation threshold above which the weak-excitation solution is flagged
P_EXCITED_VALID_MAX = 0.1


def kappa_from_finesse(cavity_length, finesse):
    """Cavity field decay rate (HWHM, rad/s) from finesse and mirror spacing.

    kappa = pi * c / (2 * L * F): the full cavity linewidth (FWHM) is the free
    spectral range c/2L divided by the finesse, and kappa is half of that.
    """
    return np.pi * c_light / (2.0 * cavity_length * finesse)


@dataclass(frozen=True)
class SystemParams:
    """Fixed physical constants and cavity/mode geometry.

    Parameters
    ----------
    g0 : float
        Maximum atom-cavity coupling (rad/s).
    kappa, gamma : float
        Cavity field and atomic dipole HWHM decay rates (rad/s).
    lambda_probe, lambda_trap : float
        Vacuum wavelengths (m) of the probe mode and the intracavity trap mode.
        The trap wave number actually used for the standing wave is derived
        from the two-fewer-nodes constraint, see ``k_trap``.
    waist_probe, waist_trap : float
        Mode waists (m), 1/e^2 intensity radii.  The coupling falls off as
        g ~ exp(-rho^2/w_p^2), so the probe intensity g^2 carries the
        conventional exp(-2 rho^2/w^2) envelope.
    cavity_length : float
        Mirror spacing (m).
    mass : float
        Atomic mass (kg).
    """

    g0: float
    kappa: float
    gamma: float
    lambda_probe: float
    lambda_trap: float
    waist_probe: float
    waist_trap: float
    cavity_length: float
    mass: float

    def __post_init__(self):
        bad = [name for name in ("g0", "kappa", "gamma", "lambda_probe",
                                 "lambda_trap", "waist_probe", "waist_trap",
                                 "cavity_length", "mass")
               if getattr(self, name) <= 0 or not np.isfinite(getattr(self, name))]
        if bad:
            raise ValueError(f"rates and lengths must be strictly positive: {bad}")
        if self.lambda_trap <= self.lambda_probe:
            raise ValueError("trap mode must be red of the probe mode "
                             "(lambda_trap > lambda_probe)")
        if not (self.g0 > self.kappa and self.g0 > self.gamma):
            warnings.warn("not in the strong-coupling regime: g0 <= kappa or g0 <= gamma",
                          stacklevel=2)
        # the derived trap wave should agree with the nominal trap wavelength
        lam_eff = 2.0 * np.pi / self.k_trap
        if abs(lam_eff - self.lambda_trap) / self.lambda_trap > 0.01:
            warnings.warn(
                f"nominal lambda_trap={self.lambda_trap:.4g} m differs from the "
                f"two-fewer-nodes wavelength {lam_eff:.4g} m by more than 1%",
                stacklevel=2)

    @property
    def k_probe(self):
        """Probe wave number 2*pi/lambda_probe (rad/m)."""
        return 2.0 * np.pi / self.lambda_probe

    @property
    def k_trap(self):
        """Trap wave number fixed by the mode geometry.

        Symmetric standing waves with an antinode at the cavity centre have
        k = (2n+1)*pi/L; the trap mode sits two interior nodes below the probe
        mode, i.e. k_t = k_p - 2*pi/L.  For the 122 um cavity this lands at
        785 nm, the trap wavelength.
        """
        return self.k_probe - 2.0 * np.pi / self.cavity_length

    @property
    def lambda_trap_effective(self):
        """Wavelength 2*pi/k_trap of the standing trap wave actually used."""
        return 2.0 * np.pi / self.k_trap

    @property
    def hbar_k(self):
        """Photon momentum hbar * k_probe (kg m/s)."""
        return hbar * self.k_probe

    @property
    def strong_coupling(self):
        return self.g0 > self.kappa and self.g0 > self.gamma


def rb85_cavity_params():
    """System parameters of the 85Rb high-finesse cavity setup.

    kappa is derived from finesse 4.4e5 and length 122 um via
    ``kappa_from_finesse`` (= 2*pi*1.397 MHz) and rounded to 2*pi*1.4 MHz;
    gamma is the Rb D2 HWHM (full width 2*pi*6.07 MHz) rounded to 2*pi*3 MHz.
    """
    return SystemParams(
        g0=2.0 * np.pi * 16e6,
        kappa=2.0 * np.pi * 1.4e6,
        gamma=2.0 * np.pi * 3.0e6,
        lambda_probe=780.2e-9,
        lambda_trap=785e-9,
        waist_probe=29e-6,
        waist_trap=29e-6,
        cavity_length=122e-6,
        mass=MASS_RB85,
    )


@dataclass(frozen=True)
class DriveSettings:
    """Probe drive strength, detunings and trap calibration for one window.

    ``delta_pc`` and ``delta_pa0`` are the probe detunings from the cavity and
    from the *unshifted* atom; their difference is the bare atom-cavity
    detuning.  ``trap_depth`` is the peak dipole potential U0 (J) at unit
    relative trap intensity, ``stark_coeff`` the peak differential Stark shift
    S0 (rad/s) at the same intensity; both scale together with trap power.
    ``power_scale`` is a global calibration factor applied to trap and probe
    powers (eta scales with its square root).
    """

    delta_pc: float
    delta_pa0: float
    eta: float
    trap_depth: float = 0.0
    stark_coeff: float = 0.0
    power_scale: float = 1.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.trap_depth < 0:
            raise ValueError("trap_depth must be >= 0")
        if self.power_scale <= 0:
            raise ValueError("power_scale must be > 0")

    @classmethod
    def from_atom_cavity_detuning(cls, delta, delta_pc, eta, **kwargs):
        """Build settings from the atom-cavity detuning Delta = omega_cav - omega_at."""
        return cls(delta_pc=delta_pc, delta_pa0=delta + delta_pc, eta=eta, **kwargs)

    @property
    def atom_cavity_detuning(self):
        """Delta = omega_cav - omega_at = delta_pa0 - delta_pc."""
        return self.delta_pa0 - self.delta_pc

    @property
    def eta_eff(self):
        """Drive amplitude including the power calibration factor."""
        return self.eta * np.sqrt(self.power_scale)

    @property
    def trap_depth_eff(self):
        return self.trap_depth * self.power_scale

    @property
    def stark_coeff_eff(self):
        return self.stark_coeff * self.power_scale

    def with_probe_detuning(self, delta_pc):
        """Same settings with the probe laser moved; Delta is preserved."""
        return replace(self, delta_pc=delta_pc,
                       delta_pa0=delta_pc + self.atom_cavity_detuning)

    def with_trap_power(self, factor):
        """Same settings with trap depth and Stark shift scaled jointly."""
        return replace(self, trap_depth=self.trap_depth * factor,
                       stark_coeff=self.stark_coeff * factor)


@dataclass(frozen=True)
class SteadyState:
    """Weak-driving steady state at one phase-space point."""

    a_mean: complex
    sigma_mean: complex
    photon_number: float
    p_excited: float
    transmission_norm: float

    @classmethod
    def from_amplitudes(cls, a_mean, sigma_mean, transmission_norm):
        return cls(a_mean=complex(a_mean), sigma_mean=complex(sigma_mean),
                   photon_number=abs(a_mean) ** 2,
                   p_excited=abs(sigma_mean) ** 2,
                   transmission_norm=float(transmission_norm))

    @property
    def low_saturation(self):
        """False when the atomic excitation invalidates the linear solution."""
        return self.p_excited <= P_EXCITED_VALID_MAX


@dataclass(frozen=True)
class DressedPair:
    """Complex eigenfrequencies of the first excited doublet, relative to the cavity.

    The real parts are the normal-mode frequencies, the imaginary parts are
    minus the HWHM linewidths.  ``mixing_angle`` is the rotation from the bare
    to the dressed basis, tan(2*theta) = -2 g / Delta on [0, pi/2).
    """

    e_plus: complex
    e_minus: complex
    mixing_angle: float

    @property
    def splitting(self):
        return self.e_plus.real - self.e_minus.real

    @property
    def linewidth_plus(self):
        """Full width (FWHM) of the upper dressed state."""
        return -2.0 * self.e_plus.imag

    @property
    def linewidth_minus(self):
        return -2.0 * self.e_minus.imag


# ---------------------------------------------------------------------------
# mode geometry

def coupling_at(pos, params):
    """Position-dependent coupling g(r) = g0 cos(k_p z) exp(-(x^2+y^2)/w_p^2).

    ``pos`` is (..., 3) with the cavity axis along z and z = 0 at the centre.
    """
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    return params.g0 * np.cos(params.k_probe * z) * np.exp(
        -(x * x + y * y) / params.waist_probe ** 2)


def coupling_gradient(pos, params):
    """Analytic gradient of ``coupling_at`` with respect to position."""
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    w2 = params.waist_probe ** 2
    kp = params.k_probe
    envelope = np.exp(-(x * x + y * y) / w2)
    g = params.g0 * np.cos(kp * z) * envelope
    out = np.empty(pos.shape, dtype=float)
    out[..., 0] = -2.0 * x / w2 * g
    out[..., 1] = -2.0 * y / w2 * g
    out[..., 2] = -params.g0 * kp * np.sin(kp * z) * envelope
    return out


def trap_intensity_at(pos, params):
    """Relative trap intensity f_t(r) = cos^2(k_t z) exp(-2(x^2+y^2)/w_t^2) in [0, 1]."""
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    cz = np.cos(params.k_trap * z)
    return cz * cz * np.exp(-2.0 * (x * x + y * y) / params.waist_trap ** 2)


def trap_intensity_gradient(pos, params):
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    w2 = params.waist_trap ** 2
    kt = params.k_trap
    envelope = np.exp(-2.0 * (x * x + y * y) / w2)
    cz = np.cos(kt * z)
    ft = cz * cz * envelope
    out = np.empty(pos.shape, dtype=float)
    out[..., 0] = -4.0 * x / w2 * ft
    out[..., 1] = -4.0 * y / w2 * ft
    out[..., 2] = -kt * np.sin(2.0 * kt * z) * envelope
    return out


def effective_atom_detuning(pos, drive, params, eps=1.0):
    """Stark-shifted probe-atom detuning Delta_pa(r) = delta_pa0 - S0 * eps * f_t(r).

    ``eps`` is the instantaneous relative trap intensity factor (noise times
    relative trap power).  A positive Stark coefficient moves the atomic
    resonance up with trap power.
    """
    if np.any(np.asarray(eps) < 0):
        raise ValueError("eps must be >= 0")
    return drive.delta_pa0 - drive.stark_coeff_eff * eps * trap_intensity_at(pos, params)


# ---------------------------------------------------------------------------
# dressed states and steady state

def dressed_states(delta, params, g=None):
    """Dressed doublet for atom-cavity detuning ``delta`` = omega_cav - omega_at.

    Eigenvalues of [[-1j*kappa, g], [g, -delta - 1j*gamma]] (relative to the
    cavity), ordered so Re(e_plus) >= Re(e_minus).  With kappa = gamma = 0 this
    reduces to +-sqrt(g^2 + delta^2/4) - delta/2 and the splitting at delta = 0
    is exactly 2 g.
    """
    if g is None:
        g = params.g0
    trace = -delta - 1j * (params.kappa + params.gamma)
    half_diff = 0.5 * (delta + 1j * (params.gamma - params.kappa))
    root = np.sqrt(half_diff * half_diff + g * g + 0j)
    e_plus = 0.5 * trace + root
    e_minus = 0.5 * trace - root
    if e_plus.real < e_minus.real:
        e_plus, e_minus = e_minus, e_plus
    theta = 0.5 * np.arctan2(2.0 * g, -delta)
    return DressedPair(e_plus=complex(e_plus), e_minus=complex(e_minus),
                       mixing_angle=float(theta))


def _amplitudes(g, delta_pc, delta_pa, eta, params):
    """Raw steady-state amplitudes; broadcasts over array inputs."""
    d_c = params.kappa - 1j * np.asarray(delta_pc)
    d_a = params.gamma - 1j * np.asarray(delta_pa)
    den = d_c * d_a + np.asarray(g) ** 2
    a = eta * d_a / den
    sig = -1j * g * eta / den
    # normalised to the resonant empty cavity (eta/kappa)^2; this form stays
    # finite for eta -> 0
    trans = np.abs(params.kappa * d_a / den) ** 2
    return a, sig, trans


def steady_state(pos, drive, params, eps=1.0):
    """Weak-driving steady state of the coupled system at position ``pos``.

    The caller is responsible for checking ``low_saturation`` on the result;
    the linear solution is returned regardless.
    """
    g = coupling_at(pos, params)
    delta_pa = effective_atom_detuning(pos, drive, params, eps)
    a, sig, trans = _amplitudes(g, drive.delta_pc, delta_pa, drive.eta_eff, params)
    return SteadyState.from_amplitudes(a, sig, trans)


def transmission_map(deltas, probe_detunings, drive, params):
    """Normalised transmission on a (Delta, delta_pc) grid at full coupling, no trap.

    Row i fixes the atom-cavity detuning deltas[i]; column j the probe-cavity
    detuning probe_detunings[j].  The probe-atom detuning of each element is
    delta_pc + Delta.
    """
    dl = np.asarray(deltas, dtype=float)[:, None]
    pr = np.asarray(probe_detunings, dtype=float)[None, :]
    _, _, trans = _amplitudes(params.g0, pr, pr + dl, drive.eta_eff, params)
    return trans


def excitation_map(deltas, probe_detunings, drive, params):
    """Atomic excitation |<sigma>|^2 on the same grid as ``transmission_map``."""
    dl = np.asarray(deltas, dtype=float)[:, None]
    pr = np.asarray(probe_detunings, dtype=float)[None, :]
    _, sig, _ = _amplitudes(params.g0, pr, pr + dl, drive.eta_eff, params)
    return np.abs(sig) ** 2
