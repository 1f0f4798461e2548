"""Compiled kernels for trajectory integration.

The physics here mirrors :mod:`cavitysim.qed` and :mod:`cavitysim.forces`
exactly (the test suite pins the two against each other); it is written as
scalar numba code so a full stochastic trajectory runs without interpreter
overhead.

Packed-array layouts (all float64 unless noted):

``sys``   [g0, kappa, gamma, k_probe, k_trap, waist_probe, waist_trap, mass, hbar_k]
``drv``   [delta_pc, delta_pa0, eta_eff, trap_depth_eff, stark_coeff_eff]
``opt``   [gravity_accel, stark_force, friction, enable_sp, enable_dp,
           axial_only_dp, gaussian_sp]
``ctrl``  [rtol, atol_pos, atol_vel, h_min, h_max, safety, max_retries]
``y``     [x, y, z, vx, vy, vz, t]
``noise`` [eps, boundary_index]; the next resample is at
          (boundary_index + 1) * dt_noise
``acc``   [trans_int, dsp_int, ddp_int, time_int, n_accepted, n_rejected,
           n_emissions, max_p_excited]

Segment status codes: 0 reached t_end, 1 trigger fired, 2 lost radially,
3 lost axially, 4 step-size failure, 5 max_steps reached.
"""

import numpy as np
from numba import njit

from .rng import (
    _mt_next_double,
    _mt_normal,
    _mt_poisson,
    _mt_recoil_direction,
    _mt_trunc_gauss,
)

HBAR = 1.0545718176461565e-34  # scipy.constants.hbar

# --- packed array indices
G0, KAPPA, GAMMA, KP, KT, WP, WT, MASS, HBARK = range(9)
SYS_LEN = 9
DPC, DPA0, ETA, U0, S0 = range(5)
DRV_LEN = 5
GRAV, STARK, FRICTION, EN_SP, EN_DP, AXIAL_DP, GAUSS_SP = range(7)
OPT_LEN = 7
RTOL, ATOL_POS, ATOL_VEL, HMIN, HMAX, SAFETY, MAXRETRY = range(7)
CTRL_LEN = 7
A_TRANS, A_DSP, A_DDP, A_TIME, A_NACC, A_NREJ, A_NEMIT, A_MAXPE = range(8)
ACC_LEN = 8

STATUS_DONE = 0
STATUS_TRIGGERED = 1
STATUS_LOST_RADIAL = 2
STATUS_LOST_AXIAL = 3
STATUS_STEP_FAIL = 4
STATUS_MAX_STEPS = 5

# spontaneous-emission diffusion fractions on (x, y, z)
SP_FRAC_X = 0.3
SP_FRAC_Y = 0.3
SP_FRAC_Z = 0.4

# Fehlberg 4(5) tableau; the 4th-order solution is propagated, the embedded
# 5th-order one supplies the error estimate.
_C2, _C3, _C4, _C5, _C6 = 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5
_A21 = 0.25
_A31, _A32 = 3.0 / 32.0, 9.0 / 32.0
_A41, _A42, _A43 = 1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0
_A51, _A52, _A53, _A54 = 439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0
_A61, _A62, _A63, _A64, _A65 = (-8.0 / 27.0, 2.0, -3544.0 / 2565.0,
                                1859.0 / 4104.0, -11.0 / 40.0)
_B1, _B3, _B4, _B5 = 25.0 / 216.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2
_E1 = 25.0 / 216.0 - 16.0 / 135.0
_E3 = 1408.0 / 2565.0 - 6656.0 / 12825.0
_E4 = 2197.0 / 4104.0 - 28561.0 / 56430.0
_E5 = -0.2 + 9.0 / 50.0
_E6 = -2.0 / 55.0


@njit(cache=True)
def eval_point(x, y, z, vx, vy, vz, sys, drv, opt, eps_i):
    """Force and noise evaluation at one phase-space point.

    ``eps_i`` is the instantaneous relative trap intensity (noise factor times
    relative trap power).  Returns
    (ax, ay, az, p_e, d_sp, ddp_x, ddp_y, ddp_z, transmission_norm).
    """
    g0 = sys[G0]
    kap = sys[KAPPA]
    gam = sys[GAMMA]
    kp = sys[KP]
    kt = sys[KT]
    wp2 = sys[WP] * sys[WP]
    wt2 = sys[WT] * sys[WT]
    mass = sys[MASS]
    hbark = sys[HBARK]

    # probe mode and gradient
    rho2 = x * x + y * y
    env_p = np.exp(-rho2 / wp2)
    cz = np.cos(kp * z)
    g = g0 * cz * env_p
    dgx = -2.0 * x / wp2 * g
    dgy = -2.0 * y / wp2 * g
    dgz = -g0 * kp * np.sin(kp * z) * env_p

    # trap mode and gradient
    env_t = np.exp(-2.0 * rho2 / wt2)
    ct = np.cos(kt * z)
    ft = ct * ct * env_t
    dftx = -4.0 * x / wt2 * ft
    dfty = -4.0 * y / wt2 * ft
    dftz = -kt * np.sin(2.0 * kt * z) * env_t

    u_eff = drv[U0] * eps_i
    s_eff = drv[S0] * eps_i

    # conservative trap force F = -grad(-U f_t) = +U grad f_t, plus gravity
    fx = u_eff * dftx - mass * opt[GRAV]
    fy = u_eff * dfty
    fz = u_eff * dftz

    # steady-state amplitudes
    dpa = drv[DPA0] - s_eff * ft
    d_c = complex(kap, -drv[DPC])
    d_a = complex(gam, -dpa)
    den = d_c * d_a + g * g
    eta = drv[ETA]
    a = eta * d_a / den
    sg = -1j * g * eta / den
    pe = sg.real * sg.real + sg.imag * sg.imag
    tn = kap * d_a / den
    trans = tn.real * tn.real + tn.imag * tn.imag

    # amplitude gradients (chain rule through g and the Stark shift)
    ddpax = -s_eff * dftx
    ddpay = -s_eff * dfty
    ddpaz = -s_eff * dftz
    den2 = den * den
    dax = eta * (-1j * ddpax * den - d_a * (d_c * -1j * ddpax + 2.0 * g * dgx)) / den2
    day = eta * (-1j * ddpay * den - d_a * (d_c * -1j * ddpay + 2.0 * g * dgy)) / den2
    daz = eta * (-1j * ddpaz * den - d_a * (d_c * -1j * ddpaz + 2.0 * g * dgz)) / den2
    dsx = -1j * eta * (dgx * den - g * (d_c * -1j * ddpax + 2.0 * g * dgx)) / den2
    dsy = -1j * eta * (dgy * den - g * (d_c * -1j * ddpay + 2.0 * g * dgy)) / den2
    dsz = -1j * eta * (dgz * den - g * (d_c * -1j * ddpaz + 2.0 * g * dgz)) / den2

    # mean dipole force
    re_as = 2.0 * (a * np.conj(sg)).real
    fx += -HBAR * dgx * re_as
    fy += -HBAR * dgy * re_as
    fz += -HBAR * dgz * re_as
    if opt[STARK] != 0.0:
        fx += HBAR * ddpax * pe
        fy += HBAR * ddpay * pe
        fz += HBAR * ddpaz * pe

    # friction: lag correction psi_1 = A^{-1} (v . grad) psi_0
    if opt[FRICTION] != 0.0:
        src_a = vx * dax + vy * day + vz * daz
        src_s = vx * dsx + vy * dsy + vz * dsz
        a1 = (-d_a * src_a + 1j * g * src_s) / den
        s1 = (1j * g * src_a - d_c * src_s) / den
        lag = 2.0 * (np.conj(a) * s1 + np.conj(a1) * sg).real
        fx += -HBAR * dgx * lag
        fy += -HBAR * dgy * lag
        fz += -HBAR * dgz * lag
        if opt[STARK] != 0.0:
            lag_s = 2.0 * (np.conj(sg) * s1).real
            fx += HBAR * ddpax * lag_s
            fy += HBAR * ddpay * lag_s
            fz += HBAR * ddpaz * lag_s

    # momentum diffusion
    dsp = hbark * hbark * gam * pe
    h2 = HBAR * HBAR
    ddx = h2 * ((dsx.real * dsx.real + dsx.imag * dsx.imag) * gam
                + (dax.real * dax.real + dax.imag * dax.imag) * kap)
    ddy = h2 * ((dsy.real * dsy.real + dsy.imag * dsy.imag) * gam
                + (day.real * day.real + day.imag * day.imag) * kap)
    ddz = h2 * ((dsz.real * dsz.real + dsz.imag * dsz.imag) * gam
                + (daz.real * daz.real + daz.imag * daz.imag) * kap)

    inv_m = 1.0 / mass
    return (fx * inv_m, fy * inv_m, fz * inv_m, pe, dsp, ddx, ddy, ddz, trans)


@njit(cache=True)
def apply_kicks(y, mt, h, pe, dsp, ddx, ddy, ddz, sys, opt):
    """Stochastic momentum updates for one accepted step of size ``h``.

    Draw order is part of the reproducibility contract: dipole-fluctuation
    kicks first (x, y, z or the axial-only variant), then spontaneous
    emission.  Zero-variance draws are skipped.  Returns the number of
    spontaneous-emission events.
    """
    inv_m = 1.0 / sys[MASS]
    if opt[EN_DP] != 0.0:
        if opt[AXIAL_DP] != 0.0:
            dd = ddx + ddy + ddz
            if dd > 0.0:
                mag = np.sqrt(2.0 * dd * h)
                if _mt_next_double(mt) < 0.5:
                    y[5] += mag * inv_m
                else:
                    y[5] -= mag * inv_m
        else:
            if ddx > 0.0:
                y[3] += _mt_normal(mt) * np.sqrt(2.0 * ddx * h) * inv_m
            if ddy > 0.0:
                y[4] += _mt_normal(mt) * np.sqrt(2.0 * ddy * h) * inv_m
            if ddz > 0.0:
                y[5] += _mt_normal(mt) * np.sqrt(2.0 * ddz * h) * inv_m
    n_events = 0
    if opt[EN_SP] != 0.0 and dsp > 0.0:
        if opt[GAUSS_SP] != 0.0:
            y[3] += _mt_normal(mt) * np.sqrt(2.0 * dsp * SP_FRAC_X * h) * inv_m
            y[4] += _mt_normal(mt) * np.sqrt(2.0 * dsp * SP_FRAC_Y * h) * inv_m
            y[5] += _mt_normal(mt) * np.sqrt(2.0 * dsp * SP_FRAC_Z * h) * inv_m
        else:
            lam = 2.0 * sys[GAMMA] * pe * h
            n_events = _mt_poisson(mt, lam)
            dv = sys[HBARK] * inv_m
            for _ in range(n_events):
                ux, uy, uz = _mt_recoil_direction(mt)
                y[3] += dv * ux
                y[4] += dv * uy
                y[5] += dv * uz
    return n_events


@njit(cache=True)
def integrate_segment(y, h_io, noise, mt, t_end, sys, drv, opt, ctrl,
                      trap_power, sigma_eps, dt_noise,
                      stop_on_trigger, trigger_threshold,
                      check_loss, loss_radius, loss_zmax,
                      max_steps, acc, rec, rec_count):
    """Advance the trajectory to ``t_end`` under one fixed drive setting.

    Deterministic forces advance with the adaptive Fehlberg pair; after each
    accepted step the stochastic kicks are applied and the trap-noise factor
    is resampled on its own grid.  ``rec`` (shape [cap, 9]) receives rows
    (t, x, y, z, px, py, pz, eps, n_events) while capacity lasts.
    """
    h_des = h_io[0]
    if h_des <= 0.0:
        h_des = ctrl[HMIN]
    loss_r2 = loss_radius * loss_radius
    mass = sys[MASS]
    status = STATUS_DONE

    while True:
        t = y[6]
        # resample the trap-noise factor for every boundary at or before t;
        # steps never straddle a boundary, so at most one fires per step.
        # This runs ahead of the termination check so a boundary landing
        # exactly on t_end is consumed by this segment.
        if dt_noise > 0.0:
            t_b = (noise[1] + 1.0) * dt_noise
            while t_b <= t:
                noise[1] += 1.0
                if sigma_eps > 0.0:
                    noise[0] = _mt_trunc_gauss(mt, 1.0, sigma_eps)
                t_b = (noise[1] + 1.0) * dt_noise

        if t >= t_end:
            break
        if max_steps > 0 and acc[A_NACC] >= max_steps:
            status = STATUS_MAX_STEPS
            break

        eps_i = noise[0] * trap_power
        ax1, ay1, az1, pe, dsp, ddx, ddy, ddz, trans = eval_point(
            y[0], y[1], y[2], y[3], y[4], y[5], sys, drv, opt, eps_i)
        if pe > acc[A_MAXPE]:
            acc[A_MAXPE] = pe
        if stop_on_trigger != 0 and trans < trigger_threshold:
            status = STATUS_TRIGGERED
            break
        if check_loss != 0:
            if y[0] * y[0] + y[1] * y[1] > loss_r2:
                status = STATUS_LOST_RADIAL
                break
            if np.abs(y[2]) > loss_zmax:
                status = STATUS_LOST_AXIAL
                break

        # cap the attempt at the segment end and the next noise boundary
        t_noise = (noise[1] + 1.0) * dt_noise
        h_cap = t_end - t
        hit_noise = False
        if dt_noise > 0.0 and t_noise - t < h_cap:
            h_cap = t_noise - t
            hit_noise = True
        hit_end = not hit_noise

        retries = 0
        accepted = False
        while not accepted:
            capped = h_des >= h_cap
            h = h_cap if capped else h_des

            # Fehlberg stages (k1 already available)
            x2 = y[0] + h * _A21 * y[3]
            y2 = y[1] + h * _A21 * y[4]
            z2 = y[2] + h * _A21 * y[5]
            vx2 = y[3] + h * _A21 * ax1
            vy2 = y[4] + h * _A21 * ay1
            vz2 = y[5] + h * _A21 * az1
            ax2, ay2, az2, _, _, _, _, _, _ = eval_point(
                x2, y2, z2, vx2, vy2, vz2, sys, drv, opt, eps_i)

            dx2, dy2, dz2 = vx2, vy2, vz2
            x3 = y[0] + h * (_A31 * y[3] + _A32 * dx2)
            y3 = y[1] + h * (_A31 * y[4] + _A32 * dy2)
            z3 = y[2] + h * (_A31 * y[5] + _A32 * dz2)
            vx3 = y[3] + h * (_A31 * ax1 + _A32 * ax2)
            vy3 = y[4] + h * (_A31 * ay1 + _A32 * ay2)
            vz3 = y[5] + h * (_A31 * az1 + _A32 * az2)
            ax3, ay3, az3, _, _, _, _, _, _ = eval_point(
                x3, y3, z3, vx3, vy3, vz3, sys, drv, opt, eps_i)

            x4 = y[0] + h * (_A41 * y[3] + _A42 * dx2 + _A43 * vx3)
            y4_ = y[1] + h * (_A41 * y[4] + _A42 * dy2 + _A43 * vy3)
            z4 = y[2] + h * (_A41 * y[5] + _A42 * dz2 + _A43 * vz3)
            vx4 = y[3] + h * (_A41 * ax1 + _A42 * ax2 + _A43 * ax3)
            vy4 = y[4] + h * (_A41 * ay1 + _A42 * ay2 + _A43 * ay3)
            vz4 = y[5] + h * (_A41 * az1 + _A42 * az2 + _A43 * az3)
            ax4, ay4, az4, _, _, _, _, _, _ = eval_point(
                x4, y4_, z4, vx4, vy4, vz4, sys, drv, opt, eps_i)

            x5 = y[0] + h * (_A51 * y[3] + _A52 * dx2 + _A53 * vx3 + _A54 * vx4)
            y5 = y[1] + h * (_A51 * y[4] + _A52 * dy2 + _A53 * vy3 + _A54 * vy4)
            z5 = y[2] + h * (_A51 * y[5] + _A52 * dz2 + _A53 * vz3 + _A54 * vz4)
            vx5 = y[3] + h * (_A51 * ax1 + _A52 * ax2 + _A53 * ax3 + _A54 * ax4)
            vy5 = y[4] + h * (_A51 * ay1 + _A52 * ay2 + _A53 * ay3 + _A54 * ay4)
            vz5 = y[5] + h * (_A51 * az1 + _A52 * az2 + _A53 * az3 + _A54 * az4)
            ax5, ay5, az5, _, _, _, _, _, _ = eval_point(
                x5, y5, z5, vx5, vy5, vz5, sys, drv, opt, eps_i)

            x6 = y[0] + h * (_A61 * y[3] + _A62 * dx2 + _A63 * vx3 + _A64 * vx4 + _A65 * vx5)
            y6 = y[1] + h * (_A61 * y[4] + _A62 * dy2 + _A63 * vy3 + _A64 * vy4 + _A65 * vy5)
            z6 = y[2] + h * (_A61 * y[5] + _A62 * dz2 + _A63 * vz3 + _A64 * vz4 + _A65 * vz5)
            vx6 = y[3] + h * (_A61 * ax1 + _A62 * ax2 + _A63 * ax3 + _A64 * ax4 + _A65 * ax5)
            vy6 = y[4] + h * (_A61 * ay1 + _A62 * ay2 + _A63 * ay3 + _A64 * ay4 + _A65 * ay5)
            vz6 = y[5] + h * (_A61 * az1 + _A62 * az2 + _A63 * az3 + _A64 * az4 + _A65 * az5)
            ax6, ay6, az6, _, _, _, _, _, _ = eval_point(
                x6, y6, z6, vx6, vy6, vz6, sys, drv, opt, eps_i)

            # 4th-order update and embedded error estimate
            xn = y[0] + h * (_B1 * y[3] + _B3 * vx3 + _B4 * vx4 + _B5 * vx5)
            yn = y[1] + h * (_B1 * y[4] + _B3 * vy3 + _B4 * vy4 + _B5 * vy5)
            zn = y[2] + h * (_B1 * y[5] + _B3 * vz3 + _B4 * vz4 + _B5 * vz5)
            vxn = y[3] + h * (_B1 * ax1 + _B3 * ax3 + _B4 * ax4 + _B5 * ax5)
            vyn = y[4] + h * (_B1 * ay1 + _B3 * ay3 + _B4 * ay4 + _B5 * ay5)
            vzn = y[5] + h * (_B1 * az1 + _B3 * az3 + _B4 * az4 + _B5 * az5)

            ex = h * (_E1 * y[3] + _E3 * vx3 + _E4 * vx4 + _E5 * vx5 + _E6 * vx6)
            ey = h * (_E1 * y[4] + _E3 * vy3 + _E4 * vy4 + _E5 * vy5 + _E6 * vy6)
            ez = h * (_E1 * y[5] + _E3 * vz3 + _E4 * vz4 + _E5 * vz5 + _E6 * vz6)
            evx = h * (_E1 * ax1 + _E3 * ax3 + _E4 * ax4 + _E5 * ax5 + _E6 * ax6)
            evy = h * (_E1 * ay1 + _E3 * ay3 + _E4 * ay4 + _E5 * ay5 + _E6 * ay6)
            evz = h * (_E1 * az1 + _E3 * az3 + _E4 * az4 + _E5 * az5 + _E6 * az6)

            err = 0.0
            e = np.abs(ex) / (ctrl[ATOL_POS] + ctrl[RTOL] * np.abs(xn))
            if e > err:
                err = e
            e = np.abs(ey) / (ctrl[ATOL_POS] + ctrl[RTOL] * np.abs(yn))
            if e > err:
                err = e
            e = np.abs(ez) / (ctrl[ATOL_POS] + ctrl[RTOL] * np.abs(zn))
            if e > err:
                err = e
            e = np.abs(evx) / (ctrl[ATOL_VEL] + ctrl[RTOL] * np.abs(vxn))
            if e > err:
                err = e
            e = np.abs(evy) / (ctrl[ATOL_VEL] + ctrl[RTOL] * np.abs(vyn))
            if e > err:
                err = e
            e = np.abs(evz) / (ctrl[ATOL_VEL] + ctrl[RTOL] * np.abs(vzn))
            if e > err:
                err = e

            if err <= 1.0 or h <= ctrl[HMIN]:
                # accept (forced acceptance at h_min counts as a retry)
                if err > 1.0:
                    retries += 1
                    acc[A_NREJ] += 1.0
                    if retries > int(ctrl[MAXRETRY]):
                        return STATUS_STEP_FAIL
                y[0], y[1], y[2] = xn, yn, zn
                y[3], y[4], y[5] = vxn, vyn, vzn
                if capped and hit_end:
                    y[6] = t_end
                elif capped and hit_noise:
                    y[6] = t_noise
                else:
                    y[6] = t + h
                accepted = True
            else:
                retries += 1
                acc[A_NREJ] += 1.0
                if retries > int(ctrl[MAXRETRY]):
                    return STATUS_STEP_FAIL
                fac = ctrl[SAFETY] * err ** -0.2
                if fac < 0.1:
                    fac = 0.1
                h_des = h * fac
                if h_des < ctrl[HMIN]:
                    h_des = ctrl[HMIN]
                continue

            # step-size growth from the uncapped controller
            if err > 1e-300:
                fac = ctrl[SAFETY] * err ** -0.2
                if fac > 5.0:
                    fac = 5.0
            else:
                fac = 5.0
            if not capped:
                h_des = h * fac
            elif fac > 1.0 and h * fac > h_des:
                h_des = h * fac
            if h_des > ctrl[HMAX]:
                h_des = ctrl[HMAX]
            if h_des < ctrl[HMIN]:
                h_des = ctrl[HMIN]

            # stochastic updates for the accepted step
            n_ev = apply_kicks(y, mt, h, pe, dsp, ddx, ddy, ddz, sys, opt)

            # accumulators (sampled at the step start)
            acc[A_TRANS] += trans * h
            if opt[EN_SP] != 0.0:
                acc[A_DSP] += dsp * h
            if opt[EN_DP] != 0.0:
                acc[A_DDP] += (ddx + ddy + ddz) * h
            acc[A_TIME] += h
            acc[A_NACC] += 1.0
            acc[A_NEMIT] += n_ev

            if rec_count[0] < rec.shape[0]:
                i = rec_count[0]
                rec[i, 0] = y[6]
                rec[i, 1] = y[0]
                rec[i, 2] = y[1]
                rec[i, 3] = y[2]
                rec[i, 4] = y[3] * mass
                rec[i, 5] = y[4] * mass
                rec[i, 6] = y[5] * mass
                rec[i, 7] = noise[0]
                rec[i, 8] = n_ev
                rec_count[0] = i + 1

    h_io[0] = h_des
    return status
