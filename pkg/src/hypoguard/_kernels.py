"""Hot inner loops for the overnight-fast simulation.

Everything here is written in nopython-compatible scalar style and
wrapped by :func:`hypoguard._accel.maybe_njit`, so the exact same source
runs under numba JIT or as plain Python (``HYPOGUARD_NUMBA=0``). The
pure-Python originals stay importable (``_derivatives_py`` /
``_rollout_core_py``) so the two paths can be compared directly.

State layout: (G, Xr, Q1, Q2, S1, S2, Ip)
  G   mg/dL    blood glucose
  Xr  1/min    remote insulin action
  Q1  mg       gastric carbohydrate compartment
  Q2  mg       gut absorption compartment
  S1  uU       first subcutaneous insulin depot
  S2  uU       second subcutaneous insulin depot
  Ip  uU/mL    plasma insulin
"""

import numpy as np

from ._accel import maybe_njit

# Plasma insulin distribution volume, folded constant (not a sampled
# physiological parameter): only the product with the clearance rate is
# identifiable, so ke is calibrated against this fixed value.
INSULIN_VOLUME_ML_PER_KG = 120.0

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_NEGATIVE = 2


def _derivatives_py(g, xr, q1, q2, s1, s2, ip, u,
                    vg_dl, p1, si, p2, ka1, ka2, ke, kabs, kemp, fbio,
                    gb, ib, vi_ml):
    dg = -(p1 + xr) * g + p1 * gb + fbio * kabs * q2 / vg_dl
    dxr = -p2 * xr + p2 * si * (ip - ib)
    dq1 = -kemp * q1
    dq2 = kemp * q1 - kabs * q2
    ds1 = u - ka1 * s1
    ds2 = ka1 * s1 - ka2 * s2
    dip = ka2 * s2 / vi_ml - ke * (ip - ib)
    return dg, dxr, dq1, dq2, ds1, ds2, dip


_derivatives = maybe_njit(_derivatives_py)


def _rollout_core_py(vg, p1, si, p2, ka1, ka2, ke, kabs, kemp, fbio, gb, ib, bw,
                     carbs_mg, bolus_uu, n_steps, dt, cgm_every,
                     eta, phi, psi,
                     kp, ki, kd, target, basal_rate, max_rate,
                     bg, cgm, ins):
    """Integrate one fast; fills bg/cgm/ins in place (length n_steps+1).

    Returns (min_bg, status, t_fail_min). RK4 at step dt with the
    infusion held constant between CGM ticks; ticks every ``cgm_every``
    steps carry ARMA(1,1)-correlated sensor noise (pre-drawn ``eta``,
    already scaled) and one PID update with conditional anti-windup.
    """
    vg_dl = vg * bw
    vi_ml = INSULIN_VOLUME_ML_PER_KG * bw

    g = gb
    xr = 0.0
    q1 = carbs_mg
    q2 = 0.0
    s1 = bolus_uu
    s2 = 0.0
    ip = ib

    e_prev = 0.0
    eta_prev = 0.0
    integral = 0.0
    prev_err = 0.0
    u = basal_rate
    reading = g
    tick = 0
    tick_dt = cgm_every * dt

    min_bg = g
    status = STATUS_OK
    t_fail = -1.0

    for i in range(n_steps + 1):
        if i % cgm_every == 0:
            eta_t = eta[tick]
            e = phi * e_prev + eta_t + psi * eta_prev
            e_prev = e
            eta_prev = eta_t
            reading = g + e
            if reading < 1.0:
                reading = 1.0
            err = reading - target
            if tick == 0:
                prev_err = err
            deriv = (err - prev_err) / tick_dt
            integral_new = integral + err * tick_dt
            u_raw = basal_rate + kp * err + ki * integral_new + kd * deriv
            u = u_raw
            if u < 0.0:
                u = 0.0
            elif u > max_rate:
                u = max_rate
            if u == u_raw:
                integral = integral_new
            prev_err = err
            tick += 1

        bg[i] = g
        cgm[i] = reading
        ins[i] = u
        if g < min_bg:
            min_bg = g

        if i == n_steps:
            break

        a1g, a1x, a1q1, a1q2, a1s1, a1s2, a1i = _derivatives(
            g, xr, q1, q2, s1, s2, ip, u,
            vg_dl, p1, si, p2, ka1, ka2, ke, kabs, kemp, fbio, gb, ib, vi_ml)
        h = 0.5 * dt
        a2g, a2x, a2q1, a2q2, a2s1, a2s2, a2i = _derivatives(
            g + h * a1g, xr + h * a1x, q1 + h * a1q1, q2 + h * a1q2,
            s1 + h * a1s1, s2 + h * a1s2, ip + h * a1i, u,
            vg_dl, p1, si, p2, ka1, ka2, ke, kabs, kemp, fbio, gb, ib, vi_ml)
        a3g, a3x, a3q1, a3q2, a3s1, a3s2, a3i = _derivatives(
            g + h * a2g, xr + h * a2x, q1 + h * a2q1, q2 + h * a2q2,
            s1 + h * a2s1, s2 + h * a2s2, ip + h * a2i, u,
            vg_dl, p1, si, p2, ka1, ka2, ke, kabs, kemp, fbio, gb, ib, vi_ml)
        a4g, a4x, a4q1, a4q2, a4s1, a4s2, a4i = _derivatives(
            g + dt * a3g, xr + dt * a3x, q1 + dt * a3q1, q2 + dt * a3q2,
            s1 + dt * a3s1, s2 + dt * a3s2, ip + dt * a3i, u,
            vg_dl, p1, si, p2, ka1, ka2, ke, kabs, kemp, fbio, gb, ib, vi_ml)

        sixth = dt / 6.0
        g = g + sixth * (a1g + 2.0 * a2g + 2.0 * a3g + a4g)
        xr = xr + sixth * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
        q1 = q1 + sixth * (a1q1 + 2.0 * a2q1 + 2.0 * a3q1 + a4q1)
        q2 = q2 + sixth * (a1q2 + 2.0 * a2q2 + 2.0 * a3q2 + a4q2)
        s1 = s1 + sixth * (a1s1 + 2.0 * a2s1 + 2.0 * a3s1 + a4s1)
        s2 = s2 + sixth * (a1s2 + 2.0 * a2s2 + 2.0 * a3s2 + a4s2)
        ip = ip + sixth * (a1i + 2.0 * a2i + 2.0 * a3i + a4i)

        total = g + xr + q1 + q2 + s1 + s2 + ip
        if not np.isfinite(total):
            status = STATUS_NONFINITE
            t_fail = (i + 1) * dt
            break
        if g < 0.0 or q1 < -1e-9 or q2 < -1e-9 or ip < 0.0:
            status = STATUS_NEGATIVE
            t_fail = (i + 1) * dt
            break

    return min_bg, status, t_fail


_rollout_core = maybe_njit(_rollout_core_py)
