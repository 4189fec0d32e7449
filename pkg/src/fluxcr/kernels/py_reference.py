"""Pure-python propagator kernel.

Implements the same fourth-order commutator-free Magnus scheme as the
compiled extension: each step applies two matrix exponentials built from the
Hamiltonian sampled at the two Gauss-Legendre nodes.  The integration runs
in the interaction picture of the static diagonal, where the drive matrix
picks up phase factors instead of requiring dense matrix products.

H(t) = diag(d) + f(t) V, with f(t) a sin/cos carrier times an optional
Planck-taper soft-square envelope.
"""

import numpy as np

_SQ3 = np.sqrt(3.0)
_C1 = 0.5 - _SQ3 / 6.0
_C2 = 0.5 + _SQ3 / 6.0
_A1 = 0.25 + _SQ3 / 6.0
_A2 = 0.25 - _SQ3 / 6.0

# Yoshida triple-jump: composing the (self-adjoint) CF4 step with these
# fractions yields a 6th-order scheme.
_W1 = 1.0 / (2.0 - 2.0 ** 0.2)
_W0 = 1.0 - 2.0 * _W1


def planck_envelope(t, t_pulse, t_ramp):
    """Soft-square envelope: unit plateau with Planck-taper ramps."""
    at = abs(t)
    half = 0.5 * t_pulse
    if at >= half:
        return 0.0
    if at <= half - t_ramp:
        return 1.0
    x = at - (half - t_ramp)  # in (0, t_ramp)
    s = t_ramp / (t_ramp - x) - t_ramp / x
    if s > 700.0:
        return 0.0
    if s < -700.0:
        return 1.0
    return 1.0 / (1.0 + np.exp(s))


def _drive_value(t, omega_d, amp, drive_kind, env):
    carrier = np.cos(omega_d * t) if drive_kind == 1 else np.sin(omega_d * t)
    if env is None:
        return amp * carrier
    t_pulse, t_ramp = env
    return amp * planck_envelope(t, t_pulse, t_ramp) * carrier


def cf4_propagate(diag, v, omega_d, amp, drive_kind, env, t0, t1, nsteps,
                  checkpoints=0, order=4):
    """Propagate U(t1, t0) for H(t) = diag + f(t) V with CF4 Magnus steps.

    order=6 composes each step from three CF4 substeps (Yoshida fractions).
    Returns (U, checks) where checks has shape (checkpoints, n, n) holding
    U(t0 + m*(t1-t0)/checkpoints, t0) for m = 1..checkpoints (lab frame).
    """
    d = np.asarray(diag, dtype=float)
    v = np.asarray(v, dtype=complex)
    n = len(d)
    h = (t1 - t0) / nsteps
    u_int = np.eye(n, dtype=complex)  # interaction-picture propagator
    checks = np.empty((checkpoints, n, n), dtype=complex) if checkpoints else None
    if checkpoints:
        if nsteps % checkpoints:
            raise ValueError("nsteps must be a multiple of checkpoints")
        per = nsteps // checkpoints
    fractions = (1.0,) if order == 4 else (_W1, _W0, _W1)

    def h_int(t):
        f = _drive_value(t, omega_d, amp, drive_kind, env)
        phase = np.exp(1j * d * t)
        return f * (v * np.outer(phase, phase.conj()))

    for step in range(nsteps):
        t = t0 + step * h
        for frac in fractions:
            hs = frac * h
            b1 = h_int(t + _C1 * hs)
            b2 = h_int(t + _C2 * hs)
            for w in (_A1 * b1 + _A2 * b2, _A2 * b1 + _A1 * b2):
                lam, q = np.linalg.eigh(w)
                u_int = (q * np.exp(-1j * hs * lam)) @ q.conj().T @ u_int
            t += hs
        if checkpoints and (step + 1) % per == 0:
            tc = t0 + (step + 1) * h
            checks[(step + 1) // per - 1] = (
                np.exp(-1j * d * tc)[:, None] * u_int * np.exp(1j * d * t0)[None, :])

    u_lab = np.exp(-1j * d * t1)[:, None] * u_int * np.exp(1j * d * t0)[None, :]
    return u_lab, checks
