"""Propagator kernel selection and the adaptive step-doubling wrapper.

The compiled CF4 extension is used when importable; setting
``FLUXCR_FORCE_PYTHON=1`` forces the pure-python twin (same algorithm).
"""

import os

import numpy as np

from ..errors import ConvergenceError
from . import py_reference

if os.environ.get("FLUXCR_FORCE_PYTHON", "0") == "1":
    _impl = py_reference
    BACKEND = "python"
else:
    try:
        from . import _cf4 as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = py_reference
        BACKEND = "python"

planck_envelope = py_reference.planck_envelope


def cf4_propagate(diag, v, omega_d, amp, drive_kind, env, t0, t1, nsteps,
                  checkpoints=0, order=6):
    """Fixed-step CF4/CF6 propagation with the selected backend."""
    return _impl.cf4_propagate(
        np.ascontiguousarray(diag, dtype=float),
        np.ascontiguousarray(v, dtype=complex),
        float(omega_d), float(amp), int(drive_kind), env,
        float(t0), float(t1), int(nsteps), int(checkpoints), int(order))


def _initial_steps(diag, v, omega_d, amp, t0, t1):
    spread = float(np.max(diag) - np.min(diag)) if len(diag) > 1 else 0.0
    vnorm = float(np.linalg.norm(v, 2))
    rate = (spread + omega_d + abs(amp) * vnorm) / (2.0 * np.pi)
    return max(16, int(np.ceil(8.0 * rate * abs(t1 - t0))))


def propagate(diag, v, omega_d, amp, *, drive_kind=0, env=None, t0=0.0, t1,
              tol=1e-12, checkpoints=0, nsteps=None, max_doublings=12,
              order=6):
    """Adaptive propagation: double the step count until U stops moving.

    Returns (U, checks, nsteps_used).  ``checks`` holds U at `checkpoints`
    uniform times in (t0, t1], or None.  Tolerance is on the max elementwise
    change of the final propagator between consecutive refinements.
    """
    n0 = nsteps or _initial_steps(diag, v, omega_d, amp, t0, t1)
    if checkpoints:
        n0 = int(np.ceil(n0 / checkpoints)) * checkpoints
    u_prev, _ = cf4_propagate(diag, v, omega_d, amp, drive_kind, env,
                              t0, t1, n0, 0, order)
    for _ in range(max_doublings):
        n0 *= 2
        u, checks = cf4_propagate(diag, v, omega_d, amp, drive_kind, env,
                                  t0, t1, n0, checkpoints, order)
        err = float(np.max(np.abs(u - u_prev)))
        # accumulated roundoff bounds what step doubling can resolve
        if err < max(tol, n0 * 4e-16):
            return u, checks, n0
        u_prev = u
    raise ConvergenceError(
        f"propagator not converged to {tol:.1e} at {n0} steps (err={err:.2e})")


def propagate_ivp(diag, v, omega_d, amp, *, drive_kind=0, env=None, t0=0.0,
                  t1, rtol=1e-11, atol=1e-12):
    """High-order adaptive propagation via DOP853.

    Preferred over the Magnus kernel for long segments of large systems
    (the gate-size 32-dim ramps), where an 8th-order method needs far fewer
    evaluations at tight tolerances.
    """
    from scipy.integrate import solve_ivp

    d = np.asarray(diag, dtype=float)
    v = np.asarray(v, dtype=complex)
    n = len(d)
    hd = np.diag(d)

    def rhs(t, y):
        u = y.reshape(n, n)
        f = _drive_value_np(t, omega_d, amp, drive_kind, env)
        return (-1j * (hd + f * v) @ u).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.eye(n, dtype=complex).ravel(),
                    method="DOP853", rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise ConvergenceError(f"DOP853 failed: {sol.message}")
    return sol.y[:, -1].reshape(n, n)


def _drive_value_np(t, omega_d, amp, drive_kind, env):
    value = py_reference._drive_value(t, omega_d, amp, drive_kind, env)
    return value
