"""Single-fluxonium spectra, matrix elements and the double-well geometry.

The Hamiltonian is H = 4 E_C n^2 + (1/2) E_L phi^2 - E_J cos(phi - phi_ext),
diagonalized in the harmonic-oscillator eigenbasis of its quadratic part.
All energies are angular frequencies in rad/ns (see :mod:`fluxcr.units`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, NoDoubleWellError
from .units import GHZ

DEFAULT_BASIS_SIZE = 120
MAX_BASIS_SIZE = 1920
CONVERGENCE_RTOL = 1e-9


@dataclass(frozen=True)
class FluxoniumParams:
    """Circuit energies (angular frequencies) and external flux of one qubit."""

    e_j: float
    e_c: float
    e_l: float
    phi_ext: float = np.pi

    def __post_init__(self):
        if not (self.e_j > 0 and self.e_c > 0 and self.e_l > 0):
            raise ValueError("circuit energies must be positive")

    @classmethod
    def from_ghz(cls, e_j, e_c, e_l, phi_ext=np.pi):
        """Construct from E/2pi values in GHz."""
        return cls(e_j * GHZ, e_c * GHZ, e_l * GHZ, phi_ext)

    def scaled(self, factor):
        """Uniformly rescale all three circuit energies."""
        return FluxoniumParams(self.e_j * factor, self.e_c * factor,
                               self.e_l * factor, self.phi_ext)

    def to_dict(self):
        return {
            "e_j_ghz": self.e_j / GHZ,
            "e_c_ghz": self.e_c / GHZ,
            "e_l_ghz": self.e_l / GHZ,
            "phi_ext": self.phi_ext,
        }

    @classmethod
    def from_dict(cls, d):
        return cls.from_ghz(d["e_j_ghz"], d["e_c_ghz"], d["e_l_ghz"],
                            d.get("phi_ext", np.pi))


@dataclass(frozen=True)
class FluxoniumSpectrum:
    """Sorted eigenenergies plus charge/phase matrix elements in a fixed gauge.

    The gauge makes the eigenvector expansion coefficients in the oscillator
    basis real with the first significant coefficient positive, so that
    ``charge_elements`` are purely imaginary and ``phase_elements`` purely
    real at half flux.
    """

    params: FluxoniumParams
    basis_size: int
    energies: np.ndarray          # shape (levels,), ascending
    charge_elements: np.ndarray   # shape (levels, levels), complex, <i|n|j>
    phase_elements: np.ndarray    # shape (levels, levels), complex, <i|phi|j>
    parities: np.ndarray = field(default=None)  # +-1 per level (half flux)

    @property
    def levels(self):
        return len(self.energies)

    @property
    def qubit_frequency(self):
        return self.energies[1] - self.energies[0]

    @property
    def n10(self):
        """Qubit charge dipole <1|n|0>."""
        return self.charge_elements[1, 0]

    def transition(self, i, j):
        return transition_frequency(self, i, j)

    def truncated(self, levels):
        """View of the same spectrum keeping only the lowest `levels` states."""
        if levels > self.levels:
            raise IndexError(f"requested {levels} levels, have {self.levels}")
        return FluxoniumSpectrum(
            self.params, self.basis_size,
            self.energies[:levels].copy(),
            self.charge_elements[:levels, :levels].copy(),
            self.phase_elements[:levels, :levels].copy(),
            None if self.parities is None else self.parities[:levels].copy(),
        )

    def to_dict(self):
        def cplx(m):
            return [[[float(v.real), float(v.imag)] for v in row] for row in m]
        return {
            "params": self.params.to_dict(),
            "basis_size": self.basis_size,
            "energies_ghz": [float(e / GHZ) for e in self.energies],
            "charge_elements": cplx(self.charge_elements),
            "phase_elements": cplx(self.phase_elements),
            "parities": None if self.parities is None
                        else [int(p) for p in self.parities],
        }

    @classmethod
    def from_dict(cls, d):
        def cplx(m):
            return np.array([[complex(re, im) for re, im in row] for row in m])
        return cls(
            FluxoniumParams.from_dict(d["params"]),
            int(d["basis_size"]),
            np.array(d["energies_ghz"]) * GHZ,
            cplx(d["charge_elements"]),
            cplx(d["phase_elements"]),
            None if d.get("parities") is None else np.array(d["parities"]),
        )


@dataclass(frozen=True)
class WellGeometry:
    """Double-well reparameterization: minima position, depth, rescaled E_C."""

    a: float
    b: float
    e_c_star: float


def _oscillator_operators(params, basis_size):
    """phi and n in the oscillator basis of 4 E_C n^2 + E_L phi^2 / 2.

    phi = phi0 (a + a^dag)/sqrt(2), n = i (a^dag - a)/(sqrt(2) phi0) with
    zero-point width phi0 = (8 E_C / E_L)^(1/4).
    """
    phi0 = (8.0 * params.e_c / params.e_l) ** 0.25
    k = np.arange(1, basis_size)
    off = np.sqrt(k / 2.0)
    phi = np.zeros((basis_size, basis_size))
    phi[k - 1, k] = phi0 * off
    phi[k, k - 1] = phi0 * off
    n_imag = np.zeros((basis_size, basis_size))  # n = i * n_imag
    n_imag[k - 1, k] = off / phi0
    n_imag[k, k - 1] = -off / phi0
    return phi, n_imag


def _diagonalize_once(params, basis_size, levels):
    """One dense diagonalization; returns (energies, evecs, n_imag, phi)."""
    phi, n_imag = _oscillator_operators(params, basis_size)
    omega0 = np.sqrt(8.0 * params.e_c * params.e_l)
    h = np.diag(omega0 * (np.arange(basis_size) + 0.5))
    # cos(phi - phi_ext) via the spectral decomposition of the phi quadrature
    lam, q = np.linalg.eigh(phi)
    h -= params.e_j * (q * np.cos(lam - params.phi_ext)) @ q.T
    energies, vecs = np.linalg.eigh(h)
    return energies[:levels], vecs[:, :levels], n_imag, phi


def _fix_gauge(vecs):
    """Real gauge: first significant oscillator coefficient positive."""
    for col in range(vecs.shape[1]):
        v = vecs[:, col]
        idx = np.nonzero(np.abs(v) > 1e-6 * np.abs(v).max())[0][0]
        if v[idx] < 0:
            vecs[:, col] = -v
    return vecs


def diagonalize(params, basis_size=None, levels=12):
    """Diagonalize a fluxonium and return its low-lying spectrum.

    The oscillator basis is doubled until the lowest `levels` energies are
    converged to relative 1e-9 (checked against a double-size run); the
    returned spectrum is from the larger basis.  An explicit `basis_size`
    sets the starting point of that search.
    """
    size = basis_size or DEFAULT_BASIS_SIZE
    if size < 20:
        raise ValueError("basis_size must be >= 20")
    nlev = min(levels, size // 2)
    e_prev, vecs, n_imag, phi = _diagonalize_once(params, size, nlev)
    scale = np.sqrt(8.0 * params.e_c * params.e_l)
    drift = np.inf
    while size <= MAX_BASIS_SIZE:
        size2 = 2 * size
        e_new, vecs, n_imag, phi = _diagonalize_once(params, size2, nlev)
        drift = np.max(np.abs(e_new - e_prev) / np.maximum(np.abs(e_new), scale))
        if drift < CONVERGENCE_RTOL:
            size = size2
            break
        e_prev, size = e_new, size2
    else:
        raise ConvergenceError(
            f"energies not converged at basis_size={size}: "
            f"relative drift {drift:.3e} >= {CONVERGENCE_RTOL:.0e}")

    vecs = _fix_gauge(vecs)
    charge = 1j * (vecs.T @ n_imag @ vecs)
    phase = (vecs.T @ phi @ vecs).astype(complex)

    parities = None
    if abs(abs(params.phi_ext) - np.pi) < 1e-12:
        weights_even = np.sum(vecs[0::2, :] ** 2, axis=0)
        parities = np.where(weights_even > 0.5, 1, -1)

    return FluxoniumSpectrum(params, size, e_new, charge, phase, parities)


def transition_frequency(spec, i, j):
    """E^j - E^i >= 0 for i <= j."""
    nlev = spec.levels
    if not (0 <= i <= j < nlev):
        raise IndexError(f"need 0 <= i <= j < {nlev}, got ({i}, {j})")
    return spec.energies[j] - spec.energies[i]


def well_geometry(params):
    """Minima position a, barrier depth b and rescaled charging energy.

    Solves sinc(a) = E_L/E_J on (0, pi) by bracketed root finding; requires
    the double-well regime E_L < E_J.
    """
    ratio = params.e_l / params.e_j
    if ratio >= 1.0:
        raise NoDoubleWellError(
            f"E_L/E_J = {ratio:.4f} >= 1: potential has a single well")
    f = lambda a: np.sinc(a / np.pi) - ratio
    a = brentq(f, 1e-14, np.pi - 1e-14, xtol=1e-14, rtol=8.9e-16)
    if abs(f(a)) > 1e-12:
        raise ConvergenceError(f"sinc root residual {f(a):.2e} > 1e-12")
    b = params.e_j * (1.0 - np.cos(a) - 0.5 * a * np.sin(a))
    return WellGeometry(a=a, b=max(b, 0.0), e_c_star=(np.pi / a) ** 2 * params.e_c)


def solve_ej_for_frequency(target_omega10, ej_over_ec, el_over_ej,
                           phi_ext=np.pi, levels=12):
    """Fluxonium params hitting a qubit frequency at fixed energy ratios.

    At fixed (E_J/E_C, E_L/E_J) the spectrum rescales linearly with E_J, so
    the solve is a single rescaling, verified by one diagonalization.
    """
    e_j0 = 4.0 * GHZ
    p0 = FluxoniumParams(e_j0, e_j0 / ej_over_ec, e_j0 * el_over_ej, phi_ext)
    s0 = diagonalize(p0, levels=levels)
    factor = target_omega10 / s0.qubit_frequency
    params = p0.scaled(factor)
    spec = diagonalize(params, levels=levels)
    if abs(spec.qubit_frequency - target_omega10) > 0.1e-3 * GHZ:
        raise ConvergenceError("frequency solve missed the 0.1 MHz target")
    return spec
