"""Floquet analysis of the periodically driven control fluxonium.

The half-flux fluxonium driven by Omega*sin(omega_d t)*n (or the inductive
equivalent Omega_m*cos(omega_d t)*phi) is invariant under a half-period time
translation followed by parity inversion.  Diagonalizing parity * U(T/2)
therefore yields the Floquet modes from a half-period propagation, with the
quasienergies wrapping over 2*omega_d; at zero amplitude the odd-parity
eigenphases sit at E_j - omega_d, so ``quasienergy + omega_d`` recovers the
bare energy for odd levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.optimize import linear_sum_assignment

from . import kernels
from .errors import AliasingError, LabelingError, NoOptimumError
from .units import MHZ

GAP_THRESHOLD = 10.0 * MHZ      # quasienergy gaps below this are crossings
DEFAULT_LEVELS = 8
DEFAULT_NSAMPLES = 256
DEFAULT_KMAX = 32
SOLVE_TOL = 1e-10


@dataclass(frozen=True)
class DriveSpec:
    """Drive frequency, amplitude and coupling style.

    'charge-sin' realizes amp*sin(omega_d t)*n, 'phase-cos' realizes
    amp*cos(omega_d t)*phi.  The amplitude may be negative for the
    inductive drive (the rescaling formula produces a sign).
    """

    omega_d: float
    amplitude: float
    coupling: str = "charge-sin"

    def __post_init__(self):
        if self.omega_d <= 0:
            raise ValueError("omega_d must be positive")
        if self.coupling not in ("charge-sin", "phase-cos"):
            raise ValueError(f"unknown coupling {self.coupling!r}")

    @property
    def period(self):
        return 2.0 * np.pi / self.omega_d


def inductive_equivalent(drive, params):
    """Map a charge-sin drive to the equivalent phase-cos drive.

    The rescaled amplitude is -omega_d * Omega_c / (8 E_C); both drives
    share quasienergies and conditional polarization.
    """
    if drive.coupling != "charge-sin":
        raise ValueError("expected a charge-sin drive")
    amp = -drive.omega_d * drive.amplitude / (8.0 * params.e_c)
    return DriveSpec(drive.omega_d, amp, "phase-cos")


@dataclass
class FloquetBranch:
    """One labeled Floquet mode at a single drive amplitude."""

    label: int
    quasienergy: float            # glide eigenphase representative
    mode_samples: np.ndarray      # (nsamples, levels) at uniform times
    cycle_avg_energy: float


@dataclass
class FloquetPoint:
    """All branches of one solve, arrays indexed by branch label."""

    amp: float
    quasi: np.ndarray             # (L,) glide representative in (-w_d, w_d]
    quasi_phys: np.ndarray        # (L,) unwrapped, equals E_j at amp = 0
    modes0: np.ndarray            # (L, L) columns = modes at t = 0
    cycle_energy: np.ndarray      # (L,)
    fourier: np.ndarray           # (2K+1, L, L) charge elements, index k+K
    kmax: int
    min_overlap: float = 1.0
    flags: list = field(default_factory=list)

    def coef(self, k, j, i):
        """Charge Fourier coefficient n^[k]ji = <Phi_j| n |Phi_i>_k."""
        return self.fourier[k + self.kmax, j, i]


@dataclass
class CrossingEvent:
    amp: float
    branches: tuple
    gap: float
    resolution: str


@dataclass
class FloquetSweep:
    """Labeled Floquet branches over an ascending amplitude grid."""

    spec: object                  # FluxoniumSpectrum of the driven qubit
    omega_d: float
    coupling: str
    levels: int
    amps: np.ndarray
    points: list                  # FloquetPoint per grid entry
    crossing_log: list

    @property
    def n10(self):
        return self.spec.charge_elements[1, 0]

    @property
    def omega10(self):
        return self.spec.qubit_frequency

    def point_at(self, amp):
        idx = int(np.argmin(np.abs(self.amps - amp)))
        if abs(self.amps[idx] - amp) > 1e-9 * max(1.0, abs(amp)):
            raise KeyError(f"amplitude {amp} not on the sweep grid")
        return self.points[idx]

    def delta_p(self, amp=None):
        """Conditional polarization on the grid (or at one amplitude)."""
        if amp is not None:
            return conditional_polarization(self, amp)
        return np.array([_delta_p_point(p, self.n10) for p in self.points])


class _Solver:
    """Shared machinery for a fixed (spectrum, drive frequency, coupling)."""

    def __init__(self, spec, omega_d, coupling="charge-sin",
                 levels=DEFAULT_LEVELS, nsamples=DEFAULT_NSAMPLES,
                 kmax=DEFAULT_KMAX, tol=SOLVE_TOL):
        if spec.parities is None:
            raise ValueError("half-flux spectrum with parities required")
        if levels > spec.levels:
            raise ValueError("levels exceeds available spectrum levels")
        self.spec = spec
        self.omega_d = omega_d
        self.coupling = coupling
        self.levels = levels
        self.nsamples = nsamples
        self.kmax = kmax
        self.tol = tol
        self.energies = np.asarray(spec.energies[:levels], dtype=float)
        self.parity = np.asarray(spec.parities[:levels], dtype=float)
        self.n_op = np.asarray(spec.charge_elements[:levels, :levels])
        if coupling == "charge-sin":
            self.v_op, self.drive_kind = self.n_op, 0
        else:
            self.v_op = np.asarray(spec.phase_elements[:levels, :levels])
            self.drive_kind = 1
        self.period = 2.0 * np.pi / omega_d

    def propagate_half(self, amp, checkpoints):
        """U(T/2, 0) plus uniform checkpoints."""
        u_half, checks, _ = kernels.propagate(
            self.energies, self.v_op, self.omega_d, amp,
            drive_kind=self.drive_kind, t1=0.5 * self.period, tol=self.tol,
            checkpoints=checkpoints)
        return u_half, checks

    def solve(self, amp, nsamples=None):
        """Glide-symmetric Floquet solve at one amplitude (unlabeled)."""
        nsamp = nsamples or self.nsamples
        L, wd = self.levels, self.omega_d
        u_half, checks = self.propagate_half(amp, nsamp // 2)
        glide = self.parity[:, None] * u_half
        t_schur, z = schur(glide, output="complex")
        phases = np.diag(t_schur)
        quasi = -np.angle(phases) * wd / np.pi  # in (-w_d, +w_d]

        flags = []
        gaps = np.diff(np.sort(np.angle(phases)))
        if np.any(np.abs(gaps) < 1e-12):
            flags.append("degenerate-eigenphases")

        modes0 = z.copy()
        for col in range(L):
            v = modes0[:, col]
            v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
            if np.max(np.abs(v.imag)) > 1e-6:
                flags.append(f"complex-mode-{col}")
            modes0[:, col] = v

        # reconstruct modes over a full period from half-period checkpoints
        # and the glide relation Phi(t + T/2) = P Phi(t)
        half = nsamp // 2
        samples = np.empty((nsamp, L, L), dtype=complex)
        samples[0] = modes0
        dt = self.period / nsamp
        for m in range(1, half):
            phase = np.exp(1j * quasi * (m * dt))
            samples[m] = checks[m - 1] @ modes0 * phase[None, :]
        for m in range(half, nsamp):
            samples[m] = self.parity[:, None] * samples[m - half]

        cycle_energy = self._cycle_energy(samples, amp)
        return FloquetPoint(
            amp=amp, quasi=quasi, quasi_phys=np.zeros(L), modes0=modes0,
            cycle_energy=cycle_energy, fourier=None, kmax=self.kmax,
            flags=flags), samples

    def _cycle_energy(self, samples, amp):
        nsamp = samples.shape[0]
        tgrid = np.arange(nsamp) * self.period / nsamp
        f = amp * (np.cos(self.omega_d * tgrid) if self.drive_kind
                   else np.sin(self.omega_d * tgrid))
        e_static = np.einsum("mxj,x,mxj->jm", samples.conj(),
                             self.energies, samples).real
        drive = np.einsum("mxj,xy,myj->jm", samples.conj(), self.v_op,
                          samples).real * f[None, :]
        return np.mean(e_static + drive, axis=1)

    def fourier_stack(self, samples, operator=None):
        """FFT of <Phi_j(t)| O |Phi_i(t)> over one period; index k+kmax."""
        op = self.n_op if operator is None else operator
        series = np.einsum("mxj,xy,myi->mji", samples.conj(), op, samples)
        coeffs = np.fft.fft(series, axis=0) / series.shape[0]
        nsamp = series.shape[0]
        kmax = self.kmax
        stack = np.empty((2 * kmax + 1, series.shape[1], series.shape[2]),
                         dtype=complex)
        for k in range(-kmax, kmax + 1):
            stack[k + kmax] = coeffs[k % nsamp]
        return stack

    def check_decay(self, stack):
        peak = np.max(np.abs(stack))
        tail = max(np.max(np.abs(stack[0])), np.max(np.abs(stack[-1])))
        return tail <= 1e-10 * peak


def floquet_solve(spec, drive, levels=DEFAULT_LEVELS,
                  nsamples=DEFAULT_NSAMPLES, tol=SOLVE_TOL):
    """Floquet modes/quasienergies of one driven fluxonium at one amplitude.

    Branch labels are assigned by maximum cycle-averaged overlap with the
    bare states (adequate away from strong hybridization; sweeps refine
    this by continuation).
    """
    solver = _Solver(spec, drive.omega_d, drive.coupling, levels,
                     nsamples, tol=tol)
    point, samples = solver.solve(drive.amplitude)
    overlaps = np.mean(np.abs(samples) ** 2, axis=0)  # (bare, branch)
    row, col = linear_sum_assignment(-overlaps)
    order = col[np.argsort(row)]
    branches = []
    for label, idx in enumerate(order):
        branches.append(FloquetBranch(
            label=label, quasienergy=point.quasi[idx],
            mode_samples=samples[:, :, idx],
            cycle_avg_energy=point.cycle_energy[idx]))
    return branches


def sweep_amplitude(spec, omega_d, amps, coupling="charge-sin",
                    levels=DEFAULT_LEVELS, nsamples=DEFAULT_NSAMPLES,
                    kmax=DEFAULT_KMAX, tol=SOLVE_TOL, max_halvings=6):
    """Track labeled Floquet branches over an ascending amplitude grid.

    Labels follow maximum cycle-averaged overlap with the previous grid
    point; near-degenerate quasienergy pairs (gap < 2pi*10 MHz) are treated
    as diabatic crossings and resolved by cycle-averaged-energy continuity.
    """
    amps = np.asarray(amps, dtype=float)
    if amps[0] != 0.0:
        raise ValueError("amplitude grid must start at 0")
    if np.any(np.diff(amps) <= 0):
        raise ValueError("amplitude grid must be strictly ascending")

    solver = _Solver(spec, omega_d, coupling, levels, nsamples, kmax, tol)
    wd = omega_d
    crossing_log = []

    point0, samples0 = solver.solve(0.0)
    # at zero drive the glide eigenvectors are bare states; order by energy
    order = _assign(np.mean(np.abs(samples0) ** 2, axis=0))
    point0, samples0 = _reorder(point0, samples0, order)
    offsets = np.where(solver.parity > 0, 0.0, wd)
    mvec = np.round((solver.energies - point0.quasi - offsets) / (2 * wd))
    point0.quasi_phys = point0.quasi + offsets + 2 * wd * mvec
    point0.fourier = solver.fourier_stack(samples0)
    points = [point0]

    prev_point, prev_samples = point0, samples0
    for amp in amps[1:]:
        prev_point, prev_samples = _continue_to(
            solver, prev_point, prev_samples, amp, offsets, crossing_log,
            max_halvings)
        points.append(prev_point)

    return FloquetSweep(spec=spec, omega_d=wd, coupling=coupling,
                        levels=levels, amps=amps, points=points,
                        crossing_log=crossing_log)


def _assign(overlaps):
    row, col = linear_sum_assignment(-overlaps)
    return col[np.argsort(row)]


def _reorder(point, samples, order):
    point.quasi = point.quasi[order]
    point.modes0 = point.modes0[:, order]
    point.cycle_energy = point.cycle_energy[order]
    samples = samples[:, :, order]
    return point, samples


def _continue_to(solver, prev_point, prev_samples, amp, offsets,
                 crossing_log, depth):
    """Label the solve at `amp` against prev; bisect if overlap < 0.5."""
    point, samples = solver.solve(amp)
    overlaps = np.mean(
        np.abs(np.einsum("mxa,mxb->mab", prev_samples.conj(), samples)) ** 2,
        axis=0)
    order = _assign(overlaps)
    assigned = overlaps[np.arange(len(order)), order]
    if assigned.min() < 0.5:
        if depth <= 0:
            raise LabelingError(
                f"overlap {assigned.min():.3f} < 0.5 at amplitude {amp:.6g} "
                "after maximum step halving")
        mid = 0.5 * (prev_point.amp + amp)
        mid_point, mid_samples = _continue_to(
            solver, prev_point, prev_samples, mid, offsets, crossing_log,
            depth - 1)
        return _continue_to(solver, mid_point, mid_samples, amp, offsets,
                            crossing_log, depth - 1)

    point, samples = _reorder(point, samples, order)
    point.min_overlap = float(assigned.min())

    # diabatic resolution of sub-threshold gaps via cycle-averaged energy
    wd = solver.omega_d
    L = solver.levels
    for a in range(L):
        for b in range(a + 1, L):
            gap = abs(point.quasi[a] - point.quasi[b])
            gap = min(gap, 2 * wd - gap)
            if gap < GAP_THRESHOLD:
                keep = (abs(point.cycle_energy[a] - prev_point.cycle_energy[a])
                        + abs(point.cycle_energy[b] - prev_point.cycle_energy[b]))
                swap = (abs(point.cycle_energy[b] - prev_point.cycle_energy[a])
                        + abs(point.cycle_energy[a] - prev_point.cycle_energy[b]))
                resolution = "overlap"
                if swap < keep and max(overlaps[a, order[a]],
                                       overlaps[b, order[b]]) < 0.75:
                    for arr in (point.quasi, point.cycle_energy):
                        arr[[a, b]] = arr[[b, a]]
                    point.modes0[:, [a, b]] = point.modes0[:, [b, a]]
                    samples[:, :, [a, b]] = samples[:, :, [b, a]]
                    resolution = "cycle-energy-swap"
                crossing_log.append(CrossingEvent(
                    amp=amp, branches=(a, b), gap=gap, resolution=resolution))

    # sign continuity of the real mode gauge
    inner = np.einsum("mxa,mxa->a", prev_samples.conj(), samples)
    flip = np.sign(inner.real)
    flip[flip == 0] = 1.0
    point.modes0 *= flip[None, :]
    samples *= flip[None, None, :]

    point.quasi_phys = point.quasi + offsets + 2 * wd * np.round(
        (prev_point.quasi_phys - point.quasi - offsets) / (2 * wd))
    point.fourier = solver.fourier_stack(samples)
    if not solver.check_decay(point.fourier):
        point2, samples2 = solver.solve(amp, nsamples=2 * solver.nsamples)
        samples2 = samples2[:, :, order]
        samples2 *= flip[None, None, :]
        point.fourier = solver.fourier_stack(samples2)
        if not solver.check_decay(point.fourier):
            raise AliasingError(
                f"Fourier tail above threshold at amplitude {amp:.6g}")
    return point, samples


def _delta_p_point(point, n10):
    k = point.kmax
    num = point.fourier[k - 1, 1, 1] - point.fourier[k - 1, 0, 0]
    val = num / n10
    if abs(val) > 1e-12 and abs(val.imag) > 1e-8 * abs(val):
        raise ValueError(f"conditional polarization not real: {val}")
    return val.real


def conditional_polarization(sweep, amp):
    """Delta p = (n^[-1]11 - n^[-1]00) / n^10, a signed real."""
    return _delta_p_point(sweep.point_at(amp), sweep.n10)


@dataclass
class DecoherenceReport:
    """Drive-dependent dissipation rates and the incoherent-error pieces."""

    amp: float
    tan_delta: float
    gamma_up: float          # 0 -> 1
    gamma_down: float        # 1 -> 0
    gamma_phi: float
    gamma_leak: float
    rates: np.ndarray        # (L, L) Gamma[i, j] = i -> j

    @property
    def gamma_1(self):
        return self.gamma_up + self.gamma_down

    def eps_inc(self, t_gate):
        """Control-qubit incoherent error of one gate of duration t_gate."""
        return ((0.4 * (self.gamma_1 + self.gamma_phi)
                 + 0.5 * self.gamma_leak) * t_gate)


def dissipation_rates(sweep, amp, tan_delta, levels=None):
    """Zero-temperature dielectric-loss rates in the Floquet basis.

    S(omega) = 16 E_C tan(delta) for omega > 0 and zero otherwise; the rate
    for i -> j collects the Fourier sidebands at the emitted frequency
    quasi_i - quasi_j - k*omega_d.
    """
    point = sweep.point_at(amp)
    L = levels or sweep.levels
    e_c = sweep.spec.params.e_c
    wd = sweep.omega_d
    s0 = 16.0 * e_c * tan_delta
    kk = np.arange(-point.kmax, point.kmax + 1)

    rates = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            if i == j:
                continue
            w_emit = point.quasi[i] - point.quasi[j] - kk * wd
            mag2 = np.abs(point.fourier[:, j, i]) ** 2
            rates[i, j] = s0 * mag2[w_emit > 0].sum()

    diff = point.fourier[:, 1, 1] - point.fourier[:, 0, 0]
    gamma_phi = 0.5 * s0 * (np.abs(diff) ** 2)[-kk * wd > 0].sum()

    gamma_leak = rates[0, 2:L].sum() + rates[1, 2:L].sum()
    return DecoherenceReport(
        amp=amp, tan_delta=tan_delta, gamma_up=rates[0, 1],
        gamma_down=rates[1, 0], gamma_phi=gamma_phi, gamma_leak=gamma_leak,
        rates=rates)


@dataclass
class OptimalAmplitude:
    omega_star: float
    delta_p_star: float
    eps_inc_star: float
    index: int


def gate_time(delta_p, j_coupling, n_c10, n_t10):
    """Square-pulse CNOT duration pi / (2 |mu_ZX|)."""
    mu = j_coupling * abs(delta_p) * abs(n_c10) * abs(n_t10)
    return np.inf if mu == 0 else 0.5 * np.pi / mu


def optimal_amplitude(sweep, tan_delta, j_coupling, n_t10, refine=True):
    """Amplitude minimizing the control-qubit incoherent CNOT error.

    With tan_delta = 0 the objective degenerates and the search returns the
    grid argmax of |Delta p|.
    """
    amps = sweep.amps[1:]  # exclude 0 (infinite gate time)
    dps = np.array([_delta_p_point(p, sweep.n10) for p in sweep.points[1:]])
    if np.all(dps == 0):
        raise NoOptimumError("conditional polarization vanishes on the grid")

    if tan_delta == 0:
        idx = int(np.argmax(np.abs(dps)))
        return OptimalAmplitude(amps[idx], dps[idx], 0.0, idx + 1)

    eps = np.empty_like(amps)
    for i, amp in enumerate(amps):
        rep = dissipation_rates(sweep, amp, tan_delta)
        tg = gate_time(dps[i], j_coupling, sweep.n10, n_t10)
        eps[i] = rep.eps_inc(tg) if np.isfinite(tg) else np.inf
    if not np.any(np.isfinite(eps)):
        raise NoOptimumError("no finite incoherent error on the grid")
    idx = int(np.argmin(eps))

    omega_star, dp_star, eps_star = amps[idx], dps[idx], eps[idx]
    if refine and 0 < idx < len(amps) - 1 and np.all(np.isfinite(eps[idx-1:idx+2])):
        x = amps[idx-1:idx+2]
        y = eps[idx-1:idx+2]
        denom = (y[0] - 2 * y[1] + y[2])
        if denom > 0:
            shift = 0.5 * (y[0] - y[2]) / denom * (x[1] - x[0])
            omega_star = float(np.clip(x[1] + shift, x[0], x[2]))
            dp_star = float(np.interp(omega_star, x, dps[idx-1:idx+2]))
            eps_star = float(np.interp(omega_star, x, y))
    return OptimalAmplitude(omega_star, dp_star, eps_star, idx + 1)


def amplitude_for_polarization(sweep, target_abs_dp):
    """Smallest grid amplitude reaching |Delta p| = target (interpolated)."""
    dps = np.abs(sweep.delta_p())
    above = np.nonzero(dps >= target_abs_dp)[0]
    if len(above) == 0:
        raise NoOptimumError(
            f"|Delta p| never reaches {target_abs_dp} on the grid")
    hi = above[0]
    if hi == 0:
        return sweep.amps[0]
    lo = hi - 1
    frac = (target_abs_dp - dps[lo]) / (dps[hi] - dps[lo])
    return float(sweep.amps[lo] + frac * (sweep.amps[hi] - sweep.amps[lo]))


def stark_shifts(sweep, amp, transitions=((0, 1), (1, 2), (0, 2), (0, 3))):
    """Drive-induced shifts of control transitions at one amplitude.

    Returns {(a, b): shifted_minus_bare} using unwrapped quasienergies.
    """
    point = sweep.point_at(amp)
    energies = sweep.spec.energies
    out = {}
    for a, b in transitions:
        shifted = point.quasi_phys[b] - point.quasi_phys[a]
        out[(a, b)] = shifted - (energies[b] - energies[a])
    return out
