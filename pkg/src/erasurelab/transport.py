"""Classical Monte Carlo of atom transport in chirped-AOD tweezers.

A frequency-chirped AOD acts as a transient cylindrical lens: the moving
tweezer defocuses along the motion axis in proportion to the sweep rate,
delta_z / z_R = tau_aod * v / w.  Atoms are sampled from a thermal
harmonic ensemble and integrated with velocity Verlet through the
time-dependent astigmatic Gaussian potential, including the trap-to-trap
handoff ramps at both ends of a move.  The module also compiles move
profiles into the piecewise-polynomial frequency/amplitude segments the
waveform generator consumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

KB = 1.380649e-23
AMU = 1.66053906660e-27

GAMMA_ZERO_JERK = 1.5625
GAMMA_MIN_JERK = 1.875


@dataclass(frozen=True)
class TrajectorySpec:
    """Symmetric quintic move profile x(t) = L * poly(t/T; gamma).

    gamma is the midpoint velocity in units of L/T; 1.5625 gives
    vanishing endpoint jerk, 1.875 minimizes the integrated squared jerk.
    """

    length: float
    duration: float
    gamma: float = GAMMA_ZERO_JERK

    def coefficients(self) -> np.ndarray:
        g = self.gamma
        return np.array([0.0, 0.0, 15 - 8 * g, -50 + 32 * g, 60 - 40 * g, -24 + 16 * g])

    def kinematics(self, t):
        """(x, v, a, jerk) at time t (scalar or array), 0 <= t <= T."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > self.duration)):
            raise ValueError("t outside [0, T]")
        s = t / self.duration
        c = self.coefficients()
        x = self.length * sum(c[k] * s**k for k in range(2, 6))
        v = (self.length / self.duration) * sum(k * c[k] * s ** (k - 1) for k in range(2, 6))
        a = (self.length / self.duration**2) * sum(
            k * (k - 1) * c[k] * s ** (k - 2) for k in range(2, 6))
        j = (self.length / self.duration**3) * sum(
            k * (k - 1) * (k - 2) * c[k] * s ** (k - 3) for k in range(3, 6))
        return x, v, a, j

    def position(self, t):
        return self.kinematics(np.clip(t, 0.0, self.duration))[0]

    def velocity(self, t):
        return self.kinematics(np.clip(t, 0.0, self.duration))[1]


def trajectory_kinematics(spec: TrajectorySpec, t):
    return spec.kinematics(t)


@dataclass
class TweezerParams:
    """Optical trap and atom parameters.  Defaults are documented
    estimates for a 487 nm tweezer; the survival studies are
    ordering/shape-based rather than absolute-point calibrated."""

    waist: float = 0.55e-6
    rayleigh: float = math.pi * 0.55e-6**2 / 487e-9
    depth: float = KB * 300e-6  # Joules
    tau_aod: float = 1.0e-6  # AOD aperture / acoustic speed
    mass: float = 171 * AMU
    temperature: float = 5e-6
    ramp_time: float = 0.78e-3
    move_time: float = 0.89e-3
    wavelength: float = 487e-9

    def check_consistency(self) -> str | None:
        zr_expect = math.pi * self.waist**2 / self.wavelength
        if abs(self.rayleigh - zr_expect) > 0.2 * zr_expect:
            return (f"rayleigh={self.rayleigh:.3g} differs from pi*w^2/lambda="
                    f"{zr_expect:.3g} by more than 20%")
        return None

    @property
    def omega_radial(self) -> float:
        return math.sqrt(4 * self.depth / (self.mass * self.waist**2))

    @property
    def omega_axial(self) -> float:
        return math.sqrt(2 * self.depth / (self.mass * self.rayleigh**2))


def lensing_shift(params: TweezerParams, v) -> np.ndarray:
    """Focal offset of the moving tweezer: delta_z = z_R tau_aod v / w.

    The shift applies to the transverse axis parallel to the motion (the
    chirped AOD axis); the orthogonal axis stays focused at z = 0."""
    return params.rayleigh * params.tau_aod * np.asarray(v, dtype=float) / params.waist


# ---------------------------------------------------------------------------
# Forces and integration
# ---------------------------------------------------------------------------


def _gaussian_force_energy(pos, center_x, dzx, params: TweezerParams, amp):
    """Potential energy and force of one astigmatic Gaussian trap.

    U = -amp*U0 * (w^2/(wx(z)*wy(z))) * exp(-2 xr^2/wx^2 - 2 y^2/wy^2),
    wx focused at z = dzx (the lensing axis), wy at z = 0.  Force is the
    analytic gradient, F = grad(pref * g) with U = -pref * g.
    """
    w = params.waist
    zr = params.rayleigh
    x = pos[:, 0] - center_x
    y = pos[:, 1]
    z = pos[:, 2]
    sx = 1.0 + ((z - dzx) / zr) ** 2
    sy = 1.0 + (z / zr) ** 2
    wx2 = w * w * sx
    wy2 = w * w * sy
    g = np.exp(-2 * x * x / wx2 - 2 * y * y / wy2)
    pref = amp * params.depth / np.sqrt(sx * sy)
    pg = pref * g
    fx = pg * (-4 * x / wx2)
    fy = pg * (-4 * y / wy2)
    dsx_dz = 2 * (z - dzx) / zr**2
    dsy_dz = 2 * z / zr**2
    dlog = (-0.5 * (dsx_dz / sx + dsy_dz / sy)
            + 2 * x * x * dsx_dz / (wx2 * sx) + 2 * y * y * dsy_dz / (wy2 * sy))
    fz = pg * dlog
    return -pg, np.stack([fx, fy, fz], axis=1)


class TransportIntegrationError(RuntimeError):
    pass


@dataclass
class TransportResult:
    survival: float
    ci_low: float
    ci_high: float
    n_atoms: int


def sample_thermal(params: TweezerParams, n: int, rng: np.random.Generator):
    """Positions/velocities from the harmonic thermal ensemble of the
    static trap (radial x,y and axial z frequencies)."""
    sig_v = math.sqrt(KB * params.temperature / params.mass)
    sig_r = sig_v / params.omega_radial
    sig_z = sig_v / params.omega_axial
    pos = rng.normal(size=(n, 3)) * np.array([sig_r, sig_r, sig_z])
    vel = rng.normal(size=(n, 3)) * sig_v
    return pos, vel


def _trap_schedule(t, spec: TrajectorySpec, params: TweezerParams, ramps_on: bool):
    """Amplitudes/centers of (static source, moving, static destination).

    With ramps: cubic smoothstep handoffs of duration ramp_time bracket
    the move.  Returns (amp_src, amp_mov, amp_dst, x_mov, v_mov).
    """
    tr = params.ramp_time if ramps_on else 0.0
    tm = spec.duration
    if t < tr:
        s = t / tr if tr > 0 else 1.0
        a = s * s * (3 - 2 * s)
        return 1.0 - a, a, 0.0, 0.0, 0.0
    if t < tr + tm:
        x, v, _, _ = spec.kinematics(t - tr)
        return 0.0, 1.0, 0.0, x, v
    if ramps_on and t < 2 * tr + tm:
        s = (t - tr - tm) / tr
        a = s * s * (3 - 2 * s)
        return 0.0, 1.0 - a, a, spec.length, 0.0
    return 0.0, 0.0, 1.0, spec.length, 0.0


def simulate_transport(spec: TrajectorySpec, params: TweezerParams, n_atoms: int,
                       seed: int, lensing_on: bool = True, ramps_on: bool = True,
                       steps_per_period: int = 1000) -> TransportResult:
    """Thermal-ensemble survival of one transport move.

    Survival criterion: negative total mechanical energy in the
    destination static trap at the end of the sequence.
    """
    if n_atoms < 1:
        raise ValueError("need at least one atom")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA70)))
    pos, vel = sample_thermal(params, n_atoms, rng)
    dt = 1.0 / (steps_per_period * params.omega_radial / (2 * math.pi))
    t_total = spec.duration + (2 * params.ramp_time if ramps_on else 0.0)
    n_steps = int(math.ceil(t_total / dt))
    dt = t_total / n_steps

    def total_force(t, pos):
        a_src, a_mov, a_dst, x_mov, v_mov = _trap_schedule(t, spec, params, ramps_on)
        f = np.zeros_like(pos)
        if a_src > 0:
            _, fs = _gaussian_force_energy(pos, 0.0, 0.0, params, a_src)
            f += fs
        if a_mov > 0:
            dz = lensing_shift(params, v_mov) if lensing_on else 0.0
            _, fm = _gaussian_force_energy(pos, x_mov, dz, params, a_mov)
            f += fm
        if a_dst > 0:
            _, fd = _gaussian_force_energy(pos, spec.length, 0.0, params, a_dst)
            f += fd
        return f

    f = total_force(0.0, pos)
    t = 0.0
    inv_m = 1.0 / params.mass
    for _ in range(n_steps):
        vel = vel + 0.5 * dt * inv_m * f
        pos = pos + dt * vel
        t += dt
        f = total_force(t, pos)
        vel = vel + 0.5 * dt * inv_m * f
        if not np.all(np.isfinite(pos)):
            raise TransportIntegrationError("integrator diverged (non-finite positions)")
    U, _ = _gaussian_force_energy(pos, spec.length, 0.0, params, 1.0)
    E = 0.5 * params.mass * np.sum(vel**2, axis=1) + U
    survived = int(np.count_nonzero(E < 0))
    from .stats import wilson_interval

    lo, hi = wilson_interval(survived, n_atoms)
    return TransportResult(survived / n_atoms, lo, hi, n_atoms)


def energy_drift_selftest(params: TweezerParams, duration: float = 10e-3,
                          n_atoms: int = 32, seed: int = 1,
                          steps_per_period: int = 1000) -> float:
    """Static-trap qualification gate: max relative energy drift per atom."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE4E26)))
    pos, vel = sample_thermal(params, n_atoms, rng)
    dt = 1.0 / (steps_per_period * params.omega_radial / (2 * math.pi))
    n_steps = int(math.ceil(duration / dt))

    def energy(pos, vel):
        U, _ = _gaussian_force_energy(pos, 0.0, 0.0, params, 1.0)
        return 0.5 * params.mass * np.sum(vel**2, axis=1) + U

    e0 = energy(pos, vel)
    _, f = _gaussian_force_energy(pos, 0.0, 0.0, params, 1.0)
    inv_m = 1.0 / params.mass
    for _ in range(n_steps):
        vel = vel + 0.5 * dt * inv_m * f
        pos = pos + dt * vel
        _, f = _gaussian_force_energy(pos, 0.0, 0.0, params, 1.0)
        vel = vel + 0.5 * dt * inv_m * f
    e1 = energy(pos, vel)
    return float(np.max(np.abs((e1 - e0) / e0)))


# ---------------------------------------------------------------------------
# Waveform compilation
# ---------------------------------------------------------------------------

WAVEFORM_SCHEMA_VERSION = 1
MAX_FREQ_COEFFS = 6
MAX_AMP_COEFFS = 4


@dataclass
class WaveformSegment:
    """One generator segment: frequency is a polynomial of degree <= 5 in
    the time since segment start, amplitude a polynomial of degree <= 3."""

    duration: float
    freq_coeffs: list
    amp_coeffs: list = field(default_factory=lambda: [1.0])

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        if len(self.freq_coeffs) > MAX_FREQ_COEFFS:
            raise ValueError("frequency polynomial exceeds fifth order")
        if len(self.amp_coeffs) > MAX_AMP_COEFFS:
            raise ValueError("amplitude polynomial exceeds third order")

    def frequency(self, t):
        t = np.asarray(t, dtype=float)
        return sum(c * t**k for k, c in enumerate(self.freq_coeffs))

    def amplitude(self, t):
        t = np.asarray(t, dtype=float)
        return sum(c * t**k for k, c in enumerate(self.amp_coeffs))

    def phase_accumulated(self) -> float:
        """2*pi * integral of f over the segment (analytic)."""
        return 2 * math.pi * sum(
            c * self.duration ** (k + 1) / (k + 1) for k, c in enumerate(self.freq_coeffs))

    def to_dict(self) -> dict:
        return {"duration_s": self.duration,
                "freq_coeffs": [float(c) for c in self.freq_coeffs],
                "amp_coeffs": [float(c) for c in self.amp_coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "WaveformSegment":
        return cls(d["duration_s"], list(d["freq_coeffs"]), list(d["amp_coeffs"]))


def segments_to_json(segments: list) -> str:
    return json.dumps({"version": WAVEFORM_SCHEMA_VERSION,
                       "segments": [s.to_dict() for s in segments]}, indent=1)


def segments_from_json(text: str) -> list:
    d = json.loads(text)
    if d.get("version") != WAVEFORM_SCHEMA_VERSION:
        raise ValueError(f"unsupported waveform schema version {d.get('version')}")
    return [WaveformSegment.from_dict(s) for s in d["segments"]]


def _fit_quintic(poly_coeffs: np.ndarray, t0: float, t1: float, tol: float):
    """Fit a degree<=5 polynomial over [t0, t1] to an arbitrary-degree
    polynomial, recursively subdividing until the max deviation is within
    tol (relative to the coefficient scale)."""
    ts = np.linspace(t0, t1, 64)
    vals = np.polyval(poly_coeffs[::-1], ts)
    deg = min(5, len(poly_coeffs) - 1)
    local = np.polynomial.polynomial.polyfit(ts - t0, vals, deg)
    approx = np.polynomial.polynomial.polyval(ts - t0, local)
    scale = max(np.max(np.abs(vals)), 1.0)
    if np.max(np.abs(approx - vals)) <= tol * scale or (t1 - t0) < 1e-12:
        return [(t1 - t0, list(local))]
    tm = 0.5 * (t0 + t1)
    return _fit_quintic(poly_coeffs, t0, tm, tol) + _fit_quintic(poly_coeffs, tm, t1, tol)


def compile_trajectory(spec: TrajectorySpec, center_freq: float, scale: float,
                       ramp_time: float = 0.0, tol: float = 1e-9) -> list:
    """Compile a move into generator segments.

    Frequency tracks position: f(t) = center_freq + scale * x(t).  The
    quintic move fits in a single frequency segment exactly; amplitude
    handoff ramps are emitted as cubic smoothstep segments before and
    after the move when ramp_time > 0.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    c = spec.coefficients() * spec.length
    T = spec.duration
    # convert from s = t/T powers to t powers
    freq = [center_freq] + [float(scale * c[k] / T**k) for k in range(1, 6)]
    segments = []
    if ramp_time > 0:
        # smoothstep 3s^2 - 2s^3 expressed in t over [0, ramp_time]
        up = [0.0, 0.0, 3.0 / ramp_time**2, -2.0 / ramp_time**3]
        down = [1.0, 0.0, -3.0 / ramp_time**2, 2.0 / ramp_time**3]
        segments.append(WaveformSegment(ramp_time, [center_freq], up))
        segments.append(WaveformSegment(T, freq, [1.0]))
        segments.append(WaveformSegment(
            ramp_time, [center_freq + scale * spec.length], down))
    else:
        segments.append(WaveformSegment(T, freq, [1.0]))
    return segments


def compile_polynomial(poly_coeffs, duration: float, tol: float = 1e-9) -> list:
    """Compile an arbitrary-degree frequency polynomial, subdividing into
    quintic segments until the requested tolerance is met."""
    pieces = _fit_quintic(np.asarray(poly_coeffs, dtype=float), 0.0, duration, tol)
    return [WaveformSegment(dur, coeffs) for dur, coeffs in pieces]


def evaluate_segments(segments: list, t):
    """Frequency at absolute time t across a segment chain."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    starts = np.cumsum([0.0] + [s.duration for s in segments])
    for i, ti in enumerate(t):
        k = int(np.searchsorted(starts[1:], ti, side="left"))
        k = min(k, len(segments) - 1)
        out[i] = segments[k].frequency(ti - starts[k])
    return out if out.size > 1 else float(out[0])
