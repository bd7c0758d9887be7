"""Three-element quantum frequency processor (EOM, pulse shaper, EOM).

The processor acts on a truncated lattice of ``M`` frequency bins.  An
electro-optic phase modulator driven by the periodic phase ``A(t)`` scatters
input bin ``n`` into output bin ``m`` with amplitude ``c[m - n]``, where
``c`` are the Fourier-series coefficients of ``exp(i A(t))`` over one period.
The pulse shaper applies a static phase to each bin, so the full processor is

    W[m, n] = sum_k d[m - k] * exp(i phi[k]) * c[k - n]

with ``k`` running over every lattice bin.  Time is measured in units of the
modulation period, so the physical bin spacing never enters.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .exceptions import (DegenerateInputError, GeometryError, TruncationError,
                         ValidationError)

__all__ = [
    "TWO_PI", "DEFAULT_MODES", "DEFAULT_SAMPLES", "TRUNCATION_TOL",
    "FIDELITY_CLAMP", "RfDrive", "ModeLattice", "ShaperConfig", "QfpConfig",
    "GateMetrics", "eom_coefficients", "coefficient_half_width",
    "time_reverse", "dft_matrix", "assemble_transfer",
    "assemble_full_transfer", "gate_metrics", "cost",
]

TWO_PI = 2.0 * np.pi
DEFAULT_MODES = 64
DEFAULT_SAMPLES = 4096
TRUNCATION_TOL = 1e-10
FIDELITY_CLAMP = 1e-12


def _wrap_phase(x):
    w = float(np.mod(float(x), TWO_PI))
    # np.mod of a tiny negative number rounds up to exactly 2*pi
    return 0.0 if w >= TWO_PI else w


@dataclass(frozen=True)
class RfDrive:
    """Harmonic RF drive of one phase modulator.

    The temporal phase is ``A(t) = sum_p amplitudes[p-1] * cos(2 pi p t + phases[p-1])``
    with ``t`` in units of the modulation period.  An empty drive is the EOM
    switched off.

    Parameters
    ----------
    amplitudes : sequence of float
        Non-negative harmonic amplitudes in radians, ``p = 1 ... P``.
    phases : sequence of float
        Harmonic phases in radians; stored wrapped to ``[0, 2 pi)``.
    """

    amplitudes: tuple = ()
    phases: tuple = ()

    def __post_init__(self):
        amps = tuple(float(a) for a in np.ravel(np.asarray(self.amplitudes, dtype=float)))
        phs = np.ravel(np.asarray(self.phases, dtype=float))
        if len(amps) != len(phs):
            raise ValidationError(
                f"drive has {len(amps)} amplitudes but {len(phs)} phases")
        if not (np.all(np.isfinite(amps)) and np.all(np.isfinite(phs))):
            raise ValidationError("drive amplitudes and phases must be finite")
        if any(a < 0 for a in amps):
            raise ValidationError("drive amplitudes must be non-negative")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", tuple(_wrap_phase(p) for p in phs))

    @classmethod
    def off(cls):
        return cls((), ())

    @classmethod
    def from_pairs(cls, pairs):
        """Build a drive from ``[(amplitude, phase), ...]``."""
        pairs = list(pairs)
        return cls([a for a, _ in pairs], [p for _, p in pairs])

    @property
    def n_harmonics(self):
        return len(self.amplitudes)

    def pairs(self):
        return list(zip(self.amplitudes, self.phases))

    def waveform(self, t):
        """Evaluate ``A(t)``; ``t`` is in units of the period."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p, (a, g) in enumerate(self.pairs(), start=1):
            out = out + a * np.cos(TWO_PI * p * t + g)
        return out


@dataclass(frozen=True)
class ModeLattice:
    """Truncated frequency-bin lattice.

    ``comp_offset`` is the lattice index of computational bin 0; by default
    the computational band is centered, ``floor((M - d) / 2)``.
    """

    comp_dim: int
    total_modes: int = DEFAULT_MODES
    comp_offset: Optional[int] = None

    def __post_init__(self):
        d, m = int(self.comp_dim), int(self.total_modes)
        if d < 1:
            raise GeometryError(f"computational dimension must be >= 1, got {d}")
        if m < d:
            raise GeometryError(f"lattice of {m} modes cannot hold d={d}")
        off = (m - d) // 2 if self.comp_offset is None else int(self.comp_offset)
        if not 0 <= off <= m - d:
            raise GeometryError(f"comp_offset={off} outside [0, {m - d}]")
        object.__setattr__(self, "comp_dim", d)
        object.__setattr__(self, "total_modes", m)
        object.__setattr__(self, "comp_offset", off)

    @property
    def comp_slice(self):
        return slice(self.comp_offset, self.comp_offset + self.comp_dim)


@dataclass(frozen=True)
class ShaperConfig:
    """Pulse-shaper phases on ``B`` contiguous channels.

    Channels outside ``channel_offset ... channel_offset + B - 1`` pass with
    zero phase.
    """

    phases: tuple
    channel_offset: int

    def __post_init__(self):
        phs = np.ravel(np.asarray(self.phases, dtype=float))
        if not np.all(np.isfinite(phs)):
            raise ValidationError("shaper phases must be finite")
        object.__setattr__(self, "phases", tuple(_wrap_phase(p) for p in phs))
        object.__setattr__(self, "channel_offset", int(self.channel_offset))

    @staticmethod
    def centered_offset(n_channels, lattice):
        return lattice.comp_offset - (n_channels - lattice.comp_dim) // 2

    @classmethod
    def centered(cls, phases, lattice):
        """Shaped band centered on the computational band of ``lattice``."""
        phases = tuple(phases)
        return cls(phases, cls.centered_offset(len(phases), lattice))

    @classmethod
    def flat(cls, n_channels, lattice):
        return cls.centered((0.0,) * n_channels, lattice)

    @property
    def n_channels(self):
        return len(self.phases)

    def on_lattice(self, total_modes):
        out = np.zeros(total_modes)
        out[self.channel_offset:self.channel_offset + self.n_channels] = self.phases
        return out


@dataclass(frozen=True)
class QfpConfig:
    """EOM -> pulse shaper -> EOM on a mode lattice."""

    drive_a: RfDrive
    shaper: ShaperConfig
    drive_b: RfDrive
    lattice: ModeLattice

    def __post_init__(self):
        lat, sh = self.lattice, self.shaper
        lo, hi = sh.channel_offset, sh.channel_offset + sh.n_channels
        if sh.n_channels < lat.comp_dim:
            raise GeometryError(
                f"B={sh.n_channels} shaped channels is fewer than d={lat.comp_dim}")
        if lo < 0 or hi > lat.total_modes:
            raise GeometryError(
                f"shaped channels [{lo}, {hi}) fall outside the {lat.total_modes}-mode lattice")
        if lo > lat.comp_offset or hi < lat.comp_offset + lat.comp_dim:
            raise GeometryError("computational band must lie inside the shaped band")

    @property
    def d(self):
        return self.lattice.comp_dim


@dataclass(frozen=True)
class GateMetrics:
    fidelity: float
    success_prob: float
    cost: float = field(default=np.nan)


# ---------------------------------------------------------------------------
# Fourier coefficients of the modulator transfer function
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _harmonic_tables(n_harmonics, n_samples):
    theta = TWO_PI * np.outer(np.arange(1, n_harmonics + 1), np.arange(n_samples) / n_samples)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cos_t.setflags(write=False)
    sin_t.setflags(write=False)
    return cos_t, sin_t


def _spectra(amplitudes, phases, n_samples=DEFAULT_SAMPLES):
    """Coefficient spectra for a batch of drives.

    ``amplitudes`` and ``phases`` have shape ``(S, P)``.  Returns an ``(S, N)``
    array whose column ``q % N`` holds the coefficient ``c[q]``.
    """
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    phases = np.atleast_2d(np.asarray(phases, dtype=float))
    n_batch, n_harm = amplitudes.shape
    if n_harm == 0:
        out = np.zeros((n_batch, n_samples), dtype=complex)
        out[:, 0] = 1.0
        return out
    cos_t, sin_t = _harmonic_tables(n_harm, n_samples)
    phase_t = (amplitudes * np.cos(phases)) @ cos_t - (amplitudes * np.sin(phases)) @ sin_t
    # mean over one period of exp(iA) exp(+i q theta) is exactly ifft
    return np.fft.ifft(np.exp(1j * phase_t), axis=-1)


def _window(spectrum, half_width):
    n = spectrum.shape[-1]
    idx = np.arange(-half_width, half_width + 1) % n
    return spectrum[..., idx]


def _check_samples(half_width, n_samples):
    if half_width < 1:
        raise ValidationError(f"half_width must be >= 1, got {half_width}")
    if 2 * half_width + 1 > n_samples:
        raise ValidationError(
            f"half_width={half_width} needs more than n_samples={n_samples} time samples")


def eom_coefficients(drive, half_width, n_samples=DEFAULT_SAMPLES, tol=TRUNCATION_TOL):
    """Fourier-series coefficients of ``exp(i A(t))``.

    Parameters
    ----------
    drive : RfDrive
    half_width : int
        Coefficients ``c[-half_width] ... c[half_width]`` are returned.
    n_samples : int, default 4096
        Uniform time samples per period used for the DFT extraction.
    tol : float, default 1e-10
        Largest tolerated mass ``1 - sum |c_n|^2`` outside the window.

    Returns
    -------
    ndarray of complex, shape (2 * half_width + 1,)
        Entry ``i`` holds ``c[i - half_width]``.  Normalized so that
        ``sum |c_n|^2 = 1`` over all ``n``.

    Raises
    ------
    TruncationError
        If the window drops more than ``tol`` of the mass.
    """
    _check_samples(half_width, n_samples)
    spec = _spectra([drive.amplitudes], [drive.phases], n_samples)[0]
    coeffs = _window(spec, half_width)
    residual = max(0.0, 1.0 - float(np.sum(np.abs(coeffs) ** 2)))
    if residual > tol:
        raise TruncationError(
            f"half_width={half_width} drops {residual:.3e} of the modulator "
            f"output (tolerance {tol:.1e})", residual)
    return coeffs


def coefficient_half_width(drive, cap, n_samples=DEFAULT_SAMPLES, tol=TRUNCATION_TOL):
    """Smallest half-width whose coefficient window keeps all but ``tol`` of the mass.

    Raises
    ------
    TruncationError
        If even ``cap`` is not enough.
    """
    spec = _spectra([drive.amplitudes], [drive.phases], n_samples)[0]
    power = np.abs(spec) ** 2
    cap = min(int(cap), (n_samples - 1) // 2)
    kept = power[0]
    for hw in range(1, cap + 1):
        kept += power[hw] + power[-hw]
        if 1.0 - kept < tol:
            return hw
    residual = max(0.0, 1.0 - kept)
    raise TruncationError(
        f"drive spreads {residual:.3e} of its output beyond +/-{cap} bins "
        f"(tolerance {tol:.1e})", residual)


def time_reverse(drive):
    """Drive whose waveform is ``A(-t)``: every harmonic phase is negated."""
    return RfDrive(drive.amplitudes, [-g for g in drive.phases])


# ---------------------------------------------------------------------------
# Transfer matrices
# ---------------------------------------------------------------------------

def dft_matrix(d):
    """Unitary DFT ``F[m, n] = exp(-2 pi i m n / d) / sqrt(d)``."""
    d = int(d)
    if d < 1:
        raise ValidationError(f"DFT dimension must be >= 1, got {d}")
    mn = np.outer(np.arange(d), np.arange(d)) % d
    return np.exp(-2j * np.pi * mn / d) / np.sqrt(d)


@lru_cache(maxsize=64)
def _lattice_indices(total_modes, comp_dim, comp_offset, n_samples):
    k = np.arange(total_modes)
    n = comp_offset + np.arange(comp_dim)
    first = (k[:, None] - n[None, :]) % n_samples    # c[k - n], shape (M, d)
    second = (n[:, None] - k[None, :]) % n_samples   # d[m - k], shape (d, M)
    first.setflags(write=False)
    second.setflags(write=False)
    return first, second


def _transfer_batch(spec_a, spec_b, shaper_phases, lattice):
    """Computational ``d x d`` blocks for a batch of processors.

    ``spec_a``/``spec_b`` are ``(S, N)`` coefficient spectra and
    ``shaper_phases`` is ``(S, M)``.
    """
    n_samples = spec_a.shape[-1]
    first, second = _lattice_indices(lattice.total_modes, lattice.comp_dim,
                                     lattice.comp_offset, n_samples)
    c = spec_a[:, first]                 # (S, M, d)
    dd = spec_b[:, second]               # (S, d, M)
    c = c * np.exp(1j * shaper_phases)[:, :, None]
    return np.matmul(dd, c)


def _check_truncation(config, n_samples, strict):
    if not strict:
        return
    lat = config.lattice
    # light from the computational band must stay on the lattice
    reach = min(lat.comp_offset, lat.total_modes - lat.comp_offset - lat.comp_dim)
    for drive in (config.drive_a, config.drive_b):
        if drive.n_harmonics:
            coefficient_half_width(drive, max(reach, 1), n_samples)


def assemble_transfer(config, n_samples=DEFAULT_SAMPLES, strict=True):
    """Computational ``d x d`` transfer matrix of a processor.

    The sum over intermediate bins covers the whole lattice.  With
    ``strict=True`` each modulator must keep all but ``1e-10`` of the light
    leaving the computational band on the lattice; otherwise a
    ``TruncationError`` is raised.
    """
    _check_truncation(config, n_samples, strict)
    spec_a = _spectra([config.drive_a.amplitudes], [config.drive_a.phases], n_samples)
    spec_b = _spectra([config.drive_b.amplitudes], [config.drive_b.phases], n_samples)
    phi = config.shaper.on_lattice(config.lattice.total_modes)[None, :]
    return _transfer_batch(spec_a, spec_b, phi, config.lattice)[0]


def assemble_full_transfer(config, n_samples=DEFAULT_SAMPLES, strict=True):
    """Full ``M x M`` lattice transfer matrix."""
    _check_truncation(config, n_samples, strict)
    m = config.lattice.total_modes
    k = np.arange(m)
    idx = (k[:, None] - k[None, :]) % n_samples
    spec_a = _spectra([config.drive_a.amplitudes], [config.drive_a.phases], n_samples)[0]
    spec_b = _spectra([config.drive_b.amplitudes], [config.drive_b.phases], n_samples)[0]
    phi = config.shaper.on_lattice(m)
    return spec_b[idx] @ (np.exp(1j * phi)[:, None] * spec_a[idx])


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def cost(fidelity, success_prob, clamp=FIDELITY_CLAMP):
    """``P * log10(1 - F)`` with ``F`` clamped to at most ``1 - clamp``.

    Vectorizes over array inputs.
    """
    # clamp the infidelity, not F: 1 - (1 - 1e-12) is not exactly 1e-12
    infid = np.maximum(1.0 - np.asarray(fidelity, dtype=float), clamp)
    out = np.asarray(success_prob, dtype=float) * np.log10(infid)
    return float(out) if out.ndim == 0 else out


def _metrics_batch(w, target):
    d = target.shape[-1]
    success = np.sum(np.abs(w) ** 2, axis=(-2, -1)) / d
    overlap = np.sum(np.conj(w) * target, axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        fidelity = np.abs(overlap) ** 2 / (d * d * success)
    return np.minimum(fidelity, 1.0), success


def gate_metrics(w, target=None, clamp=FIDELITY_CLAMP):
    """Fidelity, success probability, and cost of ``w`` against ``target``.

    ``target`` defaults to the DFT of matching size.
    """
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError(f"transfer matrix must be square, got shape {w.shape}")
    d = w.shape[0]
    target = dft_matrix(d) if target is None else np.asarray(target, dtype=complex)
    if target.shape != w.shape:
        raise ValidationError(f"target shape {target.shape} != transfer shape {w.shape}")
    if not np.allclose(target.conj().T @ target, np.eye(d), rtol=0, atol=1e-9):
        raise ValidationError("target must be unitary")
    fidelity, success = _metrics_batch(w, target)
    if success == 0:
        raise DegenerateInputError("transfer matrix is identically zero")
    fidelity, success = float(fidelity), float(success)
    return GateMetrics(fidelity, success, cost(fidelity, success, clamp))
