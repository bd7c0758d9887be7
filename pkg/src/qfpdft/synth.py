"""Particle-swarm synthesis of frequency-bin DFT gates.

A design is a flat parameter vector laid out as

    [phi_0 ... phi_{B-1} | A_1, gamma_1, ..., A_P, gamma_P | B_1, delta_1, ..., B_P, delta_P]

(shaper phases, then amplitude/phase pairs for the first and the second
modulator).  In symmetric mode the last block is dropped and the second drive
is the time reverse of the first.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from .exceptions import ValidationError
from .pso import particle_swarm
from .qfp import (DEFAULT_MODES, DEFAULT_SAMPLES, TWO_PI, GateMetrics,
                  ModeLattice, QfpConfig, RfDrive, ShaperConfig, _metrics_batch,
                  _spectra, _transfer_batch, assemble_transfer, cost,
                  dft_matrix, gate_metrics, time_reverse)

__all__ = [
    "SYNTH_CLAMP", "MIN_BANDWIDTH_TABLE", "SearchSpace", "PsoSettings",
    "SynthesisResult", "SweepResult", "SingleEomCheck", "cost", "encode",
    "decode", "objective", "pso_optimize", "bandwidth_sweep",
    "min_bandwidth", "single_eom_bound_check", "search_samples",
]

#: Fidelity clamp used by the synthesis objective (see SearchSpace).
SYNTH_CLAMP = 1e-5

#: Shaped channels at which the cost converges, d = 3 ... 10.
MIN_BANDWIDTH_TABLE = {3: 12, 4: 16, 5: 20, 6: 24, 7: 28, 8: 32, 9: 32, 10: 36}


def search_samples(n_harmonics, amp_max, total_modes=DEFAULT_MODES):
    """Time samples needed so FFT aliasing cannot reach the lattice.

    A drive bounded by ``amp_max`` per harmonic has instantaneous frequency at
    most ``amp_max * P (P + 1) / 2`` bins; coefficients beyond that decay
    faster than exponentially.
    """
    reach = (total_modes - 1) + amp_max * n_harmonics * (n_harmonics + 1) / 2 + 32
    return max(256, 1 << int(math.ceil(math.log2(reach))))


@dataclass(frozen=True)
class SearchSpace:
    """What is being synthesized and where the optimizer may look.

    Parameters
    ----------
    d : int
        DFT dimension.
    n_channels : int
        Number of shaped channels ``B``.
    n_harmonics : int, optional
        RF harmonics per modulator; defaults to ``d - 1``.
    symmetric : bool
        Force the second drive to be the time reverse of the first.
    amp_max : float
        Upper bound on each harmonic amplitude (radians).
    init_amp : float, optional
        Initial amplitudes are drawn from ``[0, init_amp]``; defaults to
        ``min(amp_max, d / 2)``.
    total_modes : int
        Lattice size ``M``.
    fidelity_clamp : float
        ``1 - F`` is floored at this value inside the cost.
    n_samples : int, optional
        Time samples for the search objective; see :func:`search_samples`.
    """

    d: int
    n_channels: int
    n_harmonics: Optional[int] = None
    symmetric: bool = False
    amp_max: float = 4 * np.pi
    init_amp: Optional[float] = None
    total_modes: int = DEFAULT_MODES
    fidelity_clamp: float = SYNTH_CLAMP
    n_samples: Optional[int] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if not self.d <= self.n_channels <= self.total_modes:
            raise ValidationError(
                f"need d <= B <= M, got d={self.d}, B={self.n_channels}, M={self.total_modes}")
        p = self.d - 1 if self.n_harmonics is None else int(self.n_harmonics)
        if p < 0:
            raise ValidationError("n_harmonics must be >= 0")
        if not self.amp_max > 0:
            raise ValidationError("amp_max must be positive")
        if not 0 < self.fidelity_clamp < 1:
            raise ValidationError("fidelity_clamp must lie in (0, 1)")
        object.__setattr__(self, "n_harmonics", p)
        if self.init_amp is None:
            object.__setattr__(self, "init_amp", float(min(self.amp_max, self.d / 2)))
        if self.n_samples is None:
            object.__setattr__(self, "n_samples",
                               search_samples(p, self.amp_max, self.total_modes))

    @property
    def lattice(self):
        return ModeLattice(self.d, self.total_modes)

    @property
    def n_params(self):
        return self.n_channels + (2 if self.symmetric else 4) * self.n_harmonics

    def bounds(self):
        """``(lower, upper, periodic)`` arrays for the parameter vector."""
        lower = np.zeros(self.n_params)
        upper = np.full(self.n_params, TWO_PI)
        periodic = np.ones(self.n_params, dtype=bool)
        amp = self.n_channels + 2 * np.arange((self.n_params - self.n_channels) // 2)
        upper[amp] = self.amp_max
        periodic[amp] = False
        return lower, upper, periodic


@dataclass(frozen=True)
class PsoSettings:
    """Swarm hyperparameters.

    ``polish`` runs a bounded Nelder-Mead refinement from each restart's swarm
    best; ``stall_iterations`` stops a restart early once the swarm best has
    stopped improving.
    """

    swarm_size: int = 100
    iterations: int = 2000
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    velocity_clamp: float = 0.2
    restarts: int = 8
    seed: int = 0
    stall_iterations: Optional[int] = 300
    polish: bool = True

    def __post_init__(self):
        for name in ("swarm_size", "iterations", "restarts"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        for name in ("inertia", "cognitive", "social", "velocity_clamp"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass
class SynthesisResult:
    config: QfpConfig
    metrics: GateMetrics
    search_space: SearchSpace
    pso: PsoSettings
    iterations_used: int
    wall_time: float
    trace: np.ndarray = field(default=None, repr=False)
    restart_costs: List[float] = field(default_factory=list)

    @property
    def vector(self):
        return encode(self.config, self.search_space)


@dataclass
class SweepResult:
    d: int
    points: list
    min_bandwidth: Optional[int]
    results: list = field(default_factory=list, repr=False)
    non_monotone: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Parameter codec and objective
# ---------------------------------------------------------------------------

def _split(x, space):
    b, p = space.n_channels, space.n_harmonics
    shaper = x[..., :b]
    eom1 = x[..., b:b + 2 * p]
    eom2 = None if space.symmetric else x[..., b + 2 * p:]
    return shaper, eom1, eom2


def decode(vector, space):
    """Parameter vector -> :class:`QfpConfig`."""
    x = np.asarray(vector, dtype=float)
    if x.shape != (space.n_params,):
        raise ValidationError(
            f"expected a parameter vector of length {space.n_params}, got shape {x.shape}")
    shaper, eom1, eom2 = _split(x, space)
    lat = space.lattice
    drive_a = RfDrive(eom1[0::2], eom1[1::2])
    drive_b = time_reverse(drive_a) if space.symmetric else RfDrive(eom2[0::2], eom2[1::2])
    return QfpConfig(drive_a, ShaperConfig.centered(shaper, lat), drive_b, lat)


def encode(config, space):
    """:class:`QfpConfig` -> parameter vector (inverse of :func:`decode`)."""
    if config.shaper.n_channels != space.n_channels:
        raise ValidationError("shaper channel count does not match the search space")
    parts = [np.asarray(config.shaper.phases, dtype=float)]
    drives = (config.drive_a,) if space.symmetric else (config.drive_a, config.drive_b)
    for drive in drives:
        if drive.n_harmonics != space.n_harmonics:
            raise ValidationError("drive harmonic count does not match the search space")
        pairs = np.empty(2 * drive.n_harmonics)
        pairs[0::2] = drive.amplitudes
        pairs[1::2] = drive.phases
        parts.append(pairs)
    return np.concatenate(parts)


def _transfer_from_vectors(x, space, n_samples):
    x = np.atleast_2d(x)
    shaper, eom1, eom2 = _split(x, space)
    lat = space.lattice
    spec_a = _spectra(eom1[:, 0::2], eom1[:, 1::2], n_samples)
    if space.symmetric:
        # time reversal maps c[q] -> c[-q]
        spec_b = np.roll(spec_a[:, ::-1], 1, axis=1)
    else:
        spec_b = _spectra(eom2[:, 0::2], eom2[:, 1::2], n_samples)
    phi = np.zeros((len(x), lat.total_modes))
    off = ShaperConfig.centered_offset(space.n_channels, lat)
    phi[:, off:off + space.n_channels] = shaper
    return _transfer_batch(spec_a, spec_b, phi, lat)


def _batch_cost(x, space, target, n_samples=None):
    w = _transfer_from_vectors(x, space, n_samples or space.n_samples)
    fidelity, success = _metrics_batch(w, target)
    out = cost(fidelity, success, space.fidelity_clamp)
    return np.where(success > 0, out, np.inf)


def objective(vector, space, target=None):
    """Cost of one parameter vector against the DFT (or ``target``)."""
    x = np.asarray(vector, dtype=float)
    if x.shape != (space.n_params,):
        raise ValidationError(
            f"expected a parameter vector of length {space.n_params}, got shape {x.shape}")
    target = dft_matrix(space.d) if target is None else np.asarray(target, dtype=complex)
    return float(_batch_cost(x[None], space, target)[0])


def final_metrics(config, fidelity_clamp=SYNTH_CLAMP, target=None):
    """Metrics of a design at the reference time sampling."""
    w = assemble_transfer(config, n_samples=DEFAULT_SAMPLES, strict=False)
    return gate_metrics(w, target, clamp=fidelity_clamp)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def _wrap_vector(x, space):
    lower, upper, periodic = space.bounds()
    span = upper - lower
    out = np.where(periodic, np.mod(x - lower, span) + lower, np.clip(x, lower, upper))
    return np.where(periodic & (out >= upper), lower, out)


def _polish(x0, f0, space, target):
    lower, upper, periodic = space.bounds()
    bounds = [(None, None) if p else (lo, hi) for lo, hi, p in zip(lower, upper, periodic)]
    n = len(x0)
    res = minimize(lambda x: float(_batch_cost(x[None], space, target)[0]), x0,
                   method="Nelder-Mead", bounds=bounds,
                   options={"adaptive": True, "xatol": 1e-10, "fatol": 1e-13,
                            "maxfev": 40 * n * n})
    x = _wrap_vector(res.x, space)
    f = float(_batch_cost(x[None], space, target)[0])
    return (x, f) if f < f0 else (x0, f0)


def _run_restart(space, settings, seed_seq, target):
    rng = np.random.default_rng(seed_seq)
    lower, upper, periodic = space.bounds()
    init = lower + rng.random((settings.swarm_size, space.n_params)) * (upper - lower)
    amp = ~periodic
    init[:, amp] = rng.random((settings.swarm_size, int(amp.sum()))) * space.init_amp
    out = particle_swarm(
        lambda x: _batch_cost(x, space, target), lower, upper, periodic,
        swarm_size=settings.swarm_size, iterations=settings.iterations,
        inertia=settings.inertia, cognitive=settings.cognitive,
        social=settings.social, velocity_clamp=settings.velocity_clamp,
        stall_iterations=settings.stall_iterations, init=init, rng=rng)
    x, f = out.x, out.fun
    if settings.polish:
        x, f = _polish(x, f, space, target)
    return x, f, out.trace, out.n_iter


def pso_optimize(space, settings=None, target=None, n_jobs=1):
    """Search for the design minimizing the cost.

    Runs ``settings.restarts`` independent swarms, each seeded from its own
    child of ``settings.seed``, and keeps the best.  Results do not depend on
    ``n_jobs``.

    Returns
    -------
    SynthesisResult
        ``metrics`` are recomputed at the reference sampling with the search
        space's fidelity clamp; ``trace`` is the best restart's per-iteration
        swarm-best cost.
    """
    settings = PsoSettings() if settings is None else settings
    target = dft_matrix(space.d) if target is None else np.asarray(target, dtype=complex)
    start = time.perf_counter()

    if space.n_params == 0 or (space.d == 1 and space.n_harmonics == 0):
        # d = 1: the zero vector is already the identity
        x = np.zeros(space.n_params)
        config = decode(x, space)
        return SynthesisResult(
            config, final_metrics(config, space.fidelity_clamp, target), space,
            settings, 0, time.perf_counter() - start,
            np.array([objective(x, space, target)]), [objective(x, space, target)])

    children = np.random.SeedSequence(settings.seed).spawn(settings.restarts)
    runs = Parallel(n_jobs=n_jobs)(
        delayed(_run_restart)(space, settings, child, target) for child in children)
    costs = [f for _, f, _, _ in runs]
    best = int(np.argmin(costs))
    x, _, trace, _ = runs[best]
    config = decode(x, space)
    return SynthesisResult(
        config=config,
        metrics=final_metrics(config, space.fidelity_clamp, target),
        search_space=space,
        pso=settings,
        iterations_used=int(sum(n for _, _, _, n in runs)),
        wall_time=time.perf_counter() - start,
        trace=trace,
        restart_costs=costs,
    )


# ---------------------------------------------------------------------------
# Bandwidth sweep
# ---------------------------------------------------------------------------

def _round_sig(x, digits=3):
    return float(f"{x:.{digits}g}")


def min_bandwidth(points, digits=3):
    """Smallest ``B`` whose cost matches the grid best to ``digits`` significant digits.

    ``points`` is a sequence of ``(B, cost, ...)`` tuples; non-finite costs are
    ignored.
    """
    valid = [(b, c) for b, c, *_ in points if np.isfinite(c)]
    if not valid:
        return None
    best = _round_sig(min(c for _, c in valid), digits)
    return min(b for b, c in valid if _round_sig(c, digits) == best)


def bandwidth_sweep(d, b_grid, settings=None, n_jobs=1, **space_kw):
    """Optimize at each shaped-channel count and locate the minimum bandwidth.

    Extra keyword arguments go to :class:`SearchSpace`.  A failing grid point
    is recorded in ``errors`` and skipped; the sweep carries on.
    """
    b_grid = [int(b) for b in b_grid]
    if b_grid != sorted(b_grid):
        raise ValidationError("B grid must be ascending")
    if any(b < d for b in b_grid):
        raise ValidationError(f"every B in the grid must be >= d={d}")
    points, results, errors = [], [], {}
    for b in b_grid:
        try:
            res = pso_optimize(SearchSpace(d, b, **space_kw), settings, n_jobs=n_jobs)
        except Exception as exc:  # keep sweeping; the point is reported
            errors[b] = f"{type(exc).__name__}: {exc}"
            points.append((b, float("nan"), float("nan"), float("nan")))
            results.append(None)
            continue
        m = res.metrics
        points.append((b, m.cost, m.fidelity, m.success_prob))
        results.append(res)
    costs = [c for _, c, _, _ in points]
    non_monotone = [points[i][0] for i in range(1, len(points))
                    if np.isfinite(costs[i]) and np.isfinite(costs[i - 1])
                    and costs[i] > costs[i - 1] + 1e-3 * abs(costs[i - 1])]
    return SweepResult(d, points, min_bandwidth(points), results, non_monotone, errors)


# ---------------------------------------------------------------------------
# Single-modulator ceiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleEomCheck:
    d: int
    success_prob: float
    fidelity: float
    bound: float
    feasible: bool
    drive: RfDrive = None


def _single_eom_matrices(x, d, n_harmonics, total_modes, n_samples):
    """``diag(out) T diag(in)`` for a batch of single-EOM parameter vectors."""
    x = np.atleast_2d(x)
    eom = x[:, :2 * n_harmonics]
    spec = _spectra(eom[:, 0::2], eom[:, 1::2], n_samples)
    q = (np.arange(d)[:, None] - np.arange(d)[None, :]) % n_samples
    t = spec[:, q]
    phase_in = x[:, 2 * n_harmonics:2 * n_harmonics + d]
    phase_out = x[:, 2 * n_harmonics + d:]
    return np.exp(1j * phase_out)[:, :, None] * t * np.exp(1j * phase_in)[:, None, :]


def single_eom_bound_check(d, settings=None, n_harmonics=None, fidelity_floor=0.9999,
                           amp_max=4 * np.pi, n_jobs=1):
    """Best success probability of a lone modulator at high DFT fidelity.

    The modulator sits between lossless phase masks on the ``d`` input and
    output bins (they fix the relative phases the DFT needs but cannot change
    the success probability).  The search maximizes the success probability
    subject to ``F >= fidelity_floor``.

    Returns
    -------
    SingleEomCheck
        ``bound`` is ``d / (2 d - 1)``, the largest success probability any
        single modulator can reach while mixing the bins equally.
    """
    if d < 2:
        raise ValidationError("single-EOM check needs d >= 2")
    settings = PsoSettings() if settings is None else settings
    p = 2 * d if n_harmonics is None else int(n_harmonics)
    n_samples = search_samples(p, amp_max)
    target = dft_matrix(d)
    n_params = 2 * p + 2 * d
    lower = np.zeros(n_params)
    upper = np.full(n_params, TWO_PI)
    periodic = np.ones(n_params, dtype=bool)
    upper[0:2 * p:2] = amp_max
    periodic[0:2 * p:2] = False
    log_floor = np.log10(1.0 - fidelity_floor)

    def penalized(x):
        w = _single_eom_matrices(x, d, p, DEFAULT_MODES, n_samples)
        fid, succ = _metrics_batch(w, target)
        infid = np.log10(np.maximum(1.0 - fid, 1e-16))
        return -succ + 10.0 * np.maximum(0.0, infid - log_floor)

    def run(seed_seq):
        rng = np.random.default_rng(seed_seq)
        init = lower + rng.random((settings.swarm_size, n_params)) * (upper - lower)
        init[:, 0:2 * p:2] = rng.random((settings.swarm_size, p)) * 2.0
        out = particle_swarm(
            penalized, lower, upper, periodic, swarm_size=settings.swarm_size,
            iterations=settings.iterations, inertia=settings.inertia,
            cognitive=settings.cognitive, social=settings.social,
            velocity_clamp=settings.velocity_clamp,
            stall_iterations=settings.stall_iterations, init=init, rng=rng)
        return out.x, out.fun

    children = np.random.SeedSequence(settings.seed).spawn(settings.restarts)
    runs = Parallel(n_jobs=n_jobs)(delayed(run)(c) for c in children)
    x, _ = min(runs, key=lambda r: r[1])
    w = _single_eom_matrices(x, d, p, DEFAULT_MODES, DEFAULT_SAMPLES)[0]
    m = gate_metrics(w, target)
    drive = RfDrive(x[0:2 * p:2], x[1:2 * p:2])
    return SingleEomCheck(d, m.success_prob, m.fidelity, d / (2 * d - 1),
                          m.fidelity >= fidelity_floor, drive)
