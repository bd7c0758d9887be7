"""Two-photon frequency-bin states measured through parallel gates."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, ValidationError

__all__ = [
    "BiphotonState", "JointDistribution", "CountsTable", "prepare_phi_state",
    "maximally_entangled", "joint_distribution", "sample_counts",
]


class BiphotonState:
    """Normalized ``d x d`` amplitude table ``psi[k, l]`` (idler ``k``, signal ``l``)."""

    def __init__(self, amplitudes, atol=1e-12):
        amps = np.array(amplitudes, dtype=complex)
        if amps.ndim != 2 or amps.shape[0] != amps.shape[1]:
            raise ValidationError(f"amplitude table must be square, got shape {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > atol:
            raise ValidationError(f"state norm is {norm!r}, expected 1")
        amps.setflags(write=False)
        self.amplitudes = amps

    @classmethod
    def from_unnormalized(cls, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(amps) ** 2))
        if norm == 0:
            raise DegenerateInputError("state has no weight")
        return cls(amps / norm)

    @property
    def d(self):
        return self.amplitudes.shape[0]

    def ket(self):
        """State vector in the ``|k>_I |l>_S`` product basis (idler index major)."""
        return self.amplitudes.reshape(-1)

    def density_matrix(self):
        v = self.ket()
        return np.outer(v, v.conj())

    def __repr__(self):
        return f"BiphotonState(d={self.d})"


@dataclass
class JointDistribution:
    """Joint outcome probabilities ``probs[m_I, n_S]``.

    ``escape_mass`` is the probability that at least one photon left the
    computational bins.
    """

    probs: np.ndarray
    escape_mass: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < 0):
            raise ValidationError("probabilities must be non-negative")

    @classmethod
    def from_probs(cls, probs):
        probs = np.asarray(probs, dtype=float)
        return cls(probs, max(0.0, 1.0 - float(probs.sum())))

    @property
    def d(self):
        return self.probs.shape[0]


@dataclass
class CountsTable:
    """Integer coincidence counts ``counts[m_I, n_S]``."""

    counts: np.ndarray
    model: str = "multinomial"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError(f"counts table must be square, got shape {counts.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0) \
                or np.any(counts != np.round(counts)):
            raise ValidationError("counts must be non-negative integers")
        self.counts = counts.astype(np.int64)

    @property
    def d(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())


def prepare_phi_state(phi):
    """``(|0,2> + e^{i phi} |1,1> + e^{2 i phi} |2,0>) / sqrt(3)``."""
    amps = np.zeros((3, 3), dtype=complex)
    for k in range(3):
        amps[k, 2 - k] = np.exp(1j * k * phi) / np.sqrt(3)
    return BiphotonState(amps)


def maximally_entangled(d):
    """Uniform-phase anti-diagonal state ``sum_k |k, d-1-k> / sqrt(d)``."""
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    amps = np.zeros((d, d), dtype=complex)
    amps[np.arange(d), d - 1 - np.arange(d)] = 1.0 / np.sqrt(d)
    return BiphotonState(amps)


def joint_distribution(state, w_idler, w_signal):
    """Outcome distribution after applying ``w_idler`` and ``w_signal``.

    ``p[m, n] = |sum_{k,l} W_I[m, k] W_S[n, l] psi[k, l]|^2``
    """
    w_i = np.asarray(w_idler, dtype=complex)
    w_s = np.asarray(w_signal, dtype=complex)
    d = state.d
    if w_i.shape != (d, d) or w_s.shape != (d, d):
        raise ValidationError(
            f"gates must be {d}x{d}, got {w_i.shape} and {w_s.shape}")
    out = w_i @ state.amplitudes @ w_s.T
    probs = np.abs(out) ** 2
    return JointDistribution(probs, max(0.0, 1.0 - float(probs.sum())))


def sample_counts(dist, model="multinomial", n=None, rate=None, dwell=1.0, seed=None):
    """Draw a synthetic coincidence table.

    Parameters
    ----------
    dist : JointDistribution
    model : {"multinomial", "poisson"}
        ``multinomial`` draws ``n`` coincidences post-selected on the
        computational bins.  ``poisson`` draws each cell independently with
        mean ``rate * dwell * p[m, n]``, so escaped probability lowers the
        totals.
    seed : int or numpy.random.Generator, optional
    """
    rng = np.random.default_rng(seed)
    probs = np.asarray(dist.probs, dtype=float)
    total = float(probs.sum())
    if not total > 0:
        raise DegenerateInputError("distribution has zero total probability")
    if model == "multinomial":
        if n is None or int(n) < 0:
            raise ValidationError("multinomial sampling needs a non-negative n")
        draws = rng.multinomial(int(n), (probs / total).ravel())
        return CountsTable(draws.reshape(probs.shape), "multinomial", {"n": int(n)})
    if model == "poisson":
        if rate is None or rate < 0 or dwell < 0:
            raise ValidationError("poisson sampling needs non-negative rate and dwell")
        draws = rng.poisson(rate * dwell * probs)
        return CountsTable(draws, "poisson", {"rate": float(rate), "dwell": float(dwell)})
    raise ValidationError(f"unknown dwell model {model!r}")
