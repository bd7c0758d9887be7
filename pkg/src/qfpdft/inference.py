"""Entanglement quantification from two-basis coincidence data.

The entropic witness lower-bounds distillable entanglement by
``log2 d - H(I|S)_logical - H(I|S)_fourier``.  Each basis table gets an
independent flat-Dirichlet posterior, sampled exactly through normalized
Gamma variates.  The log-negativity gives the matching upper bound when a
density matrix is available.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .biphoton import CountsTable, prepare_phi_state
from .exceptions import ValidationError

__all__ = [
    "PosteriorSummary", "entropy_bits", "conditional_entropy",
    "dirichlet_posterior", "entropic_bound_posterior", "partial_transpose",
    "log_negativity", "state_fidelity", "validate_density_matrix",
]

DEFAULT_POSTERIOR_SAMPLES = 2 ** 14
_CHUNK = 4096


@dataclass
class PosteriorSummary:
    quantity: str
    mean: float
    std: float
    n_samples: int
    seed: int
    flags: list = field(default_factory=list)

    def to_record(self):
        return asdict(self)


def entropy_bits(p, axis=-1):
    """Shannon entropy in bits with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=axis)


def conditional_entropy(p, d):
    """``H(I|S) = H(I,S) - H(S)`` in bits.

    Parameters
    ----------
    p : array_like, shape (..., d*d)
        Flattened joint distributions ``(p_00, p_01, ..., p_{d-1,d-1})`` with
        the idler index first.  Leading axes are batch dimensions.
    d : int
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != d * d:
        raise ValidationError(f"expected {d * d} probabilities, got {p.shape[-1]}")
    joint = p.reshape(p.shape[:-1] + (d, d))
    signal = joint.sum(axis=-2)
    return entropy_bits(p) - entropy_bits(signal)


def dirichlet_posterior(counts, n_samples, rng):
    """Draws from ``Dir(counts + 1)``, shape ``(n_samples, counts.size)``."""
    alpha = np.asarray(counts, dtype=float).ravel() + 1.0
    g = rng.standard_gamma(alpha, size=(n_samples, alpha.size))
    return g / g.sum(axis=1, keepdims=True)


def _as_counts(table):
    return table.counts if isinstance(table, CountsTable) else np.asarray(table)


def entropic_bound_posterior(counts_logical, counts_dft, d,
                             n_samples=DEFAULT_POSTERIOR_SAMPLES, seed=0):
    """Posterior of the entropic distillable-entanglement bound (ebits).

    Draws are made in fixed-size chunks, each from its own child of ``seed``,
    so results depend only on ``(counts, n_samples, seed)``.
    """
    logical = _as_counts(counts_logical)
    fourier = _as_counts(counts_dft)
    for name, tab in (("logical", logical), ("dft", fourier)):
        if tab.shape != (d, d):
            raise ValidationError(f"{name} counts must be {d}x{d}, got {tab.shape}")
        if np.any(tab < 0):
            raise ValidationError(f"{name} counts must be non-negative")
    if int(n_samples) < 1:
        raise ValidationError("n_samples must be >= 1")
    n_samples = int(n_samples)
    flags = [f"{name}-counts-empty" for name, tab in
             (("logical", logical), ("dft", fourier)) if tab.sum() == 0]

    n_chunks = -(-n_samples // _CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    values = []
    for i, child in enumerate(children):
        size = min(_CHUNK, n_samples - i * _CHUNK)
        rng = np.random.default_rng(child)
        p_log = dirichlet_posterior(logical, size, rng)
        p_dft = dirichlet_posterior(fourier, size, rng)
        values.append(np.log2(d) - conditional_entropy(p_log, d)
                      - conditional_entropy(p_dft, d))
    values = np.concatenate(values)
    return PosteriorSummary("entropic_ED_lower_bound_ebits", float(values.mean()),
                            float(values.std()), n_samples, int(seed), flags)


def validate_density_matrix(rho, d, atol=1e-10, eig_tol=1e-9):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d * d, d * d):
        raise ValidationError(f"density matrix must be {d * d}x{d * d}, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=atol):
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise ValidationError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValidationError("density matrix has negative eigenvalues")
    return rho


def partial_transpose(rho, d):
    """Transpose the idler (first) subsystem of a ``d x d`` bipartite operator."""
    r = np.asarray(rho).reshape(d, d, d, d)
    return r.transpose(2, 1, 0, 3).reshape(d * d, d * d)


def log_negativity(rho, d):
    """``log2`` of the trace norm of the idler partial transpose (ebits)."""
    rho = validate_density_matrix(rho, d)
    eig = np.linalg.eigvalsh(partial_transpose(rho, d))
    return float(np.log2(np.sum(np.abs(eig))))


def state_fidelity(rho, phi):
    """Overlap ``<phi|rho|phi>`` with the qutrit target state of phase ``phi``."""
    rho = validate_density_matrix(rho, 3)
    ket = prepare_phi_state(phi).ket()
    return float(np.real(ket.conj() @ rho @ ket))
