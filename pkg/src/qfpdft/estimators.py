"""scikit-learn style wrappers.

``DFTGateSynthesizer`` learns a processor design in ``fit`` and applies the
resulting transfer matrix to input bin amplitudes in ``transform``, so it can
sit in a Pipeline next to other transformers.  ``EntropicBoundEstimator``
fits the Bayesian entanglement bound to a pair of coincidence tables.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .biphoton import CountsTable
from .inference import DEFAULT_POSTERIOR_SAMPLES, entropic_bound_posterior
from .qfp import DEFAULT_MODES, assemble_transfer
from .synth import (MIN_BANDWIDTH_TABLE, SYNTH_CLAMP, PsoSettings, SearchSpace,
                    pso_optimize)

__all__ = ["DFTGateSynthesizer", "EntropicBoundEstimator", "default_channels"]


def default_channels(d):
    """Minimum-bandwidth channel count for ``d``; ``4 d`` outside the table."""
    return MIN_BANDWIDTH_TABLE.get(d, 4 * d)


class DFTGateSynthesizer(TransformerMixin, BaseEstimator):
    """Synthesize a ``d``-point DFT on an EOM / pulse shaper / EOM processor.

    Parameters
    ----------
    d : int
        DFT dimension.
    n_channels : int, optional
        Shaped channels; defaults to :func:`default_channels`.
    n_harmonics : int, optional
        RF harmonics per modulator; defaults to ``d - 1``.
    symmetric : bool
        Tie the second drive to the time reverse of the first.
    swarm_size, iterations, restarts : int
        Swarm budget.
    polish : bool
        Refine each restart's best with Nelder-Mead.
    fidelity_clamp : float
        Infidelity floor inside the cost.
    total_modes : int
        Lattice size.
    random_state : int
        Seed for the swarm.
    n_jobs : int
        Restarts evaluated in parallel; does not change the result.

    Attributes
    ----------
    result_ : SynthesisResult
    config_ : QfpConfig
    metrics_ : GateMetrics
    transfer_matrix_ : ndarray of shape (d, d)
    """

    def __init__(self, d=3, n_channels=None, n_harmonics=None, symmetric=False,
                 swarm_size=100, iterations=2000, restarts=8, polish=True,
                 fidelity_clamp=SYNTH_CLAMP, total_modes=DEFAULT_MODES,
                 random_state=0, n_jobs=1):
        self.d = d
        self.n_channels = n_channels
        self.n_harmonics = n_harmonics
        self.symmetric = symmetric
        self.swarm_size = swarm_size
        self.iterations = iterations
        self.restarts = restarts
        self.polish = polish
        self.fidelity_clamp = fidelity_clamp
        self.total_modes = total_modes
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _search_space(self):
        b = default_channels(self.d) if self.n_channels is None else self.n_channels
        return SearchSpace(self.d, b, self.n_harmonics, self.symmetric,
                           total_modes=self.total_modes,
                           fidelity_clamp=self.fidelity_clamp)

    def fit(self, X=None, y=None):
        """Run the swarm search.  ``X`` and ``y`` are ignored."""
        settings = PsoSettings(swarm_size=self.swarm_size, iterations=self.iterations,
                               restarts=self.restarts, polish=self.polish,
                               seed=self.random_state)
        self.result_ = pso_optimize(self._search_space(), settings, n_jobs=self.n_jobs)
        self.config_ = self.result_.config
        self.metrics_ = self.result_.metrics
        self.transfer_matrix_ = assemble_transfer(self.config_, strict=False)
        self.n_features_in_ = self.d
        return self

    def transform(self, X):
        """Output bin amplitudes for rows of input amplitudes ``X`` (n, d)."""
        check_is_fitted(self, "transfer_matrix_")
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if X.shape[1] != self.d:
            raise ValueError(f"X has {X.shape[1]} bins, expected {self.d}")
        return X @ self.transfer_matrix_.T

    def score(self, X=None, y=None):
        """Negated cost, so larger is better."""
        check_is_fitted(self, "metrics_")
        return -self.metrics_.cost


class EntropicBoundEstimator(BaseEstimator):
    """Posterior mean/std of the entropic lower bound on distillable entanglement.

    ``fit`` takes the logical-basis counts as ``X`` and the Fourier-basis
    counts as ``y``, both ``d x d``.
    """

    def __init__(self, n_samples=DEFAULT_POSTERIOR_SAMPLES, random_state=0):
        self.n_samples = n_samples
        self.random_state = random_state

    @staticmethod
    def _counts(table):
        if isinstance(table, CountsTable):
            table = table.counts
        arr = check_array(table, dtype=np.float64, ensure_min_samples=1)
        if np.any(arr < 0) or np.any(arr != np.round(arr)):
            raise ValueError("counts must be non-negative integers")
        if arr.shape[0] != arr.shape[1]:
            raise ValueError(f"counts table must be square, got {arr.shape}")
        return arr.astype(np.int64)

    def fit(self, X, y):
        logical, fourier = self._counts(X), self._counts(y)
        if logical.shape != fourier.shape:
            raise ValueError("logical and Fourier tables differ in shape")
        d = logical.shape[0]
        self.summary_ = entropic_bound_posterior(logical, fourier, d, self.n_samples,
                                                 self.random_state)
        self.mean_ = self.summary_.mean
        self.std_ = self.summary_.std
        self.n_features_in_ = d
        return self
