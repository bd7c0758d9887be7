"""Frequency-bin DFT gates on an EOM / pulse shaper / EOM processor.

Synthesis of d-point discrete Fourier transform gates by particle swarm
search, biphoton correlation modelling, and Bayesian entanglement
quantification from coincidence counts.
"""

__version__ = "0.1.0"

from .biphoton import (BiphotonState, CountsTable, JointDistribution,
                       joint_distribution, maximally_entangled, prepare_phi_state,
                       sample_counts)
from .estimators import DFTGateSynthesizer, EntropicBoundEstimator
from .exceptions import (DegenerateInputError, GeometryError, NumericalError,
                         QfpError, TruncationError, ValidationError)
from .inference import entropic_bound_posterior, log_negativity
from .qfp import (GateMetrics, ModeLattice, QfpConfig, RfDrive, ShaperConfig,
                  assemble_transfer, cost, dft_matrix, eom_coefficients, gate_metrics)
from .synth import (PsoSettings, SearchSpace, bandwidth_sweep, pso_optimize,
                    single_eom_bound_check)
