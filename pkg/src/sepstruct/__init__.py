"""Detect the level-I separability structure of unknown multi-qubit states.

The pipeline: perform (or simulate) informationally complete single-qubit
POVM measurements, reconstruct reduced density matrices by diluted
maximum likelihood, quantify entanglement across every bipartition,
filter spurious values against Monte-Carlo null distributions, and
compute the minimal set partitions consistent with what survived.
"""

from .measures import Bipartition, MeasureValue, concurrence, enumerate_bipartitions, negativity
from .partitions import (Constraint, MinimalSet, SetPartition, brute_force_minimal,
                         induced_partition, is_compatible, is_refinement, minimal_partitions,
                         prune_redundant)
from .povm import (EffectSet, OutcomeCounts, ShotRecord, born_probabilities, joint_effects,
                   load_shots, marginalize, sample_shots, save_shots, sic_effects)
from .qmath import (DensityMatrix, PureState, classically_correlated_state, depolarize,
                    fidelity, ginibre_random_state, partial_trace, partial_transpose,
                    smolin_state, tensor_product, w_state)
from .tomography import MLE_BACKEND, MleConfig, MleResult, log_likelihood, reconstruct
from .filtering import (EntanglementObservation, NullDistribution, NullKey, NullStore,
                        build_null, filter_observations, p_value)

__version__ = "0.1.0"
