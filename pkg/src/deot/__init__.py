"""Decentralized entropic optimal transport with sketch-based kernel
approximation and exact communication accounting."""

from .measures import (CostSpec, DiscreteMeasure, KernelBlock, SampleSet,
                       cost, cost_matrix, gibbs_kernel, kernel_block,
                       load_csv, save_csv, uniform_measure)
from .dual import (DualState, OverflowGuardError, PairObjectiveTable,
                   assemble_distance, block_gradient_u, block_gradient_v,
                   coupling_from_duals, dual_objective, pair_objective,
                   pair_objective_table, surrogate_optimum)
from .sinkhorn import SinkhornResult, entropic_primal_value, sinkhorn_oracle
from .sketch import (GipParams, SharedRandomness, SignMatrix,
                     angle_estimate, approx_kernel_block,
                     draw_shared_randomness, estimate_lipschitz,
                     run_sketch_exchange, sign_matrix, sketch_error_bound)
from .netsim import (AgentPartition, CommLedger, ProtocolMatrix,
                     exact_kernel_blocks, protocol_generator,
                     protocol_mismatch, record_transfer, sample_pair,
                     sample_sources_for_target, sample_targets_for_source,
                     scatter, storage_protocol)
from .solver import (RunTrace, SolveResult, SolverConfig, averaged_iterates,
                     learning_rate, mrbcd_step, solve)
from .analysis import (ErrorDecomposition, MismatchBoundCheck, TheoryParams,
                       convergence_error_curve, decompose_errors,
                       default_gip_params, kernel_error_propagation,
                       kernel_gap_frobenius, protocol_mismatch_check)
from .adaptation import (AdaptationResult, barycentric_map, domain_adapt,
                         nn1_predict)
from .synthetic import gaussian, generate_synthetic, gmm, translated_blobs
from .estimator import BarycentricTransport, DecentralizedEOT

__version__ = "0.1.0"
