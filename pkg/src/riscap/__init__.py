"""Capacity-optimal power and RIS-area allocation over sparse beamspace channels."""

from .alloc import (AllocationResult, SolverConfig, db_to_linear, joint_power_dir_ris_alloc_1,
                    joint_power_dir_ris_alloc_2, joint_power_ris_alloc_1,
                    joint_power_ris_alloc_2, mimo_vs_reflection_sweep, opt_dir_ris_rank,
                    opt_ris_rank)
from .channel import (ArrayGeometry, PathDescriptor, SparseSVD, VirtualChannel,
                      build_virtual_channel, dirichlet_kernel, nonzero_tx_beams, sparse_svd)
from .direct import LinkBudget, PowerAllocation, build_precoder, direct_link_capacity, waterfill
from .reflection import (BeamPair, RISEncoding, best_rank1_reflection, pair_beams,
                         quantize_phases, synthesize_phase_vector, verify_reflection_gain)

__version__ = "0.1.0"
