"""coexlab: stochastic spatial models of species coexistence.

Exact continuous-time lattice simulation for a zoo of interacting particle
systems, the matching mean-field ODE analysis (fixed points, stability,
invasion conditions, cyclic invariants), and 1-D reaction-diffusion
traveling-wave tools.
"""

from .lattice import (TorusGeometry, DispersalKernel, StateGrid, CountGrid,
                      RandomStream, box_kernel, nearest_neighbor_kernel,
                      neighbor_fractions, square_fraction)
from .models import build_model, REGISTRY
from .engine import SimClock, StirringSpec, step, run_until, run_fast_trace
from .meanfield import (OdeSystem, integrate, find_fixed_points,
                        invasion_check, cyclic_equilibrium, cyclic_system,
                        check_lyapunov)
from .rdpde import (SexualReaction, CatalystReaction, PdeState,
                    front_initial_state, integrate_pde, speed_sign,
                    estimate_front_speed, critical_beta,
                    catalyst_fixed_points)
from .harness import (ExperimentConfig, parse_config, format_config,
                      run_experiment, detect_coexistence, sweep,
                      emit_csv, emit_snapshot)

__version__ = "0.1.0"
