"""Constrained Lagrangian dynamics on Lie groups in quasi-velocities.

Simulates nonholonomic trajectories, transports vakonomic multipliers and
runs trajectory-level comparisons between the two constrained dynamics.
"""
from .chaplygin import (ChaplyginData, b_tensor, bl_derivative, chaplygin_cross_check,
                        curvature, fl_derivative, vak_variation_ode_rhs)
from .comparison import (CRITERIA, ComparisonReport, GeneratorPair,
                         check_nh_is_vak_integral, check_nh_is_vak_multiplier,
                         check_unconstrained, check_vak_is_nh, generate_vak_pairs,
                         holonomic_variation_check, splitting_independence)
from .dynamics import (BACKEND, MultiplierPath, SystemSpec, Trajectory, el_covector,
                       energy, integrate_nonholonomic, nh_accel, solve_multiplier,
                       vak_residual, write_trajectory_csv)
from .errors import (ContractError, DivergenceError, NhvakError, NumericalError,
                     RegularityError)
from .frame import (FrameField, StatePoint, bracket_coefficients_fd,
                    frame_consistency_residual, identity_frame, push_velocity,
                    variation_lift)
from .lagrangian import LagrangianSpec, d_dq, d_dv, fd_gradient_check, pullback_dh
from .lie import (ConstraintSplitting, LieAlgebraSpec, ad_star, bracket,
                  change_complement, jacobi_residual, project)
from .systems import (CarriageParams, GenHeisenbergParams, UnicycleParams,
                      build_carriage, build_from_registry, build_generalized_heisenberg,
                      build_heisenberg, build_holonomic_demo, build_unicycle,
                      carriage_l_for_unit_xy, polynomial_gen_heisenberg)

__version__ = "0.1.0"
