"""Diffeomorphic registration of discrete measures driven by entropic OT losses."""

from .errors import ConfigError, NumericAbort, ParseError
from .geometry import (AffineTransform, PointCloud, TriangleMesh,
                       load_mesh_ply, load_point_cloud, load_trajectory,
                       normalize, sample_blobs_2d, sample_mesh_surface,
                       sample_sphere, save_point_cloud, save_trajectory)
from .kernels import KernelConfig, gauss_kernel, quadratic_energy, velocity_field
from .lddmm import (RegistrationResult, TrajectoryBundle, apply_deformation,
                    energy_gdm, energy_shooting, grad_gdm, grad_shooting,
                    integrate_trajectories, invert_deformation, shoot)
from .optim import MinimizeResult, OptimizerConfig, minimize
from .sinkhorn import (DualPotentials, LossConfig, LossEvaluator,
                       brute_force_entropic_cost, entropic_cost,
                       loss_gradient_points, loss_value, mmd_sq,
                       sinkhorn_divergence, sinkhorn_potentials,
                       symmetric_potential)
from .harness import (RateConfig, RateReport, RegistrationConfig,
                      config_from_dict, make_cloud, radius_of_gyration,
                      rate_study, register, warmstart_grid)

__version__ = "0.1.0"
