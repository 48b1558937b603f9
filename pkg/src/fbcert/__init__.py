"""Data-driven forward-backward splitting with finite-sample certificates."""

__version__ = "0.1.0"

from .operators import (BoxHalfspaceSet, BoxSet, OperatorConstants, contraction_factor,
                        estimate_constants, normal_cone_distance, project,
                        project_box, project_box_halfspace)
from .splitting import (Dataset, DivergenceError, Hypothesis, Trajectory, analytic_loss_bound,
                        approx_operator,
                        empirical_risk, estimate_loss_bound, fb_run_data, fb_step_exact,
                        loss)
from .certificates import (Certificate, beta_coco, beta_strong, epsilon_zero_coco,
                           epsilon_zero_strong, fixed_point_residual, generalization_bound)
