"""Spectral-Galerkin tools for the controlled Chafee-Infante equation.

    u_t = u_xx + lam * u * (1 - u**2) + b * (u - C_h[u]),   u(0) = u(pi) = 0

States are sine-coefficient vectors (:class:`SpectralField`); the
convolution control ``C_h`` is a diagonal filter on those coefficients
(:class:`FilterKernel`).
"""

__version__ = "0.1.0"

from .errors import (
    BracketFailure,
    Blowup,
    ChafeeError,
    CompositionError,
    DegenerateWindow,
    IntegrationBlowup,
    InvasiveControl,
    NoBranch,
    NoConvergence,
    TruncationError,
)
from .spectral import (
    SpectralField,
    GridSamples,
    analyze,
    cube,
    project_vertex,
    reflect,
    sobolev_norm,
    synthesize,
    vertex_residual,
)
from .control import (
    ControlParams,
    FilterKernel,
    apply_filter,
    compose,
    control_term,
    identity_kernel,
    is_member_H,
    reflection_kernel,
    selective_kernel,
    theorem_kernel,
)
from .equilibria import (
    EquilibriumBranch,
    ShootingState,
    bifurcation_value,
    continue_branch,
    count_zeros,
    find_equilibrium,
    refine_newton,
    shoot,
)
from .stability import (
    LinearizationReport,
    Verdict,
    assemble,
    spectrum,
    theorem_spectrum,
    verdict,
)
from .timestepping import SimConfig, Trajectory, measure_decay_rate, simulate, step
