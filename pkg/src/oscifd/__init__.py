"""Filtered finite difference solvers for the semiclassical cubic NLS

    i eps u_t + eps^2/2 u_xx = lam eps |u|^2 u,   u(0, x) = exp(i kappa x / eps) a0(x)

on a periodic interval: filtered leapfrog and filtered Crank-Nicolson steppers,
a planner for the consistency relation between time step and mesh width,
conservation diagnostics, a Strang-splitting spectral reference and the exact
geometric-optics dominant term.
"""
from .core import (ConstantEnvelope, Discretization, FilterValues, GaussianEnvelope,
                   GridFunction, PeriodicityWarning, PhysicalSetup, TabulatedEnvelope,
                   envelope_from_dict, nodes, phi, psi, sample_initial_data, sinc, tanc)
from .diagnostics import (ConservationSeries, conservation_series, discrete_energy,
                          discrete_mass, fit_order, max_error, two_level_wiener_norm,
                          wiener_norm)
from .errors import *  # noqa: F401,F403
from .modulation import (DefectSample, Envelope, defect_cn, defect_leapfrog,
                         dominant_grid_function, dominant_term, envelope_eval)
from .planner import (PlanRequest, PlanResult, StabilityReport, one_step_form, plan,
                      plan_direct, solve_alpha, solve_beta, stability_report)
from .schemes import (CnConfig, RunResult, TwoLevelState, bootstrap, cn_one_step, cn_step,
                      leapfrog_step, run)
from .spectral import run_reference, strang_step

__version__ = "0.1.0"
