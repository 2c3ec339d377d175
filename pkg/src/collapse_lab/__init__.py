"""collapse-lab: a numerical laboratory for collapsing torus-fibration flows."""

from .config import ConfigError, EXPERIMENTS, ExperimentConfig, load_config, \
    validate_config
from .experiments import REGISTRY, ExperimentReport, run_experiment, \
    write_report
from .flow import Diagnostics, FlowHistory, diagnostics_for, evolve, \
    relaxation_potential
from .geometry import ddbar, fiber_diameter, ma_density, ricci_form, \
    riemann_norm, trace_wrt
from .gke import GkeSolution, ParabolicResult, gke_residual, parabolic_gke, \
    solve_gke, twisted_einstein_residual
from .grids import GridSpec, HermitianField, PositivityError, ScalarField
from .models import (FiberFlowSpec, GkeTestbedSpec, ProductModelSpec,
                     SemiFlatSpec, density_F, fiber_constancy,
                     fiberwise_cy_potential, rescaling_check, semiflat_form,
                     semiflat_potential, weil_petersson)
from .rates import RateFit, rate_fit
from .timestep import StepControls, StiffnessError, integrate_lawson

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EXPERIMENTS", "ExperimentConfig", "load_config",
    "validate_config", "REGISTRY", "ExperimentReport", "run_experiment",
    "write_report", "Diagnostics", "FlowHistory", "diagnostics_for",
    "evolve", "relaxation_potential", "ddbar", "fiber_diameter",
    "ma_density", "ricci_form", "riemann_norm", "trace_wrt", "GkeSolution",
    "ParabolicResult", "gke_residual", "parabolic_gke", "solve_gke",
    "twisted_einstein_residual", "GridSpec", "HermitianField",
    "PositivityError", "ScalarField", "FiberFlowSpec", "GkeTestbedSpec",
    "ProductModelSpec", "SemiFlatSpec", "density_F", "fiber_constancy",
    "fiberwise_cy_potential", "rescaling_check", "semiflat_form",
    "semiflat_potential", "weil_petersson", "RateFit", "rate_fit",
    "StepControls", "StiffnessError", "integrate_lawson",
]
