"""The collapsing fiber flow and its monitor suite.

The evolving metric is a rigid base part with relaxing scale times a
shrinking torus fiber whose potential carries all the dynamics.  In mode
space the stiff part of the velocity is the rescaled quarter-Laplacian
minus the identity, whose antiderivative is elementary, so the march runs
in the exponential frame of :mod:`collapse_lab.timestep` and survives the
exponentially growing stiffness of the collapse.

Every monitor recorded here is dimensionless or has a stated limit:
volume ratios against the reference family, eigenvalue ratios of the
rescaled fiber metric, the blown-up potential, the trace defect against
the initial metric, the curvature norm of the product, and the graph
diameter of the shrinking fiber.
"""

import math
from dataclasses import dataclass

import numpy as np

from .grids import HermitianField, ScalarField
from .geometry import ddbar, fiber_diameter, ma_density, riemann_norm, trace_wrt
from .timestep import integrate_lawson


def relaxation_potential(a0, t):
    """Mean potential of the relaxation flow, in closed form.

    Solves d(phi)/dt = log(1 + (a0 - 1) exp(-t)) - phi from zero initial
    data; the integral has an elementary antiderivative.
    """
    c = a0 - 1.0
    if c == 0.0:
        return 0.0
    x = math.exp(t)
    upper = x * math.log1p(c / x) + c * math.log(x + c)
    lower = math.log1p(c) + c * math.log1p(c)
    return math.exp(-t) * (upper - lower)


def fiber_average(values, weight=None):
    vals = np.asarray(getattr(values, "values", values), dtype=float)
    if weight is None:
        return float(np.mean(vals))
    w = np.asarray(getattr(weight, "values", weight), dtype=float)
    return float(np.sum(vals * w) / np.sum(w))


def map_rhs(spec, t, potential):
    """Velocity of the potential at time t.

    Entries are NaN wherever the twisted fiber metric has left the positive
    cone, which the adaptive stepper treats as a rejected step.
    """
    g = spec.grid
    a_hat = 1.0 + (spec.a0 - 1.0) * math.exp(-t)
    twisted = (HermitianField.scaled_identity(g, spec.b0)
               + math.exp(t) * ddbar(potential))
    ratio = ma_density(twisted).values / spec.b0 ** g.complex_dim
    with np.errstate(invalid="ignore", divide="ignore"):
        logpart = np.log(ratio)
    return ScalarField(g, math.log(a_hat) + logpart - potential.values)


def normalized_potential(spec, t, potential):
    """Blow-up of the potential against its relaxing mean, exp(t)(phi - mean)."""
    shift = relaxation_potential(spec.a0, t)
    return ScalarField(spec.grid, math.exp(t) * (potential.values - shift))


class _SpectralFlowProblem:
    """Mode-space face of the flow for the exponential integrator."""

    def __init__(self, spec):
        self.spec = spec
        g = spec.grid
        ck = np.zeros(g.shape)
        for ax in range(2 * g.complex_dim):
            ck = ck + g.wavenumbers(ax) ** 2
        self.quarter_symbol = ck / 4.0

    def symbol_integral(self, t0, t1):
        sweep = (math.exp(t1) - math.exp(t0)) / self.spec.b0
        return -self.quarter_symbol * sweep - (t1 - t0)

    def nonlinear_modes(self, t, u):
        g = self.spec.grid
        phi = np.fft.ifftn(u).real
        rhs = map_rhs(self.spec, t, ScalarField(g, phi)).values
        lap = np.fft.ifftn(-self.quarter_symbol * u).real
        linear = (math.exp(t) / self.spec.b0) * lap - phi
        return np.fft.fftn(rhs - linear)

    def kaehler_margin(self, t, u):
        g = self.spec.grid
        phi = ScalarField(g, np.fft.ifftn(u).real)
        rel = (HermitianField.scaled_identity(g, 1.0)
               + (math.exp(t) / self.spec.b0) * ddbar(phi))
        return float(np.min(rel.min_eigenvalue()))


@dataclass(frozen=True)
class Diagnostics:
    """Monitor snapshot at one sample time."""

    t: float
    phi_sup: float
    dphi_sup: float
    volume_ratio_min: float
    volume_ratio_max: float
    base_trace: float
    eig_ratio_min: float
    eig_ratio_max: float
    vtilde_sup: float
    q_sup: float
    curvature_sup: float
    mode_low: float
    diameter: float


@dataclass(frozen=True)
class FlowState:
    t: float
    potential: ScalarField


@dataclass
class FlowHistory:
    spec: object
    states: list
    diagnostics: list
    accepted: int
    rejected: int


def diagnostics_for(spec, t, potential, with_diameter=True):
    """Evaluate the full monitor suite for one state of the flow."""
    g = spec.grid
    m = g.complex_dim
    p = spec.base_dim
    et = math.exp(t)
    a_hat = 1.0 + (spec.a0 - 1.0) * math.exp(-t)

    twisted = (HermitianField.scaled_identity(g, spec.b0)
               + et * ddbar(potential))
    twisted.require_positive("evolving fiber metric")

    vol = a_hat ** p * ma_density(twisted).values / spec.b0 ** m
    emin = twisted.min_eigenvalue() / spec.b0
    emax = twisted.max_eigenvalue() / spec.b0
    vt = normalized_potential(spec, t, potential).values

    # trace of the initial metric in the evolving one, rescaled to its limit
    start = spec.initial_form()
    qfield = np.log(math.exp(-t) * p * spec.a0 / a_hat
                    + trace_wrt(twisted, start).values) - vt

    fiber_curv = et * float(np.max(riemann_norm(twisted).values))
    curvature = math.hypot(math.sqrt(p) / a_hat, fiber_curv)

    low_index = (1,) + (0,) * (2 * m - 1)
    mode_low = abs(np.fft.fftn(vt)[low_index]) / vt.size

    diam = math.nan
    if with_diameter:
        diam = fiber_diameter(HermitianField(g, math.exp(-t) * twisted.values))

    return Diagnostics(
        t=float(t),
        phi_sup=potential.sup(),
        dphi_sup=map_rhs(spec, t, potential).sup(),
        volume_ratio_min=float(np.min(vol)),
        volume_ratio_max=float(np.max(vol)),
        base_trace=1.0 / a_hat,
        eig_ratio_min=float(np.min(emin)),
        eig_ratio_max=float(np.max(emax)),
        vtilde_sup=float(np.max(np.abs(vt))),
        q_sup=float(np.max(np.abs(qfield))),
        curvature_sup=curvature,
        mode_low=float(mode_low),
        diameter=diam,
    )


def evolve(spec, t_end, sample_times=None, controls=None, with_diameter=True):
    """March the flow to t_end and collect states plus monitors at samples."""
    if sample_times is None:
        count = max(2, int(round(2.0 * t_end)) + 1)
        sample_times = np.linspace(0.0, float(t_end), count)
    problem = _SpectralFlowProblem(spec)
    u0 = np.fft.fftn(spec.initial_potential.values)
    res = integrate_lawson(problem, u0, 0.0, float(t_end),
                           sample_times=sample_times, controls=controls)
    states, diags = [], []
    for s, modes in zip(res.sample_times, res.sample_modes):
        pot = ScalarField(spec.grid, np.fft.ifftn(modes).real)
        states.append(FlowState(t=s, potential=pot))
        diags.append(diagnostics_for(spec, s, pot, with_diameter=with_diameter))
    return FlowHistory(spec=spec, states=states, diagnostics=diags,
                       accepted=res.accepted, rejected=res.rejected)
