"""Adaptive time stepping in an exponential frame.

The flows integrated here have a stiff linear part whose mode-wise
antiderivative is available in closed form, and a smooth nonlinear
remainder. Conjugating the classical fourth-order scheme by the exact
linear propagator removes the stiffness from the stability constraint:
pure exponential decay is reproduced to rounding at any step size, and
modes that collapse below the floating-point floor land on exact zeros
instead of oscillating.

Problems supply ``symbol_integral(t0, t1)`` (the integral of the linear
symbol per mode), ``nonlinear_modes(t, u)`` (the remainder in mode space,
or None when absent), and optionally ``kaehler_margin(t, u)``; when a
margin is exposed, steps that slash it by more than a factor of ten are
rejected so the state cannot jump out of the positive cone between
samples.
"""

from dataclasses import dataclass, field

import numpy as np


class StiffnessError(RuntimeError):
    """Step size collapsed below the floor without an acceptable step."""


@dataclass(frozen=True)
class StepControls:
    """Error tolerance and step-size policy for the adaptive loop."""

    tol: float = 1e-8
    dt_init: float = 1e-2
    dt_min: float = 1e-12
    dt_max: float = 0.25
    grow_margin: float = 50.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.grow_margin <= 1:
            raise ValueError("grow_margin must exceed 1")


@dataclass
class IntegrationResult:
    final_time: float
    final_modes: np.ndarray
    sample_times: tuple
    sample_modes: list
    accepted: int
    rejected: int
    last_dt: float


def _nonlinear(problem, t, u):
    n = problem.nonlinear_modes(t, u)
    return 0.0 if n is None else n


def lawson_step(problem, t, u, h):
    """One fourth-order step of size h in the exponential frame."""
    e1 = np.exp(problem.symbol_integral(t, t + 0.5 * h))
    e3 = np.exp(problem.symbol_integral(t + 0.5 * h, t + h))
    e2 = e1 * e3
    n1 = _nonlinear(problem, t, u)
    n2 = _nonlinear(problem, t + 0.5 * h, e1 * (u + 0.5 * h * n1))
    n3 = _nonlinear(problem, t + 0.5 * h, e1 * u + 0.5 * h * n2)
    n4 = _nonlinear(problem, t + h, e2 * u + h * e3 * n3)
    return e2 * u + (h / 6.0) * (e2 * n1 + 2.0 * e3 * (n2 + n3) + n4)


def integrate_lawson(problem, u0, t0, t1, sample_times=(), controls=None,
                     on_accept=None):
    """March modes from t0 to t1 with step doubling and margin guarding.

    The error estimate compares one full step against two half steps; the
    half-step result is the one kept. Requested sample times are landed on
    exactly. ``on_accept(t, modes)`` fires after every accepted step.
    """
    c = controls or StepControls()
    u = np.array(u0, dtype=complex)
    t = float(t0)
    if t1 <= t:
        raise ValueError("need t1 > t0")
    req = tuple(float(s) for s in sample_times)
    if any(s < t0 or s > t1 for s in req):
        raise ValueError(f"sample times must lie in [{t0}, {t1}]")
    if list(req) != sorted(req):
        raise ValueError("sample times must be sorted")

    out = []
    idx = 0
    while idx < len(req) and req[idx] <= t:
        out.append(u.copy())
        idx += 1

    margin_fn = getattr(problem, "kaehler_margin", None)
    prev_margin = margin_fn(t, u) if margin_fn else None
    dt = c.dt_init
    accepted = rejected = 0

    while t < t1:
        target = req[idx] if idx < len(req) else t1
        remaining = target - t
        lands = dt >= remaining
        h = remaining if lands else dt

        full = lawson_step(problem, t, u, h)
        mid = lawson_step(problem, t, u, 0.5 * h)
        fine = lawson_step(problem, t + 0.5 * h, mid, 0.5 * h)
        err = float(np.max(np.abs(full - fine))) / 15.0

        ok = err <= c.tol
        new_margin = None
        if ok and margin_fn is not None:
            new_margin = margin_fn(t + h, fine)
            ok = new_margin > 0.1 * prev_margin
        if not ok:
            rejected += 1
            dt *= 0.5
            if dt < c.dt_min:
                raise StiffnessError(
                    f"stiffness breakdown: step size {dt:.3e} fell below "
                    f"{c.dt_min:.3e} at t={t:.6f}")
            continue

        t = target if lands else t + h
        u = fine
        accepted += 1
        if margin_fn is not None:
            prev_margin = new_margin
        if on_accept is not None:
            on_accept(t, u)
        while idx < len(req) and req[idx] <= t:
            out.append(u.copy())
            idx += 1
        if err < c.tol / c.grow_margin:
            dt = min(2.0 * dt, c.dt_max)

    return IntegrationResult(final_time=t, final_modes=u, sample_times=req,
                             sample_modes=out, accepted=accepted,
                             rejected=rejected, last_dt=dt)
