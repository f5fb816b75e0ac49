"""Damped Newton solvers with spectral preconditioning and coupling continuation.

One matrix-free Newton engine drives all three equation kinds.  The unknown
vector is f (vortex), (f, c') (EB), or (f, v, c') (gravitating); the additive
volume-gauge constant c' of the conformal factor is an explicit Newton
unknown, paired with the volume/mean constraints:

* EB rows:          equation residual, then (Vol(e^{2u} omega_0) - 2 pi)/(2 pi);
* gravitating rows: the two equation residuals, then mean(v)
  (the volume constraint is already the mean of the second equation, since
  Delta v integrates to zero).

Linear systems are solved with preconditioned LGMRES; the preconditioner is
the exact spectral (Delta + 1)^{-1} applied blockwise.  Damping is Armijo
backtracking on the quadratic merit (1/2)||R||^2 in the background L2 norm.

Failure taxonomy: MaxIters, Divergence (iterate norm blow-up), Overflow
(nonlinearity exponent beyond the guard), StepFloor (backtracking collapsed).
Reports are certified: ``converged`` additionally requires the integral
identities (degree, volume, Gauss-Bonnet, metric positivity) to hold at
their standard tolerances, and the exact degree bound N < tau * Vol/(4 pi)
(respectively polystability, for EB) to hold for the data -- when the bound
fails the equations have no solution and residual-small iterates are
collapse artefacts, so the report says non-converged and cites the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, lgmres

from . import stability
from .equations import (
    EquationKind,
    FieldState,
    IdentityReport,
    ProblemSpec,
    _clamped_exp,
    _p_of,
    _weight_exponent,
    exponent_overflow,
    identity_report,
    initial_state,
    make_state,
    residual_fields,
)
from .geometry import ScalarField, SurfaceGrid, SurfaceModel, constant_field, smoothing_invert
from .sections import SectionData

TWO_PI = 2.0 * math.pi

DEGREE_IDENTITY_TOL = 1e-6
VOLUME_IDENTITY_TOL = 1e-8
GAUSS_BONNET_TOL = 1e-4
_STEP_FLOOR = 2.0**-25


class FailureReason(str, Enum):
    MAX_ITERS = "MaxIters"
    DIVERGENCE = "Divergence"
    OVERFLOW = "Overflow"
    STEP_FLOOR = "StepFloor"


@dataclass(frozen=True)
class SolverConfig:
    """Newton iteration controls."""

    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping: str = "backtracking"  # "backtracking" (Armijo 1e-4) or "none"
    armijo_constant: float = 1e-4
    linear_tol: float = 1e-12
    linear_maxiter: int = 8
    divergence_norm: float = 1e6

    def __post_init__(self):
        if self.damping not in ("backtracking", "none"):
            raise ValueError(f"unknown damping mode {self.damping!r}")


@dataclass(frozen=True)
class ContinuationSchedule:
    """Ascending coupling targets, starting at 0."""

    alpha_targets: tuple
    max_step_halvings: int = 10

    def __post_init__(self):
        targets = tuple(float(a) for a in self.alpha_targets)
        if not targets or targets[0] != 0.0:
            raise ValueError("the first continuation target must be 0")
        if any(b <= a for a, b in zip(targets, targets[1:])):
            raise ValueError("continuation targets must be strictly ascending")
        object.__setattr__(self, "alpha_targets", targets)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a solve, certified against the integral identities."""

    converged: bool
    iterations: int
    final_residual: float
    identity: IdentityReport
    alpha_reached: float
    failure_reason: Optional[FailureReason] = None
    message: str = ""
    c_prime: float = 0.0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "identity": self.identity.to_dict(),
            "alpha_reached": self.alpha_reached,
            "failure_reason": None if self.failure_reason is None else self.failure_reason.value,
            "message": self.message,
            "c_prime": self.c_prime,
        }


# ---------------------------------------------------------------------------
# the unified Newton system
# ---------------------------------------------------------------------------


class _NewtonSystem:
    """Residual stack, Jacobian action, and preconditioner at a frozen state."""

    def __init__(self, state: FieldState):
        self.state = state
        s = state.spec
        self.spec = s
        self.grid = s.grid
        self.n = s.grid.n_nodes
        self.kind = s.kind
        self.p = _p_of(state)
        wq = self.grid.quad_weights
        if self.kind is EquationKind.VORTEX:
            self.w = None
            self.size = self.n
            self._shift_f = max(1e-6, float(np.dot(wq, self.p)) / TWO_PI)
            self._shift_v = 1.0
        else:
            self.w = _clamped_exp(_weight_exponent(state, self.p))
            self.size = 2 * self.n + 1 if self.kind is EquationKind.GRAVITATING else self.n + 1
            mult = self.p * self.w - 2.0 * s.alpha * (self.p - s.tau) ** 2 * self.w
            self._shift_f = max(1e-6, float(np.dot(wq, np.abs(mult))) / TWO_PI)
            self._shift_v = max(1e-6, float(np.dot(wq, np.abs(2.0 * s.c * self.w))) / TWO_PI)

    # -- residual -----------------------------------------------------------
    def residual_vector(self) -> tuple[np.ndarray, float]:
        """Stacked residual and the sup-norm over the equation components."""
        cached = getattr(self, "_rv", None)
        if cached is not None:
            return cached
        fields = residual_fields(self.state)
        sup = max(float(np.max(np.abs(f.values))) for f in fields)
        parts = [f.values for f in fields]
        if self.kind is EquationKind.EINSTEIN_BOGOMOLNYI:
            gauge = (float(np.dot(self.grid.quad_weights, self.w)) - TWO_PI) / TWO_PI
            parts.append(np.array([gauge]))
            sup = max(sup, abs(gauge))
        elif self.kind is EquationKind.GRAVITATING:
            gauge = float(np.dot(self.grid.quad_weights, self.state.v.values)) / TWO_PI
            parts.append(np.array([gauge]))
        self._rv = (np.concatenate(parts), sup)
        return self._rv

    # -- Jacobian action ------------------------------------------------------
    def matvec(self, x: np.ndarray) -> np.ndarray:
        g, s, p = self.grid, self.spec, self.p
        lap = lambda vals: _lap_values(g, vals)
        if self.kind is EquationKind.VORTEX:
            return lap(x) + p * x
        if self.kind is EquationKind.EINSTEIN_BOGOMOLNYI:
            df, dc = x[: self.n], x[self.n]
            dw = self.w * (4.0 * s.alpha * (s.tau - p) * df + 2.0 * dc)
            dr = lap(df) + p * self.w * df + 0.5 * (p - s.tau) * dw
            dgauge = float(np.dot(g.quad_weights, dw)) / TWO_PI
            return np.concatenate([dr, [dgauge]])
        df, dv, dc = x[: self.n], x[self.n : 2 * self.n], x[2 * self.n]
        dw = self.w * (4.0 * s.alpha * (s.tau - p) * df - 2.0 * s.c * dv + 2.0 * dc)
        dr1 = lap(df) + p * self.w * df + 0.5 * (p - s.tau) * dw
        dr2 = lap(dv) + dw
        dmean = float(np.dot(g.quad_weights, dv)) / TWO_PI
        return np.concatenate([dr1, dr2, [dmean]])

    # -- preconditioner -------------------------------------------------------
    def precond(self, x: np.ndarray) -> np.ndarray:
        g = self.grid
        if self.kind is EquationKind.VORTEX:
            return smoothing_invert(x, g, self._shift_f)
        if self.kind is EquationKind.EINSTEIN_BOGOMOLNYI:
            return np.concatenate([smoothing_invert(x[: self.n], g, self._shift_f), x[self.n :]])
        return np.concatenate(
            [
                smoothing_invert(x[: self.n], g, self._shift_f),
                smoothing_invert(x[self.n : 2 * self.n], g, self._shift_v),
                x[2 * self.n :],
            ]
        )

    # -- merit weights --------------------------------------------------------
    def merit(self, vec: np.ndarray) -> float:
        w = self.grid.quad_weights
        if self.kind is EquationKind.VORTEX:
            return 0.5 * float(np.dot(w, vec * vec))
        if self.kind is EquationKind.EINSTEIN_BOGOMOLNYI:
            r = vec[: self.n]
            return 0.5 * (float(np.dot(w, r * r)) + TWO_PI * vec[self.n] ** 2)
        r1, r2 = vec[: self.n], vec[self.n : 2 * self.n]
        return 0.5 * (
            float(np.dot(w, r1 * r1)) + float(np.dot(w, r2 * r2)) + TWO_PI * vec[2 * self.n] ** 2
        )

    def apply_update(self, x: np.ndarray, t: float) -> FieldState:
        st, s = self.state, self.spec
        if self.kind is EquationKind.VORTEX:
            return FieldState(ScalarField(self.grid, st.f.values + t * x), st.v, s)
        if self.kind is EquationKind.EINSTEIN_BOGOMOLNYI:
            new_spec = replace(s, c_prime=s.c_prime + t * float(x[self.n]))
            return FieldState(ScalarField(self.grid, st.f.values + t * x[: self.n]), st.v, new_spec)
        new_spec = replace(s, c_prime=s.c_prime + t * float(x[2 * self.n]))
        new_v = st.v.values + t * x[self.n : 2 * self.n]
        new_v = new_v - float(np.dot(self.grid.quad_weights, new_v)) / TWO_PI
        return FieldState(
            ScalarField(self.grid, st.f.values + t * x[: self.n]),
            ScalarField(self.grid, new_v),
            new_spec,
        )


def _lap_values(grid: SurfaceGrid, vals: np.ndarray) -> np.ndarray:
    from .geometry import laplacian_apply

    return laplacian_apply(ScalarField(grid, vals)).values


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------


def newton_step(state: FieldState, config: SolverConfig = SolverConfig(), _system=None):
    """One damped Newton step.

    Returns (new_state, info) where info records residual_norm (entry sup
    norm), new_residual_norm, step_scale (0.0 when no step was taken), and
    flag in {None, "overflow", "step_floor"}.
    """
    sys = _system if _system is not None else _NewtonSystem(state)
    r, sup = sys.residual_vector()
    info = {"residual_norm": sup, "new_residual_norm": sup, "step_scale": 0.0, "flag": None}
    if exponent_overflow(state):
        info["flag"] = "overflow"
        return state, info
    op = LinearOperator((sys.size, sys.size), matvec=sys.matvec)
    pre = LinearOperator((sys.size, sys.size), matvec=sys.precond)
    d, lin_info = lgmres(
        op,
        -r,
        M=pre,
        rtol=config.linear_tol,
        atol=0.0,
        maxiter=config.linear_maxiter,
        inner_m=30,
    )
    theta0 = sys.merit(r)
    if config.damping == "none":
        new_state = sys.apply_update(d, 1.0)
        r2, sup2 = _NewtonSystem(new_state).residual_vector()
        info.update(new_residual_norm=sup2, step_scale=1.0)
        return new_state, info
    t = 1.0
    while True:
        trial = sys.apply_update(d, t)
        if not exponent_overflow(trial):
            r2, sup2 = _NewtonSystem(trial).residual_vector()
            if sys.merit(r2) <= (1.0 - 2.0 * config.armijo_constant * t) * theta0:
                info.update(new_residual_norm=sup2, step_scale=t)
                return trial, info
        t *= 0.5
        if t < _STEP_FLOOR:
            info["flag"] = "step_floor"
            return state, info


@dataclass
class _LoopResult:
    state: FieldState
    iterations: int
    residual: float
    failure: Optional[FailureReason]
    message: str = ""


def _newton_loop(state: FieldState, config: SolverConfig) -> _LoopResult:
    iterations = 0
    while True:
        if exponent_overflow(state):
            return _LoopResult(state, iterations, math.inf, FailureReason.OVERFLOW,
                               "nonlinearity exponent exceeded the overflow guard")
        sys = _NewtonSystem(state)
        _, sup = sys.residual_vector()
        norms = max(
            float(np.max(np.abs(state.f.values))), float(np.max(np.abs(state.v.values)))
        )
        if sup <= config.newton_tol:
            return _LoopResult(state, iterations, sup, None)
        if norms > config.divergence_norm:
            return _LoopResult(state, iterations, sup, FailureReason.DIVERGENCE,
                               f"iterate sup-norm {norms:.3e} exceeded the divergence guard")
        if iterations >= config.max_newton_iters:
            return _LoopResult(state, iterations, sup, FailureReason.MAX_ITERS,
                               f"residual {sup:.3e} after {iterations} iterations")
        state, info = newton_step(state, config, _system=sys)
        iterations += 1
        if info["flag"] == "overflow":
            return _LoopResult(state, iterations, info["residual_norm"], FailureReason.OVERFLOW,
                               "nonlinearity exponent exceeded the overflow guard")
        if info["flag"] == "step_floor":
            return _LoopResult(state, iterations, info["residual_norm"], FailureReason.STEP_FLOOR,
                               "backtracking line search collapsed below the step floor")


# ---------------------------------------------------------------------------
# certification helpers
# ---------------------------------------------------------------------------


def _identity_ok(rep: IdentityReport) -> bool:
    return (
        abs(rep.degree_identity) <= DEGREE_IDENTITY_TOL
        and abs(rep.volume_identity) <= VOLUME_IDENTITY_TOL
        and math.isfinite(rep.gauss_bonnet)
        and abs(rep.gauss_bonnet) <= GAUSS_BONNET_TOL
        and rep.min_density > 0.0
    )


def _certify(loop: _LoopResult, alpha_reached: float, extra_gate: Optional[str]) -> SolveReport:
    rep = identity_report(loop.state)
    numeric_ok = loop.failure is None
    message = loop.message
    failure = loop.failure
    converged = numeric_ok
    if numeric_ok and extra_gate is not None:
        # residual-small iterate of an unsolvable problem: collapse artefact
        converged = False
        failure = FailureReason.DIVERGENCE
        message = extra_gate
    elif not numeric_ok and extra_gate is not None:
        message = f"{extra_gate}; {message}" if message else extra_gate
    if converged and not _identity_ok(rep):
        converged = False
        failure = FailureReason.MAX_ITERS
        message = "integral identities failed at the residual-converged state"
    return SolveReport(
        converged=converged,
        iterations=loop.iterations,
        final_residual=loop.residual,
        identity=rep,
        alpha_reached=alpha_reached,
        failure_reason=None if converged else failure,
        message=message,
        c_prime=loop.state.spec.c_prime,
    )


def _bradlow_gate(n: int, tau: float) -> Optional[str]:
    if stability.bradlow_check(n, tau):
        return None
    bound = stability.bradlow_bound(tau)
    return (
        f"no solution at this tau: degree bound fails (N = {n} >= tau*Vol/(4*pi) = {float(bound)})"
    )


def _polystable_gate(section: SectionData) -> Optional[str]:
    cls = stability.classify_divisor(section.divisor)
    if cls.verdict is stability.StabilityVerdict.UNSTABLE:
        return (
            "no solution at this coupling: divisor is not polystable "
            f"(witness point index {cls.witness})"
        )
    return None


# ---------------------------------------------------------------------------
# public solvers
# ---------------------------------------------------------------------------


def solve_vortex(
    grid: SurfaceGrid,
    section: SectionData,
    tau: float,
    config: SolverConfig = SolverConfig(),
    initial: Optional[FieldState] = None,
) -> tuple[FieldState, SolveReport]:
    """Solve the vortex equation at fixed background area 2*pi.

    Returns the final state and a certified report.  When the degree bound
    N < tau*Vol/(4*pi) fails, no solution exists; the iteration still runs
    and the report comes back non-converged citing the violated bound.
    """
    spec = ProblemSpec(grid=grid, section=section, tau=tau, kind=EquationKind.VORTEX)
    if initial is None:
        state = initial_state(spec)
    elif isinstance(initial, FieldState):
        state = make_state(spec, initial.f.values)
    else:
        vals = initial.values if isinstance(initial, ScalarField) else np.asarray(initial)
        state = make_state(spec, vals)
    loop = _newton_loop(state, config)
    gate = _bradlow_gate(section.divisor.total_degree, tau)
    return loop.state, _certify(loop, 0.0, gate)


def _default_schedule(alpha: float) -> ContinuationSchedule:
    if alpha == 0.0:
        return ContinuationSchedule((0.0,))
    return ContinuationSchedule(tuple(alpha * k / 4.0 for k in range(5)))


def _continue_in_alpha(
    anchor: FieldState,
    schedule: ContinuationSchedule,
    spec_at: Callable[[float, float], ProblemSpec],
    lift: Callable[[FieldState, ProblemSpec], FieldState],
    config: SolverConfig,
) -> tuple[FieldState, float, _LoopResult, int]:
    """March the anchor state along ascending alpha targets with bisection."""
    state = anchor
    reached = 0.0
    budget = schedule.max_step_halvings
    total_iters = 0
    last = _LoopResult(anchor, 0, 0.0, None)
    for target in schedule.alpha_targets[1:]:
        attempt = target
        while reached < target:
            trial_spec = spec_at(attempt, state.spec.c_prime)
            loop = _newton_loop(lift(state, trial_spec), config)
            total_iters += loop.iterations
            last = loop
            if loop.failure is None:
                state = loop.state
                reached = attempt
                attempt = target
            else:
                budget -= 1
                mid = 0.5 * (reached + attempt)
                if budget < 0 or mid - reached <= 1e-12 * (1.0 + target):
                    return state, reached, loop, total_iters
                attempt = mid
    return state, reached, last, total_iters


def solve_gravitating(
    grid: SurfaceGrid,
    section: SectionData,
    tau: float,
    alpha: float,
    schedule: Optional[ContinuationSchedule] = None,
    config: SolverConfig = SolverConfig(),
) -> tuple[FieldState, SolveReport]:
    """Solve the gravitating system by continuation in the coupling.

    The anchor at alpha = 0 is the vortex solution with v = 0, c' = 0 (exact
    there); each subsequent target re-poses the problem with
    c = chi - 2*alpha*tau*N and carries (f, v, c') forward, bisecting failed
    steps until ``schedule.max_step_halvings`` is exhausted.
    """
    alpha = float(alpha)
    if alpha < 0.0:
        raise ValueError("alpha must be >= 0")
    if schedule is None:
        schedule = _default_schedule(alpha)
    if schedule.alpha_targets[-1] != alpha:
        raise ValueError("the continuation schedule must end at the requested alpha")
    n = section.divisor.total_degree
    chi = grid.euler_characteristic

    vortex_state, vortex_report = solve_vortex(grid, section, tau, config=config)
    if not vortex_report.converged:
        spec0 = ProblemSpec(
            grid=grid, section=section, tau=tau, kind=EquationKind.GRAVITATING,
            alpha=0.0, c=float(chi), c_prime=0.0,
        )
        state0 = make_state(spec0, vortex_state.f.values)
        loop = _LoopResult(
            state0, vortex_report.iterations, vortex_report.final_residual,
            vortex_report.failure_reason or FailureReason.MAX_ITERS, vortex_report.message,
        )
        return state0, _certify(loop, 0.0, None)

    def spec_at(a: float, c_prime: float) -> ProblemSpec:
        return ProblemSpec(
            grid=grid, section=section, tau=tau, kind=EquationKind.GRAVITATING,
            alpha=a, c=chi - 2.0 * a * tau * n, c_prime=c_prime,
        )

    def lift(state: FieldState, spec: ProblemSpec) -> FieldState:
        return FieldState(state.f, state.v, spec)

    anchor = make_state(spec_at(0.0, 0.0), vortex_state.f.values)
    if alpha == 0.0:
        loop = _LoopResult(anchor, vortex_report.iterations, vortex_report.final_residual, None)
        return anchor, _certify(loop, 0.0, None)
    state, reached, last, iters = _continue_in_alpha(anchor, schedule, spec_at, lift, config)
    loop = _LoopResult(
        state if last.failure is None else last.state,
        iters + vortex_report.iterations,
        last.residual,
        last.failure,
        last.message,
    )
    if last.failure is not None:
        loop.state = state  # report the last certified state, not the failed trial
        loop.message = (
            f"continuation stalled at alpha = {reached} (target {alpha}): {last.message}"
        )
    return loop.state, _certify(loop, reached, None)


def advance_gravitating(
    state: FieldState,
    alpha: float,
    config: SolverConfig = SolverConfig(),
) -> tuple[FieldState, SolveReport]:
    """Re-pose an existing state at a new coupling and re-solve (warm start).

    Used by parameter sweeps: the previous converged state seeds the Newton
    iteration at the next coupling directly, with no intermediate
    continuation targets.  On failure the report's ``alpha_reached`` is the
    seed's coupling, the last value actually certified.
    """
    alpha = float(alpha)
    if alpha < 0.0:
        raise ValueError("alpha must be >= 0")
    old = state.spec
    n = old.section.divisor.total_degree
    chi = old.grid.euler_characteristic
    new_spec = ProblemSpec(
        grid=old.grid, section=old.section, tau=old.tau,
        kind=EquationKind.GRAVITATING,
        alpha=alpha, c=chi - 2.0 * alpha * old.tau * n,
        c_prime=old.c_prime,
    )
    loop = _newton_loop(FieldState(state.f, state.v, new_spec), config)
    reached = alpha if loop.failure is None else float(old.alpha)
    return loop.state, _certify(loop, reached, None)


def solve_eb(
    grid: SurfaceGrid,
    section: SectionData,
    tau: float,
    config: SolverConfig = SolverConfig(),
    schedule: Optional[ContinuationSchedule] = None,
) -> tuple[FieldState, SolveReport]:
    """Solve the Einstein-Bogomol'nyi equation at the exact coupling 1/(tau N).

    Genus 0 only; requires N < tau/2.  Continuation ramps alpha from 0 (the
    vortex anchor) to 1/(tau N); the volume gauge c' rides along as a Newton
    unknown.  For non-polystable divisors no solution exists and the report
    is non-converged citing the classification.
    """
    if grid.model is not SurfaceModel.SPHERE:
        raise ValueError("the Einstein-Bogomol'nyi equation lives on the sphere")
    n = section.divisor.total_degree
    if not stability.bradlow_check(n, tau):
        raise ValueError(f"solve_eb requires N < tau/2 (got N = {n}, tau = {tau})")
    alpha_eb = float(stability.eb_coupling(tau, n))
    if schedule is None:
        schedule = ContinuationSchedule(tuple(alpha_eb * k / 4.0 for k in range(5)))
    if schedule.alpha_targets[-1] != alpha_eb:
        raise ValueError("the EB continuation schedule must end at alpha = 1/(tau N)")

    vortex_state, vortex_report = solve_vortex(grid, section, tau, config=config)
    gate = _polystable_gate(section)
    if not vortex_report.converged:
        loop = _LoopResult(
            vortex_state, vortex_report.iterations, vortex_report.final_residual,
            vortex_report.failure_reason or FailureReason.MAX_ITERS, vortex_report.message,
        )
        return vortex_state, _certify(loop, 0.0, gate)

    def spec_at(a: float, c_prime: float) -> ProblemSpec:
        if a == 0.0:
            return ProblemSpec(grid=grid, section=section, tau=tau, kind=EquationKind.VORTEX)
        return ProblemSpec(
            grid=grid, section=section, tau=tau, kind=EquationKind.EINSTEIN_BOGOMOLNYI,
            alpha=a, c=0.0, c_prime=c_prime,
        )

    def lift(state: FieldState, spec: ProblemSpec) -> FieldState:
        return make_state(spec, state.f.values)

    anchor = make_state(spec_at(0.0, 0.0), vortex_state.f.values)
    state, reached, last, iters = _continue_in_alpha(anchor, schedule, spec_at, lift, config)
    failure = last.failure
    message = last.message
    if failure is not None:
        message = f"continuation stalled at alpha = {reached} (target {alpha_eb}): {message}"
    loop = _LoopResult(state, iters + vortex_report.iterations, last.residual, failure, message)
    return state, _certify(loop, reached, gate)
