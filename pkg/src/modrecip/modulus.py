"""Convex solver for the p-modulus of a constraint-oracle family.

The modulus program minimizes ``sum(measure * rho**p)`` over nonnegative
densities subject to ``sum(w * rho) >= 1`` for every family member, a set
far too large to enumerate.  The solver runs constraint generation: the
family oracle separates the most-violated member, and the restricted
problem over the active cuts is solved through its Lagrangian dual, whose
inner minimization over rho has a closed form.  The dual is maximized by
accelerated projected gradient ascent with backtracking, which yields the
multipliers directly and makes the certified lower bound one formula away.
Scaling the oracle-checked density to exact admissibility gives the upper
bound, so every returned value carries a duality-gap certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .families import ConnectingFamily, MeasureConstraint, SeparatingFamily
from .geometry import MetricGrid
from .validation import check_density_values

__all__ = [
    "Density",
    "BacktrackingRule",
    "SolverConfig",
    "ActiveConstraint",
    "ModulusResult",
    "ReciprocityReport",
    "solve_modulus",
    "lagrangian_lower_bound",
    "verify_reciprocity",
    "SHARP_PRODUCT_BOUND",
]

# sharp lower bound for the modulus product of connecting and separating
# families of a planar quadrilateral
SHARP_PRODUCT_BOUND = math.pi / 4.0


@dataclass(frozen=True)
class Density:
    """Nonnegative scalar field sampled at the grid nodes."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.isfinite(values).all() or (values < 0).any():
            raise ValueError("density values must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: MetricGrid, value: float) -> "Density":
        return cls(np.full(grid.num_nodes, float(value)))

    @classmethod
    def zeros(cls, grid: MetricGrid) -> "Density":
        return cls(np.zeros(grid.num_nodes))

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class BacktrackingRule:
    """Step control for the inner dual ascent."""

    l0: float = 1.0
    growth: float = 2.0
    decay: float = 0.95
    max_backtracks: int = 60


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    tol_admissibility: float = 1e-4
    tol_gap: float = 1e-3
    max_outer_iters: int = 500
    max_inner_iters: int = 2000
    inner_step_rule: BacktrackingRule = field(default_factory=BacktrackingRule)
    epsilon_floor: float = 1e-9

    def validate(self) -> None:
        if not math.isfinite(self.p) or self.p < 1.05:
            raise ValueError(
                f"exponent p={self.p} rejected: p must be finite and >= 1.05 "
                "(the dual exponent degrades conditioning as p -> 1)"
            )
        for name in ("tol_admissibility", "tol_gap", "epsilon_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration limits must be >= 1")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)


@dataclass(frozen=True)
class ActiveConstraint:
    constraint: MeasureConstraint
    multiplier: float
    curve: object = None  # DiscreteCurve when generated by a connecting family


@dataclass
class ModulusResult:
    """Solution of one modulus program with its optimality certificate."""

    value: float
    rho_star: Density
    active_constraints: list
    lower_bound: float
    violation: float
    iterations: dict
    status: str
    gap: float
    history: list

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _primal_value(rho: np.ndarray, measures: np.ndarray, p: float) -> float:
    return float((measures * rho**p).sum())


def _scatter_mass(constraints, multipliers, num_nodes: int) -> np.ndarray:
    s = np.zeros(num_nodes)
    for cut, lam in zip(constraints, multipliers):
        np.add.at(s, cut.support, lam * cut.weights)
    return s


def lagrangian_lower_bound(
    constraints: Sequence[MeasureConstraint],
    multipliers,
    p: float,
    measures: np.ndarray,
) -> float:
    """Dual function value: a certified lower bound on the modulus.

    Closed-form infimum over rho >= 0 of the Lagrangian of the restricted
    program; valid for any multipliers >= 0 because dropping constraints
    never raises the minimum.
    """
    multipliers = np.asarray(multipliers, dtype=float)
    if (multipliers < 0).any():
        raise ValueError("multipliers must be nonnegative")
    measures = np.asarray(measures, dtype=float)
    s = np.maximum(_scatter_mass(constraints, multipliers, measures.size), 0.0)
    if (s[measures <= 0] > 0).any():
        raise ValueError("constraints put mass on zero-measure nodes")
    q = p / (p - 1.0)
    with np.errstate(divide="ignore"):
        minv = np.where(measures > 0, 1.0 / (p * measures), 0.0)
    rho = (s * minv) ** (q - 1.0)
    return float(multipliers.sum() - (s * rho).sum() / q)


class _RestrictedDual:
    """Dual of the restricted program over the active cuts."""

    def __init__(self, constraints, measures: np.ndarray, p: float):
        rows = np.repeat(np.arange(len(constraints)), [c.support.size for c in constraints])
        cols = np.concatenate([c.support for c in constraints])
        data = np.concatenate([c.weights for c in constraints])
        self.W = sp.csr_matrix(
            (data, (rows, cols)), shape=(len(constraints), measures.size)
        )
        self.m = measures
        self.p = p
        self.q = p / (p - 1.0)
        with np.errstate(divide="ignore"):
            self.minv = np.where(measures > 0, 1.0 / (p * measures), 0.0)

    def value_grad(self, lam: np.ndarray):
        # positive part: at nodes with no constraint mass the inner infimum
        # sits at rho = 0, and this extension keeps the dual defined at the
        # momentum points outside the orthant
        s = np.maximum(self.W.T @ lam, 0.0)
        rho = (s * self.minv) ** (self.q - 1.0)
        g = float(lam.sum() - (s * rho).sum() / self.q)
        slack = self.W @ rho
        return g, 1.0 - slack, rho, slack


def _dual_ascent(
    dual: _RestrictedDual,
    lam0: np.ndarray,
    cfg: SolverConfig,
    target_rel_gap: float,
    lipschitz: float,
):
    """Accelerated projected gradient ascent (FISTA with restarts)."""
    rule = cfg.inner_step_rule
    L = max(lipschitz, 1e-12)
    x = np.maximum(lam0, 0.0)
    y = x.copy()
    t = 1.0
    g_x, _, rho_x, slack_x = dual.value_grad(x)
    best = (g_x, x.copy(), rho_x, slack_x)
    iters = 0
    for it in range(cfg.max_inner_iters):
        iters = it + 1
        g_y, grad_y, _, _ = dual.value_grad(y)
        for _ in range(rule.max_backtracks):
            z = np.maximum(0.0, y + grad_y / L)
            dz = z - y
            g_z, grad_z, rho_z, slack_z = dual.value_grad(z)
            if g_z >= g_y + grad_y @ dz - 0.5 * L * (dz @ dz) - 1e-15 * max(1.0, abs(g_y)):
                break
            L *= rule.growth
        if g_z > best[0]:
            best = (g_z, z.copy(), rho_z, slack_z)
        # adaptive restart keeps the momentum honest
        if g_z < g_x:
            y = x.copy()
            t = 1.0
            L *= rule.growth
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_next) * (z - x)
        x, g_x = z, g_z
        t = t_next
        L *= rule.decay
        # certified restricted gap: scale the primal iterate to feasibility
        v = float(slack_z.min(initial=np.inf))
        if v > 0 and best[0] > 0:
            upper = _primal_value(rho_z, dual.m, dual.p) / v**dual.p
            if (upper - best[0]) / max(best[0], cfg.epsilon_floor) <= target_rel_gap:
                break
    return best, iters, L


def _degenerate_result(grid: MetricGrid, status: str, cfg: SolverConfig) -> ModulusResult:
    if status == "infinite":
        value = math.inf
        lower = math.inf
    else:
        value = 0.0
        lower = 0.0
    return ModulusResult(
        value=value,
        rho_star=Density.zeros(grid),
        active_constraints=[],
        lower_bound=lower,
        violation=0.0,
        iterations={"outer": 0, "inner": 0},
        status=status,
        gap=0.0,
        history=[],
    )


def solve_modulus(
    family,
    cfg: SolverConfig | None = None,
    *,
    grid: MetricGrid | None = None,
    rho0=None,
    measures=None,
) -> ModulusResult:
    """Solve the p-modulus program for a constraint-oracle family.

    ``family`` needs a ``grid`` attribute and a ``most_violated(rho)``
    method returning an OracleCut; the built-in connecting and separating
    families qualify, as does any custom oracle.  ``rho0`` overrides the
    default feasible start (the constant density 1/d(E, F)).  ``measures``
    overrides the grid cell measures (the objective weights).

    A family whose oracle certifies that no member exists yields modulus 0
    with an empty certificate; a separating family whose separated pair is
    disconnected is reported ``infinite`` rather than given a finite value.
    Failure to reach the gap target within the iteration budget returns a
    diagnostic result with status ``max_iters``, not an exception.
    """
    cfg = cfg or SolverConfig()
    cfg.validate()
    grid = grid if grid is not None else family.grid
    m = np.asarray(measures if measures is not None else grid.cell_measures(), dtype=float)

    status = "ok"
    if hasattr(family, "degenerate_status"):
        status = family.degenerate_status()
    if status != "ok":
        return _degenerate_result(grid, status, cfg)

    p, q = cfg.p, cfg.q
    if rho0 is not None:
        rho = check_density_values(grid, rho0)
    else:
        d = family.geodesic_distance() if hasattr(family, "geodesic_distance") else math.inf
        if not (math.isfinite(d) and d > 0):
            cut0 = family.most_violated(np.ones(grid.num_nodes))
            d = cut0.value if math.isfinite(cut0.value) and cut0.value > 0 else 1.0
        rho = np.full(grid.num_nodes, 1.0 / d)

    constraints: list[MeasureConstraint] = []
    curves: list = []
    keys: set[bytes] = set()
    lam = np.zeros(0)
    zero_streak = np.zeros(0, dtype=int)
    history: list[dict] = []
    lower = 0.0
    inner_total = 0
    inner_target = 0.25 * cfg.tol_gap
    lipschitz = cfg.inner_step_rule.l0
    status = "max_iters"
    outer_done = 0

    for outer in range(cfg.max_outer_iters):
        outer_done = outer + 1
        cut = family.most_violated(rho)
        v = cut.value
        if cut.constraint is None:
            return _degenerate_result(grid, "no_curves", cfg)
        if math.isfinite(v) and v > 0:
            # the density rescaled to exact admissibility certifies this
            # upper bound, so the raw iterate's slack is priced into the gap
            upper = _primal_value(rho, m, p) / v**p
            gap = (upper - lower) / max(lower, cfg.epsilon_floor)
            slack_after_rescale = 0.0
        else:
            upper, gap = math.inf, math.inf
            slack_after_rescale = -math.inf
        history.append(
            {"outer": outer, "oracle_value": v, "upper": upper, "lower": lower, "gap": gap}
        )
        if gap <= cfg.tol_gap and slack_after_rescale >= -cfg.tol_admissibility:
            status = "converged"
            break

        fresh = 0
        key = cut.constraint.key()
        if key not in keys:
            keys.add(key)
            constraints.append(cut.constraint)
            curves.append(cut.curve)
            lam = np.append(lam, 0.0)
            zero_streak = np.append(zero_streak, 0)
            fresh = 1
        else:
            # oracle re-issued an active cut: the restricted solve needs
            # more accuracy before the outer certificate can close
            inner_target = max(inner_target * 0.2, 1e-3 * cfg.tol_gap)

        dual = _RestrictedDual(constraints, m, p)
        (g_best, lam, rho, slack), iters, lipschitz = _dual_ascent(
            dual, lam, cfg, inner_target, lipschitz
        )
        inner_total += iters
        lower = max(lower, g_best)

        # retire cuts whose multipliers stay at zero
        scale = max(float(lam.max(initial=0.0)), 1.0)
        zero_streak = np.where(lam <= 1e-12 * scale, zero_streak + 1, 0)
        keep = zero_streak < 5
        if fresh:
            keep[-fresh:] = True
        if not keep.all():
            constraints = [c for c, k in zip(constraints, keep) if k]
            curves = [c for c, k in zip(curves, keep) if k]
            keys = {c.key() for c in constraints}
            lam = lam[keep]
            zero_streak = zero_streak[keep]

    # normalize the certificate density to exact admissibility
    cut = family.most_violated(rho)
    v = cut.value
    if math.isfinite(v) and v > 0:
        rho = rho / v
    rho = np.maximum(rho, cfg.epsilon_floor)
    final = family.most_violated(rho)
    value = _primal_value(rho, m, p)
    violation = final.value - 1.0
    gap = (value - lower) / max(lower, cfg.epsilon_floor)

    active = [
        ActiveConstraint(constraint=c, multiplier=float(l), curve=crv)
        for c, l, crv in zip(constraints, lam, curves)
    ]
    return ModulusResult(
        value=value,
        rho_star=Density(rho),
        active_constraints=active,
        lower_bound=lower,
        violation=float(violation),
        iterations={"outer": outer_done, "inner": inner_total},
        status=status,
        gap=float(gap),
        history=history,
    )


@dataclass
class ReciprocityReport:
    """Product check for the connecting/separating modulus pair."""

    p: float
    q: float
    mod_p_gamma: float
    mod_q_sigma: float
    product: float
    threshold: float
    passed: bool
    gamma_result: ModulusResult
    sigma_result: ModulusResult


def verify_reciprocity(
    grid: MetricGrid,
    p: float,
    cfg: SolverConfig | None = None,
    tol_reciprocity: float = 0.1,
    labels: tuple[str, str] = ("A", "C"),
) -> ReciprocityReport:
    """Compute the connecting and separating moduli and their product bound.

    The product ``mod_p(gamma)**(1/p) * mod_q(sigma)**(1/q)`` is flagged as
    failed when it drops below ``(pi/4) * (1 - tol_reciprocity)``.  The
    separating side is computed on the dual-path family with the dual
    exponent q = p/(p-1).
    """
    cfg = replace(cfg, p=p) if cfg is not None else SolverConfig(p=p)
    q = cfg.q
    gamma = ConnectingFamily(grid, *labels)
    sigma = SeparatingFamily(grid, labels)
    r_gamma = solve_modulus(gamma, cfg)
    r_sigma = solve_modulus(sigma, replace(cfg, p=q))

    threshold = SHARP_PRODUCT_BOUND * (1.0 - tol_reciprocity)
    if r_gamma.value == 0.0:
        # degenerate clause: zero connecting modulus forces an infinite
        # separating modulus
        product = math.inf if r_sigma.status == "infinite" else math.nan
        passed = r_sigma.status == "infinite"
    elif math.isinf(r_sigma.value):
        product = math.inf
        passed = True
    else:
        product = r_gamma.value ** (1.0 / p) * r_sigma.value ** (1.0 / q)
        passed = product >= threshold
    return ReciprocityReport(
        p=p,
        q=q,
        mod_p_gamma=r_gamma.value,
        mod_q_sigma=r_sigma.value,
        product=product,
        threshold=threshold,
        passed=bool(passed),
        gamma_result=r_gamma,
        sigma_result=r_sigma,
    )
