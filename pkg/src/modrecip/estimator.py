"""Estimator-style front end for the modulus solver.

Wraps the solver in the usual fit/predict surface so it slots into
pipelines and parameter searches: hyperparameters in ``__init__``, fitted
quantities as trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .families import DiscreteCurve
from .modulus import BacktrackingRule, SolverConfig, solve_modulus

__all__ = ["ModulusSolver"]


class ModulusSolver(BaseEstimator):
    """Compute the p-modulus of a curve family on a metric grid.

    Parameters mirror ``SolverConfig``.  ``fit`` takes the family (any
    object with a ``grid`` and a ``most_violated`` oracle) as its X.

    Attributes set by ``fit``: ``value_`` (the modulus), ``density_``
    (extremal density values per node), ``lower_bound_``, ``gap_``,
    ``status_``, ``n_iter_`` and the full ``result_``.
    """

    def __init__(
        self,
        p: float = 2.0,
        tol_admissibility: float = 1e-4,
        tol_gap: float = 1e-3,
        max_outer_iters: int = 500,
        max_inner_iters: int = 2000,
        epsilon_floor: float = 1e-9,
    ):
        self.p = p
        self.tol_admissibility = tol_admissibility
        self.tol_gap = tol_gap
        self.max_outer_iters = max_outer_iters
        self.max_inner_iters = max_inner_iters
        self.epsilon_floor = epsilon_floor

    def _config(self) -> SolverConfig:
        return SolverConfig(
            p=self.p,
            tol_admissibility=self.tol_admissibility,
            tol_gap=self.tol_gap,
            max_outer_iters=self.max_outer_iters,
            max_inner_iters=self.max_inner_iters,
            inner_step_rule=BacktrackingRule(),
            epsilon_floor=self.epsilon_floor,
        )

    def fit(self, X, y=None):
        """Solve the modulus program for the family ``X``."""
        result = solve_modulus(X, self._config())
        self.result_ = result
        self.family_ = X
        self.value_ = result.value
        self.density_ = result.rho_star.values
        self.lower_bound_ = result.lower_bound
        self.gap_ = result.gap
        self.status_ = result.status
        self.n_iter_ = result.iterations["outer"]
        return self

    def predict(self, X) -> np.ndarray:
        """Line integrals of the fitted density along the given curves.

        ``X`` is an iterable of ``DiscreteCurve`` or node-index sequences;
        values of at least 1 mean the curve is admissible for the fitted
        density.
        """
        if not hasattr(self, "density_"):
            raise NotFittedError("call fit before predict")
        grid = self.family_.grid
        rho = self.density_
        out = []
        for item in X:
            curve = item if isinstance(item, DiscreteCurve) else DiscreteCurve.from_nodes(grid, item)
            r = rho[curve.nodes]
            out.append(float((0.5 * (r[:-1] + r[1:]) * curve.lengths).sum()))
        return np.asarray(out)
