"""Discrete optimal transport: exact and entropy-regularized solvers.

The exact solver runs successive shortest paths (Dijkstra with node
potentials) on the bipartite transport graph, so it returns a true linear
programming optimum at the small instance sizes this package targets.
The entropic solver runs Sinkhorn iterations in the log domain, which keeps
it stable for regularization strengths far below the cost scale.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CouplingError, MarginalError, ShapeError, SinkhornConvergenceWarning

__all__ = [
    "Histogram",
    "CostMatrix",
    "Coupling",
    "frobenius_cost",
    "solve_ot_exact",
    "solve_sinkhorn",
]

# Sums farther than this from 1 are treated as caller bugs, closer ones as
# float accumulation and silently renormalized.
_SUM_SLACK = 1e-6


@dataclass
class Histogram:
    """Probability masses on a finite support: nonnegative, summing to 1."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise MarginalError("histogram must be a nonempty 1-d vector")
        if not np.all(np.isfinite(w)):
            raise MarginalError("histogram weights must be finite")
        if np.any(w < 0):
            raise MarginalError("histogram weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > _SUM_SLACK:
            raise MarginalError(f"histogram weights sum to {total!r}, expected 1")
        self.weights = w / total

    def __len__(self):
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> "Histogram":
        if n < 1:
            raise MarginalError("histogram needs at least one entry")
        return cls(np.full(n, 1.0 / n))


@dataclass
class CostMatrix:
    """Dense nonnegative displacement costs, one row per source atom."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ShapeError("cost matrix must be a nonempty 2-d array")
        if not np.all(np.isfinite(v)):
            raise ShapeError("cost matrix entries must be finite")
        if np.any(v < 0):
            raise ShapeError("cost matrix entries must be nonnegative")
        self.values = v

    @property
    def shape(self):
        return self.values.shape


@dataclass
class Coupling:
    """A transport plan together with the marginals it must reproduce.

    ``marginal_tol`` is the per-entry row/column-sum tolerance enforced at
    construction; the default matches the feasibility contract of the exact
    solver. Callers that request a looser Sinkhorn tolerance get a coupling
    validated at that looser bound.
    """

    plan: np.ndarray
    row_marginal: Histogram
    col_marginal: Histogram
    marginal_tol: float = field(default=1e-6)

    def __post_init__(self):
        p = np.asarray(self.plan, dtype=np.float64)
        if p.ndim != 2:
            raise CouplingError("plan must be a 2-d array")
        if p.shape != (len(self.row_marginal), len(self.col_marginal)):
            raise CouplingError(
                f"plan shape {p.shape} does not match marginals "
                f"({len(self.row_marginal)}, {len(self.col_marginal)})"
            )
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise CouplingError("plan entries must be finite and nonnegative")
        self.plan = p
        v = self.violation()
        if v > self.marginal_tol:
            raise CouplingError(
                f"plan marginals violated by {v:.3e} (tolerance {self.marginal_tol:.3e})"
            )

    def violation(self) -> float:
        """Largest absolute row/column-sum deviation from the marginals."""
        row_dev = np.abs(self.plan.sum(axis=1) - self.row_marginal.weights).max()
        col_dev = np.abs(self.plan.sum(axis=0) - self.col_marginal.weights).max()
        return float(max(row_dev, col_dev))

    @classmethod
    def independent(cls, mu: Histogram, nu: Histogram) -> "Coupling":
        """The product coupling mu x nu (always feasible)."""
        return cls(np.outer(mu.weights, nu.weights), mu, nu)


def frobenius_cost(c: CostMatrix, g: Coupling) -> float:
    """Total transport cost: the elementwise product of cost and plan, summed."""
    if c.shape != g.plan.shape:
        raise ShapeError(f"cost shape {c.shape} != plan shape {g.plan.shape}")
    return float(np.sum(c.values * g.plan))


def _check_instance(c: CostMatrix, mu: Histogram, nu: Histogram):
    n, m = c.shape
    if len(mu) != n or len(nu) != m:
        raise ShapeError(
            f"cost is {n}x{m} but marginals have sizes {len(mu)} and {len(nu)}"
        )


def solve_ot_exact(c: CostMatrix, mu: Histogram, nu: Histogram) -> Coupling:
    """Solve the transport LP exactly by successive shortest paths.

    Builds the bipartite flow network (virtual source -> rows -> cols ->
    virtual sink) and repeatedly augments along a shortest path under
    reduced costs, using Dijkstra with node potentials. Costs are
    nonnegative throughout, so the potentials stay valid and the final
    plan attains the minimum total cost.
    """
    _check_instance(c, mu, nu)
    C = c.values
    n, m = C.shape
    supply = mu.weights.copy()
    demand = nu.weights.copy()
    flow = np.zeros((n, m))
    pot_row = np.zeros(n)
    pot_col = np.zeros(m)
    pot_sink = 0.0

    max_augment = n * m + n + m + 8
    tiny = 1e-15

    for _ in range(max_augment):
        if supply.sum() <= 1e-12:
            break
        dist_row, dist_col, dist_sink, par_row, par_col, par_sink = _dijkstra(
            C, supply, demand, flow, pot_row, pot_col, pot_sink
        )
        if not np.isfinite(dist_sink):
            raise MarginalError("transport instance is infeasible")

        # Walk the shortest path back from the sink to find the bottleneck.
        path = []  # (row, col, forward?) arcs, excluding the virtual endpoints
        j = par_sink
        bottleneck = demand[j]
        node = ("col", j)
        while True:
            kind, idx = node
            if kind == "col":
                i = par_col[idx]
                path.append((i, idx, True))
                node = ("row", i)
            else:
                prev = par_row[idx]
                if prev < 0:  # reached the virtual source
                    bottleneck = min(bottleneck, supply[idx])
                    break
                path.append((idx, prev, False))
                bottleneck = min(bottleneck, flow[idx, prev])
                node = ("col", prev)

        first_row = path[-1][0]
        last_col = par_sink
        for i, jj, forward in path:
            if forward:
                flow[i, jj] += bottleneck
            else:
                flow[i, jj] -= bottleneck
        supply[first_row] -= bottleneck
        demand[last_col] -= bottleneck
        supply[supply < tiny] = 0.0
        demand[demand < tiny] = 0.0
        flow[flow < tiny] = 0.0

        # Potential update keeps all residual reduced costs nonnegative.
        pot_row += np.minimum(dist_row, dist_sink)
        pot_col += np.minimum(dist_col, dist_sink)
        pot_sink += dist_sink
    else:
        raise RuntimeError("successive shortest paths failed to terminate")

    return Coupling(flow, mu, nu)


def _dijkstra(C, supply, demand, flow, pot_row, pot_col, pot_sink):
    """One shortest-path computation over the residual transport graph.

    Distances are measured in reduced costs (cost + potential difference),
    which are nonnegative by the successive-shortest-paths invariant.
    Returns distances and parent pointers; parents of rows are the column
    index of the reverse arc used, or -1 when fed from the virtual source.
    """
    n, m = C.shape
    inf = np.inf
    dist_row = np.where(supply > 0, -pot_row, inf)
    dist_col = np.full(m, inf)
    dist_sink = inf
    par_row = np.where(supply > 0, -1, -2)  # -1: virtual source, -2: unset
    par_col = np.full(m, -2, dtype=int)
    par_sink = -2
    done_row = np.zeros(n, dtype=bool)
    done_col = np.zeros(m, dtype=bool)

    while True:
        dr = np.where(done_row, inf, dist_row)
        dc = np.where(done_col, inf, dist_col)
        best_r = int(dr.argmin()) if n else 0
        best_c = int(dc.argmin()) if m else 0
        cand = [(dr[best_r], 0), (dc[best_c], 1), (dist_sink, 2)]
        d, kind = min(cand, key=lambda t: t[0])
        if not np.isfinite(d) or kind == 2:
            break
        if kind == 0:
            i = best_r
            done_row[i] = True
            nd = d + C[i] + pot_row[i] - pot_col
            better = (~done_col) & (nd < dist_col)
            dist_col[better] = nd[better]
            par_col[better] = i
        else:
            j = best_c
            done_col[j] = True
            if demand[j] > 0 and d + pot_col[j] - pot_sink < dist_sink:
                dist_sink = d + pot_col[j] - pot_sink
                par_sink = j
            back = flow[:, j] > 0
            if back.any():
                nd = d - C[:, j] + pot_col[j] - pot_row
                better = back & (~done_row) & (nd < dist_row)
                dist_row[better] = nd[better]
                par_row[better] = j

    return dist_row, dist_col, dist_sink, par_row, par_col, par_sink


def _logsumexp(a, axis):
    mx = np.max(a, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(mx, axis=axis) + np.log(
            np.sum(np.exp(a - mx), axis=axis)
        )


def _plan_violation(plan, a, b) -> float:
    return float(max(
        np.abs(plan.sum(axis=1) - a).max(),
        np.abs(plan.sum(axis=0) - b).max(),
    ))


def _round_to_feasible(plan, a, b):
    """Project an almost-feasible plan onto the transport polytope.

    Rows are scaled down where they exceed their marginal, then columns,
    then the remaining mass deficit is distributed as a rank-one update.
    Entries stay nonnegative and the cost moves by at most
    max(C) * (total marginal deficit)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = plan.sum(axis=1)
        plan = plan * np.where(r > 0, np.minimum(1.0, a / np.where(r > 0, r, 1.0)), 1.0)[:, None]
        s = plan.sum(axis=0)
        plan = plan * np.where(s > 0, np.minimum(1.0, b / np.where(s > 0, s, 1.0)), 1.0)[None, :]
    err_r = np.maximum(a - plan.sum(axis=1), 0.0)
    err_c = np.maximum(b - plan.sum(axis=0), 0.0)
    total = err_r.sum()
    if total > 0:
        plan = plan + np.outer(err_r, err_c) / total
    return plan


def solve_sinkhorn(
    c: CostMatrix,
    mu: Histogram,
    nu: Histogram,
    epsilon: float,
    max_iters: int = 100000,
    tol: float = 1e-6,
) -> Coupling:
    """Entropy-regularized transport via log-domain Sinkhorn iterations.

    Alternates row and column scalings of exp(-C/epsilon) until both plan
    marginals match mu and nu within ``tol`` (max absolute deviation). All
    updates run through log-sum-exp, so small ``epsilon`` relative to the
    cost scale does not underflow; additionally, small epsilons are reached
    by halving from max(C) with the dual potentials carried across levels,
    which cuts the iteration count sharply. The final plan is rounded onto
    the transport polytope (row/column scaling plus a rank-one correction),
    so the returned coupling is feasible to float precision and its cost
    can never undercut the exact optimum. If the iteration budget runs out
    before the violation reaches ``tol``, a
    :class:`SinkhornConvergenceWarning` carrying the achieved pre-rounding
    violation is emitted and the rounded plan is returned anyway.
    """
    _check_instance(c, mu, nu)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")

    a = mu.weights
    b = nu.weights
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)

    # epsilon-scaling schedule: halve from the cost scale down to epsilon
    levels = []
    cmax = float(c.values.max())
    e = cmax
    while e > epsilon * 1.0000001 and cmax > 0:
        levels.append(e)
        e /= 2.0
    levels.append(epsilon)

    f = np.zeros(len(a))  # potentials in cost units, reusable across levels
    g = np.zeros(len(b))
    plan = None
    violation = np.inf
    check_every = 10
    for level, eps in enumerate(levels):
        final = level == len(levels) - 1
        mC = -c.values / eps
        phi = f / eps
        psi = g / eps
        budget = max_iters if final else 500
        level_tol = tol if final else max(tol, 1e-4)
        converged = False
        for it in range(budget):
            phi = log_a - _logsumexp(mC + psi[None, :], axis=1)
            psi = log_b - _logsumexp(mC + phi[:, None], axis=0)
            if (it + 1) % check_every == 0 or it + 1 == budget:
                plan = np.exp(mC + phi[:, None] + psi[None, :])
                violation = _plan_violation(plan, a, b)
                if violation <= level_tol:
                    converged = True
                    break
        f = phi * eps
        g = psi * eps
        if final and not converged:
            warnings.warn(
                SinkhornConvergenceWarning(
                    f"sinkhorn stopped after {budget} iterations with "
                    f"marginal violation {violation:.3e} (requested {tol:.3e})",
                    violation,
                )
            )
    if plan is None:
        plan = np.exp(-c.values / epsilon + phi[:, None] + psi[None, :])

    return Coupling(_round_to_feasible(plan, a, b), mu, nu)
