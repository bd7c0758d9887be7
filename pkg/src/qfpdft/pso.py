"""Particle swarm minimizer with box-bounded and periodic coordinates.

Constriction-coefficient PSO: each particle is pulled toward its own best
position and the swarm best.  Periodic coordinates (phases) move along the
shortest arc and wrap; bounded coordinates are clipped to the box and lose
the velocity component that pushed them out.
"""

import numpy as np

__all__ = ["particle_swarm", "SwarmOutcome"]


class SwarmOutcome:
    """Result of one swarm run.

    Attributes
    ----------
    x : ndarray
        Best position found.
    fun : float
        Objective value at ``x``.
    trace : ndarray
        Swarm-best objective after each iteration (index 0 is the initial swarm).
    n_iter : int
        Iterations performed.
    state : tuple
        ``(positions, velocities, personal_bests)`` at exit; pass back as
        ``state`` to continue the same swarm.
    """

    def __init__(self, x, fun, trace, n_iter, state=None):
        self.x = x
        self.fun = fun
        self.trace = trace
        self.n_iter = n_iter
        self.state = state

    def __repr__(self):
        return f"SwarmOutcome(fun={self.fun:.6g}, n_iter={self.n_iter})"


def _pick_best(costs, positions):
    """Index of the lowest cost; ties go to the lexicographically smallest position."""
    best = np.min(costs)
    tied = np.flatnonzero(costs == best)
    if len(tied) == 1:
        return tied[0]
    # lexsort sorts by the last key first
    order = np.lexsort(positions[tied].T[::-1])
    return tied[order[0]]


def particle_swarm(func, lower, upper, periodic=None, swarm_size=100,
                   iterations=2000, inertia=0.729, cognitive=1.49445,
                   social=1.49445, velocity_clamp=0.2, stall_iterations=None,
                   stall_tol=1e-9, init=None, state=None, rng=None,
                   callback=None):
    """Minimize a batched objective with a particle swarm.

    Parameters
    ----------
    func : callable
        ``func(X) -> costs`` with ``X`` of shape ``(swarm_size, n_dim)``.
        Non-finite costs are treated as ``+inf``.
    lower, upper : array_like
        Coordinate bounds.  For periodic coordinates these give the period.
    periodic : array_like of bool, optional
        Coordinates that wrap around instead of being clipped.
    swarm_size, iterations : int
    inertia, cognitive, social : float
        Velocity update coefficients.
    velocity_clamp : float
        Maximum speed per coordinate as a fraction of its range.
    stall_iterations : int, optional
        Stop early once the swarm best has improved by less than ``stall_tol``
        over this many iterations.  ``None`` always runs the full budget.
    init : array_like, optional
        Positions to seed the first particles with; the rest are uniform.
    state : tuple, optional
        Swarm state from a previous ``SwarmOutcome``.  The swarm resumes from
        it and personal bests are re-scored with ``func``.
    rng : numpy.random.Generator, optional
    callback : callable, optional
        Called as ``callback(iteration, best_cost)`` after every iteration.

    Returns
    -------
    SwarmOutcome
    """
    rng = np.random.default_rng() if rng is None else rng
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n_dim = lower.size
    periodic = np.zeros(n_dim, bool) if periodic is None else np.asarray(periodic, bool)
    span = upper - lower
    if np.any(span <= 0):
        raise ValueError("upper bounds must exceed lower bounds")
    vmax = velocity_clamp * span

    def evaluate(pos):
        f = np.asarray(func(pos), dtype=float)
        return np.where(np.isfinite(f), f, np.inf)

    def arc(delta):
        # shortest signed displacement along periodic coordinates
        wrapped = delta - span * np.round(delta / span)
        return np.where(periodic, wrapped, delta)

    if state is None:
        x = lower + rng.random((swarm_size, n_dim)) * span
        if init is not None:
            init = np.atleast_2d(np.asarray(init, dtype=float))[:swarm_size]
            x[:len(init)] = init
        v = (2.0 * rng.random((swarm_size, n_dim)) - 1.0) * vmax
        pbest = x.copy()
    else:
        x, v, pbest = (np.array(a, dtype=float) for a in state)
        swarm_size = len(x)
    fpbest = evaluate(pbest)
    g = _pick_best(fpbest, pbest)
    gbest, fgbest = pbest[g].copy(), fpbest[g]
    trace = [fgbest]

    n_iter = 0
    for n_iter in range(1, iterations + 1):
        r1 = rng.random((swarm_size, n_dim))
        r2 = rng.random((swarm_size, n_dim))
        v = (inertia * v + cognitive * r1 * arc(pbest - x)
             + social * r2 * arc(gbest - x))
        np.clip(v, -vmax, vmax, out=v)
        x = x + v

        wrapped = lower + np.mod(x - lower, span)
        clipped = np.clip(x, lower, upper)
        hit = ~periodic & (x != clipped)
        v[hit] = 0.0
        x = np.where(periodic, wrapped, clipped)
        # mod can land exactly on the upper end through rounding
        x = np.where(periodic & (x >= upper), lower, x)

        fx = evaluate(x)
        better = fx < fpbest
        pbest[better] = x[better]
        fpbest[better] = fx[better]
        g = _pick_best(fpbest, pbest)
        if fpbest[g] < fgbest or (fpbest[g] == fgbest and
                                  tuple(pbest[g]) < tuple(gbest)):
            gbest, fgbest = pbest[g].copy(), fpbest[g]
        trace.append(fgbest)
        if callback is not None:
            callback(n_iter, fgbest)
        if (stall_iterations and n_iter >= stall_iterations
                and trace[-1 - stall_iterations] - fgbest < stall_tol):
            break

    return SwarmOutcome(gbest, float(fgbest), np.array(trace), n_iter,
                        state=(x, v, pbest))
