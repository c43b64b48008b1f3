"""Path functionals: arithmetic Asian basket calls, with optional knock-out.

The basket average is a quadrature of the weighted asset value over the
grid (trapezoidal by default, left Riemann behind a switch) divided by the
horizon.  Knock-out barriers are monitored discretely at every grid node,
endpoints included, with strict inequalities.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonFiniteError

ASIAN_BASKET_CALL = "asian_basket_call"
ASIAN_BASKET_KNOCKOUT = "asian_basket_knockout"

TRAPEZOID = "trapezoid"
LEFT_RIEMANN = "left"


@dataclass(frozen=True)
class PayoffSpec:
    """Weights, strike, optional barriers and the averaging rule."""

    tag: str
    weights: np.ndarray
    strike: float
    lower: float | None = None
    upper: float | None = None
    averaging: str = TRAPEZOID

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        if self.tag not in (ASIAN_BASKET_CALL, ASIAN_BASKET_KNOCKOUT):
            raise ValueError(f"unknown payoff tag {self.tag!r}")
        if self.averaging not in (TRAPEZOID, LEFT_RIEMANN):
            raise ValueError(f"unknown averaging rule {self.averaging!r}")
        if not np.isclose(w.sum(), 1.0, atol=1e-9):
            raise ValueError("basket weights must sum to 1")
        if not self.strike > 0.0:
            raise ValueError("strike must be positive")
        has_barriers = self.lower is not None and self.upper is not None
        if self.tag == ASIAN_BASKET_KNOCKOUT:
            if not has_barriers:
                raise ValueError("knock-out payoff needs both barriers")
            if not self.lower < self.upper:
                raise ValueError("need lower < upper barrier")
        elif self.lower is not None or self.upper is not None:
            raise ValueError("barriers are only valid for the knock-out tag")

    @property
    def n_assets(self):
        return self.weights.size

    @property
    def has_barriers(self):
        return self.tag == ASIAN_BASKET_KNOCKOUT


def basket_weights(mu, sigma):
    """Risk-adjusted weights mu_k / |sigma row k|, normalized to sum to 1.

    The asset rows are the first len(mu) rows of sigma.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    rows = sigma[:mu.size]
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("sigma must not contain a zero asset row")
    raw = mu / norms
    total = raw.sum()
    if total == 0.0:
        raise ValueError("risk-adjusted weights sum to zero; cannot normalize")
    return raw / total


def node_quadrature(grid, averaging):
    """Per-node quadrature weights for integrating over the grid."""
    steps = grid.step_lengths
    w = np.zeros(grid.n_steps + 1)
    if averaging == TRAPEZOID:
        w[:-1] += 0.5 * steps
        w[1:] += 0.5 * steps
    elif averaging == LEFT_RIEMANN:
        w[:-1] = steps
    else:
        raise ValueError(f"unknown averaging rule {averaging!r}")
    return w


@dataclass(frozen=True)
class PayoffBatch:
    """Per-path payoff values with the diagnostic event indicators.

    ``above_strike`` marks paths whose basket average exceeds the strike
    (the event behind the positive-payoff fraction); ``knocked_out`` is
    None for barrier-free payoffs.
    """

    values: np.ndarray
    above_strike: np.ndarray
    knocked_out: np.ndarray | None


def evaluate_batch(spec, states, grid):
    """Vectorized payoff of a batch of trajectories.

    ``states`` has shape (n_paths, n_steps+1, n_state); only the leading
    asset block enters the basket.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 3 or states.shape[1] != grid.n_steps + 1:
        raise DimensionError(
            "states must have shape (n_paths, n_steps+1, n_state)")
    if states.shape[2] < spec.n_assets:
        raise DimensionError("state dimension smaller than the basket size")
    if not np.all(np.isfinite(states)):
        raise NonFiniteError("states contain non-finite values")
    basket = states[:, :, :spec.n_assets] @ spec.weights
    quad = node_quadrature(grid, spec.averaging)
    average = (basket @ quad) / grid.horizon
    above = average > spec.strike
    values = np.maximum(average - spec.strike, 0.0)
    knocked = None
    if spec.has_barriers:
        inside = (basket > spec.lower) & (basket < spec.upper)
        alive = inside.all(axis=1)
        knocked = ~alive
        values = values * alive
    return PayoffBatch(values=values, above_strike=above, knocked_out=knocked)


def evaluate(spec, path, grid):
    """Payoff of a single trajectory of shape (n_steps+1, n_state)."""
    path = np.asarray(path, dtype=np.float64)
    if path.ndim != 2:
        raise DimensionError("path must have shape (n_steps+1, n_state)")
    return float(evaluate_batch(spec, path[None], grid).values[0])


def knockout_indicator(spec, path, grid):
    """1 iff the weighted basket stays strictly inside (lower, upper)."""
    if not spec.has_barriers:
        raise ValueError("payoff has no barriers")
    path = np.asarray(path, dtype=np.float64)
    basket = path[:, :spec.n_assets] @ spec.weights
    inside = (basket > spec.lower) & (basket < spec.upper)
    return int(inside.all())
