"""Discretized covariation structure of the Gaussian driver.

The driver is a d-dimensional continuous martingale whose quadratic
covariation factors into a constant symmetric matrix ``pi = sigma @ sigma.T``
and a clock measure carried by per-step masses on a time grid.  This module
provides the weighted inner product induced by that pair, the linear map
sending an integrand to its cumulative drift adjustment (an isometry onto the
space of admissible drifts), increment sampling, and the log-density of the
inverse stochastic exponential used to reweight paths after a change of
measure.

All integrands are sampled at the left endpoint of each grid interval, the
same convention the Euler scheme uses for SDE coefficients.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NonFiniteError


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Nodes 0 = t_0 < ... < t_K = horizon plus per-interval clock masses.

    ``step_masses[k]`` is the clock mass of the interval (t_k, t_{k+1}];
    for the default uniform grid with Lebesgue clock it equals the step
    length.  Keeping masses explicit lets absolutely continuous and
    structurally singular clocks share one code path.
    """

    horizon: float
    times: np.ndarray
    step_masses: np.ndarray

    def __post_init__(self):
        times = _readonly(self.times)
        masses = _readonly(self.step_masses)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "step_masses", masses)
        if times.ndim != 1 or times.size < 2:
            raise DimensionError("grid needs at least two nodes")
        if masses.shape != (times.size - 1,):
            raise DimensionError("need one clock mass per interval")
        if times[0] != 0.0 or not np.isclose(times[-1], self.horizon):
            raise ValueError("grid must start at 0 and end at the horizon")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("grid times must be strictly increasing")
        if np.any(masses < 0.0):
            raise ValueError("clock masses must be nonnegative")
        if masses.sum() <= 0.0:
            raise ValueError("total clock mass must be positive")

    @classmethod
    def uniform(cls, horizon, n_steps):
        """Equally spaced grid with Lebesgue clock (mass = step length)."""
        if n_steps < 1:
            raise ValueError("n_steps must be positive")
        times = np.linspace(0.0, horizon, n_steps + 1)
        dt = horizon / n_steps
        return cls(horizon=float(horizon), times=times,
                   step_masses=np.full(n_steps, dt))

    @property
    def n_steps(self):
        return self.times.size - 1

    @property
    def left_times(self):
        return self.times[:-1]

    @property
    def step_lengths(self):
        return np.diff(self.times)


@dataclass(frozen=True)
class CovariationSpec:
    """Diffusion matrix and derived covariation density on a grid.

    ``pi = sigma @ sigma.T`` is constant in time; a per-step table
    ``pi_steps`` of shape (n_steps, d, d) may be supplied to override it in
    the inner product and the drift map (increment sampling always uses
    ``sigma``).
    """

    sigma: np.ndarray
    grid: TimeGrid
    pi_steps: np.ndarray | None = None
    pi: np.ndarray = field(init=False)

    def __post_init__(self):
        sigma = _readonly(self.sigma)
        object.__setattr__(self, "sigma", sigma)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DimensionError("sigma must be a square matrix")
        if not np.all(np.isfinite(sigma)):
            raise NonFiniteError("sigma has non-finite entries")
        if np.any(np.linalg.norm(sigma, axis=1) == 0.0):
            raise ValueError("sigma must not contain a zero row")
        object.__setattr__(self, "pi", _readonly(sigma @ sigma.T))
        if self.pi_steps is not None:
            pi_steps = _readonly(self.pi_steps)
            object.__setattr__(self, "pi_steps", pi_steps)
            want = (self.grid.n_steps, sigma.shape[0], sigma.shape[0])
            if pi_steps.shape != want:
                raise DimensionError(
                    f"pi_steps must have shape {want}, got {pi_steps.shape}")

    @property
    def d(self):
        return self.sigma.shape[0]


@dataclass(frozen=True)
class DriftEvaluation:
    """A drift adjustment evaluated on the grid.

    ``values[k]`` is the integrand at the left endpoint t_k, ``cumulative[k]``
    the drift at node t_k (zero at the origin), and ``h_norm_sq`` its squared
    norm in the drift space, which discretely equals the weighted squared
    norm of the integrand.
    """

    values: np.ndarray
    cumulative: np.ndarray
    h_norm_sq: float


def _check_grid_values(f, spec, name):
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (spec.grid.n_steps, spec.d):
        raise DimensionError(
            f"{name} must have shape (n_steps, d) = "
            f"({spec.grid.n_steps}, {spec.d}), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return f


def _pi_contract(f, spec):
    """Return the array with rows pi_k f_k."""
    if spec.pi_steps is None:
        return f @ spec.pi
    return np.einsum("kde,ke->kd", spec.pi_steps, f)


def lambda2_inner(f, g, spec):
    """Weighted inner product  sum_k f_k' pi_k g_k  dmu_k.

    The induced seminorm can vanish on nonzero integrands when ``pi`` is
    singular; equality of drifts is always tested through this form, never
    componentwise.
    """
    f = _check_grid_values(f, spec, "f")
    g = _check_grid_values(g, spec, "g")
    terms = np.sum(_pi_contract(f, spec) * g, axis=1) * spec.grid.step_masses
    return float(np.sum(terms))


def cameron_martin_map(f, spec):
    """Map a grid-sampled integrand to its cumulative drift adjustment.

    Increments are pi_k f_k dmu_k, accumulated from zero.  The squared norm
    is recovered from the accumulated increments rather than from
    ``lambda2_inner`` so the discrete isometry is validated through two
    separate floating-point routes.
    """
    f = _check_grid_values(f, spec, "f")
    increments = _pi_contract(f, spec) * spec.grid.step_masses[:, None]
    cumulative = np.zeros((spec.grid.n_steps + 1, spec.d))
    np.cumsum(increments, axis=0, out=cumulative[1:])
    steps = cumulative[1:] - cumulative[:-1]
    h_norm_sq = float(np.sum(np.sum(f * steps, axis=1)))
    return DriftEvaluation(values=_readonly(f), cumulative=_readonly(cumulative),
                           h_norm_sq=h_norm_sq)


def sample_increments(spec, rng, n_paths):
    """Draw driver increments for ``n_paths`` paths.

    Step k is sigma z sqrt(dmu_k) with z standard normal, so its covariance
    is pi dmu_k; increments are independent across steps and paths.  Returns
    shape (n_paths, n_steps, d); ``n_paths = 0`` yields an empty batch.
    """
    if n_paths < 0:
        raise ValueError("n_paths must be nonnegative")
    z = rng.standard_normal((n_paths, spec.grid.n_steps, spec.d))
    scaled = z * np.sqrt(spec.grid.step_masses)[None, :, None]
    return scaled @ spec.sigma.T


def log_likelihood_inverse(drift, increments, spec):
    """Log of the inverse stochastic exponential along given increments.

    Returns -sum_k f_k' dM_k + h_norm_sq / 2 with the left-endpoint (Ito)
    reading of the stochastic integral.  The increments must be the same
    ones that drove the path, under whichever measure it was simulated.
    Accepts one path (n_steps, d) or a batch (..., n_steps, d).
    """
    increments = np.asarray(increments, dtype=np.float64)
    want = (spec.grid.n_steps, spec.d)
    if increments.shape[-2:] != want:
        raise DimensionError(
            f"increments must end in shape {want}, got {increments.shape}")
    if drift.values.shape != want:
        raise DimensionError("drift was evaluated on a different grid")
    stochastic = np.einsum("kd,...kd->...", drift.values, increments)
    return -stochastic + 0.5 * drift.h_norm_sq
