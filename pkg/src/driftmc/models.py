"""Euler-Maruyama simulation of the supported asset models.

Four multivariate dynamics share one driver convention: the first n driver
coordinates move the assets, the last n (when present) move the volatility
factors, and all cross-correlation is carried by the diffusion matrix.
Simulation runs either under the original measure or, when a drift network
is supplied, under the shifted measure obtained by adding the finite
variation part ``pi f dmu`` to the same Gaussian increments; the per-path
log inverse likelihood then accumulates alongside the states.
"""

from dataclasses import dataclass

import numpy as np

from .covariation import cameron_martin_map, log_likelihood_inverse
from .errors import DimensionError, ModelValidationError, SimulationError
from .network import forward

BLACK_SCHOLES = "black_scholes"
HESTON = "heston"
THREE_HALVES = "three_halves"
STEIN_STEIN = "stein_stein"

MODEL_TAGS = (BLACK_SCHOLES, HESTON, THREE_HALVES, STEIN_STEIN)
_VOL_TAGS = (HESTON, THREE_HALVES, STEIN_STEIN)


def _vec(x, name):
    a = np.array(x, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d array")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one asset model.

    ``reversion`` holds the diagonal of the mean-reversion speed matrix
    (storing the diagonal keeps the matrix diagonal by construction);
    ``mean_level`` is the reversion target.  ``rate`` is used for
    discounting only; under risk-neutral dynamics set mu = rate * ones.
    """

    tag: str
    mu: np.ndarray
    sigma: np.ndarray
    s0: np.ndarray
    rate: float = 0.0
    mean_level: np.ndarray | None = None
    reversion: np.ndarray | None = None
    v0: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu", _vec(self.mu, "mu"))
        object.__setattr__(self, "s0", _vec(self.s0, "s0"))
        sigma = np.array(self.sigma, dtype=np.float64)
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)
        for name in ("mean_level", "reversion", "v0"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _vec(value, name))

    @property
    def n(self):
        return self.s0.size

    @property
    def d(self):
        return self.sigma.shape[0] if self.sigma.ndim == 2 else -1

    @property
    def has_volatility(self):
        return self.tag in _VOL_TAGS

    @property
    def n_state(self):
        return 2 * self.n if self.has_volatility else self.n


@dataclass(frozen=True)
class Violation:
    """One structural invariant breach, with the offending index if any."""

    code: str
    index: int | None
    message: str

    def __str__(self):
        where = "" if self.index is None else f"[{self.index}]"
        return f"{self.code}{where}: {self.message}"


def validate(spec):
    """Return all structural violations of the spec; empty means ok.

    Violations are data, not failures: callers that need parameters as
    given (for example a rejection sampler) inspect the list.
    """
    out = []
    if spec.tag not in MODEL_TAGS:
        out.append(Violation("tag", None, f"unknown model tag {spec.tag!r}"))
        return out
    n = spec.n
    if spec.sigma.ndim != 2 or spec.sigma.shape[0] != spec.sigma.shape[1]:
        out.append(Violation("sigma", None, "must be a square matrix"))
        return out
    d = spec.d
    want_d = n if spec.tag == BLACK_SCHOLES else 2 * n
    if d != want_d:
        out.append(Violation("sigma", None,
                             f"driver dimension {d} but model needs {want_d}"))
        return out
    for name in ("mu", "sigma", "s0"):
        if not np.all(np.isfinite(getattr(spec, name))):
            out.append(Violation(name, None, "non-finite entries"))
    if spec.mu.size != n:
        out.append(Violation("mu", None, f"length {spec.mu.size}, expected {n}"))
    row_sq = np.sum(spec.sigma**2, axis=1)
    for k in np.nonzero(row_sq == 0.0)[0]:
        out.append(Violation("sigma", int(k), "zero row"))
    for k in np.nonzero(spec.s0 <= 0.0)[0]:
        out.append(Violation("s0", int(k), "must be positive"))

    if spec.tag == BLACK_SCHOLES:
        return out

    for name in ("mean_level", "reversion", "v0"):
        value = getattr(spec, name)
        if value is None:
            out.append(Violation(name, None, "required for this model"))
        elif value.size != n:
            out.append(Violation(name, None, f"length {value.size}, expected {n}"))
        elif not np.all(np.isfinite(value)):
            out.append(Violation(name, None, "non-finite entries"))
    if any(v.code in ("mean_level", "reversion", "v0") for v in out):
        return out

    vol_row_sq = row_sq[n:]
    if spec.tag in (HESTON, THREE_HALVES):
        for k in np.nonzero(spec.v0 <= 0.0)[0]:
            out.append(Violation("v0", int(k), "must be positive"))
    if spec.tag == HESTON:
        # Componentwise positivity criterion; boundary equality accepted.
        feller = 2.0 * spec.reversion * spec.mean_level
        for k in np.nonzero(feller < vol_row_sq)[0]:
            out.append(Violation(
                "feller", int(k),
                f"2*reversion*mean_level = {feller[k]:.6g} < "
                f"|sigma_vol|^2 = {vol_row_sq[k]:.6g}"))
    if spec.tag == THREE_HALVES:
        bound = -0.5 * vol_row_sq
        for k in np.nonzero(spec.reversion < bound)[0]:
            out.append(Violation(
                "non_explosion", int(k),
                f"reversion = {spec.reversion[k]:.6g} < "
                f"-|sigma_vol|^2/2 = {bound[k]:.6g}"))
    return out


@dataclass(frozen=True)
class PathBatch:
    """Simulated trajectories plus the data needed to reweight them.

    ``states`` has shape (n_paths, n_steps+1, n_state) with the assets in
    the leading n coordinates; ``increments`` are the driver increments that
    produced the states; ``log_inverse_likelihood`` is zero under the
    original measure.
    """

    states: np.ndarray
    increments: np.ndarray
    log_inverse_likelihood: np.ndarray
    measure: str


def split_driver(increments, n):
    """Split driver increments into (asset block, volatility block)."""
    d = increments.shape[-1]
    if d != 2 * n:
        raise DimensionError(f"driver dimension {d} is not 2*{n}")
    return increments[..., :n], increments[..., n:]


def simulate(spec, grid, cov, drift=None, rng=None, n_paths=0,
             driver_increments=None):
    """Euler-Maruyama paths of the model on the given grid.

    With ``drift`` set, the Gaussian increments are shifted by the finite
    variation part of the measure change and the log inverse likelihood is
    accumulated from those same shifted increments, so a zero drift
    reproduces the unshifted batch exactly.  ``driver_increments`` (shape
    (n_paths, n_steps, d), standard normal scale) bypasses the rng; passing
    zeros gives the deterministic skeleton used by tests.
    """
    violations = validate(spec)
    if violations:
        raise ModelValidationError(violations)
    if cov.d != spec.d:
        raise DimensionError(f"covariation dimension {cov.d} != model {spec.d}")
    if drift is not None and drift.output_width != spec.d:
        raise DimensionError("drift output width must match the driver dimension")

    n_steps = grid.n_steps
    masses = grid.step_masses
    if driver_increments is not None:
        z = np.asarray(driver_increments, dtype=np.float64)
        if z.shape != (n_paths, n_steps, spec.d):
            raise DimensionError(
                f"driver_increments must have shape ({n_paths}, {n_steps}, {spec.d})")
    else:
        z = rng.standard_normal((n_paths, n_steps, spec.d))
    dm = (z * np.sqrt(masses)[None, :, None]) @ spec.sigma.T

    drift_eval = None
    if drift is not None:
        drift_eval = cameron_martin_map(forward(drift, grid.left_times), cov)
        # Finite variation part of the shifted driver: pi f dmu per step.
        dm = dm + (drift_eval.cumulative[1:] - drift_eval.cumulative[:-1])

    n = spec.n
    states = np.empty((n_paths, n_steps + 1, spec.n_state))
    states[:, 0, :n] = spec.s0
    if spec.has_volatility:
        states[:, 0, n:] = spec.v0

    mu, theta, m = spec.mu, spec.reversion, spec.mean_level
    # Overflow is detected explicitly below; do not warn along the way.
    with np.errstate(over="ignore", invalid="ignore"):
        _euler_loop(spec, states, dm, masses, mu, theta, m)

    bad = np.nonzero(~np.isfinite(states).all(axis=(1, 2)))[0]
    if bad.size:
        raise SimulationError(
            f"{bad.size} path(s) reached a non-finite state, first at index "
            f"{int(bad[0])}", path_indices=bad)

    if drift_eval is None:
        log_lr = np.zeros(n_paths)
        measure = "P"
    else:
        log_lr = np.asarray(log_likelihood_inverse(drift_eval, dm, cov),
                            dtype=np.float64).reshape(n_paths)
        measure = "P_h"
    return PathBatch(states=states, increments=dm,
                     log_inverse_likelihood=log_lr, measure=measure)


def _euler_loop(spec, states, dm, masses, mu, theta, m):
    n = spec.n
    for k in range(dm.shape[1]):
        h = masses[k]
        s = states[:, k, :n]
        if spec.tag == BLACK_SCHOLES:
            states[:, k + 1, :n] = s + s * (mu * h) + s * dm[:, k, :]
            continue
        v = states[:, k, n:]
        dm1, dm2 = dm[:, k, :n], dm[:, k, n:]
        if spec.tag == HESTON:
            vp = np.maximum(v, 0.0)
            root = np.sqrt(vp)
            states[:, k + 1, :n] = s + s * (mu * h) + s * root * dm1
            states[:, k + 1, n:] = v + theta * (m - vp) * h + root * dm2
        elif spec.tag == THREE_HALVES:
            vp = np.maximum(v, 0.0)
            states[:, k + 1, :n] = s + s * (mu * h) + s * np.sqrt(vp) * dm1
            states[:, k + 1, n:] = v + theta * vp * (m - vp) * h + vp**1.5 * dm2
        else:  # STEIN_STEIN, volatility signed
            states[:, k + 1, :n] = s + s * (mu * h) + s * v * dm1
            states[:, k + 1, n:] = v + theta * (m - v) * h + dm2
