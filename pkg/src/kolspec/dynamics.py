"""Evolution of a weighted sample cloud under drift, diffusion and a
mass source.

Each step approximates the current density from the cloud itself, solves
L f = g for the potential induced by the centered source, and subtracts
its gradient from the prescribed velocity:

    u_eff = u - grad(f)

Samples then take an Euler-Maruyama step and the total mass follows the
spatially averaged source exactly, M <- M exp(gbar dt).  Relative mass
changes are carried by transport instead of reweighting, which keeps the
cloud equally weighted.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ParameterError
from .pipeline import KolmogorovModel
from .validation import check_points, check_scalar

# Operator parameters that EvolutionConfig.model_params may override.
_MODEL_KEYS = {"beta", "knn", "delta_tol", "operator_delta_tol", "tree_count",
               "xi_range", "tuning_delta", "eig_tol", "n_modes", "seed",
               "workers"}


@dataclass
class EvolutionConfig:
    """Everything defining an evolution run except the initial cloud."""

    dt: float = 0.01
    steps: int = 100
    seed: int = 0
    sigma: object = 1.0
    velocity: object = None
    source: object = None
    retune_every: int = 1
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        check_scalar(self.dt, "dt", positive=True)
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 0:
            raise ParameterError(f"steps must be a nonnegative integer, "
                                 f"got {self.steps!r}")
        if not isinstance(self.retune_every, (int, np.integer)) \
                or self.retune_every < 1:
            raise ParameterError("retune_every must be a positive integer")
        extra = set(self.model_params) - _MODEL_KEYS
        if extra:
            raise ParameterError(f"unknown model_params {sorted(extra)}")


@dataclass
class EvolutionState:
    """Cloud, clock and mass, plus cached tuning between refits."""

    points: np.ndarray
    time: float = 0.0
    mass: float = 1.0
    step: int = 0
    eps_density: float = None
    eps_operator: float = None
    dim: float = None


def sigma_matrix(sigma, m):
    """Normalize the diffusion amplitude to an (m, m) matrix."""
    arr = np.asarray(sigma, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr) * np.eye(m)
    if arr.shape != (m, m):
        raise ParameterError(f"sigma must be scalar or ({m}, {m}), "
                             f"got shape {arr.shape}")
    return arr


def effective_velocity(state, cfg):
    """Velocity field driving the next step, u - grad(f).

    Returns (u_eff, solution, gbar, model).  When the source vanishes
    identically at this time the solve contributes nothing and is
    skipped; `solution` and `model` are then None.
    """
    x = state.points
    n, m = x.shape
    u = np.zeros((n, m)) if cfg.velocity is None \
        else np.asarray(cfg.velocity(x, state.time), dtype=np.float64)
    if u.shape != (n, m):
        raise ParameterError(f"velocity returned shape {u.shape}, "
                             f"expected {(n, m)}")
    g_raw = np.zeros(n) if cfg.source is None \
        else np.asarray(cfg.source(x, state.time), dtype=np.float64).ravel()
    if g_raw.shape[0] != n:
        raise ParameterError("source must return one value per sample")
    gbar = float(g_raw.mean())
    if np.all(g_raw == 0.0):
        return u, None, gbar, None

    retune = state.eps_density is None or state.step % cfg.retune_every == 0
    params = dict(cfg.model_params)
    params.setdefault("c", 1.0)
    if not retune:
        params.update(eps_density=state.eps_density,
                      eps_operator=state.eps_operator, dim=state.dim)
    model = KolmogorovModel(**params).fit(x)
    state.eps_density = model.eps_density_
    state.eps_operator = model.eps_operator_
    state.dim = model.dim_
    solution = model.solve(g_raw - gbar)
    u_eff = u - model.gradient_field(solution)
    return u_eff, solution, gbar, model


def step_euler_maruyama(state, cfg, u_eff, gbar):
    """Advance the cloud one step and update mass exactly.

    Each sample draws its Brownian increment from its own counter-based
    stream seeded by (seed, step, sample index), so trajectories do not
    depend on batching or thread counts.
    """
    x = state.points
    n, m = x.shape
    sig = sigma_matrix(cfg.sigma, m)
    w = np.empty((n, m))
    for i in range(n):
        w[i] = np.random.default_rng([cfg.seed, state.step, i]).standard_normal(m)
    new_points = x + cfg.dt * u_eff + np.sqrt(cfg.dt) * (w @ sig.T)
    return replace(state,
                   points=new_points,
                   time=state.time + cfg.dt,
                   mass=state.mass * float(np.exp(gbar * cfg.dt)),
                   step=state.step + 1)


def run_evolution(points, cfg, callback=None):
    """Run the full evolution loop.

    The callback, if given, receives (state, u_eff, solution, gbar)
    before every step and once more at the final time, and is the hook
    used to write snapshots.  Returns the final state.
    """
    points = check_points(points, "points")
    state = EvolutionState(points=points)
    for _ in range(cfg.steps):
        u_eff, solution, gbar, _model = effective_velocity(state, cfg)
        if callback is not None:
            callback(state, u_eff, solution, gbar)
        state = step_euler_maruyama(state, cfg, u_eff, gbar)
    u_eff, solution, gbar, _model = effective_velocity(state, cfg)
    if callback is not None:
        callback(state, u_eff, solution, gbar)
    return state


def velocity_from_spec(spec):
    """Build a velocity callable from a declarative description."""
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "zero":
        return None
    if kind == "constant":
        value = np.asarray(spec["value"], dtype=np.float64)
        return lambda x, t: np.broadcast_to(value, x.shape).copy()
    raise ParameterError(f"unknown velocity kind {kind!r}")


def source_from_spec(spec):
    """Build a source callable from a declarative description.

    Kinds: "zero"; "linear" (field `direction` r, g = (x - mean x) . r);
    "well" (fields `amplitude` A, `center` xbar, `width` w, g = A
    sin(2 pi t) exp(-|x - xbar|^2 / w)).
    """
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "zero":
        return None
    if kind == "linear":
        r = np.asarray(spec["direction"], dtype=np.float64)
        return lambda x, t: (x - x.mean(axis=0)) @ r
    if kind == "well":
        amp = float(spec.get("amplitude", 35.0))
        center = np.asarray(spec.get("center", (1.0, 0.0)), dtype=np.float64)
        width = float(spec.get("width", 20.0))

        def well(x, t):
            d2 = ((x - center) ** 2).sum(axis=1)
            return amp * np.sin(2.0 * np.pi * t) * np.exp(-d2 / width)

        return well
    raise ParameterError(f"unknown source kind {kind!r}")
