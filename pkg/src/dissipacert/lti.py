"""State-space models (with an optional constant affine offset), exact
discrete-time simulation, zero-order-hold discretization, equilibria, Markov
parameters and structural (controllability/observability/lag) checks.

The simulator doubles as the ground-truth oracle for the identification and
certification tests, so it is deliberately boring: one dense affine
recursion, no approximations.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from . import _kernels
from ._linalg import (
    DEFAULT_REL_TOL,
    as_matrix,
    controllability_matrix,
    observability_matrix,
    relative_rank,
)
from .errors import (
    DivergenceError,
    EquilibriumError,
    NumericalError,
    ValidationError,
)
from .signals import Trajectory

__all__ = [
    "StateSpaceModel",
    "StructuralChecks",
    "simulate",
    "zoh_discretize",
    "equilibrium",
    "markov_parameters",
    "structural_checks",
    "save_model",
    "load_model",
]

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True)
class StateSpaceModel:
    """x+ = A x + B u + offset, y = C x (no feedthrough).

    ``time_domain`` is "discrete" (then ``dt`` must be > 0) or "continuous"
    (then the same equation reads as a derivative and ``dt`` is ignored).
    ``offset`` is an optional constant additive term on the state update.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    offset: np.ndarray = None
    time_domain: str = DISCRETE
    dt: float = 0.0

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        b = as_matrix(self.b, "B")
        c = as_matrix(self.c, "C")
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValidationError(f"A must be square, got {a.shape}")
        if b.shape[0] != n:
            raise ValidationError(f"B has {b.shape[0]} rows, A is {n}x{n}")
        if c.shape[1] != n:
            raise ValidationError(f"C has {c.shape[1]} columns, A is {n}x{n}")
        if self.offset is None:
            offset = np.zeros(n)
        else:
            offset = np.asarray(self.offset, dtype=float).reshape(-1)
            if offset.shape != (n,):
                raise ValidationError(
                    f"offset must be a length-{n} vector, got shape "
                    f"{np.asarray(self.offset).shape}"
                )
            if not np.isfinite(offset).all():
                raise ValidationError("offset contains non-finite entries")
        if self.time_domain not in (CONTINUOUS, DISCRETE):
            raise ValidationError(
                f"time_domain must be '{CONTINUOUS}' or '{DISCRETE}', "
                f"got {self.time_domain!r}"
            )
        dt = float(self.dt)
        if dt < 0:
            raise ValidationError(f"dt must be >= 0, got {dt}")
        if self.time_domain == DISCRETE and dt == 0.0:
            dt = 1.0  # unit sample time unless stated otherwise
        for name, value in (("a", a), ("b", b), ("c", c), ("offset", offset)):
            value = value.copy()
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "dt", dt)

    @property
    def n_states(self):
        return self.a.shape[0]

    @property
    def n_inputs(self):
        return self.b.shape[1]

    @property
    def n_outputs(self):
        return self.c.shape[0]

    @property
    def is_discrete(self):
        return self.time_domain == DISCRETE


def simulate(model, x0, u):
    """Run a discrete model over an input record.

    Returns ``(x, y)`` Trajectories: ``x`` carries one extra sample (the
    state reached after the final input), ``y`` is sample-aligned with ``u``.
    A state that overflows to non-finite values raises
    :class:`DivergenceError` with the first bad step.
    """
    if not model.is_discrete:
        raise ValidationError("simulate expects a discrete-time model")
    if u.n_channels != model.n_inputs:
        raise ValidationError(
            f"input has {u.n_channels} channels, model expects {model.n_inputs}"
        )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (model.n_states,):
        raise ValidationError(
            f"x0 must be a length-{model.n_states} vector, got {x0.shape}"
        )
    if not np.isfinite(x0).all():
        raise ValidationError("x0 contains non-finite entries")
    w = model.b @ u.data + model.offset[:, None]
    states, first_bad = _kernels.affine_recursion(model.a, w, x0)
    if first_bad >= 0:
        raise DivergenceError(
            f"state became non-finite at step {u.start_index + first_bad}",
            index=u.start_index + first_bad,
        )
    outputs = model.c @ states[:, : u.n_samples]
    x = Trajectory(states, dt=u.dt, start_index=u.start_index)
    y = Trajectory(outputs, dt=u.dt, start_index=u.start_index)
    return x, y


def zoh_discretize(model, ts):
    """Exact zero-order-hold discretization of a continuous model.

    Uses the augmented-matrix exponential exp([[A, [B d]], [0, 0]] * ts): the
    top-left block is A_d and the top-right block applies the same integral
    operator to B and to the offset in one call.
    """
    if model.is_discrete:
        raise ValidationError("model is already discrete")
    if ts <= 0:
        raise ValidationError(f"ts must be > 0, got {ts}")
    n, m = model.n_states, model.n_inputs
    augmented = np.zeros((n + m + 1, n + m + 1))
    augmented[:n, :n] = model.a
    augmented[:n, n : n + m] = model.b
    augmented[:n, n + m] = model.offset
    phi = linalg.expm(augmented * ts)
    if not np.isfinite(phi).all():
        raise NumericalError(f"matrix exponential overflowed at ts={ts}")
    return StateSpaceModel(
        a=phi[:n, :n],
        b=phi[:n, n : n + m],
        c=model.c,
        offset=phi[:n, n + m],
        time_domain=DISCRETE,
        dt=ts,
    )


def equilibrium(model, u_const, rel_tol=1e-10):
    """Fixed point of a discrete model under a constant input.

    Solves (I - A) x = B u + offset and verifies both that I - A is
    nonsingular at the stated relative tolerance and that the residual is
    small; otherwise raises :class:`EquilibriumError`.
    """
    if not model.is_discrete:
        raise ValidationError("equilibrium expects a discrete-time model")
    u_const = np.asarray(u_const, dtype=float).reshape(-1)
    if u_const.shape != (model.n_inputs,):
        raise ValidationError(
            f"u_const must be a length-{model.n_inputs} vector, got {u_const.shape}"
        )
    lhs = np.eye(model.n_states) - model.a
    sigma = linalg.svdvals(lhs)
    if sigma[0] == 0.0 or sigma[-1] <= rel_tol * sigma[0]:
        raise EquilibriumError(
            "I - A is singular at the working tolerance; the model has no "
            "unique equilibrium"
        )
    rhs = model.b @ u_const + model.offset
    x_star = linalg.solve(lhs, rhs)
    residual = np.linalg.norm(lhs @ x_star - rhs)
    if residual > rel_tol * (1.0 + np.linalg.norm(x_star)):
        raise EquilibriumError(
            f"equilibrium solve residual {residual:.3e} exceeds tolerance"
        )
    return x_star


def markov_parameters(model, count):
    """First ``count`` impulse-response matrices (C B, C A B, C A^2 B, ...)."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    out = []
    v = model.b
    for _ in range(count):
        out.append(model.c @ v)
        v = model.a @ v
    return out


@dataclass(frozen=True)
class StructuralChecks:
    """Controllability/observability verdicts plus the observability lag.

    ``lag`` is the smallest t for which the t-block observability matrix
    reaches full column rank, or None when the model is unobservable.
    """

    controllable: bool
    observable: bool
    lag: int


def structural_checks(model, rel_tol=DEFAULT_REL_TOL):
    """Krylov-matrix rank tests for controllability, observability and lag.

    The lag search stops at t = n, which suffices for any observable model.
    """
    n = model.n_states
    controllable = relative_rank(controllability_matrix(model.a, model.b), rel_tol) == n
    lag = None
    for t in range(1, n + 1):
        if relative_rank(observability_matrix(model.a, model.c, t), rel_tol) == n:
            lag = t
            break
    return StructuralChecks(
        controllable=controllable, observable=lag is not None, lag=lag
    )


def _model_to_dict(model):
    return {
        "A": model.a.tolist(),
        "B": model.b.tolist(),
        "C": model.c.tolist(),
        "d": model.offset.tolist(),
        "time_domain": model.time_domain,
        "dt": model.dt,
    }


def save_model(path, model):
    """Serialize a model to JSON (row-major matrices, offset under key "d")."""
    Path(path).write_text(
        json.dumps(_model_to_dict(model), indent=2, sort_keys=True) + "\n"
    )


def load_model(path):
    """Read a model written by :func:`save_model`."""
    raw = json.loads(Path(path).read_text())
    try:
        return StateSpaceModel(
            a=np.array(raw["A"], dtype=float),
            b=np.array(raw["B"], dtype=float),
            c=np.array(raw["C"], dtype=float),
            offset=np.array(raw["d"], dtype=float) if raw.get("d") is not None else None,
            time_domain=raw.get("time_domain", DISCRETE),
            dt=float(raw.get("dt", 0.0)),
        )
    except KeyError as exc:
        raise ValidationError(f"{path}: missing model field {exc}") from exc
