"""Quadratic supply rates, channel-wise passivity indices, the
QSR-dissipativity matrix inequality, and a small verified LMI engine.

The engine's contract is the independent re-check, not the solver: every
returned assignment is re-evaluated with plain eigenvalue computations on
numerically assembled blocks, and assignments that fail that check are never
returned. Solvers (CLARABEL, CVXOPT, SCS — whichever is installed) are tried
in order and are free to be sloppy; the verifier is not.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from ._linalg import as_matrix
from .errors import (
    DivergenceError,
    InfeasibleError,
    NumericalError,
    ValidationError,
)

__all__ = [
    "FEASIBILITY_BAND",
    "SupplyRate",
    "PassivityIndices",
    "DissipativityCertificate",
    "LmiSolution",
    "supply_from_indices",
    "qsr_lmi",
    "solve_lmi",
    "certify_qsr",
    "optimize_channel_indices",
    "verify_dissipation_on_trajectory",
    "save_certificate",
    "load_certificate",
    "add_certificate_observer",
    "remove_certificate_observer",
    "CertificateRecord",
]

# Residual acceptance band for non-strict inequalities, relative to block
# scale: a block B "holds" when lambda_max(B) <= FEASIBILITY_BAND * (1+||B||).
FEASIBILITY_BAND = 1e-9

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SupplyRate:
    """Quadratic supply rate w(u, y) = [y; u]' [[Q, S], [S', R]] [y; u]."""

    q: np.ndarray
    s: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q = as_matrix(self.q, "Q")
        s = as_matrix(self.s, "S")
        r = as_matrix(self.r, "R")
        p_dim, m_dim = s.shape
        if q.shape != (p_dim, p_dim) or r.shape != (m_dim, m_dim):
            raise ValidationError(
                f"inconsistent supply dimensions: Q {q.shape}, S {s.shape}, "
                f"R {r.shape}"
            )
        for name, mat in (("Q", q), ("R", r)):
            gap = np.abs(mat - mat.T).max(initial=0.0)
            if gap > _SYMMETRY_TOL * (1.0 + np.abs(mat).max(initial=0.0)):
                raise ValidationError(f"{name} is not symmetric (gap {gap:.2e})")
        for name, mat in (("q", q), ("s", s), ("r", r)):
            mat = mat.copy()
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @property
    def n_outputs(self):
        return self.q.shape[0]

    @property
    def n_inputs(self):
        return self.r.shape[0]

    def block(self):
        """The (p+m) x (p+m) matrix [[Q, S], [S', R]]."""
        return np.block([[self.q, self.s], [self.s.T, self.r]])

    def evaluate(self, u, y):
        """Supply values along sample-aligned input/output arrays.

        ``u`` is (m, K), ``y`` is (p, K); returns the length-K vector of
        w(u(k), y(k)).
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return (
            np.einsum("ik,ij,jk->k", y, self.q, y)
            + 2.0 * np.einsum("ik,ij,jk->k", y, self.s, u)
            + np.einsum("ik,ij,jk->k", u, self.r, u)
        )


@dataclass(frozen=True)
class PassivityIndices:
    """Channel-wise output/input passivity surpluses (rho_j, nu_j).

    Positive entries are an excess, negative a shortage. Square systems
    only: channel j couples input j with output j.
    """

    rho: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float).reshape(-1)
        nu = np.asarray(self.nu, dtype=float).reshape(-1)
        if rho.shape != nu.shape:
            raise ValidationError(
                f"rho and nu must have equal length, got {rho.shape} vs {nu.shape}"
            )
        if rho.size == 0:
            raise ValidationError("need at least one channel")
        if not (np.isfinite(rho).all() and np.isfinite(nu).all()):
            raise ValidationError("indices contain non-finite entries")
        rho.setflags(write=False)
        nu.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "nu", nu)

    @property
    def n_channels(self):
        return self.rho.size

    def to_supply(self):
        return supply_from_indices(self)


def supply_from_indices(indices):
    """Supply rate generated by channel-wise passivity indices:
    Q = -diag(rho), S = I/2, R = -diag(nu)."""
    m = indices.n_channels
    return SupplyRate(
        q=-np.diag(indices.rho), s=0.5 * np.eye(m), r=-np.diag(indices.nu)
    )


def _abc(model):
    """Accept anything exposing a/b/c (or an (a, b, c) triple)."""
    if isinstance(model, (tuple, list)) and len(model) == 3:
        a, b, c = (np.asarray(x, dtype=float) for x in model)
    else:
        try:
            a, b, c = model.a, model.b, model.c
        except AttributeError as exc:
            raise ValidationError(
                "model must expose a/b/c matrices or be an (a, b, c) triple"
            ) from exc
    return np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)


def qsr_lmi(model, supply, p):
    """Assemble the dissipation block matrix for a storage candidate P:

        [[A'PA - P - C'QC,  A'PB - C'S],
         [(A'PB - C'S)',    B'PB - R ]]

    The system is dissipative for the supply rate with storage x'Px exactly
    when this matrix is negative semidefinite (and P is PSD).
    """
    a, b, c = _abc(model)
    p = as_matrix(p, "P")
    n = a.shape[0]
    if p.shape != (n, n):
        raise ValidationError(f"P must be {n}x{n}, got {p.shape}")
    if supply.n_outputs != c.shape[0] or supply.n_inputs != b.shape[1]:
        raise ValidationError(
            f"supply sized for {supply.n_outputs} outputs / {supply.n_inputs} "
            f"inputs, model has {c.shape[0]} / {b.shape[1]}"
        )
    top_left = a.T @ p @ a - p - c.T @ supply.q @ c
    top_right = a.T @ p @ b - c.T @ supply.s
    bottom_right = b.T @ p @ b - supply.r
    return np.block([[top_left, top_right], [top_right.T, bottom_right]])


@dataclass(frozen=True)
class DissipativityCertificate:
    """A verified storage matrix for one supply rate.

    ``lmi_residual`` is the largest eigenvalue of the independently
    assembled dissipation block at ``p`` and must not exceed ``margin`` (the
    acceptance bound the residual was checked against). ``strict`` marks
    certificates solved with a strict feasibility margin.
    """

    p: np.ndarray
    supply: SupplyRate
    lmi_residual: float
    margin: float
    strict: bool = False
    solver_iterations: int = None

    def __post_init__(self):
        p = as_matrix(self.p, "P")
        gap = np.abs(p - p.T).max(initial=0.0)
        if gap > _SYMMETRY_TOL * (1.0 + np.abs(p).max(initial=0.0)):
            raise ValidationError(f"P is not symmetric (gap {gap:.2e})")
        p = 0.5 * (p + p.T)
        eigs = np.linalg.eigvalsh(p)
        scale = np.abs(eigs).max(initial=0.0)
        if eigs[0] < -1e-10 * scale:
            raise ValidationError(
                f"storage matrix is not positive semidefinite "
                f"(min eigenvalue {eigs[0]:.3e} at scale {scale:.3e})"
            )
        if self.lmi_residual > self.margin:
            raise ValidationError(
                f"residual {self.lmi_residual:.3e} exceeds the acceptance "
                f"margin {self.margin:.3e}"
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lmi_residual", float(self.lmi_residual))
        object.__setattr__(self, "margin", float(self.margin))


@dataclass(frozen=True)
class CertificateRecord:
    """A certificate together with the realization it was solved for.

    Emitted to registered observers every time :func:`certify_qsr` succeeds,
    so test harnesses can sweep every certificate the pipeline produces.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    certificate: DissipativityCertificate
    context: str = ""


_certificate_observers = []


def add_certificate_observer(observer):
    """Register a callable receiving a :class:`CertificateRecord` per
    successful certification."""
    _certificate_observers.append(observer)


def remove_certificate_observer(observer):
    _certificate_observers.remove(observer)


def _emit_certificate(record):
    for observer in list(_certificate_observers):
        observer(record)


@dataclass(frozen=True)
class LmiSolution:
    """Verified solution of a matrix-inequality problem.

    ``residuals`` maps each constraint label to its independently computed
    violation (largest eigenvalue for blocks, plain value for scalars); all
    are within the acceptance bound or the solution would not exist.
    ``slack`` is the optimal auxiliary bound from feasibility mode (how
    deeply interior the solution is; negative means strictly feasible).
    """

    values: dict
    residuals: dict
    slack: float
    objective_value: float
    solver_name: str
    solver_iterations: int


def _normalize_constraints(constraints):
    import cvxpy as cp

    items = []
    for k, item in enumerate(constraints):
        if isinstance(item, tuple) and len(item) == 2:
            label, expr = item
        else:
            label, expr = f"block_{k}", item
        if not isinstance(expr, cp.expressions.expression.Expression):
            raise ValidationError(f"constraint {label!r} is not a cvxpy expression")
        if expr.ndim == 2 and expr.shape[0] == expr.shape[1] and expr.shape[0] > 1:
            kind = "matrix"
        elif expr.ndim == 0 or expr.size == 1:
            kind = "scalar"
        else:
            raise ValidationError(
                f"constraint {label!r} must be square or scalar, got shape "
                f"{expr.shape}"
            )
        items.append((str(label), expr, kind))
    if not items:
        raise ValidationError("no constraints given")
    return items


def _solver_chain(preferred=None):
    import cvxpy as cp

    installed = set(cp.installed_solvers())
    chain = [s for s in ("CLARABEL", "CVXOPT", "SCS") if s in installed]
    if preferred is not None:
        if preferred not in installed:
            raise NumericalError(f"requested solver {preferred} is not installed")
        chain = [preferred] + [s for s in chain if s != preferred]
    if not chain:
        raise NumericalError("no semidefinite solver is installed")
    return chain


def _evaluate_residuals(items):
    residuals = {}
    for label, expr, kind in items:
        value = expr.value
        if value is None:
            raise NumericalError(f"solver returned no value for {label!r}")
        if kind == "scalar":
            residuals[label] = float(np.asarray(value).reshape(()))
        else:
            sym = 0.5 * (value + value.T)
            residuals[label] = float(np.linalg.eigvalsh(sym)[-1])
    return residuals


def _acceptance_bound(label, expr, kind, margin, band):
    value = expr.value
    if kind == "scalar":
        scale = 1.0 + abs(float(np.asarray(value).reshape(())))
    else:
        sym = 0.5 * (value + value.T)
        scale = 1.0 + float(np.linalg.norm(sym, 2))
    return band * scale - margin


def solve_lmi(constraints, objective=None, margin=0.0, hard_constraints=(), solver=None, band=FEASIBILITY_BAND):
    """Solve a set of affine matrix/scalar inequality constraints.

    Parameters
    ----------
    constraints : iterable
        cvxpy expressions, or (label, expression) pairs. A square matrix
        expression M is read as M <= 0 (semidefinite order); a scalar
        expression e as e <= 0.
    objective : cvxpy scalar expression, optional
        Maximized subject to the constraints. Without it the engine runs in
        feasibility mode: it minimizes a shared bound t with every block
        <= t*I, which lands on the most interior point available.
    margin : float
        Strictness: blocks must reach largest eigenvalue <= -margin (up to
        the relative acceptance band).
    hard_constraints : iterable
        Extra raw cvxpy constraints passed through untouched (cone
        memberships, variable bounds).
    solver : str, optional
        Force one cvxpy solver; default tries CLARABEL, CVXOPT, SCS in order.

    Returns
    -------
    LmiSolution
        Only after every block passes the independent eigenvalue re-check.

    Raises
    ------
    InfeasibleError
        When the problem is infeasible at the requested margin; names the
        most violated constraint when a diagnostic point is available.
    NumericalError
        When no installed solver produces a verifiable solution.
    """
    import cvxpy as cp

    if margin < 0:
        raise ValidationError(f"margin must be >= 0, got {margin}")
    items = _normalize_constraints(constraints)
    hard = list(hard_constraints)

    if objective is None:
        slack = cp.Variable(name="_slack")
        cons = list(hard)
        for _, expr, kind in items:
            if kind == "scalar":
                cons.append(expr <= slack)
            else:
                dim = expr.shape[0]
                cons.append(expr << slack * np.eye(dim))
        problem = cp.Problem(cp.Minimize(slack), cons)
    else:
        cons = list(hard)
        for _, expr, kind in items:
            if kind == "scalar":
                cons.append(expr + margin <= 0)
            else:
                dim = expr.shape[0]
                cons.append(expr + margin * np.eye(dim) << 0)
        problem = cp.Problem(cp.Maximize(objective), cons)

    failures = []
    for name in _solver_chain(solver):
        try:
            with warnings.catch_warnings():
                # Accuracy complaints are expected mid-chain; the eigenvalue
                # re-check below is the arbiter, not the solver's own flag.
                warnings.simplefilter("ignore")
                problem.solve(solver=name)
        except cp.error.SolverError as exc:
            failures.append(f"{name}: {exc}")
            continue
        status = problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            # Feasibility mode always admits a (large-slack) solution, so an
            # infeasible status there is solver confusion, as is an
            # "inaccurate" infeasibility anywhere: let the next solver try.
            if objective is not None and status == cp.INFEASIBLE:
                raise InfeasibleError(
                    f"problem reported infeasible by {name} (status {status})"
                )
            failures.append(f"{name}: status {status}")
            continue
        if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            raise NumericalError(f"objective is unbounded (solver {name})")
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            failures.append(f"{name}: status {status}")
            continue
        try:
            residuals = _evaluate_residuals(items)
        except NumericalError as exc:
            failures.append(f"{name}: {exc}")
            continue
        bad = {
            label: residuals[label]
            for label, expr, kind in items
            if residuals[label] > _acceptance_bound(label, expr, kind, margin, band)
        }
        if bad:
            # Feasibility mode minimizes the worst violation, so an optimal
            # slack above the band is evidence of real infeasibility; a bad
            # residual with a good slack is just solver sloppiness.
            if objective is None and float(problem.value) > band - margin:
                worst = max(bad, key=bad.get)
                raise InfeasibleError(
                    f"no assignment satisfies {worst!r} at margin {margin:g} "
                    f"(best achievable residual {float(problem.value):.3e})",
                    worst_constraint=worst,
                    slack=float(problem.value),
                )
            failures.append(
                f"{name}: verification failed on {sorted(bad)} "
                f"(worst {max(bad.values()):.3e})"
            )
            continue
        values = {}
        for var in problem.variables():
            if var.name() == "_slack":
                continue
            val = var.value
            values[var.name()] = (
                float(val) if np.ndim(val) == 0 else np.asarray(val, dtype=float)
            )
        stats = problem.solver_stats
        return LmiSolution(
            values=values,
            residuals=residuals,
            slack=float(problem.value) if objective is None else None,
            objective_value=float(problem.value) if objective is not None else None,
            solver_name=stats.solver_name if stats else name,
            solver_iterations=stats.num_iters if stats else None,
        )
    raise NumericalError(
        "no solver produced a verifiable solution: " + "; ".join(failures)
    )


def certify_qsr(model, supply, margin=0.0, solver=None, context=""):
    """Find a verified storage matrix certifying dissipativity of ``model``
    for ``supply``.

    Solves for P = P' >= 0 making the dissipation block negative
    semidefinite (to -margin when a strict margin is requested), then
    re-assembles the block numerically at the solved P and re-checks its
    eigenvalues — the certificate records that verified residual, not the
    solver's claim. Raises :class:`InfeasibleError` when no such P exists.
    """
    import cvxpy as cp

    a, b, c = _abc(model)
    n = a.shape[0]
    if supply.n_outputs != c.shape[0] or supply.n_inputs != b.shape[1]:
        raise ValidationError(
            f"supply sized for {supply.n_outputs} outputs / {supply.n_inputs} "
            f"inputs, model has {c.shape[0]} / {b.shape[1]}"
        )
    p_var = cp.Variable((n, n), symmetric=True, name="P")
    m11 = a.T @ p_var @ a - p_var - c.T @ supply.q @ c
    m12 = a.T @ p_var @ b - c.T @ supply.s
    m22 = b.T @ p_var @ b - supply.r
    block = cp.bmat([[m11, m12], [m12.T, m22]])
    solution = solve_lmi(
        [("dissipation", block)],
        margin=margin,
        hard_constraints=[p_var >> 0],
        solver=solver,
    )
    p_sol = solution.values["P"]
    p_sol = 0.5 * (p_sol + p_sol.T)
    eigs, vectors = np.linalg.eigh(p_sol)
    if eigs[0] < 0.0:
        # Interior-point iterates can sit a hair outside the cone; project
        # onto it and let the re-verification below judge the projected
        # matrix on its own merits.
        p_sol = (vectors * np.clip(eigs, 0.0, None)) @ vectors.T
        p_sol = 0.5 * (p_sol + p_sol.T)
    verified = qsr_lmi((a, b, c), supply, p_sol)
    residual = float(np.linalg.eigvalsh(0.5 * (verified + verified.T))[-1])
    bound = FEASIBILITY_BAND * (1.0 + np.linalg.norm(verified, 2)) - margin
    if residual > bound:
        raise NumericalError(
            f"re-assembled dissipation block has residual {residual:.3e}, "
            f"acceptance bound {bound:.3e}"
        )
    certificate = DissipativityCertificate(
        p=p_sol,
        supply=supply,
        lmi_residual=residual,
        margin=bound,
        strict=margin > 0,
        solver_iterations=solution.solver_iterations,
    )
    _emit_certificate(
        CertificateRecord(a=a, b=b, c=c, certificate=certificate, context=context)
    )
    return certificate


def optimize_channel_indices(model, margin=0.0, index_bound=1e3, solver=None,
                             context=""):
    """Largest channel-wise passivity indices one model can support.

    Maximizes the worst per-channel excess rho_j + nu_j subject to the
    dissipation inequality. Interconnection tests sum the excesses of paired
    channels, so the simultaneous worst excess is the standalone figure of
    merit for a subsystem. Returns ``(indices, certificate)`` where the
    certificate comes from re-solving the storage problem at the optimal
    indices — the same verified path any fixed supply goes through.
    """
    import cvxpy as cp

    a, b, c = _abc(model)
    n = a.shape[0]
    m = b.shape[1]
    if c.shape[0] != m:
        raise ValidationError(
            f"channel-wise indices need a square model, got {c.shape[0]} "
            f"outputs and {m} inputs"
        )
    bound = float(index_bound)
    if bound <= 0:
        raise ValidationError(f"index_bound must be > 0, got {index_bound}")
    p_var = cp.Variable((n, n), symmetric=True, name="P")
    rho = cp.Variable(m, name="rho")
    nu = cp.Variable(m, name="nu")
    worst = cp.Variable(name="worst")
    m11 = a.T @ p_var @ a - p_var + c.T @ cp.diag(rho) @ c
    m12 = a.T @ p_var @ b - 0.5 * c.T
    m22 = b.T @ p_var @ b + cp.diag(nu)
    block = cp.bmat([[m11, m12], [m12.T, m22]])
    hard = [p_var >> 0, rho >= -bound, rho <= bound, nu >= -bound, nu <= bound]
    hard += [rho[j] + nu[j] >= worst for j in range(m)]
    solution = solve_lmi(
        [("dissipation", block)],
        objective=worst,
        margin=margin,
        hard_constraints=hard,
        solver=solver,
    )
    indices = PassivityIndices(
        rho=solution.values["rho"], nu=solution.values["nu"]
    )
    certificate = certify_qsr(
        model,
        supply_from_indices(indices),
        margin=margin,
        solver=solver,
        context=context or "optimize_channel_indices",
    )
    return indices, certificate


def verify_dissipation_on_trajectory(model, p, supply, x0, u):
    """Largest violation of the dissipation inequality along one trajectory.

    Simulates the model from ``x0`` under ``u`` and returns
    max_k [ V(x(k+1)) - V(x(k)) - w(u(k), y(k)) ] with V(x) = x'Px.
    A valid certificate keeps this at (or below) roundoff level.
    """
    a, b, c = _abc(model)
    p = as_matrix(p, "P")
    offset = getattr(model, "offset", None)
    if offset is not None and np.any(np.asarray(offset) != 0.0):
        raise ValidationError(
            "dissipation about the origin needs an offset-free model; "
            "work in deviation coordinates"
        )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (a.shape[0],):
        raise ValidationError(
            f"x0 must be a length-{a.shape[0]} vector, got {x0.shape}"
        )
    u_data = u.data if hasattr(u, "data") else np.atleast_2d(np.asarray(u, float))
    if u_data.shape[0] != b.shape[1]:
        raise ValidationError(
            f"input has {u_data.shape[0]} channels, model expects {b.shape[1]}"
        )
    states, first_bad = _kernels.affine_recursion(a, b @ u_data, x0)
    if first_bad >= 0:
        raise DivergenceError(
            f"state became non-finite at step {first_bad}", index=first_bad
        )
    steps = u_data.shape[1]
    storage = np.einsum("ik,ij,jk->k", states, p, states)
    outputs = c @ states[:, :steps]
    supplies = supply.evaluate(u_data, outputs)
    return float((storage[1 : steps + 1] - storage[:steps] - supplies).max())


def _certificate_to_dict(cert):
    return {
        "P": cert.p.tolist(),
        "supply": {
            "Q": cert.supply.q.tolist(),
            "S": cert.supply.s.tolist(),
            "R": cert.supply.r.tolist(),
        },
        "residual": cert.lmi_residual,
        "margin": cert.margin,
        "strict": cert.strict,
        "solver_iterations": cert.solver_iterations,
    }


def save_certificate(path, cert):
    """Serialize a certificate to JSON (matrices row-major)."""
    Path(path).write_text(
        json.dumps(_certificate_to_dict(cert), indent=2, sort_keys=True) + "\n"
    )


def load_certificate(path):
    """Read a certificate written by :func:`save_certificate`; the stored
    residual/margin pair is re-validated on construction."""
    raw = json.loads(Path(path).read_text())
    try:
        supply = SupplyRate(
            q=np.array(raw["supply"]["Q"], dtype=float),
            s=np.array(raw["supply"]["S"], dtype=float),
            r=np.array(raw["supply"]["R"], dtype=float),
        )
        return DissipativityCertificate(
            p=np.array(raw["P"], dtype=float),
            supply=supply,
            lmi_residual=float(raw["residual"]),
            margin=float(raw["margin"]),
            strict=bool(raw.get("strict", False)),
            solver_iterations=raw.get("solver_iterations"),
        )
    except KeyError as exc:
        raise ValidationError(f"{path}: missing certificate field {exc}") from exc
