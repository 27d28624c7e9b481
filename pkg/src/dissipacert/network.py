"""Interconnection graphs and compositional stability certification.

Subsystems interact through antisymmetric channel pairings: a pairing of
channel (i, j) with channel (a, b) wires u_{i,j} = y_{a,b} and
u_{a,b} = -y_{i,j}. With channel-wise passivity indices certified per
subsystem, the network-level test reduces to per-pairing index sums — that
reduction, the joint convex index optimization, and a ground-truth
closed-loop assembly (the validation oracle) live here.
"""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ._linalg import DEFAULT_REL_TOL, observability_matrix, relative_rank
from .certify import (
    CertificateRecord,
    DissipativityCertificate,
    FEASIBILITY_BAND,
    PassivityIndices,
    _abc,
    _emit_certificate,
    certify_qsr,
    qsr_lmi,
    solve_lmi,
    supply_from_indices,
)
from .errors import (
    DissipacertError,
    InfeasibleError,
    NumericalError,
    ValidationError,
)
from .realization import identify

__all__ = [
    "Verdict",
    "ChannelPairing",
    "InterconnectionGraph",
    "StabilityCheck",
    "IndexOptimizationResult",
    "SubsystemData",
    "NetworkCertificate",
    "ClosedLoop",
    "validate_graph",
    "check_stability",
    "check_asymptotic",
    "optimize_indices",
    "assemble_closed_loop",
    "closed_loop_matrix",
    "certify_network",
    "save_graph",
    "load_graph",
    "save_network_certificate",
]

# Strict-positivity floor for storage matrices in the network test,
# P >= eps*(1 + tr P)*I.
STRICT_STORAGE_EPS = 1e-8

# Eigenvalues of unobservable dynamics must sit at least this far inside the
# unit circle for the detectability fallback.
DETECTABILITY_GAP = 1e-8


class Verdict(str, Enum):
    STABLE = "stable"
    ASYMPTOTICALLY_STABLE = "asymptotically_stable"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class ChannelPairing:
    """One antisymmetric feedback pairing between two subsystem channels.

    ``first`` = (subsystem, channel) receives the partner's output with a
    plus sign; ``second`` receives the first output negated. Indices are
    0-based in memory (serialization uses 1-based).
    """

    first: tuple
    second: tuple

    def __post_init__(self):
        first = (int(self.first[0]), int(self.first[1]))
        second = (int(self.second[0]), int(self.second[1]))
        for name, (sub, ch) in (("first", first), ("second", second)):
            if sub < 0 or ch < 0:
                raise ValidationError(f"{name} endpoint {sub, ch} is negative")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    def endpoints(self):
        return (self.first, self.second)

    def label(self):
        (i, j), (a, b) = self.first, self.second
        return f"({i + 1},{j + 1})<->({a + 1},{b + 1})"


@dataclass(frozen=True)
class InterconnectionGraph:
    """Channel counts per subsystem plus the set of pairings.

    Construction checks only that indices address existing channels;
    structural soundness (full, single coverage; no self-loops) is the job
    of :func:`validate_graph` so that broken graphs can be reported rather
    than rejected wholesale.
    """

    channel_counts: tuple
    pairings: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.channel_counts)
        if len(counts) < 1 or any(c < 1 for c in counts):
            raise ValidationError(
                f"channel_counts must be positive, got {counts}"
            )
        pairings = tuple(self.pairings)
        for pairing in pairings:
            for sub, ch in pairing.endpoints():
                if sub >= len(counts):
                    raise ValidationError(
                        f"pairing {pairing.label()} references subsystem "
                        f"{sub + 1} of {len(counts)}"
                    )
                if ch >= counts[sub]:
                    raise ValidationError(
                        f"pairing {pairing.label()} references channel "
                        f"{ch + 1} of {counts[sub]}"
                    )
        object.__setattr__(self, "channel_counts", counts)
        object.__setattr__(self, "pairings", pairings)

    @property
    def n_subsystems(self):
        return len(self.channel_counts)

    def channels(self):
        """Every (subsystem, channel) pair the graph is supposed to cover."""
        return [
            (i, j) for i, count in enumerate(self.channel_counts) for j in range(count)
        ]


def validate_graph(graph):
    """Structural violations of the pairing law, as human-readable strings.

    An empty list means the graph is sound: every channel appears in exactly
    one pairing and no pairing connects a subsystem to itself.
    """
    violations = []
    seen = {}
    for pairing in graph.pairings:
        (i, j), (a, b) = pairing.endpoints()
        if i == a:
            violations.append(
                f"self-pairing: {pairing.label()} connects subsystem "
                f"{i + 1} to itself"
            )
        for endpoint in pairing.endpoints():
            if endpoint in seen:
                violations.append(
                    f"channel ({endpoint[0] + 1},{endpoint[1] + 1}) appears "
                    f"in both {seen[endpoint]} and {pairing.label()}"
                )
            else:
                seen[endpoint] = pairing.label()
    for channel in graph.channels():
        if channel not in seen:
            violations.append(
                f"channel ({channel[0] + 1},{channel[1] + 1}) is not paired"
            )
    return violations


def _require_valid_graph(graph):
    violations = validate_graph(graph)
    if violations:
        raise ValidationError(
            "interconnection graph is not sound: " + "; ".join(violations)
        )


def _check_indices_cover(indices, graph):
    if len(indices) != graph.n_subsystems:
        raise ValidationError(
            f"{len(indices)} index sets for {graph.n_subsystems} subsystems"
        )
    for i, (idx, count) in enumerate(zip(indices, graph.channel_counts)):
        if idx.n_channels != count:
            raise ValidationError(
                f"subsystem {i + 1} has {count} channels but "
                f"{idx.n_channels} index pairs"
            )


@dataclass(frozen=True)
class StabilityCheck:
    """Per-pairing index-sum margins and the overall verdict.

    For each pairing the two sums are (rho_first + nu_second,
    rho_second + nu_first); the check passes when all margins are
    >= -tolerance (strict mode: > +tolerance). Truthy iff passed.
    """

    margins: dict
    passed: bool
    tolerance: float
    strict: bool

    def __bool__(self):
        return self.passed

    def worst(self):
        """(pairing, margin) with the smallest margin."""
        worst_pairing, worst_value = None, np.inf
        for pairing, (m1, m2) in self.margins.items():
            value = min(m1, m2)
            if value < worst_value:
                worst_pairing, worst_value = pairing, value
        return worst_pairing, worst_value


def check_stability(indices, graph, tolerance=1e-3, strict=False):
    """Evaluate every pairing's two index sums against the tolerance.

    Each pairing is evaluated exactly once; a sound graph covers every
    channel exactly once, so nothing is double counted.
    """
    _require_valid_graph(graph)
    _check_indices_cover(indices, graph)
    if tolerance < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    margins = {}
    passed = True
    for pairing in graph.pairings:
        (i, j), (a, b) = pairing.endpoints()
        m1 = float(indices[i].rho[j] + indices[a].nu[b])
        m2 = float(indices[a].rho[b] + indices[i].nu[j])
        margins[pairing] = (m1, m2)
        if strict:
            passed = passed and (m1 > tolerance) and (m2 > tolerance)
        else:
            passed = passed and (m1 >= -tolerance) and (m2 >= -tolerance)
    return StabilityCheck(
        margins=margins, passed=passed, tolerance=float(tolerance), strict=strict
    )


def _unobservable_spectral_radius(model, rel_tol):
    """Spectral radius of the dynamics restricted to the unobservable
    subspace; 0.0 when the model is observable."""
    a, _, c = _abc(model)
    n = a.shape[0]
    obs = observability_matrix(a, c)
    rank = relative_rank(obs, rel_tol)
    if rank == n:
        return 0.0
    _, sigma, vt = np.linalg.svd(obs)
    kernel = vt[rank:, :].T  # orthonormal basis of the unobservable subspace
    restricted = kernel.T @ a @ kernel
    return float(np.abs(np.linalg.eigvals(restricted)).max())


def check_asymptotic(models, indices, graph, tolerance=1e-3, rel_tol=DEFAULT_REL_TOL):
    """Decide whether strict pairing margins upgrade to asymptotic stability.

    Requires every pairing margin strictly above the tolerance, and every
    subsystem to be either observable (zero output forces zero state) or
    detectable (unobservable dynamics strictly inside the unit circle).
    Returns ASYMPTOTICALLY_STABLE or UNDECIDED — plain stability is judged
    separately by :func:`check_stability`.
    """
    strict = check_stability(indices, graph, tolerance, strict=True)
    if not strict.passed:
        return Verdict.UNDECIDED
    if len(models) != graph.n_subsystems:
        raise ValidationError(
            f"{len(models)} models for {graph.n_subsystems} subsystems"
        )
    for model in models:
        radius = _unobservable_spectral_radius(model, rel_tol)
        if radius >= 1.0 - DETECTABILITY_GAP:
            return Verdict.UNDECIDED
    return Verdict.ASYMPTOTICALLY_STABLE


def _cost_expression(cost, rho_vars, nu_vars):
    import cvxpy as cp

    if callable(cost):
        return cost(rho_vars, nu_vars)
    if cost == "sum-all":
        return cp.sum(cp.hstack([cp.sum(r) for r in rho_vars])) + cp.sum(
            cp.hstack([cp.sum(v) for v in nu_vars])
        )
    if cost == "maxmin-rho":
        if len(rho_vars) == 1:
            return cp.sum(rho_vars[0])
        return cp.minimum(*[cp.sum(r) for r in rho_vars])
    if cost == "sum-rho":
        return cp.sum(cp.hstack([cp.sum(r) for r in rho_vars]))
    raise ValidationError(
        f"unknown cost selector {cost!r}; use 'sum-all', 'maxmin-rho', "
        f"'sum-rho' or a callable"
    )


def _dissipation_block(a, b, c, p_var, rho_var, nu_var):
    """The channel-wise dissipation block as a cvxpy expression:
    Q = -diag(rho), S = I/2, R = -diag(nu)."""
    import cvxpy as cp

    m = b.shape[1]
    m11 = a.T @ p_var @ a - p_var + c.T @ cp.diag(rho_var) @ c
    m12 = a.T @ p_var @ b - 0.5 * c.T
    m22 = b.T @ p_var @ b + cp.diag(nu_var)
    return cp.bmat([[m11, m12], [m12.T, m22]])


@dataclass(frozen=True)
class IndexOptimizationResult:
    """Optimized channel-wise indices with their verified certificates."""

    indices: tuple
    certificates: tuple
    margins: dict
    objective_value: float
    solver_name: str
    diagnostics: dict


def _models_abc(models, graph):
    triples = []
    for i, model in enumerate(models):
        a, b, c = _abc(model)
        m = b.shape[1]
        if c.shape[0] != m:
            raise ValidationError(
                f"subsystem {i + 1} must be square (got {c.shape[0]} outputs, "
                f"{m} inputs) for channel pairing"
            )
        if m != graph.channel_counts[i]:
            raise ValidationError(
                f"subsystem {i + 1} has {m} channels, graph says "
                f"{graph.channel_counts[i]}"
            )
        triples.append((a, b, c))
    return triples


def _recertify(triples, indices_out, joint_values, solver):
    """Solve a fresh interior storage matrix per subsystem at the final
    indices; fall back to the joint solution's storage when the re-solve
    fails to verify."""
    certificates = []
    for i, ((a, b, c), idx) in enumerate(zip(triples, indices_out)):
        supply = supply_from_indices(idx)
        try:
            cert = certify_qsr(
                (a, b, c), supply, solver=solver, context=f"optimize_indices[{i}]"
            )
        except DissipacertError:
            p_joint = joint_values[f"P_{i}"]
            p_joint = 0.5 * (p_joint + p_joint.T)
            block = qsr_lmi((a, b, c), supply, p_joint)
            residual = float(np.linalg.eigvalsh(0.5 * (block + block.T))[-1])
            bound = FEASIBILITY_BAND * (1.0 + np.linalg.norm(block, 2))
            try:
                cert = DissipativityCertificate(
                    p=p_joint, supply=supply, lmi_residual=residual, margin=bound
                )
            except ValidationError as exc:
                raise NumericalError(
                    f"subsystem {i + 1}: optimized indices could not be "
                    f"re-certified ({exc})"
                ) from exc
            _emit_certificate(
                CertificateRecord(
                    a=a, b=b, c=c, certificate=cert,
                    context=f"optimize_indices[{i}] (joint storage)",
                )
            )
        certificates.append(cert)
    return tuple(certificates)


def _diagnose_tightest_pairing(triples, graph, bound, solver):
    """On joint infeasibility, re-solve without the pairing tolerance to find
    the best achievable margin and name the pairing that pins it."""
    import cvxpy as cp

    mu = cp.Variable(name="_worst_margin")
    constraints = []
    hard = []
    rho_vars, nu_vars = [], []
    for i, (a, b, c) in enumerate(triples):
        n, m = a.shape[0], b.shape[1]
        p_var = cp.Variable((n, n), symmetric=True, name=f"P_{i}")
        rho = cp.Variable(m, name=f"rho_{i}")
        nu = cp.Variable(m, name=f"nu_{i}")
        rho_vars.append(rho)
        nu_vars.append(nu)
        constraints.append(
            (f"dissipation_{i}", _dissipation_block(a, b, c, p_var, rho, nu))
        )
        hard.append(
            p_var - STRICT_STORAGE_EPS * (1.0 + cp.trace(p_var)) * np.eye(n) >> 0
        )
        hard.extend([rho >= -bound, rho <= bound, nu >= -bound, nu <= bound])
    for pairing in graph.pairings:
        (i, j), (a_, b_) = pairing.endpoints()
        hard.append(rho_vars[i][j] + nu_vars[a_][b_] >= mu)
        hard.append(rho_vars[a_][b_] + nu_vars[i][j] >= mu)
    solution = solve_lmi(constraints, objective=mu, hard_constraints=hard, solver=solver)
    best = {}
    for pairing in graph.pairings:
        (i, j), (a_, b_) = pairing.endpoints()
        rho_i = solution.values[f"rho_{i}"]
        nu_a = solution.values[f"nu_{a_}"]
        rho_a = solution.values[f"rho_{a_}"]
        nu_i = solution.values[f"nu_{i}"]
        best[pairing] = min(
            float(np.atleast_1d(rho_i)[j] + np.atleast_1d(nu_a)[b_]),
            float(np.atleast_1d(rho_a)[b_] + np.atleast_1d(nu_i)[j]),
        )
    tightest = min(best, key=best.get)
    return tightest, best[tightest]


def optimize_indices(
    models,
    graph,
    cost="sum-all",
    tolerance=1e-3,
    rel_tol=DEFAULT_REL_TOL,
    index_bound=1e3,
    backoff=0.0,
    solver=None,
    method="joint",
    max_rounds=50,
):
    """Jointly choose channel-wise passivity indices certifying the network.

    Solves one convex program over all subsystems: per-subsystem dissipation
    blocks (with strictly positive storage) plus both index sums per pairing
    >= -tolerance, maximizing the selected cost ("sum-all", "maxmin-rho",
    "sum-rho", or a callable building a concave cvxpy expression from the
    rho/nu variable lists). Indices are then backed off by
    ``backoff * (1 + |index|)`` — the pairing constraints are pre-tightened
    to compensate, so reported margins still clear the tolerance — and each
    subsystem is re-certified at its final indices, producing verified
    storage certificates.

    ``method="distributed"`` runs the synchronous block-coordinate variant
    instead: subsystems re-solve locally with neighbors' indices fixed until
    the pairing margins stabilize. The joint program is the reference.

    Raises :class:`InfeasibleError` naming the tightest pairing when no
    index assignment exists.
    """
    import cvxpy as cp

    _require_valid_graph(graph)
    if tolerance < 0 or backoff < 0:
        raise ValidationError("tolerance and backoff must be >= 0")
    triples = _models_abc(models, graph)
    if method == "distributed":
        return _optimize_distributed(
            triples, graph, cost, tolerance, index_bound, backoff, solver, max_rounds
        )
    if method != "joint":
        raise ValidationError(f"unknown method {method!r}")

    constraints = []
    hard = []
    rho_vars, nu_vars = [], []
    for i, (a, b, c) in enumerate(triples):
        n, m = a.shape[0], b.shape[1]
        p_var = cp.Variable((n, n), symmetric=True, name=f"P_{i}")
        rho = cp.Variable(m, name=f"rho_{i}")
        nu = cp.Variable(m, name=f"nu_{i}")
        rho_vars.append(rho)
        nu_vars.append(nu)
        constraints.append(
            (f"dissipation_{i}", _dissipation_block(a, b, c, p_var, rho, nu))
        )
        hard.append(
            p_var - STRICT_STORAGE_EPS * (1.0 + cp.trace(p_var)) * np.eye(n) >> 0
        )
        hard.extend(
            [rho >= -index_bound, rho <= index_bound,
             nu >= -index_bound, nu <= index_bound]
        )
    # Backed-off indices must still clear the tolerance, so the optimization
    # sees a pairing floor raised by the worst-case total backoff.
    floor = -tolerance + 2.0 * backoff * (1.0 + index_bound)
    for pairing in graph.pairings:
        (i, j), (a_, b_) = pairing.endpoints()
        constraints.append(
            (f"pairing_{pairing.label()}_fwd", floor - rho_vars[i][j] - nu_vars[a_][b_])
        )
        constraints.append(
            (f"pairing_{pairing.label()}_rev", floor - rho_vars[a_][b_] - nu_vars[i][j])
        )
    objective = _cost_expression(cost, rho_vars, nu_vars)
    try:
        solution = solve_lmi(
            constraints, objective=objective, hard_constraints=hard, solver=solver
        )
    except InfeasibleError as exc:
        try:
            tightest, margin = _diagnose_tightest_pairing(
                triples, graph, index_bound, solver
            )
        except DissipacertError:
            raise exc from None
        raise InfeasibleError(
            f"no index assignment reaches pairing tolerance {tolerance:g}: "
            f"tightest pairing {tightest.label()} caps at margin {margin:.6g}",
            worst_constraint=tightest.label(),
            slack=margin,
        ) from exc

    indices_out = []
    for i in range(len(triples)):
        rho_val = np.atleast_1d(solution.values[f"rho_{i}"])
        nu_val = np.atleast_1d(solution.values[f"nu_{i}"])
        indices_out.append(
            PassivityIndices(
                rho=rho_val - backoff * (1.0 + np.abs(rho_val)),
                nu=nu_val - backoff * (1.0 + np.abs(nu_val)),
            )
        )
    indices_out = tuple(indices_out)
    certificates = _recertify(triples, indices_out, solution.values, solver)
    margins = check_stability(indices_out, graph, tolerance).margins
    diagnostics = {
        "method": "joint",
        "solver_iterations": solution.solver_iterations,
        "residuals": dict(solution.residuals),
        "backoff": backoff,
    }
    return IndexOptimizationResult(
        indices=indices_out,
        certificates=certificates,
        margins=margins,
        objective_value=solution.objective_value,
        solver_name=solution.solver_name,
        diagnostics=diagnostics,
    )


def _local_cost(cost, rho, nu):
    import cvxpy as cp

    if cost in ("maxmin-rho", "sum-rho"):
        return cp.sum(rho)
    return cp.sum(rho) + cp.sum(nu)


def _optimize_distributed(
    triples, graph, cost, tolerance, index_bound, backoff, solver, max_rounds
):
    """Synchronous block-coordinate descent: subsystems take turns
    re-solving their local program with every neighbor's indices frozen."""
    import cvxpy as cp

    n_sub = len(triples)
    floor = -tolerance + 2.0 * backoff * (1.0 + index_bound)
    # Start from the unconstrained local optima; rounds then pull the
    # indices into the pairing-feasible region.
    current_rho = []
    current_nu = []
    for i, (a, b, c) in enumerate(triples):
        n, m = a.shape[0], b.shape[1]
        p_var = cp.Variable((n, n), symmetric=True, name=f"P_{i}")
        rho = cp.Variable(m, name=f"rho_{i}")
        nu = cp.Variable(m, name=f"nu_{i}")
        solution = solve_lmi(
            [(f"dissipation_{i}", _dissipation_block(a, b, c, p_var, rho, nu))],
            objective=_local_cost(cost, rho, nu),
            hard_constraints=[
                p_var - STRICT_STORAGE_EPS * (1.0 + cp.trace(p_var)) * np.eye(n) >> 0,
                rho >= -index_bound, rho <= index_bound,
                nu >= -index_bound, nu <= index_bound,
            ],
            solver=solver,
        )
        current_rho.append(np.atleast_1d(solution.values[f"rho_{i}"]).copy())
        current_nu.append(np.atleast_1d(solution.values[f"nu_{i}"]).copy())

    def margins_now():
        values = []
        for pairing in graph.pairings:
            (i, j), (a_, b_) = pairing.endpoints()
            values.append(current_rho[i][j] + current_nu[a_][b_])
            values.append(current_rho[a_][b_] + current_nu[i][j])
        return np.array(values)

    rounds = 0
    previous = margins_now()
    for rounds in range(1, max_rounds + 1):
        for i, (a, b, c) in enumerate(triples):
            n, m = a.shape[0], b.shape[1]
            p_var = cp.Variable((n, n), symmetric=True, name=f"P_{i}")
            rho = cp.Variable(m, name=f"rho_{i}")
            nu = cp.Variable(m, name=f"nu_{i}")
            hard = [
                p_var - STRICT_STORAGE_EPS * (1.0 + cp.trace(p_var)) * np.eye(n) >> 0,
                rho >= -index_bound, rho <= index_bound,
                nu >= -index_bound, nu <= index_bound,
            ]
            for pairing in graph.pairings:
                (pi, pj), (pa, pb) = pairing.endpoints()
                if pi == i and pa == i:
                    hard.append(rho[pj] + nu[pb] >= floor)
                    hard.append(rho[pb] + nu[pj] >= floor)
                elif pi == i:
                    hard.append(rho[pj] >= floor - current_nu[pa][pb])
                    hard.append(nu[pj] >= floor - current_rho[pa][pb])
                elif pa == i:
                    hard.append(nu[pb] >= floor - current_rho[pi][pj])
                    hard.append(rho[pb] >= floor - current_nu[pi][pj])
            try:
                solution = solve_lmi(
                    [(f"dissipation_{i}", _dissipation_block(a, b, c, p_var, rho, nu))],
                    objective=_local_cost(cost, rho, nu),
                    hard_constraints=hard,
                    solver=solver,
                )
            except InfeasibleError as exc:
                raise InfeasibleError(
                    f"distributed pass: subsystem {i + 1} cannot satisfy its "
                    f"pairing constraints with neighbors fixed",
                    worst_constraint=f"subsystem_{i + 1}",
                ) from exc
            current_rho[i] = np.atleast_1d(solution.values[f"rho_{i}"]).copy()
            current_nu[i] = np.atleast_1d(solution.values[f"nu_{i}"]).copy()
        latest = margins_now()
        if np.abs(latest - previous).max() < 1e-6:
            previous = latest
            break
        previous = latest

    indices_out = tuple(
        PassivityIndices(
            rho=r - backoff * (1.0 + np.abs(r)), nu=v - backoff * (1.0 + np.abs(v))
        )
        for r, v in zip(current_rho, current_nu)
    )
    stability = check_stability(indices_out, graph, tolerance)
    if not stability.passed:
        pairing, margin = stability.worst()
        raise InfeasibleError(
            f"distributed rounds stalled with pairing {pairing.label()} at "
            f"margin {margin:.6g} (tolerance {tolerance:g})",
            worst_constraint=pairing.label(),
            slack=margin,
        )
    certificates = _recertify(triples, indices_out, {}, solver)
    objective = float(
        sum(r.sum() for r in current_rho) + sum(v.sum() for v in current_nu)
    )
    return IndexOptimizationResult(
        indices=indices_out,
        certificates=certificates,
        margins=stability.margins,
        objective_value=objective,
        solver_name="distributed",
        diagnostics={"method": "distributed", "rounds": rounds, "backoff": backoff},
    )


@dataclass(frozen=True)
class ClosedLoop:
    """The interconnected system assembled from per-subsystem models.

    ``a`` and ``offset`` drive x+ = a x + offset; ``output_map`` stacks the
    subsystem outputs and ``input_map`` reconstructs every routed input from
    the global state (so simulated u/y channels satisfy the pairing law
    exactly — they are the same numbers). Slices locate each subsystem's
    states/inputs/outputs in the stacked vectors.
    """

    a: np.ndarray
    offset: np.ndarray
    output_map: np.ndarray
    input_map: np.ndarray
    state_slices: tuple
    input_slices: tuple
    output_slices: tuple


def assemble_closed_loop(models, graph):
    """Wire per-subsystem models through the pairing law.

    Models may be state-space models (offsets are kept) or any realization
    exposing a/b/c. Every subsystem must be square — the pairing law routes
    outputs into inputs channel by channel.
    """
    _require_valid_graph(graph)
    if len(models) != graph.n_subsystems:
        raise ValidationError(
            f"{len(models)} models for {graph.n_subsystems} subsystems"
        )
    triples = _models_abc(models, graph)
    n_total = sum(a.shape[0] for a, _, _ in triples)
    m_total = sum(b.shape[1] for _, b, _ in triples)
    state_slices, input_slices, output_slices = [], [], []
    pos_n = pos_m = 0
    for a, b, _ in triples:
        state_slices.append(slice(pos_n, pos_n + a.shape[0]))
        input_slices.append(slice(pos_m, pos_m + b.shape[1]))
        output_slices.append(slice(pos_m, pos_m + b.shape[1]))
        pos_n += a.shape[0]
        pos_m += b.shape[1]

    output_map = np.zeros((m_total, n_total))
    for i, (_, _, c) in enumerate(triples):
        output_map[output_slices[i], state_slices[i]] = c

    input_map = np.zeros((m_total, n_total))
    for pairing in graph.pairings:
        (i, j), (a_, b_) = pairing.endpoints()
        row_first = input_slices[i].start + j
        row_second = input_slices[a_].start + b_
        input_map[row_first, state_slices[a_]] = triples[a_][2][b_, :]
        input_map[row_second, state_slices[i]] = -triples[i][2][j, :]

    a_cl = np.zeros((n_total, n_total))
    offset = np.zeros(n_total)
    for i, (a, b, _) in enumerate(triples):
        a_cl[state_slices[i], state_slices[i]] = a
        a_cl[state_slices[i], :] += b @ input_map[input_slices[i], :]
        model_offset = getattr(models[i], "offset", None)
        if model_offset is not None:
            offset[state_slices[i]] = np.asarray(model_offset, dtype=float)

    return ClosedLoop(
        a=a_cl,
        offset=offset,
        output_map=output_map,
        input_map=input_map,
        state_slices=tuple(state_slices),
        input_slices=tuple(input_slices),
        output_slices=tuple(output_slices),
    )


def closed_loop_matrix(models, graph):
    """State matrix of the interconnection (the stability oracle)."""
    return assemble_closed_loop(models, graph).a


@dataclass(frozen=True)
class SubsystemData:
    """One subsystem's measured record plus its declared order and lag."""

    u: object
    y: object
    lag: int
    order: int


@dataclass(frozen=True)
class NetworkCertificate:
    """Outcome of the data-driven network certification pipeline."""

    verdict: Verdict
    indices: tuple
    certificates: tuple
    margins: dict
    tolerance: float
    graph: InterconnectionGraph
    diagnostics: dict

    def to_dict(self):
        margins = [
            {
                "pairing": {
                    "first": [p.first[0] + 1, p.first[1] + 1],
                    "second": [p.second[0] + 1, p.second[1] + 1],
                },
                "sums": [m1, m2],
            }
            for p, (m1, m2) in self.margins.items()
        ]
        indices = [
            None if idx is None else {"rho": idx.rho.tolist(), "nu": idx.nu.tolist()}
            for idx in self.indices
        ]
        certificates = [
            None
            if cert is None
            else {
                "P": cert.p.tolist(),
                "residual": cert.lmi_residual,
                "margin": cert.margin,
            }
            for cert in self.certificates
        ]
        return {
            "verdict": self.verdict.value,
            "tolerance": self.tolerance,
            "indices": indices,
            "certificates": certificates,
            "margins": margins,
            "diagnostics": self.diagnostics,
        }


def _max_workers(n_items):
    env = os.environ.get("DISSIPACERT_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValidationError(
                f"DISSIPACERT_THREADS must be an integer, got {env!r}"
            ) from None
        return max(1, min(cap, n_items))
    return max(1, min(4, n_items))


def certify_network(data, graph, tolerance=1e-3, cost="sum-all",
                    rel_tol=DEFAULT_REL_TOL, backoff=0.0, solver=None):
    """Data-driven network stability certification, end to end.

    Identifies every subsystem from its record, optimizes channel-wise
    indices under the pairing constraints, and grades the result:
    asymptotically_stable when strict margins meet observability or
    detectability, stable when the non-strict check passes, undecided when
    any stage fails for data or feasibility reasons (only malformed input
    raises). Per-stage findings land in the certificate's diagnostics.
    """
    _require_valid_graph(graph)
    records = []
    for i, item in enumerate(data):
        if isinstance(item, SubsystemData):
            records.append(item)
        else:
            try:
                u, y, lag, order = item
            except (TypeError, ValueError):
                raise ValidationError(
                    f"data entry {i} must be SubsystemData or (u, y, lag, order)"
                ) from None
            records.append(SubsystemData(u=u, y=y, lag=lag, order=order))
    if len(records) != graph.n_subsystems:
        raise ValidationError(
            f"{len(records)} data records for {graph.n_subsystems} subsystems"
        )
    for i, record in enumerate(records):
        if record.u.n_channels != graph.channel_counts[i]:
            raise ValidationError(
                f"subsystem {i + 1} data has {record.u.n_channels} input "
                f"channels, graph says {graph.channel_counts[i]}"
            )
        if record.y.n_channels != record.u.n_channels:
            raise ValidationError(
                f"subsystem {i + 1} must be square: {record.u.n_channels} "
                f"inputs vs {record.y.n_channels} outputs"
            )

    diagnostics = {"stages": {}}
    empty = (None,) * graph.n_subsystems

    def undecided(stage, detail):
        diagnostics["stages"][stage] = detail
        return NetworkCertificate(
            verdict=Verdict.UNDECIDED,
            indices=empty,
            certificates=empty,
            margins={},
            tolerance=float(tolerance),
            graph=graph,
            diagnostics=diagnostics,
        )

    t0 = time.perf_counter()

    def run_identify(record):
        return identify(record.u, record.y, record.lag, record.order, rel_tol)

    results = [None] * len(records)
    failures = {}
    workers = _max_workers(len(records))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_identify, rec): i for i, rec in enumerate(records)}
            for future, i in futures.items():
                try:
                    results[i] = future.result()
                except ValidationError:
                    raise
                except DissipacertError as exc:
                    failures[i] = exc
    else:
        for i, record in enumerate(records):
            try:
                results[i] = run_identify(record)
            except ValidationError:
                raise
            except DissipacertError as exc:
                failures[i] = exc
    diagnostics["stages"]["identify"] = {
        "seconds": time.perf_counter() - t0,
        "per_subsystem": [
            None if results[i] is None else results[i].diagnostics.to_dict()
            for i in range(len(records))
        ],
    }
    if failures:
        detail = {
            f"subsystem_{i + 1}": {
                "error": type(exc).__name__,
                "message": str(exc),
                "achieved": getattr(exc, "achieved", None),
                "required": getattr(exc, "required", None),
            }
            for i, exc in sorted(failures.items())
        }
        return undecided("informativity", detail)

    models = [result.model for result in results]
    t1 = time.perf_counter()
    try:
        optimized = optimize_indices(
            models, graph, cost=cost, tolerance=tolerance, rel_tol=rel_tol,
            backoff=backoff, solver=solver,
        )
    except (InfeasibleError, NumericalError) as exc:
        return undecided(
            "optimization",
            {
                "error": type(exc).__name__,
                "message": str(exc),
                "worst_constraint": getattr(exc, "worst_constraint", None),
            },
        )
    diagnostics["stages"]["optimize"] = {
        "seconds": time.perf_counter() - t1,
        "objective": optimized.objective_value,
        "solver": optimized.solver_name,
    }

    stability = check_stability(optimized.indices, graph, tolerance)
    diagnostics["stages"]["stability"] = {
        "passed": stability.passed,
        "worst_margin": stability.worst()[1],
    }
    if not stability.passed:
        return undecided(
            "stability",
            {"worst_margin": stability.worst()[1], "tolerance": tolerance},
        )
    verdict = Verdict.STABLE
    upgrade = check_asymptotic(models, optimized.indices, graph, tolerance, rel_tol)
    diagnostics["stages"]["asymptotic"] = {"upgrade": upgrade.value}
    if upgrade is Verdict.ASYMPTOTICALLY_STABLE:
        verdict = Verdict.ASYMPTOTICALLY_STABLE
    return NetworkCertificate(
        verdict=verdict,
        indices=optimized.indices,
        certificates=optimized.certificates,
        margins=optimized.margins,
        tolerance=float(tolerance),
        graph=graph,
        diagnostics=diagnostics,
    )


def save_graph(path, graph):
    """Write the pairing list as JSON with 1-based indices."""
    payload = [
        {
            "first": [p.first[0] + 1, p.first[1] + 1],
            "second": [p.second[0] + 1, p.second[1] + 1],
        }
        for p in graph.pairings
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_graph(path):
    """Read a 1-based pairing list; channel counts are inferred from the
    largest channel index each subsystem uses."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise ValidationError(f"{path}: expected a JSON list of pairings")
    pairings = []
    highest = {}
    for entry in raw:
        try:
            first = (int(entry["first"][0]) - 1, int(entry["first"][1]) - 1)
            second = (int(entry["second"][0]) - 1, int(entry["second"][1]) - 1)
        except (KeyError, TypeError, IndexError, ValueError):
            raise ValidationError(
                f"{path}: each pairing needs 'first': [i, j] and 'second': [a, b]"
            ) from None
        pairings.append(ChannelPairing(first=first, second=second))
        for sub, ch in (first, second):
            if sub < 0 or ch < 0:
                raise ValidationError(f"{path}: indices are 1-based")
            highest[sub] = max(highest.get(sub, 0), ch)
    if not pairings:
        raise ValidationError(f"{path}: no pairings listed")
    n_sub = max(highest) + 1
    counts = tuple(highest.get(i, -1) + 1 for i in range(n_sub))
    if any(c == 0 for c in counts):
        raise ValidationError(
            f"{path}: subsystems {[i + 1 for i, c in enumerate(counts) if c == 0]} "
            f"never appear in a pairing"
        )
    return InterconnectionGraph(channel_counts=counts, pairings=tuple(pairings))


def save_network_certificate(path, certificate):
    """Write a network certificate report as JSON."""
    Path(path).write_text(
        json.dumps(certificate.to_dict(), indent=2, sort_keys=True) + "\n"
    )
