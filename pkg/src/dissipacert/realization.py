"""Data-based state-space realizations from input-output records.

The pipeline: stack lagged inputs with a selected set of lagged outputs into
a non-minimal state z(k), regress the one-step map of z on Hankel data, then
cut the result down to the controllable-and-observable subspace to obtain a
minimal realization. Everything is deterministic: ranks come from singular
values, the output-row selection from a column-pivoted QR.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._linalg import (
    DEFAULT_REL_TOL,
    controllability_matrix,
    observability_matrix,
    orthonormal_range,
    relative_pinv,
    relative_rank,
    subspace_intersection,
)
from .errors import InformativityError, ReductionError, ValidationError, WindowError
from .signals import (
    Trajectory,
    build_hankel,
    is_persistently_exciting,
    rank_condition,
)

__all__ = [
    "ThetaSelector",
    "NonMinimalRealization",
    "MinimalRealization",
    "IdentificationDiagnostics",
    "IdentificationResult",
    "select_theta",
    "build_z_trajectory",
    "data_based_nonminimal",
    "minimal_realization",
    "identify",
]


@dataclass(frozen=True)
class ThetaSelector:
    """Choice of ``order`` independent rows from a lagged-output Hankel block.

    ``matrix`` is the 0/1 selection matrix with one row per chosen Hankel
    row, ordered by ascending row index.
    """

    row_indices: tuple
    matrix: np.ndarray

    def __post_init__(self):
        rows = tuple(int(r) for r in self.row_indices)
        matrix = np.asarray(self.matrix, dtype=float)
        n, total = matrix.shape
        if len(rows) != n or len(set(rows)) != n:
            raise ValidationError("row_indices must be distinct and match matrix rows")
        if any(r < 0 or r >= total for r in rows):
            raise ValidationError(
                f"row indices {rows} out of range for {total} source rows"
            )
        matrix = matrix.copy()
        matrix.setflags(write=False)
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_rows(cls, rows, total_rows):
        rows = tuple(sorted(int(r) for r in rows))
        matrix = np.zeros((len(rows), total_rows))
        for k, r in enumerate(rows):
            matrix[k, r] = 1.0
        return cls(row_indices=rows, matrix=matrix)


@dataclass(frozen=True)
class NonMinimalRealization:
    """One-step model z(k+1) = a z(k) + b u(k), y(k) = c z(k) on the stacked
    past-window state of dimension m*lag + order."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lag: int
    order: int
    theta: ThetaSelector

    def __post_init__(self):
        for name in ("a", "b", "c"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dim = self.b.shape[0]
        m = self.b.shape[1]
        if self.a.shape != (dim, dim) or self.c.shape[1] != dim:
            raise ValidationError("inconsistent realization dimensions")
        if dim != m * self.lag + self.order:
            raise ValidationError(
                f"state dimension {dim} != m*lag + order = {m * self.lag + self.order}"
            )

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def n_inputs(self):
        return self.b.shape[1]

    @property
    def n_outputs(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class MinimalRealization:
    """Controllable-and-observable reduction of a non-minimal realization.

    ``basis`` holds the lift matrix back to the non-minimal coordinates:
    states of this model map to the stacked past-window state via
    ``basis @ x``. Its columns span the intersection of the controllable
    and observable subspaces but are not orthonormal in general — the
    reduction rescales the state so both gramians are diagonal and equal,
    which keeps downstream semidefinite problems well conditioned.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c", "basis"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.isfinite(arr).all():
                raise ValidationError(f"{name} contains non-finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.a.shape[0]
        if self.a.shape != (n, n) or self.b.shape[0] != n or self.c.shape[1] != n:
            raise ValidationError("inconsistent realization dimensions")
        if self.basis.shape[1] != n:
            raise ValidationError("basis column count must match the state dimension")
        if np.linalg.matrix_rank(self.basis) != n:
            raise ValidationError("basis columns must be linearly independent")

    @property
    def order(self):
        return self.a.shape[0]

    @property
    def n_inputs(self):
        return self.b.shape[1]

    @property
    def n_outputs(self):
        return self.c.shape[0]


def select_theta(y_hankel, order, rel_tol=DEFAULT_REL_TOL):
    """Pick ``order`` independent rows of a lagged-output Hankel matrix.

    Uses a column-pivoted QR of the transpose, so rows are chosen by largest
    remaining norm — a deterministic, well-conditioned selection; exact ties
    resolve to the lowest row index. Raises :class:`InformativityError` when
    the matrix cannot supply ``order`` independent rows.
    """
    matrix = y_hankel.matrix
    total_rows = matrix.shape[0]
    if order < 1 or order > total_rows:
        raise ValidationError(
            f"cannot select {order} rows from a {total_rows}-row matrix"
        )
    achieved = relative_rank(matrix, rel_tol)
    if achieved < order:
        raise InformativityError(
            f"lagged outputs span only {achieved} directions but {order} "
            f"independent rows are needed; record a longer or richer "
            f"experiment",
            achieved=achieved,
            required=order,
        )
    _, _, pivots = linalg.qr(matrix.T, mode="economic", pivoting=True)
    selector = ThetaSelector.from_rows(pivots[:order], total_rows)
    picked_rank = relative_rank(selector.matrix @ matrix, rel_tol)
    if picked_rank < order:
        raise InformativityError(
            f"pivoted selection produced rank {picked_rank} < {order}",
            achieved=picked_rank,
            required=order,
        )
    return selector


def build_z_trajectory(u, y, theta, lag):
    """Stack each step's past input window over the selected past outputs.

    z(k) = [u(k-lag..k-1); theta-selected rows of y(k-lag..k-1)], defined
    wherever the past window exists, so the result is ``lag`` samples
    shorter than the record and starts ``lag`` indices later.
    """
    if u.n_samples != y.n_samples or u.start_index != y.start_index:
        raise ValidationError("input and output records are not aligned")
    if u.n_samples < lag + 1:
        raise WindowError(
            f"need more than lag={lag} samples to place one z sample, "
            f"got {u.n_samples}"
        )
    if theta.matrix.shape[1] != y.n_channels * lag:
        raise ValidationError(
            f"selector expects {theta.matrix.shape[1]} lagged-output rows, "
            f"data provides {y.n_channels * lag}"
        )
    columns = u.n_samples - lag
    u_past = build_hankel(u, u.start_index, lag, columns).matrix
    y_past = build_hankel(y, y.start_index, lag, columns).matrix
    z = np.vstack([u_past, theta.matrix @ y_past])
    return Trajectory(z, dt=u.dt, start_index=u.start_index + lag)


def _regression_blocks(u, y, z, lag):
    """Shifted data blocks for the one-step regression on z."""
    t_z = z.n_samples
    z0 = z.data[:, : t_z - 1]
    z1 = z.data[:, 1:]
    u0 = u.data[:, lag : lag + t_z - 1]
    y0 = y.data[:, lag : lag + t_z - 1]
    return u0, y0, z0, z1


def _build_nonminimal(u, y, lag, order, rel_tol, require_input_pe):
    """Shared implementation of data_based_nonminimal, also returning the
    diagnostics gathered along the way."""
    # The operative informativity gate is the stacked input-output rank
    # condition. The standalone input-excitation test is sufficient for it
    # on open-loop experiments but fails on perfectly usable closed-loop
    # records (the routed input is a function of the state), so by default
    # it is recorded as a diagnostic rather than enforced.
    excitation = is_persistently_exciting(u, lag + order + 1, rel_tol)
    if require_input_pe and not excitation:
        raise InformativityError(
            f"input is not persistently exciting of order {lag + order + 1} "
            f"(rank {excitation.rank} of {excitation.required})",
            achieved=excitation.rank,
            required=excitation.required,
        )
    condition = rank_condition(u, y, lag, order, rel_tol)
    if not condition:
        raise InformativityError(
            f"stacked input-output Hankel has rank {condition.rank}, "
            f"needs exactly {condition.required}",
            achieved=condition.rank,
            required=condition.required,
        )
    columns = u.n_samples - lag
    y_hankel = build_hankel(y, y.start_index, lag, columns)
    theta = select_theta(y_hankel, order, rel_tol)
    z = build_z_trajectory(u, y, theta, lag)
    u0, y0, z0, z1 = _regression_blocks(u, y, z, lag)
    h = np.vstack([u0, z0])
    h_required = u.n_channels * (lag + 1) + order
    h_sigma = linalg.svdvals(h)
    h_rank = relative_rank(h, rel_tol)
    if h_rank != h_required:
        raise InformativityError(
            f"input-state data matrix has rank {h_rank}, needs {h_required}",
            achieved=h_rank,
            required=h_required,
        )
    g = z1 @ relative_pinv(h, rel_tol)
    m = u.n_channels
    nm = NonMinimalRealization(
        a=g[:, m:],
        b=g[:, :m],
        c=y0 @ relative_pinv(z0, rel_tol),
        lag=lag,
        order=order,
        theta=theta,
    )
    z_residual = float(
        np.abs(z1 - nm.a @ z0 - nm.b @ u0).max(initial=0.0)
    )
    y_residual = float(np.abs(y0 - nm.c @ z0).max(initial=0.0))
    diag = {
        "excitation": excitation,
        "rank_condition": condition,
        "theta_rows": theta.row_indices,
        "h_rank": h_rank,
        "h_required": h_required,
        "h_singular_values": tuple(float(s) for s in h_sigma),
        "z_residual": z_residual,
        "y_residual": y_residual,
    }
    return nm, diag


def data_based_nonminimal(u, y, lag, order, rel_tol=DEFAULT_REL_TOL,
                          require_input_pe=False):
    """Identify the one-step map of the stacked past-window state.

    Requires the stacked input-output rank test to pass (and, with
    ``require_input_pe``, the standalone input-excitation test as well);
    then regresses shifted z data on [current input; current z] through a
    truncated-SVD pseudoinverse and reads the input/state blocks off the
    solution. The output map comes from the analogous regression of y on z.
    """
    nm, _ = _build_nonminimal(u, y, lag, order, rel_tol, require_input_pe)
    return nm


def _balanced_similarity(a, b, c):
    """State transform equalizing the reachability/observability gramians.

    Returns ``(t, tinv)`` so that ``t a tinv, t b, c tinv`` is a balanced
    realization. Identification bases tend to be badly skewed — the subspace
    intersection weighs directions by how strongly the data excites them, so
    near-unreachable modes come out microscopic and storage-function
    matrices in that basis need condition numbers no semidefinite solver
    survives. Balancing is input-output invariant and fixes that. Falls back
    to the identity when the model is not Schur stable or a gramian is
    numerically rank deficient, since the transform is then undefined.
    """
    n = a.shape[0]
    eye = np.eye(n)
    if np.abs(linalg.eigvals(a)).max() >= 1.0:
        return eye, eye
    try:
        wc = linalg.solve_discrete_lyapunov(a, b @ b.T)
        wo = linalg.solve_discrete_lyapunov(a.T, c.T @ c)
        lc = linalg.cholesky(0.5 * (wc + wc.T), lower=True)
        lo = linalg.cholesky(0.5 * (wo + wo.T), lower=True)
    except linalg.LinAlgError:
        return eye, eye
    left, hankel_sv, right_t = np.linalg.svd(lo.T @ lc)
    if hankel_sv[-1] <= hankel_sv[0] * np.finfo(float).eps:
        return eye, eye
    root = np.sqrt(hankel_sv)
    tinv = lc @ right_t.T / root
    t = (left / root).T @ lo.T
    return t, tinv


def minimal_realization(nm, rel_tol=DEFAULT_REL_TOL):
    """Cut a non-minimal realization down to its controllable-and-observable
    subspace (range(ctrb) meeting the row space of obsv) and balance the
    result, yielding an input-output-equivalent minimal model."""
    reach = orthonormal_range(controllability_matrix(nm.a, nm.b), rel_tol)
    # Row space of the observability matrix = orthogonal complement of the
    # unobservable subspace.
    observable_span = orthonormal_range(
        observability_matrix(nm.a, nm.c).T, rel_tol
    )
    basis = subspace_intersection(reach, observable_span)
    if basis.shape[1] == 0:
        raise ReductionError(
            "controllable and observable subspaces do not intersect; the "
            "data admits no minimal realization"
        )
    a_cut = basis.T @ nm.a @ basis
    b_cut = basis.T @ nm.b
    c_cut = nm.c @ basis
    t, tinv = _balanced_similarity(a_cut, b_cut, c_cut)
    reduced = MinimalRealization(
        a=t @ a_cut @ tinv,
        b=t @ b_cut,
        c=c_cut @ tinv,
        basis=basis @ tinv,
    )
    n_hat = reduced.order
    ctrb_rank = relative_rank(controllability_matrix(reduced.a, reduced.b), rel_tol)
    obsv_rank = relative_rank(observability_matrix(reduced.a, reduced.c), rel_tol)
    if ctrb_rank != n_hat or obsv_rank != n_hat:
        raise ReductionError(
            f"reduced model is not minimal (controllability rank {ctrb_rank}, "
            f"observability rank {obsv_rank}, order {n_hat}); the working "
            f"tolerance may not separate the subspaces"
        )
    return reduced


@dataclass(frozen=True)
class IdentificationDiagnostics:
    """Intermediate ranks, selections and residuals of one identification."""

    excitation_rank: int
    excitation_required: int
    rank_condition_rank: int
    rank_condition_required: int
    theta_rows: tuple
    h_rank: int
    h_required: int
    h_singular_values: tuple
    z_residual: float
    y_residual: float
    reduced_order: int

    def to_dict(self):
        return {
            "excitation_rank": self.excitation_rank,
            "excitation_required": self.excitation_required,
            "rank_condition_rank": self.rank_condition_rank,
            "rank_condition_required": self.rank_condition_required,
            "theta_rows": list(self.theta_rows),
            "h_rank": self.h_rank,
            "h_required": self.h_required,
            "h_singular_values": list(self.h_singular_values),
            "z_residual": self.z_residual,
            "y_residual": self.y_residual,
            "reduced_order": self.reduced_order,
        }


@dataclass(frozen=True)
class IdentificationResult:
    """Minimal realization plus the artifacts that produced it."""

    model: MinimalRealization
    nonminimal: NonMinimalRealization
    diagnostics: IdentificationDiagnostics


def identify(u, y, lag, order, rel_tol=DEFAULT_REL_TOL, require_input_pe=False):
    """Full identification pipeline: informativity checks, non-minimal
    realization, minimal reduction, with every intermediate rank recorded.

    Deterministic: identical data gives bit-identical matrices.
    """
    nm, raw = _build_nonminimal(u, y, lag, order, rel_tol, require_input_pe)
    reduced = minimal_realization(nm, rel_tol)
    diagnostics = IdentificationDiagnostics(
        excitation_rank=raw["excitation"].rank,
        excitation_required=raw["excitation"].required,
        rank_condition_rank=raw["rank_condition"].rank,
        rank_condition_required=raw["rank_condition"].required,
        theta_rows=raw["theta_rows"],
        h_rank=raw["h_rank"],
        h_required=raw["h_required"],
        h_singular_values=raw["h_singular_values"],
        z_residual=raw["z_residual"],
        y_residual=raw["y_residual"],
        reduced_order=reduced.order,
    )
    return IdentificationResult(model=reduced, nonminimal=nm, diagnostics=diagnostics)
