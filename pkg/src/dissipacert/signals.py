"""Multichannel discrete-time signals, block-Hankel matrices, and the data
informativity tests (persistency of excitation and the stacked input-output
rank condition) used by the identification pipeline.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._linalg import DEFAULT_REL_TOL, as_matrix, relative_rank
from .errors import ValidationError, WindowError

__all__ = [
    "Trajectory",
    "HankelMatrix",
    "RankCheck",
    "build_hankel",
    "numerical_rank",
    "is_persistently_exciting",
    "rank_condition",
    "save_trajectories",
    "load_trajectories",
]


@dataclass(frozen=True)
class Trajectory:
    """A finite multichannel signal sampled on consecutive integer indices.

    Parameters
    ----------
    data : ndarray, shape (channels, samples)
        One row per channel. Stored read-only.
    dt : float, optional
        Sample period in seconds; 0 marks index-only data.
    start_index : int, optional
        Time index of the first stored sample. Negative values let a record
        carry "past" samples from before the nominal time origin.
    """

    data: np.ndarray
    dt: float = 0.0
    start_index: int = 0

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.data, dtype=float))
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(
                f"trajectory data must be (channels, samples) with at least one "
                f"of each, got shape {np.asarray(self.data).shape}"
            )
        if not np.isfinite(arr).all():
            raise ValidationError("trajectory data contains non-finite entries")
        if self.dt < 0:
            raise ValidationError(f"dt must be >= 0, got {self.dt}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "start_index", int(self.start_index))

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def last_index(self):
        """Time index of the last stored sample."""
        return self.start_index + self.n_samples - 1

    def sample(self, index):
        """The sample at absolute time ``index`` as a 1-D array."""
        return self.window(index, index)[:, 0]

    def window(self, first, last):
        """Samples on [first, last] (inclusive) as a (channels, count) array."""
        if first > last:
            raise WindowError(f"empty window [{first}, {last}]")
        if first < self.start_index or last > self.last_index:
            missing = sorted(
                set(range(first, self.start_index))
                | set(range(self.last_index + 1, last + 1))
            )
            raise WindowError(
                f"window [{first}, {last}] needs samples {missing} outside the "
                f"recorded range [{self.start_index}, {self.last_index}]"
            )
        lo = first - self.start_index
        return self.data[:, lo : lo + (last - first + 1)]

    def shifted(self, start_index):
        """Same samples relabeled to begin at ``start_index``."""
        return Trajectory(self.data, self.dt, start_index)


@dataclass(frozen=True)
class HankelMatrix:
    """Block-Hankel arrangement of a signal window.

    ``matrix`` has ``block_rows`` stacked shifts of the source signal: block
    (r, c) holds the sample at time ``source_start + r + c``.
    """

    matrix: np.ndarray
    block_rows: int
    source_start: int

    @property
    def n_channels(self):
        return self.matrix.shape[0] // self.block_rows

    @property
    def n_columns(self):
        return self.matrix.shape[1]

    def block(self, r, c):
        """The (r, c) block, i.e. the signal sample at source_start + r + c."""
        n = self.n_channels
        return self.matrix[r * n : (r + 1) * n, c]


def build_hankel(z, i, t, T):
    """Block-Hankel matrix of ``z`` with ``t`` block rows and ``T`` columns,
    starting at time index ``i``.

    Column ``c`` stacks the samples z(i+c), z(i+c+1), ..., z(i+c+t-1), so the
    full window [i, i+t+T-2] must lie inside the recorded range.
    """
    if t < 1 or T < 1:
        raise ValidationError(f"need t >= 1 and T >= 1, got t={t}, T={T}")
    window = z.window(i, i + t + T - 2)
    n = z.n_channels
    matrix = np.empty((t * n, T))
    for r in range(t):
        matrix[r * n : (r + 1) * n, :] = window[:, r : r + T]
    return HankelMatrix(matrix=matrix, block_rows=t, source_start=i)


def numerical_rank(m, rel_tol=DEFAULT_REL_TOL):
    """Rank of ``m`` counted as singular values above ``rel_tol * sigma_max``.

    Deterministic across platforms (singular values, never elimination
    pivots); the zero matrix has rank 0.
    """
    m = as_matrix(m)
    if m.size == 0:
        raise ValidationError("matrix must be nonempty")
    if rel_tol <= 0:
        raise ValidationError(f"rel_tol must be > 0, got {rel_tol}")
    return relative_rank(m, rel_tol)


@dataclass(frozen=True)
class RankCheck:
    """Outcome of a rank-based data test; truthy iff the test passed."""

    satisfied: bool
    rank: int
    required: int

    def __bool__(self):
        return self.satisfied


def is_persistently_exciting(u, order, rel_tol=DEFAULT_REL_TOL):
    """Test persistency of excitation of the given order.

    The input is persistently exciting of order L when its block-Hankel
    matrix with L block rows has full row rank m*L. Returns a
    :class:`RankCheck` with the achieved rank.
    """
    if order < 1:
        raise ValidationError(f"order must be >= 1, got {order}")
    m = u.n_channels
    if u.n_samples < order + 1:
        raise WindowError(
            f"need at least {order + 1} samples for an order-{order} "
            f"excitation test, got {u.n_samples}"
        )
    columns = u.n_samples - order + 1
    required = m * order
    if columns < required:
        raise WindowError(
            f"only {columns} Hankel columns available but full row rank "
            f"needs at least {required}; record a longer input"
        )
    hankel = build_hankel(u, u.start_index, order, columns)
    rank = numerical_rank(hankel.matrix, rel_tol)
    return RankCheck(satisfied=(rank == required), rank=rank, required=required)


def rank_condition(u, y, lag, order, rel_tol=DEFAULT_REL_TOL):
    """Stacked input-output Hankel rank test for identifiability.

    Stacks the input Hankel with lag+1 block rows over the output Hankel
    with lag block rows (both starting at the first recorded sample, whose
    first ``lag`` samples act as the past window) and checks that the
    numerical rank equals m*(lag+1) + order. Passing certifies that the
    recorded data can support a realization of the stated order and lag.
    """
    if lag < 1:
        raise ValidationError(f"lag must be >= 1, got {lag}")
    if order < 1:
        raise ValidationError(f"order must be >= 1, got {order}")
    if u.n_samples != y.n_samples:
        raise ValidationError(
            f"input and output lengths differ: {u.n_samples} vs {y.n_samples}"
        )
    if u.start_index != y.start_index or u.dt != y.dt:
        raise ValidationError("input and output are not aligned in time")
    # The two Hankels admit slightly different maximal widths; the stacked
    # matrix needs a common column count, so both use the larger window that
    # still fits the taller (input) block.
    columns = u.n_samples - lag
    if columns < 1:
        raise WindowError(
            f"need more than lag={lag} samples to form the stacked test, "
            f"got {u.n_samples}"
        )
    u_hankel = build_hankel(u, u.start_index, lag + 1, columns)
    y_hankel = build_hankel(y, y.start_index, lag, columns)
    stacked = np.vstack([u_hankel.matrix, y_hankel.matrix])
    required = u.n_channels * (lag + 1) + order
    rank = numerical_rank(stacked, rel_tol)
    return RankCheck(satisfied=(rank == required), rank=rank, required=required)


def _sidecar_path(path):
    path = Path(path)
    return path.with_suffix(".json")


def save_trajectories(path, u, y, metadata=None):
    """Write an aligned (u, y) record as CSV plus a JSON sidecar.

    The CSV carries a ``t, u_1..u_m, y_1..y_p`` header and one row per
    sample; the sidecar stores dt, channel names, the origin offset (how
    many leading samples precede time index 0) and any extra ``metadata``
    entries. Returns the sidecar path.
    """
    if u.n_samples != y.n_samples:
        raise ValidationError(
            f"input and output lengths differ: {u.n_samples} vs {y.n_samples}"
        )
    if u.start_index != y.start_index or u.dt != y.dt:
        raise ValidationError("input and output are not aligned in time")
    path = Path(path)
    m, p = u.n_channels, y.n_channels
    u_names = [f"u_{j + 1}" for j in range(m)]
    y_names = [f"y_{j + 1}" for j in range(p)]
    indices = np.arange(u.start_index, u.start_index + u.n_samples)
    t_col = indices * (u.dt if u.dt > 0 else 1.0)
    table = np.column_stack([t_col, u.data.T, y.data.T])
    header = ",".join(["t"] + u_names + y_names)
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
    sidecar = {
        "dt": u.dt,
        "origin_offset": -u.start_index,
        "input_channels": u_names,
        "output_channels": y_names,
    }
    if metadata:
        sidecar.update(metadata)
    sidecar_path = _sidecar_path(path)
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar_path


def load_trajectories(path):
    """Read a CSV trajectory record written by :func:`save_trajectories`.

    Returns ``(u, y, metadata)``. The JSON sidecar is optional: without it,
    dt is inferred from the time column and the record is assumed to start
    at index 0.
    """
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
    names = [h.strip() for h in header.split(",")]
    if not names or names[0] != "t":
        raise ValidationError(f"{path}: expected a 't,u_...,y_...' header")
    u_cols = [i for i, h in enumerate(names) if h.startswith("u_")]
    y_cols = [i for i, h in enumerate(names) if h.startswith("y_")]
    if not u_cols or not y_cols:
        raise ValidationError(f"{path}: header lists no u_/y_ channels")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != len(names):
        raise ValidationError(
            f"{path}: rows have {table.shape[1]} fields, header lists {len(names)}"
        )
    metadata = {}
    sidecar_path = _sidecar_path(path)
    if sidecar_path.exists():
        metadata = json.loads(sidecar_path.read_text())
        dt = float(metadata.get("dt", 0.0))
        start_index = -int(metadata.get("origin_offset", 0))
    else:
        t_col = table[:, 0]
        dt = float(t_col[1] - t_col[0]) if len(t_col) > 1 else 0.0
        start_index = 0
    u = Trajectory(table[:, u_cols].T, dt=dt, start_index=start_index)
    y = Trajectory(table[:, y_cols].T, dt=dt, start_index=start_index)
    return u, y, metadata
