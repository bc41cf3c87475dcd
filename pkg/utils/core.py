"""
核心数据类型
观测序列、表示函数 (lookup table / grid quantizer)、经验块分布

所有对象构造后不可变 (numpy 数组设为只读)，操作均为纯函数。
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from config import ENUMERATION_GUARD
from utils.common import (
    DomainMismatchError, GuardError, SequenceTooShortError, ValidationError,
)

MODULE = "core"


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


# ============== Observation Series ==============

@dataclass(frozen=True, eq=False)
class ObservationSeries:
    """
    X_0..X_{n-1}, optionally with the actions A_0..A_{n-1} of an MDP trajectory.

    Discrete observations are a 1-D integer array of state indices;
    continuous observations are a 2-D float array (n, d_obs).
    """

    observations: np.ndarray
    actions: Optional[np.ndarray] = None
    seed: Optional[int] = None
    generator: str = ""

    def __post_init__(self):
        obs = np.asarray(self.observations)
        if obs.ndim == 1 and obs.size and np.issubdtype(obs.dtype, np.floating):
            if not np.all(np.equal(np.mod(obs, 1), 0)):
                raise ValidationError(MODULE, "ObservationSeries", "1-D observations must be integer state indices")
        if obs.ndim == 1:
            obs = _frozen(obs, np.int64)
            if obs.size and obs.min() < 0:
                raise ValidationError(MODULE, "ObservationSeries", "state indices must be nonnegative")
        elif obs.ndim == 2:
            obs = _frozen(obs, np.float64)
        else:
            raise ValidationError(MODULE, "ObservationSeries", f"observations must be 1-D or 2-D, got {obs.ndim}-D")
        if len(obs) < 1:
            raise ValidationError(MODULE, "ObservationSeries", "series must contain at least one observation")
        object.__setattr__(self, "observations", obs)

        if self.actions is not None:
            actions = _frozen(self.actions, np.int64)
            if actions.shape != (len(obs),):
                raise ValidationError(
                    MODULE, "ObservationSeries",
                    f"actions length {actions.shape[0] if actions.ndim else 0} != observations length {len(obs)}",
                )
            if actions.min() < 0:
                raise ValidationError(MODULE, "ObservationSeries", "action indices must be nonnegative")
            object.__setattr__(self, "actions", actions)

    def __len__(self):
        return len(self.observations)

    @property
    def is_discrete(self):
        return self.observations.ndim == 1

    @property
    def dim(self):
        return 0 if self.is_discrete else self.observations.shape[1]


# ============== Representation Functions ==============

@dataclass(frozen=True, eq=False)
class RepresentationFunction:
    alphabet_size: int

    def apply(self, series):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class LookupTable(RepresentationFunction):
    """f(x) = table[x] for discrete states x in 0..|X|-1."""

    table: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        table = _frozen(self.table, np.int64)
        if table.ndim != 1 or table.size == 0:
            raise ValidationError(MODULE, "LookupTable", "table must be a non-empty 1-D array")
        if self.alphabet_size < 1:
            raise ValidationError(MODULE, "LookupTable", "alphabet_size must be >= 1")
        if table.min() < 0 or table.max() >= self.alphabet_size:
            raise ValidationError(
                MODULE, "LookupTable",
                f"table entries must lie in [0, {self.alphabet_size - 1}]",
            )
        object.__setattr__(self, "table", table)

    @property
    def n_states(self):
        return len(self.table)

    def apply(self, series):
        if not series.is_discrete:
            raise DomainMismatchError(MODULE, "apply_representation", "lookup table needs discrete observations")
        obs = series.observations
        if obs.max() >= self.n_states:
            raise DomainMismatchError(
                MODULE, "apply_representation",
                f"state index {int(obs.max())} outside table of length {self.n_states}",
            )
        return self.table[obs]


@dataclass(frozen=True, eq=False)
class GridQuantizer(RepresentationFunction):
    """
    Axis-aligned grid over R^d.

    thresholds[j] are the strictly increasing cut points of dimension j;
    a coordinate equal to a cut point falls into the upper cell.
    assignment has shape (len(thresholds[0]) + 1, ..., len(thresholds[d-1]) + 1)
    and maps each cell to a symbol.
    """

    thresholds: Tuple[np.ndarray, ...] = ()
    assignment: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        if not self.thresholds:
            raise ValidationError(MODULE, "GridQuantizer", "at least one dimension is required")
        cuts = []
        for j, t in enumerate(self.thresholds):
            t = _frozen(t, np.float64)
            if t.ndim != 1:
                raise ValidationError(MODULE, "GridQuantizer", f"thresholds[{j}] must be 1-D")
            if t.size > 1 and not np.all(np.diff(t) > 0):
                raise ValidationError(MODULE, "GridQuantizer", f"thresholds[{j}] must be strictly increasing")
            cuts.append(t)
        object.__setattr__(self, "thresholds", tuple(cuts))

        shape = tuple(len(t) + 1 for t in cuts)
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.size != int(np.prod(shape)):
            raise ValidationError(
                MODULE, "GridQuantizer",
                f"assignment has {assignment.size} cells, grid has {int(np.prod(shape))}",
            )
        assignment = assignment.reshape(shape)
        if assignment.min() < 0 or assignment.max() >= self.alphabet_size:
            raise ValidationError(
                MODULE, "GridQuantizer",
                f"cell symbols must lie in [0, {self.alphabet_size - 1}]",
            )
        object.__setattr__(self, "assignment", _frozen(assignment, np.int64))

    @property
    def dim(self):
        return len(self.thresholds)

    def apply(self, series):
        if series.is_discrete:
            raise DomainMismatchError(MODULE, "apply_representation", "grid quantizer needs continuous observations")
        if series.dim != self.dim:
            raise DomainMismatchError(
                MODULE, "apply_representation",
                f"observation dimension {series.dim} != quantizer dimension {self.dim}",
            )
        cells = tuple(
            np.searchsorted(self.thresholds[j], series.observations[:, j], side="right")
            for j in range(self.dim)
        )
        return self.assignment[cells]


def apply_representation(f, series):
    """materialize f(X_0), ..., f(X_{n-1}) as an int64 array"""
    return np.asarray(f.apply(series), dtype=np.int64)


def constant_table(n_states, alphabet_size=1, value=0):
    return LookupTable(alphabet_size=alphabet_size, table=np.full(n_states, value))


def identity_table(n_states):
    return LookupTable(alphabet_size=n_states, table=np.arange(n_states))


def pair_representation(f, g):
    """
    x -> (f(x), g(x)) encoded as f(x) * |Y_g| + g(x).
    """
    if not isinstance(f, LookupTable) or not isinstance(g, LookupTable):
        raise ValidationError(MODULE, "pair_representation", "both maps must be lookup tables")
    if f.n_states != g.n_states:
        raise DomainMismatchError(
            MODULE, "pair_representation",
            f"domain sizes differ: {f.n_states} vs {g.n_states}",
        )
    return LookupTable(
        alphabet_size=f.alphabet_size * g.alphabet_size,
        table=f.table * g.alphabet_size + g.table,
    )


def permute_labels(f, permutation):
    """Relabel the outputs of a lookup table: y -> permutation[y]."""
    permutation = np.asarray(permutation, dtype=np.int64)
    if sorted(permutation.tolist()) != list(range(f.alphabet_size)):
        raise ValidationError(MODULE, "permute_labels", "not a permutation of the alphabet")
    return LookupTable(alphabet_size=f.alphabet_size, table=permutation[f.table])


# ============== Empirical Block Distribution ==============

@dataclass(frozen=True, eq=False)
class EmpiricalBlockDistribution:
    """
    Counts of overlapping (k+1)-blocks of a symbol sequence.

    counts is dense, indexed by the base-|Y| code of the block with the
    first symbol most significant.
    """

    block_order: int
    alphabet_size: int
    counts: np.ndarray
    n_blocks: int

    def __post_init__(self):
        counts = _frozen(self.counts, np.int64)
        if counts.shape != (self.alphabet_size ** self.block_order,):
            raise ValidationError(MODULE, "EmpiricalBlockDistribution", "counts size != |Y|^block_order")
        if int(counts.sum()) != self.n_blocks:
            raise ValidationError(MODULE, "EmpiricalBlockDistribution", "counts do not sum to n_blocks")
        object.__setattr__(self, "counts", counts)

    @property
    def k(self):
        return self.block_order - 1

    def probabilities(self):
        return self.counts / self.n_blocks

    def as_dict(self):
        """{(y_0, ..., y_k): count} over the nonzero cells"""
        out = {}
        for code in np.flatnonzero(self.counts):
            out[decode_block(int(code), self.alphabet_size, self.block_order)] = int(self.counts[code])
        return out

    def marginalize(self):
        """Drop the last coordinate: the k-block distribution of the first k symbols."""
        if self.block_order < 2:
            raise ValidationError(MODULE, "marginalize", "cannot marginalize a 1-block distribution")
        first = self.counts.reshape(-1, self.alphabet_size).sum(axis=1)
        return EmpiricalBlockDistribution(self.block_order - 1, self.alphabet_size, first, self.n_blocks)

    def last_marginal(self):
        return self.counts.reshape(-1, self.alphabet_size).sum(axis=0)


def decode_block(code, alphabet_size, block_order):
    symbols = []
    for _ in range(block_order):
        code, y = divmod(code, alphabet_size)
        symbols.append(y)
    return tuple(reversed(symbols))


def block_codes(symbols, k, alphabet_size):
    """base-|Y| codes of the overlapping (k+1)-blocks"""
    symbols = np.asarray(symbols, dtype=np.int64)
    n_blocks = len(symbols) - k
    codes = np.zeros(n_blocks, dtype=np.int64)
    for j in range(k + 1):
        codes = codes * alphabet_size + symbols[j:j + n_blocks]
    return codes


def collect_blocks(symbols, k, alphabet_size=None):
    """
    Overlapping (stride 1) block counts of length k+1.

    alphabet_size defaults to max(symbols) + 1.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    if k < 0:
        raise ValidationError(MODULE, "collect_blocks", f"block memory must be >= 0, got {k}")
    if len(symbols) <= k:
        raise SequenceTooShortError(
            MODULE, "collect_blocks",
            f"sequence length {len(symbols)} must exceed block memory k={k}",
        )
    if alphabet_size is None:
        alphabet_size = int(symbols.max()) + 1
    if symbols.min() < 0 or symbols.max() >= alphabet_size:
        raise DomainMismatchError(MODULE, "collect_blocks", f"symbols outside alphabet of size {alphabet_size}")
    support = alphabet_size ** (k + 1)
    if support > ENUMERATION_GUARD:
        raise GuardError(MODULE, "collect_blocks", f"|Y|^(k+1) = {support} exceeds {ENUMERATION_GUARD}")

    codes = block_codes(symbols, k, alphabet_size)
    counts = np.bincount(codes, minlength=support)
    return EmpiricalBlockDistribution(k + 1, alphabet_size, counts, len(codes))


# ============== Series / Representation IO ==============

def write_series(series, path):
    """
    一行一个观测: 整数 (离散) 或逗号分隔的小数 (连续)，动作列用 tab 分隔
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(len(series)):
        if series.is_discrete:
            cell = str(int(series.observations[i]))
        else:
            cell = ",".join(repr(float(v)) for v in series.observations[i])
        if series.actions is not None:
            cell += f"\t{int(series.actions[i])}"
        lines.append(cell)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_series(path, seed=None, generator=""):
    path = Path(path)
    if not path.exists():
        raise ValidationError(MODULE, "read_series", f"file not found: {path}")
    observations, actions = [], []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        try:
            if "," in parts[0] or "." in parts[0] or "e" in parts[0].lower():
                observations.append([float(v) for v in parts[0].split(",")])
            else:
                observations.append(int(parts[0]))
            if len(parts) > 1:
                actions.append(int(parts[1]))
        except ValueError as e:
            raise ValidationError(MODULE, "read_series", f"{path}:{lineno}: {e}") from e
    if not observations:
        raise ValidationError(MODULE, "read_series", f"{path} contains no observations")
    kinds = {isinstance(o, list) for o in observations}
    if len(kinds) > 1:
        raise ValidationError(MODULE, "read_series", f"{path} mixes discrete and continuous observations")
    if actions and len(actions) != len(observations):
        raise ValidationError(MODULE, "read_series", f"{path}: action column present on some lines only")
    if kinds == {True} and len({len(o) for o in observations}) > 1:
        raise ValidationError(MODULE, "read_series", f"{path}: observation dimensions differ")
    return ObservationSeries(
        observations=np.array(observations),
        actions=np.array(actions) if actions else None,
        seed=seed,
        generator=generator,
    )


def representation_to_json(f):
    if isinstance(f, LookupTable):
        return {
            "variant": "lookup_table",
            "alphabet_size": int(f.alphabet_size),
            "table": f.table.tolist(),
        }
    if isinstance(f, GridQuantizer):
        return {
            "variant": "grid_quantizer",
            "alphabet_size": int(f.alphabet_size),
            "thresholds": [t.tolist() for t in f.thresholds],
            "assignment": f.assignment.ravel().tolist(),
        }
    raise ValidationError(MODULE, "representation_to_json", f"unknown representation {type(f).__name__}")


def representation_from_json(data):
    variant = data.get("variant")
    try:
        if variant == "lookup_table":
            return LookupTable(alphabet_size=int(data["alphabet_size"]), table=np.array(data["table"]))
        if variant == "grid_quantizer":
            return GridQuantizer(
                alphabet_size=int(data["alphabet_size"]),
                thresholds=tuple(np.array(t, dtype=np.float64) for t in data["thresholds"]),
                assignment=np.array(data["assignment"]),
            )
    except KeyError as e:
        raise ValidationError(MODULE, "representation_from_json", f"missing field {e}") from e
    raise ValidationError(MODULE, "representation_from_json", f"unknown variant {variant!r}")
