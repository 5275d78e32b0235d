"""Weighted MAXCUT instances on a 2D lattice.

Cuts are bit strings ``s = s_0 s_1 ... s_{N-1}`` in row-major site order. The
same order fixes the computational basis of the qubit operators: the basis
index of ``s`` is its integer value with site 0 as the most significant bit.
"""

import enum
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from ._validation import ENUMERATION_CAP
from .exceptions import InstanceFormatError, InstanceValidationError, ResourceLimitError

__all__ = [
    "SignConvention",
    "LatticeGeometry",
    "MaxCutInstance",
    "payoff",
    "payoff_table",
    "brute_force_max",
    "generate_random",
    "read_instance",
    "write_instance",
    "instance_to_dict",
    "instance_from_dict",
]


class SignConvention(str, enum.Enum):
    """How the problem Hamiltonian encodes the payoff.

    ``GROUND_ENCODES_MAX`` gives every payoff maximizer the lowest energy.
    ``LITERAL`` uses the textbook ``(1 - sigma_z)/2`` form, whose
    diagonal is the payoff itself (maximizers are highest).
    """

    GROUND_ENCODES_MAX = "ground_encodes_max"
    LITERAL = "literal"


@dataclass(frozen=True)
class LatticeGeometry:
    """Rectangular lattice with unit spacing and row-major site numbering."""

    rows: int
    cols: int

    def __post_init__(self):
        for name in ("rows", "cols"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise InstanceValidationError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def n_sites(self):
        return self.rows * self.cols

    def site_index(self, x, y):
        if not (0 <= x < self.cols and 0 <= y < self.rows):
            raise InstanceValidationError(f"site ({x}, {y}) outside {self.rows}x{self.cols} lattice")
        return y * self.cols + x

    def coords(self, index):
        if not 0 <= index < self.n_sites:
            raise InstanceValidationError(f"site index {index} out of range")
        return index % self.cols, index // self.cols

    def positions(self):
        """(N, 2) integer array of (x, y) site positions."""
        idx = np.arange(self.n_sites)
        return np.stack([idx % self.cols, idx // self.cols], axis=1)

    def nearest_neighbor_pairs(self):
        pairs = []
        for y in range(self.rows):
            for x in range(self.cols):
                i = self.site_index(x, y)
                if x + 1 < self.cols:
                    pairs.append((i, self.site_index(x + 1, y)))
                if y + 1 < self.rows:
                    pairs.append((i, self.site_index(x, y + 1)))
        return pairs

    @classmethod
    def for_size(cls, n):
        """Most nearly square ``rows x cols`` lattice with ``rows <= cols``."""
        rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
        return cls(rows, n // rows)


@dataclass(frozen=True)
class MaxCutInstance:
    """Immutable weighted graph on lattice sites.

    Edges are stored once per unordered pair as ``(a, b, w)`` with ``a < b``.
    """

    geometry: LatticeGeometry
    node_weights: tuple
    edges: tuple = ()
    jw_m: int = 0
    sign_convention: SignConvention = SignConvention.GROUND_ENCODES_MAX
    _edge_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.geometry.n_sites
        weights = tuple(float(w) for w in self.node_weights)
        if len(weights) != n:
            raise InstanceValidationError(f"expected {n} node weights, got {len(weights)}")
        if not all(math.isfinite(w) for w in weights):
            raise InstanceValidationError("node weights must be finite")

        matrix = np.zeros((n, n))
        seen = {}
        for a, b, w in self.edges:
            a, b, w = int(a), int(b), float(w)
            if a == b:
                raise InstanceValidationError(f"self-edge on site {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise InstanceValidationError(f"edge ({a}, {b}) references a missing site")
            if not math.isfinite(w) or w < 0:
                raise InstanceValidationError(f"edge ({a}, {b}) weight must be finite and >= 0, got {w}")
            key = (min(a, b), max(a, b))
            if key in seen and seen[key] != w:
                raise InstanceValidationError(
                    f"edge {key} listed twice with unequal weights {seen[key]} and {w}"
                )
            seen[key] = w
        for (a, b), w in seen.items():
            matrix[a, b] = matrix[b, a] = w
        matrix.setflags(write=False)

        convention = SignConvention(self.sign_convention)
        if isinstance(self.jw_m, bool) or not isinstance(self.jw_m, (int, np.integer)):
            raise InstanceValidationError(f"jw_m must be an integer, got {self.jw_m!r}")

        object.__setattr__(self, "node_weights", weights)
        object.__setattr__(self, "edges", tuple((a, b, w) for (a, b), w in sorted(seen.items())))
        object.__setattr__(self, "jw_m", int(self.jw_m))
        object.__setattr__(self, "sign_convention", convention)
        object.__setattr__(self, "_edge_matrix", matrix)

    @property
    def n_sites(self):
        return self.geometry.n_sites

    @property
    def node_weight_array(self):
        return np.array(self.node_weights)

    @property
    def edge_matrix(self):
        """Symmetric (N, N) read-only matrix of edge weights, zero diagonal."""
        return self._edge_matrix

    @property
    def total_weight(self):
        """Sum of node weights plus unordered edge weights."""
        return sum(self.node_weights) + sum(w for _, _, w in self.edges)

    @property
    def incident_weight(self):
        """Per-site sum of incident edge weights (``W_r``)."""
        return self._edge_matrix.sum(axis=1)

    @property
    def onsite_potential(self):
        """Site potential ``v_r = w_r - W_r`` left after splitting off edges."""
        return self.node_weight_array - self.incident_weight

    def digest(self):
        """Stable SHA-256 of the canonical JSON form."""
        payload = json.dumps(instance_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def with_convention(self, convention):
        return MaxCutInstance(
            self.geometry, self.node_weights, self.edges, self.jw_m, SignConvention(convention)
        )


def _cut_bits(instance, cut):
    n = instance.n_sites
    if isinstance(cut, str):
        if any(c not in "01" for c in cut):
            raise InstanceValidationError(f"cut string {cut!r} must contain only 0/1")
        bits = np.array([int(c) for c in cut])
    else:
        bits = np.asarray(cut, dtype=int)
        if bits.ndim != 1 or np.any((bits != 0) & (bits != 1)):
            raise InstanceValidationError("cut must be a 1-D sequence of 0/1 values")
    if bits.size != n:
        raise InstanceValidationError(f"cut length {bits.size} != N={n}")
    return bits


def payoff(instance, cut):
    """Payoff ``P(s)`` of a cut given as a bit string or 0/1 sequence.

    Each unordered edge contributes its weight once when its endpoints lie
    on opposite sides of the cut.
    """
    bits = _cut_bits(instance, cut).astype(float)
    # Ordered double sum over the symmetric weight matrix.
    edge_term = bits @ instance.edge_matrix @ (1.0 - bits)
    return float(bits @ instance.node_weight_array + edge_term)


def payoff_table(instance, cap=ENUMERATION_CAP, chunk=1 << 20):
    """Payoff of every basis string, indexed by basis integer."""
    n = instance.n_sites
    if n > cap:
        raise ResourceLimitError(f"N={n} exceeds the enumeration cap of {cap}")
    dim = 1 << n
    out = np.empty(dim)
    weights = instance.node_weight_array
    shifts = n - 1 - np.arange(n)
    for start in range(0, dim, chunk):
        idx = np.arange(start, min(dim, start + chunk), dtype=np.int64)
        bits = (idx[:, None] >> shifts) & 1
        values = bits @ weights
        for a, b, w in instance.edges:
            values += w * (bits[:, a] ^ bits[:, b])
        out[start:start + idx.size] = values
    return out


def _index_to_string(index, n):
    return format(index, f"0{n}b")


def brute_force_max(instance, cap=ENUMERATION_CAP, rtol=1e-12):
    """Exact maximum payoff and the complete set of maximizing bit strings.

    Ties are resolved with a relative tolerance ``rtol`` on the payoff scale
    so that floating-point summation order cannot split a true tie.
    """
    table = payoff_table(instance, cap=cap)
    best = float(table.max())
    scale = max(1.0, abs(best))
    winners = np.flatnonzero(table >= best - rtol * scale)
    n = instance.n_sites
    return best, frozenset(_index_to_string(int(i), n) for i in winners)


def generate_random(
    geometry,
    seed=0,
    node_range=(0.0, 1.0),
    edge_range=(0.0, 1.0),
    edge_prob=1.0,
    extra_edge_prob=0.0,
    jw_m=0,
    sign_convention=SignConvention.GROUND_ENCODES_MAX,
):
    """Seeded random instance with uniform weights.

    Nearest-neighbour lattice edges are kept with probability ``edge_prob``;
    every other site pair gets an edge with probability ``extra_edge_prob``.
    """
    if not 0.0 <= edge_prob <= 1.0 or not 0.0 <= extra_edge_prob <= 1.0:
        raise InstanceValidationError("edge probabilities must lie in [0, 1]")
    lo, hi = map(float, node_range)
    elo, ehi = map(float, edge_range)
    if hi < lo or ehi < elo or elo < 0:
        raise InstanceValidationError("weight ranges must be ordered and edge weights >= 0")

    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InstanceValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    rng = np.random.default_rng(seed)
    n = geometry.n_sites
    node_weights = rng.uniform(lo, hi, size=n)
    nn = set(geometry.nearest_neighbor_pairs())
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            # One draw per pair in a fixed order keeps the stream reproducible.
            u, w = rng.random(), rng.uniform(elo, ehi)
            p = edge_prob if (a, b) in nn else extra_edge_prob
            if u < p:
                edges.append((a, b, w))
    return MaxCutInstance(geometry, tuple(node_weights), tuple(edges), jw_m, sign_convention)


# --- file IO ---------------------------------------------------------------

def instance_to_dict(instance):
    geo = instance.geometry
    return {
        "rows": geo.rows,
        "cols": geo.cols,
        "jw_m": instance.jw_m,
        "sign_convention": instance.sign_convention.value,
        "node_weights": [
            {"site": list(geo.coords(i)), "w": w} for i, w in enumerate(instance.node_weights)
        ],
        "edges": [
            {"a": list(geo.coords(a)), "b": list(geo.coords(b)), "w": w}
            for a, b, w in instance.edges
        ],
    }


def _require(obj, key, kind, where):
    if key not in obj:
        raise InstanceFormatError(where + key, "missing required field")
    value = obj[key]
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise InstanceFormatError(where + key, f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
    if kind is float and not math.isfinite(value):
        raise InstanceFormatError(where + key, "must be finite")
    return value


def _site(geometry, value, where):
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise InstanceFormatError(where, f"site must be [x, y] integers, got {value!r}")
    x, y = value
    if not (0 <= x < geometry.cols and 0 <= y < geometry.rows):
        raise InstanceFormatError(where, f"site {value} outside the lattice")
    return geometry.site_index(x, y)


def instance_from_dict(data):
    if not isinstance(data, dict):
        raise InstanceFormatError("$", "top level must be a JSON object")
    rows = _require(data, "rows", int, "")
    cols = _require(data, "cols", int, "")
    if rows < 1 or cols < 1:
        raise InstanceFormatError("rows" if rows < 1 else "cols", "must be >= 1")
    geometry = LatticeGeometry(rows, cols)
    jw_m = _require(data, "jw_m", int, "") if "jw_m" in data else 0
    convention = data.get("sign_convention", SignConvention.GROUND_ENCODES_MAX.value)
    try:
        convention = SignConvention(convention)
    except ValueError:
        raise InstanceFormatError("sign_convention", f"unknown value {convention!r}") from None

    weights = [0.0] * geometry.n_sites
    assigned = set()
    for i, item in enumerate(data.get("node_weights", [])):
        where = f"node_weights[{i}]"
        if not isinstance(item, dict):
            raise InstanceFormatError(where, "must be an object")
        site = _site(geometry, item.get("site"), where + ".site")
        if site in assigned:
            raise InstanceFormatError(where + ".site", f"site {item['site']} listed twice")
        assigned.add(site)
        weights[site] = float(_require(item, "w", float, where + "."))

    edges = []
    for i, item in enumerate(data.get("edges", [])):
        where = f"edges[{i}]"
        if not isinstance(item, dict):
            raise InstanceFormatError(where, "must be an object")
        a = _site(geometry, item.get("a"), where + ".a")
        b = _site(geometry, item.get("b"), where + ".b")
        w = float(_require(item, "w", float, where + "."))
        edges.append((a, b, w))
    # Self-edges, negative weights and asymmetric duplicates are rejected
    # by the instance constructor with an InstanceValidationError.
    return MaxCutInstance(geometry, tuple(weights), tuple(edges), jw_m, convention)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_instance(instance, path):
    atomic_write_text(path, json.dumps(instance_to_dict(instance), indent=2) + "\n")


def read_instance(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError("$", f"invalid JSON: {exc}") from None
    return instance_from_dict(data)
