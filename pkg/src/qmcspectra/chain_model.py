"""Block-tridiagonal quantum Markov chains on a segment, the half-line or
the integer line.

A model stores one superoperator triple per site: ``A_n`` moves mass from
site ``n`` to ``n+1``, ``B_n`` holds at ``n`` and ``C_n`` moves from ``n``
to ``n-1``.  Direct (truncated) linear algebra on the assembled block
matrix is the brute-force oracle against which every spectral formula in
the package is checked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .quantum_core import (
    TOL_TP,
    Array,
    KrausMap,
    as_square,
    check_tp_column,
    compact_form,
    compact_vec,
    superop_of,
    trace_functional,
    unvec,
    vec,
)

SEGMENT = "segment"
HALF_LINE = "half_line"
LINE = "line"

# Default truncation radius for infinite topologies; nearest-neighbor
# locality makes any n-step quantity at site 0 exact once the window
# radius exceeds n.
DEFAULT_WINDOW = 64


@dataclass(frozen=True)
class Topology:
    kind: str
    num_sites: int | None = None

    def __post_init__(self):
        if self.kind not in (SEGMENT, HALF_LINE, LINE):
            raise ValueError(f"unknown topology {self.kind!r}")
        if self.kind == SEGMENT:
            if self.num_sites is None or self.num_sites < 1:
                raise ValueError("segment needs num_sites >= 1")
        elif self.num_sites is not None:
            raise ValueError("num_sites only applies to segments")

    @property
    def lo(self) -> int | None:
        return None if self.kind == LINE else 0

    @property
    def hi(self) -> int | None:
        return self.num_sites - 1 if self.kind == SEGMENT else None

    def contains(self, site: int) -> bool:
        if self.lo is not None and site < self.lo:
            return False
        if self.hi is not None and site > self.hi:
            return False
        return True


def segment(num_sites: int) -> Topology:
    return Topology(SEGMENT, num_sites)


def half_line() -> Topology:
    return Topology(HALF_LINE)


def line() -> Topology:
    return Topology(LINE)


@dataclass(frozen=True)
class Block:
    """One superoperator block, optionally with its Kraus effects."""

    matrix: Array
    effects: tuple[Array, ...] | None = None

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def block_from_kraus(effects, mode: str = "full") -> Block:
    """Build a block from effect matrices in full or compact mode."""
    km = KrausMap(effects)
    if mode == "full":
        return Block(superop_of(km), km.effects)
    if mode == "compact":
        if km.dim != 2:
            raise ValueError("compact mode is restricted to 2x2 effects")
        mat = sum(compact_form(e) for e in km.effects)
        return Block(np.asarray(mat, dtype=complex), km.effects)
    raise ValueError(f"unknown mode {mode!r}")


def block_from_matrix(matrix) -> Block:
    return Block(as_square(matrix, "block"))


ROLES = ("A", "B", "C")


@dataclass(frozen=True)
class QmcModel:
    """A nearest-neighbor QMC with homogeneous blocks plus sparse overrides.

    ``blocks[role]`` is the homogeneous block (or None for zero);
    ``overrides[site][role]`` replaces it at a single site.  ``block_dim``
    is the representation dimension: N^2 in full mode, 3 in compact mode,
    arbitrary for abstract block models (e.g. folded chains).
    """

    topology: Topology
    dim: int | None
    block_dim: int
    mode: str
    blocks: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    substochastic: bool = False
    trace_vec: Array | None = None

    def __post_init__(self):
        if self.mode not in ("full", "compact", "abstract"):
            raise ValueError(f"unknown mode {self.mode!r}")
        tv = self.trace_vec
        if tv is None:
            if self.mode == "abstract":
                # no canonical trace on abstract blocks; default to the
                # all-ones functional unless the caller supplies one
                tv = np.ones(self.block_dim)
            else:
                tv = trace_functional(self.block_dim, self.mode)
        tv = np.asarray(tv, dtype=complex).reshape(-1)
        if tv.shape[0] != self.block_dim:
            raise ValueError("trace vector has wrong length")
        tv.setflags(write=False)
        object.__setattr__(self, "trace_vec", tv)
        for blk in list(self.blocks.values()) + [
            b for ov in self.overrides.values() for b in ov.values()
        ]:
            if blk is not None and blk.dim != self.block_dim:
                raise ValueError("inconsistent block dimensions")

    # -- block lookup -------------------------------------------------

    def _raw_block(self, site: int, role: str) -> Block | None:
        ov = self.overrides.get(site)
        if ov is not None and role in ov:
            return ov[role]
        return self.blocks.get(role)

    def has_block(self, site: int, role: str) -> bool:
        return self.block_object(site, role) is not None

    def block_object(self, site: int, role: str) -> Block | None:
        """The block at a site, or None when absent or clipped at an edge.

        A-transitions out of the top edge and C-transitions out of the
        bottom edge do not exist on bounded topologies.
        """
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if not self.topology.contains(site):
            return None
        if role == "A" and not self.topology.contains(site + 1):
            return None
        if role == "C" and not self.topology.contains(site - 1):
            return None
        return self._raw_block(site, role)

    def block(self, site: int, role: str) -> Array:
        blk = self.block_object(site, role)
        if blk is None:
            return np.zeros((self.block_dim, self.block_dim), dtype=complex)
        return blk.matrix

    def effects(self, site: int, role: str) -> tuple[Array, ...] | None:
        blk = self.block_object(site, role)
        return None if blk is None else blk.effects

    @property
    def homogeneous(self) -> bool:
        return not self.overrides

    # -- validation ---------------------------------------------------

    def column_defect(self, site: int) -> float:
        """Trace-preservation defect of the full column leaving a site.

        Uses the Kraus criterion ``|| sum K*K - I ||`` when every outgoing
        block carries effects, otherwise the defect of the trace
        functional under the summed superoperators.  Blocks clipped at an
        edge count as missing mass.
        """
        roles = [r for r in ROLES if self._raw_block(site, r) is not None]
        outgoing = [self.block_object(site, r) for r in roles]
        present = [b for b in outgoing if b is not None]
        if present and all(b.effects is not None for b in present):
            if not present:
                return 1.0
            _, defect = check_tp_column([b.effects for b in present])
            return defect
        total = sum(
            (b.matrix for b in present),
            np.zeros((self.block_dim, self.block_dim), dtype=complex),
        )
        t = self.trace_vec
        return float(np.linalg.norm(t @ total - t))

    def tp_report(self, probe_sites: int = 4) -> dict[int, float]:
        """Column defects for representative sites (edges plus interior)."""
        topo = self.topology
        sites: list[int] = []
        if topo.kind == SEGMENT:
            sites = list(range(topo.num_sites))
        else:
            candidates = set(self.overrides)
            candidates.update({0, 1, 2, probe_sites})
            if topo.kind == LINE:
                candidates.update({-1, -2, -probe_sites})
            sites = sorted(s for s in candidates if topo.contains(s))
        return {s: self.column_defect(s) for s in sites}

    def validate(self, tol: float = TOL_TP) -> dict[int, float]:
        report = self.tp_report()
        bad = {s: d for s, d in report.items() if d > tol}
        if bad and not self.substochastic:
            worst = max(bad.values())
            raise ValueError(
                f"columns {sorted(bad)} break trace preservation "
                f"(worst defect {worst:.3e}); set substochastic=true to allow"
            )
        return report

    # -- convenience --------------------------------------------------

    def state_vec(self, rho) -> Array:
        """Representation vector of a density block for this model."""
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 1:
            if rho.shape[0] != self.block_dim:
                raise ValueError("state vector has wrong length")
            return rho
        if self.mode == "compact":
            return compact_vec(rho)
        return vec(rho)

    def state_matrix(self, v) -> Array:
        if self.mode == "compact":
            v = np.asarray(v).reshape(-1)
            return np.array([[v[0], v[1]], [v[1], v[2]]])
        return unvec(v)

    def trace_of(self, v) -> float:
        return complex(self.trace_vec @ np.asarray(v).reshape(-1)).real


def build_model(spec: dict) -> QmcModel:
    """Build and validate a model from its dictionary form.

    See :func:`model_to_dict` for the schema.  Trace-preservation defects
    are reported; columns violating TP raise unless the model is flagged
    substochastic.
    """
    try:
        kind = spec["topology"]
        dim = spec.get("dim")
        mode = spec.get("mode", "full")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"model spec missing field: {exc}") from exc
    topo = Topology(kind, spec.get("num_sites"))
    substochastic = bool(spec.get("substochastic", False))

    def parse_block(bs) -> Block:
        if "kraus" in bs:
            return block_from_kraus([decode_matrix(k) for k in bs["kraus"]], mode)
        if "matrix" in bs:
            return block_from_matrix(decode_matrix(bs["matrix"]))
        raise ValueError("blockspec needs 'kraus' or 'matrix'")

    blocks = {}
    for role, bs in (spec.get("homogeneous") or {}).items():
        if role not in ROLES:
            raise ValueError(f"unknown block role {role!r}")
        if bs is not None:
            blocks[role] = parse_block(bs)
    overrides = {}
    for entry in spec.get("overrides") or []:
        site = int(entry["site"])
        if not topo.contains(site):
            raise ValueError(f"override site {site} outside topology")
        overrides[site] = {
            role: parse_block(entry[role]) for role in ROLES if role in entry
        }

    some = [b for b in blocks.values()] + [
        b for ov in overrides.values() for b in ov.values()
    ]
    if not some:
        raise ValueError("model defines no blocks")
    block_dim = some[0].dim
    trace_vec = None
    if mode == "full":
        n = dim if dim is not None else round(block_dim**0.5)
        if n * n != block_dim:
            raise ValueError("full-mode blocks must be N^2-dimensional")
        dim = n
    elif mode == "compact":
        if block_dim != 3:
            raise ValueError("compact-mode blocks must be 3x3")
        dim = 2
    else:  # abstract: explicit block dimension and trace functional
        if spec.get("block_dim") not in (None, block_dim):
            raise ValueError("block_dim disagrees with the supplied blocks")
        if "trace" in spec:
            trace_vec = np.array(
                [complex(e[0], e[1]) if isinstance(e, list) else complex(e)
                 for e in spec["trace"]]
            )
        dim = None

    model = QmcModel(
        topology=topo,
        dim=dim,
        block_dim=block_dim,
        mode=mode,
        blocks=blocks,
        overrides=overrides,
        substochastic=substochastic,
        trace_vec=trace_vec,
    )
    model.validate()
    return model


def decode_matrix(rows) -> Array:
    """Decode a row-major nested array whose entries are [re, im] pairs
    or bare reals."""

    def entry(e):
        if isinstance(e, (list, tuple)):
            if len(e) != 2:
                raise ValueError("complex entries are [re, im] pairs")
            return complex(e[0], e[1])
        return complex(e)

    return np.array([[entry(e) for e in row] for row in rows], dtype=complex)


def encode_matrix(m: Array) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[e.real, e.imag] for e in row] for row in m]


def model_to_dict(model: QmcModel) -> dict:
    def encode_block(b: Block | None):
        if b is None:
            return None
        if b.effects is not None:
            return {"kraus": [encode_matrix(e) for e in b.effects]}
        return {"matrix": encode_matrix(b.matrix)}

    out = {
        "topology": model.topology.kind,
        "dim": model.dim,
        "mode": model.mode,
        "substochastic": model.substochastic,
    }
    if model.topology.kind == SEGMENT:
        out["num_sites"] = model.topology.num_sites
    if model.blocks:
        out["homogeneous"] = {
            role: encode_block(b) for role, b in model.blocks.items()
        }
    if model.overrides:
        out["overrides"] = [
            {"site": s, **{r: encode_block(b) for r, b in ov.items()}}
            for s, ov in sorted(model.overrides.items())
        ]
    return out


def load_model(path) -> QmcModel:
    with open(path) as fh:
        return build_model(json.load(fh))


def load_density_matrix(path) -> Array:
    with open(path) as fh:
        data = json.load(fh)
    return decode_matrix(data["matrix"])


# ---------------------------------------------------------------------
# Truncation and dense assembly
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedOperator:
    """Dense block-tridiagonal assembly of a site window with absorbing
    boundary outside it."""

    model: QmcModel
    lo: int
    hi: int
    matrix: Array

    @property
    def num_sites(self) -> int:
        return self.hi - self.lo + 1

    def block(self, j: int, i: int) -> Array:
        d = self.model.block_dim
        jj, ii = j - self.lo, i - self.lo
        return self.matrix[jj * d : (jj + 1) * d, ii * d : (ii + 1) * d]

    def site_index(self, site: int) -> int:
        if not (self.lo <= site <= self.hi):
            raise ValueError(f"site {site} outside window [{self.lo}, {self.hi}]")
        return site - self.lo


def truncate(model: QmcModel, lo: int, hi: int) -> TruncatedOperator:
    """Assemble the dense window [lo, hi] of the block matrix."""
    topo = model.topology
    if topo.lo is not None:
        lo = max(lo, topo.lo)
    if topo.hi is not None:
        hi = min(hi, topo.hi)
    if hi < lo:
        raise ValueError("empty truncation window")
    d = model.block_dim
    S = hi - lo + 1
    out = np.zeros((S * d, S * d), dtype=complex)
    for k in range(S):
        site = lo + k
        out[k * d : (k + 1) * d, k * d : (k + 1) * d] = model.block(site, "B")
        if k + 1 < S:
            out[(k + 1) * d : (k + 2) * d, k * d : (k + 1) * d] = model.block(
                site, "A"
            )
            out[k * d : (k + 1) * d, (k + 1) * d : (k + 2) * d] = model.block(
                site + 1, "C"
            )
    return TruncatedOperator(model, lo, hi, out)


def segment_window(model: QmcModel, lo: int, hi: int) -> QmcModel:
    """A finite segment model equal to the window [lo, hi] with absorbing
    boundary, sites relabeled to 0..hi-lo."""
    trunc_blocks = {}
    for k in range(lo, hi + 1):
        ov = {}
        for role in ROLES:
            blk = model.block_object(k, role)
            if blk is not None:
                ov[role] = blk
        trunc_blocks[k - lo] = ov
    return QmcModel(
        topology=segment(hi - lo + 1),
        dim=model.dim,
        block_dim=model.block_dim,
        mode=model.mode,
        blocks={},
        overrides=trunc_blocks,
        substochastic=True,
        trace_vec=model.trace_vec,
    )


# ---------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------


class LatticeState:
    """Mass distribution over sites: one representation vector per site."""

    def __init__(self, offset: int, data: Array):
        self.offset = int(offset)
        self.data = np.asarray(data, dtype=complex)
        if self.data.ndim != 2:
            raise ValueError("state data must be (num_sites, block_dim)")

    @classmethod
    def from_density(cls, model: QmcModel, site: int, rho) -> "LatticeState":
        if not model.topology.contains(site):
            raise ValueError(f"site {site} outside topology")
        return cls(site, model.state_vec(rho)[None, :])

    @classmethod
    def from_site_vectors(cls, table: dict[int, Array]) -> "LatticeState":
        lo, hi = min(table), max(table)
        first = np.asarray(next(iter(table.values())))
        data = np.zeros((hi - lo + 1, first.shape[-1]), dtype=complex)
        for s, v in table.items():
            data[s - lo] = np.asarray(v).reshape(-1)
        return cls(lo, data)

    @property
    def sites(self) -> range:
        return range(self.offset, self.offset + self.data.shape[0])

    def site_vector(self, site: int) -> Array:
        if site in self.sites:
            return self.data[site - self.offset]
        return np.zeros(self.data.shape[1], dtype=complex)

    def items(self):
        for k, v in zip(self.sites, self.data):
            yield k, v


def _homogeneous_matrix(model: QmcModel, role: str) -> Array:
    blk = model.blocks.get(role)
    if blk is None:
        return np.zeros((model.block_dim, model.block_dim), dtype=complex)
    return blk.matrix


def evolve(model: QmcModel, state: LatticeState, n: int) -> LatticeState:
    """Apply the block recursion n times over an auto-growing window."""
    if n < 0:
        raise ValueError("step count must be nonnegative")
    out = state
    for _ in range(n):
        out = step(model, out)
    return out


def step(model: QmcModel, state: LatticeState) -> LatticeState:
    topo = model.topology
    lo = state.offset - 1
    hi = state.offset + state.data.shape[0]
    if topo.lo is not None:
        lo = max(lo, topo.lo)
    if topo.hi is not None:
        hi = min(hi, topo.hi)
    S = hi - lo + 1
    d = model.block_dim
    new = np.zeros((S, d), dtype=complex)

    old_lo = state.offset
    olds = state.data
    n_old = olds.shape[0]
    # Homogeneous sweep; override sites are patched afterwards.  Mass sent
    # past a bounded edge is dropped by the destination clip below, which
    # is exactly the absorbing-boundary semantics.
    hold = olds @ _homogeneous_matrix(model, "B").T
    up = olds @ _homogeneous_matrix(model, "A").T
    down = olds @ _homogeneous_matrix(model, "C").T
    for site, ov in model.overrides.items():
        k = site - old_lo
        if 0 <= k < n_old:
            if "B" in ov:
                hold[k] = ov["B"].matrix @ olds[k]
            if "A" in ov:
                up[k] = ov["A"].matrix @ olds[k]
            if "C" in ov:
                down[k] = ov["C"].matrix @ olds[k]

    def accumulate(contrib: Array, shift: int) -> None:
        # contrib[k] lands at site old_lo + k + shift; clip to [lo, hi]
        first = old_lo + shift
        src0 = max(0, lo - first)
        src1 = min(n_old, hi - first + 1)
        if src0 < src1:
            dst0 = first + src0 - lo
            new[dst0 : dst0 + (src1 - src0)] += contrib[src0:src1]

    accumulate(hold, 0)
    accumulate(up, 1)
    accumulate(down, -1)
    return LatticeState(lo, new)


def total_trace(model: QmcModel, state: LatticeState) -> float:
    return float((state.data @ model.trace_vec).sum().real)


def site_prob(model: QmcModel, i: int, j: int, rho, n: int) -> float:
    """Probability of finding the walker at site j after n steps from a
    density concentrated at site i."""
    if not model.topology.contains(i) or not model.topology.contains(j):
        raise ValueError("site outside topology")
    state = evolve(model, LatticeState.from_density(model, i, rho), n)
    return model.trace_of(state.site_vector(j))


def site_prob_series(model: QmcModel, i: int, j: int, rho, n_max: int) -> Array:
    """p_{ji}(n) for n = 0..n_max in one sweep."""
    state = LatticeState.from_density(model, i, rho)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = model.trace_of(state.site_vector(j))
        if n < n_max:
            state = step(model, state)
    return out


# ---------------------------------------------------------------------
# Resolvent / generating-function blocks on truncations
# ---------------------------------------------------------------------


def default_window(n_steps: int = 0) -> int:
    return max(n_steps + 2, DEFAULT_WINDOW)


def _window_bounds(model: QmcModel, window: int) -> tuple[int, int]:
    topo = model.topology
    lo = -window if topo.kind == LINE else 0
    hi = window
    if topo.hi is not None:
        hi = min(hi, topo.hi)
    return lo, hi


def _banded_one_minus_s_phi(model: QmcModel, lo: int, hi: int, s: complex) -> Array:
    """Banded storage (scipy solve_banded layout) of I - s Phi on a window."""
    d = model.block_dim
    S = hi - lo + 1
    n = S * d
    bw = 2 * d - 1
    ab = np.zeros((2 * bw + 1, n), dtype=complex)

    def fill(role: str, t: int, first_block: int, last_block: int):
        # block at rows (k + t), cols k for k in [first_block, last_block]
        if last_block < first_block:
            return
        base = _homogeneous_matrix(model, role)
        for il in range(d):
            for jl in range(d):
                row = bw + t * d + il - jl
                cols = slice(first_block * d + jl, last_block * d + jl + 1, d)
                val = -s * base[il, jl]
                if t == 0 and il == jl:
                    val = val + 1.0
                ab[row, cols] = val
        for site, ov in model.overrides.items():
            k = site - lo
            if first_block <= k <= last_block and role in ov:
                blk = ov[role].matrix
                for il in range(d):
                    for jl in range(d):
                        row = bw + t * d + il - jl
                        val = -s * blk[il, jl]
                        if t == 0 and il == jl:
                            val = val + 1.0
                        ab[row, k * d + jl] = val

    fill("B", 0, 0, S - 1)
    fill("A", 1, 0, S - 2)
    # the C block sits at rows (k-1), cols k; in source-site indexing the
    # block of column k is C_{lo+k}
    if S >= 2:
        base = _homogeneous_matrix(model, "C")
        for il in range(d):
            for jl in range(d):
                row = bw - d + il - jl
                cols = slice(d + jl, (S - 1) * d + jl + 1, d)
                ab[row, cols] = -s * base[il, jl]
        for site, ov in model.overrides.items():
            k = site - lo
            if 1 <= k <= S - 1 and "C" in ov:
                blk = ov["C"].matrix
                for il in range(d):
                    for jl in range(d):
                        ab[bw - d + il - jl, k * d + jl] = -s * blk[il, jl]
    return ab


def resolvent_block(
    model: QmcModel,
    j: int,
    i: int,
    s: complex,
    window: int = DEFAULT_WINDOW,
) -> Array:
    """Block (j, i) of (I - s Phi)^(-1) on the truncated window.

    This is the generating function of the n-step blocks from i to j.
    The window must exceed the mixing depth at the evaluation point for
    the value to represent the untruncated chain; see
    resolvent_block_adaptive for an automated choice.
    """
    lo, hi = _window_bounds(model, window)
    if not (lo <= i <= hi and lo <= j <= hi):
        raise ValueError("requested sites outside truncation window")
    d = model.block_dim
    S = hi - lo + 1
    bw = 2 * d - 1
    ab = _banded_one_minus_s_phi(model, lo, hi, s)
    rhs = np.zeros((S * d, d), dtype=complex)
    ii = i - lo
    rhs[ii * d : (ii + 1) * d] = np.eye(d)
    try:
        sol = scipy.linalg.solve_banded((bw, bw), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError(
            f"singular resolvent solve at s={s} on window [{lo}, {hi}]"
        ) from exc
    jj = j - lo
    return sol[jj * d : (jj + 1) * d]


def resolvent_block_adaptive(
    model: QmcModel,
    j: int,
    i: int,
    s: complex,
    *,
    window: int = DEFAULT_WINDOW,
    tol: float = 1e-9,
    max_window: int = 1 << 20,
) -> Array:
    """Window-doubled resolvent block, grown until the value stabilizes."""
    prev = resolvent_block(model, j, i, s, window)
    while window < max_window:
        window *= 2
        cur = resolvent_block(model, j, i, s, window)
        if np.linalg.norm(cur - prev, 2) <= tol * max(1.0, np.linalg.norm(cur, 2)):
            return cur
        prev = cur
    return prev


def corner_resolvent(model: QmcModel, z: complex, depth: int) -> Array:
    """Corner block ((z I - Phi)^(-1))_{00} of the depth-site truncation.

    Evaluated by backward Schur elimination from the far end, which is
    exact for the truncated operator and costs O(depth) small solves.
    Only defined for half-line or segment topologies.
    """
    if model.topology.kind == LINE:
        raise ValueError("corner resolvent needs a bounded-from-below chain")
    hi = depth - 1
    if model.topology.hi is not None:
        hi = min(hi, model.topology.hi)
    d = model.block_dim
    eye = np.eye(d, dtype=complex)
    Y = np.linalg.solve(z * eye - model.block(hi, "B"), eye)
    for k in range(hi - 1, -1, -1):
        m = z * eye - model.block(k, "B") - model.block(k + 1, "C") @ Y @ model.block(k, "A")
        Y = np.linalg.solve(m, eye)
    return Y
