"""Folding a line chain into a half-line chain with doubled blocks.

Site n >= 0 of the folded chain carries the pair (n, -n-1) of original
sites, so every half-line tool (truncation, symmetrizers, discrete
weights, transforms) applies to line chains.  The module also derives the
upward and downward half-chains and the two coupling blocks directly from
the line model, and evaluates the spectral sum for n-step blocks on the
line through the two-sided polynomial families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain_model import (
    LINE,
    QmcModel,
    half_line,
    segment_window,
)
from .polynomials import PolyFamily
from .quantum_core import Array
from .spectral import (
    DiscreteWeight,
    HomogeneousStieltjes,
    StieltjesEvaluator,
    Symmetrizer,
    TruncatedStieltjes,
    WeightPoint,
    find_symmetrizer,
    finite_spectrum_weights,
    stieltjes_folded,
)
from .statistics import (
    Classification,
    DEFAULT_LADDER,
    classify_from_samples,
    trace_action,
)

QUADRANTS = {(1, 1): (0, 0), (1, 2): (0, 1), (2, 1): (1, 0), (2, 2): (1, 1)}


@dataclass(frozen=True)
class FoldedModel:
    """A line chain rewritten on the half-line with 2d-dimensional blocks."""

    source: QmcModel
    folded: QmcModel

    def pair(self, folded_site: int) -> tuple[int, int]:
        return folded_site, -folded_site - 1


def _diag2(top: Array, bottom: Array) -> Array:
    d = top.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = top
    out[d:, d:] = bottom
    return out


def fold_model(model: QmcModel, depth: int = 0) -> FoldedModel:
    """Fold a line chain at the origin.

    The folded hold block at 0 couples the two strands through the
    original blocks A_{-1} (upper right) and C_0 (lower left); every other
    folded block is the diagonal pair of the two strands' blocks.
    ``depth`` forces explicit overrides that far out (only needed when the
    source has overrides at |site| > 1).
    """
    if model.topology.kind != LINE:
        raise ValueError("folding needs a line model")
    from .chain_model import Block

    d = model.block_dim

    def m_block(n):  # up-move of the pair (n, -n-1): A_n and C_{-n-1}
        return _diag2(model.block(n, "A"), model.block(-n - 1, "C"))

    def g_block(n):
        return _diag2(model.block(n, "B"), model.block(-n - 1, "B"))

    def n_block(n):  # down-move of the pair: C_n and A_{-n-1}
        return _diag2(model.block(n, "C"), model.block(-n - 1, "A"))

    g0 = np.zeros((2 * d, 2 * d), dtype=complex)
    g0[:d, :d] = model.block(0, "B")
    g0[:d, d:] = model.block(-1, "A")
    g0[d:, :d] = model.block(0, "C")
    g0[d:, d:] = model.block(-1, "B")

    def homog(role: str) -> Array:
        blk = model.blocks.get(role)
        if blk is None:
            return np.zeros((d, d), dtype=complex)
        return blk.matrix

    affected = {0}
    for s in model.overrides:
        f = s if s >= 0 else -s - 1
        affected.update({max(0, f - 1), f, f + 1})
    affected.update(range(depth + 1))

    blocks = {
        "A": Block(_diag2(homog("A"), homog("C"))),
        "B": Block(_diag2(homog("B"), homog("B"))),
        "C": Block(_diag2(homog("C"), homog("A"))),
    }
    overrides = {}
    for site in sorted(affected):
        ov = {"A": Block(m_block(site)), "C": Block(n_block(site))}
        ov["B"] = Block(g0) if site == 0 else Block(g_block(site))
        overrides[site] = ov

    trace_vec = np.concatenate([model.trace_vec, model.trace_vec])
    folded = QmcModel(
        topology=half_line(),
        dim=None,
        block_dim=2 * d,
        mode="abstract",
        blocks=blocks,
        overrides=overrides,
        substochastic=model.substochastic,
        trace_vec=trace_vec,
    )
    return FoldedModel(model, folded)


def unfold_block(block: Array, quadrant: tuple[int, int]) -> Array:
    """Extract one original-lattice quadrant from a folded 2d block.

    Quadrant (a, b) of the folded block (j, i) is the original block from
    site i (b = 1) or -i-1 (b = 2) to site j (a = 1) or -j-1 (a = 2).
    """
    if quadrant not in QUADRANTS:
        raise ValueError(f"bad quadrant {quadrant!r}; use pairs from {{1,2}}^2")
    r, c = QUADRANTS[quadrant]
    d = block.shape[0] // 2
    if block.shape[0] != 2 * d:
        raise ValueError("folded blocks have even dimension")
    return block[r * d : (r + 1) * d, c * d : (c + 1) * d]


def plus_model(model: QmcModel) -> QmcModel:
    """The upward half-chain (sites 0, 1, 2, ... of a line model)."""
    if model.topology.kind != LINE:
        raise ValueError("needs a line model")
    from .chain_model import Block

    overrides = {
        s: dict(ov) for s, ov in model.overrides.items() if s >= 0
    }
    return QmcModel(
        topology=half_line(),
        dim=model.dim,
        block_dim=model.block_dim,
        mode=model.mode,
        blocks=dict(model.blocks),
        overrides=overrides,
        substochastic=True,
        trace_vec=model.trace_vec,
    )


def minus_model(model: QmcModel) -> QmcModel:
    """The downward half-chain, reindexed so original site -n-1 sits at n.

    Moving outward on this chain is the original down-move, so the roles
    of the up and down blocks swap: A'_n = C_{-n-1}, B'_n = B_{-n-1},
    C'_n = A_{-n-1}.
    """
    if model.topology.kind != LINE:
        raise ValueError("needs a line model")
    from .chain_model import Block

    overrides: dict[int, dict] = {}
    neg_sites = [s for s in model.overrides if s < 0]
    for s in neg_sites:
        n = -s - 1
        ov = {}
        src = model.overrides[s]
        if "B" in src:
            ov["B"] = src["B"]
        if "C" in src:
            ov["A"] = src["C"]
        if "A" in src:
            ov["C"] = src["A"]
        overrides[n] = ov
    blocks = {}
    if "B" in model.blocks:
        blocks["B"] = model.blocks["B"]
    if "C" in model.blocks:
        blocks["A"] = model.blocks["C"]
    if "A" in model.blocks:
        blocks["C"] = model.blocks["A"]
    return QmcModel(
        topology=half_line(),
        dim=model.dim,
        block_dim=model.block_dim,
        mode=model.mode,
        blocks=blocks,
        overrides=overrides,
        substochastic=True,
        trace_vec=model.trace_vec,
    )


def half_line_evaluators(
    model: QmcModel, *, window: int = 800
) -> tuple[StieltjesEvaluator, StieltjesEvaluator]:
    """Transform evaluators for the two half-chains of a line model.

    Homogeneous chains get the fixed-point evaluator, anything else the
    window-doubled truncation.
    """

    def make(half: QmcModel) -> StieltjesEvaluator:
        if half.homogeneous:
            return HomogeneousStieltjes(
                half.block(1, "A"), half.block(1, "B"), half.block(2, "C")
            )
        return TruncatedStieltjes(half, window=window)

    return make(plus_model(model)), make(minus_model(model))


def line_symmetrizer(model: QmcModel, n_max: int) -> Symmetrizer:
    return find_symmetrizer(model, n_max)


def folded_symmetrizer_blocks(sym: Symmetrizer, j: int) -> Array:
    """diag(pi_j, pi_{-j-1}) in the folded representation."""
    return _diag2(sym.pi[j], sym.pi[-j - 1])


def km_on_line(
    model: QmcModel,
    j: int,
    i: int,
    n: int,
    *,
    window: int | None = None,
    sym: Symmetrizer | None = None,
) -> Array:
    """n-step block (j, i) of a line chain through the spectral sum of its
    folded truncation.

    Requires the line chain to admit a symmetrizer.  The folded chain is
    truncated deep enough that every path of length n between the two
    sites is retained, the discrete weight of the truncation is computed,
    and the two-sided families are summed over all four weight quadrants.
    """
    fj = j if j >= 0 else -j - 1
    fi = i if i >= 0 else -i - 1
    if window is None:
        window = max(fj, fi) + n + 2
    if sym is None:
        sym = find_symmetrizer(model, window + 1)
    if not sym.success:
        raise ValueError(
            f"line chain is not symmetrizable (site {sym.fail_index}: {sym.reason})"
        )
    weights = folded_discrete_weight(model, window, sym=sym)
    pf = PolyFamily(model)
    d = model.block_dim
    acc = np.zeros((d, d), dtype=complex)
    lo = min(i, -i - 1, j, -j - 1) - 1
    hi = max(i, -i - 1, j, -j - 1) + 1
    for p in weights.points:
        q1 = pf.two_sided(1, p.node, lo, hi)
        q2 = pf.two_sided(2, p.node, lo, hi)
        qj = (q1[j], q2[j])
        qi = (q1[i], q2[i])
        w = p.weight
        for a in (0, 1):
            for b in (0, 1):
                wab = w[a * d : (a + 1) * d, b * d : (b + 1) * d]
                acc += (p.node**n) * (qj[a].conj().T @ wab @ qi[b])
    return np.linalg.solve(sym.pi[j], acc)


def folded_discrete_weight(
    model: QmcModel, window: int, *, sym: Symmetrizer | None = None
) -> DiscreteWeight:
    """Discrete spectral block family of a line chain's folded truncation.

    The corner residues of the folded truncation are the weights scaled by
    the inverse folded anchor diag(pi_0, pi_-1); restoring the anchor
    yields the Hermitian family whose off-diagonal quadrants are mutual
    adjoints and against which the two-sided families are orthogonal.
    """
    if sym is None:
        sym = find_symmetrizer(model, window + 1)
    folded = fold_model(model, depth=min(window, 3)).folded
    seg = segment_window(folded, 0, window)
    raw = finite_spectrum_weights(seg)
    anchor = _diag2(sym.pi[0], sym.pi[-1])
    points = tuple(
        WeightPoint(p.node, p.multiplicity, anchor @ p.weight)
        for p in raw.points
    )
    return DiscreteWeight(points)


class FoldedTransformEvaluator(StieltjesEvaluator):
    """Return-transform evaluator for site 0 or -1 of a line chain,
    assembled on demand from the two half-chain evaluators."""

    method = "folded"

    def __init__(self, model: QmcModel, site: int, *,
                 plus: StieltjesEvaluator | None = None,
                 minus: StieltjesEvaluator | None = None,
                 tolerance: float = 1e-8):
        if site not in (0, -1):
            raise ValueError("folded transforms are anchored at sites 0 and -1")
        if plus is None or minus is None:
            auto_plus, auto_minus = half_line_evaluators(model)
            plus = plus or auto_plus
            minus = minus or auto_minus
        self.model = model
        self.site = site
        self.plus = plus
        self.minus = minus
        self.tolerance = tolerance

    def evaluate(self, z: complex, x0=None) -> "EvalResult":
        from .spectral import EvalResult

        ft = stieltjes_folded(
            self.model.block(-1, "A"), self.model.block(0, "C"),
            self.plus, self.minus, z,
        )
        value = ft.p11 if self.site == 0 else ft.p22
        return EvalResult(value, ft.residual, self.method)


def folded_transform_evaluator(model: QmcModel, site: int, **kw) -> FoldedTransformEvaluator:
    return FoldedTransformEvaluator(model, site, **kw)


def classify_recurrence_on_line(
    model: QmcModel,
    site: int,
    rho,
    *,
    plus: StieltjesEvaluator | None = None,
    minus: StieltjesEvaluator | None = None,
    ladder=DEFAULT_LADDER,
) -> Classification:
    """Recurrence/transience of site 0 or -1 of a line chain.

    The return transform is assembled from the two half-chain transforms
    through the split identities (site 0 uses the upper product, site -1
    the lower one) and classified on the standard ladder.
    """
    if site not in (0, -1):
        raise ValueError("line classification is anchored at sites 0 and -1")
    if plus is None or minus is None:
        auto_plus, auto_minus = half_line_evaluators(model)
        plus = plus or auto_plus
        minus = minus or auto_minus
    a_m1 = model.block(-1, "A")
    c0 = model.block(0, "C")
    rho_vec = model.state_vec(rho)
    samples = []
    for z in ladder:
        ft = stieltjes_folded(a_m1, c0, plus, minus, z)
        block = ft.p11 if site == 0 else ft.p22
        samples.append((z, trace_action(model, block, rho_vec)))
    return classify_from_samples(samples)
