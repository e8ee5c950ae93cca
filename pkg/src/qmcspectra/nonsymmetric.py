"""Semi-orthogonal spectral machinery for chains without a symmetrizer.

When the Hermitian-product certificates fail, a weight family with
possibly complex nodes and non-Hermitian weights still exists, and the
polynomials are one-sidedly orthogonal against it: sum_k l_k^i W_k Q_j
vanishes for i < j.  That suffices for a row-0 spectral formula and for
recurrence classification of homogeneous chains through the fixed-point
transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain_model import QmcModel
from .polynomials import PolyFamily
from .quantum_core import Array
from .spectral import (
    CornerStieltjes,
    DiscreteWeight,
    HomogeneousStieltjes,
    StieltjesEvaluator,
    finite_spectrum_weights,
)
from .statistics import (
    Classification,
    DEFAULT_LADDER,
    classify_from_samples,
    trace_action,
)

TOL_SEMI = 1e-8


@dataclass(frozen=True)
class SemiOrthogonalSystem:
    """Discrete weight family of a finite chain plus its one-sided
    orthogonality residuals.

    ``residuals[(i, j)]`` holds || sum_k l_k^i W_k Q_j(l_k) || for i < j up
    to the top polynomial index of the chain; the contract is that these
    vanish.  ``gram(i, j, n)`` exposes the two-sided star products, which
    do not vanish in general (full orthogonality fails for these chains,
    which is exactly why the two-index spectral formula breaks down).
    """

    model: QmcModel
    weight: DiscreteWeight
    residuals: dict

    @property
    def max_index(self) -> int:
        return self.model.topology.num_sites - 1

    def poly_at_nodes(self, j: int) -> list[Array]:
        pf = PolyFamily(self.model)
        return [pf.main(p.node, max(j, 1))[j] for p in self.weight.points]

    def gram(self, i: int, j: int, n: int = 0) -> Array:
        """sum_k l_k^n Q_i*(l_k) W_k Q_j(l_k)."""
        pf = PolyFamily(self.model)
        d = self.model.block_dim
        acc = np.zeros((d, d), dtype=complex)
        for p in self.weight.points:
            qi = pf.main(p.node, max(i, 1))[i]
            qj = pf.main(p.node, max(j, 1))[j]
            acc += (p.node**n) * (qi.conj().T @ p.weight @ qj)
        return acc


def semiorth_residual_of(
    weight: DiscreteWeight, polys: PolyFamily, i: int, j: int
) -> float:
    d = weight.points[0].weight.shape[0]
    acc = np.zeros((d, d), dtype=complex)
    for p in weight.points:
        acc += (p.node**i) * (p.weight @ polys.main(p.node, max(j, 1))[j])
    return float(np.linalg.norm(acc, 2))


def nonsym_finite_weights(
    model: QmcModel, *, max_order: int | None = None
) -> SemiOrthogonalSystem:
    """Weight family of a finite chain by corner residues, complex nodes
    allowed, with the one-sided orthogonality residual table attached."""
    weight = finite_spectrum_weights(model)
    polys = PolyFamily(model)
    top = model.topology.num_sites - 1
    if max_order is not None:
        top = min(top, max_order)
    residuals = {}
    for j in range(1, top + 1):
        for i in range(0, j):
            residuals[(i, j)] = semiorth_residual_of(weight, polys, i, j)
    return SemiOrthogonalSystem(model, weight, residuals)


def semiorth_residual(system: SemiOrthogonalSystem, i: int, j: int) -> float:
    """|| sum_k l_k^i W_k Q_j(l_k) ||; below tol for i < j, unconstrained
    otherwise."""
    if (i, j) in system.residuals:
        return system.residuals[(i, j)]
    return semiorth_residual_of(system.weight, PolyFamily(system.model), i, j)


def km_row0(system: SemiOrthogonalSystem, i: int, n: int) -> Array:
    """Row-0 spectral formula: the n-step block from site i to site 0 as
    (sum_k W_k)^{-1} sum_k l_k^n W_k Q_i(l_k).

    Zero for n < i by nearest-neighbor locality; agrees with the direct
    power of the assembled chain for every n."""
    if n < 0:
        raise ValueError("step count must be nonnegative")
    if not system.model.topology.contains(i):
        raise ValueError(f"site {i} outside topology")
    d = system.model.block_dim
    polys = PolyFamily(system.model)
    acc = np.zeros((d, d), dtype=complex)
    for p in system.weight.points:
        acc += (p.node**n) * (p.weight @ polys.main(p.node, max(i, 1))[i])
    total = system.weight.total()
    return np.linalg.solve(total, acc)


def km_row0_probability(system: SemiOrthogonalSystem, i: int, n: int, rho) -> float:
    model = system.model
    block = km_row0(system, i, n)
    return trace_action(model, block, model.state_vec(rho))


def classify_recurrence_homogeneous(
    a: Array,
    b: Array,
    c: Array,
    rho,
    *,
    corner_b: Array | None = None,
    corner_a: Array | None = None,
    on_line: bool = False,
    trace_vec: Array | None = None,
    ladder=DEFAULT_LADDER,
    evaluator_kw: dict | None = None,
) -> Classification:
    """Recurrence of the origin of a homogeneous chain from its transform.

    Half-line chains use the fixed-point transform directly, optionally
    with corner blocks (corner_b at (0,0), corner_a below it) applied
    through the one-step corner identity.  Line chains use the documented
    homogeneous criterion, which composes the upward transform with itself:
    trace of X (I - A X C X)^{-1}.

    Note: for line chains whose up and down blocks do not commute, the
    documented criterion differs from the direct return series, whose
    exact value needs the downward transform in the middle slot (see the
    split identities in the folding module).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    c = np.asarray(c, dtype=complex)
    d = a.shape[0]
    if trace_vec is None:
        from .quantum_core import trace_functional

        trace_vec = trace_functional(d, "compact" if d == 3 else "full")
    rho_vec = np.asarray(rho, dtype=complex).reshape(-1)
    base = HomogeneousStieltjes(a, b, c, **(evaluator_kw or {}))
    evaluator: StieltjesEvaluator = base
    if corner_b is not None or corner_a is not None:
        evaluator = CornerStieltjes(
            base,
            corner_b if corner_b is not None else b,
            a0=corner_a if corner_a is not None else a,
            c=c,
        )
    samples = []
    prev = None
    eye = np.eye(d, dtype=complex)
    for z in ladder:
        res = base.evaluate(z, x0=prev)
        prev = res.value
        if on_line:
            x = res.value
            mid = eye - a @ x @ c @ x
            value = np.linalg.solve(mid.T, x.T).T
        elif evaluator is not base:
            value = evaluator.evaluate(z, x0=prev).value
        else:
            value = res.value
        samples.append((z, complex(trace_vec @ (value @ rho_vec)).real))
    return classify_from_samples(samples)
