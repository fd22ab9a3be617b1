"""Closed-form stability regions: CARA with estimation errors, no-CSI ALOHA, LCQ.

Everything here is a pure function of immutable inputs. Region membership is
strict (points on a frontier are outside); the optional ``tol`` argument
shrinks the region by that margin so callers can treat a band as boundary.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    ArrivalRates,
    LcqSystemParams,
    SystemParams,
    TransmitProbs,
)

SHAPE_TOL = 1e-12
LCQ_MAX_NODES = 20


class UnstableReferenceQueue(ValueError):
    """The dummy-free queue of a dominant system is not stable (lambda >= mu)."""


class AlohaAssumptionError(ValueError):
    """Delta_i <= 0, so the no-CSI ALOHA region formula does not apply."""


class LcqSizeError(ValueError):
    pass


@dataclass(frozen=True)
class PsiPair:
    psi1: float
    psi2: float


def compute_psi(params: SystemParams) -> PsiPair:
    """Interference penalty each node suffers from the other's activity."""
    n1, n2, r = params.node1, params.node2, params.reception
    psi1 = (
        n2.pi_good * n2.bar_eps_good * (r.q1_solo - r.q1_with_good)
        + n2.pi_bad * n2.eps_bad * (r.q1_solo - r.q1_with_bad)
    )
    psi2 = (
        n1.pi_good * n1.bar_eps_good * (r.q2_solo - r.q2_with_good)
        + n1.pi_bad * n1.eps_bad * (r.q2_solo - r.q2_with_bad)
    )
    return PsiPair(psi1, psi2)


class RegionShape(enum.Enum):
    NON_CONVEX = "non_convex"
    CONVEX_POLYGON = "convex_polygon"
    RIGHT_TRIANGLE = "right_triangle"


def shape_sum(params: SystemParams) -> float:
    psi = compute_psi(params)
    r = params.reception
    return psi.psi1 / r.q1_solo + psi.psi2 / r.q2_solo


def _classify(total: float, tol: float) -> RegionShape:
    if abs(total - 1.0) <= tol:
        return RegionShape.RIGHT_TRIANGLE
    return RegionShape.NON_CONVEX if total > 1.0 else RegionShape.CONVEX_POLYGON


def classify_shape(params: SystemParams, tol: float = SHAPE_TOL) -> RegionShape:
    return _classify(shape_sum(params), tol)


# -- dominant system and fixed-p region ---------------------------------------


def dominant_mu1(params: SystemParams, p: TransmitProbs) -> float:
    """Service rate of node 1 while node 2 always contends (dummy packets)."""
    psi1 = compute_psi(params).psi1
    return params.node1.good_detected * p.p1 * (params.reception.q1_solo - psi1 * p.p2)


def dominant_service_rates(params: SystemParams, p: TransmitProbs, lambda1: float) -> tuple[float, float]:
    """(mu1, mu2) in the dominant system where node 2 sends dummy packets.

    Raises UnstableReferenceQueue if lambda1 >= mu1, where mu2 is undefined.
    """
    psi = compute_psi(params)
    r = params.reception
    a1, a2 = params.node1.good_detected, params.node2.good_detected
    mu1 = a1 * p.p1 * (r.q1_solo - psi.psi1 * p.p2)
    if not lambda1 < mu1:
        raise UnstableReferenceQueue(f"lambda1={lambda1!r} >= mu1={mu1!r}")
    mu2 = _mu2(a1, a2, r.q1_solo, r.q2_solo, psi.psi1, psi.psi2, p.p2, lambda1)
    return mu1, mu2


def _mu2(a1, a2, q1, q2, s1, s2, p2, lambda1):
    # node 1 busy with probability lambda1 / mu1; p1 cancels out
    if lambda1 == 0.0:
        return a2 * p2 * q2
    return a2 * p2 * (q2 - s2 * lambda1 / (a1 * (q1 - s1 * p2)))


def empty_probability(params: SystemParams, p: TransmitProbs, lambda1: float) -> float:
    """Pr[Q1 = 0] in the dominant system with node-2 dummies."""
    mu1, _ = dominant_service_rates(params, p, lambda1)
    return 1.0 - lambda1 / mu1 if mu1 > 0 else 1.0


def _in_r2(params: SystemParams, p: TransmitProbs, l1: float, l2: float, tol: float) -> bool:
    mu1 = dominant_mu1(params, p)
    if not l1 < mu1 - tol:
        return False
    _, mu2 = dominant_service_rates(params, p, l1)
    return l2 < mu2 - tol


def fixed_p_region_contains(
    params: SystemParams, p: TransmitProbs, rates: ArrivalRates, tol: float = 0.0
) -> bool:
    """Membership in the union of the two dominant-system subregions at fixed p."""
    l1, l2 = rates.as_tuple()
    if _in_r2(params, p, l1, l2, tol):
        return True
    return _in_r2(params.swapped(), p.swapped(), l2, l1, tol)


# -- optimisation over p2 -----------------------------------------------------


class Regime(enum.Enum):
    INTERIOR = "interior"
    AT_ONE = "at_one"
    AT_ZERO = "at_zero"


@dataclass(frozen=True)
class ClampedOptimum:
    p2_star: float
    regime: Regime


def interior_range(params: SystemParams) -> tuple[float, float]:
    """lambda1 interval on which the unconstrained maximiser of mu2 lies in (0, 1)."""
    psi = compute_psi(params)
    r = params.reception
    a1 = params.node1.good_detected
    if psi.psi2 == 0.0:
        return math.inf, math.inf
    lo = a1 * r.q2_solo * (r.q1_solo - psi.psi1) ** 2 / (psi.psi2 * r.q1_solo)
    hi = a1 * r.q1_solo * r.q2_solo / psi.psi2
    return lo, hi


def curve_range(params: SystemParams) -> tuple[float, float] | None:
    """lambda1 interval on which the interior optimum also keeps node 1 stable.

    This is where the frontier follows the curve; it is empty (None) unless
    the region is non-convex.
    """
    lo, hi = interior_range(params)
    psi = compute_psi(params)
    r = params.reception
    if psi.psi2 == 0.0:
        return None
    hi = min(hi, params.node1.good_detected * psi.psi2 * r.q1_solo / r.q2_solo)
    return (lo, hi) if lo < hi else None


def optimal_p2(params: SystemParams, lambda1: float) -> ClampedOptimum:
    """Maximiser of mu2 over p2 in [0, 1], ignoring the node-1 stability constraint."""
    psi = compute_psi(params)
    r = params.reception
    a1 = params.node1.good_detected
    if psi.psi1 == 0.0 or psi.psi2 == 0.0:
        # mu2 is linear in p2
        slope = r.q2_solo - (psi.psi2 * lambda1 / (a1 * r.q1_solo) if lambda1 > 0 else 0.0)
        return ClampedOptimum(1.0, Regime.AT_ONE) if slope >= 0 else ClampedOptimum(0.0, Regime.AT_ZERO)
    lo, hi = interior_range(params)
    if lambda1 <= lo:
        return ClampedOptimum(1.0, Regime.AT_ONE)
    if lambda1 >= hi:
        return ClampedOptimum(0.0, Regime.AT_ZERO)
    root = math.sqrt(psi.psi2 * r.q1_solo * lambda1 / (a1 * r.q2_solo))
    return ClampedOptimum((r.q1_solo - root) / psi.psi1, Regime.INTERIOR)


def mu2_of_p2(params: SystemParams, p2: float, lambda1: float) -> float:
    """The objective being maximised: dominant-system mu2 as a function of p2."""
    psi = compute_psi(params)
    r = params.reception
    return _mu2(
        params.node1.good_detected, params.node2.good_detected,
        r.q1_solo, r.q2_solo, psi.psi1, psi.psi2, p2, lambda1,
    )


def best_mu2(params: SystemParams, lambda1: float) -> tuple[float, float]:
    """(p2, sup mu2) over all p with node 1 stable, taking p1 = 1.

    mu2 is concave in p2, so the constrained optimum is the unconstrained one
    clipped to the largest p2 that still keeps lambda1 below mu1.
    """
    psi = compute_psi(params)
    r = params.reception
    a1 = params.node1.good_detected
    if lambda1 >= a1 * r.q1_solo:
        return 0.0, 0.0
    p2_cap = 1.0 if psi.psi1 == 0.0 else min(1.0, (r.q1_solo - lambda1 / a1) / psi.psi1)
    p2 = min(optimal_p2(params, lambda1).p2_star, p2_cap)
    return p2, max(mu2_of_p2(params, p2, lambda1), 0.0)


# -- piecewise frontiers -------------------------------------------------------


Point = tuple[float, float]


@dataclass(frozen=True)
class BoundaryVertex:
    tag: str  # "line" or "curve"
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class RegionBoundary:
    """Frontier of a two-node region, from PY on the lambda2 axis to PX.

    Non-convex (three-segment) case: PY-P1 line, P1-P2 curve, P2-PX line.
    Convex case: PY-P3 line, P3-PX line. ``p1``/``p2`` are filled only in
    the first case and ``p3`` only in the second.
    """

    shape: RegionShape
    px: Point
    py: Point
    p1: Point | None
    p2: Point | None
    p3: Point | None
    # curve sqrt(c1 * l1) + sqrt(c2 * l2) = k
    curve_c1: float = 0.0
    curve_c2: float = 0.0
    curve_k: float = 0.0

    @property
    def three_segment(self) -> bool:
        return self.p1 is not None

    def anchors(self) -> list[Point]:
        if self.three_segment:
            return [self.py, self.p1, self.p2, self.px]
        return [self.py, self.p3, self.px]

    def curve_lambda2(self, lambda1: float) -> float:
        root = self.curve_k - math.sqrt(max(self.curve_c1 * lambda1, 0.0))
        return root * root / self.curve_c2

    def frontier(self, lambda1: float) -> float:
        """Largest lambda2 (supremum) reachable at this lambda1; 0 beyond PX."""
        if lambda1 < 0 or lambda1 >= self.px[0]:
            return 0.0
        if self.three_segment:
            if lambda1 <= self.p1[0]:
                return _interp(self.py, self.p1, lambda1)
            if lambda1 < self.p2[0]:
                return self.curve_lambda2(lambda1)
            return _interp(self.p2, self.px, lambda1)
        if lambda1 <= self.p3[0]:
            return _interp(self.py, self.p3, lambda1)
        return _interp(self.p3, self.px, lambda1)

    def contains(self, rates: ArrivalRates, tol: float = 0.0) -> bool:
        l1, l2 = rates.as_tuple()
        if l1 < 0 or l2 < 0:
            return False
        if not l1 < self.px[0] - tol:
            return False
        return l2 < self.frontier(l1) - tol

    def vertices(self, samples: int = 512) -> list[BoundaryVertex]:
        """Ordered vertices from PY to PX; curve pieces are sampled."""
        out = [BoundaryVertex("line", *self.py)]
        if self.three_segment:
            out.append(BoundaryVertex("line", *self.p1))
            x0, x1 = self.p1[0], self.p2[0]
            for x in np.linspace(x0, x1, max(samples, 2))[1:-1]:
                out.append(BoundaryVertex("curve", float(x), self.curve_lambda2(float(x))))
            out.append(BoundaryVertex("curve", *self.p2))
        else:
            out.append(BoundaryVertex("line", *self.p3))
        out.append(BoundaryVertex("line", *self.px))
        return out

    def continuity_gaps(self) -> list[float]:
        """Distance between adjacent pieces at each joint (curve joints only)."""
        if not self.three_segment:
            return []
        return [
            abs(self.curve_lambda2(self.p1[0]) - self.p1[1]),
            abs(self.curve_lambda2(self.p2[0]) - self.p2[1]),
        ]


def _interp(a: Point, b: Point, x: float) -> float:
    if b[0] == a[0]:
        return min(a[1], b[1])
    t = (x - a[0]) / (b[0] - a[0])
    return a[1] + t * (b[1] - a[1])


def _boundary(a1: float, a2: float, q1: float, q2: float, s1: float, s2: float) -> RegionBoundary:
    """Shared frontier geometry.

    ``a_i`` scales node i's solo capacity (a_i * q_i), ``s_i`` is the
    interference penalty node i suffers. CARA uses a_i = pi_i^G (1 - eps_i^G),
    s_i = Psi_i; no-CSI ALOHA uses a_i = 1, q_i = q_i^s, s_i = Delta_i.
    """
    px = (a1 * q1, 0.0)
    py = (0.0, a2 * q2)
    total = s1 / q1 + s2 / q2
    shape = _classify(total, SHAPE_TOL)
    if total >= 1.0:
        p1 = (a1 * q2 * (q1 - s1) ** 2 / (s2 * q1), a2 * s1 * q2 / q1)
        p2 = (a1 * s2 * q1 / q2, a2 * q1 * (q2 - s2) ** 2 / (s1 * q2))
        return RegionBoundary(
            shape, px, py, p1, p2, None,
            curve_c1=s2 / a1, curve_c2=s1 / a2, curve_k=math.sqrt(q1 * q2),
        )
    p3 = (a1 * (q1 - s1), a2 * (q2 - s2))
    return RegionBoundary(shape, px, py, None, None, p3)


def closure_boundary(params: SystemParams) -> RegionBoundary:
    """Frontier of the union over all p of the fixed-p CARA regions."""
    psi = compute_psi(params)
    r = params.reception
    return _boundary(
        params.node1.good_detected, params.node2.good_detected,
        r.q1_solo, r.q2_solo, psi.psi1, psi.psi2,
    )


def closure_region_contains(params: SystemParams, rates: ArrivalRates, tol: float = 0.0) -> bool:
    return closure_boundary(params).contains(rates, tol)


# -- ALOHA without CSI ---------------------------------------------------------


@dataclass(frozen=True)
class AlohaDerived:
    q1_s: float
    q1_m: float
    q2_s: float
    q2_m: float

    @property
    def delta1(self) -> float:
        return self.q1_s - self.q1_m

    @property
    def delta2(self) -> float:
        return self.q2_s - self.q2_m


def aloha_derived(params: SystemParams, check: bool = True) -> AlohaDerived:
    """Channel-averaged success probabilities seen by a node that ignores CSI.

    With ``check`` (the default) a non-positive Delta raises.
    """
    n1, n2, r = params.node1, params.node2, params.reception
    out = AlohaDerived(
        q1_s=n1.pi_good * r.q1_solo,
        q1_m=n1.pi_good * n2.pi_good * r.q1_with_good + n1.pi_good * n2.pi_bad * r.q1_with_bad,
        q2_s=n2.pi_good * r.q2_solo,
        q2_m=n1.pi_good * n2.pi_good * r.q2_with_good + n1.pi_bad * n2.pi_good * r.q2_with_bad,
    )
    if check and (out.delta1 <= 0 or out.delta2 <= 0):
        raise AlohaAssumptionError(f"Delta must be positive, got ({out.delta1!r}, {out.delta2!r})")
    return out


def aloha_boundary(params: SystemParams) -> RegionBoundary:
    d = aloha_derived(params)
    return _boundary(1.0, 1.0, d.q1_s, d.q2_s, d.delta1, d.delta2)


def aloha_region_contains(params: SystemParams, rates: ArrivalRates, tol: float = 0.0) -> bool:
    return aloha_boundary(params).contains(rates, tol)


# -- centralised LCQ -----------------------------------------------------------


def lcq_subset_constraint(params: LcqSystemParams, rates: Sequence[float], subset: Sequence[int]) -> tuple[float, float]:
    """(load, capacity) for one subset of node indices (0-based)."""
    load = sum(rates[i] / params.nodes[i].q_solo for i in subset)
    idle = math.prod(1.0 - params.nodes[i].good_detected for i in subset)
    return load, 1.0 - idle


def lcq_region_contains(params: LcqSystemParams, rates: Sequence[float], tol: float = 0.0) -> bool:
    """Check every non-empty subset of nodes; exact, so N is capped."""
    n = params.n
    if n > LCQ_MAX_NODES:
        raise LcqSizeError(f"N={n} exceeds subset enumeration cap {LCQ_MAX_NODES}")
    if len(rates) != n:
        raise ValueError(f"expected {n} rates, got {len(rates)}")
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            load, cap = lcq_subset_constraint(params, rates, subset)
            if not load < cap - tol:
                return False
    return True


def lcq_vertices(params: SystemParams | LcqSystemParams) -> list[BoundaryVertex]:
    """Vertices of the two-node LCQ polygon from the lambda2 axis to the lambda1 axis."""
    if isinstance(params, SystemParams):
        params = LcqSystemParams.from_system(params)
    if params.n != 2:
        raise ValueError("LCQ polygon export is defined for two nodes")
    (n1, n2) = params.nodes
    a1, a2 = n1.good_detected, n2.good_detected
    q1, q2 = n1.q_solo, n2.q_solo
    return [
        BoundaryVertex("line", 0.0, a2 * q2),
        BoundaryVertex("line", q1 * a1 * (1.0 - a2), a2 * q2),
        BoundaryVertex("line", a1 * q1, q2 * a2 * (1.0 - a1)),
        BoundaryVertex("line", a1 * q1, 0.0),
    ]


def cara_subset_of_lcq(params: SystemParams) -> bool:
    """Whether the CARA closure lies inside the LCQ region.

    Non-convex CARA regions always do; a convex one does iff its corner P3
    is strictly inside the LCQ pair constraint.
    """
    if classify_shape(params) is RegionShape.NON_CONVEX:
        return True
    return subset_test_value(params) > 1.0


def subset_test_value(params: SystemParams) -> float:
    psi = compute_psi(params)
    r = params.reception
    a1, a2 = params.node1.good_detected, params.node2.good_detected
    return psi.psi1 / (a2 * r.q1_solo) + psi.psi2 / (a1 * r.q2_solo)
