"""Domain types for the two-node CARA system and the N-node LCQ system.

All types are frozen dataclasses. Construction never rejects or rewrites
values; use :func:`validate` to get a report of violated invariants.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

# Bound comparisons on probabilities use this slack.
PROB_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when an operation receives parameters that fail validation."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__(report.summary())


@dataclass(frozen=True)
class NodeChannelParams:
    pi_good: float
    eps_good: float  # P[estimate bad | channel good]
    eps_bad: float  # P[estimate good | channel bad]

    @property
    def pi_bad(self) -> float:
        return 1.0 - self.pi_good

    @property
    def bar_eps_good(self) -> float:
        return 1.0 - self.eps_good

    @property
    def bar_eps_bad(self) -> float:
        return 1.0 - self.eps_bad

    @property
    def good_detected(self) -> float:
        """Probability that the channel is good and is estimated good."""
        return self.pi_good * self.bar_eps_good

    @property
    def bad_missed(self) -> float:
        """Probability that the channel is bad but is estimated good."""
        return self.pi_bad * self.eps_bad


@dataclass(frozen=True)
class ReceptionProbs2:
    """Success probabilities for the two-node MPR receiver.

    ``with_bad``/``with_good`` refer to the channel state of the *other*
    transmitter. A transmitter whose own channel is bad always fails.
    """

    q1_solo: float
    q1_with_bad: float
    q1_with_good: float
    q2_solo: float
    q2_with_bad: float
    q2_with_good: float

    def swapped(self) -> "ReceptionProbs2":
        return ReceptionProbs2(
            q1_solo=self.q2_solo,
            q1_with_bad=self.q2_with_bad,
            q1_with_good=self.q2_with_good,
            q2_solo=self.q1_solo,
            q2_with_bad=self.q1_with_bad,
            q2_with_good=self.q1_with_good,
        )


@dataclass(frozen=True)
class SystemParams:
    node1: NodeChannelParams
    node2: NodeChannelParams
    reception: ReceptionProbs2

    @property
    def nodes(self) -> tuple[NodeChannelParams, NodeChannelParams]:
        return (self.node1, self.node2)

    def swapped(self) -> "SystemParams":
        """Relabel node 1 as node 2 and vice versa."""
        return SystemParams(self.node2, self.node1, self.reception.swapped())

    def with_errors(self, eps_good: Sequence[float], eps_bad: Sequence[float]) -> "SystemParams":
        return SystemParams(
            replace(self.node1, eps_good=eps_good[0], eps_bad=eps_bad[0]),
            replace(self.node2, eps_good=eps_good[1], eps_bad=eps_bad[1]),
            self.reception,
        )

    def perfect_csi(self) -> "SystemParams":
        return self.with_errors((0.0, 0.0), (0.0, 0.0))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemParams":
        return cls(
            node1=NodeChannelParams(**_floats(data["node1"])),
            node2=NodeChannelParams(**_floats(data["node2"])),
            reception=ReceptionProbs2(**_floats(data["reception"])),
        )

    @classmethod
    def symmetric_errors(
        cls,
        pi_good: tuple[float, float],
        eps: float,
        reception: ReceptionProbs2,
    ) -> "SystemParams":
        """Both nodes, both error kinds share a single rate ``eps``."""
        return cls(
            NodeChannelParams(pi_good[0], eps, eps),
            NodeChannelParams(pi_good[1], eps, eps),
            reception,
        )


@dataclass(frozen=True)
class TransmitProbs:
    p1: float
    p2: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.p1, self.p2)

    def swapped(self) -> "TransmitProbs":
        return TransmitProbs(self.p2, self.p1)


@dataclass(frozen=True)
class ArrivalRates:
    lambda1: float
    lambda2: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.lambda1, self.lambda2)

    def swapped(self) -> "ArrivalRates":
        return ArrivalRates(self.lambda2, self.lambda1)

    def scaled(self, factor: float) -> "ArrivalRates":
        return ArrivalRates(self.lambda1 * factor, self.lambda2 * factor)


@dataclass(frozen=True)
class LcqNodeParams:
    pi_good: float
    eps_good: float
    q_solo: float

    @property
    def good_detected(self) -> float:
        return self.pi_good * (1.0 - self.eps_good)


@dataclass(frozen=True)
class LcqSystemParams:
    nodes: tuple[LcqNodeParams, ...]

    def __post_init__(self):
        # accept any sequence, store a tuple so the value stays hashable
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_system(cls, params: SystemParams) -> "LcqSystemParams":
        """Two-node LCQ view of a CARA parameter set."""
        r = params.reception
        return cls(
            (
                LcqNodeParams(params.node1.pi_good, params.node1.eps_good, r.q1_solo),
                LcqNodeParams(params.node2.pi_good, params.node2.eps_good, r.q2_solo),
            )
        )

    def to_list(self) -> list[dict[str, float]]:
        return [asdict(n) for n in self.nodes]

    @classmethod
    def from_list(cls, data: Sequence[dict[str, Any]]) -> "LcqSystemParams":
        return cls(tuple(LcqNodeParams(**_floats(d)) for d in data))


def _floats(d: dict[str, Any]) -> dict[str, float]:
    return {k: float(v) for k, v in d.items()}


@dataclass(frozen=True)
class Violation:
    field: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def fields(self) -> list[str]:
        return [v.field for v in self.violations]

    def summary(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{v.field}: {v.message}" for v in self.violations)

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise ParameterError(self)


def _check_prob(name: str, value: float, out: list[Violation]) -> None:
    if not (-PROB_TOL <= value <= 1.0 + PROB_TOL):
        out.append(Violation(name, f"{value!r} outside [0, 1]"))


def _check_order(names: Sequence[str], values: Sequence[float], strict: bool, out: list[Violation]) -> None:
    for (na, a), (nb, b) in zip(zip(names, values), zip(names[1:], values[1:])):
        bad = a <= b if strict else a < b - PROB_TOL
        if bad:
            rel = ">" if strict else ">="
            out.append(Violation(f"{na},{nb}", f"ordering {na} {rel} {nb} violated ({a!r} vs {b!r})"))


def validate(params: SystemParams | LcqSystemParams, allow_degenerate: bool = False) -> ValidationReport:
    """Check ranges and the MPR ordering; never raises."""
    out: list[Violation] = []
    if isinstance(params, LcqSystemParams):
        if params.n < 1:
            out.append(Violation("nodes", "at least one node required"))
        for i, node in enumerate(params.nodes, start=1):
            for name in ("pi_good", "eps_good", "q_solo"):
                _check_prob(f"nodes[{i}].{name}", getattr(node, name), out)
        return ValidationReport(tuple(out))

    for idx, node in ((1, params.node1), (2, params.node2)):
        for name in ("pi_good", "eps_good", "eps_bad"):
            _check_prob(f"node{idx}.{name}", getattr(node, name), out)
    r = params.reception
    for name in ("q1_solo", "q1_with_bad", "q1_with_good", "q2_solo", "q2_with_bad", "q2_with_good"):
        _check_prob(f"reception.{name}", getattr(r, name), out)
    strict = not allow_degenerate
    _check_order(("q1_solo", "q1_with_bad", "q1_with_good"), (r.q1_solo, r.q1_with_bad, r.q1_with_good), strict, out)
    _check_order(("q2_solo", "q2_with_bad", "q2_with_good"), (r.q2_solo, r.q2_with_bad, r.q2_with_good), strict, out)
    return ValidationReport(tuple(out))


def validate_rates(rates: Sequence[float]) -> ValidationReport:
    out: list[Violation] = []
    for i, lam in enumerate(rates, start=1):
        _check_prob(f"lambda{i}", lam, out)
    return ValidationReport(tuple(out))


def validate_transmit(p: TransmitProbs) -> ValidationReport:
    out: list[Violation] = []
    _check_prob("p1", p.p1, out)
    _check_prob("p2", p.p2, out)
    return ValidationReport(tuple(out))


# Parameter sets from the figure captions.

def fig1_params() -> SystemParams:
    """Non-convex example: weak MPR, all estimation errors 0.2."""
    return SystemParams.symmetric_errors((0.8, 0.7), 0.2, ReceptionProbs2(1.0, 0.2, 0.1, 0.9, 0.2, 0.1))


def fig2_params() -> SystemParams:
    """Convex example: stronger MPR, all estimation errors 0.1."""
    return SystemParams.symmetric_errors((0.8, 0.7), 0.1, ReceptionProbs2(1.0, 0.5, 0.4, 0.9, 0.5, 0.4))


def fig3_params(setting: int) -> SystemParams:
    if setting == 1:
        return SystemParams.symmetric_errors((0.8, 0.7), 0.1, ReceptionProbs2(0.9, 0.7, 0.6, 0.9, 0.7, 0.6))
    if setting == 2:
        return SystemParams.symmetric_errors((0.8, 0.7), 0.3, ReceptionProbs2(0.9, 0.4, 0.3, 0.9, 0.4, 0.3))
    raise ValueError(f"unknown setting {setting}")
