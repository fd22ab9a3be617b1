"""Slotted-time Monte Carlo simulation of the two-node CARA system and LCQ.

Randomness is split into independent streams keyed by (seed, purpose, node).
Each stream is a Philox counter-based generator consumed in slot order, so
the uniform used by a given (purpose, node, slot) never depends on anything
else in the configuration. Two configs that differ only in arrival rates
therefore see identical channels, estimates and coin flips, which is what
the dominance coupling needs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernel as K
from .model import LcqSystemParams, SystemParams, TransmitProbs, validate, validate_rates

CHUNK = 1 << 16


class PolicyKind(str, enum.Enum):
    CARA = "cara"
    CARA_DOMINANT = "cara_dominant"
    ALOHA = "aloha"
    LCQ = "lcq"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    dominant_node: int | None = None  # 1-based, CARA_DOMINANT only

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.CARA_DOMINANT and self.dominant_node not in (1, 2):
            raise ValueError("dominant CARA needs dominant_node 1 or 2")
        if self.kind is not PolicyKind.CARA_DOMINANT and self.dominant_node is not None:
            raise ValueError("dominant_node only applies to cara_dominant")

    @classmethod
    def parse(cls, text: str) -> "Policy":
        """'cara', 'aloha', 'lcq' or 'cara_dominant:<node>'."""
        name, _, node = text.partition(":")
        if name == PolicyKind.CARA_DOMINANT.value:
            return cls(PolicyKind.CARA_DOMINANT, int(node or 2))
        return cls(PolicyKind(name))

    def __str__(self) -> str:
        if self.kind is PolicyKind.CARA_DOMINANT:
            return f"{self.kind.value}:{self.dominant_node}"
        return self.kind.value


class ChannelMode(str, enum.Enum):
    IID = "iid"
    MARKOV = "markov"


@dataclass(frozen=True)
class ChannelProcessSpec:
    """Stationary channel law; pi_good comes from the system parameters.

    In Markov mode each slot keeps the previous state with probability
    ``persistence`` and otherwise redraws from the stationary law, so the
    transition matrix has the right stationary distribution for any
    persistence in [0, 1). Persistence 0 is the i.i.d. process.
    """

    mode: ChannelMode = ChannelMode.IID
    persistence: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", ChannelMode(self.mode))
        object.__setattr__(self, "persistence", tuple(float(x) for x in self.persistence))
        for rho in self.persistence:
            if not 0.0 <= rho < 1.0:
                raise ValueError(f"persistence {rho!r} outside [0, 1)")

    def rho(self, n: int) -> np.ndarray:
        if self.mode is ChannelMode.IID or not self.persistence:
            return np.zeros(n)
        if len(self.persistence) == 1:
            return np.full(n, self.persistence[0])
        if len(self.persistence) != n:
            raise ValueError(f"need {n} persistence values, got {len(self.persistence)}")
        return np.asarray(self.persistence, dtype=float)

    @staticmethod
    def transition_matrix(pi_good: float, persistence: float) -> np.ndarray:
        """Rows/cols ordered (good, bad)."""
        g = persistence + (1 - persistence) * pi_good
        b = (1 - persistence) * pi_good
        return np.array([[g, 1 - g], [b, 1 - b]])


class Verdict(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Thresholds:
    slope_tol: float = 1e-4
    empty_min: float = 0.01


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams | LcqSystemParams
    policy: Policy
    rates: tuple[float, ...]
    p: TransmitProbs = TransmitProbs(1.0, 1.0)
    channel: ChannelProcessSpec = ChannelProcessSpec()
    horizon: int = 100_000
    seed: int = 0
    warmup: int | None = None  # default: 1% of horizon
    queue_cap: int = 1_000_000
    trace_slots: int = 0
    batches: int = 50
    thresholds: Thresholds = Thresholds()

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))

    @property
    def n_nodes(self) -> int:
        return self.params.n if isinstance(self.params, LcqSystemParams) else 2

    @property
    def warmup_slots(self) -> int:
        return self.horizon // 100 if self.warmup is None else self.warmup

    def check(self) -> None:
        problems = []
        if self.horizon <= self.warmup_slots or self.warmup_slots < 0:
            problems.append(f"need horizon > warmup >= 0 (horizon={self.horizon}, warmup={self.warmup_slots})")
        if self.batches < 2 or self.horizon - self.warmup_slots < self.batches:
            problems.append("batches must be >= 2 and fit in the post-warmup window")
        if len(self.rates) != self.n_nodes:
            problems.append(f"expected {self.n_nodes} rates, got {len(self.rates)}")
        rep = validate_rates(self.rates)
        problems += [f"{v.field}: {v.message}" for v in rep.violations]
        if self.policy.kind is PolicyKind.LCQ:
            if not isinstance(self.params, (LcqSystemParams, SystemParams)):
                problems.append("LCQ needs LCQ parameters")
        elif not isinstance(self.params, SystemParams):
            problems.append(f"policy {self.policy} needs two-node SystemParams")
        if isinstance(self.params, SystemParams):
            rep = validate(self.params, allow_degenerate=True)
            problems += [f"{v.field}: {v.message}" for v in rep.violations]
            for name in ("p1", "p2"):
                v = getattr(self.p, name)
                if not 0.0 <= v <= 1.0:
                    problems.append(f"{name}={v!r} outside [0, 1]")
        if problems:
            raise ValueError("invalid SimConfig: " + "; ".join(problems))


@dataclass
class NodeStats:
    arrival_rate: float
    departure_rate: float  # real packets only
    service_rate: float  # slots where an attempt would have succeeded
    service_rate_stderr: float
    empty_fraction: float
    mean_queue: float
    queue_slope: float
    final_queue: int
    arrivals_total: int
    departures_total: int
    good_fraction: float
    eps_good_hat: float
    eps_bad_hat: float
    verdict: Verdict = Verdict.INCONCLUSIVE


@dataclass
class SlotTrace:
    chan_good: np.ndarray  # (slots, N) bool
    est_good: np.ndarray
    transmit: np.ndarray
    success: np.ndarray
    queue: np.ndarray  # queue length at the start of each slot


@dataclass
class SimStats:
    nodes: list[NodeStats]
    slots_run: int
    post_slots: int
    cap_hit: bool
    verdict: Verdict
    trace: SlotTrace | None = field(default=None, repr=False)


def stability_verdict(
    queue_slope: float, empty_fraction: float, cap_hit: bool = False, thresholds: Thresholds = Thresholds()
) -> Verdict:
    """Finite-horizon reading of a single queue's trajectory."""
    if cap_hit or queue_slope > thresholds.slope_tol:
        return Verdict.UNSTABLE
    if queue_slope < -thresholds.slope_tol:
        return Verdict.STABLE
    if empty_fraction > thresholds.empty_min:
        return Verdict.STABLE
    return Verdict.INCONCLUSIVE


def combine_verdicts(verdicts: Sequence[Verdict]) -> Verdict:
    if any(v is Verdict.UNSTABLE for v in verdicts):
        return Verdict.UNSTABLE
    if all(v is Verdict.STABLE for v in verdicts):
        return Verdict.STABLE
    return Verdict.INCONCLUSIVE


# -- streams -------------------------------------------------------------------

PURPOSES = ("arrival", "channel", "estimate", "coin", "reception", "tiebreak")


def _stream(seed: int, purpose: str, node: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(PURPOSES.index(purpose), node))
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


class _Streams:
    def __init__(self, seed: int, n: int):
        self.n = n
        self.gens = {
            purpose: [_stream(seed, purpose, i) for i in range(n if purpose != "tiebreak" else 1)]
            for purpose in PURPOSES
        }

    def draw(self, purpose: str, count: int) -> np.ndarray:
        return np.stack([g.random(count) for g in self.gens[purpose]])


# -- engine --------------------------------------------------------------------


def _arrays(cfg: SimConfig):
    n = cfg.n_nodes
    params = cfg.params
    if isinstance(params, LcqSystemParams):
        pi = np.array([x.pi_good for x in params.nodes])
        eps_g = np.array([x.eps_good for x in params.nodes])
        eps_b = np.zeros(n)
        q_solo = np.array([x.q_solo for x in params.nodes])
        q_bad = q_good = np.zeros(n)
    else:
        r = params.reception
        pi = np.array([params.node1.pi_good, params.node2.pi_good])
        eps_g = np.array([params.node1.eps_good, params.node2.eps_good])
        eps_b = np.array([params.node1.eps_bad, params.node2.eps_bad])
        q_solo = np.array([r.q1_solo, r.q2_solo])
        q_bad = np.array([r.q1_with_bad, r.q2_with_bad])
        q_good = np.array([r.q1_with_good, r.q2_with_good])
    p = np.array(cfg.p.as_tuple() if n == 2 else [1.0] * n)
    return p, np.array(cfg.rates), pi, cfg.channel.rho(n), eps_g, eps_b, q_solo, q_bad, q_good


_POLICY_CODE = {
    PolicyKind.CARA: K.CARA,
    PolicyKind.CARA_DOMINANT: K.CARA,
    PolicyKind.ALOHA: K.ALOHA,
    PolicyKind.LCQ: K.LCQ,
}


class Simulator:
    """Stateful slot engine; :func:`run` drives it to the horizon."""

    def __init__(self, cfg: SimConfig):
        cfg.check()
        self.cfg = cfg
        n = cfg.n_nodes
        self.n = n
        self.streams = _Streams(cfg.seed, n)
        self.consts = _arrays(cfg)
        self.policy_code = _POLICY_CODE[cfg.policy.kind]
        self.dominant = cfg.policy.dominant_node - 1 if cfg.policy.dominant_node else -1
        self.warmup = cfg.warmup_slots
        self.post_len = cfg.horizon - self.warmup
        self.mid = (self.post_len - 1) / 2.0
        self.queue = np.zeros(n, np.int64)
        self.chan = np.zeros(n, np.bool_)
        self.acc_i = np.zeros((n, K.N_INT), np.int64)
        self.acc_f = np.zeros((n, K.N_FLOAT), np.float64)
        self.batch_opp = np.zeros((n, cfg.batches), np.int64)
        self.slot = 0
        self.cap_hit = False
        self.trace: SlotTrace | None = None
        if cfg.trace_slots > 0:
            self.trace = _empty_trace(min(cfg.trace_slots, cfg.horizon), n)

    @property
    def done(self) -> bool:
        return self.cap_hit or self.slot >= self.cfg.horizon

    def step(self, count: int = CHUNK, trace: SlotTrace | None = None, trace_start: int = 0) -> int:
        """Run up to ``count`` slots; returns how many actually ran."""
        count = min(count, self.cfg.horizon - self.slot)
        if count <= 0 or self.cap_hit:
            return 0
        s = self.streams
        u = [s.draw(purpose, count) for purpose in PURPOSES]
        tr = trace if trace is not None else self.trace
        if tr is None:
            tr, tr_start, tr_len = _DUMMY_TRACE, 0, 0
        elif trace is None:
            tr_start, tr_len = 0, tr.queue.shape[0]
        else:
            tr_len = tr.queue.shape[0]
            tr_start = trace_start
        ran = K.run_chunk(
            self.slot, count, self.warmup, self.post_len, self.mid,
            self.policy_code, self.dominant,
            *self.consts,
            u[0], u[1], u[2], u[3], u[4], u[5][0],
            self.queue, self.chan, self.acc_i, self.acc_f, self.batch_opp, self.cfg.batches,
            self.cfg.queue_cap,
            tr.chan_good, tr.est_good, tr.transmit, tr.success, tr.queue, tr_start, tr_len,
        )
        self.slot += ran
        if ran < count:
            self.cap_hit = True
        return ran

    def stats(self) -> SimStats:
        cfg = self.cfg
        post = max(self.slot - self.warmup, 0)
        nodes = []
        for i in range(self.n):
            a = self.acc_i[i]
            f = self.acc_f[i]
            rates = self.batch_opp[i] / (self.post_len / cfg.batches)
            se = float(np.std(rates, ddof=1) / math.sqrt(cfg.batches))
            if post > 1:
                mean_q = f[K.F_SUM_Q] / post
                # least squares with t centred on the window midpoint
                mid = (post - 1) / 2.0
                shift = self.mid - mid
                sum_tq = f[K.F_SUM_TQ] + shift * f[K.F_SUM_Q]
                sxx = post * (post * post - 1) / 12.0
                slope = sum_tq / sxx
            else:
                mean_q, slope = float(self.queue[i]), 0.0
            good, bad = a[K.I_POST_GOOD], a[K.I_POST_BAD]
            ns = NodeStats(
                arrival_rate=float(a[K.I_POST_ARRIVALS] / post if post else 0.0),
                departure_rate=float(a[K.I_POST_DEPARTURES] / post if post else 0.0),
                service_rate=float(a[K.I_POST_OPPORTUNITIES] / post if post else 0.0),
                service_rate_stderr=se,
                empty_fraction=float(a[K.I_POST_EMPTY] / post if post else 0.0),
                mean_queue=float(mean_q),
                queue_slope=float(slope),
                final_queue=int(self.queue[i]),
                arrivals_total=int(a[K.I_ARRIVALS]),
                departures_total=int(a[K.I_DEPARTURES]),
                good_fraction=float(good / post if post else 0.0),
                eps_good_hat=float(a[K.I_POST_EST_FLIP_G] / good if good else 0.0),
                eps_bad_hat=float(a[K.I_POST_EST_FLIP_B] / bad if bad else 0.0),
            )
            ns.verdict = stability_verdict(ns.queue_slope, ns.empty_fraction, self.cap_hit, cfg.thresholds)
            nodes.append(ns)
        trace = self.trace
        if trace is not None and self.slot < trace.queue.shape[0]:
            trace = _slice_trace(trace, self.slot)
        return SimStats(
            nodes=nodes,
            slots_run=self.slot,
            post_slots=post,
            cap_hit=self.cap_hit,
            verdict=combine_verdicts([x.verdict for x in nodes]),
            trace=trace,
        )


def _empty_trace(slots: int, n: int) -> SlotTrace:
    return SlotTrace(
        chan_good=np.zeros((slots, n), np.bool_),
        est_good=np.zeros((slots, n), np.bool_),
        transmit=np.zeros((slots, n), np.bool_),
        success=np.zeros((slots, n), np.bool_),
        queue=np.zeros((slots, n), np.int64),
    )


def _slice_trace(tr: SlotTrace, slots: int) -> SlotTrace:
    return SlotTrace(tr.chan_good[:slots], tr.est_good[:slots], tr.transmit[:slots], tr.success[:slots], tr.queue[:slots])


_DUMMY_TRACE = _empty_trace(1, 1)


def run(cfg: SimConfig) -> SimStats:
    sim = Simulator(cfg)
    while not sim.done:
        sim.step()
    return sim.stats()


# -- dominance coupling --------------------------------------------------------


@dataclass
class DominanceReport:
    holds: bool
    slots_checked: int
    first_violation: tuple[int, int] | None  # (slot, 1-based node)
    identical: bool  # trajectories equal at every slot


def run_coupled_dominance(original: SimConfig, dominant: SimConfig) -> DominanceReport:
    """Run both systems on shared randomness and compare queues slot by slot.

    Both configs must be identical apart from the policy (CARA vs dominant
    CARA). The seed may differ only to build a deliberately decoupled
    negative control.
    """
    if original.policy.kind is not PolicyKind.CARA or dominant.policy.kind is not PolicyKind.CARA_DOMINANT:
        raise ValueError("expected (cara, cara_dominant) policies")
    if replace(original, policy=dominant.policy, seed=dominant.seed) != dominant:
        raise ValueError("configs differ in more than the policy and seed")
    a, b = Simulator(original), Simulator(dominant)
    first = None
    identical = True
    while not (a.done or b.done):
        start = a.slot
        ta = _empty_trace(min(CHUNK, original.horizon - start), a.n)
        tb = _empty_trace(ta.queue.shape[0], b.n)
        ran_a = a.step(CHUNK, ta, start)
        ran_b = b.step(CHUNK, tb, start)
        ran = min(ran_a, ran_b)
        qa, qb = ta.queue[:ran], tb.queue[:ran]
        if identical and not np.array_equal(qa, qb):
            identical = False
        bad = np.argwhere(qb < qa)
        if first is None and bad.size:
            first = (start + int(bad[0, 0]), int(bad[0, 1]) + 1)
    return DominanceReport(first is None, min(a.slot, b.slot), first, identical)
