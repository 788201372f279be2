"""Distribution-side market: parametric value function and the bid curve.

The operating cost of serving a given net export is the optimal value of a
small LP over the aggregator blocks and network constraints. As a function
of the export parameter it is convex piecewise linear, so the curve is
recovered by sweeping the parameter, grouping sweep points that share a
marginal price (the dual of the export coupling), bracketing each price
change by bisection, and placing the kink exactly where the two segment
lines intersect.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import lp as lpmod
from .distflow import DistFlowVars, build_constraints, dispatch_cost_coeffs
from .lp import InfeasibleError
from .model import DRAG, REAG, Scenario, require_valid

EQUALITY = "equality"    # export pinned to the parameter (default)
AT_LEAST = "at-least"    # export allowed to exceed the parameter


@dataclass(frozen=True)
class Segment:
    q_lo: float
    q_hi: float
    price: float


@dataclass(frozen=True)
class BidCurve:
    """Convex piecewise-linear total cost of net export, plus marginal steps.

    ``breakpoints`` are (export MW, total cost $/h) with strictly increasing
    export; ``prices`` holds one marginal price per segment between them.
    A degenerate (single-point) feasible range has one breakpoint and no
    segments.
    """

    breakpoints: tuple[tuple[float, float], ...]
    prices: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(tuple(bp) for bp in self.breakpoints))
        object.__setattr__(self, "prices", tuple(self.prices))

    @property
    def q_min(self) -> float:
        return self.breakpoints[0][0]

    @property
    def q_max(self) -> float:
        return self.breakpoints[-1][0]

    @property
    def segments(self) -> tuple[Segment, ...]:
        return tuple(
            Segment(self.breakpoints[i][0], self.breakpoints[i + 1][0], self.prices[i])
            for i in range(len(self.prices))
        )

    def cost_at(self, q: float) -> float:
        """Piecewise-linear interpolation; q must lie within the curve domain."""
        if not (self.q_min - 1e-9 <= q <= self.q_max + 1e-9):
            raise ValueError(f"export {q} outside curve domain [{self.q_min}, {self.q_max}]")
        cost = self.breakpoints[0][1]
        for seg in self.segments:
            if q <= seg.q_lo:
                break
            cost += seg.price * (min(q, seg.q_hi) - seg.q_lo)
        return cost

    def violations(self) -> list[str]:
        out = []
        if not self.breakpoints:
            return ["curve has no breakpoints"]
        if len(self.prices) != len(self.breakpoints) - 1:
            out.append("need exactly one price per breakpoint interval")
            return out
        for i in range(1, len(self.breakpoints)):
            if self.breakpoints[i][0] <= self.breakpoints[i - 1][0]:
                out.append(f"breakpoint {i}: export values must be strictly increasing")
        for i in range(1, len(self.prices)):
            if self.prices[i] < self.prices[i - 1] - 1e-7:
                out.append(f"segment {i}: marginal prices must be nondecreasing (convexity)")
        for i, seg in enumerate(self.segments):
            dc = self.breakpoints[i + 1][1] - self.breakpoints[i][1]
            if abs(dc - seg.price * (seg.q_hi - seg.q_lo)) > 1e-4 + 1e-6 * abs(dc):
                out.append(f"segment {i}: stored cost increments disagree with the price")
        return out


@dataclass(frozen=True)
class DsoDispatch:
    """Aggregator shares and network state for one awarded net export."""

    net_export: float
    cost: float
    marginal_price: float
    by_aggregator: dict[str, float]               # MW; consumption positive for demand side
    block_dispatch: dict[str, tuple[float, ...]]
    retail_prices: dict[int, float]               # node -> $/MWh, active balance duals
    flows_p: tuple[float, ...]
    flows_q: tuple[float, ...]
    voltages_sq: tuple[float, ...]
    reactive_exchange: float


def _solve_pinned(
    scenario: Scenario, q: float, coupling: str
) -> tuple[lpmod.LpSolution, DistFlowVars, str]:
    """Solve the dispatch LP at export q; returns (solution, vars, coupling row)."""
    if coupling == EQUALITY:
        prog, dvars = build_constraints(scenario.network, scenario.aggregators, net_export=q)
        coupling_row = dvars.balance_p[scenario.network.substation]
    elif coupling == AT_LEAST:
        prog, dvars = build_constraints(scenario.network, scenario.aggregators, net_export=None)
        coupling_row = prog.add_constraint("coupling", {dvars.p_exchange: 1.0}, lpmod.GEQ, q)
    else:
        raise ValueError(f"unknown coupling mode {coupling!r}")
    prog.set_objective(dispatch_cost_coeffs(scenario.aggregators, dvars))
    sol = lpmod.solve(prog)
    return sol, dvars, coupling_row


def feasible_range(scenario: Scenario) -> tuple[float, float]:
    """Extreme feasible net exports of the network-plus-blocks polytope."""
    require_valid(scenario)
    prog, dvars = build_constraints(scenario.network, scenario.aggregators, net_export=None)
    out = []
    for sense in (1.0, -1.0):
        prog.set_objective({dvars.p_exchange: sense})
        sol = lpmod.solve(prog)
        if sol.status != lpmod.OPTIMAL:
            raise InfeasibleError(f"distribution dispatch polytope is {sol.status}")
        out.append(sol.primal[dvars.p_exchange])
    return out[0], out[1]


def value_at(scenario: Scenario, net_export: float, coupling: str = EQUALITY) -> DsoDispatch:
    """Minimum-cost aggregator dispatch serving the given net export."""
    require_valid(scenario)
    sol, dvars, coupling_row = _solve_pinned(scenario, net_export, coupling)
    if sol.status != lpmod.OPTIMAL:
        raise InfeasibleError(f"net export {net_export} MW is {sol.status} for this network")

    by_aggregator: dict[str, float] = {}
    block_dispatch: dict[str, tuple[float, ...]] = {}
    for agg in scenario.aggregators:
        if agg.kind == REAG:
            by_aggregator[agg.id] = agg.fixed_output
            block_dispatch[agg.id] = ()
            continue
        names = dvars.demand_blocks[agg.id] if agg.kind == DRAG else dvars.gen_blocks[agg.id]
        values = tuple(sol.primal[name] for name in names)
        block_dispatch[agg.id] = values
        by_aggregator[agg.id] = sum(values)

    return DsoDispatch(
        net_export=net_export,
        cost=sol.objective,
        marginal_price=sol.dual[coupling_row],
        by_aggregator=by_aggregator,
        block_dispatch=block_dispatch,
        retail_prices={
            i: sol.dual[row] for i, row in enumerate(dvars.balance_p)
        },
        flows_p=tuple(sol.primal[v] for v in dvars.p_flow),
        flows_q=tuple(sol.primal[v] for v in dvars.q_flow),
        voltages_sq=tuple(sol.primal[v] for v in dvars.voltage_sq),
        reactive_exchange=sol.primal[dvars.q_exchange],
    )


@dataclass
class _Group:
    """Probes sharing one marginal price: a witness point on the segment line."""

    price: float
    q: float
    cost: float
    span_lo: float
    span_hi: float

    def absorb(self, q: float) -> None:
        self.span_lo = min(self.span_lo, q)
        self.span_hi = max(self.span_hi, q)

    @property
    def is_point(self) -> bool:
        return self.span_hi - self.span_lo <= 0.0

    def line(self, q: float) -> float:
        return self.cost + self.price * (q - self.q)


def _probe(scenario: Scenario, q: float, coupling: str) -> tuple[float, float]:
    sol, dvars, coupling_row = _solve_pinned(scenario, q, coupling)
    if sol.status != lpmod.OPTIMAL:
        raise InfeasibleError(f"sweep point {q} MW is {sol.status}")
    return sol.objective, sol.dual[coupling_row]


def build_bid_curve(scenario: Scenario, coupling: str = EQUALITY) -> BidCurve:
    """Sweep the export parameter and assemble the convex bid curve.

    Probes sit at step midpoints (plus two just inside the range ends, so
    boundary segments are always witnessed), which keeps them off the kinks
    where the dual is set-valued. Probes landing on a kink anyway are
    detected afterwards: their witness lies on the envelope of the
    neighboring segment lines, and such groups are dropped. Each remaining
    price change is bracketed by bisection to within sweep_step/100 and the
    breakpoint placed at the intersection of the two segment lines.
    """
    require_valid(scenario)
    q_min, q_max = feasible_range(scenario)
    width = q_max - q_min
    dual_tol = max(scenario.tolerance, 1e-9)

    if width <= max(1e-12, 1e-9 * max(abs(q_min), 1.0)):
        dispatch = value_at(scenario, q_min, coupling)
        return BidCurve(breakpoints=((q_min, dispatch.cost),), prices=())

    step = min(scenario.sweep_step, width)
    refine_tol = step / 100.0
    edge = min(step, width) / 1000.0

    probe_qs = [q_min + edge]
    q = q_min + step / 2.0
    while q < q_max - edge:
        probe_qs.append(q)
        q += step
    probe_qs.append(q_max - edge)

    groups: list[_Group] = []
    for pq in probe_qs:
        cost, dual = _probe(scenario, pq, coupling)
        if groups and abs(dual - groups[-1].price) <= dual_tol:
            groups[-1].absorb(pq)
        else:
            groups.append(_Group(price=dual, q=pq, cost=cost, span_lo=pq, span_hi=pq))

    def refine(left: _Group, right: _Group) -> list[_Group]:
        """Bisect (left.span_hi, right.span_lo) for price changes; returns
        any newly discovered segments strictly between the two."""
        lo, hi = left.span_hi, right.span_lo
        while hi - lo > refine_tol:
            mid = 0.5 * (lo + hi)
            cost, dual = _probe(scenario, mid, coupling)
            if abs(dual - left.price) <= dual_tol:
                left.absorb(mid)
                lo = mid
            elif abs(dual - right.price) <= dual_tol:
                right.absorb(mid)
                hi = mid
            else:
                inner = _Group(price=dual, q=mid, cost=cost, span_lo=mid, span_hi=mid)
                return refine(left, inner) + [inner] + refine(inner, right)
        return []

    refined: list[_Group] = [groups[0]]
    for nxt in groups[1:]:
        refined.extend(refine(refined[-1], nxt))
        refined.append(nxt)

    # Drop zero-span groups whose witness sits on the neighbors' envelope:
    # that point is the kink itself, its dual an artifact of the LP basis.
    cleaned = list(refined)
    i = 1
    while i < len(cleaned) - 1:
        g = cleaned[i]
        if g.is_point:
            envelope = max(cleaned[i - 1].line(g.q), cleaned[i + 1].line(g.q))
            if abs(envelope - g.cost) <= 1e-7 * max(1.0, abs(g.cost)):
                del cleaned[i]
                continue
        i += 1

    # Fold neighbors whose duals agree to tolerance; a near-zero price gap
    # would otherwise blow up the line intersection below.
    i = 1
    while i < len(cleaned):
        if abs(cleaned[i].price - cleaned[i - 1].price) <= dual_tol:
            cleaned[i - 1].absorb(cleaned[i].span_hi)
            del cleaned[i]
            continue
        i += 1

    end_cost_lo = value_at(scenario, q_min, coupling).cost
    end_cost_hi = value_at(scenario, q_max, coupling).cost

    breakpoints = [(q_min, end_cost_lo)]
    for left, right in zip(cleaned, cleaned[1:]):
        q_star = (right.cost - right.price * right.q - left.cost + left.price * left.q) / (
            left.price - right.price
        )
        breakpoints.append((q_star, left.line(q_star)))
    breakpoints.append((q_max, end_cost_hi))

    curve = BidCurve(breakpoints=tuple(breakpoints), prices=tuple(g.price for g in cleaned))
    problems = curve.violations()
    if problems:
        raise lpmod.SolverError("assembled bid curve is inconsistent: " + "; ".join(problems))
    return curve


def marginal_curve(curve: BidCurve) -> list[tuple[float, float]]:
    """Stepwise marginal offer: (cumulative export, price) per segment.

    Each pair means "the marginal price is ``price`` for exports up to
    ``quantity``, starting where the previous step ended"; the first step
    starts at the curve's minimum export.
    """
    return [(seg.q_hi, seg.price) for seg in curve.segments]
