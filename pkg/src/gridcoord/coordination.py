"""End-to-end pipeline and the joint-dispatch oracle it is checked against.

``run_coordinated`` chains bid-curve construction, wholesale clearing, and
aggregator re-dispatch at the awarded export. ``run_ideal`` solves the whole
thing as one LP (aggregators bidding straight into the wholesale balance,
network constraints included). ``check_equivalence`` runs both and compares:
objectives always; individual quantities only where the optimum is provably
unique; quantities aggregated per price level where block ties make the
split arbitrary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import lp as lpmod
from .distflow import build_constraints, dispatch_cost_coeffs
from .dso import BidCurve, DsoDispatch, build_bid_curve, value_at
from .iso import IsoOutcome, clear
from .lp import InfeasibleError, SolverError
from .model import DR, DRAG, REAG, Scenario, require_valid


@dataclass(frozen=True)
class IdealOutcome:
    """Joint dispatch of wholesale participants and aggregators (one LP)."""

    cleared: dict[str, float]             # wholesale id -> MW
    blocks: dict[str, tuple[float, ...]]
    aggregator_dispatch: dict[str, float]
    aggregator_blocks: dict[str, tuple[float, ...]]
    net_export: float                     # distribution -> wholesale exchange
    clearing_price: float
    objective: float
    retail_prices: dict[int, float]
    flows_p: tuple[float, ...]
    flows_q: tuple[float, ...]
    voltages_sq: tuple[float, ...]


@dataclass(frozen=True)
class EquivalenceRow:
    name: str
    ideal: float
    coordinated: float
    mode: str  # "strict" or "price-level"

    @property
    def deviation(self) -> float:
        return abs(self.ideal - self.coordinated)


@dataclass(frozen=True)
class EquivalenceReport:
    passed: bool
    max_deviation: float
    tolerance: float
    objective_ideal: float
    objective_coordinated: float
    rows: tuple[EquivalenceRow, ...]


@dataclass(frozen=True)
class CoordinationResult:
    bid_curve: BidCurve
    iso: IsoOutcome
    dso_dispatch: DsoDispatch
    ideal: IdealOutcome | None = None
    equivalence: EquivalenceReport | None = None


def run_coordinated(scenario: Scenario) -> CoordinationResult:
    """Bid curve -> wholesale clearing -> re-dispatch at the award."""
    require_valid(scenario)
    curve = build_bid_curve(scenario)
    outcome = clear(scenario.wholesale, [curve], scenario.firm_wholesale_load)
    award = outcome.dso_awards[0]
    dispatch = value_at(scenario, award)
    drift = abs(dispatch.cost - curve.cost_at(award))
    if drift > max(scenario.tolerance, 1e-6):
        raise SolverError(
            f"re-dispatch cost differs from the submitted curve by {drift:g} at {award} MW"
        )
    return CoordinationResult(bid_curve=curve, iso=outcome, dso_dispatch=dispatch)


def run_ideal(scenario: Scenario) -> IdealOutcome:
    """One LP: wholesale stacks, aggregator stacks, and network constraints."""
    require_valid(scenario)
    prog = lpmod.LinearProgram()
    prog, dvars = build_constraints(
        scenario.network, scenario.aggregators, net_export=None, lp=prog, prefix="dso."
    )
    objective = dispatch_cost_coeffs(scenario.aggregators, dvars)
    balance: dict[str, float] = {dvars.p_exchange: 1.0}
    for wp in scenario.wholesale:
        sign = -1.0 if wp.kind == DR else 1.0
        for b, blk in enumerate(wp.offers.blocks):
            name = prog.add_variable(f"{wp.id}[{b}]", 0.0, blk.p_max)
            balance[name] = sign
            objective[name] = sign * blk.price
    prog.add_constraint("balance", balance, lpmod.EQ, scenario.firm_wholesale_load)
    prog.set_objective(objective)

    sol = lpmod.solve(prog)
    if sol.status != lpmod.OPTIMAL:
        raise InfeasibleError(f"joint dispatch is {sol.status}")

    cleared: dict[str, float] = {}
    blocks: dict[str, tuple[float, ...]] = {}
    for wp in scenario.wholesale:
        values = tuple(sol.primal[f"{wp.id}[{b}]"] for b in range(len(wp.offers.blocks)))
        blocks[wp.id] = values
        cleared[wp.id] = sum(values)

    agg_dispatch: dict[str, float] = {}
    agg_blocks: dict[str, tuple[float, ...]] = {}
    for agg in scenario.aggregators:
        if agg.kind == REAG:
            agg_dispatch[agg.id] = agg.fixed_output
            agg_blocks[agg.id] = ()
            continue
        names = dvars.demand_blocks[agg.id] if agg.kind == DRAG else dvars.gen_blocks[agg.id]
        values = tuple(sol.primal[name] for name in names)
        agg_blocks[agg.id] = values
        agg_dispatch[agg.id] = sum(values)

    return IdealOutcome(
        cleared=cleared,
        blocks=blocks,
        aggregator_dispatch=agg_dispatch,
        aggregator_blocks=agg_blocks,
        net_export=sol.primal[dvars.p_exchange],
        clearing_price=sol.dual["balance"],
        objective=sol.objective,
        retail_prices={i: sol.dual[row] for i, row in enumerate(dvars.balance_p)},
        flows_p=tuple(sol.primal[v] for v in dvars.p_flow),
        flows_q=tuple(sol.primal[v] for v in dvars.q_flow),
        voltages_sq=tuple(sol.primal[v] for v in dvars.voltage_sq),
    )


def check_equivalence(scenario: Scenario, tolerance: float | None = None) -> CoordinationResult:
    """Run both pipelines and compare; a failed comparison is a result, not an error."""
    require_valid(scenario)
    tol = scenario.tolerance if tolerance is None else tolerance
    coordinated = run_coordinated(scenario)
    ideal = run_ideal(scenario)

    award = coordinated.iso.dso_awards[0]
    price = coordinated.iso.clearing_price
    price_tol = 1e-6 * max(1.0, abs(price))

    # A cleared quantity is unique unless several blocks sit exactly at the
    # marginal price and can trade shares without changing welfare.
    coord_marginal = []
    ideal_marginal = []
    for wp in scenario.wholesale:
        for blk in wp.offers.blocks:
            if abs(blk.price - price) <= price_tol:
                coord_marginal.append(wp.id)
                ideal_marginal.append(wp.id)
    dso_marginal = any(
        abs(seg.price - price) <= price_tol for seg in coordinated.bid_curve.segments
    )
    if dso_marginal:
        coord_marginal.append("__dso__")
    for agg in scenario.aggregators:
        for blk in agg.offers.blocks:
            if abs(blk.price - price) <= price_tol:
                ideal_marginal.append(agg.id)
    wholesale_tied = max(len(coord_marginal), len(ideal_marginal)) >= 2

    # Inside the distribution problem ties show up against the nodal prices.
    retail = coordinated.dso_dispatch.retail_prices
    agg_tied_ids = set()
    agg_marginal_count = 0
    for agg in scenario.aggregators:
        node_price = retail[agg.node]
        for blk in agg.offers.blocks:
            near_retail = abs(blk.price - node_price) <= 1e-6 * max(1.0, abs(node_price))
            near_clearing = abs(blk.price - price) <= price_tol
            if near_retail or (wholesale_tied and near_clearing):
                agg_marginal_count += 1
                agg_tied_ids.add(agg.id)
    exchange_tied = wholesale_tied and dso_marginal
    agg_tied = agg_marginal_count >= 2 or exchange_tied

    rows: list[EquivalenceRow] = [
        EquivalenceRow("objective", ideal.objective, coordinated.iso.objective, "strict")
    ]
    if not exchange_tied:
        rows.append(EquivalenceRow("dso_exchange", ideal.net_export, award, "strict"))

    ambiguous_prices: list[float] = []

    def note_ambiguous(p: float) -> None:
        if not any(abs(p - q) <= price_tol for q in ambiguous_prices):
            ambiguous_prices.append(p)

    for wp in scenario.wholesale:
        if wholesale_tied and wp.id in coord_marginal:
            for blk in wp.offers.blocks:
                if abs(blk.price - price) <= price_tol:
                    note_ambiguous(blk.price)
            continue
        rows.append(
            EquivalenceRow(
                wp.id, ideal.cleared[wp.id], coordinated.iso.cleared[wp.id], "strict"
            )
        )

    for agg in scenario.aggregators:
        if agg.kind != REAG and agg_tied and agg.id in agg_tied_ids:
            node_price = retail[agg.node]
            for blk in agg.offers.blocks:
                if abs(blk.price - node_price) <= 1e-6 * max(1.0, abs(node_price)) or (
                    wholesale_tied and abs(blk.price - price) <= price_tol
                ):
                    note_ambiguous(blk.price)
            continue
        rows.append(
            EquivalenceRow(
                agg.id,
                ideal.aggregator_dispatch[agg.id],
                coordinated.dso_dispatch.by_aggregator[agg.id],
                "strict",
            )
        )

    # Net injection per ambiguous price level is pinned by the balance even
    # when the split across same-priced blocks is not.
    for p in ambiguous_prices:
        net_ideal = 0.0
        net_coord = 0.0
        for wp in scenario.wholesale:
            sign = -1.0 if wp.kind == DR else 1.0
            for b, blk in enumerate(wp.offers.blocks):
                if abs(blk.price - p) <= price_tol:
                    net_ideal += sign * ideal.blocks[wp.id][b]
                    net_coord += sign * coordinated.iso.blocks[wp.id][b]
        for agg in scenario.aggregators:
            if agg.kind == REAG:
                continue
            sign = -1.0 if agg.kind == DRAG else 1.0
            for b, blk in enumerate(agg.offers.blocks):
                if abs(blk.price - p) <= price_tol:
                    net_ideal += sign * ideal.aggregator_blocks[agg.id][b]
                    net_coord += sign * coordinated.dso_dispatch.block_dispatch[agg.id][b]
        rows.append(EquivalenceRow(f"net@{p:g}", net_ideal, net_coord, "price-level"))

    max_dev = max(row.deviation for row in rows)
    report = EquivalenceReport(
        passed=max_dev <= tol,
        max_deviation=max_dev,
        tolerance=tol,
        objective_ideal=ideal.objective,
        objective_coordinated=coordinated.iso.objective,
        rows=tuple(rows),
    )
    return replace(coordinated, ideal=ideal, equivalence=report)
