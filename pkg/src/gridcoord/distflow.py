"""Lossless linear DistFlow constraints for a radial network, as an LP fragment.

Sign conventions, applied uniformly:
  - branch flow is positive from parent toward child;
  - net export at the substation is positive when the distribution grid
    injects power into the wholesale grid (it appears as a withdrawal on the
    substation's balance);
  - nodal balances are written generation-minus-consumption = rhs, so the
    dual of an active balance is the retail price at that node.

Voltage is tracked as squared p.u. magnitude; the recursion
``u[child] = u[parent] - 2 (r * p_flow + x * q_flow) / base_mva`` is the
lossless linearization, so branch flows carry no loss term.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import lp as lpmod
from .model import DRAG, REAG, Aggregator, NetworkModel, derived_incidence


@dataclass(frozen=True)
class DistFlowVars:
    """Name maps into the LP for one distribution network's variables/rows."""

    gen_blocks: dict[str, tuple[str, ...]]     # supply aggregator id -> block vars
    demand_blocks: dict[str, tuple[str, ...]]  # demand aggregator id -> block vars
    p_flow: tuple[str, ...]                    # per branch, MW
    q_flow: tuple[str, ...]                    # per branch, MVAr
    voltage_sq: tuple[str, ...]                # per node, p.u.^2
    q_exchange: str                            # substation MVAr exchange, free
    p_exchange: str | None                     # substation MW exchange var, None if pinned
    balance_p: tuple[str, ...]                 # active balance constraint per node
    balance_q: tuple[str, ...]
    voltage_rows: tuple[str, ...]              # recursion constraint per branch

    def block_vars(self) -> list[str]:
        out = []
        for names in self.gen_blocks.values():
            out.extend(names)
        for names in self.demand_blocks.values():
            out.extend(names)
        return out


def build_constraints(
    network: NetworkModel,
    aggregators: list[Aggregator] | tuple[Aggregator, ...],
    net_export: float | None = None,
    lp: lpmod.LinearProgram | None = None,
    prefix: str = "",
) -> tuple[lpmod.LinearProgram, DistFlowVars]:
    """Emit balance, block, voltage, and flow constraints into ``lp``.

    With ``net_export`` given, the exchange is folded into the substation
    balance rhs as a parameter; the dual of that balance is then exactly the
    marginal cost of one more exported MW. With ``net_export=None`` the
    exchange becomes a free variable (used for range probing and for the
    joint wholesale+distribution problem).

    No objective is set. Raises ValueError on a non-radial network or an
    aggregator placed on an unknown node.
    """
    if lp is None:
        lp = lpmod.LinearProgram()
    inc = derived_incidence(network)  # raises on non-radial input
    n = network.n_nodes

    for agg in aggregators:
        if not (0 <= agg.node < n):
            raise ValueError(f"aggregator {agg.id!r} on unknown node {agg.node}")

    gen_blocks: dict[str, tuple[str, ...]] = {}
    demand_blocks: dict[str, tuple[str, ...]] = {}
    for agg in aggregators:
        if agg.kind == REAG:
            continue
        names = tuple(
            lp.add_variable(f"{prefix}{agg.id}[{b}]", 0.0, blk.p_max)
            for b, blk in enumerate(agg.offers.blocks)
        )
        (demand_blocks if agg.kind == DRAG else gen_blocks)[agg.id] = names

    p_flow = tuple(
        lp.add_variable(f"{prefix}pflow[{j}]", -br.pl_max, br.pl_max)
        for j, br in enumerate(network.branches)
    )
    q_flow = tuple(
        lp.add_variable(f"{prefix}qflow[{j}]", -br.ql_max, br.ql_max)
        for j, br in enumerate(network.branches)
    )
    voltage_sq = tuple(
        lp.add_variable(
            f"{prefix}usq[{i}]",
            network.u_sub if i == network.substation else network.u_min,
            network.u_sub if i == network.substation else network.u_max,
        )
        for i in range(n)
    )
    q_exchange = lp.add_variable(f"{prefix}qx", -float("inf"), float("inf"))
    p_exchange = None
    if net_export is None:
        p_exchange = lp.add_variable(f"{prefix}px", -float("inf"), float("inf"))

    # Fixed REAG output folds in as a constant nodal injection.
    reag_p = [0.0] * n
    reag_q = [0.0] * n
    for agg in aggregators:
        if agg.kind == REAG:
            reag_p[agg.node] += agg.fixed_output
            reag_q[agg.node] += agg.fixed_output * agg.tan_phi

    # Per-node balance coefficient maps: +1 gen block, -1 demand block,
    # +1 flow on the parent-side branch (inflow), -1 on child-side branches.
    p_coeffs: list[dict[str, float]] = [dict() for _ in range(n)]
    q_coeffs: list[dict[str, float]] = [dict() for _ in range(n)]
    for agg in aggregators:
        if agg.kind == REAG:
            continue
        sign = -1.0 if agg.kind == DRAG else 1.0
        names = demand_blocks[agg.id] if agg.kind == DRAG else gen_blocks[agg.id]
        for name in names:
            p_coeffs[agg.node][name] = sign
            if agg.tan_phi:
                q_coeffs[agg.node][name] = sign * agg.tan_phi
    for j in range(len(network.branches)):
        p_coeffs[inc.child[j]][p_flow[j]] = 1.0
        p_coeffs[inc.parent[j]][p_flow[j]] = -1.0
        q_coeffs[inc.child[j]][q_flow[j]] = 1.0
        q_coeffs[inc.parent[j]][q_flow[j]] = -1.0
    q_coeffs[network.substation][q_exchange] = -1.0
    if p_exchange is not None:
        p_coeffs[network.substation][p_exchange] = -1.0

    balance_p = []
    balance_q = []
    for i in range(n):
        rhs_p = network.load_p[i] - reag_p[i]
        if net_export is not None and i == network.substation:
            rhs_p += net_export
        balance_p.append(
            lp.add_constraint(f"{prefix}bal_p[{i}]", p_coeffs[i], lpmod.EQ, rhs_p)
        )
        balance_q.append(
            lp.add_constraint(
                f"{prefix}bal_q[{i}]", q_coeffs[i], lpmod.EQ, network.load_q[i] - reag_q[i]
            )
        )

    voltage_rows = []
    base = network.base_mva
    for j, br in enumerate(network.branches):
        voltage_rows.append(
            lp.add_constraint(
                f"{prefix}volt[{j}]",
                {
                    voltage_sq[inc.child[j]]: 1.0,
                    voltage_sq[inc.parent[j]]: -1.0,
                    p_flow[j]: 2.0 * br.r / base,
                    q_flow[j]: 2.0 * br.x / base,
                },
                lpmod.EQ,
                0.0,
            )
        )

    return lp, DistFlowVars(
        gen_blocks=gen_blocks,
        demand_blocks=demand_blocks,
        p_flow=p_flow,
        q_flow=q_flow,
        voltage_sq=voltage_sq,
        q_exchange=q_exchange,
        p_exchange=p_exchange,
        balance_p=tuple(balance_p),
        balance_q=tuple(balance_q),
        voltage_rows=tuple(voltage_rows),
    )


def dispatch_cost_coeffs(
    aggregators: list[Aggregator] | tuple[Aggregator, ...], vars: DistFlowVars
) -> dict[str, float]:
    """Objective terms: supply blocks at their price, demand blocks at minus theirs."""
    coeffs: dict[str, float] = {}
    for agg in aggregators:
        if agg.kind == REAG:
            continue
        if agg.kind == DRAG:
            for name, blk in zip(vars.demand_blocks[agg.id], agg.offers.blocks):
                coeffs[name] = -blk.price
        else:
            for name, blk in zip(vars.gen_blocks[agg.id], agg.offers.blocks):
                coeffs[name] = blk.price
    return coeffs
