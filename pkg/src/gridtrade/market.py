"""Double-auction order book and market clearing mechanisms.

A market instance is one time slot: agents submit signed-price quotations
(price >= 0 buys, price < 0 sells), the operator partitions and sorts the
book, and one of four clearing mechanisms produces a trade ledger. All
functions here are pure; the book does not persist across hours.

Mechanisms:

* ``clear_jpq``    -- joint price-quantity round-robin matching steered by
  the ternary market factor, mid-point pricing (the primary mechanism).
* ``clear_greedy`` -- classic price-priority sequential double auction.
* ``clear_mrda``   -- multi-round double auction with price concessions.
* ``clear_vvda``   -- Vickrey-variant (McAfee breakeven-index) auction; the
  only mechanism allowed a non-zero operator account.
"""

from __future__ import annotations

import io
import json
import csv as _csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CrossViolation, NegativeQuantity, PriceOutOfEnvelope
from .money import from_micro, to_micro


@dataclass(frozen=True)
class PriceEnvelope:
    """Main-grid price signals for one hour: feed_in <= day_ahead <= emergency."""

    feed_in: float
    day_ahead: float
    emergency: float

    def __post_init__(self):
        if not (0.0 <= self.feed_in <= self.day_ahead <= self.emergency):
            raise ValueError(
                f"price envelope must satisfy 0 <= feed_in <= day_ahead <= emergency, "
                f"got ({self.feed_in}, {self.day_ahead}, {self.emergency})"
            )


@dataclass(frozen=True)
class Quotation:
    """One agent's bid for the current hour.

    The trading role is encoded in the price sign: price >= 0 is a buy bid,
    price < 0 is a sell offer at ask |price|. quantity is always the
    unsigned energy amount in kWh.
    """

    agent_id: int
    price: float
    quantity: float

    @property
    def is_buyer(self) -> bool:
        return self.price >= 0

    @property
    def ask(self) -> float:
        """Unsigned price magnitude."""
        return abs(self.price)


@dataclass(frozen=True)
class MarketFactor:
    """Ternary system-imbalance signal: -1 surplus, 0 balanced, +1 deficit."""

    value: int

    def __post_init__(self):
        if self.value not in (-1, 0, 1):
            raise ValueError(f"market factor must be in {{-1, 0, 1}}, got {self.value}")


SURPLUS = MarketFactor(-1)
BALANCED = MarketFactor(0)
DEFICIT = MarketFactor(1)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    error: Exception | None = None


@dataclass(frozen=True)
class Trade:
    """One executed buyer/seller match.

    ``bid`` and ``ask`` are the effective prices at which the match formed
    (submitted prices, except MRDA where they are the conceded round
    prices). ``buyer_price`` is what the buyer pays per kWh and
    ``seller_price`` what the seller receives; they differ only under VVDA.
    """

    buyer_id: int
    seller_id: int
    quantity: float
    buyer_price: float
    seller_price: float
    bid: float
    ask: float

    @property
    def payment_micro(self) -> int:
        return to_micro(self.buyer_price * self.quantity)

    @property
    def receipt_micro(self) -> int:
        return to_micro(self.seller_price * self.quantity)


@dataclass
class TradeLedger:
    """Clearing result: per-cell quantities/prices plus money aggregates.

    ``quantities[b, s]`` is the energy seller ``seller_ids[s]`` delivers to
    buyer ``buyer_ids[b]``; ``prices`` holds the buyer-side price per cell
    and ``seller_prices`` the seller-side one (identical for the
    budget-balanced mechanisms). Money aggregates run through integer
    micro-units so community balances are exact.
    """

    buyer_ids: list[int]
    seller_ids: list[int]
    quantities: np.ndarray
    prices: np.ndarray
    seller_prices: np.ndarray
    trades: list[Trade] = field(default_factory=list)

    @classmethod
    def from_trades(cls, buyer_ids, seller_ids, trades) -> "TradeLedger":
        nb, ns = len(buyer_ids), len(seller_ids)
        q = np.zeros((nb, ns))
        pb = np.zeros((nb, ns))
        ps = np.zeros((nb, ns))
        brow = {a: i for i, a in enumerate(buyer_ids)}
        scol = {a: j for j, a in enumerate(seller_ids)}
        for t in trades:
            i, j = brow[t.buyer_id], scol[t.seller_id]
            q[i, j] += t.quantity
            pb[i, j] = t.buyer_price
            ps[i, j] = t.seller_price
        return cls(list(buyer_ids), list(seller_ids), q, pb, ps, list(trades))

    @classmethod
    def empty(cls) -> "TradeLedger":
        return cls.from_trades([], [], [])

    # --- per-agent aggregates ----------------------------------------

    def bought_kwh(self, agent_id: int) -> float:
        return float(sum(t.quantity for t in self.trades if t.buyer_id == agent_id))

    def sold_kwh(self, agent_id: int) -> float:
        return float(sum(t.quantity for t in self.trades if t.seller_id == agent_id))

    def payment_micro(self, agent_id: int) -> int:
        return sum(t.payment_micro for t in self.trades if t.buyer_id == agent_id)

    def receipt_micro(self, agent_id: int) -> int:
        return sum(t.receipt_micro for t in self.trades if t.seller_id == agent_id)

    def total_payments_micro(self) -> int:
        return sum(t.payment_micro for t in self.trades)

    def total_receipts_micro(self) -> int:
        return sum(t.receipt_micro for t in self.trades)

    def operator_surplus(self) -> float:
        """Money retained by the operator; zero except under VVDA."""
        return from_micro(self.total_payments_micro() - self.total_receipts_micro())

    def total_volume(self) -> float:
        return float(sum(t.quantity for t in self.trades))

    # --- serialization -----------------------------------------------

    def to_csv(self) -> str:
        """One row per executed cell: buyer_id, seller_id, kWh, price."""
        buf = io.StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(["buyer_id", "seller_id", "kwh", "price"])
        for t in self.trades:
            w.writerow([t.buyer_id, t.seller_id, repr(t.quantity), repr(t.buyer_price)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "buyer_ids": self.buyer_ids,
                "seller_ids": self.seller_ids,
                "operator_surplus": self.operator_surplus(),
                "trades": [
                    {
                        "buyer_id": t.buyer_id,
                        "seller_id": t.seller_id,
                        "kwh": t.quantity,
                        "buyer_price": t.buyer_price,
                        "seller_price": t.seller_price,
                        "bid": t.bid,
                        "ask": t.ask,
                    }
                    for t in self.trades
                ],
            }
        )


# ---------------------------------------------------------------------------
# Book construction
# ---------------------------------------------------------------------------

def validate_quotation(q: Quotation, env: PriceEnvelope) -> ValidationResult:
    """Check a quotation against the hour's price envelope.

    Zero-quantity quotes are always valid (null quote); otherwise the price
    magnitude must lie inside [feed_in, emergency].
    """
    if not (q.quantity >= 0):
        return ValidationResult(False, NegativeQuantity(f"quantity {q.quantity} < 0"))
    if q.quantity == 0:
        return ValidationResult(True)
    if not (env.feed_in <= q.ask <= env.emergency):
        return ValidationResult(
            False,
            PriceOutOfEnvelope(
                f"|price| {q.ask} outside [{env.feed_in}, {env.emergency}]"
            ),
        )
    return ValidationResult(True)


def require_valid(q: Quotation, env: PriceEnvelope) -> None:
    res = validate_quotation(q, env)
    if not res.ok:
        raise res.error


def partition(quotes: list[Quotation]) -> tuple[list[Quotation], list[Quotation]]:
    """Split quotations into buy and sell sides, dropping null quotes.

    Submission order is preserved within each side.
    """
    buyers = [q for q in quotes if q.quantity > 0 and q.is_buyer]
    sellers = [q for q in quotes if q.quantity > 0 and not q.is_buyer]
    return buyers, sellers


def sort_order_book(
    buyers: list[Quotation],
    sellers: list[Quotation],
    m: MarketFactor,
    p_e: float,
) -> tuple[list[Quotation], list[Quotation]]:
    """Order both sides by the market-factor-driven priority keys.

    Buyer keys: k1 = price, k2 = price * quantity. Seller keys:
    k1 = |price|, k2 = (p_e - |price|) * quantity.

    * surplus  (m < 0): buyers desc k2, sellers asc k1 — favor absorbers.
    * deficit  (m > 0): buyers desc k1, sellers desc k2 — favor providers.
    * balanced (m = 0): buyers desc k1, sellers asc k1 — classic book.

    Ties break toward the lower agent_id.
    """
    if m.value < 0:
        b = sorted(buyers, key=lambda q: (-q.price * q.quantity, q.agent_id))
        s = sorted(sellers, key=lambda q: (q.ask, q.agent_id))
    elif m.value > 0:
        b = sorted(buyers, key=lambda q: (-q.price, q.agent_id))
        s = sorted(sellers, key=lambda q: (-(p_e - q.ask) * q.quantity, q.agent_id))
    else:
        b = sorted(buyers, key=lambda q: (-q.price, q.agent_id))
        s = sorted(sellers, key=lambda q: (q.ask, q.agent_id))
    return b, s


def midpoint_price(p_b: float, p_s_abs: float) -> float:
    """Mid-point settlement price for a crossing bid/ask pair."""
    if p_b < p_s_abs:
        raise CrossViolation(f"bid {p_b} below ask {p_s_abs}")
    return (p_b + p_s_abs) / 2.0


# ---------------------------------------------------------------------------
# Clearing mechanisms
# ---------------------------------------------------------------------------

def clear_jpq(
    quotes: list[Quotation],
    m: MarketFactor,
    p_e: float,
    stats: dict | None = None,
) -> TradeLedger:
    """Joint price-quantity clearing with round-robin equitable matching.

    Pointers b and s sweep the sorted sides in lockstep, wrapping to the
    first entry that still has residual quantity. A failed cross advances
    (and permanently retires, via the start pointer) the buyer under
    surplus, the seller under deficit, and ends the auction when balanced.
    Matched cells settle min residual at the mid-point price.

    Start pointers are kept at the first index with positive residual, so
    a non-front agent exhausting never desynchronizes the wrap-around. A
    full pass without a trade terminates the loop defensively; monotone
    residual/start progress already bounds the iteration count.
    """
    buyers, sellers = partition(quotes)
    buyers, sellers = sort_order_book(buyers, sellers, m, p_e)
    nb, ns = len(buyers), len(sellers)
    rb = [q.quantity for q in buyers]
    rs = [q.quantity for q in sellers]
    trades: list[Trade] = []

    b = s = 0
    b_start = s_start = 0
    since_trade = 0
    iterations = 0
    advances = 0

    while True:
        while b_start < nb and rb[b_start] <= 0:
            b_start += 1
        while s_start < ns and rs[s_start] <= 0:
            s_start += 1
        if b_start >= nb or s_start >= ns:
            break
        if b < b_start or b >= nb:
            b = b_start
            advances += 1
        while rb[b] <= 0:
            b += 1
            advances += 1
            if b >= nb:
                b = b_start
        if s < s_start or s >= ns:
            s = s_start
            advances += 1
        while rs[s] <= 0:
            s += 1
            advances += 1
            if s >= ns:
                s = s_start
        if since_trade > nb * ns:
            break
        iterations += 1

        p_b = buyers[b].price
        p_s = sellers[s].ask
        if p_b < p_s:
            if m.value < 0:
                b += 1
                b_start += 1
                since_trade += 1
                advances += 1
                continue
            elif m.value > 0:
                s += 1
                s_start += 1
                since_trade += 1
                advances += 1
                continue
            else:
                break

        qty = min(rb[b], rs[s])
        price = midpoint_price(p_b, p_s)
        trades.append(
            Trade(buyers[b].agent_id, sellers[s].agent_id, qty, price, price, p_b, p_s)
        )
        rb[b] -= qty
        rs[s] -= qty
        since_trade = 0
        b += 1
        s += 1
        advances += 2

    if stats is not None:
        stats["iterations"] = iterations
        stats["pointer_advances"] = advances

    return TradeLedger.from_trades(
        [q.agent_id for q in buyers], [q.agent_id for q in sellers], trades
    )


def clear_greedy(quotes: list[Quotation]) -> TradeLedger:
    """Price-priority sequential double auction with mid-point pricing.

    Buyers descend by bid, sellers ascend by ask; the front pair trades the
    smaller residual while the bid still covers the ask.
    """
    buyers, sellers = partition(quotes)
    buyers = sorted(buyers, key=lambda q: (-q.price, q.agent_id))
    sellers = sorted(sellers, key=lambda q: (q.ask, q.agent_id))
    trades = _greedy_match(
        [(q.agent_id, q.price, q.quantity) for q in buyers],
        [(q.agent_id, q.ask, q.quantity) for q in sellers],
    )
    return TradeLedger.from_trades(
        [q.agent_id for q in buyers], [q.agent_id for q in sellers], trades
    )


def _greedy_match(buy_rows, sell_rows) -> list[Trade]:
    """Sequential matching over (id, price, residual) rows."""
    trades = []
    bi = si = 0
    buy_rows = [list(r) for r in buy_rows]
    sell_rows = [list(r) for r in sell_rows]
    while bi < len(buy_rows) and si < len(sell_rows):
        if buy_rows[bi][2] <= 0:
            bi += 1
            continue
        if sell_rows[si][2] <= 0:
            si += 1
            continue
        b_id, p_b, q_b = buy_rows[bi]
        s_id, p_s, q_s = sell_rows[si]
        if p_b < p_s:
            break
        qty = min(q_b, q_s)
        price = midpoint_price(p_b, p_s)
        trades.append(Trade(b_id, s_id, qty, price, price, p_b, p_s))
        buy_rows[bi][2] -= qty
        sell_rows[si][2] -= qty
        if buy_rows[bi][2] <= 0:
            bi += 1
        if sell_rows[si][2] <= 0:
            si += 1
    return trades


def clear_mrda(
    quotes: list[Quotation],
    env: PriceEnvelope,
    rounds: int = 3,
    concession: float = 0.5,
) -> TradeLedger:
    """Multi-round double auction with per-round price concessions.

    Round 1 greedy-matches the submitted prices. Before each later round,
    every buyer with residual demand raises its bid toward the emergency
    price and every seller with residual supply lowers its ask toward the
    feed-in tariff, each by the concession fraction of the remaining gap;
    residuals are then greedy-matched and settle at the conceded prices.
    The ledger is the union of all rounds. Conceded prices stay inside the
    envelope because the concession fraction is below one.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if not (0.0 <= concession < 1.0):
        raise ValueError(f"concession must be in [0, 1), got {concession}")

    buyers, sellers = partition(quotes)
    buyers = sorted(buyers, key=lambda q: (-q.price, q.agent_id))
    sellers = sorted(sellers, key=lambda q: (q.ask, q.agent_id))
    buy_rows = [[q.agent_id, q.price, q.quantity] for q in buyers]
    sell_rows = [[q.agent_id, q.ask, q.quantity] for q in sellers]

    all_trades: list[Trade] = []
    for rnd in range(rounds):
        if rnd > 0:
            for row in buy_rows:
                if row[2] > 0:
                    row[1] += concession * (env.emergency - row[1])
            for row in sell_rows:
                if row[2] > 0:
                    row[1] -= concession * (row[1] - env.feed_in)
            # re-rank by the conceded prices before matching
            buy_rows.sort(key=lambda r: (-r[1], r[0]))
            sell_rows.sort(key=lambda r: (r[1], r[0]))
        round_trades = _greedy_match(buy_rows, sell_rows)
        all_trades.extend(round_trades)
        for t in round_trades:
            for row in buy_rows:
                if row[0] == t.buyer_id:
                    row[2] -= t.quantity
            for row in sell_rows:
                if row[0] == t.seller_id:
                    row[2] -= t.quantity

    return TradeLedger.from_trades(
        [q.agent_id for q in buyers], [q.agent_id for q in sellers], all_trades
    )


def clear_vvda(quotes: list[Quotation]) -> TradeLedger:
    """Vickrey-variant double auction (McAfee breakeven-index rule).

    With buyers descending and sellers ascending, k is the last rank at
    which the bid still covers the ask. The first k-1 ranks trade pairwise;
    every trading buyer pays the rank-k bid and every trading seller
    receives the rank-k ask, so the operator keeps a non-negative surplus
    and the marginal pair is sacrificed for incentive reasons.
    """
    buyers, sellers = partition(quotes)
    buyers = sorted(buyers, key=lambda q: (-q.price, q.agent_id))
    sellers = sorted(sellers, key=lambda q: (q.ask, q.agent_id))
    buyer_ids = [q.agent_id for q in buyers]
    seller_ids = [q.agent_id for q in sellers]

    k = 0
    while k < min(len(buyers), len(sellers)) and buyers[k].price >= sellers[k].ask:
        k += 1
    if k < 1:
        return TradeLedger.from_trades(buyer_ids, seller_ids, [])

    buy_clear = buyers[k - 1].price
    sell_clear = sellers[k - 1].ask
    trades = []
    for r in range(k - 1):
        qty = min(buyers[r].quantity, sellers[r].quantity)
        trades.append(
            Trade(
                buyers[r].agent_id,
                sellers[r].agent_id,
                qty,
                buy_clear,
                sell_clear,
                buyers[r].price,
                sellers[r].ask,
            )
        )
    return TradeLedger.from_trades(buyer_ids, seller_ids, trades)
