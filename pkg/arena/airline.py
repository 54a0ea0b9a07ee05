"""Tool handlers for the reference airline domain."""

from typing import Any, Dict, List, Mapping

from system.seeding import digest

from .errors import EntityNotFound, InsufficientFunds, InvalidRequest
from .rules import has_flown
from .tooling import Handler, ToolContext

CABINS = ("basic_economy", "economy", "business")
BAG_FEE = 50
INSURANCE_FEE = 30
# compensation per passenger, keyed by flight status
COMPENSATION = {"cancelled": 100, "delayed": 50}


def _passenger_names(passengers: List[Any]) -> List[str]:
    names = []
    for p in passengers:
        if isinstance(p, Mapping):
            names.append(f"{p.get('first_name', '')} {p.get('last_name', '')}".strip())
        else:
            names.append(str(p))
    return names


def _bookable_flights(ctx: ToolContext, numbers: List[Any], cabin: str,
                      seats: int) -> List[Dict[str, Any]]:
    if cabin not in CABINS:
        raise InvalidRequest(f"unknown cabin {cabin!r}")
    if not numbers:
        raise InvalidRequest("at least one flight is required")
    flights = [ctx.require(n, "flight") for n in numbers]
    for flight in flights:
        if flight.get("status") != "available":
            raise InvalidRequest(f"flight {flight['flight_number']} is {flight.get('status')}")
        if flight["available_seats"].get(cabin, 0) < seats:
            raise InvalidRequest(f"flight {flight['flight_number']} has no {cabin} seats left")
    for first, second in zip(flights, flights[1:]):
        if first["destination"] != second["origin"]:
            raise InvalidRequest("flights do not connect")
    return flights


def _fare(flights: List[Mapping[str, Any]], cabin: str, passengers: int) -> int:
    return sum(f["prices"][cabin] for f in flights) * passengers


def _owned_payment(ctx: ToolContext, payment_id: Any, user_id: str) -> Dict[str, Any]:
    payment = ctx.require(payment_id, "payment")
    if payment.get("owner") != user_id:
        raise EntityNotFound(f"payment {payment_id!r} does not belong to {user_id}")
    return payment


def _charge(payments: List[Dict[str, Any]], total: int) -> List[Dict[str, Any]]:
    """Charge certificates, then gift cards, then a credit card.

    Returns:
        Payment history entries with nonzero amounts
    """
    order = {"certificate": 0, "gift_card": 1, "credit_card": 2}
    remaining = total
    history = []
    for payment in sorted(payments, key=lambda p: order.get(p.get("kind"), 3)):
        if remaining <= 0:
            break
        kind = payment.get("kind")
        if kind == "credit_card":
            used = remaining
        else:
            used = min(payment.get("amount", 0), remaining)
            payment["amount"] = payment.get("amount", 0) - used
            if kind == "certificate":
                payment["status"] = "used"
        if used > 0:
            history.append({"payment_id": payment["payment_id"], "amount": used})
            remaining -= used
    if remaining > 0:
        raise InsufficientFunds(f"payment methods cover {total - remaining} of {total}")
    return history


def compensation_entitlement(entities: Mapping[str, Mapping[str, Any]],
                             reservation_id: str) -> int:
    """Compensation owed for a reservation's disrupted flights, 0 if none."""
    reservation = entities.get(reservation_id)
    if not reservation or reservation.get("type") != "reservation":
        return 0
    per_passenger = 0
    for number in reservation.get("flights", []):
        flight = entities.get(number, {})
        per_passenger = max(per_passenger, COMPENSATION.get(flight.get("status"), 0))
    return per_passenger * len(reservation.get("passengers", []))


# --- read-only tools ---

def get_user_details(ctx: ToolContext, args):
    user = ctx.require(args["user_id"], "user")
    methods = {pid: ctx.entities[pid] for pid in user.get("payment_methods", [])
               if pid in ctx.entities}
    return {**user, "payment_methods": methods}


def get_reservation_details(ctx: ToolContext, args):
    return ctx.require(args["reservation_id"], "reservation")


def list_all_airports(ctx: ToolContext, args):
    codes = set()
    for _, flight in ctx.of_type("flight"):
        codes.add(flight["origin"])
        codes.add(flight["destination"])
    return sorted(codes)


def search_direct_flight(ctx: ToolContext, args):
    return [
        flight for _, flight in ctx.of_type("flight")
        if flight["origin"] == args["origin"]
        and flight["destination"] == args["destination"]
        and flight["date"] == args["date"]
        and flight.get("status") == "available"
    ]


def search_onestop_flight(ctx: ToolContext, args):
    flights = [f for _, f in ctx.of_type("flight") if f.get("status") == "available"]
    pairs = []
    for first in flights:
        if first["origin"] != args["origin"] or first["date"] != args["date"]:
            continue
        for second in flights:
            if (second["origin"] == first["destination"]
                    and second["destination"] == args["destination"]
                    and second["date"] >= first["date"]):
                pairs.append([first, second])
    return pairs


def get_flight_status(ctx: ToolContext, args):
    flight = ctx.require(args["flight_number"], "flight")
    if flight["date"] != args["date"]:
        raise EntityNotFound(f"flight {args['flight_number']} does not operate on {args['date']}")
    return {"flight_number": flight["flight_number"], "date": flight["date"],
            "status": flight["status"]}


def transfer_to_human_agents(ctx: ToolContext, args):
    return {"status": "transferred", "summary": args["summary"]}


# --- mutating tools ---

def book_reservation(ctx: ToolContext, args):
    user = ctx.require(args["user_id"], "user")
    cabin = args["cabin"]
    passengers = list(args["passengers"])
    if not passengers:
        raise InvalidRequest("at least one passenger is required")
    flights = _bookable_flights(ctx, list(args["flights"]), cabin, len(passengers))
    nonfree = args.get("nonfree_baggages", 0)
    total_bags = args.get("total_baggages", 0)
    if nonfree < 0 or total_bags < nonfree:
        raise InvalidRequest("nonfree_baggages must lie between 0 and total_baggages")
    insurance = bool(args.get("insurance", False))

    reservation_id = "R" + digest({
        "user": user["user_id"],
        "flights": [f["flight_number"] for f in flights],
        "cabin": cabin,
        "passengers": _passenger_names(passengers),
    }, length=6).upper()
    if reservation_id in ctx.entities:
        raise InvalidRequest(f"reservation {reservation_id} already exists")

    payments = [_owned_payment(ctx, pid, user["user_id"]) for pid in args["payment_methods"]]
    total = _fare(flights, cabin, len(passengers)) + BAG_FEE * nonfree
    if insurance:
        total += INSURANCE_FEE * len(passengers)
    history = _charge(payments, total)

    for flight in flights:
        flight["available_seats"][cabin] -= len(passengers)
    reservation = {
        "type": "reservation",
        "reservation_id": reservation_id,
        "user_id": user["user_id"],
        "origin": flights[0]["origin"],
        "destination": flights[-1]["destination"],
        "flight_type": "one_way",
        "cabin": cabin,
        "flights": [f["flight_number"] for f in flights],
        "passengers": passengers,
        "payment_history": history,
        "created_at": ctx.now.isoformat(),
        "total_baggages": total_bags,
        "nonfree_baggages": nonfree,
        "insurance": insurance,
        "status": "active",
    }
    ctx.entities[reservation_id] = reservation
    user.setdefault("reservations", []).append(reservation_id)
    return reservation


def _active_reservation(ctx: ToolContext, reservation_id: Any) -> Dict[str, Any]:
    reservation = ctx.require(reservation_id, "reservation")
    if reservation.get("status") != "active":
        raise InvalidRequest(f"reservation {reservation_id} is {reservation.get('status')}")
    return reservation


def cancel_reservation(ctx: ToolContext, args):
    reservation = _active_reservation(ctx, args["reservation_id"])
    for entry in reservation.get("payment_history", []):
        payment = ctx.entities.get(entry["payment_id"])
        if payment and payment.get("kind") == "gift_card" and entry["amount"] > 0:
            payment["amount"] = payment.get("amount", 0) + entry["amount"]
    reservation["status"] = "cancelled"
    return reservation


def update_reservation_flights(ctx: ToolContext, args):
    reservation = _active_reservation(ctx, args["reservation_id"])
    cabin = args["cabin"]
    pax = len(reservation.get("passengers", []))
    flights = _bookable_flights(ctx, list(args["flights"]), cabin, pax)
    if (flights[0]["origin"], flights[-1]["destination"]) != \
            (reservation["origin"], reservation["destination"]):
        raise InvalidRequest("origin and destination cannot change")
    if any(has_flown(ctx.entities[n], ctx.now) for n in reservation["flights"]
           if n in ctx.entities):
        raise InvalidRequest("reservation has flown segments")

    old = [ctx.entities[n] for n in reservation["flights"] if n in ctx.entities]
    difference = _fare(flights, cabin, pax) - _fare(old, reservation["cabin"], pax)
    payment = _owned_payment(ctx, args["payment_id"], reservation["user_id"])
    if difference != 0:
        if payment.get("kind") == "certificate":
            raise InvalidRequest("certificates cannot pay for flight changes")
        if payment.get("kind") == "gift_card":
            if payment.get("amount", 0) < difference:
                raise InsufficientFunds(f"gift card {payment['payment_id']} cannot cover {difference}")
            payment["amount"] = payment.get("amount", 0) - difference
        reservation["payment_history"].append(
            {"payment_id": payment["payment_id"], "amount": difference})

    for flight in old:
        flight["available_seats"][reservation["cabin"]] += pax
    for flight in flights:
        flight["available_seats"][cabin] -= pax
    reservation["flights"] = [f["flight_number"] for f in flights]
    reservation["cabin"] = cabin
    return reservation


def update_reservation_baggages(ctx: ToolContext, args):
    reservation = _active_reservation(ctx, args["reservation_id"])
    total_bags = args["total_baggages"]
    nonfree = args["nonfree_baggages"]
    if nonfree < 0 or total_bags < nonfree:
        raise InvalidRequest("nonfree_baggages must lie between 0 and total_baggages")
    fee = BAG_FEE * max(0, nonfree - reservation.get("nonfree_baggages", 0))
    if fee:
        payment = _owned_payment(ctx, args["payment_id"], reservation["user_id"])
        if payment.get("kind") == "certificate":
            raise InvalidRequest("certificates cannot pay for baggage")
        if payment.get("kind") == "gift_card":
            if payment.get("amount", 0) < fee:
                raise InsufficientFunds(f"gift card {payment['payment_id']} cannot cover {fee}")
            payment["amount"] = payment.get("amount", 0) - fee
        reservation["payment_history"].append({"payment_id": payment["payment_id"], "amount": fee})
    reservation["total_baggages"] = total_bags
    reservation["nonfree_baggages"] = nonfree
    return reservation


def send_certificate(ctx: ToolContext, args):
    user = ctx.require(args["user_id"], "user")
    reservation = ctx.require(args["reservation_id"], "reservation")
    if reservation.get("user_id") != user["user_id"]:
        raise InvalidRequest(f"reservation {reservation['reservation_id']} belongs to another user")
    amount = args["amount"]
    if amount <= 0:
        raise InvalidRequest("amount must be positive")
    certificate_id = "certificate_" + digest(
        {"user": user["user_id"], "reservation": reservation["reservation_id"], "amount": amount},
        length=8,
    )
    if certificate_id in ctx.entities:
        raise InvalidRequest("certificate already issued")
    certificate = {
        "type": "payment",
        "payment_id": certificate_id,
        "kind": "certificate",
        "owner": user["user_id"],
        "amount": amount,
        "status": "issued",
    }
    ctx.entities[certificate_id] = certificate
    user.setdefault("payment_methods", []).append(certificate_id)
    return certificate


HANDLERS: Dict[str, Handler] = {
    "get_user_details": get_user_details,
    "get_reservation_details": get_reservation_details,
    "list_all_airports": list_all_airports,
    "search_direct_flight": search_direct_flight,
    "search_onestop_flight": search_onestop_flight,
    "get_flight_status": get_flight_status,
    "transfer_to_human_agents": transfer_to_human_agents,
    "book_reservation": book_reservation,
    "cancel_reservation": cancel_reservation,
    "update_reservation_flights": update_reservation_flights,
    "update_reservation_baggages": update_reservation_baggages,
    "send_certificate": send_certificate,
}
