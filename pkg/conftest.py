"""Shared fixtures: the bundled toy and airline domains, their tasks and scripts."""

from pathlib import Path

import pytest

from arena import Domain, Environment, Role, TaskSpec, load_tasks
from policy import ScriptedPolicy
from verifier import Verifier

ASSETS = Path(__file__).resolve().parent / "assets"
SCRIPTS = ASSETS / "scripts"


def copy_task(task: TaskSpec, task_id: str) -> TaskSpec:
    return TaskSpec.from_dict({**task.to_dict(), "id": task_id})


@pytest.fixture(scope="session")
def toy_domain():
    return Domain.load(ASSETS / "toy_domain.json")


@pytest.fixture(scope="session")
def airline_domain():
    return Domain.load(ASSETS / "airline_domain.json")


@pytest.fixture
def toy_env(toy_domain):
    return Environment(toy_domain)


@pytest.fixture
def airline_env(airline_domain):
    return Environment(airline_domain)


@pytest.fixture(scope="session")
def toy_tasks():
    return load_tasks(ASSETS / "tasks" / "toy")


@pytest.fixture(scope="session")
def airline_tasks():
    return {t.id: t for t in load_tasks(ASSETS / "tasks" / "airline")}


@pytest.fixture
def solver():
    return ScriptedPolicy.load(SCRIPTS / "toy_agent_solver.json", Role.AGENT)


@pytest.fixture
def alternating():
    return ScriptedPolicy.load(SCRIPTS / "toy_agent_alternating.json", Role.AGENT)


@pytest.fixture
def toy_user():
    return ScriptedPolicy.load(SCRIPTS / "toy_user.json", Role.USER)


@pytest.fixture
def toy_verifier(toy_env, toy_tasks):
    verifier = Verifier(toy_env.domain)
    verifier.prepare(toy_env, toy_tasks)
    return verifier


@pytest.fixture
def ten_toy_tasks(toy_tasks):
    """Ten distinct task ids cycling over the four bundled toy tasks."""
    return [copy_task(toy_tasks[i % len(toy_tasks)], f"toy_bench_{i:02d}") for i in range(10)]


def passengers(n):
    return [{"first_name": f"Guest{i}", "last_name": "Tester", "dob": "1990-01-01"} for i in range(n)]


def booking(user_id, payment_methods, n_passengers=1):
    return {"user_id": user_id, "flights": ["HAT012"], "cabin": "economy",
            "passengers": passengers(n_passengers), "payment_methods": payment_methods}


# (rule id, tool, arguments, whether the rule blocks the call) on the bundled airline fixture
AIRLINE_RULE_CASES = [
    pytest.param("basic_economy_mod", "update_reservation_flights",
                 {"reservation_id": "BE1001", "cabin": "basic_economy", "flights": ["HAT006"],
                  "payment_id": "credit_card_3701"}, True, id="basic_economy_mod-blocked"),
    pytest.param("basic_economy_mod", "update_reservation_flights",
                 {"reservation_id": "OMA500", "cabin": "business", "flights": ["HAT012"],
                  "payment_id": "credit_card_3701"}, False, id="basic_economy_mod-allowed"),
    pytest.param("cancel_already_flown", "cancel_reservation", {"reservation_id": "YHLGGW"}, True,
                 id="cancel_already_flown-blocked"),
    pytest.param("cancel_already_flown", "cancel_reservation", {"reservation_id": "NEW24H"}, False,
                 id="cancel_already_flown-allowed"),
    pytest.param("cancellation_24h", "cancel_reservation", {"reservation_id": "OLDNOI"}, True,
                 id="cancellation_24h-blocked"),
    pytest.param("cancellation_24h", "cancel_reservation", {"reservation_id": "79CKHW"}, False,
                 id="cancellation_24h-allowed"),
    pytest.param("certificate_limit", "book_reservation",
                 booking("mei_thomas_8446", ["certificate_2501", "certificate_5002"]), True,
                 id="certificate_limit-blocked"),
    pytest.param("certificate_limit", "book_reservation",
                 booking("mei_thomas_8446", ["certificate_2501", "credit_card_2604"]), False,
                 id="certificate_limit-allowed"),
    pytest.param("gift_card_limit", "book_reservation",
                 booking("ava_nguyen_5522", ["gift_card_6002", "gift_card_6003", "gift_card_6004",
                                             "gift_card_6005"]), True, id="gift_card_limit-blocked"),
    pytest.param("gift_card_limit", "book_reservation",
                 booking("ava_nguyen_5522", ["gift_card_6002", "gift_card_6003", "gift_card_6004",
                                             "credit_card_6001"]), False, id="gift_card_limit-allowed"),
    pytest.param("passenger_max_five", "book_reservation",
                 booking("mia_li_3668", ["credit_card_4421"], 6), True, id="passenger_max_five-blocked"),
    pytest.param("passenger_max_five", "book_reservation",
                 booking("mia_li_3668", ["credit_card_4421"], 5), False, id="passenger_max_five-allowed"),
    pytest.param("baggage_add_only", "update_reservation_baggages",
                 {"reservation_id": "LIA200", "total_baggages": 1, "nonfree_baggages": 0,
                  "payment_id": "credit_card_7101"}, True, id="baggage_add_only-blocked"),
    pytest.param("baggage_add_only", "update_reservation_baggages",
                 {"reservation_id": "LIA200", "total_baggages": 3, "nonfree_baggages": 1,
                  "payment_id": "credit_card_7101"}, False, id="baggage_add_only-allowed"),
    pytest.param("compensation_membership", "send_certificate",
                 {"user_id": "omar_davis_3817", "reservation_id": "OMA500", "amount": 50}, True,
                 id="compensation_membership-blocked"),
    pytest.param("compensation_membership", "send_certificate",
                 {"user_id": "sofia_rossi_8776", "reservation_id": "SOF001", "amount": 100}, False,
                 id="compensation_membership-allowed"),
]
