"""Five zero-argument tools acting on the session's account."""

from typing import Dict

from .tooling import Handler, ToolContext


def _account(ctx: ToolContext):
    session = ctx.require("session", "session")
    return ctx.require(session.get("account_id"), "account")


def lookup_account(ctx: ToolContext, args):
    account = _account(ctx)
    return {"account_id": account["account_id"], "owner": account["owner"]}


def check_status(ctx: ToolContext, args):
    account = _account(ctx)
    return {"account_id": account["account_id"], "status": account["status"]}


def reset_password(ctx: ToolContext, args):
    account = _account(ctx)
    account["status"] = "active"
    account["password_reset"] = True
    return {"account_id": account["account_id"], "status": account["status"]}


def close_account(ctx: ToolContext, args):
    account = _account(ctx)
    account["status"] = "closed"
    return {"account_id": account["account_id"], "status": account["status"]}


def apply_credit(ctx: ToolContext, args):
    account = _account(ctx)
    account["credit_balance"] = account.get("credit_balance", 0) + 10
    return {"account_id": account["account_id"], "credit_balance": account["credit_balance"]}


HANDLERS: Dict[str, Handler] = {
    "lookup_account": lookup_account,
    "check_status": check_status,
    "reset_password": reset_password,
    "close_account": close_account,
    "apply_credit": apply_credit,
}
