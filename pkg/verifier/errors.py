from system.errors import TandemError


class VerifierError(TandemError):
    """Base class for verifier failures."""


class UnknownRule(VerifierError, KeyError):
    """Rule id (or alias) missing from the domain rule table."""

    def __init__(self, rule_id: str):
        super().__init__(rule_id)
        self.rule_id = rule_id

    def __str__(self):
        return f"unknown rule {self.rule_id!r}"


class CheckerSpecError(VerifierError, ValueError):
    """Checker spec is inconsistent with its domain or cannot be derived."""
