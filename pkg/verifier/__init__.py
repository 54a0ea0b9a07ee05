from .errors import VerifierError, UnknownRule, CheckerSpecError
from .fields import (
    FieldClass, classify_field, fuzzy_text_match, deep_compare, StateReport, DEFAULT_THRESHOLD,
)
from .checker import (
    CheckerSpec, KeyFunction, FunctionCall, FunctionReport, extract_function_calls,
    derive_key_functions, match_key_functions,
)
from .policy import PolicyReport, check_policies
from .report import VerificationReport
from .core import (
    Verifier, evaluate_submission, build_checker, replay_trace, materialize_checker,
)

__all__ = [
    'VerifierError', 'UnknownRule', 'CheckerSpecError',
    'FieldClass', 'classify_field', 'fuzzy_text_match', 'deep_compare', 'StateReport',
    'DEFAULT_THRESHOLD',
    'CheckerSpec', 'KeyFunction', 'FunctionCall', 'FunctionReport', 'extract_function_calls',
    'derive_key_functions', 'match_key_functions',
    'PolicyReport', 'check_policies',
    'VerificationReport',
    'Verifier', 'evaluate_submission', 'build_checker', 'replay_trace', 'materialize_checker',
]
