from .errors import PolicyError, RoleMismatch, RemoteUnavailable, ScriptExhausted, UnknownToken
from .parsing import (
    Function, Message, Answer, Control, Malformed, ParsedAction, PolicyOutput,
    parse_agent_output, parse_user_output, render, to_action,
)
from .base import Policy
from .scripted import ScriptedPolicy, fill_placeholders
from .toy import (
    ToyPolicy, ToyPolicyParams, toy_vocabulary, context_key, toy_logprob_and_grad,
    sequence_logprob_and_grad, token_features,
)
from .remote import ChatClient, RemotePolicy, observation_messages

__all__ = [
    'PolicyError', 'RoleMismatch', 'RemoteUnavailable', 'ScriptExhausted', 'UnknownToken',
    'Function', 'Message', 'Answer', 'Control', 'Malformed', 'ParsedAction', 'PolicyOutput',
    'parse_agent_output', 'parse_user_output', 'render', 'to_action',
    'Policy', 'ScriptedPolicy', 'fill_placeholders',
    'ToyPolicy', 'ToyPolicyParams', 'toy_vocabulary', 'context_key', 'toy_logprob_and_grad',
    'sequence_logprob_and_grad', 'token_features',
    'ChatClient', 'RemotePolicy', 'observation_messages',
]
