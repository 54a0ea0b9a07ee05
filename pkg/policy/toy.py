"""Toy autoregressive policy over a closed token vocabulary.

Logits live in a ``(n_features, vocab)`` table. Each position hashes the
turn context and the previous token into a feature row, so the sequence
probability factorizes as a product of per-position softmax terms and its
gradient is available in closed form.
"""

import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from arena.types import EventKind, Observation, Role
from system.storage import canonical_json

from .base import Policy
from .errors import UnknownToken
from .parsing import PolicyOutput, parse_agent_output

EOS = "<eos>"
BOS = "<bos>"
MSG_HELP = "msg_help"
MSG_DONE = "msg_done"
TURN_BUCKETS = 8

MESSAGE_TEXT = {
    MSG_HELP: "How can I help you today?",
    MSG_DONE: "Your request has been handled.",
    EOS: "",
}


def toy_vocabulary(tool_names: Sequence[str]) -> Tuple[str, ...]:
    """One token per tool, two canned messages and the terminator."""
    return tuple(tool_names) + (MSG_HELP, MSG_DONE, EOS)


@dataclass
class ToyPolicyParams:
    logits: np.ndarray
    vocabulary: Tuple[str, ...]

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        self.vocabulary = tuple(self.vocabulary)
        if self.logits.ndim != 2 or self.logits.shape[1] != len(self.vocabulary):
            raise ValueError(f"logits shape {self.logits.shape} does not match "
                             f"vocabulary size {len(self.vocabulary)}")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("vocabulary repeats a token")
        if EOS not in self.vocabulary:
            raise ValueError("vocabulary lacks the terminator token")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")

    @classmethod
    def zeros(cls, vocabulary: Sequence[str], n_features: int = 256) -> "ToyPolicyParams":
        """Uniform policy: every position is a uniform softmax."""
        return cls(np.zeros((n_features, len(vocabulary))), tuple(vocabulary))

    @property
    def n_features(self) -> int:
        return self.logits.shape[0]

    @property
    def size(self) -> int:
        return len(self.vocabulary)

    def copy(self) -> "ToyPolicyParams":
        return ToyPolicyParams(self.logits.copy(), self.vocabulary)

    def token_id(self, token: Union[str, int]) -> int:
        if isinstance(token, (int, np.integer)) and not isinstance(token, bool):
            if 0 <= int(token) < self.size:
                return int(token)
            raise UnknownToken(f"token id {token} outside vocabulary of size {self.size}")
        try:
            return self.vocabulary.index(token)
        except ValueError:
            raise UnknownToken(f"unknown token {token!r}") from None

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, logits=self.logits, vocabulary=np.array(self.vocabulary))
        return path

    @classmethod
    def load(cls, path) -> "ToyPolicyParams":
        with np.load(path, allow_pickle=False) as data:
            return cls(data["logits"], tuple(str(t) for t in data["vocabulary"]))


def context_key(obs: Observation) -> str:
    """Context of a turn: last tool status since the last message, last speaker, turn bucket."""
    status = "none"
    for event in reversed(obs.history):
        if event.kind is EventKind.MESSAGE:
            break
        if event.kind is EventKind.TOOL_RESULT:
            status = "ok" if event.ok else "err"
            break
    speaker = obs.history[-1].role.value if obs.history else "none"
    bucket = min(obs.turn, TURN_BUCKETS - 1)
    return f"{status}|{speaker}|{bucket}"


def feature_index(context: str, prev_token: str, n_features: int) -> int:
    return zlib.crc32(f"{context}|{prev_token}".encode("utf-8")) % n_features


def log_softmax(row: np.ndarray) -> np.ndarray:
    shifted = row - row.max()
    return shifted - np.log(np.exp(shifted).sum())


def token_features(params: ToyPolicyParams, context: str, token_ids: Sequence[int]) -> List[int]:
    """Feature row used at each position of a token sequence."""
    features = []
    prev = BOS
    for tid in token_ids:
        features.append(feature_index(context, prev, params.n_features))
        prev = params.vocabulary[tid]
    return features


def sequence_logprob_and_grad(params: ToyPolicyParams, context: str,
                              tokens: Sequence[Union[str, int]]) -> Tuple[float, np.ndarray]:
    """Exact log-probability of ``tokens`` under ``context`` and its gradient.

    Returns:
        (logprob, gradient with the shape of ``params.logits``)

    Raises:
        UnknownToken: a token is not in the vocabulary
    """
    ids = [params.token_id(t) for t in tokens]
    grad = np.zeros_like(params.logits)
    logprob = 0.0
    for feature, tid in zip(token_features(params, context, ids), ids):
        logp = log_softmax(params.logits[feature])
        logprob += float(logp[tid])
        grad[feature] -= np.exp(logp)
        grad[feature, tid] += 1.0
    return logprob, grad


def toy_logprob_and_grad(params: ToyPolicyParams, obs: Observation,
                         tokens: Sequence[Union[str, int]]) -> Tuple[float, np.ndarray]:
    return sequence_logprob_and_grad(params, context_key(obs), tokens)


def render_tokens(vocabulary: Sequence[str], token_ids: Sequence[int]) -> str:
    """Tagged agent text for a sampled sequence; the first token picks the action."""
    first = vocabulary[token_ids[0]]
    if first in MESSAGE_TEXT:
        return f"<message>{MESSAGE_TEXT[first]}</message>"
    body = canonical_json({"name": first, "arguments": {}})
    return f"<function>{body}</function>"


class ToyPolicy(Policy):
    """Agent policy sampling up to ``max_len`` tokens or the terminator."""

    name = "toy"

    def __init__(self, params: ToyPolicyParams, max_len: int = 3):
        super().__init__(Role.AGENT)
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        self.params = params
        self.max_len = max_len

    def _generate(self, obs: Observation, rng_seed: int) -> PolicyOutput:
        rng = np.random.default_rng(rng_seed)
        context = context_key(obs)
        params = self.params
        token_ids: List[int] = []
        logprobs: List[float] = []
        prev = BOS
        for _ in range(self.max_len):
            logp = log_softmax(params.logits[feature_index(context, prev, params.n_features)])
            probs = np.exp(logp)
            tid = int(rng.choice(params.size, p=probs / probs.sum()))
            token_ids.append(tid)
            logprobs.append(min(float(logp[tid]), 0.0))
            prev = params.vocabulary[tid]
            if prev == EOS:
                break
        text = render_tokens(params.vocabulary, token_ids)
        return PolicyOutput(raw_text=text, parsed=parse_agent_output(text),
                            token_ids=token_ids, token_logprobs=logprobs, context=context)
