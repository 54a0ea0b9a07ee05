"""Analytic gradient of the batch objective for the toy policy."""

import numpy as np

from policy.toy import ToyPolicyParams, log_softmax

from .errors import EmptyBatch
from .signal import TokenBatch


def toy_policy_gradient(batch: TokenBatch, params: ToyPolicyParams, epsilon: float = 0.2) -> np.ndarray:
    """Gradient of ``batch_objective`` w.r.t. the toy logits, old logprobs held fixed.

    A token contributes ``ratio * A * d log pi`` when the unclipped term is the
    minimum, and nothing when the clipped term is.

    Raises:
        EmptyBatch: the batch has no tokens
        UnknownToken: a token id lies outside the vocabulary
    """
    if batch.total_tokens == 0:
        raise EmptyBatch("token batch is empty")
    for tid in np.unique(batch.token_ids):
        params.token_id(int(tid))

    n = batch.total_tokens
    logp = np.apply_along_axis(log_softmax, 1, params.logits[batch.features])
    probs = np.exp(logp)
    rows = np.arange(n)
    ratio = np.exp(logp[rows, batch.token_ids] - batch.old_logprobs)
    adv = batch.advantages
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv
    active = unclipped <= clipped

    coeff = np.where(active, unclipped, 0.0) / n
    token_grads = -probs * coeff[:, None]
    token_grads[rows, batch.token_ids] += coeff
    grad = np.zeros_like(params.logits)
    np.add.at(grad, batch.features, token_grads)
    return grad
