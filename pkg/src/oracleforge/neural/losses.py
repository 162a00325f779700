"""Joint-embedding and classification losses."""
from __future__ import annotations

import torch


class ZeroVector(ValueError):
    pass


PASS_INDEX, FAIL_INDEX = 0, 1


def _check_nonzero(*vectors):
    for v in vectors:
        if bool((torch.linalg.vector_norm(v, dim=-1) == 0).any()):
            raise ZeroVector("cosine similarity is undefined for a zero vector")


def cosine_similarity(u, v):
    """u.v / (|u||v|) along the last axis."""
    u = torch.as_tensor(u, dtype=torch.float64)
    v = torch.as_tensor(v, dtype=torch.float64)
    _check_nonzero(u, v)
    return (u * v).sum(-1) / (torch.linalg.vector_norm(u, dim=-1) * torch.linalg.vector_norm(v, dim=-1))


def cosine_distance(u, v):
    return 1.0 - cosine_similarity(u, v)


def margin_ranking_loss(d_test, d_pass, d_fail, alpha: float = 0.2):
    """Sum over triplets of max(dist(t, m+) - dist(t, m-) + alpha, 0)."""
    if alpha < 0:
        raise ValueError("margin must be non-negative")
    per = torch.clamp(cosine_distance(d_test, d_pass) - cosine_distance(d_test, d_fail) + alpha, min=0.0)
    return per.sum()


def weighted_cross_entropy(logits, labels, weights, reduction: str | None = None):
    """-w_y log softmax(logits)[y] with max-shift stabilization.

    ``labels`` are class indices (0 = pass, 1 = fail); ``weights`` is a
    ClassWeights or a (w_pass, w_fail) pair. ``mean`` (the batch default)
    divides by the summed weights of the batch; a single example defaults to
    its unnormalized weighted loss.
    """
    logits = torch.as_tensor(logits, dtype=torch.float64)
    labels = torch.as_tensor(labels, dtype=torch.long)
    single = logits.dim() == 1
    if single:
        logits, labels = logits[None], labels.reshape(1)
    if hasattr(weights, "w_pass"):
        weights = (weights.w_pass, weights.w_fail)
    w = torch.tensor([float(weights[0]), float(weights[1])], dtype=torch.float64)
    if bool((w <= 0).any()):
        raise ValueError("class weights must be positive")
    shifted = logits - logits.max(dim=-1, keepdim=True).values
    log_probs = shifted - torch.logsumexp(shifted, dim=-1, keepdim=True)
    wy = w[labels]
    per = -wy * log_probs.gather(-1, labels[:, None])[:, 0]
    if reduction is None:
        reduction = "none" if single else "mean"
    if reduction == "none":
        return per[0] if single else per
    if reduction == "sum":
        return per.sum()
    return per.sum() / wy.sum()
