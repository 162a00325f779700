"""Small builders shared by the unit and acceptance tests."""
import torch

from oracleforge.dataset import ClassWeights
from oracleforge.neural import (
    ModelConfig,
    OracleModel,
    collate,
    grad_check,
    margin_ranking_loss,
    weighted_cross_entropy,
)

TINY = dict(vocab_size=20, max_len=16, token_dim=8, embed_dim=6, heads=2, layers=1, ff_dim=12, hidden=(10,))


def tiny_model(seed: int) -> OracleModel:
    torch.manual_seed(seed)
    return OracleModel(ModelConfig(**TINY))


def random_batch(gen: torch.Generator, batch: int = 3, lo: int = 2, hi: int = 7):
    seqs = []
    for _ in range(batch):
        n = int(torch.randint(lo, hi, (1,), generator=gen))
        seqs.append(torch.randint(3, TINY["vocab_size"], (n,), generator=gen).tolist())
    return collate(seqs)


def gradient_instance(seed: int, loss: str, tol: float = 1e-4, max_entries: int = 12):
    """Finite-difference check of one loss through a 1-layer encoder pair plus classifier."""
    model = tiny_model(seed)
    gen = torch.Generator().manual_seed(seed)
    t, p, n = random_batch(gen), random_batch(gen), random_batch(gen)
    labels = torch.randint(0, 2, (3,), generator=gen)
    weights = ClassWeights(1.5, 0.75)

    def fn():
        d_t, _ = model.psi(*t)
        d_p, _ = model.phi(*p)
        if loss == "mrl":
            d_n, _ = model.phi(*n)
            # a wide margin keeps every triplet on the linear side of the hinge
            return margin_ranking_loss(d_t, d_p, d_n, alpha=4.0)
        return weighted_cross_entropy(model.classifier(d_t, d_p), labels, weights, "sum")

    params = [q for q in model.parameters() if q.requires_grad]
    return grad_check(fn, params, h=1e-5, tol=tol, max_entries=max_entries,
                      generator=torch.Generator().manual_seed(seed + 1))
