"""Float64 tensor core (torch autograd), encoders, losses and optimizer."""
from .checkpoint import ModelCheckpoint, checkpoint_hash, load_checkpoint, params_hash, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .losses import (
    FAIL_INDEX,
    PASS_INDEX,
    ZeroVector,
    cosine_distance,
    cosine_similarity,
    margin_ranking_loss,
    weighted_cross_entropy,
)
from .model import (
    Classifier,
    Encoder,
    ModelConfig,
    OracleModel,
    SequenceTooLong,
    collate,
    encode,
)
from .optim import AdamW, AdamWHyper, AdamWState, NonFinite, adamw_step
from .vocab import PAD, SEP, UNK, Vocab, lexemes

__all__ = [
    "FAIL_INDEX", "PASS_INDEX", "PAD", "SEP", "UNK", "AdamW", "AdamWHyper", "AdamWState",
    "Classifier", "Encoder", "GradCheckReport", "ModelCheckpoint", "ModelConfig", "NonFinite",
    "OracleModel", "SequenceTooLong", "Vocab", "ZeroVector", "adamw_step", "checkpoint_hash",
    "collate", "cosine_distance", "cosine_similarity", "encode", "grad_check", "lexemes",
    "load_checkpoint", "margin_ranking_loss", "params_hash", "save_checkpoint",
    "weighted_cross_entropy",
]
