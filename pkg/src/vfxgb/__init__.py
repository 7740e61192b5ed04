"""Vertically federated XGBoost with batched Paillier homomorphic encryption.

Two parties train a shared boosted-tree model: the active party holds the
labels (and some features), the passive party holds only features.  Per-tree
gradients travel encrypted; the batch codec packs each (g, h) pair into a
single Paillier plaintext so the active party encrypts once per instance
instead of twice.
"""

from vfxgb.batch_codec import BatchConfig, BatchedPlaintext, DecodedSum
from vfxgb.paillier import keygen, encrypt, decrypt, add_ciphertexts
from vfxgb.xgb_core import TrainParams, BoostedModel, train_centralized
from vfxgb.federation import FederatedSession, run_training, CostLedger

__version__ = "0.1.0"

__all__ = [
    "BatchConfig",
    "BatchedPlaintext",
    "DecodedSum",
    "keygen",
    "encrypt",
    "decrypt",
    "add_ciphertexts",
    "TrainParams",
    "BoostedModel",
    "train_centralized",
    "FederatedSession",
    "run_training",
    "CostLedger",
    "__version__",
]
