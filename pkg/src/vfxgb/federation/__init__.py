"""Two-party federated training: protocol, channels, wire format, costs."""

from vfxgb.federation.channel import (
    BaseChannel,
    InProcChannel,
    PassiveServer,
    ProtocolError,
    TcpChannel,
)
from vfxgb.federation.ledger import PHASES, CostLedger, PartyCounters
from vfxgb.federation.messages import (
    Message,
    WireError,
    b64_to_bitmap,
    bitmap_to_b64,
    decode_frame,
    encode_frame,
    read_frame,
)
from vfxgb.federation.parties import (
    MODE_BATCHED,
    MODE_PER_VALUE,
    MODES,
    ActiveParty,
    FederatedSession,
    OverflowAbortError,
    PassiveParty,
    TrainResult,
    TrainSettings,
    federated_predict,
    run_training,
)

__all__ = [
    "ActiveParty",
    "BaseChannel",
    "CostLedger",
    "FederatedSession",
    "InProcChannel",
    "Message",
    "MODE_BATCHED",
    "MODE_PER_VALUE",
    "MODES",
    "OverflowAbortError",
    "PHASES",
    "PartyCounters",
    "PassiveParty",
    "PassiveServer",
    "ProtocolError",
    "TcpChannel",
    "TrainResult",
    "TrainSettings",
    "WireError",
    "b64_to_bitmap",
    "bitmap_to_b64",
    "decode_frame",
    "encode_frame",
    "federated_predict",
    "read_frame",
    "run_training",
]
