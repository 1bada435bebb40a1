from __future__ import annotations

from enum import StrEnum


class TrainMode(StrEnum):
    MLE_ONLY = "mle-only"
    DUAL_ONLY = "dual-only"
    ADV_ONLY = "adv-only"
    DUAL_ADV = "dual-adv"

    @property
    def uses_dual(self) -> bool:
        return self in (TrainMode.DUAL_ONLY, TrainMode.DUAL_ADV)

    @property
    def uses_adversarial(self) -> bool:
        return self in (TrainMode.ADV_ONLY, TrainMode.DUAL_ADV)


class Direction(StrEnum):
    # query -> response
    QR = "qr"
    # response -> query
    RQ = "rq"


class TrainPhase(StrEnum):
    PRETRAIN_GEN = "pretrain-gen"
    PRETRAIN_DISC = "pretrain-disc"
    DAL = "dal"


class DecoderKind(StrEnum):
    GREEDY = "greedy"
    BEAM = "beam"
    MMI_ANTI = "mmi-anti"
    MMI_BIDI = "mmi-bidi"
