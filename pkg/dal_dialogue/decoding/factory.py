from __future__ import annotations

from collections.abc import Callable

from dal_dialogue.decoding.mmi import MmiConfig, mmi_anti_decode, mmi_bidi_decode
from dal_dialogue.nets.generator import beam_decode, greedy_decode
from dal_dialogue.states import DecoderKind
from dal_dialogue.text.vocab import TokenSeq
from dal_dialogue.training.model import DalModel

TokenDecoder = Callable[[TokenSeq], TokenSeq]


def make_decoder(
    kind: DecoderKind,
    model: DalModel,
    mmi: MmiConfig,
    max_len: int,
    *,
    beam_size: int | None = None,
) -> TokenDecoder:
    """Query -> response decoder over the generators of ``model``."""

    fwd = model.gen_qr
    kind = DecoderKind(kind)
    if kind == DecoderKind.GREEDY:
        return lambda q: greedy_decode(fwd, q, max_len)
    if kind == DecoderKind.BEAM:
        width = beam_size or mmi.bidi_nbest
        return lambda q: beam_decode(fwd, q, width, max_len)[0].tokens
    if kind == DecoderKind.MMI_ANTI:
        _, lm_r = model.lms()
        return lambda q: mmi_anti_decode(fwd, lm_r, mmi, q, max_len)
    return lambda q: mmi_bidi_decode(fwd, model.gen_rq, mmi, q, max_len).tokens


def make_reverse_decoder(model: DalModel, max_len: int) -> TokenDecoder:
    """Response -> query greedy decoder (the dual task)."""

    return lambda r: greedy_decode(model.gen_rq, r, max_len)
