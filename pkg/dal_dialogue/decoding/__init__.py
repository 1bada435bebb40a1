from dal_dialogue.decoding.mmi import DecodeResult, MmiConfig, mmi_anti_decode, mmi_bidi_decode, mmi_bidi_rerank

__all__ = ["DecodeResult", "MmiConfig", "mmi_anti_decode", "mmi_bidi_decode", "mmi_bidi_rerank"]
