from dal_dialogue.lm.bigram import BigramLM, fit, perplexity, sequence_log_prob

__all__ = ["BigramLM", "fit", "perplexity", "sequence_log_prob"]
