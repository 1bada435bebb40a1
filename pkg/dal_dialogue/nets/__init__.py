from dal_dialogue.nets.config import ModelDims
from dal_dialogue.nets.discriminator import (
    DiscriminatorParams,
    discriminator_step,
    init_discriminator,
    score_pair,
    score_pairs,
)
from dal_dialogue.nets.generator import (
    GeneratorParams,
    Hypothesis,
    beam_decode,
    conditional_log_prob,
    greedy_decode,
    init_generator,
    mle_step,
    sample_batch,
    sample_output,
    sequence_log_probs,
)

__all__ = [
    "DiscriminatorParams",
    "GeneratorParams",
    "Hypothesis",
    "ModelDims",
    "beam_decode",
    "conditional_log_prob",
    "discriminator_step",
    "greedy_decode",
    "init_discriminator",
    "init_generator",
    "mle_step",
    "sample_batch",
    "sample_output",
    "score_pair",
    "score_pairs",
    "sequence_log_probs",
]
