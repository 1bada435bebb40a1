"""Dual adversarial learning for paired query/response generation."""
