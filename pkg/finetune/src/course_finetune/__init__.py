"""Desk-scale LoRA fine-tuning and hyperparameter-search harness: a small
stand-in decoder, adapter-only training on chat-templated QA pairs, and a
bounded random search."""

__version__ = "0.1.0"
