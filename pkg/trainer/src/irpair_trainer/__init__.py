"""Fine-tuning sidecar for the pair-synthesis pipeline.

Consumes trainer-contract files (line-delimited ``{id, prompt, completion}``),
trains LoRA adapters on a small built-in decoder, and serves checkpoints over
the same OpenAI-compatible wire protocol the pipeline's gateway speaks, so
swapping the mock student for a trained one is a config change.
"""

__version__ = "0.1.0"
