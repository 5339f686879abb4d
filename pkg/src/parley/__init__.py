"""parley: conversational decoding, corpus mining, and human-evaluation
toolkit (sampling decoders, repetition filtering, SSA metrics, session
harness, HTTP service)."""

__version__ = "0.1.0"
