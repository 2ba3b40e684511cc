"""Companion tools for the database graph pipeline: contrastive embedding
training, an embedding HTTP service, and collaborative-learning experiments.

Talks to the main pipeline only through its file formats (abstracts,
triplet/split TSVs, the f32le embedding store) and its one-route HTTP
embedding contract.
"""

__version__ = "0.1.0"
