"""Context-based entity synonym detection.

Encodes several usage contexts per entity with an entity-anchored recurrent
encoder, matches the two context sets bilaterally through a bilinear form
with an optional leaky slot for uninformative contexts, aggregates each set
into a global context vector, and scores the pair by cosine similarity.
Training uses siamese or triplet objectives; discovery shortlists candidates
by embedding cosine KNN and reranks them with the trained model.
"""

__version__ = "0.1.0"
