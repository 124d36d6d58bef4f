"""duallens: demand-adaptive multimodal RAG with dual visual/textual retrieval.

The pipeline answers image-grounded questions directly when the model already
knows the answer and falls back to web retrieval (image search over detected
regions plus text search over decoupled sub-queries) only when it does not.
"""

__version__ = "0.1.0"
