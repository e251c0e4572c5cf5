"""Model service and fine-tuning entrypoints for the hybrid QA pipeline.

Serves the /score (cross-encoder reranking) and /generate (beam-search
seq2seq) wire protocols and trains both models on the pipeline's JSONL
artifacts.
"""

__version__ = "0.1.0"
