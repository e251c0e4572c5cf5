"""Hybrid open-domain QA over text passages and flattened tables.

Pipeline: BM25 retrieval from two indices, joint reranking, a pluggable
generator that emits direct answers or SQL, SQL execution against the
table store, and a full evaluation suite.
"""

__version__ = "0.1.0"
