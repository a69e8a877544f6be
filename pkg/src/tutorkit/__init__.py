"""Course-assistant toolkit: corpus ingestion, embedding + exact retrieval,
synthetic QA dataset generation, an expert+RAG inquiry pipeline with
traceable citations, and response-alignment evaluation."""

__version__ = "0.1.0"
