"""Test suite for RAG Memory."""
