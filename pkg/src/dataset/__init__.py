"""ModelNet ingestion, manifests and batch loading."""
