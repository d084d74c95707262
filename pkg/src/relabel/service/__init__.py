"""Review queue persistence, HTTP service, and the pipeline CLI."""

from .store import Evidence, QueueStore, ReviewItem, review_item_to_json

__all__ = ["Evidence", "QueueStore", "ReviewItem", "review_item_to_json"]
