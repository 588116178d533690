"""Team-aware Transformer item recommender for MOBA matches."""

__version__ = "0.1.0"
