"""Knowledge-memory agent pipeline.

Subsystems: knowledge ingestion, exact inner-product retrieval, contrastive
projection-head training, alpha-mixed inference retrieval, RL-trained
QA/prompt enhancement, and scene composition, all behind pluggable model
backends.
"""

__version__ = "0.1.0"
