"""exodus: predict user abandonment after mass moderation interventions.

End-to-end toolkit: ingest raw comment dumps, build labeled cohorts around
an intervention date, extract user-level behavioral features, train and
evaluate a classifier zoo under a leakage-safe pipeline, and explain the
predictions with fused feature-importance scores. A seeded synthetic cohort
generator provides the test substrate.
"""

__version__ = "0.1.0"
