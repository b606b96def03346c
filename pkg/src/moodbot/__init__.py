"""Emotion-aware wellbeing bot platform.

Location-based mood inference with personalized tree ensembles,
quadrant-targeted micro-interventions, tone-controlled dialog, a
two-phase study protocol with engagement/equivalence analytics, and a
synthetic cohort simulator for end-to-end verification.
"""

__version__ = "0.1.0"
