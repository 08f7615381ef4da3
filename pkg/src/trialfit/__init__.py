"""Eligibility-criteria parsing, real-world cohort scoring, and what-if
threshold analysis for clinical trial design."""

__version__ = "0.1.0"
