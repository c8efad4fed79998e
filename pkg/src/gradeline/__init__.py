"""Continuous LLM regression evaluation platform.

Stores domain-tagged issues with tests, runs them against model endpoints,
scores outputs with a panel of LLM judges plus human overrides, and reports
per-run, per-domain, and cross-model trends.
"""

__version__ = "0.1.0"
