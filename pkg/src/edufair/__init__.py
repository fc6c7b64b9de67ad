"""Fairness auditing and bias mitigation for binary student-success prediction."""

__version__ = "0.1.0"
