"""Prediction of vancomycin-associated creatinine elevation in ICU stays."""

__version__ = "0.1.0"
