"""Joint topic and ordered-intent modeling with collapsed Gibbs sampling."""

__version__ = "0.1.0"
