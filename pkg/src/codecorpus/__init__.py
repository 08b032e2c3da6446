"""Code-corpus engineering toolkit: syntax-depth analysis and stratification,
parse-preserving identifier ablations, fixed-length token packing, and a
few-shot logical-inference evaluation harness."""

__version__ = "0.1.0"
