"""
HAR Benchmark - classical classifiers on the UCI smartphone HAR features
"""
__version__ = "1.0.0"
