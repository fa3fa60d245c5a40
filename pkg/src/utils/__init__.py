"""
Numeric primitives, file helpers and formatters
"""
