"""
Numerical core of the laboratory.

The modules here know nothing about Django; they operate on numpy arrays
and frozen dataclasses and draw randomness only from generators passed in
by the caller (see `streams`).
"""
