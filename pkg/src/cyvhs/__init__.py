"""Canonical Calabi-Yau variations of Hodge structure over tube domains.

Exact rational construction of the classical families, their characteristic
and fundamental forms, graded Lie algebra cohomology, and a truncated-jet
Maurer-Cartan congruence test.
"""

__version__ = "0.1.0"
