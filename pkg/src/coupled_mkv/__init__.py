"""
Numerics for coupled two-species McKean-Vlasov systems.
"""

__version__ = "0.1.0"
