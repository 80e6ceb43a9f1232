"""Modeling toolkit for the academic faculty hiring market.

Provides data ingestion for hiring networks, minimum-violation prestige
ranking, topic-normalized productivity scores, a stochastic candidate-to-
opening matching model with weight fitting, structural model checking, and
counterfactual gender-balance analyses.
"""

__version__ = "0.1.0"
