"""Outage-safe amplify-and-forward relay weight design via convex restrictions.

The package builds three convex restrictions of an outage-constrained
relay power minimization (two moment-based, one Bernstein-type), solves
them with a built-in conic interior-point method, extracts rank-one
weights by randomization, and ships a reproducible experiment harness.
"""

__version__ = "0.1.0"
