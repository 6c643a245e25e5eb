"""Polynomial event maps and verified safety maps for smooth controlled dynamics.

Subpackages:

- dapoly: truncated multivariate Taylor polynomial algebra
- interval: interval arithmetic and polynomial range bounding
- flow: adaptive 8(7) propagation generic over floats and polynomials
- eventmap: event detection, time refinement, event-map construction
- ads: adaptive domain splitting driven by truncation-error extrapolation
- controllers: SIREN networks and an analytic smooth controller
- scenarios: rendezvous and interplanetary test dynamics
- cli: verify / mc-check / plot-data pipeline
"""

__version__ = "0.1.0"
