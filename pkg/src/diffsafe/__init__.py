"""Closed-loop shared-autonomy driving stack.

A 2D track simulator, two conditional diffusion policies (a long-horizon
behavior predictor and a short-horizon expert copilot), a score-triggered
graduated handover engine, a metric/ablation harness, and a live service for
cockpit clients.
"""

__version__ = "0.1.0"
