"""Periodic rays, linear stability and dynamical zeta functions of open
billiards with strictly convex obstacles.

Modules: ``geometry`` (scenes, billiard map), ``symbolic`` (words),
``orbit`` (periodic rays), ``stability`` (linearised return maps),
``database`` (orbit store), ``zeta`` (series, cycle expansion, zeros),
``probe`` (length-spectrum windows), ``cli``.
"""

__version__ = "0.1.0"
