"""Symplectic billiards in ellipses and radially deformed ellipses."""
from .errors import BilliardError, BracketError, ConvergenceError, DomainError, GeometryError
from .geometry import AffinePlaneMap, DeformationFn, DeformedCurve, EllipseSpec, c1_norm, normalized_area
from .dynamics import PhasePoint, billiard_step, iterate_map, rotation_number
from .orbits import PeriodicOrbit, find_periodic_orbit, orbit_action, solve_chain
from .fitting import closest_ellipse, fit_ellipse, reexpress

__version__ = "0.1.0"
