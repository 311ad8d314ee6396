"""entroflow: log-Sobolev functionals, their minimizers, and entropy audits
for Ricci flow on rotationally symmetric asymptotically flat manifolds."""

__version__ = "0.1.0"

from . import errors, fdiff, geometry, profiles  # noqa: F401
