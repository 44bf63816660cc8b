"""Numerical tolerances shared by the geometry kernel and the test-suite."""

# a point x is on a hyperplane when |<x,u> - tau| <= ON_PLANE_TOL * (1 + |x|)
ON_PLANE_TOL = 1e-9

# vertices closer than this are the same vertex
VERTEX_DEDUP_TOL = 1e-8

# |u| = 1 check for hyperplane normals
NORMAL_TOL = 1e-12

# default tolerance of general_position_report
GENERAL_POSITION_TOL = 1e-9

# relative tolerance of volume conservation checks
VOLUME_REL_TOL = 1e-6

# slack when testing points against an enclosing ball
BALL_TOL = 1e-9

WINDOW = -1
"""Facet provenance marker for facets lying on the window box."""


def on_plane_tol(norm_x):
    return ON_PLANE_TOL * (1.0 + norm_x)
