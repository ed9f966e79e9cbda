"""Numerical laboratory for surface diffusion flow on closed triangle meshes.

Submodules:
    mesh        triangle mesh container, validation, OFF/OBJ I/O
    generators  parametric initial data (icospheres, perturbed spheres,
                dumbbells, ellipsoids, tori)
    geometry    lumped mass, cotangent Laplacian, curvature fields, integrals
    flow        explicit and semi-implicit time steppers and the run loop
    monitors    per-step diagnostics, monotonicity/dissipation audits,
                decay fits, concentration quantity
    blowup      concentration-event detection and parabolic frame rescaling
    runio       run configs, diagnostics CSV, snapshots, summaries
    cli         command-line front end (gen / run / analyze / blowup)
"""

__version__ = "0.1.0"
