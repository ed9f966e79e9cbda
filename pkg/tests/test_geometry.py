import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdflow.generators import (
    make_dumbbell,
    make_icosphere,
    make_perturbed_sphere,
    make_torus,
)
from sdflow.geometry import (
    cotan_laplacian,
    curvature_field,
    dirichlet_energy,
    enclosed_volume,
    integrate,
    lumped_mass,
)
from sdflow.mesh import MeshError, TriangleMesh, rescale, validate


def regular_tetrahedron(edge):
    s = edge / (2.0 * math.sqrt(2.0))
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) * s
    faces = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    mesh = TriangleMesh(verts, faces)
    if enclosed_volume(mesh) < 0:
        mesh = TriangleMesh(verts, faces[:, [0, 2, 1]])
    return mesh


def unit_cube():
    verts = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=float,
    )
    quads = [
        (0, 3, 2, 1),  # bottom, outward -z
        (4, 5, 6, 7),  # top, outward +z
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append([a, b, c])
        faces.append([a, c, d])
    return TriangleMesh(verts, np.array(faces))


def make_slab(n=10, thickness=0.1):
    """Closed thin slab: two triangulated unit-square sheets plus side walls."""
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    sheet = np.column_stack([gx.ravel(), gy.ravel(), np.zeros((n + 1) ** 2)])
    top = sheet + [0.0, 0.0, thickness]
    verts = np.vstack([top, sheet])
    off = (n + 1) ** 2

    def t(i, j):
        return i * (n + 1) + j

    faces = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = t(i, j), t(i + 1, j), t(i + 1, j + 1), t(i, j + 1)
            faces += [[a, b, c], [a, c, d]]  # top, outward +z
            faces += [[off + a, off + c, off + b], [off + a, off + d, off + c]]
    top_faces = [f for f in faces if max(f) < off]
    directed = set()
    for a, b, c in top_faces:
        directed |= {(a, b), (b, c), (c, a)}
    for (u, v) in list(directed):
        if (v, u) not in directed:  # boundary edge of the top sheet
            faces += [[v, u, off + u], [v, off + u, off + v]]
    return TriangleMesh(verts, np.array(faces))


def test_lumped_mass_regular_tetrahedron():
    edge = 1.3
    mesh = regular_tetrahedron(edge)
    mass = lumped_mass(mesh)
    area = math.sqrt(3.0) * edge**2
    assert np.allclose(mass.m, area / 4.0, rtol=1e-12)
    assert mass.total_area == pytest.approx(area, rel=1e-12)


@pytest.mark.parametrize(
    "mesh_fn",
    [
        lambda: make_icosphere(1.0, 2),
        lambda: make_perturbed_sphere(1.0, [(2, 0, 0.1)], subdivisions=2),
        lambda: make_dumbbell(1.0, 0.3, 1.0, n_phi=16, n_rings=24),
        lambda: make_torus(2.0, 0.5, 24, 12),
    ],
)
def test_mass_partitions_area(mesh_fn):
    mass = lumped_mass(mesh_fn())
    assert (mass.m > 0).all()
    assert np.sum(mass.m) == pytest.approx(mass.total_area, rel=1e-12)


def test_icosphere_area_near_sphere():
    mass = lumped_mass(make_icosphere(1.0, 4))
    assert mass.total_area == pytest.approx(4 * math.pi, rel=5e-3)


def test_laplacian_kills_constants():
    lap = cotan_laplacian(make_icosphere(1.0, 3))
    u = np.full(lap.matrix.shape[0], 3.7)
    assert np.abs(lap.matrix @ u).max() < 1e-10


def test_laplacian_psd_random_vectors():
    lap = cotan_laplacian(make_icosphere(1.0, 3))
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = rng.standard_normal(lap.matrix.shape[0])
        assert u @ (lap.matrix @ u) >= -1e-10


@pytest.mark.parametrize("seed", range(50))
def test_laplacian_psd_zero_rowsum_random_meshes(seed):
    l = 2 + seed % 3
    mesh = make_perturbed_sphere(
        1.0, [(l, seed % (l + 1), 0.35)], seed=seed, subdivisions=1
    )
    lap = cotan_laplacian(mesh).matrix
    asym = (lap - lap.T).tocoo()
    assert np.abs(asym.data).max() if asym.nnz else 0.0 < 1e-12
    assert np.abs(np.asarray(lap.sum(axis=1))).max() < 1e-11
    evals = np.linalg.eigvalsh(lap.toarray())
    assert evals.min() > -1e-10


def test_laplacian_linear_functions_harmonic_on_flat_patch():
    slab = make_slab(n=10, thickness=0.05)
    assert validate(slab).is_closed
    lap = cotan_laplacian(slab).matrix
    u = slab.vertices[:, 0]
    residual = lap @ u
    n = 10
    interior = [i * (n + 1) + j for i in range(2, n - 1) for j in range(2, n - 1)]
    assert np.abs(residual[interior]).max() < 1e-10


def test_laplacian_rejects_degenerate_faces():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0.5, 1e-16, 0], [0.5, 0.5, 1]])
    mesh = TriangleMesh(verts, [[0, 1, 2], [0, 2, 3], [1, 3, 2], [0, 3, 1]])
    with pytest.raises(MeshError, match="degenerate"):
        cotan_laplacian(mesh)


def sphere_curvature(subdiv, radius=1.0):
    mesh = make_icosphere(radius, subdiv)
    mass = lumped_mass(mesh)
    return mesh, mass, curvature_field(mesh, mass, cotan_laplacian(mesh))


def test_sphere_mean_curvature():
    _, _, cf = sphere_curvature(4)
    assert cf.H.mean() == pytest.approx(2.0, rel=0.02)
    assert cf.K.mean() == pytest.approx(1.0, rel=0.02)
    assert np.abs(np.linalg.norm(cf.normal, axis=1) - 1.0).max() < 1e-12


def test_sphere_tracefree_below_floor():
    _, _, cf = sphere_curvature(4)
    assert cf.Ao_sq.max() < 1e-2


def test_curvature_exact_scaling():
    _, mass1, cf1 = sphere_curvature(3, 1.0)
    _, mass2, cf2 = sphere_curvature(3, 2.0)
    assert np.abs(cf2.H - cf1.H / 2.0).max() < 1e-10
    assert np.abs(cf2.K - cf1.K / 4.0).max() < 1e-10
    assert np.abs(cf2.Ao_sq - cf1.Ao_sq / 4.0).max() < 1e-10


@pytest.mark.parametrize(
    "mesh_fn,chi",
    [
        (lambda: make_icosphere(1.0, 2), 2),
        (lambda: make_perturbed_sphere(1.0, [(3, 2, 0.2)], subdivisions=3), 2),
        (lambda: make_dumbbell(1.0, 0.2, 1.5, n_phi=20, n_rings=40), 2),
        (lambda: make_torus(2.0, 0.6), 0),
        (lambda: unit_cube(), 2),
    ],
)
def test_gauss_bonnet_exact(mesh_fn, chi):
    mesh = mesh_fn()
    mass = lumped_mass(mesh)
    cf = curvature_field(mesh, mass, cotan_laplacian(mesh))
    total = integrate(cf.K, mass)
    assert abs(total - 2 * math.pi * chi) <= 1e-9 * max(abs(total), 1.0)


def test_pointwise_tracefree_identity():
    mesh = make_perturbed_sphere(1.0, [(2, 0, 0.1)], subdivisions=3)
    mass = lumped_mass(mesh)
    cf = curvature_field(mesh, mass, cotan_laplacian(mesh))
    assert np.abs(cf.Ao_sq - (cf.A_sq - 0.5 * cf.H**2)).max() < 1e-14
    assert (cf.Ao_sq >= 0).all()


def test_integrate_constant_and_identity():
    mesh = make_icosphere(1.0, 3)
    mass = lumped_mass(mesh)
    assert integrate(np.ones(mesh.num_vertices), mass) == pytest.approx(
        mass.total_area, rel=1e-14
    )
    with pytest.raises(ValueError):
        integrate(np.ones(5), mass)


def test_integrate_total_curvature_sphere():
    mesh, mass, cf = sphere_curvature(4)
    assert integrate(cf.A_sq, mass) == pytest.approx(8 * math.pi, rel=0.03)


def test_dirichlet_energy_properties():
    mesh = make_icosphere(1.0, 3)
    lap = cotan_laplacian(mesh)
    u = mesh.vertices[:, 2] ** 2
    const = np.full(mesh.num_vertices, 2.2)
    assert abs(dirichlet_energy(const, lap)) < 1e-12
    assert dirichlet_energy(u, lap) >= 0
    assert dirichlet_energy(u, lap) == pytest.approx(
        dirichlet_energy(u + 5.0, lap), abs=1e-12 * max(dirichlet_energy(u, lap), 1)
    )


def test_dirichlet_energy_of_H_decreases_under_refinement():
    values = []
    for s in (2, 3, 4, 5):
        mesh, mass, cf = sphere_curvature(s)
        values.append(dirichlet_energy(cf.H, cotan_laplacian(mesh)))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_refinement_pointwise_mean_curvature():
    errs = [np.abs(sphere_curvature(s)[2].H - 2.0).max() for s in (2, 3, 4, 5)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_enclosed_volume_cube_and_tetra():
    assert enclosed_volume(unit_cube()) == pytest.approx(1.0, abs=1e-14)
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    faces = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    assert enclosed_volume(TriangleMesh(verts, faces)) == pytest.approx(1 / 6, abs=1e-15)


def test_enclosed_volume_sphere():
    assert enclosed_volume(make_icosphere(1.0, 4)) == pytest.approx(
        4 * math.pi / 3, rel=5e-3
    )


def test_scaling_covariance_suite():
    mesh = make_perturbed_sphere(1.0, [(2, 1, 0.15)], subdivisions=3)
    lam = 2.0
    scaled = rescale(mesh, (0, 0, 0), lam)
    m1, m2 = lumped_mass(mesh), lumped_mass(scaled)
    l1, l2 = cotan_laplacian(mesh), cotan_laplacian(scaled)
    c1 = curvature_field(mesh, m1, l1)
    c2 = curvature_field(scaled, m2, l2)
    rel = lambda a, b: abs(a - b) / max(abs(a), 1e-300)
    assert rel(m2.total_area, lam**2 * m1.total_area) < 1e-10
    assert rel(enclosed_volume(scaled), lam**3 * enclosed_volume(mesh)) < 1e-10
    assert np.abs(c2.H - c1.H / lam).max() < 1e-10
    assert np.abs(c2.K - c1.K / lam**2).max() < 1e-10
    assert rel(integrate(c2.Ao_sq, m2), integrate(c1.Ao_sq, m1)) < 1e-10
    assert rel(dirichlet_energy(c2.H, l2), dirichlet_energy(c1.H, l1) / lam**2) < 1e-10


@settings(max_examples=15, deadline=None)
@given(amp=st.floats(0.01, 0.4), seed=st.integers(0, 10**6))
def test_gauss_bonnet_property(amp, seed):
    mesh = make_perturbed_sphere(1.0, [(2, 1, amp)], seed=seed, subdivisions=1)
    mass = lumped_mass(mesh)
    cf = curvature_field(mesh, mass, cotan_laplacian(mesh))
    assert integrate(cf.K, mass) == pytest.approx(4 * math.pi, rel=1e-9)
