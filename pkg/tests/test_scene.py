import numpy as np
import pytest

from simflow.scene import (
    BezierSurface,
    Capsule,
    ColliderSet,
    Emitter,
    SuctionField,
    TissueConfig,
    apply_suction,
    emit_irrigation,
    generate_tissue,
    point_segment_distance,
    query_contact,
    sample_heightfield,
    spawn_fluid_block,
)


def flat_tissue(height=0.0, half=0.075, res=32):
    cfg = TissueConfig(half_extent=half, rim_height=height,
                       height_band=(height, height), resolution=res)
    rng = np.random.default_rng(0)
    return generate_tissue(rng, cfg)


# ----------------------------------------------------------------- tissue

def test_flat_controls_give_flat_heightfield():
    surface, hf = flat_tissue(0.0)
    assert np.allclose(hf.heights, 0.0, atol=1e-15)


def test_corner_equals_corner_control():
    rng = np.random.default_rng(4)
    cfg = TissueConfig()
    surface, hf = generate_tissue(rng, cfg)
    assert np.allclose(surface.point(0, 0), surface.control[0, 0], atol=1e-15)
    assert np.allclose(surface.point(1, 1), surface.control[3, 3], atol=1e-15)
    assert hf.heights[0, 0] == pytest.approx(surface.control[0, 0, 2], abs=1e-12)


def test_cubic_slice_hand_value():
    # control heights (0, 0.01, 0.01, 0) at u=0.5 -> 0.0075 (de Casteljau)
    control = np.zeros((4, 4, 3))
    xs = np.linspace(-1, 1, 4)
    heights = [0.0, 0.01, 0.01, 0.0]
    for i in range(4):
        for j in range(4):
            control[i, j] = (xs[i], xs[j], heights[i])
    s = BezierSurface(control)
    assert s.height(0.5, 0.3) == pytest.approx(0.0075, abs=1e-12)


def test_heightfield_matches_direct_bezier_eval():
    rng = np.random.default_rng(9)
    cfg = TissueConfig(resolution=17)
    surface, hf = generate_tissue(rng, cfg)
    t = np.linspace(0, 1, cfg.resolution)
    for i in range(0, 17, 3):
        for j in range(0, 17, 3):
            direct = surface.point(t[i], t[j])
            assert hf.heights[i, j] == pytest.approx(direct[2], abs=1e-9)
    # bilinear query at exact grid points reproduces samples
    xs = hf.grid_coords()
    got = hf.height_at(xs[5], xs[11])
    assert got == pytest.approx(hf.heights[5, 11], abs=1e-12)


def test_interior_heights_within_band():
    rng = np.random.default_rng(2)
    cfg = TissueConfig(height_band=(0.01, 0.02))
    for _ in range(50):
        surface, _ = generate_tissue(rng, cfg)
        interior = surface.control[1:3, 1:3, 2]
        assert np.all(interior >= 0.01) and np.all(interior <= 0.02)
        border_mask = np.ones((4, 4), dtype=bool)
        border_mask[1:3, 1:3] = False
        assert np.all(surface.control[:, :, 2][border_mask] == cfg.rim_height)


# ----------------------------------------------------------------- spawn/emit

def test_spawn_zero_count():
    pos, vel, col, blood = spawn_fluid_block(
        (0, 0, 0.05), 0, (1, 0, 0), 1.0, 0.0, np.random.default_rng(0))
    assert len(pos) == 0


def test_spawn_perfect_lattice():
    pos, vel, col, blood = spawn_fluid_block(
        (0, 0, 0.05), 64, (0.3, 0, 0), 1.0, 0.0, np.random.default_rng(0),
        spacing=0.01)
    assert len(pos) == 64
    xs = np.unique(np.round(pos[:, 0], 12))
    zs = np.unique(np.round(pos[:, 2], 12))
    assert len(xs) == 4 and len(zs) == 4
    assert np.allclose(np.diff(xs), 0.01)
    assert np.all(pos[:, 2] >= 0.05 - 1e-12)  # stacked above center
    assert np.array_equal(vel, np.zeros((64, 3)))
    assert np.all(blood == 1.0)


def test_emit_inactive_or_active():
    em = Emitter(spawn_rate=5, spawn_speed=0.5)
    rng = np.random.default_rng(1)
    tip = np.array([0.0, 0.0, 0.05])
    axis = np.array([0.0, 0.0, -1.0])
    pos, vel, col, blood = emit_irrigation(em, tip, axis, False, rng)
    assert len(pos) == 0
    pos, vel, col, blood = emit_irrigation(em, tip, axis, True, rng)
    assert len(pos) == 5
    speeds = np.linalg.norm(vel, axis=1)
    assert np.all(np.abs(speeds - 0.5) < 0.1)
    assert np.all(vel[:, 2] < 0)  # along the tool axis
    assert np.array_equal(blood, np.zeros(5))


# ----------------------------------------------------------------- suction

def test_suction_behind_apex_untouched():
    f = SuctionField(apex=(0, 0, 0.05), axis=(0, 0, -1))
    pts = np.array([[0, 0, 0.08]])  # above the apex: negative axis projection
    acc, removed = apply_suction(f, pts)
    assert np.array_equal(acc, np.zeros((1, 3)))
    assert len(removed) == 0


def test_suction_removal_contract():
    f = SuctionField(apex=(0, 0, 0.05), axis=(0, 0, -1), removal_radius=0.02)
    pts = np.array([[0, 0, 0.05 - 0.01]])  # on axis at removal_radius/2
    _, removed = apply_suction(f, pts)
    assert list(removed) == [0]


def test_suction_force_hand_value():
    f = SuctionField(apex=(0, 0, 0.05), axis=(0, 0, -1), strength=60.0,
                     cone_height=0.06, removal_radius=0.02)
    d = 2 * f.removal_radius
    pts = np.array([[0, 0, 0.05 - d]])
    acc, removed = apply_suction(f, pts)
    assert len(removed) == 0
    expected = 60.0 * (1 - d / 0.06)  # linear falloff, hand-evaluated
    assert acc[0] @ np.array([0, 0, 1]) == pytest.approx(expected, rel=1e-12)
    assert acc[0][0] == 0 and acc[0][1] == 0


def test_suction_cone_geometry_randomized():
    rng = np.random.default_rng(3)
    f = SuctionField(apex=(0, 0, 0.04), axis=(0, 0, -1))
    pts = rng.uniform(-0.08, 0.08, size=(500, 3))
    acc, removed = apply_suction(f, pts)
    u = pts - f.apex
    d = np.linalg.norm(u, axis=1)
    proj = u @ f.axis
    inside = (proj > 0) & (d <= f.cone_height) & (proj >= d * np.cos(f.half_angle))
    forced = np.linalg.norm(acc, axis=1) > 0
    assert np.all(inside[forced])  # force only inside the cone
    near = (d <= f.removal_radius) & (proj >= 0)
    assert set(removed.tolist()) == set(np.flatnonzero(near).tolist())


# ----------------------------------------------------------------- collisions

def test_project_below_tissue():
    _, hf = flat_tissue(0.01)
    cs = ColliderSet(half_extent=0.075, heightfield=hf)
    out = cs.project(np.array([[0.0, 0.0, 0.009]]), tol=1e-4)
    assert out[0, 2] == pytest.approx(0.01 + 1e-4, abs=1e-12)


def test_project_outside_wall():
    cs = ColliderSet(half_extent=0.075)
    out = cs.project(np.array([[0.09, -0.2, 0.05]]), tol=1e-4)
    assert out[0, 0] == pytest.approx(0.075 - 1e-4)
    assert out[0, 1] == pytest.approx(-0.075 + 1e-4)


def test_project_out_of_capsule():
    cap = Capsule((0, 0, 0.02), (0, 0, 0.10), radius=0.003)
    cs = ColliderSet(half_extent=0.075, capsule=cap)
    p = np.array([[0.001, 0.0, 0.05]])
    out = cs.project(p, tol=1e-4)
    dist, closest = point_segment_distance(out, cap.p0, cap.p1)
    assert dist[0] == pytest.approx(0.003 + 1e-4, abs=1e-12)
    assert np.allclose(closest[0], [0, 0, 0.05])  # pushed radially


def test_containment_invariant_random_clouds():
    rng = np.random.default_rng(8)
    _, hf = flat_tissue(0.005)
    cap = Capsule((0.01, 0.01, 0.02), (0.01, 0.01, 0.12), radius=0.003)
    cs = ColliderSet(half_extent=0.075, heightfield=hf, capsule=cap)
    for _ in range(20):
        pts = rng.uniform(-0.2, 0.2, size=(200, 3))
        out = cs.project(pts, tol=1e-4)
        assert np.all(np.abs(out[:, :2]) <= 0.075 + 1e-9)
        hz = hf.height_at(out[:, 0], out[:, 1])
        assert np.all(out[:, 2] >= hz + 1e-4 - 1e-9)


# ----------------------------------------------------------------- contact

def brute_force_contact(capsule, hf):
    """Full-surface scan at the same supersampling density as query_contact."""
    from simflow.scene import CONTACT_SUPERSAMPLE

    a = hf.half_extent
    step = 2 * a / ((hf.resolution - 1) * CONTACT_SUPERSAMPLE)
    xs = np.arange(-a, a + step / 2, step)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    gz = hf.height_at(gx.ravel(), gy.ravel())
    pts = np.stack([gx.ravel(), gy.ravel(), gz], axis=1)
    dist, _ = point_segment_distance(pts, capsule.p0, capsule.p1)
    return bool(np.any(dist <= capsule.radius))


def test_contact_above_tissue():
    _, hf = flat_tissue(0.0)
    cap = Capsule((0, 0, 0.05), (0, 0, 0.15), radius=0.003)
    assert query_contact(cap, hf) is False


def test_contact_at_surface_boundary_inclusive():
    _, hf = flat_tissue(0.01)
    cap = Capsule((0, 0, 0.01), (0, 0, 0.15), radius=0.003)  # tip at tissue height
    assert query_contact(cap, hf) is True


def test_contact_below_sloped_patch_matches_brute_force():
    rng = np.random.default_rng(17)
    cfg = TissueConfig(height_band=(0.01, 0.035))
    _, hf = generate_tissue(rng, cfg)
    h_mid = float(hf.height_at(np.array(0.02), np.array(0.01)))
    cap = Capsule((0.02, 0.01, h_mid - 0.001), (0.02, 0.01, 0.15), radius=0.003)
    assert query_contact(cap, hf) is True
    assert query_contact(cap, hf) == brute_force_contact(cap, hf)


def test_contact_matches_brute_force_randomized():
    rng = np.random.default_rng(23)
    cfg = TissueConfig(height_band=(0.005, 0.035), resolution=48)
    _, hf = generate_tissue(rng, cfg)
    for _ in range(50):
        x, y = rng.uniform(-0.07, 0.07, size=2)
        z = rng.uniform(0.0, 0.06)
        cap = Capsule((x, y, z), (x * 0.5, y * 0.5, 0.15), radius=0.003)
        assert query_contact(cap, hf) == brute_force_contact(cap, hf)
