//! Synthetic first-person renderer: pinhole camera, per-pixel voxel ray
//! marching, red target cubes, sky/ground shading, and weather perturbations.

use crate::geom::{yaw_basis, Basis, Vec3};
use crate::raycast::first_hit;
use crate::voxel::{Material, VoxelKey};
use crate::world::{DronePose, Weather, World};
use lnav_core::image::RgbImage;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default square frame resolution in pixels.
pub const DEFAULT_RESOLUTION: usize = 64;
/// Maximum render distance in meters.
pub const RENDER_RANGE: f64 = 100.0;
/// Fog density scale: blend factor is `1 - exp(-distance / FOG_DECAY)`.
pub const FOG_DECAY: f64 = 35.0;
/// Half edge length of a rendered target cube (meters).
pub const TARGET_HALF: f64 = 0.5;

/// Pinhole camera with a 90° horizontal field of view and square aspect
/// (focal length of half the image width), zero pitch and roll.
#[derive(Clone, Copy, Debug)]
pub struct Camera {
    pub position: Vec3,
    pub basis: Basis,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn from_pose(pose: &DronePose, resolution: usize) -> Camera {
        Camera {
            position: pose.position,
            basis: yaw_basis(pose.yaw),
            width: resolution,
            height: resolution,
        }
    }

    /// World-space direction through the center of pixel `(px, py)`.
    pub fn ray(&self, px: usize, py: usize) -> Vec3 {
        let half_w = self.width as f64 / 2.0;
        let half_h = self.height as f64 / 2.0;
        let x_ndc = ((px as f64 + 0.5) - half_w) / half_w;
        let y_ndc = ((py as f64 + 0.5) - half_h) / half_h;
        (self.basis.forward - self.basis.left * x_ndc - self.basis.up * y_ndc)
            .normalized()
            .expect("camera ray cannot be zero")
    }

    /// Project a world point to continuous pixel coordinates. `None` when the
    /// point is not strictly in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let v = p - self.position;
        let f = v.dot(self.basis.forward);
        if f < 1e-9 {
            return None;
        }
        let x_ndc = -v.dot(self.basis.left) / f;
        let y_ndc = -v.dot(self.basis.up) / f;
        Some((
            (x_ndc + 1.0) * self.width as f64 / 2.0 - 0.5,
            (y_ndc + 1.0) * self.height as f64 / 2.0 - 0.5,
        ))
    }
}

/// Clamped inclusive pixel bounding box of a target cube, or `None` when any
/// cube corner is behind the camera or the box misses the image entirely.
pub fn target_pixel_box(
    camera: &Camera,
    center: Vec3,
) -> Option<(usize, usize, usize, usize)> {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for corner in 0..8 {
        let sx = if corner & 1 == 0 { -TARGET_HALF } else { TARGET_HALF };
        let sy = if corner & 2 == 0 { -TARGET_HALF } else { TARGET_HALF };
        let sz = if corner & 4 == 0 { -TARGET_HALF } else { TARGET_HALF };
        let (px, py) = camera.project(center + Vec3::new(sx, sy, sz))?;
        lo = (lo.0.min(px), lo.1.min(py));
        hi = (hi.0.max(px), hi.1.max(py));
    }
    if hi.0 < 0.0 || hi.1 < 0.0 || lo.0 > camera.width as f64 - 1.0 || lo.1 > camera.height as f64 - 1.0
    {
        return None;
    }
    let x0 = lo.0.floor().max(0.0) as usize;
    let y0 = lo.1.floor().max(0.0) as usize;
    let x1 = (hi.0.ceil() as usize).min(camera.width - 1);
    let y1 = (hi.1.ceil() as usize).min(camera.height - 1);
    Some((x0, y0, x1, y1))
}

/// Entry distance and entry-face axis of a ray into an axis-aligned box, or
/// `None` on a miss. Distance 0 with no axis when the origin is inside.
fn ray_aabb(origin: Vec3, dir: Vec3, lo: Vec3, hi: Vec3) -> Option<(f64, Option<usize>)> {
    let o = [origin.x, origin.y, origin.z];
    let d = [dir.x, dir.y, dir.z];
    let l = [lo.x, lo.y, lo.z];
    let h = [hi.x, hi.y, hi.z];
    let mut t_min = 0.0f64;
    let mut t_max = f64::INFINITY;
    let mut axis = None;
    for a in 0..3 {
        if d[a].abs() < 1e-12 {
            if o[a] < l[a] || o[a] > h[a] {
                return None;
            }
            continue;
        }
        let mut t1 = (l[a] - o[a]) / d[a];
        let mut t2 = (h[a] - o[a]) / d[a];
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        if t1 > t_min {
            t_min = t1;
            axis = Some(a);
        }
        t_max = t_max.min(t2);
        if t_max < t_min {
            return None;
        }
    }
    if axis.is_none() {
        // Origin inside the box.
        return Some((0.0, None));
    }
    Some((t_min, axis))
}

fn base_color(material: Material, key: VoxelKey) -> [f64; 3] {
    match material {
        Material::Ground => {
            if (key.i + key.j).rem_euclid(2) == 0 {
                [78.0, 105.0, 52.0]
            } else {
                [96.0, 124.0, 62.0]
            }
        }
        Material::Trunk => [101.0, 67.0, 33.0],
        Material::Canopy => [46.0, 110.0, 44.0],
        Material::Wall => [150.0, 145.0, 140.0],
        Material::Roof => [122.0, 72.0, 62.0],
        Material::Marker => [230.0, 25.0, 25.0],
    }
}

fn face_shade(axis: Option<usize>) -> f64 {
    match axis {
        Some(0) => 0.82,
        Some(1) => 0.68,
        Some(_) => 1.0,
        None => 0.5,
    }
}

fn sky_color(dir: Vec3) -> [f64; 3] {
    let t = ((dir.z + 1.0) / 2.0).clamp(0.0, 1.0);
    let horizon = [168.0, 192.0, 216.0];
    let zenith = [80.0, 128.0, 208.0];
    [
        horizon[0] + (zenith[0] - horizon[0]) * t,
        horizon[1] + (zenith[1] - horizon[1]) * t,
        horizon[2] + (zenith[2] - horizon[2]) * t,
    ]
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// FNV-1a over a byte stream; used to derive per-frame weather seeds
/// deterministically (no process-random hashing).
fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(0x100_0000_01b3);
    }
    state
}

fn weather_seed(world_seed: u64, pose: &DronePose, weather: Weather, frame_index: u64) -> u64 {
    let mut s = fnv1a(0xcbf2_9ce4_8422_2325, &world_seed.to_le_bytes());
    for v in [pose.position.x, pose.position.y, pose.position.z, pose.yaw] {
        s = fnv1a(s, &v.to_bits().to_le_bytes());
    }
    s = fnv1a(s, &weather.code().to_le_bytes());
    fnv1a(s, &frame_index.to_le_bytes())
}

/// Render the first-person frame at a pose. Targets are drawn as red cubes
/// centered on the given points, occluded by world geometry. The output is a
/// pure function of (world, pose, targets, weather, frame index, resolution);
/// rain uses a seed derived from those inputs only.
pub fn render(
    world: &World,
    pose: &DronePose,
    targets: &[Vec3],
    weather: Weather,
    frame_index: u64,
    resolution: usize,
) -> RgbImage {
    let camera = Camera::from_pose(pose, resolution);
    let mut img = RgbImage::new(resolution, resolution);
    let grid = world.grid();
    let fog = matches!(weather, Weather::Fog);
    for py in 0..resolution {
        for px in 0..resolution {
            let dir = camera.ray(px, py);
            // Nearest target cube along this ray, if any.
            let mut cube: Option<(f64, Option<usize>)> = None;
            for t in targets {
                let lo = *t - Vec3::new(TARGET_HALF, TARGET_HALF, TARGET_HALF);
                let hi = *t + Vec3::new(TARGET_HALF, TARGET_HALF, TARGET_HALF);
                if let Some((tc, axis)) = ray_aabb(camera.position, dir, lo, hi) {
                    if tc <= RENDER_RANGE && cube.map_or(true, |(best, _)| tc < best) {
                        cube = Some((tc, axis));
                    }
                }
            }
            let march_limit = cube.map_or(RENDER_RANGE, |(tc, _)| tc);
            let hit = first_hit(grid, camera.position, dir, march_limit);
            let (mut color, dist) = match (hit, cube) {
                (Some(h), _) => {
                    let c = base_color(h.material, h.key);
                    let shade = face_shade(h.axis);
                    ([c[0] * shade, c[1] * shade, c[2] * shade], h.t)
                }
                (None, Some((tc, axis))) => {
                    let c = base_color(Material::Marker, VoxelKey::new(0, 0, 0));
                    let shade = face_shade(axis);
                    ([c[0] * shade, c[1] * shade, c[2] * shade], tc)
                }
                (None, None) => (sky_color(dir), RENDER_RANGE),
            };
            if fog {
                let f = 1.0 - (-dist / FOG_DECAY).exp();
                color = lerp3(color, [160.0, 160.0, 160.0], f);
            }
            img.set(px, py, [
                color[0].clamp(0.0, 255.0) as u8,
                color[1].clamp(0.0, 255.0) as u8,
                color[2].clamp(0.0, 255.0) as u8,
            ]);
        }
    }
    match weather {
        Weather::LightRain => apply_rain(&mut img, world, pose, weather, frame_index, 40, 8.0),
        Weather::HeavyRain => apply_rain(&mut img, world, pose, weather, frame_index, 140, 22.0),
        Weather::Clear | Weather::Fog => {}
    }
    img
}

/// Overlay seeded rain: bright streaks plus additive pixel noise. Streak and
/// noise layout depend only on (world seed, pose, weather, frame index).
fn apply_rain(
    img: &mut RgbImage,
    world: &World,
    pose: &DronePose,
    weather: Weather,
    frame_index: u64,
    streaks: usize,
    noise_amp: f64,
) {
    let seed = weather_seed(world.config().seed, pose, weather, frame_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (img.width, img.height);
    for _ in 0..streaks {
        let x0 = rng.random_range(0..w) as i64;
        let y0 = rng.random_range(0..h) as i64;
        let len = rng.random_range(5..15) as i64;
        let drift: i64 = rng.random_range(-1..=1);
        for step in 0..len {
            let x = x0 + (drift * step) / len.max(1);
            let y = y0 + step;
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                continue;
            }
            let cur = img.get(x as usize, y as usize);
            let mixed = lerp3(
                [cur[0] as f64, cur[1] as f64, cur[2] as f64],
                [205.0, 215.0, 225.0],
                0.55,
            );
            img.set(x as usize, y as usize, [mixed[0] as u8, mixed[1] as u8, mixed[2] as u8]);
        }
    }
    for y in 0..h {
        for x in 0..w {
            let cur = img.get(x, y);
            let mut out = [0u8; 3];
            for (c, o) in cur.iter().zip(out.iter_mut()) {
                let n = rng.random_range(-noise_amp..noise_amp);
                *o = (*c as f64 + n).clamp(0.0, 255.0) as u8;
            }
            img.set(x, y, out);
        }
    }
}

/// Root-mean-square contrast of an image (standard deviation of pixel
/// luminance); used to compare weather severities.
pub fn rms_contrast(img: &RgbImage) -> f64 {
    let n = (img.width * img.height) as f64;
    let mut mean = 0.0;
    let mut lums = Vec::with_capacity(img.width * img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let [r, g, b] = img.get(x, y);
            let lum = 0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64;
            lums.push(lum);
            mean += lum;
        }
    }
    mean /= n;
    (lums.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{Bounds, VoxelGrid};
    use crate::world::{WorldConfig, WorldKind};

    fn ground_world() -> World {
        let bounds = Bounds::new(40, 40, 24);
        let mut grid = VoxelGrid::new(bounds);
        for i in 0..bounds.nx {
            for j in 0..bounds.ny {
                grid.insert(VoxelKey::new(i, j, 0), Material::Ground);
            }
        }
        World::from_parts(
            WorldConfig::new(WorldKind::Forest, Weather::Clear, 77),
            grid,
        )
    }

    fn red_pixels(img: &RgbImage) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..img.height {
            for x in 0..img.width {
                let [r, g, b] = img.get(x, y);
                if r > 90 && g < 60 && b < 60 {
                    out.push((x, y));
                }
            }
        }
        out
    }

    #[test]
    fn target_dead_ahead_projects_to_image_center() {
        let world = ground_world();
        let pose = DronePose::new(Vec3::new(10.5, 20.5, 8.5), 0.0);
        let target = Vec3::new(18.5, 20.5, 8.5);
        let camera = Camera::from_pose(&pose, 64);
        let (px, py) = camera.project(target).unwrap();
        assert!((px - 31.5).abs() < 1e-9, "px {px}");
        assert!((py - 31.5).abs() < 1e-9, "py {py}");
        let img = render(&world, &pose, &[target], Weather::Clear, 0, 64);
        let reds = red_pixels(&img);
        assert!(!reds.is_empty(), "target not rendered");
        let cx = reds.iter().map(|r| r.0 as f64).sum::<f64>() / reds.len() as f64;
        let cy = reds.iter().map(|r| r.1 as f64).sum::<f64>() / reds.len() as f64;
        assert!((cx - px).abs() <= 1.0, "red centroid x {cx} vs projected {px}");
        assert!((cy - py).abs() <= 1.0, "red centroid y {cy} vs projected {py}");
    }

    #[test]
    fn occluded_target_renders_no_red() {
        let world = ground_world();
        let mut grid = world.grid().clone();
        // Wall between camera and target.
        for j in 15..26 {
            for k in 1..16 {
                grid.insert(VoxelKey::new(14, j, k), Material::Wall);
            }
        }
        let world = World::from_parts(*world.config(), grid);
        let pose = DronePose::new(Vec3::new(10.5, 20.5, 8.5), 0.0);
        let target = Vec3::new(18.5, 20.5, 8.5);
        let img = render(&world, &pose, &[target], Weather::Clear, 0, 64);
        assert!(red_pixels(&img).is_empty(), "occluded target must not be visible");
    }

    #[test]
    fn pixel_box_covers_all_red_pixels() {
        let world = ground_world();
        let pose = DronePose::new(Vec3::new(10.5, 20.5, 8.5), 0.3);
        let target = Vec3::new(19.5, 23.5, 9.5);
        let camera = Camera::from_pose(&pose, 64);
        let img = render(&world, &pose, &[target], Weather::Clear, 0, 64);
        let reds = red_pixels(&img);
        assert!(!reds.is_empty());
        let (x0, y0, x1, y1) = target_pixel_box(&camera, target).unwrap();
        for (x, y) in reds {
            assert!(
                x >= x0 && x <= x1 && y >= y0 && y <= y1,
                "red pixel ({x},{y}) outside box ({x0},{y0})-({x1},{y1})"
            );
        }
    }

    #[test]
    fn behind_camera_target_has_no_box() {
        let pose = DronePose::new(Vec3::new(10.0, 10.0, 8.0), 0.0);
        let camera = Camera::from_pose(&pose, 64);
        assert!(target_pixel_box(&camera, Vec3::new(2.0, 10.0, 8.0)).is_none());
    }

    #[test]
    fn fog_strictly_lowers_rms_contrast() {
        let world = World::generate(WorldConfig::new(WorldKind::Neighborhood, Weather::Clear, 5));
        // Down a street corridor: ground, walls at many depths, and sky.
        let pose = DronePose::new(Vec3::new(2.5, 0.5, 4.5), 0.0);
        let clear = render(&world, &pose, &[], Weather::Clear, 0, 64);
        let foggy = render(&world, &pose, &[], Weather::Fog, 0, 64);
        assert!(rms_contrast(&clear) > 5.0, "vantage should show a varied scene");
        assert!(
            rms_contrast(&foggy) < rms_contrast(&clear),
            "fog {} vs clear {}",
            rms_contrast(&foggy),
            rms_contrast(&clear)
        );
    }

    #[test]
    fn rain_is_deterministic_per_frame_and_varies_across_frames() {
        let world = ground_world();
        let pose = DronePose::new(Vec3::new(10.5, 20.5, 8.5), 1.1);
        let a = render(&world, &pose, &[], Weather::HeavyRain, 3, 64);
        let b = render(&world, &pose, &[], Weather::HeavyRain, 3, 64);
        assert_eq!(a.data, b.data, "same frame index must render identically");
        let c = render(&world, &pose, &[], Weather::HeavyRain, 4, 64);
        assert_ne!(a.data, c.data, "different frame index must differ");
        let d = render(&world, &pose, &[], Weather::LightRain, 3, 64);
        assert_ne!(a.data, d.data, "weather level changes the frame");
    }

    #[test]
    fn sky_has_vertical_gradient() {
        let world = ground_world();
        // Camera high up looking level: top rows are zenith-ish, middle rows
        // horizon-ish.
        let pose = DronePose::new(Vec3::new(20.5, 20.5, 20.5), 0.0);
        let img = render(&world, &pose, &[], Weather::Clear, 0, 64);
        let top = img.get(32, 0);
        let mid = img.get(32, 30);
        assert!(top[2] > top[0], "sky should be blue");
        assert!(mid[0] > top[0], "horizon brighter in red than zenith");
    }

    #[test]
    fn ray_aabb_handles_inside_miss_and_entry_axis() {
        let lo = Vec3::new(1.0, 1.0, 1.0);
        let hi = Vec3::new(2.0, 2.0, 2.0);
        // Inside.
        let r = ray_aabb(Vec3::new(1.5, 1.5, 1.5), Vec3::new(1.0, 0.0, 0.0), lo, hi);
        assert_eq!(r, Some((0.0, None)));
        // Entry through the -x face.
        let (t, axis) =
            ray_aabb(Vec3::new(0.0, 1.5, 1.5), Vec3::new(1.0, 0.0, 0.0), lo, hi).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(axis, Some(0));
        // Clean miss.
        assert!(ray_aabb(Vec3::new(0.0, 3.5, 1.5), Vec3::new(1.0, 0.0, 0.0), lo, hi).is_none());
    }
}
