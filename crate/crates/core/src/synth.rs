//! Synthetic occluded-ellipse scenes.
//!
//! Objects are placed front to back. Triangles are the nearest layer, then
//! each new ellipse is sampled behind everything placed so far, so its
//! visibility is final the moment it is accepted. When a candidate is too
//! visible a targeted triangle may be added across it, as long as every
//! earlier object stays inside the visibility range.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::VisibilityScale;
use crate::error::{invalid, Error, Result};
use crate::geometry::{aa_box, extend_box_to_square, rasterize, BoxRegion, Ellipse, Grid, GridSpec, Mask};
use crate::metrics::GtRecord;
use crate::quadric::{project, CameraMatrix, DualQuadric};

/// Inclusive `[lo, hi]` range, serialized as a two-element array.
pub type Range<T> = (T, T);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    /// Ellipses per scene.
    pub count: Range<usize>,
    /// Semi-major axis as a fraction `k` of `min(width, height)`.
    pub size_scale: Range<f64>,
    /// Distance of each center from the scene's cluster center, as a
    /// fraction of `min(width, height)`.
    pub center_offset: Range<f64>,
    /// Axes ratio `b / a`.
    pub axes_ratio: Range<f64>,
    /// Accepted visible-area ratio per object.
    pub visibility: Range<f64>,
    /// Random triangles placed before any ellipse.
    pub triangles: Range<usize>,
    /// Extra triangles that may be aimed at a single ellipse.
    pub max_targeted_triangles: usize,
    /// Candidate draws per object, and scene restarts before failing.
    pub max_retries: usize,
    pub seed: u64,
    pub scenes: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            count: (2, 5),
            size_scale: (0.1, 0.25),
            center_offset: (0.0, 0.25),
            axes_ratio: (0.3, 1.0),
            visibility: (0.3, 0.6),
            triangles: (1, 3),
            max_targeted_triangles: 6,
            max_retries: 200,
            seed: 0,
            scenes: 100,
        }
    }
}

fn check_range<T: PartialOrd + Copy + std::fmt::Debug>(name: &str, r: Range<T>, lo: T, hi: T) -> Result<()> {
    if !(r.0 <= r.1 && r.0 >= lo && r.1 <= hi) {
        return invalid(format!("{name} range {r:?} must be non-empty within [{lo:?}, {hi:?}]"));
    }
    Ok(())
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(16..=8192).contains(&self.width) || !(16..=8192).contains(&self.height) {
            return invalid("image size must be within [16, 8192]");
        }
        check_range("count", self.count, 1, 254)?;
        check_range("size_scale", self.size_scale, f64::MIN_POSITIVE, 0.5)?;
        check_range("center_offset", self.center_offset, 0.0, 0.5)?;
        check_range("axes_ratio", self.axes_ratio, f64::MIN_POSITIVE, 1.0)?;
        check_range("visibility", self.visibility, f64::MIN_POSITIVE, 1.0)?;
        check_range("triangles", self.triangles, 0, 1000)?;
        if self.max_retries == 0 {
            return invalid("max_retries must be positive");
        }
        Ok(())
    }

    fn min_side(&self) -> f64 {
        self.width.min(self.height) as f64
    }

    fn pixel_grid(&self) -> GridSpec<f64> {
        GridSpec {
            origin_x: 0.0,
            origin_y: 0.0,
            cell: 1.0,
            cols: self.width,
            rows: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [(f64, f64); 3],
}

impl Triangle {
    /// Closed containment by edge sign tests.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [p0, p1, p2] = self.vertices;
        let side = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
        let (s0, s1, s2) = (side(p0, p1), side(p1, p2), side(p2, p0));
        (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
    }

    pub fn rasterize(&self, grid: &GridSpec<f64>) -> Mask {
        Grid::from_fn(grid.cols, grid.rows, |c, r| {
            let (u, v) = grid.cell_center(c, r);
            self.contains(u, v)
        })
    }
}

/// One emitted object.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub gt: GtRecord,
    /// 0 is the nearest ellipse.
    pub depth: usize,
    /// Regression-time scale `Q_l / E_l` of the visible box.
    pub visibility_scale: f64,
    pub visible_cells: usize,
    pub whole_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedScene {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    /// Objects in output order (a random permutation of depth).
    pub objects: Vec<SceneObject>,
    pub occluders: Vec<Triangle>,
    /// Label map: 0 background, `k` the k-th object (1-based), 255 occluder.
    pub raster: Option<Grid<u8>>,
}

/// Label value for occluder cells.
pub const OCCLUDER_LABEL: u8 = 255;

/// Image id for scene `index`.
pub fn image_id(index: usize) -> String {
    format!("{index:06}")
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream for one scene.
pub fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(index as u64))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: Range<f64>) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        rng.random_range(r.0..=r.1)
    }
}

/// Orientation uniform in `(-pi/2, pi/2]`.
fn sample_theta<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * rng.random::<f64>()
}

fn sample_around<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneConfig, cluster: (f64, f64)) -> Result<Ellipse<f64>> {
    let side = cfg.min_side();
    let a = uniform(rng, cfg.size_scale) * side;
    let b = a * uniform(rng, cfg.axes_ratio);
    let theta = sample_theta(rng);
    let r = uniform(rng, cfg.center_offset) * side;
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let e = Ellipse::new(cluster.0 + r * phi.cos(), cluster.1 + r * phi.sin(), a, b, theta)?;
    // keep the whole ellipse inside the image so no area is lost at the border
    let bx = aa_box(&e);
    let fit = |c: f64, half: f64, size: usize| c.clamp(half, size as f64 - half);
    Ellipse::new(
        fit(e.x(), bx.w() / 2.0, cfg.width),
        fit(e.y(), bx.h() / 2.0, cfg.height),
        a,
        b,
        theta,
    )
}

/// One ellipse with its center anywhere in the image.
pub fn sample_ellipse<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneConfig) -> Result<Ellipse<f64>> {
    cfg.validate()?;
    let cluster = (
        rng.random::<f64>() * cfg.width as f64,
        rng.random::<f64>() * cfg.height as f64,
    );
    sample_around(rng, cfg, cluster)
}

fn random_triangle<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneConfig) -> Triangle {
    let side = cfg.min_side();
    let cx = rng.random::<f64>() * cfg.width as f64;
    let cy = rng.random::<f64>() * cfg.height as f64;
    let base = rng.random::<f64>() * std::f64::consts::TAU;
    let vertices = std::array::from_fn(|k| {
        let ang = base + std::f64::consts::TAU * (k as f64 + rng.random_range(-0.3..0.3)) / 3.0;
        let rad = side * rng.random_range(0.05..0.2);
        (cx + rad * ang.cos(), cy + rad * ang.sin())
    });
    Triangle { vertices }
}

/// Triangle covering the part of `e` beyond the chord at signed distance
/// `d` from its center along direction `phi`.
fn chord_triangle(e: &Ellipse<f64>, phi: f64, d: f64) -> Triangle {
    let (u, v) = ((phi.cos(), phi.sin()), (-phi.sin(), phi.cos()));
    let l = 3.0 * e.a();
    let at = |s: f64, t: f64| (e.x() + s * u.0 + t * v.0, e.y() + s * u.1 + t * v.1);
    Triangle {
        vertices: [at(d, l), at(d, -l), at(d + l, 0.0)],
    }
}

fn and_not(a: &Mask, b: &Mask) -> Mask {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| x && !y).collect();
    Grid::from_vec(a.cols(), a.rows(), data).expect("same shape")
}

fn or_assign(a: &mut Mask, b: &Mask) {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| x || y).collect();
    *a = Grid::from_vec(a.cols(), a.rows(), data).expect("same shape");
}

struct Placed {
    ellipse: Ellipse<f64>,
    whole: Mask,
    visible: Mask,
}

impl Placed {
    fn visibility(&self) -> f64 {
        self.visible.count() as f64 / self.whole.count() as f64
    }
}

fn in_range(v: f64, r: Range<f64>) -> bool {
    v >= r.0 && v <= r.1
}

/// Tight box of the visible cells (cell edges), clipped to the ellipse's
/// axis-aligned box.
fn visible_box(visible: &Mask, e: &Ellipse<f64>) -> Result<BoxRegion<f64>> {
    let (mut c0, mut c1, mut r0, mut r1) = (usize::MAX, 0, usize::MAX, 0);
    for r in 0..visible.rows() {
        for c in 0..visible.cols() {
            if *visible.get(c, r) {
                c0 = c0.min(c);
                c1 = c1.max(c + 1);
                r0 = r0.min(r);
                r1 = r1.max(r + 1);
            }
        }
    }
    if c0 == usize::MAX {
        return invalid("object has no visible cells");
    }
    let bx = aa_box(e);
    let x0 = (c0 as f64).max(bx.x_min());
    let x1 = (c1 as f64).min(bx.x_max());
    let y0 = (r0 as f64).max(bx.y_min());
    let y1 = (r1 as f64).min(bx.y_max());
    BoxRegion::from_corners(x0, y0, x1, y1)
}

fn annotate(image: &str, depth: usize, p: &Placed) -> Result<SceneObject> {
    let vbox = visible_box(&p.visible, &p.ellipse)?;
    let s = VisibilityScale::between(&extend_box_to_square(&vbox), &p.ellipse)
        .map(|s| s.get())
        .unwrap_or(1.0);
    Ok(SceneObject {
        gt: GtRecord::new(image, p.ellipse, Some(vbox), p.visibility())?,
        depth,
        visibility_scale: s,
        visible_cells: p.visible.count(),
        whole_cells: p.whole.count(),
    })
}

fn label_map(width: usize, height: usize, placed: &[Placed], occluders: &Mask, labels: &[u8]) -> Grid<u8> {
    Grid::from_fn(width, height, |c, r| {
        if *occluders.get(c, r) {
            return OCCLUDER_LABEL;
        }
        placed
            .iter()
            .zip(labels)
            .find(|(p, _)| *p.whole.get(c, r))
            .map_or(0, |(_, &l)| l)
    })
}

/// Annotates explicit layers: `ellipses` ordered front to back, all
/// triangles in front of them. No visibility filtering is applied.
pub fn compose_from_layers(
    image: &str,
    width: usize,
    height: usize,
    ellipses: &[Ellipse<f64>],
    triangles: &[Triangle],
    with_raster: bool,
) -> Result<AnnotatedScene> {
    let cfg = SceneConfig {
        width,
        height,
        ..SceneConfig::default()
    };
    cfg.validate()?;
    let grid = cfg.pixel_grid();
    let mut occluders = Grid::filled(width, height, false);
    for t in triangles {
        or_assign(&mut occluders, &t.rasterize(&grid));
    }
    let mut occupied = occluders.clone();
    let mut placed = Vec::with_capacity(ellipses.len());
    for e in ellipses {
        let whole = rasterize(e, &grid)?;
        if whole.count() == 0 {
            return invalid("ellipse covers no cell centers");
        }
        let visible = and_not(&whole, &occupied);
        or_assign(&mut occupied, &whole);
        placed.push(Placed {
            ellipse: *e,
            whole,
            visible,
        });
    }
    let objects = placed
        .iter()
        .enumerate()
        .map(|(depth, p)| annotate(image, depth, p))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = (1..=placed.len()).map(|k| k as u8).collect();
    Ok(AnnotatedScene {
        image_id: image.to_string(),
        width,
        height,
        objects,
        occluders: triangles.to_vec(),
        raster: with_raster.then(|| label_map(width, height, &placed, &occluders, &labels)),
    })
}

/// Outcome of trying to fill one scene.
enum Attempt {
    Done(AnnotatedScene),
    Short(usize),
}

fn try_compose<R: Rng + ?Sized>(rng: &mut R, cfg: &SceneConfig, image: &str, with_raster: bool) -> Result<Attempt> {
    let grid = cfg.pixel_grid();
    let n_tri = rng.random_range(cfg.triangles.0..=cfg.triangles.1);
    let mut triangles: Vec<Triangle> = (0..n_tri).map(|_| random_triangle(rng, cfg)).collect();
    let mut occluders = Grid::filled(cfg.width, cfg.height, false);
    for t in &triangles {
        or_assign(&mut occluders, &t.rasterize(&grid));
    }
    let mut occupied = occluders.clone();
    let n_obj = rng.random_range(cfg.count.0..=cfg.count.1);
    let margin = cfg.min_side() * 0.25;
    let cluster = (
        rng.random_range(margin..=cfg.width as f64 - margin),
        rng.random_range(margin..=cfg.height as f64 - margin),
    );
    let mut placed: Vec<Placed> = Vec::with_capacity(n_obj);
    let mut targeted = 0;

    for _ in 0..n_obj {
        for _ in 0..cfg.max_retries {
            let e = sample_around(rng, cfg, cluster)?;
            let whole = rasterize(&e, &grid)?;
            if whole.count() == 0 {
                continue;
            }
            let visible = and_not(&whole, &occupied);
            let cand = Placed {
                ellipse: e,
                whole,
                visible,
            };
            let vis = cand.visibility();
            if in_range(vis, cfg.visibility) {
                or_assign(&mut occupied, &cand.whole);
                placed.push(cand);
                break;
            }
            if vis > cfg.visibility.1 && targeted < cfg.max_targeted_triangles {
                if let Some(tri) = aim_triangle(rng, cfg, &grid, &cand, &placed) {
                    let tmask = tri.rasterize(&grid);
                    for p in placed.iter_mut() {
                        p.visible = and_not(&p.visible, &tmask);
                    }
                    or_assign(&mut occluders, &tmask);
                    or_assign(&mut occupied, &tmask);
                    triangles.push(tri);
                    targeted += 1;
                    let visible = and_not(&cand.whole, &occupied);
                    let cand = Placed { visible, ..cand };
                    or_assign(&mut occupied, &cand.whole);
                    placed.push(cand);
                    break;
                }
            }
        }
    }
    if placed.len() < cfg.count.0 {
        return Ok(Attempt::Short(placed.len()));
    }

    let mut order: Vec<usize> = (0..placed.len()).collect();
    order.shuffle(rng);
    let mut labels = vec![0u8; placed.len()];
    for (k, &depth) in order.iter().enumerate() {
        labels[depth] = (k + 1) as u8;
    }
    let objects = order
        .iter()
        .map(|&depth| annotate(image, depth, &placed[depth]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Attempt::Done(AnnotatedScene {
        image_id: image.to_string(),
        width: cfg.width,
        height: cfg.height,
        objects,
        occluders: triangles,
        raster: with_raster.then(|| label_map(cfg.width, cfg.height, &placed, &occluders, &labels)),
    }))
}

/// Chooses a chord triangle over `cand` that brings its visibility to a
/// random target in range without pushing any placed object below range.
fn aim_triangle<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SceneConfig,
    grid: &GridSpec<f64>,
    cand: &Placed,
    placed: &[Placed],
) -> Option<Triangle> {
    let target = uniform(rng, cfg.visibility);
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let e = &cand.ellipse;
    let whole = cand.whole.count() as f64;
    let cells: Vec<(f64, f64)> = (0..cand.visible.rows())
        .flat_map(|r| (0..cand.visible.cols()).map(move |c| (c, r)))
        .filter(|&(c, r)| *cand.visible.get(c, r))
        .map(|(c, r)| grid.cell_center(c, r))
        .collect();
    let vis_at = |d: f64| {
        let tri = chord_triangle(e, phi, d);
        cells.iter().filter(|&&(u, v)| !tri.contains(u, v)).count() as f64 / whole
    };
    // visibility grows with d: the chord moves away from the center
    let (mut lo, mut hi) = (-e.a(), e.a());
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if vis_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tri = chord_triangle(e, phi, hi);
    if !in_range(vis_at(hi), cfg.visibility) {
        return None;
    }
    let tmask = tri.rasterize(grid);
    let others_ok = placed.iter().all(|p| {
        let v = and_not(&p.visible, &tmask).count() as f64 / p.whole.count() as f64;
        in_range(v, cfg.visibility)
    });
    others_ok.then_some(tri)
}

/// Generates one scene from its own RNG stream, restarting up to
/// `max_retries` times when too few objects could be placed.
pub fn compose_scene<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SceneConfig,
    image: &str,
    with_raster: bool,
) -> Result<AnnotatedScene> {
    cfg.validate()?;
    let mut best = 0;
    for _ in 0..cfg.max_retries {
        match try_compose(rng, cfg, image, with_raster)? {
            Attempt::Done(scene) => return Ok(scene),
            Attempt::Short(n) => best = best.max(n),
        }
    }
    Err(Error::SceneGenerationFailed {
        image_id: image.to_string(),
        attempts: cfg.max_retries,
        reason: format!(
            "placed at most {best} of the required {} objects with visibility in [{}, {}]",
            cfg.count.0, cfg.visibility.0, cfg.visibility.1
        ),
    })
}

/// Scene `index` of the dataset described by `cfg`.
pub fn generate_scene(cfg: &SceneConfig, index: usize, with_raster: bool) -> Result<AnnotatedScene> {
    let mut rng = scene_rng(cfg.seed, index);
    compose_scene(&mut rng, cfg, &image_id(index), with_raster)
}

/// All `cfg.scenes` scenes, generated in parallel; output order is by index.
pub fn generate_dataset(cfg: &SceneConfig, with_raster: bool) -> Result<Vec<AnnotatedScene>> {
    cfg.validate()?;
    (0..cfg.scenes)
        .into_par_iter()
        .map(|i| generate_scene(cfg, i, with_raster))
        .collect()
}

/// Ground-truth image ellipse of one ellipsoid in each camera.
pub fn project_multiview(
    ellipsoid: &DualQuadric<f64>,
    cameras: &[CameraMatrix<f64>],
) -> Result<Vec<(CameraMatrix<f64>, Ellipse<f64>)>> {
    cameras.iter().map(|c| Ok((*c, project(ellipsoid, c)?))).collect()
}
