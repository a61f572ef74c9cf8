//! Domains, structured point sets, boundary sampling and residual-driven
//! rejection sampling.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Points are stored with two coordinates; one-dimensional sets keep `y = 0`.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval {
        a: f64,
        b: f64,
    },
    Box2D {
        lo: Point,
        hi: Point,
    },
    /// The box `[lo, hi]` with the quadrant `{x <= corner.x, y <= corner.y}` removed.
    LShape {
        lo: Point,
        hi: Point,
        corner: Point,
    },
    Disk {
        center: Point,
        radius: f64,
    },
}

impl Domain {
    /// `(-1, 1)^2` minus `(-1, 0]^2`.
    pub fn standard_l_shape() -> Self {
        Domain::LShape {
            lo: [-1.0, -1.0],
            hi: [1.0, 1.0],
            corner: [0.0, 0.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Domain::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Domain::Box2D { lo, hi } | Domain::LShape { lo, hi, .. } => (lo, hi),
            Domain::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Indicator of the open domain.
    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Domain::Interval { a, b } => p[0] > a && p[0] < b,
            Domain::Box2D { lo, hi } => {
                p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1]
            }
            Domain::LShape { lo, hi, corner } => {
                p[0] > lo[0]
                    && p[0] < hi[0]
                    && p[1] > lo[1]
                    && p[1] < hi[1]
                    && !(p[0] <= corner[0] && p[1] <= corner[1])
            }
            Domain::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy < radius * radius
            }
        }
    }

    /// Indicator of the closure.
    pub fn contains_closed(&self, p: &Point) -> bool {
        match *self {
            Domain::Interval { a, b } => p[0] >= a && p[0] <= b,
            Domain::Box2D { lo, hi } => {
                p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
            }
            Domain::LShape { lo, hi, corner } => {
                p[0] >= lo[0]
                    && p[0] <= hi[0]
                    && p[1] >= lo[1]
                    && p[1] <= hi[1]
                    && !(p[0] < corner[0] && p[1] < corner[1])
            }
            Domain::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Length (1D) or area (2D).
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => (b - a).max(0.0),
            Domain::Box2D { lo, hi } => ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(0.0),
            Domain::LShape { lo, hi, corner } => ((hi[0] - lo[0]) * (hi[1] - lo[1])
                - (corner[0] - lo[0]) * (corner[1] - lo[1]))
                .max(0.0),
            Domain::Disk { radius, .. } => PI * radius * radius,
        }
    }

    /// Boundary measure: point count in 1D, perimeter in 2D.
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            Domain::Interval { .. } => 2.0,
            Domain::Disk { radius, .. } => 2.0 * PI * radius,
            _ => polygon_perimeter(&self.polygon()),
        }
    }

    /// Counter-clockwise vertices of polygonal domains.
    fn polygon(&self) -> Vec<Point> {
        match *self {
            Domain::Box2D { lo, hi } => vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]],
            Domain::LShape { lo, hi, corner } => vec![
                [corner[0], lo[1]],
                [hi[0], lo[1]],
                hi,
                [lo[0], hi[1]],
                [lo[0], corner[1]],
                corner,
            ],
            _ => Vec::new(),
        }
    }
}

fn polygon_perimeter(v: &[Point]) -> f64 {
    (0..v.len())
        .map(|i| {
            let (p, q) = (v[i], v[(i + 1) % v.len()]);
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .sum()
}

static NEXT_POINT_SET_ID: AtomicU64 = AtomicU64::new(1);

/// An immutable, cheaply cloned collection of points. Each construction gets a
/// fresh id (shared by clones) so evaluation caches can key on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    points: Arc<Vec<Point>>,
    id: u64,
}

impl PointSet {
    pub fn new(dim: usize, points: Vec<Point>) -> Self {
        assert!(
            dim == 1 || dim == 2,
            "only 1D and 2D point sets are supported"
        );
        Self {
            dim,
            points: Arc::new(points),
            id: NEXT_POINT_SET_ID.fetch_add(1, Ordering::Relaxed),
        }
    }

    pub fn from_1d(xs: &[f64]) -> Self {
        Self::new(1, xs.iter().map(|&x| [x, 0.0]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Coordinates of point `i` as a slice of length `dim`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }

    pub fn concat(&self, other: &PointSet) -> PointSet {
        assert_eq!(self.dim, other.dim);
        let mut points = self.points.to_vec();
        points.extend_from_slice(&other.points);
        PointSet::new(self.dim, points)
    }
}

/// Boundary points with their outward unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    pub points: PointSet,
    pub normals: Vec<Point>,
}

impl BoundarySet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            points: PointSet::new(dim, Vec::new()),
            normals: Vec::new(),
        }
    }
}

/// Keeps `count` points spread evenly through `pts`.
fn strided(mut pts: Vec<Point>, count: usize) -> Vec<Point> {
    let len = pts.len();
    if len == count {
        return pts;
    }
    let picked: Vec<Point> = (0..count).map(|k| pts[k * len / count]).collect();
    pts.clear();
    picked
}

fn cell_centered_grid(lo: Point, hi: Point, nx: usize, ny: usize) -> impl Iterator<Item = Point> {
    let hx = (hi[0] - lo[0]) / nx as f64;
    let hy = (hi[1] - lo[1]) / ny as f64;
    (0..nx).flat_map(move |i| {
        (0..ny).map(move |j| [lo[0] + (i as f64 + 0.5) * hx, lo[1] + (j as f64 + 0.5) * hy])
    })
}

/// Equidistant interior points: cell-centered tensor grids for intervals,
/// boxes and L-shapes; a cell-centered polar grid for disks.
pub fn uniform_interior(domain: &Domain, count: usize) -> Result<PointSet> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "uniform_interior needs at least one point".into(),
        ));
    }
    if !(domain.measure() > 0.0) {
        return Err(Error::EmptyDomain);
    }
    let points = match *domain {
        Domain::Interval { a, b } => {
            let h = (b - a) / count as f64;
            (0..count)
                .map(|i| [a + (i as f64 + 0.5) * h, 0.0])
                .collect()
        }
        Domain::Disk { center, radius } => {
            let n = (count as f64).sqrt().ceil() as usize;
            let pts: Vec<Point> = (0..n)
                .flat_map(|i| {
                    let r = radius * (i as f64 + 0.5) / n as f64;
                    (0..n).map(move |j| {
                        let t = 2.0 * PI * j as f64 / n as f64;
                        [center[0] + r * t.cos(), center[1] + r * t.sin()]
                    })
                })
                .collect();
            strided(pts, count)
        }
        Domain::Box2D { .. } | Domain::LShape { .. } => {
            let (lo, hi) = domain.bounding_box();
            let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
            let mut n = (count as f64 * box_area / domain.measure()).sqrt().ceil() as usize;
            loop {
                let pts: Vec<Point> = cell_centered_grid(lo, hi, n, n)
                    .filter(|p| domain.contains(p))
                    .collect();
                if pts.len() >= count {
                    break strided(pts, count);
                }
                if n > 1 << 16 {
                    return Err(Error::EmptyDomain);
                }
                n += 1;
            }
        }
    };
    Ok(PointSet::new(domain.dim(), points))
}

/// Vertex-type interior grid with an odd number of cells per axis, so its
/// points never coincide with the cell-centered training points of
/// [`uniform_interior`] on the same box. Used for norms and estimators.
pub fn validation_interior(domain: &Domain, count: usize) -> Result<PointSet> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "validation grid needs at least one point".into(),
        ));
    }
    let points: Vec<Point> = match *domain {
        Domain::Interval { a, b } => {
            let n = count + count % 2;
            (1..=n)
                .map(|i| [a + (b - a) * i as f64 / (n + 1) as f64, 0.0])
                .collect()
        }
        Domain::Disk { center, radius } => {
            let n = (count as f64).sqrt().ceil() as usize;
            (0..n)
                .flat_map(|i| {
                    let r = radius * (i as f64 + 0.5) / n as f64;
                    (0..n).map(move |j| {
                        let t = 2.0 * PI * (j as f64 + 0.5) / n as f64;
                        [center[0] + r * t.cos(), center[1] + r * t.sin()]
                    })
                })
                .collect()
        }
        Domain::Box2D { .. } | Domain::LShape { .. } => {
            let (lo, hi) = domain.bounding_box();
            let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
            let mut n = (count as f64 * box_area / domain.measure()).sqrt().ceil() as usize;
            if n % 2 == 1 {
                n += 1;
            }
            let at = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (n + 1) as f64;
            (1..=n)
                .flat_map(|i| (1..=n).map(move |j| [at(0, i), at(1, j)]))
                .filter(|p| domain.contains(p))
                .collect()
        }
    };
    if points.is_empty() {
        return Err(Error::EmptyDomain);
    }
    Ok(PointSet::new(domain.dim(), points))
}

/// Arc-length equidistant boundary points with outward normals. Polygon
/// points sit at half-spacing offsets so corners are never sampled.
pub fn boundary_points(domain: &Domain, count: usize) -> Result<BoundarySet> {
    match *domain {
        Domain::Interval { a, b } => {
            if count != 2 {
                return Err(Error::InvalidArgument(format!(
                    "an interval has exactly 2 boundary points, {count} requested"
                )));
            }
            Ok(BoundarySet {
                points: PointSet::new(1, vec![[a, 0.0], [b, 0.0]]),
                normals: vec![[-1.0, 0.0], [1.0, 0.0]],
            })
        }
        _ if count < 2 => Err(Error::InvalidArgument(
            "at least 2 boundary points required".into(),
        )),
        Domain::Disk { center, radius } => {
            let (points, normals) = (0..count)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / count as f64;
                    let (s, c) = t.sin_cos();
                    ([center[0] + radius * c, center[1] + radius * s], [c, s])
                })
                .unzip();
            Ok(BoundarySet {
                points: PointSet::new(2, points),
                normals,
            })
        }
        Domain::Box2D { .. } | Domain::LShape { .. } => {
            let v = domain.polygon();
            let perimeter = polygon_perimeter(&v);
            let h = perimeter / count as f64;
            let mut points = Vec::with_capacity(count);
            let mut normals = Vec::with_capacity(count);
            let mut edge = 0;
            let mut edge_start = 0.0;
            for k in 0..count {
                let s = (k as f64 + 0.5) * h;
                loop {
                    let (p, q) = (v[edge], v[(edge + 1) % v.len()]);
                    let len = (q[0] - p[0]).hypot(q[1] - p[1]);
                    if s <= edge_start + len || edge == v.len() - 1 {
                        let t = ((s - edge_start) / len).clamp(0.0, 1.0);
                        let d = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
                        points.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                        normals.push([d[1], -d[0]]);
                        break;
                    }
                    edge_start += len;
                    edge += 1;
                }
            }
            Ok(BoundarySet {
                points: PointSet::new(2, points),
                normals,
            })
        }
    }
}

/// Cell-centered grid with `per_axis` points per dimension over the bounding
/// box, restricted to the open domain. Rejection-sampling candidates come
/// from here.
pub fn candidate_grid(domain: &Domain, per_axis: usize) -> Result<PointSet> {
    let (lo, hi) = domain.bounding_box();
    let points: Vec<Point> = match domain {
        Domain::Interval { a, b } => {
            let h = (b - a) / per_axis as f64;
            (0..per_axis)
                .map(|i| [a + (i as f64 + 0.5) * h, 0.0])
                .collect()
        }
        _ => cell_centered_grid(lo, hi, per_axis, per_axis)
            .filter(|p| domain.contains(p))
            .collect(),
    };
    if points.is_empty() {
        return Err(Error::EmptyDomain);
    }
    Ok(PointSet::new(domain.dim(), points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Uniform,
    Polar,
}

/// Fine grid used for error metrics and field output: an endpoint-inclusive
/// equidistant grid (restricted to the closed domain), or for disks a polar
/// grid that is cell-centered in the radius so the origin is never hit.
#[derive(Debug, Clone)]
pub struct EvaluationGrid {
    pub points: PointSet,
    pub kind: GridKind,
}

pub fn evaluation_grid(domain: &Domain, per_axis: usize) -> EvaluationGrid {
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64;
    match *domain {
        Domain::Interval { a, b } => EvaluationGrid {
            points: PointSet::new(1, (0..per_axis).map(|i| [lin(a, b, i), 0.0]).collect()),
            kind: GridKind::Uniform,
        },
        Domain::Disk { center, radius } => {
            let pts = (0..per_axis)
                .flat_map(|i| {
                    let r = radius * (i as f64 + 0.5) / per_axis as f64;
                    (0..per_axis).map(move |j| {
                        let t = 2.0 * PI * j as f64 / per_axis as f64;
                        [center[0] + r * t.cos(), center[1] + r * t.sin()]
                    })
                })
                .collect();
            EvaluationGrid {
                points: PointSet::new(2, pts),
                kind: GridKind::Polar,
            }
        }
        Domain::Box2D { lo, hi } | Domain::LShape { lo, hi, .. } => {
            let pts = (0..per_axis)
                .flat_map(|i| {
                    (0..per_axis).map(move |j| [lin(lo[0], hi[0], i), lin(lo[1], hi[1], j)])
                })
                .filter(|p| domain.contains_closed(p))
                .collect();
            EvaluationGrid {
                points: PointSet::new(2, pts),
                kind: GridKind::Uniform,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub points: PointSet,
    /// The density vanished on every candidate; points were drawn uniformly.
    pub uniform_fallback: bool,
    pub draws: usize,
}

/// Draws per requested point before sampling gives up.
pub const MAX_DRAWS_PER_POINT: usize = 1_000_000;

/// Rejection sampling with density `|density|` over a candidate grid: a
/// uniformly drawn candidate is accepted when `|density(x)| >= r`,
/// `r ~ U(0, M]`, with `M` the maximum over the grid.
pub fn rejection_sample<R: Rng + ?Sized>(
    density: impl Fn(&Point) -> f64,
    domain: &Domain,
    count: usize,
    candidates: &PointSet,
    rng: &mut R,
) -> Result<SampleOutcome> {
    let weights: Vec<f64> = candidates.points().iter().map(&density).collect();
    rejection_sample_tabulated(&weights, domain, count, candidates, rng)
}

/// [`rejection_sample`] with the density already evaluated on the candidates.
pub fn rejection_sample_tabulated<R: Rng + ?Sized>(
    weights: &[f64],
    domain: &Domain,
    count: usize,
    candidates: &PointSet,
    rng: &mut R,
) -> Result<SampleOutcome> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "rejection sampling needs N >= 1".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate grid".into()));
    }
    if weights.len() != candidates.len() {
        return Err(Error::Dimension("density values vs candidate grid".into()));
    }
    let pts = candidates.points();
    let weight = |i: usize| -> f64 {
        let w = weights[i].abs();
        if w.is_finite() && domain.contains(&pts[i]) {
            w
        } else {
            0.0
        }
    };
    let max = (0..pts.len()).map(weight).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    let limit = MAX_DRAWS_PER_POINT.saturating_mul(count);
    let uniform_fallback = !(max > 0.0);
    while out.len() < count {
        if draws >= limit {
            return Err(Error::SamplingExhausted(limit));
        }
        draws += 1;
        let i = rng.random_range(0..pts.len());
        if uniform_fallback {
            if domain.contains(&pts[i]) {
                out.push(pts[i]);
            }
            continue;
        }
        let r = max * (1.0 - rng.random::<f64>());
        if weight(i) >= r {
            out.push(pts[i]);
        }
    }
    Ok(SampleOutcome {
        points: PointSet::new(candidates.dim(), out),
        uniform_fallback,
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn interval_interior_is_cell_centered() {
        let p = uniform_interior(&Domain::Interval { a: -1.0, b: 1.0 }, 4).unwrap();
        let xs: Vec<f64> = p.points().iter().map(|q| q[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(p.point(0).len(), 1);
    }

    #[test]
    fn box_interior_two_by_two() {
        let d = Domain::Box2D {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        };
        let p = uniform_interior(&d, 4).unwrap();
        assert_eq!(
            p.points(),
            &[[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]
        );
        assert_eq!(uniform_interior(&d, 5000).unwrap().len(), 5000);
    }

    #[test]
    fn l_shape_interior_respects_indicator() {
        let d = Domain::standard_l_shape();
        let p = uniform_interior(&d, 1000).unwrap();
        assert_eq!(p.len(), 1000);
        assert!(p.points().iter().all(|q| d.contains(q)));
        assert!((d.measure() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn disk_interior_is_polar_and_avoids_origin() {
        let d = Domain::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        };
        let p = uniform_interior(&d, 400).unwrap();
        assert_eq!(p.len(), 400);
        assert!(p
            .points()
            .iter()
            .all(|q| d.contains(q) && q[0].hypot(q[1]) > 0.0));
    }

    #[test]
    fn empty_domain_is_an_error() {
        assert!(matches!(
            uniform_interior(&Domain::Interval { a: 1.0, b: 1.0 }, 3),
            Err(Error::EmptyDomain)
        ));
    }

    #[test]
    fn boundary_examples() {
        let b = boundary_points(&Domain::Interval { a: -1.0, b: 1.0 }, 2).unwrap();
        assert_eq!(b.points.points(), &[[-1.0, 0.0], [1.0, 0.0]]);
        assert!(boundary_points(&Domain::Interval { a: -1.0, b: 1.0 }, 3).is_err());

        let disk = boundary_points(
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            4,
        )
        .unwrap();
        for (k, p) in disk.points.points().iter().enumerate() {
            let t = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            assert!((t - k as f64 * PI / 2.0).abs() < 1e-12);
        }

        let sq = boundary_points(
            &Domain::Box2D {
                lo: [-1.0, -1.0],
                hi: [1.0, 1.0],
            },
            8,
        )
        .unwrap();
        let expected = [
            [-0.5, -1.0],
            [0.5, -1.0],
            [1.0, -0.5],
            [1.0, 0.5],
            [0.5, 1.0],
            [-0.5, 1.0],
            [-1.0, 0.5],
            [-1.0, -0.5],
        ];
        for (p, e) in sq.points.points().iter().zip(expected) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12);
        }
        // consecutive arc-length spacing is 1
        let pts = sq.points.points();
        for k in 0..8 {
            let (p, q) = (pts[k], pts[(k + 1) % 8]);
            let d = (q[0] - p[0]).abs() + (q[1] - p[1]).abs();
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn l_shape_boundary_normals() {
        let d = Domain::standard_l_shape();
        let b = boundary_points(&d, 400).unwrap();
        for (p, n) in b.points.points().iter().zip(&b.normals) {
            assert!(d.contains_closed(p) && !d.contains(p));
            // stepping outward leaves the domain, stepping inward enters it
            let out = [p[0] + 1e-6 * n[0], p[1] + 1e-6 * n[1]];
            let inw = [p[0] - 1e-6 * n[0], p[1] - 1e-6 * n[1]];
            assert!(!d.contains(&out) && d.contains(&inw), "{p:?} {n:?}");
        }
    }

    #[test]
    fn zero_density_region_never_accepted() {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let grid = candidate_grid(&d, 1000).unwrap();
        let mut rng = stream(3, 0, Purpose::Collocation, 0);
        let s = rejection_sample(
            |p| if p[0] < 0.5 { 1.0 } else { 0.0 },
            &d,
            100,
            &grid,
            &mut rng,
        )
        .unwrap();
        assert_eq!(s.points.len(), 100);
        assert!(s.points.points().iter().all(|p| p[0] > 0.0 && p[0] < 0.5));
    }

    #[test]
    fn symmetric_density_has_centered_mean() {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let grid = candidate_grid(&d, 1000).unwrap();
        let mut rng = stream(5, 0, Purpose::Collocation, 0);
        let s = rejection_sample(|p| (PI * p[0]).sin().abs(), &d, 10_000, &grid, &mut rng).unwrap();
        let mean = s.points.points().iter().map(|p| p[0]).sum::<f64>() / 1e4;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn vanishing_density_falls_back_to_uniform() {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let grid = candidate_grid(&d, 100).unwrap();
        let mut rng = stream(5, 0, Purpose::Collocation, 0);
        let s = rejection_sample(|_| 0.0, &d, 50, &grid, &mut rng).unwrap();
        assert!(s.uniform_fallback);
        assert_eq!(s.points.len(), 50);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = Domain::standard_l_shape();
        let grid = candidate_grid(&d, 200).unwrap();
        let draw = |seed| {
            let mut rng = stream(seed, 2, Purpose::BasePoints, 0);
            rejection_sample(|p| p[0] * p[1], &d, 300, &grid, &mut rng)
                .unwrap()
                .points
        };
        assert_eq!(draw(9).points(), draw(9).points());
        assert_ne!(draw(9).points(), draw(10).points());
    }

    #[test]
    fn evaluation_grid_sizes() {
        assert_eq!(
            evaluation_grid(&Domain::Interval { a: 0.0, b: 1.0 }, 1000)
                .points
                .len(),
            1000
        );
        let sq = evaluation_grid(
            &Domain::Box2D {
                lo: [-1.0, -1.0],
                hi: [1.0, 1.0],
            },
            300,
        );
        assert_eq!(sq.points.len(), 90_000);
        let disk = evaluation_grid(
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            300,
        );
        assert_eq!(disk.kind, GridKind::Polar);
        assert!(disk.points.points().iter().all(|p| p[0].hypot(p[1]) > 0.0));
    }
}
