//! 2-D geometric primitives shared by the planner, simulator, and sensing code.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Vec2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero())
    }

    pub fn norm(self) -> F {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn norm_sq(self) -> F {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Self) -> F {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, k: F) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn unit_or_zero(self) -> Self {
        let n = self.norm();
        if n > F::zero() {
            self.scale(F::one() / n)
        } else {
            Self::zero()
        }
    }

    pub fn from_angle(theta: F) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn angle(self) -> F {
        self.y.atan2(self.x)
    }

    pub fn dist(self, o: Self) -> F {
        (self - o).norm()
    }
}

impl<F: Real> std::ops::Add for Vec2<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<F: Real> std::ops::Sub for Vec2<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<F: Real> std::ops::Neg for Vec2<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<F> {
    pub min: Vec2<F>,
    pub max: Vec2<F>,
}

impl<F: Real> Rect<F> {
    pub fn new(min: Vec2<F>, max: Vec2<F>) -> Self {
        Self { min, max }
    }

    pub fn from_size(width: F, height: F) -> Self {
        Self::new(Vec2::zero(), Vec2::new(width, height))
    }

    pub fn width(&self) -> F {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> F {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> F {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Vec2<F>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vec2<F> {
        Vec2::new(
            (self.min.x + self.max.x) * F::lit(0.5),
            (self.min.y + self.max.y) * F::lit(0.5),
        )
    }

    /// Corner points counterclockwise from min.
    pub fn corners(&self) -> [Vec2<F>; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }

    pub fn edges(&self) -> [(Vec2<F>, Vec2<F>); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }
}

/// Simple polygon given by its vertex loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon<F> {
    pub vertices: Vec<Vec2<F>>,
}

impl<F: Real> Polygon<F> {
    pub fn new(vertices: Vec<Vec2<F>>) -> Self {
        Self { vertices }
    }

    pub fn rectangle(rect: Rect<F>) -> Self {
        Self::new(rect.corners().to_vec())
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2<F>, Vec2<F>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd rule; points on the boundary count as inside.
    pub fn contains(&self, p: Vec2<F>) -> bool {
        if self.distance(p) == F::zero() {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                let xi = a.x + t * (b.x - a.x);
                if p.x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from a point to the polygon boundary (0 on the boundary).
    pub fn distance(&self, p: Vec2<F>) -> F {
        self.edges()
            .map(|(a, b)| dist_point_segment(p, a, b))
            .fold(F::infinity(), F::min)
    }

    /// Signed clearance: 0 inside or on the boundary, else boundary distance.
    pub fn clearance(&self, p: Vec2<F>) -> F {
        let d = self.distance(p);
        if d == F::zero() {
            return F::zero();
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                let xi = a.x + t * (b.x - a.x);
                if p.x < xi {
                    inside = !inside;
                }
            }
        }
        if inside {
            F::zero()
        } else {
            d
        }
    }

    pub fn overlaps_rect(&self, rect: &Rect<F>) -> bool {
        if self.vertices.iter().any(|&v| rect.contains(v)) {
            return true;
        }
        if rect.corners().iter().any(|&c| self.contains(c)) {
            return true;
        }
        for (a, b) in self.edges() {
            for (c, d) in rect.edges() {
                if segments_intersect(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }
}

pub fn dist_point_segment<F: Real>(p: Vec2<F>, a: Vec2<F>, b: Vec2<F>) -> F {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == F::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).max(F::zero()).min(F::one());
    p.dist(a + ab.scale(t))
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect<F: Real>(a: Vec2<F>, b: Vec2<F>, c: Vec2<F>, d: Vec2<F>) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    if ((d1 > F::zero() && d2 < F::zero()) || (d1 < F::zero() && d2 > F::zero()))
        && ((d3 > F::zero() && d4 < F::zero()) || (d3 < F::zero() && d4 > F::zero()))
    {
        return true;
    }
    let on = |p: Vec2<F>, q: Vec2<F>, r: Vec2<F>| -> bool {
        (q - p).cross(r - p) == F::zero()
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

/// Distance along a ray to a segment, if hit.
pub fn ray_segment<F: Real>(origin: Vec2<F>, dir: Vec2<F>, a: Vec2<F>, b: Vec2<F>) -> Option<F> {
    let v1 = origin - a;
    let v2 = b - a;
    let denom = v2.cross(dir);
    if denom == F::zero() {
        return None;
    }
    let t = v1.cross(v2) / denom; // along ray
    let u = -dir.cross(v1) / denom; // along segment
    if t >= F::zero() && u >= F::zero() && u <= F::one() {
        Some(t)
    } else {
        None
    }
}

/// Distance along a ray to a circle boundary, if hit.
pub fn ray_circle<F: Real>(origin: Vec2<F>, dir: Vec2<F>, center: Vec2<F>, radius: F) -> Option<F> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < F::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 >= F::zero() {
        Some(t0)
    } else if t1 >= F::zero() {
        Some(F::zero()) // origin inside the circle
    } else {
        None
    }
}

/// Smallest enclosing circle (Welzl, move-to-front), returns (center, radius).
pub fn smallest_enclosing_circle<F: Real>(points: &[Vec2<F>]) -> (Vec2<F>, F) {
    if points.is_empty() {
        return (Vec2::zero(), F::zero());
    }
    let mut pts: Vec<Vec2<F>> = points.to_vec();
    // Deterministic pseudo-shuffle to avoid adversarial orderings.
    let n = pts.len();
    let mut state = 0x9e3779b97f4a7c15u64;
    for i in (1..n).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = (state >> 33) as usize % (i + 1);
        pts.swap(i, j);
    }
    let mut c = (pts[0], F::zero());
    for i in 1..n {
        if !in_circle(pts[i], c) {
            c = circle_one(&pts[..i], pts[i]);
        }
    }
    c
}

fn in_circle<F: Real>(p: Vec2<F>, (c, r): (Vec2<F>, F)) -> bool {
    p.dist(c) <= r * (F::one() + F::lit(1e-10)) + F::lit(1e-12)
}

fn circle_one<F: Real>(pts: &[Vec2<F>], q: Vec2<F>) -> (Vec2<F>, F) {
    let mut c = (q, F::zero());
    for i in 0..pts.len() {
        if !in_circle(pts[i], c) {
            c = circle_two(&pts[..i], q, pts[i]);
        }
    }
    c
}

fn circle_two<F: Real>(pts: &[Vec2<F>], q1: Vec2<F>, q2: Vec2<F>) -> (Vec2<F>, F) {
    let mut c = circle_from2(q1, q2);
    for i in 0..pts.len() {
        if !in_circle(pts[i], c) {
            c = circle_from3(q1, q2, pts[i]);
        }
    }
    c
}

fn circle_from2<F: Real>(a: Vec2<F>, b: Vec2<F>) -> (Vec2<F>, F) {
    let center = (a + b).scale(F::lit(0.5));
    (center, a.dist(b) * F::lit(0.5))
}

fn circle_from3<F: Real>(a: Vec2<F>, b: Vec2<F>, c: Vec2<F>) -> (Vec2<F>, F) {
    let two = F::lit(2.0);
    let d = two * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d == F::zero() {
        // Collinear: fall back to the widest pair.
        let cands = [circle_from2(a, b), circle_from2(a, c), circle_from2(b, c)];
        return cands
            .into_iter()
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
    }
    let ux = (a.norm_sq() * (b.y - c.y) + b.norm_sq() * (c.y - a.y) + c.norm_sq() * (a.y - b.y)) / d;
    let uy = (a.norm_sq() * (c.x - b.x) + b.norm_sq() * (a.x - c.x) + c.norm_sq() * (b.x - a.x)) / d;
    let center = Vec2::new(ux, uy);
    (center, center.dist(a))
}
