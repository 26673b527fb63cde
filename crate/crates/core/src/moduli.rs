//! Linkages, canonical planar configurations and the squared-diagonal
//! coordinates on the convex part of the moduli space.
//!
//! Vertices are stored zero-based: `p[0]` is `A₁`. For a pentagon the side
//! `aᵢ = |AᵢAᵢ₊₁|` lives at `sides[i-1]` and the diagonal
//! `bᵢ = |Aᵢ₋₁Aᵢ₊₁|` (indices mod 5) at `x[i-1] = bᵢ²`.
//!
//! Convex pentagons are parametrized by the two diagonals `b₂ = |A₁A₃|` and
//! `b₄ = |A₃A₅|`, which split the polygon into the rigid triangles
//! `A₁A₂A₃`, `A₁A₃A₅` and `A₃A₄A₅`. A slice fixes `b₄ = k`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cayley_menger, cm_partial, cm_second_partial, cross2, dist, dist2, signed_area, sub2, Point2,
    SquaredDistanceSet,
};

/// Relative tolerance on sidelengths when matching a configuration to a linkage.
pub const SIDE_TOLERANCE: f64 = 1e-10;

/// Turning cross-products at or below `CONVEXITY_EPS·scale²` are not strict.
pub const CONVEXITY_EPS: f64 = 1e-10;

/// Linkages whose signed side sums come this close to zero (relative) admit a
/// collinear configuration and a singular moduli space.
pub const GENERICITY_EPS: f64 = 1e-9;

const TRIANGLE_EPS: f64 = 1e-12;

/// Cyclic chain of rigid bars. Only quadrilaterals and pentagons are supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinkageRepr", into = "LinkageRepr")]
pub struct Linkage {
    sides: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LinkageRepr {
    sides: Vec<f64>,
}

impl TryFrom<LinkageRepr> for Linkage {
    type Error = Error;
    fn try_from(r: LinkageRepr) -> Result<Self> {
        Linkage::new(r.sides)
    }
}

impl From<Linkage> for LinkageRepr {
    fn from(l: Linkage) -> Self {
        LinkageRepr { sides: l.sides }
    }
}

impl Linkage {
    pub fn new(sides: Vec<f64>) -> Result<Self> {
        if !(4..=5).contains(&sides.len()) {
            return Err(Error::InvalidLinkage(format!(
                "expected 4 or 5 sides, got {}",
                sides.len()
            )));
        }
        if let Some(bad) = sides.iter().find(|a| !a.is_finite() || **a <= 0.0) {
            return Err(Error::InvalidLinkage(format!(
                "sidelengths must be positive and finite, got {bad}"
            )));
        }
        let total: f64 = sides.iter().sum();
        for (i, a) in sides.iter().enumerate() {
            if *a >= total - a {
                return Err(Error::InvalidLinkage(format!(
                    "side {} = {a} is not shorter than the sum of the others",
                    i + 1
                )));
            }
        }
        Ok(Self { sides })
    }

    /// All sides equal to `a`.
    pub fn equilateral(n: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; n])
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    pub fn n(&self) -> usize {
        self.sides.len()
    }

    /// Longest side; the unit in which tolerances are stated.
    pub fn scale(&self) -> f64 {
        self.sides.iter().copied().fold(0.0, f64::max)
    }

    /// The same linkage rescaled to unit longest side, and the factor removed.
    pub fn normalized(&self) -> (Linkage, f64) {
        let s = self.scale();
        let sides = self.sides.iter().map(|a| a / s).collect();
        (Linkage { sides }, s)
    }

    pub(crate) fn pentagon_sides(&self) -> Result<[f64; 5]> {
        self.sides
            .as_slice()
            .try_into()
            .map_err(|_| Error::InvalidArgument(format!("expected a pentagon, got n = {}", self.n())))
    }

    /// Smallest `|Σ ±aᵢ|` over all sign patterns, relative to the scale.
    /// Zero exactly when the linkage has a collinear configuration.
    pub fn genericity_defect(&self) -> f64 {
        let n = self.n();
        let mut best = f64::INFINITY;
        // the first sign can be fixed
        for mask in 0..(1u32 << (n - 1)) {
            let mut s = self.sides[0];
            for (i, a) in self.sides.iter().enumerate().skip(1) {
                if mask & (1 << (i - 1)) != 0 {
                    s += a;
                } else {
                    s -= a;
                }
            }
            best = best.min(s.abs());
        }
        best / self.scale()
    }

    pub fn is_generic(&self) -> bool {
        self.genericity_defect() > GENERICITY_EPS
    }

    pub fn check_generic(&self) -> Result<()> {
        if self.is_generic() {
            Ok(())
        } else {
            Err(Error::NongenericLinkage(format!(
                "signed side sum within {:.1e} of zero",
                self.genericity_defect()
            )))
        }
    }
}

/// A planar polygon in canonical placement: `p₁` at the origin, `p₂` on the
/// positive x-axis, nonnegative signed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Configuration {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for Configuration {
    type Error = Error;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        canonicalize(&v)
    }
}

impl From<Configuration> for Vec<Point2> {
    fn from(c: Configuration) -> Self {
        c.vertices
    }
}

impl Configuration {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i % self.n()]
    }

    /// Lengths `|pᵢpᵢ₊₁|`, cyclically.
    pub fn sides(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| dist(self.vertices[i], self.vertices[(i + 1) % n]))
            .collect()
    }

    /// The linkage this configuration realizes.
    pub fn linkage(&self) -> Result<Linkage> {
        Linkage::new(self.sides())
    }

    /// Fails unless every side matches `linkage` within [`SIDE_TOLERANCE`]
    /// relative to its scale.
    pub fn check_realizes(&self, linkage: &Linkage) -> Result<()> {
        if linkage.n() != self.n() {
            return Err(Error::InvalidConfiguration(format!(
                "{} vertices for a {}-bar linkage",
                self.n(),
                linkage.n()
            )));
        }
        let tol = SIDE_TOLERANCE * linkage.scale();
        for (i, (a, b)) in self.sides().iter().zip(linkage.sides()).enumerate() {
            if (a - b).abs() > tol.max(1e-13 * b) {
                return Err(Error::InvalidConfiguration(format!(
                    "side {} has length {a}, linkage expects {b}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Maximum vertexwise Euclidean distance between canonical placements.
    pub fn distance(&self, other: &Configuration) -> f64 {
        self.vertices
            .iter()
            .zip(&other.vertices)
            .map(|(a, b)| dist(*a, *b))
            .fold(0.0, f64::max)
            .max(if self.n() == other.n() { 0.0 } else { f64::INFINITY })
    }

    /// Twice the signed polygon area (shoelace).
    pub fn signed_area2(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| cross2(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum()
    }

    /// `cross(pᵢ − pᵢ₋₁, pᵢ₊₁ − pᵢ)` at every vertex.
    pub fn turning_crosses(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let prev = self.vertices[(i + n - 1) % n];
                let next = self.vertices[(i + 1) % n];
                cross2(sub2(self.vertices[i], prev), sub2(next, self.vertices[i]))
            })
            .collect()
    }

    /// Exterior turning angles in `(−π, π]`.
    pub fn turning_angles(&self) -> Vec<f64> {
        turning_angles(&self.vertices)
    }

    /// Longest side.
    pub fn scale(&self) -> f64 {
        self.sides().into_iter().fold(0.0, f64::max)
    }

    /// Multiplies every coordinate by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Configuration {
        Configuration {
            vertices: self
                .vertices
                .iter()
                .map(|p| [p[0] * factor, p[1] * factor])
                .collect(),
        }
    }

    /// Relabels vertices so that old vertex `shift` becomes vertex 1.
    pub fn rotated(&self, shift: usize) -> Result<Configuration> {
        let n = self.n();
        let v: Vec<Point2> = (0..n).map(|i| self.vertices[(i + shift) % n]).collect();
        canonicalize(&v)
    }
}

fn turning_angles(v: &[Point2]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let e0 = sub2(v[i], v[(i + n - 1) % n]);
            let e1 = sub2(v[(i + 1) % n], v[i]);
            cross2(e0, e1).atan2(e0[0] * e1[0] + e0[1] * e1[1])
        })
        .collect()
}

/// Applies the rigid motion (and reflection if needed) that puts `p₁` at the
/// origin, `p₂` on the positive x-axis and makes the signed area nonnegative.
pub fn canonicalize(vertices: &[Point2]) -> Result<Configuration> {
    if !(3..=5).contains(&vertices.len()) && vertices.len() < 3 {
        return Err(Error::InvalidConfiguration("need at least three vertices".into()));
    }
    if vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidConfiguration("non-finite coordinate".into()));
    }
    let p0 = vertices[0];
    let spread = vertices.iter().map(|p| dist(*p, p0)).fold(0.0, f64::max);
    if spread == 0.0 {
        return Err(Error::DegenerateInput);
    }
    let d = sub2(vertices[1], p0);
    let len = d[0].hypot(d[1]);
    if len <= 1e-15 * spread {
        return Err(Error::CoincidentVertices(1, 2));
    }
    let (c, s) = (d[0] / len, d[1] / len);
    let mut out: Vec<Point2> = vertices
        .iter()
        .map(|p| {
            let q = sub2(*p, p0);
            [c * q[0] + s * q[1], -s * q[0] + c * q[1]]
        })
        .collect();
    out[0] = [0.0, 0.0];
    out[1] = [len, 0.0];
    let n = out.len();
    let area2: f64 = (0..n).map(|i| cross2(out[i], out[(i + 1) % n])).sum();
    if area2 < 0.0 {
        for p in &mut out {
            p[1] = -p[1];
        }
    }
    for p in &mut out {
        // avoid printing -0
        if p[1] == 0.0 {
            p[1] = 0.0;
        }
    }
    Ok(Configuration { vertices: out })
}

/// Strict convexity: every turning cross-product exceeds
/// `CONVEXITY_EPS·scale²` and the boundary winds exactly once.
pub fn is_strictly_convex(p: &Configuration) -> bool {
    let eps = CONVEXITY_EPS * p.scale().powi(2);
    let crosses = p.turning_crosses();
    let sign = if p.signed_area2() >= 0.0 { 1.0 } else { -1.0 };
    if crosses.iter().any(|c| sign * c <= eps) {
        return false;
    }
    let winding: f64 = p.turning_angles().iter().sum();
    (winding.abs() - 2.0 * PI).abs() < 1e-6
}

/// Squared diagonals `x₁..x₅` of a pentagon, `xᵢ = |Aᵢ₋₁Aᵢ₊₁|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagonalCoords(pub [f64; 5]);

impl DiagonalCoords {
    /// Diagonal lengths `bᵢ`.
    pub fn lengths(&self) -> [f64; 5] {
        self.0.map(f64::sqrt)
    }

    /// `xᵢ` with one-based index `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.0[(i + 4) % 5]
    }
}

/// The embedding `Φ`: squared diagonals of a pentagon.
pub fn diagonals(p: &Configuration) -> Result<DiagonalCoords> {
    if p.n() != 5 {
        return Err(Error::InvalidArgument(format!(
            "diagonal coordinates need a pentagon, got n = {}",
            p.n()
        )));
    }
    Ok(DiagonalCoords(std::array::from_fn(|i| {
        dist2(p.vertex(i + 4), p.vertex(i + 1))
    })))
}

/// Position of a pentagon relative to the strictly convex region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Strict,
    /// Some angle equals π or some constituent triangle is flat.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub configuration: Configuration,
    pub status: Convexity,
}

/// Height and foot of the apex of a triangle over a base of length `base`,
/// with the apex at distance `from_a` from the base start and `from_b` from
/// its end. `None` when the triangle inequality fails beyond tolerance.
fn apex(base: f64, from_a: f64, from_b: f64) -> Option<(f64, f64, bool)> {
    let scale = base.max(from_a).max(from_b);
    let slack = (from_a + from_b - base)
        .min(from_a + base - from_b)
        .min(from_b + base - from_a);
    let tol = TRIANGLE_EPS * scale;
    if slack < -tol || base <= 0.0 {
        return None;
    }
    let along = (from_a * from_a - from_b * from_b + base * base) / (2.0 * base);
    if slack <= tol {
        return Some((along, 0.0, true));
    }
    // Kahan's stable Heron formula for the area
    let mut s = [base, from_a, from_b];
    s.sort_by(|a, b| b.total_cmp(a));
    let [a, b, c] = s;
    let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    let area = 0.25 * prod.max(0.0).sqrt();
    Some((along, 2.0 * area / base, false))
}

/// Raw placement of the pentagon with diagonals `b₂`, `b₄` in a frame with
/// `A₁` at the origin and `A₃` on the positive x-axis. Returns the vertices
/// and whether a constituent triangle is flat.
pub(crate) fn place_pentagon(sides: &[f64; 5], b2: f64, b4: f64) -> Option<([Point2; 5], bool)> {
    let [a1, a2, a3, a4, a5] = *sides;
    if !(b2 > 0.0 && b4 > 0.0 && b2.is_finite() && b4.is_finite()) {
        return None;
    }
    // A2 to the right of A1→A3 (below the axis)
    let (u2, h2, flat1) = apex(b2, a1, a2)?;
    // A5 to the left of A1→A3 (above)
    let (u5, h5, flat2) = apex(b2, a5, b4)?;
    let p1 = [0.0, 0.0];
    let p2 = [u2, -h2];
    let p3 = [b2, 0.0];
    let p5 = [u5, h5];
    // A4 to the right of A3→A5, away from A1
    let (u4, h4, flat3) = apex(b4, a3, a4)?;
    let e = [(p5[0] - p3[0]) / b4, (p5[1] - p3[1]) / b4];
    let right = [e[1], -e[0]];
    let p4 = [
        p3[0] + u4 * e[0] + h4 * right[0],
        p3[1] + u4 * e[1] + h4 * right[1],
    ];
    Some(([p1, p2, p3, p4, p5], flat1 || flat2 || flat3))
}

/// Continuous convexity margin of a placed polygon: the smallest distance of
/// an exterior angle to the ends of `(0, π)`, negative when some angle leaves
/// that range or the boundary winds more than once.
pub(crate) fn convexity_margin(v: &[Point2]) -> f64 {
    let angles = turning_angles(v);
    let winding: f64 = angles.iter().sum();
    if (winding - 2.0 * PI).abs() > 1.0 {
        return -1.0;
    }
    angles
        .iter()
        .map(|t| t.min(PI - t))
        .fold(f64::INFINITY, f64::min)
}

fn classify(v: &[Point2; 5], flat: bool, scale: f64) -> Result<Convexity> {
    let eps = CONVEXITY_EPS * scale * scale;
    let angles = turning_angles(v);
    let winding: f64 = angles.iter().sum();
    if (winding - 2.0 * PI).abs() > 1e-6 {
        return Err(Error::NotConvex);
    }
    let n = v.len();
    let mut boundary = flat;
    for i in 0..n {
        let prev = v[(i + n - 1) % n];
        let next = v[(i + 1) % n];
        let c = cross2(sub2(v[i], prev), sub2(next, v[i]));
        if c < -eps || angles[i] > PI / 2.0 && c <= eps {
            return Err(Error::NotConvex);
        }
        if c <= eps {
            boundary = true;
        }
    }
    Ok(if boundary {
        Convexity::Boundary
    } else {
        Convexity::Strict
    })
}

/// The unique convex pentagon of `linkage` with `|A₁A₃| = b₂` and
/// `|A₃A₅| = b₄`, canonically placed.
pub fn reconstruct_pentagon(linkage: &Linkage, b2: f64, b4: f64) -> Result<Reconstruction> {
    let sides = linkage.pentagon_sides()?;
    let (v, flat) = place_pentagon(&sides, b2, b4).ok_or_else(|| {
        Error::NotRealizable(format!("triangle inequality fails for b2 = {b2}, b4 = {b4}"))
    })?;
    let status = classify(&v, flat, linkage.scale())?;
    Ok(Reconstruction {
        configuration: canonicalize(&v)?,
        status,
    })
}

/// Like [`reconstruct_pentagon`] but insists on strict convexity.
pub fn reconstruct_strict(linkage: &Linkage, b2: f64, b4: f64) -> Result<Configuration> {
    let r = reconstruct_pentagon(linkage, b2, b4)?;
    match r.status {
        Convexity::Strict => Ok(r.configuration),
        Convexity::Boundary => Err(Error::BoundaryConfiguration(format!(
            "b2 = {b2}, b4 = {b4} gives an aligned configuration"
        ))),
    }
}

/// The admissible `x₂` interval of the slice `b₄ = k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub k: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    /// The slice has collapsed to a point.
    pub terminal: bool,
}

impl Slice {
    pub fn b2_range(&self) -> (f64, f64) {
        (self.x2_min.sqrt(), self.x2_max.sqrt())
    }

    pub fn width(&self) -> f64 {
        self.x2_max - self.x2_min
    }

    /// `x₂` at relative position `u ∈ [0, 1]`.
    pub fn x2_at(&self, u: f64) -> f64 {
        self.x2_min + u * (self.x2_max - self.x2_min)
    }

    pub fn contains_interior(&self, x2: f64) -> bool {
        x2 > self.x2_min && x2 < self.x2_max
    }
}

const SLICE_SCAN: usize = 257;

fn margin_at(sides: &[f64; 5], b2: f64, b4: f64) -> Option<f64> {
    place_pentagon(sides, b2, b4).map(|(v, _)| convexity_margin(&v))
}

/// Range of `b₂` for which the three triangles are realizable.
fn b2_domain(sides: &[f64; 5], k: f64) -> Option<(f64, f64)> {
    let [a1, a2, a3, a4, a5] = *sides;
    let tol = TRIANGLE_EPS * sides.iter().copied().fold(k, f64::max);
    if k <= 0.0 || k < (a3 - a4).abs() - tol || k > a3 + a4 + tol {
        return None;
    }
    let lo = (a1 - a2).abs().max((k - a5).abs());
    let hi = (a1 + a2).min(k + a5);
    (lo <= hi).then_some((lo, hi))
}

/// Largest convexity margin on the slice and the `b₂` attaining it.
fn max_margin(sides: &[f64; 5], k: f64) -> Option<(f64, f64)> {
    let (lo, hi) = b2_domain(sides, k)?;
    if hi - lo <= 0.0 {
        return margin_at(sides, lo, k).map(|m| (m, lo));
    }
    let step = (hi - lo) / (SLICE_SCAN - 1) as f64;
    let at = |i: usize| if i == SLICE_SCAN - 1 { hi } else { lo + step * i as f64 };
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..SLICE_SCAN {
        if let Some(m) = margin_at(sides, at(i), k) {
            if m > best {
                best = m;
                best_i = i;
            }
        }
    }
    // golden refinement inside the neighbouring cells
    let (mut a, mut b) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(SLICE_SCAN - 1)));
    let f = |x: f64| margin_at(sides, x, k).unwrap_or(f64::NEG_INFINITY);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-15 * hi.max(1.0) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let (xm, fm) = if fc > fd { (c, fc) } else { (d, fd) };
    Some(if fm > best { (fm, xm) } else { (best, at(best_i)) })
}

/// Bisects the boundary of `{x : pred(x)}` between `outside` and `inside`.
fn bisect_edge(mut outside: f64, mut inside: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (outside + inside);
        if mid == outside || mid == inside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// The closed `x₂` interval over which the slice `b₄ = k` consists of convex
/// configurations.
pub fn slice_range(linkage: &Linkage, k: f64) -> Result<Slice> {
    let sides = linkage.pentagon_sides()?;
    let empty = || Error::EmptySlice { k };
    let (lo, hi) = b2_domain(&sides, k).ok_or_else(empty)?;
    let (best, at) = max_margin(&sides, k).ok_or_else(empty)?;
    if best <= 0.0 {
        if best > -1e-9 {
            return Ok(Slice {
                k,
                x2_min: at * at,
                x2_max: at * at,
                terminal: true,
            });
        }
        return Err(empty());
    }
    let feasible = |b2: f64| margin_at(&sides, b2, k).is_some_and(|m| m > 0.0);
    // near a flat triangle the margin grows like a square root, so bisection
    // stops short of the true edge; snap onto it
    let snap = 1e-9 * linkage.scale();
    let mut left = bisect_edge(lo, at, feasible);
    if left - lo < snap {
        left = lo;
    }
    let mut right = bisect_edge(hi, at, feasible);
    if hi - right < snap {
        right = hi;
    }
    Ok(Slice {
        k,
        x2_min: left * left,
        x2_max: right * right,
        terminal: right <= left,
    })
}

/// The convex region of a pentagonal linkage as a family of slices between
/// the two terminal values of `b₄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion {
    linkage: Linkage,
    sides: [f64; 5],
    pub k_min: f64,
    pub k_max: f64,
}

impl ConvexRegion {
    pub fn new(linkage: &Linkage) -> Result<Self> {
        let sides = linkage.pentagon_sides()?;
        let [a1, a2, a3, a4, a5] = sides;
        let chain = a5 + a1 + a2;
        let longest = a5.max(a1).max(a2);
        let lo = (a3 - a4).abs().max(2.0 * longest - chain).max(0.0);
        let hi = (a3 + a4).min(chain);
        if lo >= hi {
            return Err(Error::EmptyModuli);
        }
        const K_SCAN: usize = 129;
        let step = (hi - lo) / (K_SCAN - 1) as f64;
        let positive = |k: f64| max_margin(&sides, k).is_some_and(|(m, _)| m > 0.0);
        let mut first = None;
        let mut last = None;
        for i in 1..K_SCAN - 1 {
            let k = lo + step * i as f64;
            if positive(k) {
                first.get_or_insert(i);
                last = Some(i);
            }
        }
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::EmptyModuli),
        };
        let k_min = bisect_edge(lo + step * (first - 1) as f64, lo + step * first as f64, positive);
        let k_max = bisect_edge(lo + step * (last + 1) as f64, lo + step * last as f64, positive);
        Ok(Self {
            linkage: linkage.clone(),
            sides,
            k_min,
            k_max,
        })
    }

    pub fn linkage(&self) -> &Linkage {
        &self.linkage
    }

    pub fn slice(&self, k: f64) -> Result<Slice> {
        slice_range(&self.linkage, k)
    }

    /// `b₄` at relative position `v ∈ [0, 1]` between the terminals.
    pub fn k_at(&self, v: f64) -> f64 {
        self.k_min + v * (self.k_max - self.k_min)
    }

    /// Convexity margin of the placement with diagonals `(b₂, b₄)`, or `None`
    /// when a triangle is not realizable.
    pub fn margin(&self, b2: f64, b4: f64) -> Option<f64> {
        margin_at(&self.sides, b2, b4)
    }

    /// Strictly convex configuration at relative chart position
    /// `(v, u) ∈ (0,1)²`: `b₄ = k_at(v)`, `x₂` at fraction `u` of the slice.
    pub fn configuration_at(&self, v: f64, u: f64) -> Result<Configuration> {
        let k = self.k_at(v);
        let s = self.slice(k)?;
        reconstruct_strict(&self.linkage, s.x2_at(u).sqrt(), k)
    }
}

/// A grid of strictly convex configurations covering the convex region:
/// `nk` slices at cell-centre values of `b₄`, each sampled at `nx` cell-centre
/// positions along its `x₂` range.
pub fn sample_convex(linkage: &Linkage, nk: usize, nx: usize) -> Result<Vec<Configuration>> {
    if nk == 0 || nx == 0 {
        return Err(Error::InvalidArgument("grid counts must be positive".into()));
    }
    let region = ConvexRegion::new(linkage)?;
    let mut out = Vec::with_capacity(nk * nx);
    for i in 0..nk {
        let k = region.k_at((i as f64 + 0.5) / nk as f64);
        let s = region.slice(k)?;
        for j in 0..nx {
            let x2 = s.x2_at((j as f64 + 0.5) / nx as f64);
            out.push(reconstruct_strict(linkage, x2.sqrt(), k)?);
        }
    }
    Ok(out)
}

/// Values and `x`-gradients of the five pentagon Cayley-Menger constraints.
///
/// `Dᵢ` is the determinant of the four vertices other than `Aᵢ`; it involves
/// three sides and the three diagonals `x_{i-1}`, `x_i`... that avoid `Aᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmConstraints {
    pub values: [f64; 5],
    /// `gradients[i][j] = ∂D_{i+1}/∂x_{j+1}`.
    pub gradients: [[f64; 5]; 5],
}

/// Squared distance between pentagon vertices `i`, `j` (zero-based) in terms
/// of sides and squared diagonals, plus the diagonal index if it is one.
fn pentagon_d2(sides: &[f64; 5], x: &[f64; 5], i: usize, j: usize) -> (f64, Option<usize>) {
    let (lo, hi) = (i.min(j), i.max(j));
    if hi - lo == 1 {
        (sides[lo].powi(2), None)
    } else if hi - lo == 4 {
        (sides[4].powi(2), None)
    } else {
        // the common neighbour m of i and j carries the diagonal b_{m+1}
        let m = if hi - lo == 2 { lo + 1 } else { (hi + 1) % 5 };
        (x[m], Some(m))
    }
}

/// The quadruple of vertices used by constraint `i` (zero-based: `Dᵢ₊₁`).
fn constraint_quad(i: usize) -> [usize; 4] {
    let v: Vec<usize> = (0..5).filter(|&j| j != i).collect();
    [v[0], v[1], v[2], v[3]]
}

fn constraint_table(sides: &[f64; 5], x: &[f64; 5], i: usize) -> (SquaredDistanceSet, [[Option<usize>; 4]; 4]) {
    let q = constraint_quad(i);
    let mut pairs = [0.0; 6];
    let mut which = [[None; 4]; 4];
    let mut idx = 0;
    for a in 0..4 {
        for b in a + 1..4 {
            let (d, m) = pentagon_d2(sides, x, q[a], q[b]);
            pairs[idx] = d;
            which[a][b] = m;
            which[b][a] = m;
            idx += 1;
        }
    }
    (SquaredDistanceSet::from_pairs_unchecked(pairs), which)
}

/// Evaluates `D₁..D₅` and their gradients in the squared diagonals.
pub fn cm_constraints(x: &DiagonalCoords, linkage: &Linkage) -> Result<CmConstraints> {
    let sides = linkage.pentagon_sides()?;
    let mut values = [0.0; 5];
    let mut gradients = [[0.0; 5]; 5];
    for i in 0..5 {
        let (table, which) = constraint_table(&sides, &x.0, i);
        values[i] = cayley_menger(&table);
        for a in 0..4 {
            for b in a + 1..4 {
                if let Some(m) = which[a][b] {
                    gradients[i][m] = cm_partial(&table, a, b);
                }
            }
        }
    }
    Ok(CmConstraints { values, gradients })
}

/// Hessian of constraint `Dᵢ₊₁` in the squared diagonals (exact up to rounding).
pub fn cm_constraint_hessian(x: &DiagonalCoords, linkage: &Linkage, i: usize) -> Result<[[f64; 5]; 5]> {
    let sides = linkage.pentagon_sides()?;
    let (table, which) = constraint_table(&sides, &x.0, i);
    let mut diag_pairs = Vec::with_capacity(3);
    for a in 0..4 {
        for b in a + 1..4 {
            if let Some(m) = which[a][b] {
                diag_pairs.push(((a, b), m));
            }
        }
    }
    let mut h = [[0.0; 5]; 5];
    for &(u, mu) in &diag_pairs {
        for &(v, mv) in &diag_pairs {
            h[mu][mv] = cm_second_partial(&table, u, v);
        }
    }
    Ok(h)
}

/// Oriented areas `S_ijk` of a pentagon, one-based indices.
pub(crate) struct Areas<'a>(pub &'a [Point2]);

impl Areas<'_> {
    pub fn s(&self, i: usize, j: usize, k: usize) -> f64 {
        signed_area(self.0[i - 1], self.0[j - 1], self.0[k - 1])
    }
}

/// Tangent vectors of `Φ(M(L))` for the local coordinates `(x₂, x₄)`:
/// `d_dx2[j] = ∂x_{j+1}/∂x₂` at fixed `x₄` and `d_dx4[j] = ∂x_{j+1}/∂x₄` at
/// fixed `x₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalJacobian {
    pub d_dx2: [f64; 5],
    pub d_dx4: [f64; 5],
}

/// Closed-form Jacobian from ratios of oriented areas, obtained by implicit
/// differentiation of `D₄` (for `x₁`), `D₂` (for `x₅`) and `D₁` (for `x₃`).
pub fn diagonal_jacobian(p: &Configuration) -> Result<DiagonalJacobian> {
    if p.n() != 5 {
        return Err(Error::InvalidArgument("pentagon expected".into()));
    }
    let a = Areas(p.vertices());
    let (s123, s125, s134, s135) = (a.s(1, 2, 3), a.s(1, 2, 5), a.s(1, 3, 4), a.s(1, 3, 5));
    let (s145, s234, s235, s245, s345) = (a.s(1, 4, 5), a.s(2, 3, 4), a.s(2, 3, 5), a.s(2, 4, 5), a.s(3, 4, 5));
    let tiny = 1e-14 * p.scale().powi(2);
    if [s123, s135, s235, s345].iter().any(|s| s.abs() <= tiny) {
        return Err(Error::BoundaryConfiguration(
            "an oriented area in the Jacobian vanishes".into(),
        ));
    }
    let dx1_dx2 = -s125 * s235 / (s123 * s135);
    let dx1_dx4 = s125 / s135;
    let dx5_dx2 = s145 / s135;
    let dx5_dx4 = -s134 * s145 / (s345 * s135);
    // x3 on D1 = 0 as a function of (x1, x4)
    let dx3_dx1 = s234 / s235;
    let dx3_dx4_at_x1 = -s234 * s245 / (s235 * s345);
    Ok(DiagonalJacobian {
        d_dx2: [dx1_dx2, 1.0, dx3_dx1 * dx1_dx2, 0.0, dx5_dx2],
        d_dx4: [dx1_dx4, 0.0, dx3_dx1 * dx1_dx4 + dx3_dx4_at_x1, 1.0, dx5_dx4],
    })
}

/// The same Jacobian from the linear system `∇Dᵢ·dx = 0`, solved in the
/// least-squares sense over all five constraints.
pub fn diagonal_jacobian_implicit(x: &DiagonalCoords, linkage: &Linkage) -> Result<DiagonalJacobian> {
    use nalgebra::{Matrix5x3, Vector5};
    let c = cm_constraints(x, linkage)?;
    let g = &c.gradients;
    let free = [0usize, 2, 4];
    let a = Matrix5x3::from_fn(|r, col| g[r][free[col]]);
    let svd = a.svd(true, true);
    let sv = svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return Err(Error::BoundaryConfiguration(
            "constraint gradients are rank deficient".into(),
        ));
    }
    let solve = |fixed: usize| -> Result<[f64; 5]> {
        let rhs = Vector5::from_fn(|r, _| -g[r][fixed]);
        let sol = svd
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::NumericalConditioning(e.to_string()))?;
        let mut out = [0.0; 5];
        out[fixed] = 1.0;
        for (col, &j) in free.iter().enumerate() {
            out[j] = sol[col];
        }
        Ok(out)
    };
    Ok(DiagonalJacobian {
        d_dx2: solve(1)?,
        d_dx4: solve(3)?,
    })
}

/// Point `(x, y) = (d₁₃², d₂₄²)` on the diagonal curve of a quadrilateral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCurvePoint {
    pub x: f64,
    pub y: f64,
}

/// The map `Ψ`: squared diagonals of a quadrilateral.
pub fn quad_psi(p: &Configuration) -> Result<QuadCurvePoint> {
    if p.n() != 4 {
        return Err(Error::InvalidArgument(format!(
            "quadrilateral expected, got n = {}",
            p.n()
        )));
    }
    Ok(QuadCurvePoint {
        x: dist2(p.vertex(0), p.vertex(2)),
        y: dist2(p.vertex(1), p.vertex(3)),
    })
}

fn quad_table(linkage: &Linkage, x: f64, y: f64) -> Result<SquaredDistanceSet> {
    let s = linkage.sides();
    if s.len() != 4 {
        return Err(Error::InvalidArgument("quadrilateral linkage expected".into()));
    }
    // pairs: 12 13 14 23 24 34
    Ok(SquaredDistanceSet::from_pairs_unchecked([
        s[0] * s[0],
        x,
        s[3] * s[3],
        s[1] * s[1],
        y,
        s[2] * s[2],
    ]))
}

/// `D(x, y)`: the Cayley-Menger determinant of a quadrilateral with squared
/// diagonals `x`, `y`. Vanishes exactly on planar realizations.
pub fn quad_curve_residual(linkage: &Linkage, x: f64, y: f64) -> Result<f64> {
    Ok(cayley_menger(&quad_table(linkage, x, y)?))
}

/// `(∂D/∂x, ∂D/∂y)` of the quadrilateral curve.
pub fn quad_curve_gradient(linkage: &Linkage, x: f64, y: f64) -> Result<[f64; 2]> {
    let t = quad_table(linkage, x, y)?;
    Ok([cm_partial(&t, 0, 2), cm_partial(&t, 1, 3)])
}

/// Convex quadrilateral with sides `linkage` and `|A₁A₃|² = x`.
pub fn reconstruct_quad(linkage: &Linkage, x: f64) -> Result<Reconstruction> {
    let s = linkage.sides();
    if s.len() != 4 {
        return Err(Error::InvalidArgument("quadrilateral linkage expected".into()));
    }
    let b = x.sqrt();
    let not_real = || Error::NotRealizable(format!("d13 = {b} violates a triangle inequality"));
    let (u2, h2, f1) = apex(b, s[0], s[1]).ok_or_else(not_real)?;
    let (u4, h4, f2) = apex(b, s[3], s[2]).ok_or_else(not_real)?;
    let v = [[0.0, 0.0], [u2, -h2], [b, 0.0], [u4, h4]];
    let margin = convexity_margin(&v);
    if margin < -1e-12 {
        return Err(Error::NotConvex);
    }
    let configuration = canonicalize(&v)?;
    let status = if f1 || f2 || !is_strictly_convex(&configuration) {
        Convexity::Boundary
    } else {
        Convexity::Strict
    };
    Ok(Reconstruction {
        configuration,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    fn phi() -> f64 {
        0.5 * (1.0 + 5f64.sqrt())
    }

    pub(crate) fn regular_pentagon() -> Configuration {
        let v: Vec<Point2> = (0..5)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 5.0;
                let r = 1.0 / (2.0 * (PI / 5.0).sin());
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        canonicalize(&v).unwrap()
    }

    fn unit_square() -> Configuration {
        canonicalize(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn linkage_validation() {
        assert!(Linkage::new(vec![10.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(Linkage::new(vec![1.0, -1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(Linkage::new(vec![1.0, 1.0, 1.0]).is_err());
        assert!(Linkage::new(vec![1.0, 1.0, 1.0, 1.0, 1.0]).is_ok());
        let l: Linkage = serde_json::from_str(r#"{"sides":[1,1,1,1,1]}"#).unwrap();
        assert_eq!(l.n(), 5);
        assert!(serde_json::from_str::<Linkage>(r#"{"sides":[1,1,1,1,-1]}"#).is_err());
    }

    #[test]
    fn genericity() {
        assert!(Linkage::equilateral(5, 1.0).unwrap().is_generic());
        // 1 + 1 - 1 - 1 = 0: the square folds flat
        assert!(!Linkage::equilateral(4, 1.0).unwrap().is_generic());
        assert!(!Linkage::new(vec![1.0, 1.0, 1.0, 1.5, 1.5]).unwrap().is_generic());
    }

    #[test]
    fn canonicalize_examples() {
        let sq = unit_square();
        assert_eq!(canonicalize(sq.vertices()).unwrap(), sq);
        let moved: Vec<Point2> = sq.vertices().iter().map(|p| [p[0] + 3.0, p[1] + 7.0]).collect();
        assert!(canonicalize(&moved).unwrap().distance(&sq) < 1e-14);
        let reg = regular_pentagon();
        let mirrored: Vec<Point2> = reg.vertices().iter().map(|p| [p[0], -p[1]]).collect();
        let c = canonicalize(&mirrored).unwrap();
        assert!(c.signed_area2() > 0.0);
        assert!(c.distance(&reg) < 1e-14);
        assert_eq!(canonicalize(&[[1.0, 1.0]; 4]), Err(Error::DegenerateInput));
    }

    #[test]
    fn convexity_examples() {
        assert!(is_strictly_convex(&regular_pentagon()));
        // A1, A2, A3 collinear
        let flat = canonicalize(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.5, 1.0], [0.2, 1.0]]).unwrap();
        assert!(!is_strictly_convex(&flat));
        let reflex = canonicalize(&[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 0.5], [0.0, 2.0]]).unwrap();
        assert!(!is_strictly_convex(&reflex));
        // pentagram: all turns agree but it winds twice
        let star: Vec<Point2> = (0..5)
            .map(|i| {
                let t = 4.0 * PI * i as f64 / 5.0;
                [t.cos(), t.sin()]
            })
            .collect();
        assert!(!is_strictly_convex(&canonicalize(&star).unwrap()));
    }

    #[test]
    fn regular_pentagon_diagonals_are_golden() {
        let x = diagonals(&regular_pentagon()).unwrap();
        for xi in x.0 {
            assert!((xi - phi() * phi()).abs() < 1e-13);
        }
        assert!(diagonals(&unit_square()).is_err());
        let q = quad_psi(&unit_square()).unwrap();
        assert!((q.x - 2.0).abs() < 1e-14 && (q.y - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruct_regular() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let r = reconstruct_pentagon(&l, phi(), phi()).unwrap();
        assert_eq!(r.status, Convexity::Strict);
        assert!(r.configuration.distance(&regular_pentagon()) < 1e-13);
    }

    #[test]
    fn reconstruct_boundary_and_unrealizable() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let r = reconstruct_pentagon(&l, 2.0, phi()).unwrap();
        assert_eq!(r.status, Convexity::Boundary);
        assert!(matches!(
            reconstruct_pentagon(&l, 2.0 + 1e-3, phi()),
            Err(Error::NotRealizable(_))
        ));
        assert!(matches!(reconstruct_strict(&l, 2.0, phi()), Err(Error::BoundaryConfiguration(_))));
        // a very short b2 with long b4 folds A5 back over A1: not convex
        assert!(matches!(reconstruct_pentagon(&l, 0.3, 1.2), Err(Error::NotConvex)));
    }

    #[test]
    fn slice_examples() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let s = slice_range(&l, phi()).unwrap();
        assert!(s.contains_interior(phi() * phi()));
        assert!(!s.terminal);
        assert!(matches!(slice_range(&l, 1e-4), Err(Error::EmptySlice { .. })));
        let region = ConvexRegion::new(&l).unwrap();
        // b4 = a3 + a4 flattens A3A4A5
        assert!((region.k_max - 2.0).abs() < 1e-12, "{}", region.k_max);
        assert!(region.k_min > 0.0 && region.k_min < 1.0);
        assert!(matches!(slice_range(&l, 2.0 + 1e-6), Err(Error::EmptySlice { .. })));
        // endpoints are aligned configurations
        let (lo, hi) = s.b2_range();
        for b2 in [lo, hi] {
            let r = reconstruct_pentagon(&l, b2, phi()).unwrap();
            assert_eq!(r.status, Convexity::Boundary, "b2 = {b2}");
        }
    }

    #[test]
    fn slice_ranges_vary_continuously() {
        let l = Linkage::new(vec![1.0, 0.8, 0.9, 0.7, 0.85]).unwrap();
        let region = ConvexRegion::new(&l).unwrap();
        let n = 400;
        let mut prev: Option<Slice> = None;
        let mut max_jump: f64 = 0.0;
        for i in 1..n {
            let s = region.slice(region.k_at(i as f64 / n as f64)).unwrap();
            if let Some(p) = prev {
                max_jump = max_jump.max((s.x2_min - p.x2_min).abs()).max((s.x2_max - p.x2_max).abs());
            }
            prev = Some(s);
        }
        assert!(max_jump < 0.05, "jump {max_jump}");
    }

    #[test]
    fn sampling_grid() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let grid = sample_convex(&l, 50, 50).unwrap();
        assert_eq!(grid.len(), 2500);
        assert!(grid.iter().all(is_strictly_convex));
        let reg = regular_pentagon();
        let nearest = grid.iter().map(|c| c.distance(&reg)).fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.05, "nearest {nearest}");
        assert_eq!(sample_convex(&l, 1, 1).unwrap().len(), 1);
    }

    #[test]
    fn constraints_vanish_on_realizations_and_sign_table() {
        let p = regular_pentagon();
        let l = p.linkage().unwrap();
        let x = diagonals(&p).unwrap();
        let c = cm_constraints(&x, &l).unwrap();
        for v in c.values {
            assert!(v.abs() < 1e-9, "D = {v}");
        }
        let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
        let row2: Vec<i32> = c.gradients[1].iter().map(|g| sign(*g)).collect();
        assert_eq!(row2, vec![0, 1, 0, -1, -1]);
        let mut bumped = x;
        bumped.0[1] += 0.1;
        let c2 = cm_constraints(&bumped, &l).unwrap();
        assert!(c2.values[3].abs() > 1e-4);
    }

    #[test]
    fn jacobians_agree() {
        let l = Linkage::new(vec![1.0, 0.8, 0.9, 0.7, 0.85]).unwrap();
        let region = ConvexRegion::new(&l).unwrap();
        let p = region.configuration_at(0.4, 0.6).unwrap();
        let a = diagonal_jacobian(&p).unwrap();
        let b = diagonal_jacobian_implicit(&diagonals(&p).unwrap(), &l).unwrap();
        for j in 0..5 {
            assert!((a.d_dx2[j] - b.d_dx2[j]).abs() < 1e-9, "{a:?} {b:?}");
            assert!((a.d_dx4[j] - b.d_dx4[j]).abs() < 1e-9, "{a:?} {b:?}");
        }
    }

    #[test]
    fn quad_curve() {
        let sq = unit_square();
        let l = sq.linkage().unwrap();
        assert!(quad_curve_residual(&l, 2.0, 2.0).unwrap().abs() < 1e-12);
        assert!(quad_curve_residual(&l, 1.0, 1.0).unwrap().abs() > 1e-3);
        // rhombus family: x + y = 4
        for i in 1..20 {
            let x = 4.0 * i as f64 / 20.0;
            let r = reconstruct_quad(&l, x).unwrap();
            let q = quad_psi(&r.configuration).unwrap();
            assert!((q.x + q.y - 4.0).abs() < 1e-12);
            assert!(quad_curve_residual(&l, q.x, q.y).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_relabels() {
        let p = regular_pentagon();
        let q = p.rotated(2).unwrap();
        assert!(q.distance(&p) < 1e-13);
        let d = dist(q.vertex(0), q.vertex(1));
        assert!((d - 1.0).abs() < 1e-13);
    }
}
