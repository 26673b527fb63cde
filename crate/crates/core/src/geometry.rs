//! Distance-geometry primitives: Cayley-Menger determinants of four points,
//! their partial derivatives, and oriented triangle areas.
//!
//! Squared distances are the natural variables throughout. A 4-point
//! Cayley-Menger determinant is a polynomial of degree at most two in each
//! squared distance and of total degree three, which several routines below
//! exploit to obtain exact derivatives from function values.

use serde::{Deserialize, Serialize};

/// A point of the plane.
pub type Point2 = [f64; 2];

/// A point of space. Planar points embed as `z = 0`.
pub type Point3 = [f64; 3];

/// Lifts a planar point to the `z = 0` plane.
pub fn lift(p: Point2) -> Point3 {
    [p[0], p[1], 0.0]
}

pub(crate) fn sub2(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn cross2(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dist2(a: Point2, b: Point2) -> f64 {
    let d = sub2(a, b);
    d[0] * d[0] + d[1] * d[1]
}

pub(crate) fn dist(a: Point2, b: Point2) -> f64 {
    dist2(a, b).sqrt()
}

fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Symmetric table of squared pairwise distances between four points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquaredDistanceSet {
    d2: [[f64; 4]; 4],
}

impl SquaredDistanceSet {
    /// Builds the table from the six squared distances
    /// `[d12², d13², d14², d23², d24², d34²]`.
    ///
    /// Returns `None` if any entry is negative or not finite.
    pub fn new(pairs: [f64; 6]) -> Option<Self> {
        if pairs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return None;
        }
        Some(Self::from_pairs_unchecked(pairs))
    }

    /// Same as [`SquaredDistanceSet::new`] without validation. Derivative
    /// routines step slightly outside the realizable cone, so they need this.
    pub(crate) fn from_pairs_unchecked(pairs: [f64; 6]) -> Self {
        let [d12, d13, d14, d23, d24, d34] = pairs;
        Self {
            d2: [
                [0.0, d12, d13, d14],
                [d12, 0.0, d23, d24],
                [d13, d23, 0.0, d34],
                [d14, d24, d34, 0.0],
            ],
        }
    }

    pub fn from_points3(p: &[Point3; 4]) -> Self {
        let d = |i: usize, j: usize| {
            let v = sub3(p[i], p[j]);
            dot3(v, v)
        };
        Self::from_pairs_unchecked([d(0, 1), d(0, 2), d(0, 3), d(1, 2), d(1, 3), d(2, 3)])
    }

    pub fn from_points2(p: &[Point2; 4]) -> Self {
        Self::from_points3(&[lift(p[0]), lift(p[1]), lift(p[2]), lift(p[3])])
    }

    /// Squared distance between points `i` and `j` (zero-based).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d2[i][j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.d2[i][j] = v;
        self.d2[j][i] = v;
    }

    /// Largest squared distance, used as the characteristic scale.
    pub fn scale(&self) -> f64 {
        self.d2
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn bordered(&self) -> [[f64; 5]; 5] {
        let mut m = [[1.0; 5]; 5];
        m[0][0] = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                m[i + 1][j + 1] = self.d2[i][j];
            }
        }
        m
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub(crate) fn det<const N: usize>(mut a: [[f64; N]; N]) -> f64 {
    let mut det = 1.0;
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..N {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    det
}

fn cofactor5(m: &[[f64; 5]; 5], row: usize, col: usize) -> f64 {
    let mut minor = [[0.0; 4]; 4];
    for (mi, i) in (0..5).filter(|&i| i != row).enumerate() {
        for (mj, j) in (0..5).filter(|&j| j != col).enumerate() {
            minor[mi][mj] = m[i][j];
        }
    }
    let sign = if (row + col).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * det(minor)
}

/// The bordered 5×5 Cayley-Menger determinant of four points.
///
/// For a realizable tetrahedron it equals `288·V²`.
pub fn cayley_menger(d: &SquaredDistanceSet) -> f64 {
    det(d.bordered())
}

/// Derivative of [`cayley_menger`] with respect to the squared distance
/// between points `i` and `j`, from the cofactor expansion. Valid for any
/// table, realizable or not.
pub fn cm_partial(d: &SquaredDistanceSet, i: usize, j: usize) -> f64 {
    assert!(i != j && i < 4 && j < 4, "pair must join two distinct points");
    // The variable occupies the two symmetric entries (i+1, j+1), (j+1, i+1).
    2.0 * cofactor5(&d.bordered(), i + 1, j + 1)
}

/// Second derivative of [`cayley_menger`] with respect to the squared
/// distances of pairs `u` and `v`.
///
/// The determinant has degree at most two in each variable and total degree
/// three, so the central differences used here carry no truncation error;
/// only rounding remains.
pub fn cm_second_partial(d: &SquaredDistanceSet, u: (usize, usize), v: (usize, usize)) -> f64 {
    let h = 0.5 * d.scale().max(f64::MIN_POSITIVE.sqrt());
    let eval = |du: f64, dv: f64| {
        let mut e = *d;
        e.set(u.0, u.1, d.get(u.0, u.1) + du);
        e.set(v.0, v.1, e.get(v.0, v.1) + dv);
        cayley_menger(&e)
    };
    let same = (u.0.min(u.1), u.0.max(u.1)) == (v.0.min(v.1), v.0.max(v.1));
    if same {
        let mut plus = *d;
        plus.set(u.0, u.1, d.get(u.0, u.1) + h);
        let mut minus = *d;
        minus.set(u.0, u.1, d.get(u.0, u.1) - h);
        (cayley_menger(&plus) - 2.0 * cayley_menger(d) + cayley_menger(&minus)) / (h * h)
    } else {
        (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
    }
}

/// Oriented area of the triangle `p_i p_j p_k`: `½·cross(p_j − p_i, p_k − p_j)`.
///
/// Positive for counterclockwise triangles. Evaluated as
/// `½·cross(p_j − p_i, p_k − p_i)`, which is the same quantity and makes the
/// antisymmetry in the last two arguments exact in floating point.
pub fn signed_area(pi: Point2, pj: Point2, pk: Point2) -> f64 {
    0.5 * cross2(sub2(pj, pi), sub2(pk, pi))
}

/// The area vector `½·(p_j − p_i) × (p_k − p_j)` of a triangle in space.
pub fn area_vector(pi: Point3, pj: Point3, pk: Point3) -> Point3 {
    let c = cross3(sub3(pj, pi), sub3(pk, pj));
    [0.5 * c[0], 0.5 * c[1], 0.5 * c[2]]
}

/// `∂D/∂d₁₃² = −32·⟨S₁₂₄, S₂₃₄⟩` for four points in space, where `S_ijk` are
/// triangle area vectors.
pub fn cm_partial_x13(p: &[Point3; 4]) -> f64 {
    let s124 = area_vector(p[0], p[1], p[3]);
    let s234 = area_vector(p[1], p[2], p[3]);
    -32.0 * dot3(s124, s234)
}

/// Coplanar form of [`cm_partial_x13`]: `∂D/∂d₁₃² = −32·S₁₂₄·S₂₃₄` with
/// scalar oriented areas.
pub fn cm_partial_x13_planar(p: &[Point2; 4]) -> f64 {
    -32.0 * signed_area(p[0], p[1], p[3]) * signed_area(p[1], p[2], p[3])
}

/// Coplanar derivative of the Cayley-Menger determinant of `p` with respect
/// to the squared distance between points `i` and `j`.
///
/// The determinant is symmetric under relabeling, so the `1–3` formula
/// applies to any pair: with `k`, `l` the two remaining indices,
/// `∂D/∂d_ij² = −32·S_ikl·S_kjl`.
pub fn cm_partial_planar(p: &[Point2; 4], i: usize, j: usize) -> f64 {
    assert!(i != j && i < 4 && j < 4, "pair must join two distinct points");
    let mut rest = (0..4).filter(|&m| m != i && m != j);
    let k = rest.next().unwrap_or(0);
    let l = rest.next().unwrap_or(0);
    -32.0 * signed_area(p[i], p[k], p[l]) * signed_area(p[k], p[j], p[l])
}

/// Volume of the tetrahedron `p₀p₁p₂p₃` from the scalar triple product.
pub fn tetrahedron_volume(p: &[Point3; 4]) -> f64 {
    let a = sub3(p[1], p[0]);
    let b = sub3(p[2], p[0]);
    let c = sub3(p[3], p[0]);
    dot3(a, cross3(b, c)).abs() / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [Point2; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn regular_unit_tetrahedron() {
        let d = SquaredDistanceSet::new([1.0; 6]).unwrap();
        assert!((cayley_menger(&d) - 4.0).abs() < 1e-12);
        // 288·V² with V = 1/(6√2)
        let v = 1.0 / (6.0 * 2f64.sqrt());
        assert!((288.0 * v * v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coplanar_and_repeated_points_vanish() {
        let d = SquaredDistanceSet::from_points2(&SQUARE);
        assert!(cayley_menger(&d).abs() < 1e-12);
        let p = [[0.3, 0.1, 0.2], [0.3, 0.1, 0.2], [1.0, -0.5, 0.7], [0.0, 2.0, 1.0]];
        assert!(cayley_menger(&SquaredDistanceSet::from_points3(&p)).abs() < 1e-12);
    }

    #[test]
    fn negative_entries_rejected() {
        assert!(SquaredDistanceSet::new([1.0, -1.0, 1.0, 1.0, 1.0, 1.0]).is_none());
        assert!(SquaredDistanceSet::new([1.0, f64::NAN, 1.0, 1.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn signed_area_examples() {
        assert_eq!(signed_area([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]), 0.5);
        assert_eq!(signed_area([0.0, 0.0], [1.0, 1.0], [1.0, 0.0]), -0.5);
        assert_eq!(signed_area([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]), 0.0);
    }

    #[test]
    fn square_x13_partial_is_minus_eight() {
        // central difference of the determinant in d13², step 1e-6
        let d = SquaredDistanceSet::from_points2(&SQUARE);
        let h = 1e-6;
        let mut p = d;
        p.set(0, 2, d.get(0, 2) + h);
        let mut m = d;
        m.set(0, 2, d.get(0, 2) - h);
        let fd = (cayley_menger(&p) - cayley_menger(&m)) / (2.0 * h);
        assert!((fd + 8.0).abs() < 1e-6, "fd = {fd}");
        assert!((cm_partial_x13_planar(&SQUARE) + 8.0).abs() < 1e-14);
        assert!((cm_partial_x13(&SQUARE.map(lift)) + 8.0).abs() < 1e-14);
        assert!((cm_partial(&d, 0, 2) + 8.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_point_kills_x13_partial() {
        let p = [[0.5, 0.5, 0.1], [0.5, 0.5, 0.1], [2.0, 0.0, 1.0], [0.0, 1.0, -1.0]];
        assert_eq!(cm_partial_x13(&p), 0.0);
    }

    #[test]
    fn planar_partial_matches_cofactor_for_every_pair() {
        let p = [[0.0, 0.0], [1.3, -0.2], [1.1, 0.9], [-0.1, 0.7]];
        let d = SquaredDistanceSet::from_points2(&p);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let a = cm_partial_planar(&p, i, j);
                    let b = cm_partial(&d, i, j);
                    assert!((a - b).abs() < 1e-12, "pair ({i},{j}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn second_partials_match_nested_differences() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.2, 0.1], [0.4, 1.1, -0.3], [0.2, 0.3, 0.9]];
        let d = SquaredDistanceSet::from_points3(&p);
        let h = 1e-4;
        for u in [(0, 2), (1, 3), (0, 1)] {
            for v in [(0, 2), (1, 3), (2, 3)] {
                let mut a = d;
                a.set(v.0, v.1, d.get(v.0, v.1) + h);
                let mut b = d;
                b.set(v.0, v.1, d.get(v.0, v.1) - h);
                let fd = (cm_partial(&a, u.0, u.1) - cm_partial(&b, u.0, u.1)) / (2.0 * h);
                let exact = cm_second_partial(&d, u, v);
                assert!((fd - exact).abs() < 1e-7, "{u:?} {v:?}: {fd} vs {exact}");
            }
        }
    }
}
