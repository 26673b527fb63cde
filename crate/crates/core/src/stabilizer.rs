//! Stabilizing charges: the charge values that make a given convex
//! configuration critical, hence the global convex minimum.
//!
//! For a pentagon the controlling charges are `t` at vertex 3 and `s` at
//! vertex 5; the other vertices carry fixed positive charges.

use nalgebra::{Matrix4, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{
    cm_constraints, diagonal_jacobian, diagonals, is_strictly_convex, quad_curve_gradient, quad_psi,
    Configuration, CONVEXITY_EPS,
};
use crate::potential::{effective_potential, stationarity_residual, ChargeVector};

/// Threshold below which a configuration counts as critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-8;

/// Fails with `NotConvex` for reflex or self-overlapping polygons and with
/// `BoundaryConfiguration` for convex ones with a straight angle.
pub(crate) fn require_strictly_convex(p: &Configuration) -> Result<()> {
    if is_strictly_convex(p) {
        return Ok(());
    }
    let eps = CONVEXITY_EPS * p.scale().powi(2);
    let sign = if p.signed_area2() >= 0.0 { 1.0 } else { -1.0 };
    let angles = p.turning_angles();
    let winding: f64 = angles.iter().sum();
    // a straight angle turns by 0, a spike by ±π
    let aligned_only = (winding.abs() - 2.0 * std::f64::consts::PI).abs() < 1e-6
        && p.turning_crosses()
            .iter()
            .zip(&angles)
            .all(|(c, a)| sign * c > eps || (sign * c >= -eps && a.abs() < 1.0));
    if aligned_only {
        Err(Error::BoundaryConfiguration("three consecutive vertices are aligned".into()))
    } else {
        Err(Error::NotConvex)
    }
}

/// The stabilizing charge `t` of a convex quadrilateral for the potential
/// `E = 1/d₁₃ + t/d₂₄`, i.e. charges `(1, t, 1, 1)`.
pub fn stabilize_quad(p: &Configuration) -> Result<f64> {
    if p.n() != 4 {
        return Err(Error::InvalidArgument(format!("quadrilateral expected, got n = {}", p.n())));
    }
    require_strictly_convex(p)?;
    let pn = p.scaled(1.0 / p.scale());
    let l = pn.linkage()?;
    let xy = quad_psi(&pn)?;
    let [dx, dy] = quad_curve_gradient(&l, xy.x, xy.y)?;
    if dx.abs() <= 1e-14 || dy.abs() <= 1e-14 {
        return Err(Error::BoundaryConfiguration(
            "quadrilateral curve tangent is degenerate".into(),
        ));
    }
    Ok((xy.y / xy.x).powf(1.5) * dy / dx)
}

/// Stationarity residual of a quadrilateral: the component of `∇E` (in
/// squared diagonals) along the unit tangent of `D(x, y) = 0`.
pub fn quad_residual(p: &Configuration, q: &ChargeVector) -> Result<f64> {
    if p.n() != 4 || q.n() != 4 {
        return Err(Error::InvalidArgument("quadrilateral and 4 charges expected".into()));
    }
    let pn = p.scaled(1.0 / p.scale());
    let l = pn.linkage()?;
    let xy = quad_psi(&pn)?;
    let [dx, dy] = quad_curve_gradient(&l, xy.x, xy.y)?;
    let ex = -0.5 * q.c(0, 2) / xy.x.powf(1.5);
    let ey = -0.5 * q.c(1, 3) / xy.y.powf(1.5);
    // tangent (dy, -dx)
    Ok((ex * dy - ey * dx).abs() / dx.hypot(dy))
}

/// Partials of the dependent diagonals in the chart `(b₂, b₄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianEntries {
    /// `∂b₅/∂b₄`
    pub alpha1: f64,
    /// `∂b₃/∂b₄`
    pub beta1: f64,
    /// `∂b₁/∂b₄`
    pub gamma1: f64,
    /// `∂b₅/∂b₂`
    pub alpha2: f64,
    /// `∂b₃/∂b₂`
    pub beta2: f64,
    /// `∂b₁/∂b₂`
    pub gamma2: f64,
}

pub fn pentagon_jacobian(p: &Configuration) -> Result<JacobianEntries> {
    if p.n() != 5 {
        return Err(Error::InvalidArgument(format!("pentagon expected, got n = {}", p.n())));
    }
    require_strictly_convex(p)?;
    let b = diagonals(p)?.lengths();
    let j = diagonal_jacobian(p)?;
    // ∂bᵢ/∂bⱼ = (bⱼ/bᵢ)·∂xᵢ/∂xⱼ
    Ok(JacobianEntries {
        alpha1: b[3] / b[4] * j.d_dx4[4],
        beta1: b[3] / b[2] * j.d_dx4[2],
        gamma1: b[3] / b[0] * j.d_dx4[0],
        alpha2: b[1] / b[4] * j.d_dx2[4],
        beta2: b[1] / b[2] * j.d_dx2[2],
        gamma2: b[1] / b[0] * j.d_dx2[0],
    })
}

/// Coefficients of `A + B·s + C·s² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoeffs {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizingSolution {
    /// Charge at vertex 5.
    pub s: f64,
    /// Charge at vertex 3.
    pub t: f64,
    pub coeffs: QuadraticCoeffs,
    /// The other root of the quadratic (negative).
    pub other_root: f64,
    /// Stationarity residual under the full charge vector.
    pub residual: f64,
}

impl StabilizingSolution {
    pub fn charges(&self, fixed: [f64; 3]) -> Result<ChargeVector> {
        ChargeVector::control(fixed, self.s, self.t)
    }
}

fn check_fixed(fixed: [f64; 3]) -> Result<()> {
    if fixed.iter().all(|q| *q > 0.0 && q.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonPositiveCharge)
    }
}

/// The quadratic for `s` at a convex pentagon with fixed charges
/// `(q₁, q₂, q₄)`, computed in units of the longest side.
pub fn quadratic_coeffs(p: &Configuration, fixed: [f64; 3]) -> Result<QuadraticCoeffs> {
    check_fixed(fixed)?;
    let pn = p.scaled(1.0 / p.scale());
    let j = pentagon_jacobian(&pn)?;
    let [b1, b2, b3, b4, b5] = diagonals(&pn)?.lengths();
    let [q1, q2, q4] = fixed;
    let a = q1 * q4 * j.alpha1 / (b5 * b5) + q2 * q4 * j.beta1 / (b3 * b3);
    let b = q2 * j.gamma1 / (b1 * b1)
        - (b2 * b2 / (b4 * b4)) * (q4 * j.alpha2 / (b5 * b5) + q2 * q4 * j.beta2 / (q1 * b3 * b3));
    let c = -b2 * b2 * j.gamma2 * q2 / (q1 * b4 * b4 * b1 * b1);
    Ok(QuadraticCoeffs { a, b, c })
}

/// Roots of `a + b·s + c·s²` without cancellation.
fn stable_roots(k: QuadraticCoeffs) -> Option<(f64, f64)> {
    let disc = k.b * k.b - 4.0 * k.a * k.c;
    if disc < 0.0 || k.c == 0.0 {
        return None;
    }
    let w = -0.5 * (k.b + k.b.signum() * disc.sqrt());
    if w == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((w / k.c, k.a / w))
}

/// The unique positive `(s, t)` making `p` critical for the charges
/// `(q₁, q₂, t, q₄, s)`.
pub fn stabilize_pentagon(p: &Configuration, fixed: [f64; 3]) -> Result<StabilizingSolution> {
    if p.n() != 5 {
        return Err(Error::InvalidArgument(format!("pentagon expected, got n = {}", p.n())));
    }
    check_fixed(fixed)?;
    require_strictly_convex(p)?;
    let coeffs = quadratic_coeffs(p, fixed)?;
    if coeffs.c.abs() < 1e-14 {
        return Err(Error::NumericalConditioning(format!(
            "leading coefficient {:.3e} too small to solve for s",
            coeffs.c
        )));
    }
    let (r1, r2) = stable_roots(coeffs)
        .ok_or_else(|| Error::NumericalConditioning("quadratic has no real roots".into()))?;
    let (s, other_root) = if r1 > 0.0 && r2 <= 0.0 {
        (r1, r2)
    } else if r2 > 0.0 && r1 <= 0.0 {
        (r2, r1)
    } else {
        return Err(Error::NumericalConditioning(format!(
            "expected one positive root, got {r1} and {r2}"
        )));
    };
    let pn = p.scaled(1.0 / p.scale());
    let j = pentagon_jacobian(&pn)?;
    let [b1, _, _, b4, _] = diagonals(&pn)?.lengths();
    // -∂E/∂b₄ = 0 is linear in t once s is known
    let t = -b4 * b4 * (coeffs.a + fixed[1] * j.gamma1 * s / (b1 * b1)) / s;
    if !(t > 0.0) {
        return Err(Error::NumericalConditioning(format!("recovered t = {t} is not positive")));
    }
    let residual = stationarity_residual(p, &ChargeVector::control(fixed, s, t)?)?;
    Ok(StabilizingSolution {
        s,
        t,
        coeffs,
        other_root,
        residual,
    })
}

/// Which vertices carry the controlling charges (one-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPlacement {
    pub s_vertex: usize,
    pub t_vertex: usize,
}

impl Default for ControlPlacement {
    fn default() -> Self {
        Self {
            s_vertex: 5,
            t_vertex: 3,
        }
    }
}

impl ControlPlacement {
    /// The dihedral relabeling `σ` (zero-based, `new = σ(old)`) that moves the
    /// controls onto vertices 5 and 3.
    pub fn relabeling(&self) -> Result<[usize; 5]> {
        let (s, t) = (self.s_vertex, self.t_vertex);
        if !(1..=5).contains(&s) || !(1..=5).contains(&t) || s == t {
            return Err(Error::InvalidArgument(format!(
                "control vertices must be distinct in 1..=5, got {s} and {t}"
            )));
        }
        let (s, t) = (s - 1, t - 1);
        for r in 0..5 {
            let rot = |j: usize| (j + r) % 5;
            if rot(s) == 4 && rot(t) == 2 {
                return Ok(std::array::from_fn(rot));
            }
            let refl = |j: usize| (r + 5 - j) % 5;
            if refl(s) == 4 && refl(t) == 2 {
                return Ok(std::array::from_fn(refl));
            }
        }
        Err(Error::AdjacentControls(self.s_vertex, self.t_vertex))
    }
}

/// [`stabilize_pentagon`] with the controls on any non-adjacent pair of
/// vertices. `q` gives the charges in the original labels; its entries at the
/// control vertices are ignored and replaced in the result.
pub fn stabilize_with_controls(
    p: &Configuration,
    q: &ChargeVector,
    placement: ControlPlacement,
) -> Result<ChargeVector> {
    if p.n() != 5 || q.n() != 5 {
        return Err(Error::InvalidArgument("pentagon with 5 charges expected".into()));
    }
    let sigma = placement.relabeling()?;
    let mut inv = [0; 5];
    for (old, new) in sigma.iter().enumerate() {
        inv[*new] = old;
    }
    let moved = crate::moduli::canonicalize(&(0..5).map(|j| p.vertex(inv[j])).collect::<Vec<_>>())?;
    let fixed = [q.q(inv[0]), q.q(inv[1]), q.q(inv[3])];
    let sol = stabilize_pentagon(&moved, fixed)?;
    let mut out = q.as_slice().to_vec();
    out[placement.s_vertex - 1] = sol.s;
    out[placement.t_vertex - 1] = sol.t;
    ChargeVector::new(out)
}

/// The Lagrange matrix of `∇E` stacked on independent constraint gradients
/// in diagonal coordinates, rows normalized, with its maximal minors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSystem {
    pub matrix: Vec<Vec<f64>>,
    pub minors: Vec<f64>,
}

impl RankSystem {
    pub fn max_minor(&self) -> f64 {
        self.minors.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.into_iter().map(|a| a / n).collect()
    } else {
        v
    }
}

/// `J(P)`: rows `∇E, ∇D₁, ∇D₂, ∇D₄` for a pentagon (a 4×5 matrix with five
/// 4×4 minors), or `∇E, ∇D` for a quadrilateral (one 2×2 minor). All minors
/// vanish exactly when `P` is critical for `q`.
pub fn rank_system(p: &Configuration, q: &ChargeVector) -> Result<RankSystem> {
    if q.n() != p.n() {
        return Err(Error::InvalidArgument("one charge per vertex expected".into()));
    }
    let pn = p.scaled(1.0 / p.scale());
    match p.n() {
        5 => {
            let l = pn.linkage()?;
            let x = diagonals(&pn)?;
            let e = effective_potential(&x, q)?;
            let c = cm_constraints(&x, &l)?;
            let rows: Vec<Vec<f64>> = [e.gradient, c.gradients[0], c.gradients[1], c.gradients[3]]
                .iter()
                .map(|r| unit(r.to_vec()))
                .collect();
            let m = SMatrix::<f64, 4, 5>::from_fn(|i, j| rows[i][j]);
            let minors = (0..5)
                .map(|drop| {
                    let cols: Vec<usize> = (0..5).filter(|j| *j != drop).collect();
                    Matrix4::from_fn(|i, j| m[(i, cols[j])]).determinant()
                })
                .collect();
            Ok(RankSystem { matrix: rows, minors })
        }
        4 => {
            let xy = quad_psi(&pn)?;
            let grad_e = unit(vec![
                -0.5 * q.c(0, 2) / xy.x.powf(1.5),
                -0.5 * q.c(1, 3) / xy.y.powf(1.5),
            ]);
            let grad_d = unit(quad_curve_gradient(&pn.linkage()?, xy.x, xy.y)?.to_vec());
            let minor = grad_e[0] * grad_d[1] - grad_e[1] * grad_d[0];
            Ok(RankSystem {
                matrix: vec![grad_e, grad_d],
                minors: vec![minor],
            })
        }
        n => Err(Error::InvalidArgument(format!("rank system implemented for n = 4, 5, got {n}"))),
    }
}

/// For a quadrilateral the single minor is `A·q₁q₃ + B·q₂q₄` (unnormalized);
/// returns `(A, B)`.
pub fn quad_rank_coefficients(p: &Configuration) -> Result<(f64, f64)> {
    let xy = quad_psi(p)?;
    let [dx, dy] = quad_curve_gradient(&p.linkage()?, xy.x, xy.y)?;
    Ok((-0.5 * dy / xy.x.powf(1.5), 0.5 * dx / xy.y.powf(1.5)))
}

/// Upper bound on the number of isolated stabilizing charge solutions.
pub fn bezout_bound(n: usize) -> Result<u64> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("a {n}-gon has no diagonals")));
    }
    if n - 3 >= 64 {
        return Err(Error::InvalidArgument(format!("n = {n} overflows the bound")));
    }
    Ok(1u64 << (n - 3))
}

/// With controlling charges of opposite sign a convex pentagon cannot be
/// critical; returns whether the residual exceeds `1e-6`.
pub fn mixed_sign_noncritical(p: &Configuration, fixed: [f64; 3], s: f64, t: f64) -> Result<bool> {
    if !(s * t < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "controlling charges must have opposite signs, got s = {s}, t = {t}"
        )));
    }
    check_fixed(fixed)?;
    require_strictly_convex(p)?;
    Ok(stationarity_residual(p, &ChargeVector::control(fixed, s, t)?)? > 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::{canonicalize, reconstruct_quad, ConvexRegion, Linkage};
    use crate::potential::global_min_convex;
    use std::f64::consts::PI;

    fn regular() -> Configuration {
        let r = 1.0 / (2.0 * (PI / 5.0).sin());
        let v: Vec<[f64; 2]> = (0..5)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 5.0;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        canonicalize(&v).unwrap()
    }

    fn skew_config() -> Configuration {
        let l = Linkage::new(vec![1.0, 0.8, 0.9, 0.7, 0.85]).unwrap();
        ConvexRegion::new(&l).unwrap().configuration_at(0.35, 0.6).unwrap()
    }

    #[test]
    fn regular_pentagon_is_balanced_by_unit_charges() {
        let sol = stabilize_pentagon(&regular(), [1.0, 1.0, 1.0]).unwrap();
        assert!((sol.s - 1.0).abs() < 1e-9 && (sol.t - 1.0).abs() < 1e-9, "{sol:?}");
        assert!(sol.residual < 1e-12);
        assert!(sol.coeffs.a * sol.coeffs.c < 0.0);
        assert!(sol.other_root < 0.0);
    }

    #[test]
    fn jacobian_signs() {
        for p in [regular(), skew_config()] {
            let j = pentagon_jacobian(&p).unwrap();
            assert!(j.gamma1 > 0.0 && j.alpha2 > 0.0, "{j:?}");
            assert!(j.gamma2 < 0.0 && j.alpha1 < 0.0 && j.beta1 < 0.0 && j.beta2 < 0.0, "{j:?}");
        }
    }

    #[test]
    fn stabilized_configuration_is_the_minimum() {
        let p = skew_config();
        let fixed = [1.3, 0.7, 1.1];
        let sol = stabilize_pentagon(&p, fixed).unwrap();
        assert!(sol.s > 0.0 && sol.t > 0.0);
        assert!(sol.residual < CRITICAL_TOLERANCE);
        let q = sol.charges(fixed).unwrap();
        let m = global_min_convex(&p.linkage().unwrap(), &q).unwrap();
        assert!(m.configuration.distance(&p) < 1e-6);
        let rs = rank_system(&p, &q).unwrap();
        assert!(rs.max_minor() < 1e-8, "{rs:?}");
        let off = ChargeVector::control(fixed, sol.s * 1.5, sol.t).unwrap();
        assert!(rank_system(&p, &off).unwrap().max_minor() > 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let reflex = canonicalize(&[[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 0.5], [0.0, 2.0]]).unwrap();
        assert_eq!(stabilize_pentagon(&reflex, [1.0; 3]).unwrap_err(), Error::NotConvex);
        let flat = canonicalize(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.5, 1.0], [0.2, 1.0]]).unwrap();
        assert!(matches!(pentagon_jacobian(&flat), Err(Error::BoundaryConfiguration(_))));
        assert_eq!(stabilize_pentagon(&regular(), [1.0, 0.0, 1.0]).unwrap_err(), Error::NonPositiveCharge);
    }

    #[test]
    fn quadrilateral() {
        let sq = canonicalize(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!((stabilize_quad(&sq).unwrap() - 1.0).abs() < 1e-12);
        let l = Linkage::new(vec![1.0, 0.7, 0.9, 0.8]).unwrap();
        let p = reconstruct_quad(&l, 1.1).unwrap().configuration;
        let t = stabilize_quad(&p).unwrap();
        assert!(t > 0.0);
        let q = ChargeVector::new(vec![1.0, t, 1.0, 1.0]).unwrap();
        assert!(quad_residual(&p, &q).unwrap() < 1e-12);
        assert!(rank_system(&p, &q).unwrap().max_minor() < 1e-12);
        let (a, b) = quad_rank_coefficients(&p).unwrap();
        assert!(a * b < 0.0);
        let dart = canonicalize(&[[0.0, 0.0], [2.0, 0.0], [1.0, 0.3], [0.0, 2.0]]).unwrap();
        assert_eq!(stabilize_quad(&dart).unwrap_err(), Error::NotConvex);
    }

    #[test]
    fn bezout() {
        assert_eq!(bezout_bound(4).unwrap(), 2);
        assert_eq!(bezout_bound(5).unwrap(), 4);
        assert!(bezout_bound(3).is_err());
    }

    #[test]
    fn mixed_signs() {
        assert!(mixed_sign_noncritical(&regular(), [1.0; 3], 1.0, -1.0).unwrap());
        assert!(mixed_sign_noncritical(&regular(), [1.0; 3], -1.0, 1.0).unwrap());
        assert!(mixed_sign_noncritical(&regular(), [1.0; 3], 1.0, 1.0).is_err());
    }

    #[test]
    fn control_relabeling() {
        assert_eq!(ControlPlacement::default().relabeling().unwrap(), [0, 1, 2, 3, 4]);
        let adj = ControlPlacement { s_vertex: 1, t_vertex: 2 };
        assert_eq!(adj.relabeling().unwrap_err(), Error::AdjacentControls(1, 2));
        // controls on 1 and 3 make the regular pentagon critical with unit charges
        let q = ChargeVector::uniform(5, 1.0).unwrap();
        for (s, t) in [(1, 3), (3, 1), (2, 4), (4, 1)] {
            let out = stabilize_with_controls(&regular(), &q, ControlPlacement { s_vertex: s, t_vertex: t }).unwrap();
            for v in out.as_slice() {
                assert!((v - 1.0).abs() < 1e-9, "{out:?}");
            }
        }
        let p = skew_config();
        let q = ChargeVector::new(vec![1.2, 0.0, 0.8, 0.0, 1.1]).unwrap();
        let out = stabilize_with_controls(&p, &q, ControlPlacement { s_vertex: 2, t_vertex: 4 }).unwrap();
        assert!(stationarity_residual(&p, &out).unwrap() < 1e-9, "{out:?}");
    }
}
