//! Steering a pentagonal linkage by moving the two controlling charges.
//!
//! For fixed `(q₁, q₂, q₄)` every point `(s, t)` of the open positive
//! quadrant has exactly one convex minimum, and every convex configuration
//! arises this way. A path in charge space therefore lifts to a path of
//! configurations, tracked here by warm-started Newton steps.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::moduli::{
    cm_constraints, diagonals, reconstruct_pentagon, Configuration, Convexity, ConvexRegion, Linkage,
};
use crate::potential::{effective_potential, global_min_convex, polish, stationarity_residual, ChargeVector};
use crate::stabilizer::{require_strictly_convex, stabilize_pentagon};

/// Waypoints `(s, t)` in the open positive quadrant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargePath {
    waypoints: Vec<(f64, f64)>,
}

impl ChargePath {
    pub fn new(waypoints: Vec<(f64, f64)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidPath("no waypoints".into()));
        }
        if let Some((s, t)) = waypoints
            .iter()
            .find(|(s, t)| !(*s > 0.0 && *t > 0.0 && s.is_finite() && t.is_finite()))
        {
            return Err(Error::InvalidPath(format!(
                "waypoint ({s}, {t}) leaves the positive quadrant"
            )));
        }
        Ok(Self { waypoints })
    }

    /// `steps` equal increments along the straight segment.
    pub fn segment(start: (f64, f64), end: (f64, f64), steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidPath("steps must be at least 1".into()));
        }
        Self::new(
            (0..=steps)
                .map(|i| {
                    let f = i as f64 / steps as f64;
                    if i == steps {
                        end
                    } else {
                        (start.0 + f * (end.0 - start.0), start.1 + f * (end.1 - start.1))
                    }
                })
                .collect(),
        )
    }

    pub fn waypoints(&self) -> &[(f64, f64)] {
        &self.waypoints
    }

    pub fn steps(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// The same path with a midpoint inserted in every increment.
    pub fn refined(&self) -> ChargePath {
        let mut w = Vec::with_capacity(2 * self.waypoints.len());
        for pair in self.waypoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            w.push(a);
            w.push((0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1)));
        }
        w.push(*self.waypoints.last().expect("non-empty"));
        ChargePath { waypoints: w }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub s: f64,
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "vertices")]
    pub configuration: Configuration,
}

/// Lifted path: one convex minimum per charge waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub linkage: Linkage,
    pub fixed_charges: [f64; 3],
    pub steps: Vec<TrajectoryStep>,
    /// Lifts attempted before the continuity check passed.
    pub attempts: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Configuration {
        &self.steps.last().expect("trajectory is non-empty").configuration
    }

    /// Number of charge increments.
    pub fn increments(&self) -> usize {
        self.steps.len() - 1
    }

    /// Largest displacement between consecutive configurations.
    pub fn max_step(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| w[0].configuration.distance(&w[1].configuration))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "meta": {
                "linkage": self.linkage,
                "fixed_charges": self.fixed_charges,
                "steps": self.increments(),
            },
            "steps": self.steps,
        })
    }

    /// CSV with header `step,s,t,E,x1,y1,…,x5,y5`.
    pub fn to_csv(&self) -> String {
        let n = self.linkage.n();
        let mut out = String::from("step,s,t,E");
        for i in 1..=n {
            out.push_str(&format!(",x{i},y{i}"));
        }
        out.push('\n');
        for (i, st) in self.steps.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{}", st.s, st.t, st.energy));
            for v in st.configuration.vertices() {
                out.push_str(&format!(",{},{}", v[0], v[1]));
            }
            out.push('\n');
        }
        out
    }
}

/// Displacements may not exceed this multiple of the run's median.
pub const CONTINUITY_FACTOR: f64 = 50.0;
/// Step-count doublings tried before reporting a break.
pub const MAX_DOUBLINGS: usize = 4;

fn b2_b4(p: &Configuration) -> Result<(f64, f64)> {
    let b = diagonals(p)?.lengths();
    Ok((b[1], b[3]))
}

fn check_inputs(linkage: &Linkage, fixed: [f64; 3], configs: &[&Configuration]) -> Result<()> {
    linkage.pentagon_sides()?;
    linkage.check_generic()?;
    if !fixed.iter().all(|q| *q > 0.0 && q.is_finite()) {
        return Err(Error::NonPositiveCharge);
    }
    for p in configs {
        p.check_realizes(linkage)?;
        require_strictly_convex(p)?;
    }
    Ok(())
}

fn lift_once(
    linkage: &Linkage,
    path: &ChargePath,
    start: &Configuration,
    fixed: [f64; 3],
) -> Result<Vec<TrajectoryStep>> {
    let w = path.waypoints();
    let q0 = ChargeVector::control(fixed, w[0].0, w[0].1)?;
    let mut steps = vec![TrajectoryStep {
        s: w[0].0,
        t: w[0].1,
        energy: effective_potential(&diagonals(start)?, &q0)?.energy,
        configuration: start.clone(),
    }];
    let (mut b2, mut b4) = b2_b4(start)?;
    for &(s, t) in &w[1..] {
        let q = ChargeVector::control(fixed, s, t)?;
        let m = match polish(linkage, &q, b2, b4) {
            Ok(m) => m,
            Err(_) => global_min_convex(linkage, &q)?,
        };
        b2 = m.b2;
        b4 = m.b4;
        steps.push(TrajectoryStep {
            s,
            t,
            energy: m.energy,
            configuration: m.configuration,
        });
    }
    Ok(steps)
}

/// `(largest jump, bound)` when some displacement exceeds the continuity
/// bound.
fn continuity_violation(steps: &[TrajectoryStep]) -> Option<(f64, f64)> {
    let mut d: Vec<f64> = steps
        .windows(2)
        .map(|w| w[0].configuration.distance(&w[1].configuration))
        .collect();
    if d.len() < 3 {
        return None;
    }
    let jump = d.iter().copied().fold(0.0, f64::max);
    d.sort_by(f64::total_cmp);
    let bound = CONTINUITY_FACTOR * d[d.len() / 2];
    (jump > bound && jump > 1e-9).then_some((jump, bound))
}

/// Lifts a charge path starting from the minimum `start` of its first
/// waypoint. A discontinuous lift is retried with doubled step counts.
pub fn lift_path(
    linkage: &Linkage,
    path: &ChargePath,
    start: &Configuration,
    fixed: [f64; 3],
) -> Result<Trajectory> {
    check_inputs(linkage, fixed, &[start])?;
    let (s0, t0) = path.waypoints()[0];
    let r = stationarity_residual(start, &ChargeVector::control(fixed, s0, t0)?)?;
    if r > 1e-6 {
        return Err(Error::InvalidPath(format!(
            "start configuration is not critical for the first waypoint (residual {r:.3e})"
        )));
    }
    let mut path = path.clone();
    let mut last = None;
    for attempt in 1..=MAX_DOUBLINGS + 1 {
        let steps = lift_once(linkage, &path, start, fixed)?;
        match continuity_violation(&steps) {
            None => {
                return Ok(Trajectory {
                    linkage: linkage.clone(),
                    fixed_charges: fixed,
                    steps,
                    attempts: attempt,
                })
            }
            Some(v) => last = Some((path.steps(), attempt, v)),
        }
        path = path.refined();
    }
    let (steps, attempts, (jump, bound)) = last.expect("at least one attempt");
    Err(Error::ContinuationBreak {
        steps,
        attempts,
        jump,
        bound,
    })
}

/// Moves the linkage from `p0` to `p1` along the straight charge segment
/// between their stabilizing charges.
pub fn navigate(
    linkage: &Linkage,
    p0: &Configuration,
    p1: &Configuration,
    fixed: [f64; 3],
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    check_inputs(linkage, fixed, &[p0, p1])?;
    let a = stabilize_pentagon(p0, fixed)?;
    if p0 == p1 {
        let q = ChargeVector::control(fixed, a.s, a.t)?;
        let energy = effective_potential(&diagonals(p0)?, &q)?.energy;
        let step = TrajectoryStep {
            s: a.s,
            t: a.t,
            energy,
            configuration: p0.clone(),
        };
        return Ok(Trajectory {
            linkage: linkage.clone(),
            fixed_charges: fixed,
            steps: vec![step.clone(), step],
            attempts: 1,
        });
    }
    let b = stabilize_pentagon(p1, fixed)?;
    let path = ChargePath::segment((a.s, a.t), (b.s, b.t), steps)?;
    lift_path(linkage, &path, p0, fixed)
}

/// Norm of `∇ₓE` projected onto the tangent plane of the diagonal image of
/// the moduli space, the null space of the constraint gradients. Accepts any
/// configuration.
fn projected_gradient(p: &Configuration, q: &ChargeVector) -> Result<f64> {
    use nalgebra::{Matrix5, Vector5};
    let pn = p.scaled(1.0 / p.scale());
    let x = diagonals(&pn)?;
    let g = effective_potential(&x, q)?.gradient;
    let c = cm_constraints(&x, &pn.linkage()?)?;
    let m = Matrix5::from_fn(|i, j| c.gradients[i][j]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NumericalConditioning("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let sv = &svd.singular_values;
    if sv[order[2]] <= 1e3 * sv[order[3]].max(1e-300) {
        return Err(Error::NumericalConditioning(
            "constraint gradients do not have rank 3".into(),
        ));
    }
    let grad = Vector5::from_column_slice(&g);
    let tangential: f64 = order[3..]
        .iter()
        .map(|&i| v_t.row(i).transpose().dot(&grad).powi(2))
        .sum();
    Ok(tangential.sqrt())
}

/// Tangential gradient of `E` at a boundary configuration of the convex
/// region, in units of the longest side.
pub fn tangential_gradient(p: &Configuration, q: &ChargeVector) -> Result<f64> {
    match require_strictly_convex(p) {
        Ok(()) => Err(Error::NotOnBoundary),
        Err(Error::BoundaryConfiguration(_)) => projected_gradient(p, q),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScanReport {
    pub samples: usize,
    pub min_tangential_gradient: f64,
    /// `(b₂, b₄)` where the minimum occurs.
    pub argmin: (f64, f64),
}

impl BoundaryScanReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.min_tangential_gradient > tol
    }
}

/// Samples the boundary of the convex region at both ends of `samples / 2`
/// slices and reports the smallest tangential gradient of `E`.
pub fn boundary_criticality_scan(linkage: &Linkage, q: &ChargeVector, samples: usize) -> Result<BoundaryScanReport> {
    q.check_positive()?;
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let (ln, scale) = linkage.normalized();
    let region = ConvexRegion::new(&ln)?;
    let nk = samples / 2;
    let mut best = (f64::INFINITY, (0.0, 0.0));
    let mut count = 0;
    for i in 0..nk {
        let k = region.k_at((i as f64 + 0.5) / nk as f64);
        let s = region.slice(k)?;
        for x2 in [s.x2_min, s.x2_max] {
            let r = reconstruct_pentagon(&ln, x2.sqrt(), k)?;
            if r.status != Convexity::Boundary {
                return Err(Error::NotOnBoundary);
            }
            let g = projected_gradient(&r.configuration, q)?;
            count += 1;
            if g < best.0 {
                best = (g, (x2.sqrt() * scale, k * scale));
            }
        }
    }
    Ok(BoundaryScanReport {
        samples: count,
        min_tangential_gradient: best.0,
        argmin: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::{canonicalize, is_strictly_convex};
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

    #[test]
    fn path_validation() {
        assert!(ChargePath::new(vec![(1.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(ChargePath::segment((1.0, 1.0), (2.0, 2.0), 0).is_err());
        let p = ChargePath::segment((1.0, 1.0), (2.0, 3.0), 4).unwrap();
        assert_eq!(p.steps(), 4);
        assert_eq!(p.waypoints()[4], (2.0, 3.0));
        let r = p.refined();
        assert_eq!(r.steps(), 8);
        assert_eq!(r.waypoints()[2], p.waypoints()[1]);
    }

    #[test]
    fn identity_navigation() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let p = regular();
        let tr = navigate(&l, &p, &p, [1.0; 3], 10).unwrap();
        assert_eq!(tr.increments(), 1);
        for st in &tr.steps {
            assert_eq!(st.configuration, p);
            assert!((st.s - 1.0).abs() < 1e-9 && (st.t - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_path_gives_constant_trajectory() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let path = ChargePath::new(vec![(1.0, 1.0); 5]).unwrap();
        let tr = lift_path(&l, &path, &regular(), [1.0; 3]).unwrap();
        assert!(tr.steps.iter().all(|s| s.configuration.distance(&regular()) < 1e-10));
        let bad = ChargePath::new(vec![(2.0, 1.0)]).unwrap();
        assert!(matches!(lift_path(&l, &bad, &regular(), [1.0; 3]), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn navigation_reaches_target() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let region = ConvexRegion::new(&l).unwrap();
        let p0 = region.configuration_at(0.3, 0.3).unwrap();
        let p1 = region.configuration_at(0.7, 0.6).unwrap();
        let fixed = [1.0, 1.2, 0.8];
        let tr = navigate(&l, &p0, &p1, fixed, 40).unwrap();
        assert_eq!(tr.increments(), 40);
        assert!(tr.last().distance(&p1) < 1e-5);
        assert!(tr.steps.iter().all(|s| is_strictly_convex(&s.configuration)));
        let back = navigate(&l, &p1, &p0, fixed, 40).unwrap();
        assert!(back.last().distance(&p0) < 1e-5);
        let csv = tr.to_csv();
        assert!(csv.starts_with("step,s,t,E,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5\n"));
        assert_eq!(csv.lines().count(), 42);
        let js = tr.to_json();
        assert_eq!(js["meta"]["steps"], 40);
        assert_eq!(js["steps"][0]["vertices"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn boundary_scan() {
        let l = Linkage::equilateral(5, 1.0).unwrap();
        let q = ChargeVector::uniform(5, 1.0).unwrap();
        let r = boundary_criticality_scan(&l, &q, 100).unwrap();
        assert_eq!(r.samples, 100);
        assert!(r.passed(1e-6), "{r:?}");
        assert_eq!(r, boundary_criticality_scan(&l, &q, 100).unwrap());
        assert_eq!(tangential_gradient(&regular(), &q), Err(Error::NotOnBoundary));
    }
}
