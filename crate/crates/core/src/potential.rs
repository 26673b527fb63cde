//! The effective Coulomb potential and its minimization over convex
//! pentagons.
//!
//! `E` sums `qᵢqⱼ/dᵢⱼ` over non-neighbouring vertex pairs. For a pentagon these
//! are exactly the five diagonals, so in squared-diagonal coordinates
//! `E = c₂₅/b₁ + c₁₃/b₂ + c₂₄/b₃ + c₃₅/b₄ + c₁₄/b₅`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::moduli::{
    cm_constraint_hessian, cm_constraints, diagonal_jacobian, diagonals, reconstruct_pentagon,
    reconstruct_strict, slice_range, Configuration, ConvexRegion, DiagonalCoords, Linkage,
};

/// Vertex charges `q₁..qₙ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ChargeVector(Vec<f64>);

impl TryFrom<Vec<f64>> for ChargeVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ChargeVector::new(v)
    }
}

impl From<ChargeVector> for Vec<f64> {
    fn from(q: ChargeVector) -> Self {
        q.0
    }
}

impl ChargeVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.len() < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 charges, got {}", q.len())));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("charges must be finite".into()));
        }
        Ok(Self(q))
    }

    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; n])
    }

    /// The control pattern `(q₁, q₂, t, q₄, s)`: `t` sits at vertex 3 and `s`
    /// at vertex 5.
    pub fn control(fixed: [f64; 3], s: f64, t: f64) -> Result<Self> {
        Self::new(vec![fixed[0], fixed[1], t, fixed[2], s])
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `qᵢ` (zero-based).
    pub fn q(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `cᵢⱼ = qᵢqⱼ` (zero-based).
    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.0[i] * self.0[j]
    }

    pub fn check_positive(&self) -> Result<()> {
        if self.0.iter().all(|q| *q > 0.0) {
            Ok(())
        } else {
            Err(Error::NonPositiveCharge)
        }
    }

    /// Coefficient of `1/bᵢ₊₁` in the pentagon potential.
    pub(crate) fn diagonal_weights(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.c((i + 4) % 5, (i + 1) % 5))
    }
}

/// Energy and its gradient in `x = (x₁..x₅)` as a function on `ℝ⁵`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub gradient: [f64; 5],
}

fn check_pentagon_charges(q: &ChargeVector) -> Result<()> {
    if q.n() != 5 {
        return Err(Error::InvalidArgument(format!("5 charges expected, got {}", q.n())));
    }
    Ok(())
}

/// `E(x)` with `∂E/∂xᵢ = −½·w/xᵢ^{3/2}`.
pub fn effective_potential(x: &DiagonalCoords, q: &ChargeVector) -> Result<EnergyReport> {
    check_pentagon_charges(q)?;
    if let Some((i, v)) = x.0.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateDistance {
            index: i + 1,
            value: *v,
        });
    }
    let w = q.diagonal_weights();
    let mut energy = 0.0;
    let mut gradient = [0.0; 5];
    for i in 0..5 {
        let b = x.0[i].sqrt();
        energy += w[i] / b;
        gradient[i] = -0.5 * w[i] / (x.0[i] * b);
    }
    Ok(EnergyReport { energy, gradient })
}

fn check_charges_for(p: &Configuration, q: &ChargeVector) -> Result<()> {
    if q.n() != p.n() {
        return Err(Error::InvalidArgument(format!(
            "{} charges for {} vertices",
            q.n(),
            p.n()
        )));
    }
    Ok(())
}

fn pair_distance(p: &Configuration, i: usize, j: usize) -> Result<f64> {
    let d = dist(p.vertex(i), p.vertex(j));
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::CoincidentVertices(i + 1, j + 1))
    }
}

/// Effective potential of any polygon: non-neighbouring pairs only.
pub fn configuration_energy(p: &Configuration, q: &ChargeVector) -> Result<f64> {
    check_charges_for(p, q)?;
    let n = p.n();
    let mut e = 0.0;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            e += q.c(i, j) / pair_distance(p, i, j)?;
        }
    }
    Ok(e)
}

/// Coulomb energy over all unordered vertex pairs, edges included.
pub fn full_potential(p: &Configuration, q: &ChargeVector) -> Result<f64> {
    check_charges_for(p, q)?;
    let n = p.n();
    let mut e = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let c = q.c(i, j);
            if c != 0.0 {
                e += c / pair_distance(p, i, j)?;
            }
        }
    }
    Ok(e)
}

/// `(∂E/∂b₂, ∂E/∂b₄)` on the moduli space, with `b₂`, `b₄` as local
/// coordinates. Vanishes exactly at critical configurations.
pub fn surface_gradient(p: &Configuration, q: &ChargeVector) -> Result<[f64; 2]> {
    let x = diagonals(p)?;
    let g = effective_potential(&x, q)?.gradient;
    let j = diagonal_jacobian(p)?;
    let dot = |v: &[f64; 5]| g.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    Ok([
        2.0 * x.0[1].sqrt() * dot(&j.d_dx2),
        2.0 * x.0[3].sqrt() * dot(&j.d_dx4),
    ])
}

/// `‖(∂E/∂b₂, ∂E/∂b₄)‖` after rescaling the configuration to unit longest side.
pub fn stationarity_residual(p: &Configuration, q: &ChargeVector) -> Result<f64> {
    let pn = p.scaled(1.0 / p.scale());
    let [g2, g4] = surface_gradient(&pn, q)?;
    Ok(g2.hypot(g4))
}

/// Energy and its first two derivatives along a slice, `′ = d/dx₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDerivatives {
    pub x2: f64,
    pub energy: f64,
    pub de: f64,
    pub d2e: f64,
    /// `xᵢ′`; entry 1 is 1 and entry 3 is 0.
    pub dx: [f64; 5],
    pub d2x: [f64; 5],
}

/// `E′` and `E″` at the point `x₂` of the slice `b₄ = k`.
///
/// The first derivatives of the diagonals come from oriented-area ratios,
/// the second from implicitly differentiating `D₄`, `D₂` and `D₁` once more.
pub fn slice_derivatives(linkage: &Linkage, q: &ChargeVector, k: f64, x2: f64) -> Result<SliceDerivatives> {
    check_pentagon_charges(q)?;
    let p = reconstruct_strict(linkage, x2.sqrt(), k).map_err(|e| match e {
        Error::BoundaryConfiguration(_) => Error::BoundarySlicePoint,
        e => e,
    })?;
    let x = diagonals(&p)?;
    let report = effective_potential(&x, q)?;
    let dx = diagonal_jacobian(&p)
        .map_err(|_| Error::BoundarySlicePoint)?
        .d_dx2;

    let c = cm_constraints(&x, linkage)?;
    let g = &c.gradients;
    let h1 = cm_constraint_hessian(&x, linkage, 0)?;
    let h2 = cm_constraint_hessian(&x, linkage, 1)?;
    let h4 = cm_constraint_hessian(&x, linkage, 3)?;
    let (x1p, x3p, x5p) = (dx[0], dx[2], dx[4]);
    // D4(x1, x2) = 0
    let x1pp = -(h4[0][0] * x1p * x1p + 2.0 * h4[0][1] * x1p + h4[1][1]) / g[3][0];
    // D2(x2, x5) = 0
    let x5pp = -(h2[4][4] * x5p * x5p + 2.0 * h2[1][4] * x5p + h2[1][1]) / g[1][4];
    // D1(x1, x3) = 0 with x1 moving
    let x3pp = -(h1[0][0] * x1p * x1p + 2.0 * h1[0][2] * x1p * x3p + h1[2][2] * x3p * x3p + g[0][0] * x1pp)
        / g[0][2];
    let d2x = [x1pp, 0.0, x3pp, 0.0, x5pp];

    let w = q.diagonal_weights();
    let mut de = 0.0;
    let mut d2e = 0.0;
    for i in 0..5 {
        let xi = x.0[i];
        let hess = 0.75 * w[i] / (xi * xi * xi.sqrt());
        de += report.gradient[i] * dx[i];
        d2e += hess * dx[i] * dx[i] + report.gradient[i] * d2x[i];
    }
    Ok(SliceDerivatives {
        x2,
        energy: report.energy,
        de,
        d2e,
        dx,
        d2x,
    })
}

/// Minimum of `E` restricted to one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMinimizer {
    pub k: f64,
    pub x2: f64,
    pub energy: f64,
    pub on_boundary: bool,
}

/// Energy at `(b₂, b₄)`, accepting aligned (boundary) configurations.
pub(crate) fn energy_at(linkage: &Linkage, q: &ChargeVector, b2: f64, b4: f64) -> Result<f64> {
    let r = reconstruct_pentagon(linkage, b2, b4)?;
    Ok(effective_potential(&diagonals(&r.configuration)?, q)?.energy)
}

/// Unique minimizer of `E` on the slice `b₄ = k`. `E″ > 0` in the interior,
/// so a sign change of `E′` brackets a single stationary point which is
/// found by safeguarded Newton; otherwise the minimum is an endpoint.
pub fn slice_minimize(linkage: &Linkage, q: &ChargeVector, k: f64) -> Result<SliceMinimizer> {
    slice_minimize_from(linkage, q, k, 0.5)
}

/// [`slice_minimize`] with the Newton iteration started at fraction `u0` of
/// the slice.
pub fn slice_minimize_from(linkage: &Linkage, q: &ChargeVector, k: f64, u0: f64) -> Result<SliceMinimizer> {
    check_pentagon_charges(q)?;
    let slice = slice_range(linkage, k)?;
    let boundary_min = |x2s: &[f64]| -> Result<SliceMinimizer> {
        let mut best: Option<SliceMinimizer> = None;
        for &x2 in x2s {
            let energy = energy_at(linkage, q, x2.sqrt(), k)?;
            if best.is_none_or(|b| energy < b.energy) {
                best = Some(SliceMinimizer {
                    k,
                    x2,
                    energy,
                    on_boundary: true,
                });
            }
        }
        best.ok_or(Error::EmptySlice { k })
    };
    if slice.terminal || slice.width() <= 1e-13 * slice.x2_max {
        return boundary_min(&[0.5 * (slice.x2_min + slice.x2_max)]);
    }
    let inner = |from_left: bool| -> Option<SliceDerivatives> {
        [1e-11, 1e-9, 1e-7, 1e-5, 1e-3].iter().find_map(|&u| {
            let u = if from_left { u } else { 1.0 - u };
            slice_derivatives(linkage, q, k, slice.x2_at(u)).ok()
        })
    };
    let (left, right) = match (inner(true), inner(false)) {
        (Some(l), Some(r)) => (l, r),
        _ => return boundary_min(&[slice.x2_min, slice.x2_max]),
    };
    if left.de >= 0.0 || right.de <= 0.0 {
        return boundary_min(&[slice.x2_min, slice.x2_max]);
    }
    let (mut a, mut b) = (left.x2, right.x2);
    let mut x = slice.x2_at(u0.clamp(1e-3, 1.0 - 1e-3));
    let mut best = left;
    for _ in 0..300 {
        let d = slice_derivatives(linkage, q, k, x)?;
        best = d;
        if d.de == 0.0 {
            break;
        }
        if d.de < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - d.de / d.d2e;
        let next = if d.d2e > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let converged = (next - x).abs() <= 1e-15 * x || b - a <= 1e-15 * b;
        x = next;
        if converged {
            best = slice_derivatives(linkage, q, k, x).unwrap_or(best);
            break;
        }
    }
    Ok(SliceMinimizer {
        k,
        x2: best.x2,
        energy: best.energy,
        on_boundary: false,
    })
}

/// Slice minimizers over a grid of `b₄` values. Components are maximal runs
/// of interior minimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarCurve {
    pub points: Vec<SliceMinimizer>,
    /// Half-open index ranges into `points`.
    pub components: Vec<(usize, usize)>,
}

impl PolarCurve {
    /// Interior local extrema of `k ↦ E` within each component, counted as
    /// sign changes of the discrete slope.
    pub fn stationary_counts(&self) -> Vec<usize> {
        self.components
            .iter()
            .map(|&(lo, hi)| {
                let e: Vec<f64> = self.points[lo..hi].iter().map(|p| p.energy).collect();
                let slopes: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).collect();
                slopes.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,x2,E,on_boundary\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.k, p.x2, p.energy, p.on_boundary));
        }
        out
    }
}

pub fn trace_polar_curve(linkage: &Linkage, q: &ChargeVector, k_grid: &[f64]) -> Result<PolarCurve> {
    let points = k_grid
        .iter()
        .map(|&k| slice_minimize(linkage, q, k))
        .collect::<Result<Vec<_>>>()?;
    let mut components = Vec::new();
    let mut start = None;
    for (i, p) in points.iter().enumerate() {
        match (p.on_boundary, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                components.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        components.push((s, points.len()));
    }
    Ok(PolarCurve { points, components })
}

/// A critical configuration with its chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub configuration: Configuration,
    pub energy: f64,
    pub b2: f64,
    pub b4: f64,
    /// `‖(∂E/∂b₂, ∂E/∂b₄)‖` in units of the longest side.
    pub residual: f64,
}

fn gradient_at(linkage: &Linkage, q: &ChargeVector, b2: f64, b4: f64) -> Result<[f64; 2]> {
    surface_gradient(&reconstruct_strict(linkage, b2, b4)?, q)
}

/// Newton iteration for `∇E = 0` in the chart `(b₂, b₄)`, started at a
/// strictly convex point. The Hessian is a central difference of the
/// analytic gradient.
pub fn polish(linkage: &Linkage, q: &ChargeVector, b2: f64, b4: f64) -> Result<Minimum> {
    check_pentagon_charges(q)?;
    let (ln, scale) = linkage.normalized();
    let (mut u, mut v) = (b2 / scale, b4 / scale);
    let mut g = gradient_at(&ln, q, u, v)?;
    let norm = |g: [f64; 2]| g[0].hypot(g[1]);
    let h = 1e-6;
    for _ in 0..60 {
        if norm(g) <= 1e-14 {
            break;
        }
        let gu = |du: f64, dv: f64| gradient_at(&ln, q, u + du, v + dv);
        let hess = match (gu(h, 0.0), gu(-h, 0.0), gu(0.0, h), gu(0.0, -h)) {
            (Ok(a), Ok(b), Ok(c), Ok(d)) => {
                let huu = (a[0] - b[0]) / (2.0 * h);
                let hvv = (c[1] - d[1]) / (2.0 * h);
                let huv = 0.5 * ((a[1] - b[1]) + (c[0] - d[0])) / (2.0 * h);
                Some([[huu, huv], [huv, hvv]])
            }
            _ => None,
        };
        let mut dir = [-g[0], -g[1]];
        if let Some([[a, b], [_, d]]) = hess {
            let det = a * d - b * b;
            if a > 0.0 && det > 0.0 {
                dir = [-(d * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det];
            }
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let (nu, nv) = (u + step * dir[0], v + step * dir[1]);
            if let Ok(ng) = gradient_at(&ln, q, nu, nv) {
                if norm(ng) < norm(g) {
                    u = nu;
                    v = nv;
                    g = ng;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let residual = norm(g);
    if !(residual <= 1e-9) {
        return Err(Error::NoConvergence(format!(
            "Newton polish stalled with gradient norm {residual:.3e}"
        )));
    }
    let p = reconstruct_strict(&ln, u, v)?;
    let energy = effective_potential(&diagonals(&p)?, q)?.energy;
    Ok(Minimum {
        configuration: p.scaled(scale),
        energy: energy / scale,
        b2: u * scale,
        b4: v * scale,
        residual,
    })
}

fn check_control_inputs(linkage: &Linkage, q: &ChargeVector) -> Result<()> {
    linkage.pentagon_sides()?;
    check_pentagon_charges(q)?;
    q.check_positive()?;
    linkage.check_generic()
}

/// The unique critical point of `E` among convex configurations, which is
/// its global minimum there.
///
/// `g(k) = min E|_{slice k}` is scanned between the terminals, refined by
/// golden section and the result polished by Newton in `(b₂, b₄)`.
pub fn global_min_convex(linkage: &Linkage, q: &ChargeVector) -> Result<Minimum> {
    check_control_inputs(linkage, q)?;
    let (ln, scale) = linkage.normalized();
    let region = ConvexRegion::new(&ln)?;
    let g = |v: f64| -> f64 {
        slice_minimize(&ln, q, region.k_at(v))
            .map(|m| m.energy)
            .unwrap_or(f64::INFINITY)
    };
    const SCAN: usize = 64;
    let at = |i: usize| (i as f64 + 0.5) / SCAN as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..SCAN {
        let e = g(at(i));
        if e < best {
            best = e;
            best_i = i;
        }
    }
    let mut a = if best_i == 0 { 1e-9 } else { at(best_i - 1) };
    let mut b = if best_i == SCAN - 1 { 1.0 - 1e-9 } else { at(best_i + 1) };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let v = if fc < fd { c } else { d };
    let v = if g(v) <= best { v } else { at(best_i) };
    let k = region.k_at(v);
    let sm = slice_minimize(&ln, q, k)?;
    let x2 = if sm.on_boundary {
        region.slice(k)?.x2_at(0.5)
    } else {
        sm.x2
    };
    let m = polish(&ln, q, x2.sqrt(), k)?;
    Ok(Minimum {
        configuration: m.configuration.scaled(scale),
        energy: m.energy / scale,
        b2: m.b2 * scale,
        b4: m.b4 * scale,
        residual: m.residual,
    })
}

/// Result of an exhaustive grid search for local minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueMinReport {
    pub grid: usize,
    /// Strict local minima among nodes with a full 8-neighbourhood, as
    /// `(b₂, b₄, E)`.
    pub candidates: Vec<(f64, f64, f64)>,
    /// Distinct minima the candidates polish to. Narrow valleys running
    /// across the grid alias into several adjacent candidates; they merge here.
    pub minima: Vec<(f64, f64, f64)>,
    /// Stationary points of `g(k)` per polar-curve component.
    pub polar_stationary: Vec<usize>,
}

impl UniqueMinReport {
    pub fn passed(&self) -> bool {
        self.minima.len() == 1 && self.polar_stationary.iter().all(|c| *c <= 1)
    }
}

/// Cell centre `i` of `n`, pushed towards both ends by `(1 − cos πv)/2`.
fn cluster(i: usize, n: usize) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos())
}

/// Searches a `grid × grid` chart of the convex region for strict local
/// minima of `E`. Rows are `b₄` values clustered towards the terminals, where
/// `E` behaves like a square root and a uniform grid can miss a minimum
/// hugging the edge; columns are cell-centre fractions of each slice.
pub fn verify_unique_min(linkage: &Linkage, q: &ChargeVector, grid: usize) -> Result<UniqueMinReport> {
    check_pentagon_charges(q)?;
    if grid < 3 {
        return Err(Error::InvalidArgument("grid must be at least 3".into()));
    }
    let (ln, scale) = linkage.normalized();
    let region = ConvexRegion::new(&ln)?;
    let mut ks = Vec::with_capacity(grid);
    let mut e = vec![f64::INFINITY; grid * grid];
    let mut coords = vec![(0.0, 0.0); grid * grid];
    let w = q.diagonal_weights();
    for i in 0..grid {
        let k = region.k_at(cluster(i, grid));
        ks.push(k);
        let s = region.slice(k)?;
        for j in 0..grid {
            let b2 = s.x2_at((j as f64 + 0.5) / grid as f64).sqrt();
            coords[i * grid + j] = (b2, k);
            if let Ok(p) = reconstruct_strict(&ln, b2, k) {
                let x = diagonals(&p)?;
                e[i * grid + j] = (0..5).map(|m| w[m] / x.0[m].sqrt()).sum();
            }
        }
    }
    let mut candidates = Vec::new();
    for i in 1..grid - 1 {
        for j in 1..grid - 1 {
            let c = e[i * grid + j];
            let strict = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    (di == 0 && dj == 0)
                        || c < e[(i as i64 + di) as usize * grid + (j as i64 + dj) as usize]
                })
            });
            if strict && c.is_finite() {
                let (b2, b4) = coords[i * grid + j];
                candidates.push((b2 * scale, b4 * scale, c / scale));
            }
        }
    }
    let mut minima: Vec<(f64, f64, f64)> = Vec::new();
    for &(b2, b4, en) in &candidates {
        // a candidate that fails to polish is kept as found
        let m = polish(linkage, q, b2, b4).map_or((b2, b4, en), |m| (m.b2, m.b4, m.energy));
        let tol = 1e-6 * scale;
        if !minima.iter().any(|o| (o.0 - m.0).abs() <= tol && (o.1 - m.1).abs() <= tol) {
            minima.push(m);
        }
    }
    let curve = trace_polar_curve(&ln, q, &ks)?;
    Ok(UniqueMinReport {
        grid,
        candidates,
        minima,
        polar_stationary: curve.stationary_counts(),
    })
}
