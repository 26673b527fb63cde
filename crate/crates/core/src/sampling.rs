//! Seeded random instances for experiments and verification suites.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{tetrahedron_volume, Point3};
use crate::moduli::{canonicalize, Configuration};
use crate::potential::ChargeVector;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A strictly convex `n`-gon with every exterior angle in `[0.1, π − 0.1]`,
/// scaled to unit longest side. Quadrilaterals and pentagons are also
/// generic as linkages.
pub fn random_convex_polygon(rng: &mut SampleRng, n: usize) -> Configuration {
    assert!(n >= 3);
    let min_gap = 0.5 * 2.0 * PI / n as f64;
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let gaps_ok = (0..n).all(|i| {
            let next = if i + 1 == n { angles[0] + 2.0 * PI } else { angles[i + 1] };
            next - angles[i] >= min_gap
        });
        if !gaps_ok {
            continue;
        }
        let v: Vec<[f64; 2]> = angles
            .iter()
            .map(|t| {
                let r = rng.random_range(0.7..1.3);
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let Ok(p) = canonicalize(&v) else { continue };
        let turns_ok = p
            .turning_angles()
            .iter()
            .all(|a| (0.1..=PI - 0.1).contains(a));
        if !turns_ok {
            continue;
        }
        let p = p.scaled(1.0 / p.scale());
        if n > 5 || p.linkage().is_ok_and(|l| l.is_generic()) {
            return p;
        }
    }
}

pub fn random_convex_pentagon(rng: &mut SampleRng) -> Configuration {
    random_convex_polygon(rng, 5)
}

pub fn random_convex_quad(rng: &mut SampleRng) -> Configuration {
    random_convex_polygon(rng, 4)
}

/// `n` charges drawn uniformly from `[0.5, 2]`.
pub fn random_charges(rng: &mut SampleRng, n: usize) -> ChargeVector {
    ChargeVector::new((0..n).map(|_| rng.random_range(0.5..2.0)).collect()).expect("finite charges")
}

pub fn random_fixed_charges(rng: &mut SampleRng) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(0.5..2.0))
}

/// Four points uniform in `[−1, 1]³`.
pub fn random_points3(rng: &mut SampleRng) -> [Point3; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
}

/// Four points uniform in `[−1, 1]³` spanning a well-conditioned tetrahedron:
/// `288·V² ≥ 10⁻³·ℓ⁶` with `ℓ` the longest edge. Slivers are redrawn, since
/// for them the volume is below the rounding noise of the squared distances.
pub fn random_tetrahedron(rng: &mut SampleRng) -> [Point3; 4] {
    loop {
        let p = random_points3(rng);
        let l2 = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .map(|(i, j)| (0..3).map(|k| (p[i][k] - p[j][k]).powi(2)).sum::<f64>())
            .fold(0.0, f64::max);
        let v = tetrahedron_volume(&p);
        if 288.0 * v * v >= 1e-3 * l2.powi(3) {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moduli::is_strictly_convex;

    #[test]
    fn polygons_are_convex_and_normalized() {
        let mut r = rng(7);
        for n in [4, 5, 6] {
            for _ in 0..50 {
                let p = random_convex_polygon(&mut r, n);
                assert!(is_strictly_convex(&p));
                assert!((p.scale() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let a = random_convex_pentagon(&mut rng(3));
        let b = random_convex_pentagon(&mut rng(3));
        assert_eq!(a, b);
        let q = random_charges(&mut rng(1), 5);
        assert!(q.as_slice().iter().all(|c| (0.5..2.0).contains(c)));
    }
}
