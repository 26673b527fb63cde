use proptest::prelude::*;

use penta_coulomb::geometry::{cayley_menger, SquaredDistanceSet};
use penta_coulomb::moduli::{canonicalize, cm_constraints, diagonals};
use penta_coulomb::potential::{global_min_convex, ChargeVector};
use penta_coulomb::sampling::{random_convex_pentagon, random_fixed_charges, random_tetrahedron, rng};
use penta_coulomb::stabilizer::{stabilize_pentagon, stabilize_quad};

fn moved(v: &[[f64; 2]], angle: f64, shift: [f64; 2], mirror: bool) -> Vec<[f64; 2]> {
    let (c, s) = (angle.cos(), angle.sin());
    v.iter()
        .map(|p| {
            let y = if mirror { -p[1] } else { p[1] };
            [c * p[0] - s * y + shift[0], s * p[0] + c * y + shift[1]]
        })
        .collect()
}

fn triple(p: &[[f64; 3]; 4]) -> f64 {
    let e: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| p[i + 1][k] - p[0][k]));
    e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
        + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_ignores_rigid_motions(
        seed in any::<u64>(),
        angle in -3.2..3.2f64,
        dx in -10.0..10.0f64,
        dy in -10.0..10.0f64,
        mirror in any::<bool>(),
    ) {
        let p = random_convex_pentagon(&mut rng(seed));
        let q = canonicalize(&moved(p.vertices(), angle, [dx, dy], mirror)).unwrap();
        prop_assert!(p.distance(&q) < 1e-9, "moved by {}", p.distance(&q));
    }

    #[test]
    fn diagonals_scale_linearly(seed in any::<u64>(), k in 0.1..10.0f64) {
        let p = random_convex_pentagon(&mut rng(seed));
        let (a, b) = (diagonals(&p).unwrap().lengths(), diagonals(&p.scaled(k)).unwrap().lengths());
        for j in 0..5 {
            prop_assert!((b[j] - k * a[j]).abs() <= 1e-12 * k * a[j].max(1.0));
        }
    }

    #[test]
    fn cm_determinant_is_288_v_squared(seed in any::<u64>()) {
        let p = random_tetrahedron(&mut rng(seed));
        let v = triple(&p) / 6.0;
        let d = cayley_menger(&SquaredDistanceSet::from_points3(&p));
        prop_assert!((d - 288.0 * v * v).abs() <= 1e-9 * 288.0 * v * v);
    }

    #[test]
    fn constraint_gradients_keep_their_signs(seed in any::<u64>()) {
        let table: [[i8; 5]; 5] = [
            [1, 0, -1, -1, 0],
            [0, 1, 0, -1, -1],
            [-1, 0, 1, 0, -1],
            [-1, -1, 0, 1, 0],
            [0, -1, -1, 0, 1],
        ];
        let p = random_convex_pentagon(&mut rng(seed));
        let c = cm_constraints(&diagonals(&p).unwrap(), &p.linkage().unwrap()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let g = c.gradients[i][j];
                let s = if g > 0.0 { 1 } else if g < 0.0 { -1 } else { 0 };
                prop_assert_eq!(s, table[i][j], "D{} / x{}", i + 1, j + 1);
            }
            prop_assert!(c.values[i].abs() < 1e-9, "D{} = {}", i + 1, c.values[i]);
        }
    }

    #[test]
    fn stabilized_shape_is_the_minimum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_convex_pentagon(&mut r);
        let fixed = random_fixed_charges(&mut r);
        let sol = stabilize_pentagon(&p, fixed).unwrap();
        prop_assert!(sol.s > 0.0 && sol.t > 0.0);
        let q = ChargeVector::control(fixed, sol.s, sol.t).unwrap();
        let m = global_min_convex(&p.linkage().unwrap(), &q).unwrap();
        prop_assert!(m.configuration.distance(&p) < 1e-6);
    }

    #[test]
    fn quad_charge_is_rigid_invariant(seed in any::<u64>(), angle in -3.2..3.2f64, k in 0.2..5.0f64) {
        let p = penta_coulomb::sampling::random_convex_quad(&mut rng(seed));
        let t = stabilize_quad(&p).unwrap();
        let q = canonicalize(&moved(p.scaled(k).vertices(), angle, [1.0, -2.0], false)).unwrap();
        let t2 = stabilize_quad(&q).unwrap();
        prop_assert!(t > 0.0 && (t - t2).abs() <= 1e-9 * t);
    }
}
