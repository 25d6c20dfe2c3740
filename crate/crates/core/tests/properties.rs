//! Property tests against oracles computed independently of the library:
//! quadrature sums are formed here from the mesh's points and weights.

use std::sync::Arc;

use dphase_core::random::{random_smooth, stream_rng};
use dphase_core::{
    luxemburg_norm, modular, DiscreteFunction, DoublePhase, ExponentField, Mesh, ScalarField,
};
use proptest::prelude::*;

fn quad_sum(mesh: &Mesh, f: impl Fn(usize) -> f64) -> f64 {
    mesh.quad_weights().iter().enumerate().map(|(k, w)| w * f(k)).sum()
}

fn meshes() -> [Arc<Mesh>; 2] {
    [
        Arc::new(Mesh::interval(-1.0, 2.0, 30).unwrap()),
        Arc::new(Mesh::rectangle((0.0, 2.0), (-1.0, 1.0), 7, 5).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrate_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, k in 0.5f64..5.0) {
        for mesh in meshes() {
            let f: Vec<f64> = mesh.quad_points().iter().map(|p| (k * p[0]).sin() + p[1]).collect();
            let g: Vec<f64> = mesh.quad_points().iter().map(|p| p[0] * p[0] - (k * p[1]).cos()).collect();
            let mix: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = mesh.integrate(&mix).unwrap();
            let rhs = alpha * mesh.integrate(&f).unwrap() + beta * mesh.integrate(&g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn affine_gradients_are_exact(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        for mesh in meshes() {
            // Raw nodal values, without the boundary condition.
            let nodal: Vec<f64> = mesh.nodes().iter().map(|x| a * x[0] + b * x[1] + c).collect();
            let expect = if mesh.dimension() == 1 { [a, 0.0] } else { [a, b] };
            for g in mesh.element_gradients(&nodal) {
                prop_assert!((g[0] - expect[0]).abs() < 1e-12 && (g[1] - expect[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn luxemburg_matches_closed_form_for_constant_exponent(p in 1.1f64..5.0, scale in 1e-3f64..1e3, k in 0.5f64..6.0) {
        for mesh in meshes() {
            let f = ScalarField::from_fn(&mesh, |x| scale * (1.5 + (k * x[0]).sin() * (x[1] + 0.3))).unwrap();
            let pf = ExponentField::constant(p, &mesh).unwrap();
            let oracle = quad_sum(&mesh, |i| f.values()[i].abs().powf(p)).powf(1.0 / p);
            let norm = luxemburg_norm(&mesh, &f, &pf).unwrap();
            prop_assert!((norm - oracle).abs() <= 1e-12 * oracle);
        }
    }

    #[test]
    fn normalization_and_sandwich(seed in 0u64..10_000, t in -6.0f64..6.0) {
        for mesh in meshes() {
            let p = ExponentField::parse("2.5 + 1.2*sin(2*x + y)", &mesh).unwrap();
            let u = random_smooth(&Arc::clone(&mesh), &mut stream_rng(seed, 0), 4);
            let f = ScalarField::of_function(&u).scaled(t.exp());
            let n = luxemburg_norm(&mesh, &f, &p).unwrap();
            let at_norm = quad_sum(&mesh, |i| (f.values()[i] / n).abs().powf(p.values()[i]));
            prop_assert!((at_norm - 1.0).abs() <= 1e-9);
            let rho = modular(&mesh, &f, &p).unwrap();
            let (lo, hi) = p.extrema();
            let (a, b) = if n > 1.0 { (n.powf(lo), n.powf(hi)) } else { (n.powf(hi), n.powf(lo)) };
            prop_assert!(a <= rho * (1.0 + 1e-9) && rho <= b * (1.0 + 1e-9));
        }
    }

    #[test]
    fn energies_match_direct_quadrature(seed in 0u64..10_000, amp in -2.0f64..2.0) {
        for mesh in meshes() {
            let p1 = ExponentField::parse("3.4 + 0.3*cos(x)", &mesh).unwrap();
            let p2 = ExponentField::parse("1.4 + 0.1*sin(3*y)", &mesh).unwrap();
            let q = ExponentField::parse("2.3 + 0.2*x*y", &mesh).unwrap();
            let pb = DoublePhase::new(Arc::clone(&mesh), p1.clone(), p2.clone(), q.clone()).unwrap();
            let u = random_smooth(&mesh, &mut stream_rng(seed, 1), 4).scaled(10f64.powf(amp));
            let e = pb.eval_energies(&u).unwrap();

            let g = u.gradient_norms_at_quad();
            let v = u.values_at_quad();
            let (a, b, c) = (p1.values(), p2.values(), q.values());
            let j = quad_sum(&mesh, |k| g[k].powf(a[k]) / a[k] + g[k].powf(b[k]) / b[k]);
            let j1 = quad_sum(&mesh, |k| g[k].powf(a[k]) + g[k].powf(b[k]));
            let i = quad_sum(&mesh, |k| v[k].abs().powf(c[k]) / c[k]);
            let i1 = quad_sum(&mesh, |k| v[k].abs().powf(c[k]));
            for (got, want) in [(e.j, j), (e.j1, j1), (e.i, i), (e.i1, i1)] {
                prop_assert!((got - want).abs() <= 1e-12 * want);
            }

            // Sandwich bounds and the energy inequalities.
            prop_assert!(e.j1 / p1.max() <= e.j * (1.0 + 1e-12) && e.j <= e.j1 / p2.min() * (1.0 + 1e-12));
            prop_assert!(e.i1 / q.max() <= e.i * (1.0 + 1e-12) && e.i <= e.i1 / q.min() * (1.0 + 1e-12));
            prop_assert!(e.j1 <= p1.max() * e.j * (1.0 + 1e-12));

            // Pairing identities.
            let pj = pb.grad_j(&u).unwrap().pair(&u);
            let pi = pb.grad_i(&u).unwrap().pair(&u);
            prop_assert!((pj - e.j1).abs() <= 1e-12 * e.j1);
            prop_assert!((pi - e.i1).abs() <= 1e-12 * e.i1);
        }
    }
}

#[test]
fn zero_function_is_fixed_by_everything() {
    for mesh in meshes() {
        let z = DiscreteFunction::zeros(&mesh);
        let two = ExponentField::constant(2.0, &mesh).unwrap();
        let pb = DoublePhase::new(Arc::clone(&mesh), two.clone(), two.clone(), two).unwrap();
        let e = pb.eval_energies(&z).unwrap();
        assert_eq!((e.j, e.i, e.j1, e.i1), (0.0, 0.0, 0.0, 0.0));
        assert!(e.rayleigh_ji.value().is_infinite());
        assert_eq!(pb.grad_j(&z).unwrap().norm(), 0.0);
    }
}
