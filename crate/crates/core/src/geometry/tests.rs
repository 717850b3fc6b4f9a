use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

use proptest::prelude::*;

use super::*;
use crate::systems::{builtin_system, flat_plane, flat_torus, sphere_cap, BUILTIN_NAMES};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn diag14() -> MagneticSystem<f64> {
    let def = SystemDefinition {
        name: "diag14".into(),
        dim: 2,
        metric: vec![vec!["1".into(), "0".into()], vec!["0".into(), "4".into()]],
        potential: vec!["0".into(), "0".into()],
        periods: vec![None, None],
        domain_box: vec![[-1.0, 1.0], [-1.0, 1.0]],
        injectivity_radius_hint: None,
    };
    MagneticSystem::from_definition(&def).unwrap()
}

#[test]
fn flat_connection_vanishes() {
    let sys = flat_plane::<f64>("flat", "0", "x1", 2.0).unwrap();
    let c = connection_at(&sys, &[0.3, -0.7]).unwrap();
    assert!(c.christoffel.iter().all(|&v| v == 0.0));
    assert_eq!(c.g_inv, vec![1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn sphere_christoffels() {
    let sys = sphere_cap::<f64>(0.0).unwrap();
    let c = connection_at(&sys, &[FRAC_PI_2, 1.0]).unwrap();
    let gam = |i: usize, j: usize, k: usize| c.christoffel[(i * 2 + j) * 2 + k];
    assert!(gam(0, 1, 1).abs() < 1e-15);
    assert!(gam(1, 0, 1).abs() < 1e-15);
    let c = connection_at(&sys, &[FRAC_PI_4, 1.0]).unwrap();
    let gam = |i: usize, j: usize, k: usize| c.christoffel[(i * 2 + j) * 2 + k];
    assert!(close(gam(0, 1, 1), -0.5, 1e-14));
    assert!(close(gam(1, 0, 1), 1.0, 1e-14));
    assert_eq!(gam(1, 0, 1), gam(1, 1, 0));
    let mut prod = [0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                prod[i * 2 + j] += c.g_inv[i * 2 + k] * c.g[k * 2 + j];
            }
        }
    }
    assert!(close(prod[0], 1.0, 1e-12) && close(prod[3], 1.0, 1e-12) && prod[1].abs() < 1e-12);
}

#[test]
fn ricci_examples() {
    let flat = flat_torus::<f64>(1.0).unwrap();
    assert_eq!(ricci_at(&flat, &[1.0, 2.0], &[0.3, 0.4], &[-1.0, 2.0]).unwrap(), 0.0);
    let sphere = sphere_cap::<f64>(0.0).unwrap();
    let x = [FRAC_PI_2, 0.5];
    assert!(close(ricci_at(&sphere, &x, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0, 1e-12));
    assert!(ricci_at(&sphere, &x, &[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-12);
    // Ricci of the unit sphere is the metric itself
    let y = [1.1, 0.5];
    let s = 1.1f64.sin();
    assert!(close(ricci_at(&sphere, &y, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), s * s, 1e-12));
}

#[test]
fn field_examples() {
    let sys = flat_plane::<f64>("flat", "0", "x1", 2.0).unwrap();
    let f = field_at(&sys, &[0.5, 0.2], &[0.7, -1.3]).unwrap();
    assert_eq!(f.field, vec![0.0, 1.0, -1.0, 0.0]);
    assert!(f.nabla_field_u.iter().all(|&v| v == 0.0));
    assert_eq!(h_vector(&sys, &[0.5, 0.2], &[1.0, 3.0]).unwrap(), 0.0);

    let zero = flat_plane::<f64>("zero", "0", "0", 2.0).unwrap();
    let f = field_at(&zero, &[0.5, 0.2], &[1.0, 1.0]).unwrap();
    assert!(f.field.iter().chain(&f.nabla_field_u).all(|&v| v == 0.0));
    assert_eq!(h_vector(&zero, &[0.1, 0.1], &[2.0, -1.0]).unwrap(), 0.0);
}

#[test]
fn h_vector_matches_direct_frame_sum() {
    let sys = flat_plane::<f64>("sin", "0", "sin(x1)", 2.0).unwrap();
    for x1 in [0.0, 0.4, 1.2] {
        let x = [x1, 0.3];
        let w = [0.0, 1.0];
        // F_12 = cos x1, so (∇_{e1}F)_12 = −sin x1 and only α = 1 contributes to the trace
        let d1f12 = -(x1 as f64).sin();
        let mut direct = 0.0;
        for a in 0..2 {
            let e = axis::<f64>(2, a);
            // Ĝ(e,e,w) = G(e,e,w) = (∇_e F)_jk e^j w^k
            let mut s = 0.0;
            for j in 0..2 {
                for k in 0..2 {
                    let nab = if a == 0 {
                        match (j, k) {
                            (0, 1) => d1f12,
                            (1, 0) => -d1f12,
                            _ => 0.0,
                        }
                    } else {
                        0.0
                    };
                    s += nab * e[j] * w[k];
                }
            }
            direct += s;
        }
        let h = h_vector(&sys, &x, &w).unwrap();
        assert!(close(h, direct, 1e-14), "x1={x1}: {h} vs {direct}");
    }
}

#[test]
fn frames() {
    let flat = flat_torus::<f64>(1.0).unwrap();
    let f = orthonormal_frame(&flat, &[1.0, 1.0]).unwrap();
    assert_eq!(f.vectors, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let f = orthonormal_frame(&diag14(), &[0.0, 0.0]).unwrap();
    assert_eq!(f.vectors, vec![vec![1.0, 0.0], vec![0.0, 0.5]]);
    let sphere = sphere_cap::<f64>(0.0).unwrap();
    let f = orthonormal_frame(&sphere, &[FRAC_PI_6, 0.0]).unwrap();
    assert!(close(f.vectors[1][1], 2.0, 1e-14));
    assert!(f.gram_residual < 1e-10);
}

#[test]
fn margins_of_examples() {
    let sphere = sphere_cap::<f64>(0.0).unwrap();
    let r = curvature_margin(&sphere, &MarginGrid::default_for(2)).unwrap();
    assert!(close(r.margin, 1.0, 1e-9), "{}", r.margin);
    let again = margin_function(&sphere, &r.argmin_point, &r.argmin_direction).unwrap();
    assert!(close(again, r.margin, 1e-9));

    for b in [0.0, 0.5, 2.0] {
        let torus = flat_torus::<f64>(b).unwrap();
        let r = curvature_margin(&torus, &MarginGrid::default_for(2)).unwrap();
        assert!(r.margin <= 0.0, "b={b}: {}", r.margin);
    }

    let cap = sphere_cap::<f64>(1e-3).unwrap();
    let r = curvature_margin(&cap, &MarginGrid::default_for(2)).unwrap();
    assert!(r.margin > 0.0 && r.margin < 1.0, "{}", r.margin);
    assert!((1.0 - r.margin) < 1e-2);
}

#[test]
fn coarse_grid_rejected() {
    let sphere = sphere_cap::<f64>(0.0).unwrap();
    let grid = MarginGrid {
        points_per_axis: 1,
        ..MarginGrid::default_for(2)
    };
    assert_eq!(curvature_margin(&sphere, &grid).unwrap_err(), Error::GridTooCoarse(1));
}

fn random_point(sys: &MagneticSystem<f64>, u: &[f64]) -> Vec<f64> {
    sys.domain_box()
        .iter()
        .zip(u)
        .map(|(&(lo, hi), &s)| lo + (hi - lo) * s)
        .collect()
}

#[test]
fn first_bianchi_identity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for name in BUILTIN_NAMES {
        let sys = builtin_system::<f64>(name).unwrap();
        let n = sys.dim();
        for _ in 0..100 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let p = PointGeometry::new(&sys, &random_point(&sys, &u)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let s = p.riemann_component(i, j, k, l)
                                + p.riemann_component(i, k, l, j)
                                + p.riemann_component(i, l, j, k);
                            assert!(s.abs() < 1e-8, "{name}: {s}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn metric_compatibility_and_closed_field() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for name in BUILTIN_NAMES {
        let sys = builtin_system::<f64>(name).unwrap();
        let n = sys.dim();
        for _ in 0..50 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let x = random_point(&sys, &u);
            let jet = sys.jet(&x).unwrap();
            let p = PointGeometry::from_jet(n, &x, &jet).unwrap();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = jet.dg[(k * n + i) * n + j];
                        for l in 0..n {
                            s -= p.gamma(l, k, i) * p.g[l * n + j] + p.gamma(l, k, j) * p.g[i * n + l];
                        }
                        assert!(s.abs() < 1e-10, "{name}: {s}");
                        // ∂_k F_ij from the second derivatives of A
                        let df = |k: usize, i: usize, j: usize| {
                            jet.d2a[(k * n + i) * n + j] - jet.d2a[(k * n + j) * n + i]
                        };
                        let cyc = df(k, i, j) + df(i, j, k) + df(j, k, i);
                        assert!(cyc.abs() < 1e-9);
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(p.field[i * n + j], -p.field[j * n + i]);
                    for k in 0..n {
                        assert_eq!(p.nabla_field[(k * n + i) * n + j], -p.nabla_field[(k * n + j) * n + i]);
                    }
                }
            }
        }
    }
}

fn rotated_frame(p: &PointGeometry<f64>, angle: f64) -> Vec<Vec<f64>> {
    let f = gram_schmidt(2, &p.g, &p.point).unwrap().vectors;
    let (s, c) = angle.sin_cos();
    vec![
        vec![c * f[0][0] + s * f[1][0], c * f[0][1] + s * f[1][1]],
        vec![-s * f[0][0] + c * f[1][0], -s * f[0][1] + c * f[1][1]],
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_frame_independent(
        sys_idx in 0usize..4,
        u1 in 0.0f64..1.0, u2 in 0.0f64..1.0,
        angle in 0.0f64..(2.0 * PI),
        w in prop::array::uniform2(-2.0f64..2.0),
        v in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let sys = builtin_system::<f64>(BUILTIN_NAMES[sys_idx]).unwrap();
        let x = random_point(&sys, &[u1, u2]);
        let p = PointGeometry::new(&sys, &x).unwrap();
        let base = gram_schmidt(2, &p.g, &x).unwrap().vectors;
        let rot = rotated_frame(&p, angle);
        prop_assert!(gram_residual(2, &p.g, &rot) < 1e-12);
        let h0 = p.h_with_frame(&base, &w);
        let h1 = p.h_with_frame(&rot, &w);
        prop_assert!((h0 - h1).abs() <= 1e-9 * (1.0 + h0.abs()));
        let k0 = p.ricci_with_frame(&base, &v, &w);
        let k1 = p.ricci_with_frame(&rot, &v, &w);
        prop_assert!((k0 - k1).abs() <= 1e-9 * (1.0 + k0.abs()));
        let kt = p.ricci_with_frame(&base, &w, &v);
        prop_assert!((k0 - kt).abs() <= 1e-9 * (1.0 + k0.abs()));
        // matrix forms agree with the frame sums
        let km = p.ricci_matrix(&base);
        let hk = p.h_covector(&base);
        let mut kq = 0.0;
        for a in 0..2 { for b in 0..2 { kq += v[a] * km[a * 2 + b] * w[b]; } }
        prop_assert!((kq - k0).abs() <= 1e-9 * (1.0 + k0.abs()));
        prop_assert!((hk[0] * w[0] + hk[1] * w[1] - h0).abs() <= 1e-9 * (1.0 + h0.abs()));
    }

    #[test]
    fn margin_function_is_homogeneous(
        sys_idx in 0usize..4,
        u1 in 0.0f64..1.0, u2 in 0.0f64..1.0,
        v in prop::array::uniform2(-2.0f64..2.0),
        lambda in 0.1f64..10.0,
    ) {
        prop_assume!(v[0].abs() + v[1].abs() > 1e-3);
        let sys = builtin_system::<f64>(BUILTIN_NAMES[sys_idx]).unwrap();
        let x = random_point(&sys, &[u1, u2]);
        let f1 = margin_function(&sys, &x, &v).unwrap();
        let scaled = [lambda * v[0], lambda * v[1]];
        let f2 = margin_function(&sys, &x, &scaled).unwrap();
        prop_assert!((f2 - lambda * f1).abs() <= 1e-9 * (1.0 + f2.abs()));
    }
}
