use std::f64::consts::PI;
use std::sync::Arc;

use super::*;
use crate::geometry::{curvature_margin, ricci_at, h_vector, MarginGrid};

#[test]
fn builtins_by_name() {
    for name in BUILTIN_NAMES {
        let s = builtin_system::<f64>(name).unwrap();
        assert_eq!(s.name(), name);
        assert_eq!(s.dim(), 2);
    }
    assert_eq!(builtin_system::<f64>("klein").unwrap_err(), Error::UnknownSystem("klein".into()));
    let s = builtin_system::<f32>("sphere_cap").unwrap();
    assert_eq!(s.dim(), 2);
}

#[test]
fn builtin_margins() {
    let grid = MarginGrid::default_for(2);
    let sphere = curvature_margin(&sphere_cap::<f64>(0.0).unwrap(), &grid).unwrap();
    assert!((sphere.margin - 1.0).abs() < 1e-9);
    for b in [0.1, 1.0, 3.0] {
        let t = curvature_margin(&flat_torus::<f64>(b).unwrap(), &grid).unwrap();
        assert!(t.margin <= 0.0);
    }
    let h = curvature_margin(&hyperbolic_patch::<f64>(0.1).unwrap(), &grid).unwrap();
    assert!(h.margin < 0.0);
}

#[test]
fn product_blocks_and_sums() {
    let a = Arc::new(sphere_cap::<f64>(0.2).unwrap());
    let b = Arc::new(flat_torus::<f64>(1.0).unwrap());
    let p = product_system(vec![a.clone(), b.clone()]).unwrap();
    let c = &p.combined;
    assert_eq!(c.dim(), 4);
    assert_eq!(p.offset(1), 2);
    let x = [1.0, 0.5, 2.0, 3.0];
    let g = c.metric_values::<f64>(&x).unwrap();
    assert!((g[5] - 1.0f64.sin().powi(2)).abs() < 1e-15);
    assert_eq!(g[2], 0.0);
    assert_eq!(g[3 * 4 + 1], 0.0);
    let pa = c.potential_values::<f64>(&x).unwrap();
    let aa = a.potential_values::<f64>(&x[..2]).unwrap();
    let ab = b.potential_values::<f64>(&x[2..]).unwrap();
    assert_eq!(pa, [aa, ab].concat());

    let v = [0.3, -0.2, 1.0, 0.4];
    let k = ricci_at(c, &x, &v, &v).unwrap();
    let ka = ricci_at(&a, &x[..2], &v[..2], &v[..2]).unwrap();
    let kb = ricci_at(&b, &x[2..], &v[2..], &v[2..]).unwrap();
    assert!((k - ka - kb).abs() < 1e-12);
    let h = h_vector(c, &x, &v).unwrap();
    let ha = h_vector(&a, &x[..2], &v[..2]).unwrap();
    let hb = h_vector(&b, &x[2..], &v[2..]).unwrap();
    assert!((h - ha - hb).abs() < 1e-12);

    assert!(product_system(vec![a]).is_err());
}

#[test]
fn product_margins() {
    let t = Arc::new(flat_torus::<f64>(1.0).unwrap());
    let tt = product_system(vec![t.clone(), t]).unwrap();
    let m = curvature_margin(&tt.combined, &MarginGrid::default_for(4)).unwrap();
    assert!(m.margin <= 0.0);

    let s = Arc::new(sphere_cap::<f64>(0.0).unwrap());
    let ss = product_system(vec![s.clone(), s]).unwrap();
    let m = curvature_margin(&ss.combined, &MarginGrid::default_for(4)).unwrap();
    assert!((m.margin - 1.0).abs() < 1e-3, "{}", m.margin);
}

#[test]
fn lifts() {
    let s = Arc::new(flat_larmor::<f64>(8.0).unwrap());
    let lp = DiscreteLoop::from_fn(s.clone(), 64, |t| vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()]).unwrap();
    let same = diagonal_lift(&lp, 1).unwrap();
    assert!(same.same_as(&lp));
    let l4 = diagonal_lift(&lp, 4).unwrap();
    assert_eq!(l4.dim(), 8);
    let (a, b) = (lp.length().unwrap(), l4.length().unwrap());
    assert!((b - 2.0 * a).abs() <= 1e-9 * b);

    let other = Arc::new(flat_larmor::<f64>(2.0).unwrap());
    let wrong = product_system(vec![other.clone(), other]).unwrap();
    assert_eq!(diagonal_lift_into(&lp, &wrong).unwrap_err(), Error::FactorMismatch);
    let right = product_system(vec![s.clone(), s.clone(), s]).unwrap();
    assert_eq!(diagonal_lift_into(&lp, &right).unwrap().dim(), 6);
}
