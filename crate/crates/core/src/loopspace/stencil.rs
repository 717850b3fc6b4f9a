//! Fourth-order periodic finite-difference stencils.
//!
//! Edge `e` sits at `t = (e + ½)/N`, between nodes `e` and `e+1`. Stencils
//! reach nodes `e-1 ..= e+2`.

use crate::scalar::Real;

/// Node offsets touched by the edge stencils.
pub const EDGE_OFFSETS: [isize; 4] = [-1, 0, 1, 2];

/// Midpoint interpolation weights, `(-1, 9, 9, -1)/16`.
pub fn midpoint_weights<T: Real>() -> [T; 4] {
    let s = T::lit(1.0 / 16.0);
    [-s, T::lit(9.0) * s, T::lit(9.0) * s, -s]
}

/// Staggered first-derivative weights for unit spacing, `(1, -27, 27, -1)/24`.
pub fn derivative_weights<T: Real>() -> [T; 4] {
    let s = T::lit(1.0 / 24.0);
    [s, T::lit(-27.0) * s, T::lit(27.0) * s, -s]
}

/// Nodal centered first derivative for unit spacing at offsets `-2..=2`.
pub fn nodal_first_weights<T: Real>() -> [T; 5] {
    let s = T::lit(1.0 / 12.0);
    [s, T::lit(-8.0) * s, T::zero(), T::lit(8.0) * s, -s]
}

/// Nodal centered second derivative for unit spacing at offsets `-2..=2`.
pub fn nodal_second_weights<T: Real>() -> [T; 5] {
    let s = T::lit(1.0 / 12.0);
    [-s, T::lit(16.0) * s, T::lit(-30.0) * s, T::lit(16.0) * s, -s]
}

#[inline]
pub fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments<const K: usize>(w: [f64; K], offsets: [f64; K], p: i32) -> f64 {
        w.iter().zip(offsets).map(|(a, o)| a * o.powi(p)).sum()
    }

    #[test]
    fn stencils_are_fourth_order() {
        let edge = [-1.5, -0.5, 0.5, 1.5];
        let mid = midpoint_weights::<f64>();
        let der = derivative_weights::<f64>();
        assert!((moments(mid, edge, 0) - 1.0).abs() < 1e-15);
        for p in 1..4 {
            assert!(moments(mid, edge, p).abs() < 1e-15);
        }
        assert!((moments(der, edge, 1) - 1.0).abs() < 1e-15);
        for p in [0, 2, 3, 4] {
            assert!(moments(der, edge, p).abs() < 1e-14, "p={p}");
        }
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let d1 = nodal_first_weights::<f64>();
        let d2 = nodal_second_weights::<f64>();
        assert!((moments(d1, nodes, 1) - 1.0).abs() < 1e-15);
        assert!((moments(d2, nodes, 2) - 2.0).abs() < 1e-14);
        for p in [0, 2, 3, 4] {
            assert!(moments(d1, nodes, p).abs() < 1e-14);
        }
        for p in [0, 1, 3, 4, 5] {
            assert!(moments(d2, nodes, p).abs() < 1e-13);
        }
    }
}
