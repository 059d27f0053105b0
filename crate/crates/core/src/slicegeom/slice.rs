use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Axis-aligned rectangle in slice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Rect {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Result<Self> {
        let r = Rect {
            u_min,
            u_max,
            v_min,
            v_max,
        };
        if !(u_max > u_min && v_max > v_min) || [u_min, u_max, v_min, v_max].iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("bounds", format!("degenerate rectangle {r:?}")));
        }
        Ok(r)
    }

    /// Square of side `side` centred on `c`.
    pub fn square(c: [f64; 2], side: f64) -> Result<Self> {
        let h = side / 2.0;
        Rect::new(c[0] - h, c[0] + h, c[1] - h, c[1] + h)
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.u_min && p[0] <= self.u_max && p[1] >= self.v_min && p[1] <= self.v_max
    }

    /// Counter-clockwise corner list.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        vec![
            [self.u_min, self.v_min],
            [self.u_max, self.v_min],
            [self.u_max, self.v_max],
            [self.u_min, self.v_max],
        ]
    }
}

/// A 2D affine slice `u ↦ origin + basis · u` of input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub origin: Array1<f64>,
    /// `D × 2` with orthonormal columns.
    pub basis: Array2<f64>,
    pub bounds: Rect,
}

impl Slice {
    pub fn new(origin: Array1<f64>, basis: Array2<f64>, bounds: Rect) -> Result<Self> {
        check_dim("slice basis rows", origin.len(), basis.nrows())?;
        check_dim("slice basis columns", 2, basis.ncols())?;
        let gram = basis.t().dot(&basis);
        for ((i, j), g) in gram.indexed_iter() {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (g - expect).abs() > 1e-10 {
                return Err(Error::invalid("slice basis", "columns must be orthonormal"));
            }
        }
        Ok(Slice { origin, basis, bounds })
    }

    /// The input plane of a 2-input network, `u = x`.
    pub fn plane(bounds: Rect) -> Self {
        Slice {
            origin: Array1::zeros(2),
            basis: Array2::eye(2),
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn lift(&self, u: [f64; 2]) -> Array1<f64> {
        &self.origin + &(&self.basis.column(0) * u[0]) + &(&self.basis.column(1) * u[1])
    }

    /// Orthogonal projection onto slice coordinates.
    pub fn project(&self, p: ArrayView1<'_, f64>) -> [f64; 2] {
        let d = &p - &self.origin;
        [self.basis.column(0).dot(&d), self.basis.column(1).dot(&d)]
    }

    pub fn with_bounds(&self, bounds: Rect) -> Slice {
        Slice {
            bounds,
            ..self.clone()
        }
    }
}

/// Slice through three anchor points: origin at their centroid, basis from
/// Gram-Schmidt on `(p1 - p0, p2 - p0)`, bounds the anchors' bounding box
/// grown by `margin` on each side.
pub fn slice_through(
    p0: ArrayView1<'_, f64>,
    p1: ArrayView1<'_, f64>,
    p2: ArrayView1<'_, f64>,
    margin: f64,
) -> Result<Slice> {
    check_dim("anchor p1", p0.len(), p1.len())?;
    check_dim("anchor p2", p0.len(), p2.len())?;
    if !(margin >= 0.0) {
        return Err(Error::invalid("margin", "must be non-negative"));
    }
    let e1 = &p1 - &p0;
    let n1 = e1.dot(&e1).sqrt();
    let mut e2 = &p2 - &p0;
    let n2_raw = e2.dot(&e2).sqrt();
    if n1 == 0.0 || n2_raw == 0.0 {
        return Err(Error::invalid("anchors", "anchors are collinear"));
    }
    let b1 = &e1 / n1;
    for _ in 0..2 {
        let proj = b1.dot(&e2);
        e2.scaled_add(-proj, &b1);
    }
    let n2 = e2.dot(&e2).sqrt();
    if n2 <= 1e-12 * n2_raw {
        return Err(Error::invalid("anchors", "anchors are collinear"));
    }
    let b2 = &e2 / n2;
    let mut basis = Array2::zeros((p0.len(), 2));
    basis.column_mut(0).assign(&b1);
    basis.column_mut(1).assign(&b2);
    let origin = (&p0 + &p1 + p2) / 3.0;
    let mut slice = Slice {
        origin,
        basis,
        bounds: Rect::new(0.0, 1.0, 0.0, 1.0)?,
    };
    let us: Vec<[f64; 2]> = [p0, p1, p2].iter().map(|p| slice.project(*p)).collect();
    let lo = |k: usize| us.iter().map(|u| u[k]).fold(f64::INFINITY, f64::min) - margin;
    let hi = |k: usize| us.iter().map(|u| u[k]).fold(f64::NEG_INFINITY, f64::max) + margin;
    let (mut u0, mut u1, mut v0, mut v1) = (lo(0), hi(0), lo(1), hi(1));
    // margin 0 with anchors sharing a coordinate would leave a flat box.
    if u1 - u0 <= 0.0 {
        u0 -= 0.5;
        u1 += 0.5;
    }
    if v1 - v0 <= 0.0 {
        v0 -= 0.5;
        v1 += 0.5;
    }
    slice.bounds = Rect::new(u0, u1, v0, v1)?;
    Ok(slice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn axis_anchors() {
        let s = slice_through(
            array![0.0, 0.0, 0.0].view(),
            array![1.0, 0.0, 0.0].view(),
            array![0.0, 1.0, 0.0].view(),
            0.1,
        )
        .unwrap();
        assert_eq!(s.basis.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(s.basis.column(1).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn anchors_round_trip_and_lie_inside() {
        let mut rng = crate::seed::rng(3);
        for _ in 0..20 {
            let pts: Vec<Array1<f64>> = (0..3)
                .map(|_| Array1::from_shape_simple_fn(7, || rng.random_range(-2.0..2.0)))
                .collect();
            for margin in [0.0, 0.5] {
                let s = slice_through(pts[0].view(), pts[1].view(), pts[2].view(), margin).unwrap();
                for p in &pts {
                    let u = s.project(p.view());
                    assert!(s.bounds.contains(u));
                    let back = s.lift(u);
                    assert!((&back - p).iter().all(|e| e.abs() < 1e-10));
                }
            }
        }
    }

    #[test]
    fn collinear_anchors_rejected() {
        let r = slice_through(
            array![0.0, 0.0].view(),
            array![1.0, 1.0].view(),
            array![2.0, 2.0].view(),
            0.1,
        );
        assert!(r.is_err());
    }
}
