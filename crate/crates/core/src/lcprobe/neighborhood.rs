use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Neighbourhood dimensionality, radius and direction seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub p: usize,
    pub r: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            p: 25,
            r: 0.005,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("probe.p", "must be at least 1"));
        }
        if self.p > input_dim {
            return Err(Error::invalid(
                "probe.p",
                format!("{} exceeds input dimension {input_dim}", self.p),
            ));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("probe.r", format!("{} must be positive", self.r)));
        }
        Ok(())
    }
}

/// Cross-polytope frame around `center`. Row `2p` of `vertices` is
/// `center + r v_p`, row `2p + 1` is `center - r v_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: Array1<f64>,
    pub directions: Array2<f64>,
    pub vertices: Array2<f64>,
    pub r: f64,
}

impl Neighborhood {
    /// Builds the frame from explicit directions (rows), which must be
    /// orthonormal.
    pub fn from_directions(center: ArrayView1<'_, f64>, directions: ArrayView2<'_, f64>, r: f64) -> Result<Self> {
        check_dim("neighborhood directions", center.len(), directions.ncols())?;
        let gram = directions.dot(&directions.t());
        for ((i, j), g) in gram.indexed_iter() {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (g - expect).abs() > 1e-10 {
                return Err(Error::invalid("directions", "rows must be orthonormal"));
            }
        }
        let p = directions.nrows();
        let mut vertices = Array2::zeros((2 * p, center.len()));
        for (k, v) in directions.rows().into_iter().enumerate() {
            let plus = &center + &(r * &v);
            let minus = &center - &(r * &v);
            vertices.row_mut(2 * k).assign(&plus);
            vertices.row_mut(2 * k + 1).assign(&minus);
        }
        Ok(Neighborhood {
            center: center.to_owned(),
            directions: directions.to_owned(),
            vertices,
            r,
        })
    }

    pub fn p(&self) -> usize {
        self.directions.nrows()
    }
}

/// Samples `P` i.i.d. standard-normal vectors and orthonormalises them
/// (modified Gram-Schmidt, applied twice); a draw that is numerically
/// dependent on its predecessors is rejected and redrawn.
pub fn make_neighborhood(x: ArrayView1<'_, f64>, cfg: &ProbeConfig) -> Result<Neighborhood> {
    cfg.validate(x.len())?;
    let dirs = orthonormal_directions(cfg.p, x.len(), cfg.seed);
    Neighborhood::from_directions(x, dirs.view(), cfg.r)
}

pub(crate) fn orthonormal_directions(p: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = crate::seed::rng(seed);
    let mut dirs = Array2::<f64>::zeros((p, d));
    let mut k = 0;
    while k < p {
        let mut v: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let initial = v.dot(&v).sqrt();
        for _ in 0..2 {
            for j in 0..k {
                let u = dirs.row(j);
                let proj = u.dot(&v);
                v.scaled_add(-proj, &u);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm <= 1e-8 * initial || norm == 0.0 {
            continue;
        }
        v /= norm;
        dirs.row_mut(k).assign(&v);
        k += 1;
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn full_basis_is_orthonormal() {
        let x = Array1::zeros(6);
        let nb = make_neighborhood(x.view(), &ProbeConfig { p: 6, r: 0.3, seed: 2 }).unwrap();
        let gram = nb.directions.dot(&nb.directions.t());
        for ((i, j), g) in gram.indexed_iter() {
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }

    #[test]
    fn vertices_sit_at_radius_in_antipodal_pairs() {
        let x = Array1::from(vec![1.0, -2.0, 0.5, 3.0, 0.0]);
        let nb = make_neighborhood(x.view(), &ProbeConfig { p: 3, r: 0.7, seed: 9 }).unwrap();
        assert_eq!(nb.vertices.nrows(), 6);
        for v in nb.vertices.rows() {
            let d = &v - &x;
            assert!((d.dot(&d).sqrt() - 0.7).abs() < 1e-10);
        }
        for p in 0..3 {
            let mid = (&nb.vertices.row(2 * p) + &nb.vertices.row(2 * p + 1)) / 2.0;
            assert!((&mid - &x).iter().all(|e| e.abs() < 1e-12));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = Array1::linspace(0.0, 1.0, 10);
        let cfg = ProbeConfig { p: 4, r: 0.1, seed: 5 };
        let a = make_neighborhood(x.view(), &cfg).unwrap();
        let b = make_neighborhood(x.view(), &cfg).unwrap();
        let bits = |n: &Neighborhood| n.vertices.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn too_many_directions_rejected() {
        let x = Array1::zeros(3);
        assert!(make_neighborhood(x.view(), &ProbeConfig { p: 4, r: 0.1, seed: 0 }).is_err());
        assert!(make_neighborhood(x.view(), &ProbeConfig { p: 2, r: 0.0, seed: 0 }).is_err());
    }
}
