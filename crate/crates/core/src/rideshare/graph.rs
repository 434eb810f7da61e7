use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{matrix_from_rows, matrix_to_rows, LtiSystem};

/// Regions with rebalancing fractions `a`, routing costs `c`, price caps
/// `p_max` and demand elasticities `theta`. Only off-diagonal entries of
/// `c`, `p_max` and `theta` are used.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    p_max: DMatrix<f64>,
    theta: DMatrix<f64>,
}

impl RegionGraph {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, p_max: DMatrix<f64>, theta: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "a region graph needs at least two regions".into(),
            ));
        }
        for (name, m) in [("a", &a), ("c", &c), ("p_max", &p_max), ("theta", &theta)] {
            if m.shape() != (n, n) {
                return Err(Error::dimension(
                    name,
                    format!("{n}x{n}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
        }
        for i in 0..n {
            if a[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("a[{i}][{i}] must be zero")));
            }
            let out: f64 = a.row(i).iter().sum();
            if a.row(i).iter().any(|v| !(*v >= 0.0)) || out > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "rebalancing fractions of region {i} must be nonnegative with sum at most 1"
                )));
            }
            for j in (0..n).filter(|&j| j != i) {
                if !(c[(i, j)] > 0.0) {
                    return Err(Error::InvalidArgument(format!("c[{i}][{j}] must be positive")));
                }
                if !(p_max[(i, j)] > 0.0) {
                    return Err(Error::InvalidArgument(format!("p_max[{i}][{j}] must be positive")));
                }
                if !(0.0..=1.0).contains(&theta[(i, j)]) {
                    return Err(Error::InvalidArgument(format!("theta[{i}][{j}] must lie in [0, 1]")));
                }
            }
        }
        Ok(Self { a, c, p_max, theta })
    }

    /// Uniform parameters on every pair with rebalancing `a`.
    pub fn uniform(a: DMatrix<f64>, c: f64, p_max: f64, theta: f64) -> Result<Self> {
        let n = a.nrows();
        let off = |v: f64| DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { v });
        Self::new(a, off(c), off(p_max), off(theta))
    }

    pub fn n_regions(&self) -> usize {
        self.a.nrows()
    }

    /// Origin/destination pairs `(i, j)`, `i ≠ j`, in row-major order. This is
    /// the coordinate order of price vectors.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_regions();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn p_max(&self) -> &DMatrix<f64> {
        &self.p_max
    }
    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// Column-stochastic compartmental matrix `I - diag(rowsum a) + aᵀ`.
    pub fn compartmental(&self) -> DMatrix<f64> {
        let n = self.n_regions();
        let mut m = self.a.transpose();
        for i in 0..n {
            m[(i, i)] = 1.0 - self.a.row(i).sum();
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `(n-1) x n` difference operator with rows `e_i - e_{i+1}`.
pub(crate) fn difference_operator(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n, |i, j| {
        if j == i {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Plant in difference coordinates `s = T x`:
///
/// ```text
/// s⁺ = T M T⁺ s + T u + [T, T M 1/n] w
/// ```
///
/// with `u` the net vehicle injection per region and `w = (e, 1ᵀx)`.
pub fn reduced_system(graph: &RegionGraph) -> Result<LtiSystem> {
    let n = graph.n_regions();
    let t = difference_operator(n);
    let t_pinv = linalg::pseudo_inverse(&t)?;
    let m = graph.compartmental();
    let a = &t * &m * &t_pinv;
    let mass_col = &t * &m * nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut e = DMatrix::zeros(n - 1, n + 1);
    e.columns_mut(0, n).copy_from(&t);
    e.set_column(n, &mass_col);
    let rho = linalg::spectral_radius(&a);
    if !(rho < 1.0) {
        return Err(Error::NotSchurStable(rho));
    }
    LtiSystem::new(a, t, DMatrix::identity(n - 1, n - 1), DMatrix::zeros(n - 1, n + 1), e)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    p_max: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
}

impl Serialize for RegionGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GraphDocument {
            a: matrix_to_rows(&self.a),
            c: matrix_to_rows(&self.c),
            p_max: matrix_to_rows(&self.p_max),
            theta: matrix_to_rows(&self.theta),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RegionGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = GraphDocument::deserialize(deserializer)?;
        let conv = |name: &str, rows: &[Vec<f64>]| matrix_from_rows(name, rows).map_err(D::Error::custom);
        RegionGraph::new(
            conv("a", &doc.a)?,
            conv("c", &doc.c)?,
            conv("p_max", &doc.p_max)?,
            conv("theta", &doc.theta)?,
        )
        .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn chain(n: usize, a: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { a } else { 0.0 })
    }

    #[test]
    fn two_region_reduction() {
        for a in [0.1, 0.3, 0.45] {
            let g = RegionGraph::uniform(chain(2, a), 1.0, 2.0, 1.0).unwrap();
            let sys = reduced_system(&g).unwrap();
            assert_relative_eq!(sys.a()[(0, 0)], 1.0 - 2.0 * a, epsilon = 1e-14);
        }
    }

    #[test]
    fn no_mixing_is_rejected() {
        let g = RegionGraph::uniform(DMatrix::zeros(3, 3), 1.0, 2.0, 1.0).unwrap();
        assert!(matches!(reduced_system(&g), Err(Error::NotSchurStable(r)) if (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn long_chain_is_stable() {
        let g = RegionGraph::uniform(chain(18, 0.2), 1.0, 2.0, 1.0).unwrap();
        let sys = reduced_system(&g).unwrap();
        assert_eq!(sys.n(), 17);
        assert!(sys.spectral_radius() < 1.0);
    }

    #[test]
    fn reduced_matches_full_model() {
        let mut a = chain(4, 0.1);
        a[(0, 3)] = 0.05;
        a[(2, 0)] = 0.15;
        let g = RegionGraph::uniform(a, 1.0, 2.0, 1.0).unwrap();
        let sys = reduced_system(&g).unwrap();
        let m = g.compartmental();
        let t = difference_operator(4);
        let mut x = DVector::from_column_slice(&[0.4, 0.1, 0.3, 0.2]);
        let mut s = &t * &x;
        for k in 0..30 {
            let inj = DVector::from_fn(4, |i, _| 0.01 * ((k + i) as f64).sin());
            let mut w = DVector::zeros(5);
            w[4] = x.sum();
            let (next_s, _) = sys.step(&s, &inj, &w);
            x = &m * &x + &inj;
            s = next_s;
            assert!((&t * &x - &s).amax() < 1e-10);
        }
    }

    #[test]
    fn validation_and_json() {
        let mut a = chain(3, 0.5);
        assert!(RegionGraph::uniform(a.clone(), 1.0, 2.0, 1.0).is_ok());
        a[(1, 0)] = 0.6;
        assert!(RegionGraph::uniform(a, 1.0, 2.0, 1.0).is_err());
        let mut diag = chain(3, 0.1);
        diag[(0, 0)] = 0.1;
        assert!(RegionGraph::uniform(diag, 1.0, 2.0, 1.0).is_err());
        let g = RegionGraph::uniform(chain(3, 0.1), 1.0, 2.0, 0.5).unwrap();
        assert_eq!(RegionGraph::from_json(&g.to_json().unwrap()).unwrap(), g);
        assert_eq!(g.pairs(), vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }
}
