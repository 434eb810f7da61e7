//! Block-Hankel matrices of finite signals.
//!
//! For a signal `z_0, …, z_{T-1}` in `R^σ`, the depth-`t`, width-`q` matrix
//! `Z_{t,q}` has block `(i, j)` (1-indexed) equal to `z_{i+j-2}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal::Signal;

/// Relative singular-value cutoff for excitation rank checks.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    sigma: usize,
    depth: usize,
    width: usize,
    matrix: DMatrix<f64>,
}

impl HankelMatrix {
    pub fn sigma(&self) -> usize {
        self.sigma
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Block row `i` (1-indexed): `[z_{i-1}, …, z_{i+q-2}]`.
    pub fn block_row(&self, i: usize) -> Result<DMatrix<f64>> {
        if i == 0 || i > self.depth {
            return Err(Error::IndexOutOfRange(format!(
                "block row {i} of a depth-{} Hankel matrix",
                self.depth
            )));
        }
        Ok(self.matrix.rows((i - 1) * self.sigma, self.sigma).into_owned())
    }

    pub fn rank(&self) -> usize {
        linalg::numerical_rank(&self.matrix, RANK_TOLERANCE)
    }
}

/// Build `Z_{t,q}` from the first `t + q - 1` samples of `z`.
pub fn build_hankel(z: &Signal, t: usize, q: usize) -> Result<HankelMatrix> {
    if t == 0 || q == 0 {
        return Err(Error::InvalidArgument("Hankel depth and width must be positive".into()));
    }
    let needed = t + q - 1;
    if z.len() < needed {
        return Err(Error::InsufficientData(format!(
            "depth {t} and width {q} need at least {needed} samples, signal has {}",
            z.len()
        )));
    }
    let sigma = z.dim();
    let src = z.as_matrix();
    let mut matrix = DMatrix::zeros(sigma * t, q);
    for i in 0..t {
        matrix
            .view_mut((i * sigma, 0), (sigma, q))
            .copy_from(&src.columns(i, q));
    }
    Ok(HankelMatrix {
        sigma,
        depth: t,
        width: q,
        matrix,
    })
}

/// Outcome of a persistency-of-excitation test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcitationReport {
    pub exciting: bool,
    pub rank: usize,
    pub required: usize,
    pub diagnostic: Option<String>,
}

/// Whether `z` is persistently exciting of order `t`, using the widest
/// Hankel matrix the signal admits (`q = T - t + 1`).
pub fn is_persistently_exciting(z: &Signal, t: usize) -> ExcitationReport {
    let required = z.dim() * t;
    if t == 0 || z.len() < t {
        return ExcitationReport {
            exciting: false,
            rank: 0,
            required,
            diagnostic: Some(format!("signal length {} is shorter than order {t}", z.len())),
        };
    }
    let q = z.len() - t + 1;
    if q < required {
        return ExcitationReport {
            exciting: false,
            rank: 0,
            required,
            diagnostic: Some(format!("q < σt ({q} < {required})")),
        };
    }
    let rank = build_hankel(z, t, q).map(|h| h.rank()).unwrap_or(0);
    ExcitationReport {
        exciting: rank == required,
        rank,
        required,
        diagnostic: (rank < required).then(|| format!("rank {rank} < {required}")),
    }
}

/// Like [`is_persistently_exciting`] but returns a typed error on failure.
pub fn require_persistently_exciting(name: &str, z: &Signal, t: usize) -> Result<()> {
    let report = is_persistently_exciting(z, t);
    if report.exciting {
        Ok(())
    } else {
        Err(Error::NotPersistentlyExciting {
            signal: name.to_string(),
            order: t,
            rank: report.rank,
            required: report.required,
        })
    }
}

/// Forward differences `z_{k+1} - z_k`.
pub fn difference_signal(z: &Signal) -> Result<Signal> {
    if z.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "differencing needs at least 2 samples, signal has {}",
            z.len()
        )));
    }
    let m = z.as_matrix();
    let n = z.len() - 1;
    Ok(Signal::from_matrix(m.columns(1, n) - m.columns(0, n)))
}
