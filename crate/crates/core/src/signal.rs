//! Finite vector-valued signals and their CSV representation.
//!
//! A [`Signal`] stores one sample per column, so sample `k` of a
//! `dim`-dimensional signal is column `k` of a `dim × len` matrix.
//! The CSV layout is one row per time step with header `t,z1,...,zσ`.

use std::io::{Read, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    data: DMatrix<f64>,
}

impl Signal {
    /// Wrap a `dim × len` matrix whose columns are samples.
    pub fn from_matrix(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, len),
        }
    }

    /// Build from a list of samples; all must share the same dimension.
    pub fn from_samples(samples: &[DVector<f64>]) -> Result<Self> {
        let dim = samples.first().map(|s| s.len()).unwrap_or(0);
        let mut data = DMatrix::zeros(dim, samples.len());
        for (k, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::dimension(format!("sample {k}"), dim, s.len()));
            }
            data.set_column(k, s);
        }
        Ok(Self { data })
    }

    /// Scalar signal from a slice of values.
    pub fn scalar(values: &[f64]) -> Self {
        Self {
            data: DMatrix::from_row_slice(1, values.len(), values),
        }
    }

    /// Constant signal repeating `value` for `len` steps.
    pub fn constant(value: &DVector<f64>, len: usize) -> Self {
        Self {
            data: DMatrix::from_fn(value.len(), len, |i, _| value[i]),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn sample(&self, k: usize) -> DVectorView<'_, f64> {
        self.data.column(k)
    }

    pub fn set_sample(&mut self, k: usize, value: &DVector<f64>) {
        self.data.set_column(k, value);
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Sub-signal over a half-open time range.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::IndexOutOfRange(format!(
                "time range {range:?} on a signal of length {}",
                self.len()
            )));
        }
        Ok(Self {
            data: self.data.columns(range.start, range.len()).into_owned(),
        })
    }

    /// Sum of squares of all entries.
    pub fn energy(&self) -> f64 {
        self.data.norm_squared()
    }

    /// Stack two equally long signals coordinate-wise.
    pub fn stack(&self, other: &Signal) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::dimension("stacked signal length", self.len(), other.len()));
        }
        let mut data = DMatrix::zeros(self.dim() + other.dim(), self.len());
        data.rows_mut(0, self.dim()).copy_from(&self.data);
        data.rows_mut(self.dim(), other.dim()).copy_from(&other.data);
        Ok(Self { data })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("z{i}")));
        wtr.write_record(&header).map_err(csv_to_error)?;
        for k in 0..self.len() {
            let mut row = vec![k.to_string()];
            row.extend(self.data.column(k).iter().map(|v| v.to_string()));
            wtr.write_record(&row).map_err(csv_to_error)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parse the `t,z1,...,zσ` layout. Rows must be in time order starting at 0.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_to_error)?.clone();
        if header.is_empty() || &header[0] != "t" {
            return Err(Error::Parse {
                line: 1,
                message: "header must start with column `t`".into(),
            });
        }
        for (i, name) in header.iter().enumerate().skip(1) {
            if name != format!("z{i}") {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected column `z{i}`, found `{name}`"),
                });
            }
        }
        let dim = header.len() - 1;
        let mut values = Vec::new();
        let mut len = 0usize;
        for record in rdr.records() {
            let record = record.map_err(csv_to_error)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let t: usize = record[0].parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid time index `{}`", &record[0]),
            })?;
            if t != len {
                return Err(Error::Parse {
                    line,
                    message: format!("expected time index {len}, found {t}"),
                });
            }
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid number `{field}`"),
                })?;
                values.push(v);
            }
            len += 1;
        }
        Ok(Self {
            data: DMatrix::from_column_slice(dim, len, &values),
        })
    }
}

pub(crate) fn csv_to_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}
