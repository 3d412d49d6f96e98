//! Matrix files: Matrix Market (coordinate or array) and a plain text
//! format whose first line is `n`, followed by `n` rows of `n` numbers.
//!
//! Loaded matrices are symmetrized as `(M + Mᵀ)/2`; the asymmetry that was
//! removed is reported so callers can warn about it.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use nalgebra_sparse::io::{load_coo_from_matrix_market_str, save_to_matrix_market_str};
use nalgebra_sparse::CooMatrix;

use crate::error::{Error, Result};
use crate::operator::{asymmetry, SymmetricOperator};

/// Relative asymmetry above which a warning is due.
pub const ASYMMETRY_WARN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMatrix {
    pub operator: SymmetricOperator,
    /// `max |M − Mᵀ|` of the file contents.
    pub asymmetry: f64,
}

impl LoadedMatrix {
    pub fn relative_asymmetry(&self) -> f64 {
        let norm = self.operator.norm_max();
        if norm > 0.0 {
            self.asymmetry / norm
        } else {
            self.asymmetry
        }
    }

    pub fn needs_warning(&self) -> bool {
        self.relative_asymmetry() > ASYMMETRY_WARN
    }
}

fn finish(m: DMatrix<f64>) -> Result<LoadedMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let asym = asymmetry(&m);
    Ok(LoadedMatrix {
        operator: SymmetricOperator::new(m)?,
        asymmetry: asym,
    })
}

pub fn parse_matrix_market(text: &str) -> Result<LoadedMatrix> {
    let coo = load_coo_from_matrix_market_str::<f64>(text).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    let mut m = DMatrix::zeros(coo.nrows(), coo.ncols());
    for (i, j, v) in coo.triplet_iter() {
        m[(i, j)] += *v;
    }
    finish(m)
}

pub fn parse_plain(text: &str) -> Result<LoadedMatrix> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(ln, l)| l.split_whitespace().map(move |t| (ln + 1, t)));
    let (line, first) = tokens.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let n: usize = first.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected dimension, found {first:?}"),
    })?;
    let mut data = Vec::with_capacity(n * n);
    for (line, t) in tokens {
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("expected number, found {t:?}"),
        })?;
        data.push(v);
    }
    if data.len() != n * n {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {} entries for n = {n}, found {}", n * n, data.len()),
        });
    }
    finish(DMatrix::from_row_slice(n, n, &data))
}

/// Dispatches on a `%%MatrixMarket` banner.
pub fn parse_matrix(text: &str) -> Result<LoadedMatrix> {
    let head = text.trim_start().get(..14).unwrap_or("");
    if head.eq_ignore_ascii_case("%%MatrixMarket") {
        parse_matrix_market(text)
    } else {
        parse_plain(text)
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<LoadedMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

/// Coordinate Matrix Market with every entry listed; values round-trip
/// exactly.
pub fn matrix_market_string(m: &DMatrix<f64>) -> String {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            coo.push(i, j, m[(i, j)]);
        }
    }
    save_to_matrix_market_str(&coo)
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_market_string(m)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
