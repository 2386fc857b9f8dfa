//! Row-major nested-array conversions used by the JSON schemas.

use nalgebra::{DMatrix, DVector};

pub fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_mat(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, String> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Infers the column count from the first row; an empty list is `0 x 0`.
pub fn rows_to_mat_infer(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    rows_to_mat(rows, ncols)
}

pub fn vec_to_list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn list_to_vec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
