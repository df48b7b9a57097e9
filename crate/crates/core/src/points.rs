//! Flat storage for sets of points in `R^d`.

use crate::error::{Error, Result};

/// A set of points in `R^d`, stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    dim: usize,
}

impl PointSet {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::invalid(
                "data",
                format!("length {} is not a multiple of dim {}", data.len(), dim),
            ));
        }
        Ok(PointSet { data, dim })
    }

    pub fn from_1d(xs: &[f64]) -> Self {
        PointSet {
            data: xs.to_vec(),
            dim: 1,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(PointSet { data, dim })
    }

    /// `n` equispaced points on `[lo, hi]`, endpoints included.
    pub fn grid_1d(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points");
        let step = (hi - lo) / (n - 1) as f64;
        PointSet::from_1d(&(0..n).map(|i| lo + step * i as f64).collect::<Vec<_>>())
    }

    /// Cartesian product of `grid_1d(lo, hi, n)` with itself, `d` times.
    /// Points are ordered with the last coordinate varying fastest.
    pub fn grid_nd(lo: f64, hi: f64, n_per_axis: usize, dim: usize) -> Self {
        let axis = PointSet::grid_1d(lo, hi, n_per_axis);
        let total = n_per_axis.pow(dim as u32);
        let mut data = Vec::with_capacity(total * dim);
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = vec![0.0; dim];
            for k in (0..dim).rev() {
                coords[k] = axis.data[rem % n_per_axis];
                rem /= n_per_axis;
            }
            data.extend_from_slice(&coords);
        }
        PointSet { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(PointSet { data, dim: self.dim })
    }
}
