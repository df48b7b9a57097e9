//! Dataset ingestion (headered CSV of reals) with the standardization used
//! by the regression experiments, plus self-contained synthetic generators.

use std::path::Path;

use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::InPaintComposite;
use crate::points::PointSet;
use crate::rng::{purpose, substream_for};

/// Record of the affine maps applied to a dataset, kept so predictions can
/// be mapped back to raw units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    /// Per-column raw input range mapped onto `[-5, 5]`.
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Standardization {
    pub fn map_x(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.x_lo.iter().zip(&self.x_hi))
            .map(|(&v, (&lo, &hi))| -5.0 + 10.0 * (v - lo) / (hi - lo))
            .collect()
    }

    pub fn invert_y(&self, standardized: f64) -> f64 {
        standardized * self.y_sd + self.y_mean
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: PointSet,
    pub y: DVector<f64>,
    pub standardization: Option<Standardization>,
}

/// Parse a headered CSV of reals. With `standardize` set, inputs are
/// affinely mapped onto `[-5, 5]` per column and the response is centered
/// and scaled to unit standard deviation; the transform is returned for
/// inverse mapping of predictions. Lines starting with `#` are skipped.
pub fn load_csv(
    path: &Path,
    x_columns: &[&str],
    y_column: &str,
    standardize: bool,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::EmptyCsv {
        path: display.clone(),
    })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let col_index = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                path: display.clone(),
            })
    };
    let x_idx: Vec<usize> = x_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let y_idx = col_index(y_column)?;

    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |idx: usize, column: &str| -> Result<f64> {
            let token = cells.get(idx).copied().unwrap_or("");
            token.parse::<f64>().map_err(|_| Error::NonNumericCell {
                row: row + 1,
                column: column.to_string(),
                token: token.to_string(),
            })
        };
        let mut point = Vec::with_capacity(x_idx.len());
        for (k, &idx) in x_idx.iter().enumerate() {
            point.push(parse(idx, x_columns[k])?);
        }
        ys.push(parse(y_idx, y_column)?);
        xs.push(point);
    }
    if xs.is_empty() {
        return Err(Error::EmptyCsv { path: display });
    }

    if !standardize {
        return Ok(Dataset {
            x: PointSet::from_rows(&xs)?,
            y: DVector::from_vec(ys),
            standardization: None,
        });
    }

    let dim = x_columns.len();
    let mut x_lo = vec![f64::INFINITY; dim];
    let mut x_hi = vec![f64::NEG_INFINITY; dim];
    for p in &xs {
        for k in 0..dim {
            x_lo[k] = x_lo[k].min(p[k]);
            x_hi[k] = x_hi[k].max(p[k]);
        }
    }
    for k in 0..dim {
        if x_hi[k] <= x_lo[k] {
            return Err(Error::ZeroVariance {
                column: x_columns[k].to_string(),
            });
        }
    }
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let y_var = ys.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
    if y_var <= 0.0 {
        return Err(Error::ZeroVariance {
            column: y_column.to_string(),
        });
    }
    let record = Standardization {
        x_lo,
        x_hi,
        y_mean,
        y_sd: y_var.sqrt(),
    };
    let mapped: Vec<Vec<f64>> = xs.iter().map(|p| record.map_x(p)).collect();
    let y = DVector::from_iterator(ys.len(), ys.iter().map(|v| (v - y_mean) / record.y_sd));
    Ok(Dataset {
        x: PointSet::from_rows(&mapped)?,
        y,
        standardization: Some(record),
    })
}

/// A seasonal series on `[-5, 5]`: linear trend plus sinusoid plus noise,
/// already in standardized units. The first `n_train` points are the
/// training window, the remainder the extrapolation horizon.
pub struct SyntheticSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n_train: usize,
}

pub fn synth_seasonal_series(
    n_train: usize,
    n_extrapolate: usize,
    slope: f64,
    period: f64,
    amplitude: f64,
    noise_sd: f64,
    seed: u64,
) -> SyntheticSeries {
    let total = n_train + n_extrapolate;
    let mut rng = substream_for(seed, purpose::DATASET, 0, 0);
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("positive sd");
    let mut x = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    for i in 0..total {
        let xi = -5.0 + 10.0 * i as f64 / (total - 1) as f64;
        let season = amplitude * (std::f64::consts::TAU * xi / period).sin();
        x.push(xi);
        y.push(slope * xi + season + noise.sample(&mut rng));
    }
    SyntheticSeries { x, y, n_train }
}

/// The in-painting test image: the composite kernel's own cosine mode on a
/// left-endpoint grid over `[-5, 5]²` (so pixel locations coincide with the
/// cubature nodes used by the experiment).
pub fn synth_inpaint_image(per_axis: usize) -> (PointSet, DVector<f64>) {
    let step = 10.0 / per_axis as f64;
    let mut rows = Vec::with_capacity(per_axis * per_axis);
    for i in 0..per_axis {
        for j in 0..per_axis {
            rows.push(vec![-5.0 + step * i as f64, -5.0 + step * j as f64]);
        }
    }
    let grid = PointSet::from_rows(&rows).expect("rectangular grid");
    let y = DVector::from_iterator(grid.len(), grid.iter().map(InPaintComposite::cosine_mode));
    (grid, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_identity_columns_without_standardization() {
        let p = write_temp("ds_identity.csv", "t,value\n1.0,2.0\n3.0,4.0\n");
        let ds = load_csv(&p, &["t"], "value", false).unwrap();
        assert_eq!(ds.x.point(0), &[1.0]);
        assert_eq!(ds.x.point(1), &[3.0]);
        assert_eq!(ds.y[1], 4.0);
        assert!(ds.standardization.is_none());
    }

    #[test]
    fn standardizes_to_unit_moments_and_domain() {
        // 43-point series: x spans exactly [-5, 5] after the rescale
        let mut body = String::from("month,co2\n");
        for i in 0..43 {
            body.push_str(&format!("{},{}\n", 1958.0 + i as f64 / 12.0, 310.0 + 0.1 * i as f64 + (i as f64).sin()));
        }
        let p = write_temp("ds_series.csv", &body);
        let ds = load_csv(&p, &["month"], "co2", true).unwrap();
        assert_eq!(ds.x.len(), 43);
        assert!((ds.x.point(0)[0] + 5.0).abs() < 1e-12);
        assert!((ds.x.point(42)[0] - 5.0).abs() < 1e-12);
        let n = ds.y.len() as f64;
        let mean = ds.y.iter().sum::<f64>() / n;
        let sd = (ds.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((sd - 1.0).abs() < 1e-9);
        // inverse map restores raw units
        let s = ds.standardization.unwrap();
        assert!((s.invert_y(ds.y[0]) - 310.0).abs() < 1e-9);
    }

    #[test]
    fn named_errors_for_bad_inputs() {
        let p = write_temp("ds_empty.csv", "\n");
        assert!(matches!(
            load_csv(&p, &["a"], "b", false),
            Err(Error::EmptyCsv { .. })
        ));
        let p = write_temp("ds_missing.csv", "a,b\n1,2\n");
        assert!(matches!(
            load_csv(&p, &["a"], "c", false),
            Err(Error::MissingColumn { .. })
        ));
        let p = write_temp("ds_nonnum.csv", "a,b\n1,x\n");
        match load_csv(&p, &["a"], "b", false) {
            Err(Error::NonNumericCell { row, column, token }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "b");
                assert_eq!(token, "x");
            }
            other => panic!("expected NonNumericCell, got {:?}", other.map(|_| ())),
        }
        let p = write_temp("ds_const.csv", "a,b\n1,7\n2,7\n");
        assert!(matches!(
            load_csv(&p, &["a"], "b", true),
            Err(Error::ZeroVariance { .. })
        ));
    }

    #[test]
    fn seasonal_series_is_deterministic_and_spans_domain() {
        let a = synth_seasonal_series(43, 23, 0.06, 3.24, 0.75, 0.085, 5);
        let b = synth_seasonal_series(43, 23, 0.06, 3.24, 0.75, 0.085, 5);
        assert_eq!(a.y, b.y);
        assert_eq!(a.x.len(), 66);
        assert!((a.x[0] + 5.0).abs() < 1e-12);
        assert!((a.x[65] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn inpaint_image_matches_cosine_mode() {
        let (grid, y) = synth_inpaint_image(10);
        assert_eq!(grid.len(), 100);
        let j = 37;
        assert!((y[j] - InPaintComposite::cosine_mode(grid.point(j))).abs() < 1e-15);
    }
}
