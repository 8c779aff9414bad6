//! Log-log rate fits.

use std::str::FromStr;

use super::rows::ResultRow;
use crate::error::{Error, Result};

/// Abscissa of a rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Nodes,
    Time,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" => Ok(Axis::Nodes),
            "time" => Ok(Axis::Time),
            _ => Err(Error::Argument(format!(
                "axis must be `nodes` or `time`, got `{s}`"
            ))),
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 5 {
        return Err(Error::Analysis(format!(
            "need at least 5 points for a rate fit, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::Analysis(format!(
            "non-positive point ({x}, {y}) in rate fit"
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Analysis("all abscissae are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Slope of `log mmd` against `log x` over rows with `x ∈ [from, to]`.
pub fn loglog_slope(rows: &[ResultRow], axis: Axis, from: f64, to: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let x = match axis {
                Axis::Nodes => r.node_count as f64,
                Axis::Time => r.wall_time_seconds,
            };
            (x, r.mmd)
        })
        .filter(|&(x, _)| x >= from && x <= to)
        .collect();
    fit_loglog(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sampling::{rng_for, Stream};
    use rand::Rng;

    fn rows(f: impl Fn(usize) -> f64) -> Vec<ResultRow> {
        (1..=200)
            .map(|t| ResultRow::synthetic(t, t, f(t)))
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let s = loglog_slope(&rows(|t| (t as f64).powf(-0.5)), Axis::Nodes, 1.0, 200.0).unwrap();
        assert!((s + 0.5).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_slope() {
        let s = loglog_slope(&rows(|_| 0.3), Axis::Nodes, 10.0, 100.0).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = rng_for(11, Stream::Instance);
        let noise: Vec<f64> = (0..=200)
            .map(|_| 1.0 + 0.01 * rng.gen_range(-1.0..1.0))
            .collect();
        let s = loglog_slope(
            &rows(|t| (t as f64).powf(-0.75) * noise[t]),
            Axis::Nodes,
            1.0,
            200.0,
        )
        .unwrap();
        assert!((s + 0.75).abs() < 0.02);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            loglog_slope(&rows(|t| 1.0 / t as f64), Axis::Nodes, 1.0, 4.0),
            Err(Error::Analysis(_))
        ));
    }
}
