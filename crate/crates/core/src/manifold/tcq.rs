use serde::{Deserialize, Serialize};

use super::{check_dim, sq_dist, FeatureMatrix, SomGrid};
use crate::error::{Error, Result};

/// Topological conservation quality: the fraction of samples whose two nearest
/// neurons share a grid edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcqReport {
    pub tcq: f64,
    /// Number of samples evaluated.
    pub q: usize,
    /// Samples whose two nearest neurons are contiguous.
    pub hits: usize,
}

/// The two nearest neurons of `x`; exact ties resolve to the lowest indices.
fn two_nearest(grid: &SomGrid, x: &[f64]) -> (usize, usize) {
    let mut first = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for n in 0..grid.neurons() {
        let d = sq_dist(x, grid.weights(n));
        if d < first.1 {
            second = first;
            first = (n, d);
        } else if d < second.1 {
            second = (n, d);
        }
    }
    (first.0, second.0)
}

pub fn tcq(grid: &SomGrid, x: &FeatureMatrix) -> Result<TcqReport> {
    check_dim(grid.dim, x.cols())?;
    if grid.neurons() < 2 {
        return Err(Error::Config("TCQ needs a grid with at least 2 neurons".into()));
    }
    if x.is_empty() {
        return Err(Error::Empty("TCQ needs at least one sample".into()));
    }
    let hits = x
        .iter_rows()
        .filter(|r| {
            let (a, b) = two_nearest(grid, r);
            grid.are_contiguous(a, b)
        })
        .count();
    Ok(TcqReport {
        tcq: hits as f64 / x.rows() as f64,
        q: x.rows(),
        hits,
    })
}
