//! Percentile-method confidence region: the density superlevel set that
//! captures `(1 - alpha) * b` of the bootstrap maximizers.

use serde::{Deserialize, Serialize};

use crate::contour::extract_contours;
use crate::kde::DensityEstimate;
use crate::{Error, Result};

/// Default lattice resolution for contour extraction.
pub const DEFAULT_GRID_RESOLUTION: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub alpha: f64,
    /// Density threshold; membership is `density >= f_alpha`.
    pub f_alpha: f64,
    pub captured_count: usize,
    pub b: usize,
    /// Closed loops (no repeated closing vertex) tracing the region boundary.
    pub polygons: Vec<Vec<[f64; 2]>>,
    pub grid_resolution: usize,
    /// Smallest unclipped density on the lattice; negative near edges is expected.
    pub min_grid_density: f64,
    pub contains_true_point: Option<bool>,
}

/// Number of points the region must capture, `(1 - alpha) * b`, when it is a
/// positive integer.
pub fn capture_target(alpha: f64, b: usize) -> Result<usize> {
    let mass = (1.0 - alpha) * b as f64;
    let k = mass.round();
    if !(0.0..1.0).contains(&alpha) || (mass - k).abs() > 1e-9 || k < 1.0 || k > b as f64 {
        return Err(Error::NonIntegerMass { alpha, b, mass });
    }
    Ok(k as usize)
}

/// The `(1 - alpha) * b`-th largest of the density values at the cloud points.
pub fn select_f_alpha(density_values_at_cloud: &[f64], alpha: f64) -> Result<f64> {
    let b = density_values_at_cloud.len();
    if density_values_at_cloud.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("density values must be finite".into()));
    }
    let k = capture_target(alpha, b)?;
    let mut v = density_values_at_cloud.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    Ok(*kth)
}

/// Points whose density reaches the threshold; ties are all captured.
pub fn count_captured(density_values_at_cloud: &[f64], f_alpha: f64) -> usize {
    density_values_at_cloud
        .iter()
        .filter(|v| **v >= f_alpha)
        .count()
}

/// Whether `x` lies in the region: inside the support with density at least
/// `f_alpha`. Polygons play no part.
pub fn membership(region: &ConfidenceRegion, density: &DensityEstimate, x: [f64; 2]) -> bool {
    density.support().contains(x) && density.density_at(x) >= region.f_alpha
}

/// Level and capture count for one `alpha`, from precomputed cloud densities.
pub fn level_for(density_values_at_cloud: &[f64], alpha: f64) -> Result<(f64, usize)> {
    let f_alpha = select_f_alpha(density_values_at_cloud, alpha)?;
    Ok((f_alpha, count_captured(density_values_at_cloud, f_alpha)))
}

/// Confidence region at `alpha`, with its boundary traced on a
/// `(grid_resolution + 1)^2` lattice.
pub fn build_region(
    density: &DensityEstimate,
    alpha: f64,
    grid_resolution: usize,
) -> Result<ConfidenceRegion> {
    capture_target(alpha, density.points().len())?;
    let at_cloud = density.density_at_points();
    build_region_with(density, &at_cloud, alpha, grid_resolution)
}

/// As [`build_region`], reusing densities already evaluated at the cloud.
pub fn build_region_with(
    density: &DensityEstimate,
    at_cloud: &[f64],
    alpha: f64,
    grid_resolution: usize,
) -> Result<ConfidenceRegion> {
    let (f_alpha, captured_count) = level_for(at_cloud, alpha)?;
    let grid = density.density_on_grid(grid_resolution)?;
    let polygons = extract_contours(&grid, f_alpha, density.support());
    Ok(ConfidenceRegion {
        alpha,
        f_alpha,
        captured_count,
        b: at_cloud.len(),
        polygons,
        grid_resolution,
        min_grid_density: grid.min(),
        contains_true_point: None,
    })
}
