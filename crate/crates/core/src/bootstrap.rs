//! Balanced residual bootstrap of the constrained maximizer.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::model::{Experiment, FitResult, Region};
use crate::optim::{constrained_max, BoundaryContact, NelderMeadConfig};
use crate::rng::SeedTree;
use crate::{Error, Result};

/// `b` bootstrap maximizers, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCloud {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub boundary_flags: Vec<[BoundaryContact; 2]>,
    /// Per-replicate optimizer convergence; failures are kept, not redrawn.
    pub converged: Vec<bool>,
    pub region: Region,
    pub seed: u64,
}

impl BootstrapCloud {
    pub fn b(&self) -> usize {
        self.points.len()
    }

    pub fn n_unconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }
}

/// Balanced resampling plan: `b` copies of `0..n` are concatenated, shuffled
/// with one uniform permutation, and cut into `b` rows of length `n`. Every
/// index appears exactly `b` times overall.
pub fn balanced_resample_indices(n: usize, b: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 || b == 0 {
        return Err(Error::InvalidInput(format!(
            "balanced bootstrap needs n >= 1 and b >= 1, got n = {n}, b = {b}"
        )));
    }
    let mut pool: Vec<usize> = (0..b).flat_map(|_| 0..n).collect();
    let mut rng = SeedTree::new(seed).child("balance").rng();
    pool.shuffle(&mut rng);
    Ok(pool.chunks_exact(n).map(<[usize]>::to_vec).collect())
}

/// Residual bootstrap of the constrained maximizer.
///
/// Replicate `i` adds the standardized residuals selected by row `i` of the
/// balanced plan to the fitted values, refits by least squares on the same
/// design and maximizes the refitted surface over the region. Replicates run
/// in parallel; the result does not depend on the thread count.
pub fn bootstrap_xcm(
    fit: &FitResult,
    experiment: &Experiment,
    b: usize,
    seed: u64,
    optim_config: &NelderMeadConfig,
) -> Result<BootstrapCloud> {
    if fit.n() != experiment.n() {
        return Err(Error::InvalidInput(format!(
            "fit has {} runs but the experiment has {}",
            fit.n(),
            experiment.n()
        )));
    }
    let plan = balanced_resample_indices(fit.n(), b, seed)?;
    let region = experiment.region;
    let maxima = plan
        .par_iter()
        .map(|rows| {
            let y_star: Vec<f64> = fit
                .fitted
                .iter()
                .zip(rows)
                .map(|(f, &k)| f + fit.std_residuals[k])
                .collect();
            constrained_max(&fit.refit(&y_star), &region, optim_config)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BootstrapCloud {
        points: maxima.iter().map(|m| m.point).collect(),
        values: maxima.iter().map(|m| m.value).collect(),
        boundary_flags: maxima.iter().map(|m| m.on_boundary).collect(),
        converged: maxima.iter().map(|m| m.converged).collect(),
        region,
        seed,
    })
}
