//! One pass from an experiment to a fitted density over its bootstrap cloud.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidth, BandwidthMethod, BandwidthSelection};
use crate::bootstrap::{bootstrap_xcm, BootstrapCloud};
use crate::kde::DensityEstimate;
use crate::model::{fit, Experiment, FitResult};
use crate::optim::{constrained_max, ConstrainedMaximum, NelderMeadConfig};
use crate::rng::SeedTree;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub b: usize,
    pub bandwidth_method: BandwidthMethod,
    /// Use these bandwidths instead of selecting them.
    pub bandwidth_override: Option<[f64; 2]>,
    pub allow_plugin_fallback: bool,
    pub optim: NelderMeadConfig,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            b: 2000,
            bandwidth_method: BandwidthMethod::RuleOfThumb,
            bandwidth_override: None,
            allow_plugin_fallback: true,
            optim: NelderMeadConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub fit: FitResult,
    pub x_cm_hat: ConstrainedMaximum,
    pub cloud: BootstrapCloud,
    pub bandwidth: BandwidthSelection,
    pub density: DensityEstimate,
}

/// Fit, maximize, bootstrap, select bandwidths and build the density.
///
/// The bootstrap and jitter streams are the `"boot"` and `"jitter"` children
/// of `seed`.
pub fn run_pipeline(
    experiment: &Experiment,
    settings: &PipelineSettings,
    seed: u64,
) -> Result<PipelineOutput> {
    let tree = SeedTree::new(seed);
    let fit = fit(experiment)?;
    let x_cm_hat = constrained_max(&fit.model, &experiment.region, &settings.optim)?;
    let cloud = bootstrap_xcm(
        &fit,
        experiment,
        settings.b,
        tree.child("boot").seed(),
        &settings.optim,
    )?;
    let jitter_seed = tree.child("jitter").seed();
    let bandwidth = match settings.bandwidth_override {
        Some(h) => {
            if !h.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "bandwidth override must be positive, got {h:?}"
                )));
            }
            BandwidthSelection {
                h,
                method: settings.bandwidth_method,
                scale_estimates: crate::bandwidth::jittered_scale(&cloud, jitter_seed)
                    .unwrap_or([f64::NAN; 2]),
                jitter_seed,
                fallback_reason: None,
            }
        }
        None => select_bandwidth(
            &cloud,
            settings.bandwidth_method,
            jitter_seed,
            settings.allow_plugin_fallback,
        )?,
    };
    let density = DensityEstimate::from_cloud(&cloud, bandwidth.h)?;
    Ok(PipelineOutput {
        fit,
        x_cm_hat,
        cloud,
        bandwidth,
        density,
    })
}
