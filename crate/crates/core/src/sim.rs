//! Monte Carlo coverage studies against known second-order surfaces.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::bandwidth::{
    jittered_points, jittered_scale, plugin_bandwidth, rule_of_thumb, BandwidthMethod,
};
use crate::bootstrap::bootstrap_xcm;
use crate::model::{ccd_design, fit, replicate_design, Experiment, QuadraticModel, Region};
use crate::optim::{quadratic_box_max_exact, NelderMeadConfig};
use crate::pipeline::{run_pipeline, PipelineSettings};
use crate::region::{capture_target, level_for};
use crate::rng::SeedTree;
use crate::{Error, Result};

/// Concave-down reference surface, coefficients in design-column order.
pub const CONCAVE_DOWN_COEFFICIENTS: [f64; 6] = [86.850, 5.242, 4.778, -0.775, -2.781, -2.524];
/// Its published maximizer on `[-1.4, 1.4]^2`, to three decimals.
pub const CONCAVE_DOWN_XCM: [f64; 2] = [0.828, 0.819];
/// Saddle reference surface.
pub const SADDLE_COEFFICIENTS: [f64; 6] = [90.259, -6.425, 1.244, -0.775, 2.781, -2.524];
pub const SADDLE_XCM: [f64; 2] = [-1.4, 0.462];
/// Half-width of the reference experimental region.
pub const REFERENCE_HALF_WIDTH: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemName {
    ConcaveDown,
    Saddle,
}

impl SystemName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemName::ConcaveDown => "concave-down",
            SystemName::Saddle => "saddle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concave-down" => Some(SystemName::ConcaveDown),
            "saddle" => Some(SystemName::Saddle),
            _ => None,
        }
    }
}

/// A known surface with its exact constrained maximizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueSystem {
    pub name: SystemName,
    pub model: QuadraticModel,
    pub region: Region,
    pub x_cm_true: [f64; 2],
}

impl TrueSystem {
    /// Builds a reference system and checks the exact maximizer against the
    /// published one (three decimals).
    pub fn reference(name: SystemName) -> Result<Self> {
        let (coefs, published) = match name {
            SystemName::ConcaveDown => (CONCAVE_DOWN_COEFFICIENTS, CONCAVE_DOWN_XCM),
            SystemName::Saddle => (SADDLE_COEFFICIENTS, SADDLE_XCM),
        };
        let model = QuadraticModel::from_coefficients(coefs);
        let region = Region::square(REFERENCE_HALF_WIDTH)?;
        let exact = quadratic_box_max_exact(&model, &region);
        if exact.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "{} surface has {} maximizers",
                name.as_str(),
                exact.len()
            )));
        }
        let x = exact[0].point;
        if (x[0] - published[0]).abs() > 1e-3 || (x[1] - published[1]).abs() > 1e-3 {
            return Err(Error::InvalidInput(format!(
                "{} maximizer {:?} disagrees with {:?}",
                name.as_str(),
                x,
                published
            )));
        }
        Ok(Self {
            name,
            model,
            region,
            x_cm_true: x,
        })
    }
}

/// Rotatable two-factor CCD with five center runs (13 runs).
pub fn rotatable_ccd() -> Vec<[f64; 2]> {
    ccd_design(5, SQRT_2).expect("valid CCD parameters")
}

/// Responses on the true surface plus independent `N(0, sigma^2)` errors.
pub fn simulate_experiment(
    system: &TrueSystem,
    design: &[[f64; 2]],
    sigma: f64,
    seed: u64,
) -> Result<Experiment> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    let mut rng = SeedTree::new(seed).child("noise").rng();
    let y = design
        .iter()
        .map(|&p| {
            let e: f64 = StandardNormal.sample(&mut rng);
            system.model.value(p) + sigma * e
        })
        .collect();
    Experiment::new(design.to_vec(), y, system.region)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    pub n_reps: usize,
    pub group_size: usize,
    pub design_replicates: usize,
    pub b: usize,
    pub alphas: Vec<f64>,
    pub bandwidth_method: BandwidthMethod,
    pub sigma: f64,
    pub seed: u64,
    pub optim: NelderMeadConfig,
}

impl CoverageSettings {
    /// Reduced-size defaults: 100 experiments in 5 groups, `b = 500`.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_reps: 100,
            group_size: 20,
            design_replicates: 1,
            b: 500,
            alphas: vec![0.10, 0.05, 0.02],
            bandwidth_method: BandwidthMethod::RuleOfThumb,
            sigma: 3.0,
            seed,
            optim: NelderMeadConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 || self.group_size == 0 || !self.n_reps.is_multiple_of(self.group_size)
        {
            return Err(Error::InvalidInput(format!(
                "n_reps ({}) must be a positive multiple of group_size ({})",
                self.n_reps, self.group_size
            )));
        }
        if self.design_replicates == 0 {
            return Err(Error::InvalidInput(
                "design_replicates must be at least 1".into(),
            ));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidInput("at least one alpha is required".into()));
        }
        for &a in &self.alphas {
            capture_target(a, self.b)?;
        }
        Ok(())
    }

    fn experiment_seed(&self, index: usize) -> u64 {
        SeedTree::new(self.seed)
            .child("experiment")
            .index(index as u64)
            .seed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub index: usize,
    pub seed: u64,
    pub bandwidths: Option<[f64; 2]>,
    /// Per alpha, in settings order; empty when the experiment failed.
    pub covered: Vec<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCoverage {
    pub alpha: f64,
    pub confidence: f64,
    /// Coverage within each group, over its successful experiments.
    pub group_coverage: Vec<f64>,
    pub mean: f64,
    /// Sample SD of group coverages over `sqrt(groups)`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub system: SystemName,
    pub n: usize,
    pub settings: CoverageSettings,
    pub groups: usize,
    pub experiments_per_group: usize,
    pub failed: usize,
    pub coverage: Vec<AlphaCoverage>,
    pub mean_bandwidths: [f64; 2],
    pub experiments: Vec<ExperimentOutcome>,
}

impl CoverageReport {
    pub fn at_alpha(&self, alpha: f64) -> Option<&AlphaCoverage> {
        self.coverage
            .iter()
            .find(|c| (c.alpha - alpha).abs() < 1e-12)
    }
}

fn run_one(
    system: &TrueSystem,
    design: &[[f64; 2]],
    settings: &CoverageSettings,
    index: usize,
) -> ExperimentOutcome {
    let seed = settings.experiment_seed(index);
    let pipeline = PipelineSettings {
        b: settings.b,
        bandwidth_method: settings.bandwidth_method,
        bandwidth_override: None,
        allow_plugin_fallback: true,
        optim: settings.optim,
    };
    let result = simulate_experiment(system, design, settings.sigma, seed)
        .and_then(|e| run_pipeline(&e, &pipeline, seed))
        .and_then(|out| {
            let at_cloud = out.density.density_at_points();
            let at_truth = out.density.density_at(system.x_cm_true);
            let covered = settings
                .alphas
                .iter()
                .map(|&a| level_for(&at_cloud, a).map(|(f_alpha, _)| at_truth >= f_alpha))
                .collect::<Result<Vec<_>>>()?;
            Ok((out.bandwidth.h, covered))
        });
    match result {
        Ok((h, covered)) => ExperimentOutcome {
            index,
            seed,
            bandwidths: Some(h),
            covered,
            error: None,
        },
        Err(e) => ExperimentOutcome {
            index,
            seed,
            bandwidths: None,
            covered: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Simulates `n_reps` experiments, builds the confidence region in each and
/// records whether it contains the true maximizer, per alpha.
///
/// Experiments run in parallel and are aggregated in index order. A failed
/// experiment is reported and left out of its group's denominator.
pub fn coverage_study(system: &TrueSystem, settings: &CoverageSettings) -> Result<CoverageReport> {
    settings.validate()?;
    let design = replicate_design(&rotatable_ccd(), settings.design_replicates);
    let experiments: Vec<ExperimentOutcome> = (0..settings.n_reps)
        .into_par_iter()
        .map(|i| run_one(system, &design, settings, i))
        .collect();

    let groups = settings.n_reps / settings.group_size;
    let coverage = settings
        .alphas
        .iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            let group_coverage: Vec<f64> = experiments
                .chunks(settings.group_size)
                .filter_map(|g| {
                    let ok: Vec<bool> = g
                        .iter()
                        .filter(|e| e.error.is_none())
                        .map(|e| e.covered[ai])
                        .collect();
                    (!ok.is_empty())
                        .then(|| ok.iter().filter(|c| **c).count() as f64 / ok.len() as f64)
                })
                .collect();
            let (mean, se) = mean_and_se(&group_coverage);
            AlphaCoverage {
                alpha,
                confidence: 1.0 - alpha,
                group_coverage,
                mean,
                se,
            }
        })
        .collect();

    let ok: Vec<[f64; 2]> = experiments.iter().filter_map(|e| e.bandwidths).collect();
    let mean_bandwidths = if ok.is_empty() {
        [f64::NAN; 2]
    } else {
        [0, 1].map(|j| ok.iter().map(|h| h[j]).sum::<f64>() / ok.len() as f64)
    };

    Ok(CoverageReport {
        system: system.name,
        n: design.len(),
        settings: settings.clone(),
        groups,
        experiments_per_group: settings.group_size,
        failed: experiments.iter().filter(|e| e.error.is_some()).count(),
        coverage,
        mean_bandwidths,
        experiments,
    })
}

/// One coverage study per design replication count (13 runs per replicate).
pub fn compare_sample_sizes(
    system: &TrueSystem,
    replicate_counts: &[usize],
    settings: &CoverageSettings,
) -> Result<Vec<CoverageReport>> {
    if replicate_counts.is_empty() {
        return Err(Error::InvalidInput(
            "at least one replicate count is required".into(),
        ));
    }
    replicate_counts
        .iter()
        .map(|&r| {
            coverage_study(
                system,
                &CoverageSettings {
                    design_replicates: r,
                    ..settings.clone()
                },
            )
        })
        .collect()
}

/// Both bandwidth selectors applied to the same simulated clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthComparison {
    pub system: SystemName,
    pub n_reps: usize,
    pub b: usize,
    pub rule_of_thumb: Vec<[f64; 2]>,
    /// `None` where the plug-in selector failed on that cloud.
    pub plug_in: Vec<Option<[f64; 2]>>,
}

impl BandwidthComparison {
    pub fn mean_rule_of_thumb(&self) -> [f64; 2] {
        let n = self.rule_of_thumb.len() as f64;
        [0, 1].map(|j| self.rule_of_thumb.iter().map(|h| h[j]).sum::<f64>() / n)
    }

    pub fn mean_plug_in(&self) -> [f64; 2] {
        let ok: Vec<[f64; 2]> = self.plug_in.iter().flatten().copied().collect();
        let n = ok.len() as f64;
        [0, 1].map(|j| ok.iter().map(|h| h[j]).sum::<f64>() / n)
    }
}

/// Simulates `n_reps` 13-run experiments and records the rule-of-thumb and
/// plug-in bandwidths of each bootstrap cloud.
pub fn bandwidth_study(
    system: &TrueSystem,
    n_reps: usize,
    b: usize,
    sigma: f64,
    seed: u64,
    optim: &NelderMeadConfig,
) -> Result<BandwidthComparison> {
    let design = rotatable_ccd();
    let per_exp: Vec<([f64; 2], Option<[f64; 2]>)> = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let s = SeedTree::new(seed).child("experiment").index(i as u64);
            let e = simulate_experiment(system, &design, sigma, s.seed())?;
            let f = fit(&e)?;
            let cloud = bootstrap_xcm(&f, &e, b, s.child("boot").seed(), optim)?;
            let jitter = s.child("jitter").seed();
            let scales = jittered_scale(&cloud, jitter)?;
            let rot = rule_of_thumb(scales, b)?;
            let plug = plugin_bandwidth(&jittered_points(&cloud, jitter), scales).ok();
            Ok((rot, plug))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandwidthComparison {
        system: system.name,
        n_reps,
        b,
        rule_of_thumb: per_exp.iter().map(|p| p.0).collect(),
        plug_in: per_exp.iter().map(|p| p.1).collect(),
    })
}
