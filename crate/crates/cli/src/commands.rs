//! Command implementations. Each writes its documents into the configured
//! output directory and prints a short summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xcm_bootstrap::bandwidth::BandwidthSelection;
use xcm_bootstrap::model::{
    eigen_b, fit, linear_hypothesis_test, stationary_point, symmetry_constraints, FTest,
    QuadraticModel, SurfaceKind, N_PARAMS,
};
use xcm_bootstrap::optim::{
    constrained_max, BoundaryContact, ConstrainedMaximum, NelderMeadConfig,
};
use xcm_bootstrap::pipeline::{run_pipeline, PipelineSettings};
use xcm_bootstrap::region::{build_region_with, capture_target, ConfidenceRegion};
use xcm_bootstrap::sim::{compare_sample_sizes, CoverageReport, CoverageSettings, TrueSystem};

use crate::config::{Command, RunConfig, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::input::read_experiment;
use crate::svg::Plot;

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    config: &'a RunConfig,
    result: T,
}

/// Loads the configuration from an output document or a bare configuration.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    #[derive(Deserialize)]
    struct Embedded {
        config: RunConfig,
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str::<Embedded>(&text)
        .map(|d| d.config)
        .or_else(|_| serde_json::from_str::<RunConfig>(&text))
        .map_err(|e| {
            CliError::Usage(format!(
                "{} holds no run configuration: {e}",
                path.display()
            ))
        })
}

/// Runs `config`, on a dedicated pool when a thread count is given.
pub fn execute(config: &RunConfig) -> CliResult<()> {
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(config))
        }
        None => dispatch(config),
    }
}

fn dispatch(config: &RunConfig) -> CliResult<()> {
    match config.command {
        Command::Fit => cmd_fit(config),
        Command::Region => cmd_region(config),
        Command::Simulate | Command::CompareN => cmd_simulate(config),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }

    fn document<T: Serialize>(
        &self,
        name: &str,
        kind: &str,
        config: &RunConfig,
        result: T,
    ) -> CliResult<PathBuf> {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            kind,
            config,
            result,
        };
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| CliError::Serialize(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

#[derive(Serialize)]
struct Coefficient {
    term: &'static str,
    estimate: f64,
}

const TERMS: [&str; N_PARAMS] = ["1", "x1", "x2", "x1*x2", "x1^2", "x2^2"];

#[derive(Serialize)]
struct StationaryReport {
    point: Option<[f64; 2]>,
    note: String,
}

#[derive(Serialize)]
struct Diagnostics {
    n: usize,
    rss: f64,
    sigma2_hat: f64,
    condition: f64,
    fitted: Vec<f64>,
    residuals: Vec<f64>,
    std_residuals: Vec<f64>,
    leverage: Vec<f64>,
}

#[derive(Serialize)]
struct FitSummary {
    coefficients: Vec<Coefficient>,
    model: QuadraticModel,
    eigenvalues: [f64; 2],
    classification: SurfaceKind,
    stationary_point: StationaryReport,
    x_cm_hat: ConstrainedMaximum,
    /// F test of `beta1 = beta2 = 0, beta11 = beta22`, under which the
    /// constrained maximum is not unique; absent without residual df.
    symmetry_test: Option<FTest>,
    diagnostics: Diagnostics,
}

fn summarize_fit(
    result: &xcm_bootstrap::model::FitResult,
    x_cm_hat: ConstrainedMaximum,
) -> FitSummary {
    let (eigenvalues, classification) = eigen_b(&result.model);
    let stationary_point = match stationary_point(&result.model) {
        Ok(p) => StationaryReport {
            point: Some(p),
            note: match classification {
                SurfaceKind::ConcaveDown => "maximum of the unconstrained surface".into(),
                SurfaceKind::ConcaveUp => "minimum; not a maximum".into(),
                SurfaceKind::Saddle => "saddle point; not a maximum".into(),
            },
        },
        Err(e) => StationaryReport {
            point: None,
            note: e.to_string(),
        },
    };
    FitSummary {
        coefficients: TERMS
            .iter()
            .zip(result.model.coefficients())
            .map(|(&term, estimate)| Coefficient { term, estimate })
            .collect(),
        model: result.model,
        eigenvalues,
        classification,
        stationary_point,
        x_cm_hat,
        symmetry_test: linear_hypothesis_test(result, &symmetry_constraints()).ok(),
        diagnostics: Diagnostics {
            n: result.n(),
            rss: result.rss,
            sigma2_hat: result.sigma2_hat,
            condition: result.condition,
            fitted: result.fitted.clone(),
            residuals: result.residuals.clone(),
            std_residuals: result.std_residuals.clone(),
            leverage: result.leverage.clone(),
        },
    }
}

fn input_path(config: &RunConfig) -> CliResult<&Path> {
    config
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("an input CSV is required".into()))
}

fn describe_max(m: &ConstrainedMaximum) -> String {
    let contact: Vec<&str> = m.on_boundary.iter().map(BoundaryContact::as_str).collect();
    format!(
        "({:.4}, {:.4}) value {:.4} [{}, {}]",
        m.point[0], m.point[1], m.value, contact[0], contact[1]
    )
}

pub fn cmd_fit(config: &RunConfig) -> CliResult<()> {
    let region = config.region()?;
    let experiment = read_experiment(input_path(config)?, region)?;
    let result = fit(&experiment).map_err(CliError::from_core)?;
    let x_cm_hat = constrained_max(&result.model, &region, &NelderMeadConfig::default())
        .map_err(CliError::from_core)?;
    let summary = summarize_fit(&result, x_cm_hat);

    let out = Output::new(&config.out)?;
    let path = out.document("fit.json", "fit", config, &summary)?;

    println!("classification: {}", summary.classification.as_str());
    println!(
        "eigenvalues of B: {:.4}, {:.4}",
        summary.eigenvalues[0], summary.eigenvalues[1]
    );
    match summary.stationary_point.point {
        Some(p) => println!(
            "stationary point: ({:.4}, {:.4}) ({})",
            p[0], p[1], summary.stationary_point.note
        ),
        None => println!("stationary point: none ({})", summary.stationary_point.note),
    }
    println!("x_cm_hat: {}", describe_max(&x_cm_hat));
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct RegionSummary {
    fit: FitSummary,
    bandwidth: BandwidthSelection,
    region: ConfidenceRegion,
    cloud_size: usize,
    cloud_on_boundary: usize,
    unconverged_replicates: usize,
}

pub fn cmd_region(config: &RunConfig) -> CliResult<()> {
    capture_target(config.alpha, config.b).map_err(CliError::Mass)?;
    let seed = config.seed()?;
    let region = config.region()?;
    let experiment = read_experiment(input_path(config)?, region)?;
    let settings = PipelineSettings {
        b: config.b,
        bandwidth_method: config.bandwidth,
        bandwidth_override: config.bandwidth_override,
        allow_plugin_fallback: config.allow_plugin_fallback,
        optim: NelderMeadConfig::default(),
    };
    let out = run_pipeline(&experiment, &settings, seed).map_err(CliError::from_core)?;
    let at_cloud = out.density.density_at_points();
    let conf = build_region_with(&out.density, &at_cloud, config.alpha, config.grid)
        .map_err(CliError::from_core)?;

    let summary = RegionSummary {
        fit: summarize_fit(&out.fit, out.x_cm_hat),
        bandwidth: out.bandwidth.clone(),
        cloud_size: out.cloud.b(),
        cloud_on_boundary: out
            .cloud
            .boundary_flags
            .iter()
            .filter(|f| f.iter().any(BoundaryContact::on_boundary))
            .count(),
        unconverged_replicates: out.cloud.n_unconverged(),
        region: conf,
    };

    let dir = Output::new(&config.out)?;
    let mut written = vec![dir.document("region.json", "region", config, &summary)?];
    if config.emit_cloud {
        let mut csv = String::from("x1,x2,value,on_b1,on_b2\n");
        for ((p, v), f) in out
            .cloud
            .points
            .iter()
            .zip(&out.cloud.values)
            .zip(&out.cloud.boundary_flags)
        {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                p[0],
                p[1],
                v,
                f[0].as_str(),
                f[1].as_str()
            );
        }
        written.push(dir.write("cloud.csv", &csv)?);
    }
    if config.emit_grid {
        let grid = out
            .density
            .density_on_grid(config.grid)
            .map_err(CliError::from_core)?;
        let mut csv = String::from("x1,x2,f\n");
        for (y, row) in grid.ys.iter().zip(&grid.values) {
            for (x, f) in grid.xs.iter().zip(row) {
                let _ = writeln!(csv, "{x},{y},{f}");
            }
        }
        written.push(dir.write("grid.csv", &csv)?);
    }
    if config.emit_svg {
        let svg = Plot {
            region: &region,
            cloud: &out.cloud.points,
            polygons: &summary.region.polygons,
            estimate: Some(out.x_cm_hat.point),
            truth: None,
            title: format!(
                "{:.0}% confidence region, b = {}",
                100.0 * (1.0 - config.alpha),
                config.b
            ),
        }
        .render();
        written.push(dir.write("region.svg", &svg)?);
    }

    let bw = &summary.bandwidth;
    println!("x_cm_hat: {}", describe_max(&out.x_cm_hat));
    println!(
        "bandwidths ({}): {:.5}, {:.5}",
        bw.method.as_str(),
        bw.h[0],
        bw.h[1]
    );
    if let Some(reason) = &bw.fallback_reason {
        eprintln!("warning: plug-in selection failed, used the rule of thumb: {reason}");
    }
    println!(
        "f_alpha: {:.6e}  captured: {} of {}  loops: {}",
        summary.region.f_alpha,
        summary.region.captured_count,
        summary.region.b,
        summary.region.polygons.len()
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct CoverageSummary<'a> {
    system: &'a TrueSystem,
    reports: &'a [CoverageReport],
}

pub fn cmd_simulate(config: &RunConfig) -> CliResult<()> {
    if config.alphas.is_empty() {
        return Err(CliError::Usage("at least one alpha is required".into()));
    }
    for &a in &config.alphas {
        capture_target(a, config.b).map_err(CliError::Alphas)?;
    }
    if config.replicates.is_empty() {
        return Err(CliError::Usage(
            "at least one replicate count is required".into(),
        ));
    }
    let name = config
        .system
        .ok_or_else(|| CliError::Usage("a system name is required".into()))?;
    let system = TrueSystem::reference(name).map_err(CliError::Core)?;
    if config.region()? != system.region {
        return Err(CliError::Usage(
            "reference systems are defined on [-1.4, 1.4]^2; --bounds cannot change that".into(),
        ));
    }
    let settings = CoverageSettings {
        n_reps: config.n_reps,
        group_size: config.group_size,
        design_replicates: config.replicates[0],
        b: config.b,
        alphas: config.alphas.clone(),
        bandwidth_method: config.bandwidth,
        sigma: config.sigma,
        seed: config.seed()?,
        optim: NelderMeadConfig::default(),
    };
    settings
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let reports = compare_sample_sizes(&system, &config.replicates, &settings)
        .map_err(CliError::from_core)?;

    let dir = Output::new(&config.out)?;
    let kind = match config.command {
        Command::CompareN => "compare-n",
        _ => "simulate",
    };
    let mut written = vec![dir.document(
        "coverage.json",
        kind,
        config,
        CoverageSummary {
            system: &system,
            reports: &reports,
        },
    )?];
    let mut series = String::from("n,b,bandwidth,alpha,confidence,mean,se,failed\n");
    for r in &reports {
        let mut csv = String::from("alpha,group,coverage\n");
        for c in &r.coverage {
            for (g, v) in c.group_coverage.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{}", c.alpha, g + 1, v);
            }
            let _ = writeln!(
                series,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.settings.b,
                r.settings.bandwidth_method.as_str(),
                c.alpha,
                c.confidence,
                c.mean,
                c.se,
                r.failed
            );
        }
        written.push(dir.write(&format!("coverage_n{}.csv", r.n), &csv)?);
    }
    written.push(dir.write("coverage_series.csv", &series)?);

    println!("system: {}", name.as_str());
    for r in &reports {
        println!(
            "n = {} ({} groups of {}, {} failed)",
            r.n, r.groups, r.experiments_per_group, r.failed
        );
        for c in &r.coverage {
            println!(
                "  {:5.1}%: coverage {:.3} (se {:.3})",
                100.0 * c.confidence,
                c.mean,
                c.se
            );
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
