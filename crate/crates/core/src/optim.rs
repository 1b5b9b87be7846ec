//! Box-constrained maximization of a surface over the experimental region.
//!
//! [`nelder_mead_max`] is a multi-start Nelder–Mead simplex that clamps every
//! trial vertex into the box. [`quadratic_box_max_exact`] enumerates the
//! candidate maximizers of a quadratic over a box in closed form and is the
//! reference the simplex is checked against.

use serde::{Deserialize, Serialize};

use crate::model::{stationary_point, QuadraticModel, Region};
use crate::{Error, Result};

/// Position of one coordinate relative to the region bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryContact {
    Interior,
    AtLo,
    AtHi,
}

impl BoundaryContact {
    pub fn on_boundary(&self) -> bool {
        !matches!(self, BoundaryContact::Interior)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryContact::Interior => "interior",
            BoundaryContact::AtLo => "at-lo",
            BoundaryContact::AtHi => "at-hi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedMaximum {
    pub point: [f64; 2],
    pub value: f64,
    pub on_boundary: [BoundaryContact; 2],
    /// False when every start exhausted its iteration budget.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Iteration budget per start (restarts share it).
    pub max_iterations: usize,
    pub diameter_tol: f64,
    pub value_tol: f64,
    /// Fresh simplices built around the incumbent after a run converges.
    pub restarts: usize,
    /// Initial simplex edge, as a fraction of each region width.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iterations: 500,
            diameter_tol: 1e-10,
            value_tol: 1e-12,
            restarts: 2,
            initial_step: 0.1,
        }
    }
}

impl NelderMeadConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.max_iterations > 0
            && self.diameter_tol >= 0.0
            && self.value_tol >= 0.0
            && self.initial_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid Nelder-Mead settings: {self:?}"
            )))
        }
    }
}

/// Snap tolerance for boundary contact in coordinate `j`.
pub fn snap_tolerance(region: &Region, j: usize) -> f64 {
    1e-6 * region.width(j)
}

/// Moves coordinates within snap tolerance onto the bound and reports contact.
pub fn snap_to_boundary(region: &Region, x: [f64; 2]) -> ([f64; 2], [BoundaryContact; 2]) {
    let mut p = region.clamp(x);
    let mut flags = [BoundaryContact::Interior; 2];
    for j in 0..2 {
        let tol = snap_tolerance(region, j);
        if p[j] - region.lo[j] <= tol {
            p[j] = region.lo[j];
            flags[j] = BoundaryContact::AtLo;
        } else if region.hi[j] - p[j] <= tol {
            p[j] = region.hi[j];
            flags[j] = BoundaryContact::AtHi;
        }
    }
    (p, flags)
}

#[derive(Clone, Copy)]
struct Vertex {
    x: [f64; 2],
    f: f64,
}

struct RunOutcome {
    best: Vertex,
    converged: bool,
    iterations: usize,
}

fn better(a: &Vertex, b: &Vertex) -> bool {
    a.f > b.f || (a.f == b.f && a.x < b.x)
}

fn sort_desc(s: &mut [Vertex; 3]) {
    s.sort_by(|a, b| {
        b.f.total_cmp(&a.f)
            .then_with(|| a.x.partial_cmp(&b.x).unwrap())
    });
}

fn affine(c: [f64; 2], d: [f64; 2], t: f64) -> [f64; 2] {
    // c + t * (d - c)
    [c[0] + t * (d[0] - c[0]), c[1] + t * (d[1] - c[1])]
}

fn initial_simplex<F: Fn([f64; 2]) -> f64>(
    objective: &F,
    region: &Region,
    start: [f64; 2],
    step_frac: f64,
) -> [Vertex; 3] {
    let x0 = region.clamp(start);
    let mut s = [Vertex {
        x: x0,
        f: objective(x0),
    }; 3];
    for j in 0..2 {
        let step = step_frac * region.width(j);
        let mut x = x0;
        x[j] = if x0[j] + step <= region.hi[j] {
            x0[j] + step
        } else {
            x0[j] - step
        };
        let x = region.clamp(x);
        s[j + 1] = Vertex { x, f: objective(x) };
    }
    s
}

fn run_simplex<F: Fn([f64; 2]) -> f64>(
    objective: &F,
    region: &Region,
    cfg: &NelderMeadConfig,
    mut s: [Vertex; 3],
    budget: usize,
) -> RunOutcome {
    let eval = |x: [f64; 2]| {
        let x = region.clamp(x);
        Vertex { x, f: objective(x) }
    };
    let mut iterations = 0;
    loop {
        sort_desc(&mut s);
        let diameter = s[1..]
            .iter()
            .map(|v| (v.x[0] - s[0].x[0]).abs().max((v.x[1] - s[0].x[1]).abs()))
            .fold(0.0, f64::max);
        let spread = s[0].f - s[2].f;
        if diameter <= cfg.diameter_tol && spread <= cfg.value_tol {
            return RunOutcome {
                best: s[0],
                converged: true,
                iterations,
            };
        }
        if iterations >= budget {
            return RunOutcome {
                best: s[0],
                converged: false,
                iterations,
            };
        }
        iterations += 1;

        let centroid = [0.5 * (s[0].x[0] + s[1].x[0]), 0.5 * (s[0].x[1] + s[1].x[1])];
        let worst = s[2];
        let reflected = eval(affine(centroid, worst.x, -cfg.reflection));
        if reflected.f > s[0].f {
            let expanded = eval(affine(centroid, reflected.x, cfg.expansion));
            s[2] = if expanded.f > reflected.f {
                expanded
            } else {
                reflected
            };
            continue;
        }
        if reflected.f > s[1].f {
            s[2] = reflected;
            continue;
        }
        let contracted = if reflected.f > worst.f {
            let c = eval(affine(centroid, reflected.x, cfg.contraction));
            (c.f >= reflected.f).then_some(c)
        } else {
            let c = eval(affine(centroid, worst.x, cfg.contraction));
            (c.f > worst.f).then_some(c)
        };
        match contracted {
            Some(c) => s[2] = c,
            None => {
                let best = s[0].x;
                for v in s[1..].iter_mut() {
                    *v = eval(affine(best, v.x, cfg.shrink));
                }
            }
        }
    }
}

/// Coordinate search with step halving, clamped to the box. Moves a point
/// that the simplex left stuck in a corner along the edges meeting there.
fn compass_polish<F: Fn([f64; 2]) -> f64>(
    objective: &F,
    region: &Region,
    mut v: Vertex,
    step_frac: f64,
    tol: f64,
) -> Vertex {
    let mut step = [step_frac * region.width(0), step_frac * region.width(1)];
    let tol = tol.max(1e-12 * region.width(0).max(region.width(1)));
    while step[0].max(step[1]) > tol {
        let mut moved = false;
        for j in 0..2 {
            for sign in [1.0, -1.0] {
                let mut x = v.x;
                x[j] += sign * step[j];
                let x = region.clamp(x);
                let f = objective(x);
                if f > v.f {
                    v = Vertex { x, f };
                    moved = true;
                }
            }
        }
        if !moved {
            step = [step[0] / 2.0, step[1] / 2.0];
        }
    }
    v
}

/// Multi-start Nelder–Mead maximization over a box, clamping every trial
/// vertex into the region.
///
/// Each start runs to convergence and is then restarted up to
/// `config.restarts` times from a fresh simplex around its best point, which
/// recovers from simplices that collapsed onto a face of the box, and finished
/// with a clamped coordinate search. The best
/// terminal point over all starts is snapped onto any bound within
/// [`snap_tolerance`].
pub fn nelder_mead_max<F>(
    objective: F,
    region: &Region,
    config: &NelderMeadConfig,
    starts: &[[f64; 2]],
) -> Result<ConstrainedMaximum>
where
    F: Fn([f64; 2]) -> f64,
{
    config.validate()?;
    if !starts.iter().any(|&s| region.contains(s)) {
        return Err(Error::InvalidInput(
            "no start point lies inside the region".into(),
        ));
    }

    let mut best: Option<Vertex> = None;
    let mut any_converged = false;
    for &start in starts.iter().filter(|&&s| region.contains(s)) {
        let mut budget = config.max_iterations;
        let mut out = run_simplex(
            &objective,
            region,
            config,
            initial_simplex(&objective, region, start, config.initial_step),
            budget,
        );
        budget -= out.iterations;
        let mut converged = out.converged;
        for _ in 0..config.restarts {
            if !converged || budget == 0 {
                break;
            }
            let prev = out.best;
            out = run_simplex(
                &objective,
                region,
                config,
                initial_simplex(&objective, region, prev.x, config.initial_step),
                budget,
            );
            budget -= out.iterations;
            converged = out.converged;
            if !better(&out.best, &prev) {
                out.best = prev;
                break;
            }
            if out.best.f - prev.f <= config.value_tol {
                break;
            }
        }
        out.best = compass_polish(
            &objective,
            region,
            out.best,
            config.initial_step,
            config.diameter_tol,
        );
        any_converged |= converged;
        if best.as_ref().is_none_or(|b| better(&out.best, b)) {
            best = Some(out.best);
        }
    }

    let best = best.expect("at least one start inside the region");
    let (point, on_boundary) = snap_to_boundary(region, best.x);
    Ok(ConstrainedMaximum {
        point,
        value: objective(point),
        on_boundary,
        converged: any_converged,
    })
}

/// Default start points: the region center, the four corners pulled 10%
/// inward, and the clamped stationary point when it exists.
pub fn default_starts(model: &QuadraticModel, region: &Region) -> Vec<[f64; 2]> {
    let c = region.center();
    let mut starts = vec![c];
    for corner in region.corners() {
        starts.push(affine(corner, c, 0.1));
    }
    if let Ok(sp) = stationary_point(model) {
        if sp[0].is_finite() && sp[1].is_finite() {
            starts.push(region.clamp(sp));
        }
    }
    starts
}

/// Maximizer of a fitted quadratic over the region.
///
/// The simplex runs on the surface without its intercept, so shifting
/// `beta0` leaves the returned point unchanged bit for bit.
pub fn constrained_max(
    model: &QuadraticModel,
    region: &Region,
    config: &NelderMeadConfig,
) -> Result<ConstrainedMaximum> {
    let starts = default_starts(model, region);
    let mut cm = nelder_mead_max(|x| model.shape_value(x), region, config, &starts)?;
    cm.value = model.value(cm.point);
    Ok(cm)
}

/// Every global maximizer of a quadratic over the box, found by enumerating
/// the interior stationary point, the maximizer of each edge restriction and
/// the corners. Maximizers within 1e-9 of the best value are all returned,
/// sorted lexicographically, so a list longer than one exposes a non-unique
/// maximum.
pub fn quadratic_box_max_exact(model: &QuadraticModel, region: &Region) -> Vec<ConstrainedMaximum> {
    let mut candidates: Vec<[f64; 2]> = region.corners().to_vec();

    if let Ok(sp) = stationary_point(model) {
        if region.contains(sp) {
            candidates.push(sp);
        }
    }

    // Edges x_fixed = c: g is a univariate quadratic a t^2 + b t in the free coordinate.
    for fixed in 0..2 {
        let free = 1 - fixed;
        for c in [region.lo[fixed], region.hi[fixed]] {
            let (a, b) = if fixed == 0 {
                (model.b22, model.beta[1] + model.b12 * c)
            } else {
                (model.b11, model.beta[0] + model.b12 * c)
            };
            if a < 0.0 {
                let t = -b / (2.0 * a);
                if t > region.lo[free] && t < region.hi[free] {
                    let mut p = [0.0; 2];
                    p[fixed] = c;
                    p[free] = t;
                    candidates.push(p);
                }
            }
        }
    }

    let values: Vec<f64> = candidates.iter().map(|&p| model.value(p)).collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut winners: Vec<[f64; 2]> = candidates
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= top - 1e-9)
        .map(|(&p, _)| p)
        .collect();
    winners.sort_by(|a, b| a.partial_cmp(b).unwrap());
    winners.dedup();
    winners
        .into_iter()
        .map(|p| {
            let (point, on_boundary) = snap_to_boundary(region, p);
            ConstrainedMaximum {
                point,
                value: model.value(point),
                on_boundary,
                converged: true,
            }
        })
        .collect()
}
