//! Bandwidth selection for the bootstrap cloud.
//!
//! Both selectors need a per-coordinate scale. Bootstrap maximizers often sit
//! exactly on a face of the region (a saddle surface puts nearly all of them
//! there), which would give a zero standard deviation, so scales are computed
//! after moving every boundary coordinate inward by an independent
//! `U(0, 0.05)` draw.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bootstrap::BootstrapCloud;
use crate::optim::BoundaryContact;
use crate::rng::SeedTree;
use crate::{Error, Result};

/// Width of the inward jitter applied to boundary coordinates.
pub const JITTER_WIDTH: f64 = 0.05;

/// Converts a Normal-reference (Gaussian-kernel) bandwidth to the biweight
/// kernel used by the density estimate.
pub const BIWEIGHT_CONVERSION: f64 = 2.036;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthMethod {
    RuleOfThumb,
    PlugIn,
}

impl BandwidthMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandwidthMethod::RuleOfThumb => "rule-of-thumb",
            BandwidthMethod::PlugIn => "plug-in",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub h: [f64; 2],
    /// The selector that produced `h`; differs from the request after a fallback.
    pub method: BandwidthMethod,
    pub scale_estimates: [f64; 2],
    pub jitter_seed: u64,
    /// Set when the plug-in selector failed and the rule of thumb was used.
    pub fallback_reason: Option<String>,
}

/// Cloud points with boundary coordinates moved inward by `U(0, 0.05)`.
/// Interior coordinates are copied unchanged.
pub fn jittered_points(cloud: &BootstrapCloud, seed: u64) -> Vec<[f64; 2]> {
    let tree = SeedTree::new(seed).child("jitter");
    let mut rngs = [tree.index(0).rng(), tree.index(1).rng()];
    cloud
        .points
        .iter()
        .zip(&cloud.boundary_flags)
        .map(|(p, flags)| {
            let mut z = *p;
            for j in 0..2 {
                match flags[j] {
                    BoundaryContact::AtLo => {
                        z[j] = cloud.region.lo[j] + JITTER_WIDTH * rngs[j].random::<f64>()
                    }
                    BoundaryContact::AtHi => {
                        z[j] = cloud.region.hi[j] - JITTER_WIDTH * rngs[j].random::<f64>()
                    }
                    BoundaryContact::Interior => {}
                }
            }
            z
        })
        .collect()
}

/// Sample standard deviation (divisor `n - 1`) of each coordinate.
pub fn sample_sd(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let mut out = [0.0; 2];
    for (j, o) in out.iter_mut().enumerate() {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
        let ss: f64 = points.iter().map(|p| (p[j] - mean).powi(2)).sum();
        *o = (ss / (n - 1.0)).sqrt();
    }
    out
}

/// Per-coordinate standard deviations of the jittered cloud.
pub fn jittered_scale(cloud: &BootstrapCloud, seed: u64) -> Result<[f64; 2]> {
    if cloud.b() < 2 {
        return Err(Error::InvalidInput(format!(
            "scale estimation needs at least 2 points, got {}",
            cloud.b()
        )));
    }
    let s = sample_sd(&jittered_points(cloud, seed));
    for (j, sj) in s.iter().enumerate() {
        if !(*sj > 0.0) {
            return Err(Error::ZeroScale { coordinate: j + 1 });
        }
    }
    Ok(s)
}

/// Normal-reference rule `h_j = 2.036 * s_j * b^(-1/6)`.
pub fn rule_of_thumb(scales: [f64; 2], b: usize) -> Result<[f64; 2]> {
    if b < 2 || !scales.iter().all(|s| *s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rule of thumb needs positive scales and b >= 2, got {scales:?}, b = {b}"
        )));
    }
    let factor = BIWEIGHT_CONVERSION * (b as f64).powf(-1.0 / 6.0);
    Ok([factor * scales[0], factor * scales[1]])
}

// Even-order Hermite polynomials He_k; phi^(k)(z) = He_k(z) phi(z) for even k.
fn hermite_even(k: u32, z: f64) -> f64 {
    let z2 = z * z;
    match k {
        0 => 1.0,
        2 => z2 - 1.0,
        4 => (z2 - 6.0) * z2 + 3.0,
        6 => ((z2 - 15.0) * z2 + 45.0) * z2 - 15.0,
        _ => unreachable!("only even orders up to 6 are needed"),
    }
}

fn double_factorial_odd(k: u32) -> f64 {
    // (k - 1)!! for even k
    (1..k).step_by(2).map(f64::from).product()
}

/// `d^k/dz^k` of the `N(0, sigma^2)` density at zero, for even `k`.
fn normal_derivative_at_zero(k: u32, sigma: f64) -> f64 {
    let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * double_factorial_odd(k) / (sigma.powi(k as i32 + 1) * (2.0 * PI).sqrt())
}

/// `psi_r` for a standard bivariate Normal with identity covariance.
fn normal_psi(r: [u32; 2]) -> f64 {
    normal_derivative_at_zero(r[0], 2f64.sqrt()) * normal_derivative_at_zero(r[1], 2f64.sqrt())
}

/// Product Gaussian kernel derivative `L^(r)(0)`.
fn gaussian_derivative_at_zero(r: [u32; 2]) -> f64 {
    normal_derivative_at_zero(r[0], 1.0) * normal_derivative_at_zero(r[1], 1.0)
}

/// Kernel estimate of `psi_r` with a product Gaussian pilot of bandwidth `g`:
/// `n^-2 sum_i sum_j L_g^(r)(z_i - z_j)`.
fn psi_hat(z: &[[f64; 2]], r: [u32; 2], g: f64) -> f64 {
    let n = z.len();
    let norm = 1.0 / (2.0 * PI);
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            // Off-diagonal pairs counted twice, diagonal once.
            let mut s = 0.0;
            for j in (i + 1)..n {
                let u = (z[i][0] - z[j][0]) / g;
                let v = (z[i][1] - z[j][1]) / g;
                let e = (-0.5 * (u * u + v * v)).exp();
                if e > 0.0 {
                    s += hermite_even(r[0], u) * hermite_even(r[1], v) * e;
                }
            }
            2.0 * s + hermite_even(r[0], 0.0) * hermite_even(r[1], 0.0)
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    total * norm / (n as f64 * n as f64 * g.powi(2 + (r[0] + r[1]) as i32))
}

/// AMSE-optimal scalar pilot bandwidth for estimating `psi_r`, given the
/// sum of the next-order functionals `psi_{r+2e_1} + psi_{r+2e_2}`.
fn pilot_bandwidth(r: [u32; 2], next_order_sum: f64, n: usize) -> Result<f64> {
    let order = (r[0] + r[1]) as i32;
    let ratio = 2.0 * gaussian_derivative_at_zero(r) / (-next_order_sum * n as f64);
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::PluginFailure(format!(
            "pilot bandwidth for psi{r:?} undefined (ratio {ratio:e})"
        )));
    }
    Ok(ratio.powf(1.0 / f64::from(order + 4)))
}

type Psi = std::collections::BTreeMap<[u32; 2], f64>;

fn orders(total: u32) -> Vec<[u32; 2]> {
    (0..=total).step_by(2).map(|a| [a, total - a]).collect()
}

fn next_sum(psi: &Psi, r: [u32; 2]) -> f64 {
    psi[&[r[0] + 2, r[1]]] + psi[&[r[0], r[1] + 2]]
}

/// Two-stage diagonal plug-in bandwidths.
///
/// The data are scaled to unit spread by `scales`. Eighth-order functionals
/// come from a Normal reference; they set the pilots for kernel estimates of
/// the sixth-order functionals, which in turn set the pilots for the
/// fourth-order ones. The fourth-order estimates are substituted into the
/// asymptotic MISE of a diagonal Gaussian product kernel, whose minimizer is
/// `(h2/h1)^4 = psi40/psi04`,
/// `h1^6 = R(K) / (n (h2/h1) (psi40 + (h2/h1)^2 psi22))` with `R(K) = 1/(4 pi)`.
/// The result is mapped back to data units and to the biweight kernel.
pub fn plugin_bandwidth(points: &[[f64; 2]], scales: [f64; 2]) -> Result<[f64; 2]> {
    let n = points.len();
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "plug-in selection needs at least 10 points, got {n}"
        )));
    }
    if !scales.iter().all(|s| *s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "scales must be positive, got {scales:?}"
        )));
    }
    let z: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p[0] / scales[0], p[1] / scales[1]])
        .collect();

    let mut psi: Psi = orders(8).into_iter().map(|r| (r, normal_psi(r))).collect();
    for order in [6, 4] {
        for r in orders(order) {
            let g = pilot_bandwidth(r, next_sum(&psi, r), n)?;
            psi.insert(r, psi_hat(&z, r, g));
        }
    }

    let (p40, p22, p04) = (psi[&[4, 0]], psi[&[2, 2]], psi[&[0, 4]]);
    if !(p40 > 0.0 && p04 > 0.0) {
        return Err(Error::PluginFailure(format!(
            "non-positive curvature functionals psi40 = {p40:e}, psi04 = {p04:e}"
        )));
    }
    let ratio = (p40 / p04).powf(0.25);
    let curvature = p40 + ratio * ratio * p22;
    let roughness = 1.0 / (4.0 * PI);
    let h1_6 = roughness / (n as f64 * ratio * curvature);
    if !(curvature > 0.0 && h1_6.is_finite()) {
        return Err(Error::PluginFailure(format!(
            "AMISE has no positive minimizer (psi40 = {p40:e}, psi22 = {p22:e}, psi04 = {p04:e})"
        )));
    }
    let h1 = h1_6.powf(1.0 / 6.0);
    let h = [
        BIWEIGHT_CONVERSION * scales[0] * h1,
        BIWEIGHT_CONVERSION * scales[1] * h1 * ratio,
    ];
    if !h.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::PluginFailure(format!(
            "non-positive bandwidths {h:?}"
        )));
    }
    Ok(h)
}

/// Jittered scales followed by the requested selector.
///
/// With `allow_fallback`, a plug-in failure falls back to the rule of thumb
/// and records the reason; otherwise the failure is returned.
pub fn select_bandwidth(
    cloud: &BootstrapCloud,
    method: BandwidthMethod,
    jitter_seed: u64,
    allow_fallback: bool,
) -> Result<BandwidthSelection> {
    let scales = jittered_scale(cloud, jitter_seed)?;
    let rot = || rule_of_thumb(scales, cloud.b());
    let (h, method, fallback_reason) = match method {
        BandwidthMethod::RuleOfThumb => (rot()?, BandwidthMethod::RuleOfThumb, None),
        BandwidthMethod::PlugIn => {
            let plug = if cloud.b() < 10 {
                Err(Error::PluginFailure(format!(
                    "only {} bootstrap points",
                    cloud.b()
                )))
            } else {
                plugin_bandwidth(&jittered_points(cloud, jitter_seed), scales)
            };
            match plug {
                Ok(h) => (h, BandwidthMethod::PlugIn, None),
                Err(e) if allow_fallback => {
                    (rot()?, BandwidthMethod::RuleOfThumb, Some(e.to_string()))
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok(BandwidthSelection {
        h,
        method,
        scale_estimates: scales,
        jitter_seed,
        fallback_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Region;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn cloud(points: Vec<[f64; 2]>) -> BootstrapCloud {
        let region = Region::square(1.4).unwrap();
        let boundary_flags = points
            .iter()
            .map(|p| crate::optim::snap_to_boundary(&region, *p).1)
            .collect();
        BootstrapCloud {
            values: vec![0.0; points.len()],
            converged: vec![true; points.len()],
            boundary_flags,
            points,
            region,
            seed: 0,
        }
    }

    #[test]
    fn rule_of_thumb_arithmetic() {
        let h = rule_of_thumb([1.0, 1.0], 2000).unwrap();
        assert_abs_diff_eq!(h[0], 0.5736, epsilon = 1e-4);
        assert_eq!(h[0], h[1]);
        let h2 = rule_of_thumb([2.0, 2.0], 2000).unwrap();
        assert_abs_diff_eq!(h2[0], 2.0 * h[0], epsilon = 1e-15);
        let hb = rule_of_thumb([1.0, 1.0], 2001).unwrap();
        assert!(hb[0] < h[0]);
    }

    #[test]
    fn jitter_is_inert_for_interior_clouds() {
        let c = cloud(vec![[0.1, 0.2], [0.3, -0.5], [-0.2, 0.9]]);
        assert_eq!(jittered_points(&c, 5), c.points);
        assert_eq!(jittered_scale(&c, 5).unwrap(), sample_sd(&c.points));
    }

    #[test]
    fn jitter_gives_boundary_clouds_a_positive_scale() {
        let pts: Vec<[f64; 2]> = (0..200).map(|i| [-1.4, -1.0 + 0.01 * i as f64]).collect();
        let c = cloud(pts);
        assert!(sample_sd(&c.points)[0] < 1e-12);
        let s = jittered_scale(&c, 11).unwrap();
        // U(0, 0.05) has sd 0.05 / sqrt(12).
        assert!(
            s[0] > 0.0 && s[0] < 2.0 * JITTER_WIDTH / 12f64.sqrt(),
            "{s:?}"
        );
        let z = jittered_points(&c, 11);
        assert!(z.iter().all(|p| p[0] > -1.4 && p[0] < -1.4 + JITTER_WIDTH));
        for (a, b) in z.iter().zip(&c.points) {
            assert_eq!(a[1], b[1]);
        }
        assert_eq!(jittered_scale(&c, 11).unwrap(), s);
        assert_ne!(jittered_scale(&c, 12).unwrap(), s);
    }

    #[test]
    fn identical_interior_points_have_zero_scale() {
        let c = cloud(vec![[0.2, 0.2]; 5]);
        assert_eq!(
            jittered_scale(&c, 1),
            Err(Error::ZeroScale { coordinate: 1 })
        );
    }

    #[test]
    fn normal_reference_functionals() {
        // psi_40 = 3 / (16 pi), psi_22 = 1 / (16 pi) for N(0, I).
        assert_abs_diff_eq!(normal_psi([4, 0]), 3.0 / (16.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(normal_psi([2, 2]), 1.0 / (16.0 * PI), epsilon = 1e-15);
        assert!(normal_psi([6, 0]) < 0.0 && normal_psi([8, 0]) > 0.0);
    }

    #[test]
    fn plugin_close_to_normal_amise_optimum() {
        let mut rng = SeedTree::new(3).rng();
        let (s1, s2) = (0.2, 0.5);
        let n1 = Normal::new(0.0, s1).unwrap();
        let n2 = Normal::new(0.0, s2).unwrap();
        let n = 3000;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [n1.sample(&mut rng), n2.sample(&mut rng)])
            .collect();
        let scales = sample_sd(&pts);
        let h = plugin_bandwidth(&pts, scales).unwrap();
        // Gaussian-kernel AMISE optimum for independent Normal coordinates is
        // sigma_j n^(-1/6); same biweight conversion applied.
        let oracle = [s1, s2].map(|s| BIWEIGHT_CONVERSION * s * (n as f64).powf(-1.0 / 6.0));
        for j in 0..2 {
            assert!(
                (h[j] / oracle[j] - 1.0).abs() < 0.25,
                "h = {h:?}, oracle = {oracle:?}"
            );
        }
    }

    #[test]
    fn selectors_are_equivariant_under_coordinate_swap() {
        let mut rng = SeedTree::new(4).rng();
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|_| {
                [
                    0.3 * rng.random::<f64>() - 0.1,
                    0.8 * rng.random::<f64>() - 0.4,
                ]
            })
            .collect();
        let swapped: Vec<[f64; 2]> = pts.iter().map(|p| [p[1], p[0]]).collect();
        let h = plugin_bandwidth(&pts, sample_sd(&pts)).unwrap();
        let hs = plugin_bandwidth(&swapped, sample_sd(&swapped)).unwrap();
        assert_abs_diff_eq!(h[0], hs[1], epsilon = 1e-9 * h[0]);
        assert_abs_diff_eq!(h[1], hs[0], epsilon = 1e-9 * h[1]);
        let r = rule_of_thumb(sample_sd(&pts), 300).unwrap();
        let rs = rule_of_thumb(sample_sd(&swapped), 300).unwrap();
        assert_eq!([r[1], r[0]], rs);
    }

    #[test]
    fn plugin_fallback_is_positive() {
        // Too few points for the plug-in selector: falls back.
        let c = cloud(vec![[0.1, 0.2], [0.3, -0.5], [-0.2, 0.9], [0.5, 0.5]]);
        let sel = select_bandwidth(&c, BandwidthMethod::PlugIn, 1, true).unwrap();
        assert_eq!(sel.method, BandwidthMethod::RuleOfThumb);
        assert!(sel.fallback_reason.is_some());
        assert!(sel.h.iter().all(|h| h.is_finite() && *h > 0.0));
        assert!(matches!(
            select_bandwidth(&c, BandwidthMethod::PlugIn, 1, false),
            Err(Error::PluginFailure(_))
        ));
    }
}
