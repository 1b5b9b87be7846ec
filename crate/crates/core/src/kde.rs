//! Boundary-corrected product biweight kernel density estimation on a
//! rectangle.
//!
//! Each data point carries, per coordinate, a linear boundary kernel
//! `K_p(u) = (alpha + gamma u) K(u)` on the part `S(p)` of `[-1, 1]` that stays
//! inside the support when the kernel is centered at `p`. The coefficients are
//! chosen so that `K_p` has zeroth moment 1 and first moment 0 over `S(p)`, so
//! every point contributes a unit mass to the support however large the
//! bandwidth is relative to the interval. Away from the edges `S(p) = [-1, 1]`
//! and `K_p` is the plain biweight.
//!
//! The corrected kernels can dip below zero near an edge; values are returned
//! unclipped.

use rayon::prelude::*;

use crate::bootstrap::BootstrapCloud;
use crate::model::Region;
use crate::{Error, Result};

/// `(15/16) (1 - u^2)^2` on `[-1, 1]`.
pub fn biweight(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        let t = 1.0 - u * u;
        0.9375 * t * t
    } else {
        0.0
    }
}

// Antiderivatives of u^r K(u), r = 0, 1, 2.
fn biweight_moment_antiderivative(u: f64) -> [f64; 3] {
    let u2 = u * u;
    let u3 = u2 * u;
    let u5 = u3 * u2;
    [
        0.9375 * (u - 2.0 * u3 / 3.0 + u5 / 5.0),
        0.9375 * u2 * (0.5 - 0.5 * u2 + u2 * u2 / 6.0),
        0.9375 * (u3 / 3.0 - 2.0 * u5 / 5.0 + u5 * u2 / 7.0),
    ]
}

/// `a_r = int_lo^hi u^r K(u) du` for `r = 0, 1, 2`, with `[lo, hi]` inside `[-1, 1]`.
pub fn truncated_biweight_moments(lo: f64, hi: f64) -> [f64; 3] {
    let a = biweight_moment_antiderivative(lo);
    let b = biweight_moment_antiderivative(hi);
    [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
}

/// Linear boundary kernel `u -> (alpha + gamma u) K(u)` on `support` (in
/// kernel units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryKernel {
    pub alpha: f64,
    pub gamma: f64,
    pub support: (f64, f64),
}

impl BoundaryKernel {
    pub const PLAIN: BoundaryKernel = BoundaryKernel {
        alpha: 1.0,
        gamma: 0.0,
        support: (-1.0, 1.0),
    };

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u < self.support.0 || u > self.support.1 {
            0.0
        } else {
            (self.alpha + self.gamma * u) * biweight(u)
        }
    }
}

/// Coefficients of the linear boundary kernel for a kernel centered at `x`
/// on `[lo, hi]` with bandwidth `h`.
pub fn boundary_kernel_weights(x: f64, lo: f64, hi: f64, h: f64) -> Result<BoundaryKernel> {
    if !(lo < hi && h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "boundary kernel needs lo < hi and h > 0, got [{lo}, {hi}], h = {h}"
        )));
    }
    if !(lo..=hi).contains(&x) {
        return Err(Error::InvalidInput(format!(
            "kernel center {x} outside [{lo}, {hi}]"
        )));
    }
    let s0 = ((lo - x) / h).max(-1.0);
    let s1 = ((hi - x) / h).min(1.0);
    if s0 == -1.0 && s1 == 1.0 {
        return Ok(BoundaryKernel::PLAIN);
    }
    let width = s1 - s0;
    if width < 1e-12 {
        return Err(Error::DegenerateSupport { width });
    }
    let [a0, a1, a2] = truncated_biweight_moments(s0, s1);
    let det = a0 * a2 - a1 * a1;
    if det < 1e-14 {
        return Err(Error::NearSingularMoments { det });
    }
    Ok(BoundaryKernel {
        alpha: a2 / det,
        gamma: -a1 / det,
        support: (s0, s1),
    })
}

/// Product-kernel density estimate on a rectangle.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    points: Vec<[f64; 2]>,
    kernels: Vec<[BoundaryKernel; 2]>,
    bandwidths: [f64; 2],
    support: Region,
    scale: f64,
}

impl DensityEstimate {
    pub fn new(points: &[[f64; 2]], bandwidths: [f64; 2], support: Region) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(
                "density estimate needs at least one point".into(),
            ));
        }
        if !bandwidths.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidths must be positive, got {bandwidths:?}"
            )));
        }
        let kernels = points
            .iter()
            .map(|p| {
                Ok([
                    boundary_kernel_weights(p[0], support.lo[0], support.hi[0], bandwidths[0])?,
                    boundary_kernel_weights(p[1], support.lo[1], support.hi[1], bandwidths[1])?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points: points.to_vec(),
            kernels,
            bandwidths,
            support,
            scale: points.len() as f64 * bandwidths[0] * bandwidths[1],
        })
    }

    pub fn from_cloud(cloud: &BootstrapCloud, bandwidths: [f64; 2]) -> Result<Self> {
        Self::new(&cloud.points, bandwidths, cloud.region)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn bandwidths(&self) -> [f64; 2] {
        self.bandwidths
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    /// Kernel contribution of data point `i` in coordinate `j` at `x`.
    #[inline]
    fn factor(&self, i: usize, j: usize, x: f64) -> f64 {
        self.kernels[i][j].eval((x - self.points[i][j]) / self.bandwidths[j])
    }

    /// Density at `x`; zero outside the support.
    pub fn density_at(&self, x: [f64; 2]) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..self.points.len() {
            let k1 = self.factor(i, 0, x[0]);
            if k1 == 0.0 {
                continue;
            }
            let k2 = self.factor(i, 1, x[1]);
            if k2 == 0.0 {
                continue;
            }
            sum += k1 * k2;
        }
        sum / self.scale
    }

    /// Density at each data point, in data order.
    pub fn density_at_points(&self) -> Vec<f64> {
        self.points
            .par_iter()
            .map(|&p| self.density_at(p))
            .collect()
    }

    /// Density on the `(resolution + 1)^2` lattice spanning the support.
    ///
    /// Each node equals `density_at` at that node bit for bit: the sum runs
    /// over data points in the same order and skips the same zero terms.
    pub fn density_on_grid(&self, resolution: usize) -> Result<Grid> {
        if resolution < 16 {
            return Err(Error::InvalidInput(format!(
                "grid resolution must be at least 16, got {resolution}"
            )));
        }
        let xs = lattice(self.support.lo[0], self.support.hi[0], resolution);
        let ys = lattice(self.support.lo[1], self.support.hi[1], resolution);
        let nodes = resolution + 1;

        // Per point: first column and kernel factors over its nonzero column window.
        let columns: Vec<(usize, Vec<f64>)> = (0..self.points.len())
            .map(|i| {
                let vals: Vec<f64> = xs.iter().map(|&x| self.factor(i, 0, x)).collect();
                let first = vals.iter().position(|v| *v != 0.0).unwrap_or(nodes);
                let last = vals
                    .iter()
                    .rposition(|v| *v != 0.0)
                    .map_or(first, |l| l + 1);
                (first, vals[first..last].to_vec())
            })
            .collect();

        let values: Vec<Vec<f64>> = ys
            .par_iter()
            .map(|&y| {
                let mut row = vec![0.0; nodes];
                for (i, (first, k1s)) in columns.iter().enumerate() {
                    if k1s.is_empty() {
                        continue;
                    }
                    let k2 = self.factor(i, 1, y);
                    if k2 == 0.0 {
                        continue;
                    }
                    for (cell, &k1) in row[*first..].iter_mut().zip(k1s) {
                        if k1 != 0.0 {
                            *cell += k1 * k2;
                        }
                    }
                }
                row.iter_mut().for_each(|v| *v /= self.scale);
                row
            })
            .collect();

        Ok(Grid { xs, ys, values })
    }
}

/// `resolution + 1` evenly spaced nodes from `lo` to `hi`, endpoints exact.
pub fn lattice(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    (0..=resolution)
        .map(|k| {
            if k == resolution {
                hi
            } else {
                lo + (hi - lo) * k as f64 / resolution as f64
            }
        })
        .collect()
}

/// Values on a rectilinear lattice; `values[row][col]` sits at `(xs[col], ys[row])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Tensor-product trapezoid rule over the lattice.
    pub fn integral(&self) -> f64 {
        let w = |c: &[f64], k: usize| {
            let left = if k > 0 { c[k] - c[k - 1] } else { 0.0 };
            let right = if k + 1 < c.len() {
                c[k + 1] - c[k]
            } else {
                0.0
            };
            0.5 * (left + right)
        };
        let mut total = 0.0;
        for (r, row) in self.values.iter().enumerate() {
            let wy = w(&self.ys, r);
            for (c, v) in row.iter().enumerate() {
                total += v * wy * w(&self.xs, c);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Five-point Gauss-Legendre rule; exact for polynomials up to degree 9.
    const GL_NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const GL_WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];

    fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(t, w)| w * f(m + r * t))
            .sum::<f64>()
            * r
    }

    fn region() -> Region {
        Region::square(1.4).unwrap()
    }

    #[test]
    fn biweight_values() {
        assert_eq!(biweight(0.0), 0.9375);
        assert_eq!(biweight(1.0), 0.0);
        assert_eq!(biweight(-1.0), 0.0);
        assert_eq!(biweight(1.5), 0.0);
        assert_abs_diff_eq!(gauss_legendre(biweight, -1.0, 1.0), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn half_support_moments_match_symbolic_values() {
        let [a0, a1, a2] = truncated_biweight_moments(0.0, 1.0);
        assert_abs_diff_eq!(a0, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a1, 5.0 / 32.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a2, 1.0 / 14.0, epsilon = 1e-15);
    }

    fn moments_by_quadrature(k: &BoundaryKernel) -> (f64, f64) {
        let (s0, s1) = k.support;
        (
            gauss_legendre(|u| k.eval(u), s0, s1),
            gauss_legendre(|u| u * k.eval(u), s0, s1),
        )
    }

    #[test]
    fn interior_kernel_is_plain_biweight() {
        let k = boundary_kernel_weights(0.0, -1.4, 1.4, 0.5).unwrap();
        assert_eq!(k, BoundaryKernel::PLAIN);
    }

    #[test]
    fn left_edge_kernel_moments() {
        let k = boundary_kernel_weights(-1.4, -1.4, 1.4, 0.5).unwrap();
        assert_eq!(k.support, (0.0, 1.0));
        let det = 0.5 / 14.0 - (5.0f64 / 32.0).powi(2);
        assert_abs_diff_eq!(k.alpha, (1.0 / 14.0) / det, epsilon = 1e-12);
        assert_abs_diff_eq!(k.gamma, -(5.0 / 32.0) / det, epsilon = 1e-12);
        let (m0, m1) = moments_by_quadrature(&k);
        assert_abs_diff_eq!(m0, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m1, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn wide_bandwidth_kernel_moments() {
        let k = boundary_kernel_weights(0.0, -1.4, 1.4, 28.0).unwrap();
        let (m0, m1) = moments_by_quadrature(&k);
        assert_abs_diff_eq!(m0, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m1, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn kernel_argument_errors() {
        assert!(boundary_kernel_weights(0.0, 1.0, -1.0, 0.5).is_err());
        assert!(boundary_kernel_weights(0.0, -1.0, 1.0, 0.0).is_err());
        assert!(boundary_kernel_weights(2.0, -1.0, 1.0, 0.5).is_err());
        assert!(matches!(
            boundary_kernel_weights(0.0, -1.0, 1.0, 1e9),
            Err(Error::DegenerateSupport { .. }) | Err(Error::NearSingularMoments { .. })
        ));
    }

    #[test]
    fn single_center_point_density() {
        let d = DensityEstimate::new(&[[0.0, 0.0]], [0.5, 0.5], region()).unwrap();
        assert_abs_diff_eq!(d.density_at([0.0, 0.0]), 3.515625, epsilon = 1e-15);
        assert_eq!(d.density_at([1.5, 0.0]), 0.0);
        assert_eq!(d.density_at([0.0, -1.41]), 0.0);
    }

    #[test]
    fn grid_is_symmetric_for_centered_point() {
        let d = DensityEstimate::new(&[[0.0, 0.0]], [0.5, 0.5], region()).unwrap();
        let g = d.density_on_grid(16).unwrap();
        let n = g.xs.len();
        for r in 0..n {
            for c in 0..n {
                let v = g.values[r][c];
                assert_abs_diff_eq!(v, g.values[r][n - 1 - c], epsilon = 1e-12);
                assert_abs_diff_eq!(v, g.values[n - 1 - r][c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn grid_nodes_equal_pointwise_density() {
        let pts = [
            [-1.4, 0.3],
            [0.2, 1.4],
            [0.9, -0.7],
            [0.1, 0.1],
            [1.39, -1.38],
        ];
        let d = DensityEstimate::new(&pts, [0.35, 0.6], region()).unwrap();
        let g = d.density_on_grid(32).unwrap();
        for (r, &y) in g.ys.iter().enumerate() {
            for (c, &x) in g.xs.iter().enumerate() {
                assert_eq!(g.values[r][c].to_bits(), d.density_at([x, y]).to_bits());
            }
        }
    }

    #[test]
    fn grid_refinement_integral() {
        let pts = [[-1.4, 0.3], [0.2, 1.4], [0.9, -0.7], [0.1, 0.1]];
        let d = DensityEstimate::new(&pts, [0.4, 0.5], region()).unwrap();
        let coarse = d.density_on_grid(64).unwrap().integral();
        let fine = d.density_on_grid(256).unwrap().integral();
        assert!((coarse - 1.0).abs() < 2e-2, "{coarse}");
        assert!((fine - 1.0).abs() < 5e-3, "{fine}");
    }

    #[test]
    fn grid_resolution_floor() {
        let d = DensityEstimate::new(&[[0.0, 0.0]], [0.5, 0.5], region()).unwrap();
        assert!(d.density_on_grid(8).is_err());
    }

    proptest! {
        #[test]
        fn random_kernel_moments(
            lo in -5.0f64..5.0,
            width in 0.1f64..10.0,
            frac in 0.0f64..=1.0,
            h_rel in 0.01f64..10.0,
        ) {
            let hi = lo + width;
            let x = lo + frac * width;
            let k = boundary_kernel_weights(x, lo, hi, h_rel * width).unwrap();
            let (m0, m1) = moments_by_quadrature(&k);
            prop_assert!((m0 - 1.0).abs() < 1e-10, "m0 = {}", m0);
            prop_assert!(m1.abs() < 1e-10, "m1 = {}", m1);
        }

        #[test]
        fn density_is_linear_in_the_cloud(
            a in proptest::collection::vec((-1.4f64..1.4, -1.4f64..1.4), 1..8),
            b in proptest::collection::vec((-1.4f64..1.4, -1.4f64..1.4), 1..8),
            q in (-1.4f64..1.4, -1.4f64..1.4),
        ) {
            let a: Vec<[f64; 2]> = a.into_iter().map(|(x, y)| [x, y]).collect();
            let b: Vec<[f64; 2]> = b.into_iter().map(|(x, y)| [x, y]).collect();
            let both: Vec<[f64; 2]> = a.iter().chain(&b).copied().collect();
            let h = [0.3, 0.45];
            let fa = DensityEstimate::new(&a, h, region()).unwrap().density_at([q.0, q.1]);
            let fb = DensityEstimate::new(&b, h, region()).unwrap().density_at([q.0, q.1]);
            let fu = DensityEstimate::new(&both, h, region()).unwrap().density_at([q.0, q.1]);
            let w = a.len() as f64 / both.len() as f64;
            prop_assert!((fu - (w * fa + (1.0 - w) * fb)).abs() < 1e-12);
        }
    }
}
