//! Second-order response surface in two factors: designs, least-squares fit,
//! standardized residuals, stationary point and linear hypothesis tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::{Error, Result};

/// Number of parameters in the two-factor second-order model.
pub const N_PARAMS: usize = 6;

/// Relative singular-value threshold below which a design is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Rectangular experimental region `[lo1, hi1] x [lo2, hi2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Region {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        for j in 0..2 {
            if !(lo[j].is_finite() && hi[j].is_finite() && lo[j] < hi[j]) {
                return Err(Error::InvalidInput(format!(
                    "region bounds for coordinate {} must satisfy lo < hi, got [{}, {}]",
                    j + 1,
                    lo[j],
                    hi[j]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The square `[-a, a]^2`.
    pub fn square(a: f64) -> Result<Self> {
        Self::new([-a, -a], [a, a])
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.lo[0] + self.hi[0]),
            0.5 * (self.lo[1] + self.hi[1]),
        ]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..2).all(|j| x[j] >= self.lo[j] && x[j] <= self.hi[j])
    }

    pub fn clamp(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0].clamp(self.lo[0], self.hi[0]),
            x[1].clamp(self.lo[1], self.hi[1]),
        ]
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.lo[0], self.lo[1]],
            [self.hi[0], self.lo[1]],
            [self.lo[0], self.hi[1]],
            [self.hi[0], self.hi[1]],
        ]
    }
}

/// Design points paired with observed responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub points: Vec<[f64; 2]>,
    pub responses: Vec<f64>,
    pub region: Region,
}

impl Experiment {
    pub fn new(points: Vec<[f64; 2]>, responses: Vec<f64>, region: Region) -> Result<Self> {
        if points.len() != responses.len() {
            return Err(Error::InvalidInput(format!(
                "{} design points but {} responses",
                points.len(),
                responses.len()
            )));
        }
        if points.len() < N_PARAMS {
            return Err(Error::InsufficientRuns { n: points.len() });
        }
        if let Some(i) = points
            .iter()
            .zip(&responses)
            .position(|(p, y)| !(p[0].is_finite() && p[1].is_finite() && y.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "run {} has a non-finite value",
                i + 1
            )));
        }
        Ok(Self {
            points,
            responses,
            region,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }
}

/// `g(x) = beta0 + x'beta + x'Bx` with `B = [[b11, b12/2], [b12/2, b22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    pub beta0: f64,
    pub beta: [f64; 2],
    pub b12: f64,
    pub b11: f64,
    pub b22: f64,
}

/// Sign pattern of the eigenvalues of `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    ConcaveDown,
    ConcaveUp,
    /// Mixed signs, or a zero eigenvalue.
    Saddle,
}

impl SurfaceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SurfaceKind::ConcaveDown => "concave-down",
            SurfaceKind::ConcaveUp => "concave-up",
            SurfaceKind::Saddle => "saddle",
        }
    }
}

impl QuadraticModel {
    /// Coefficients in design-column order `(1, x1, x2, x1*x2, x1^2, x2^2)`.
    pub fn from_coefficients(c: [f64; N_PARAMS]) -> Self {
        Self {
            beta0: c[0],
            beta: [c[1], c[2]],
            b12: c[3],
            b11: c[4],
            b22: c[5],
        }
    }

    pub fn coefficients(&self) -> [f64; N_PARAMS] {
        [
            self.beta0,
            self.beta[0],
            self.beta[1],
            self.b12,
            self.b11,
            self.b22,
        ]
    }

    pub fn b_matrix(&self) -> [[f64; 2]; 2] {
        [[self.b11, 0.5 * self.b12], [0.5 * self.b12, self.b22]]
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.beta0 + self.shape_value(x)
    }

    /// The surface without its intercept. Maximizers do not depend on `beta0`,
    /// and dropping it keeps the optimizer's comparisons independent of it.
    pub fn shape_value(&self, x: [f64; 2]) -> f64 {
        let [x1, x2] = x;
        self.beta[0] * x1
            + self.beta[1] * x2
            + self.b12 * x1 * x2
            + self.b11 * x1 * x1
            + self.b22 * x2 * x2
    }

    /// `beta + 2 B x`.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let [x1, x2] = x;
        [
            self.beta[0] + 2.0 * self.b11 * x1 + self.b12 * x2,
            self.beta[1] + self.b12 * x1 + 2.0 * self.b22 * x2,
        ]
    }

    pub fn det_b(&self) -> f64 {
        self.b11 * self.b22 - 0.25 * self.b12 * self.b12
    }

    fn singular_tolerance(&self) -> f64 {
        let [[a, c], [_, d]] = self.b_matrix();
        let frob2 = a * a + 2.0 * c * c + d * d;
        1e-12 * (1.0 + frob2)
    }

    pub fn is_b_singular(&self) -> bool {
        self.det_b().abs() < self.singular_tolerance()
    }
}

/// Design row `(1, x1, x2, x1*x2, x1^2, x2^2)`.
pub fn expand_point(x: [f64; 2]) -> [f64; N_PARAMS] {
    let [x1, x2] = x;
    [1.0, x1, x2, x1 * x2, x1 * x1, x2 * x2]
}

/// Full second-order model matrix for a list of design points.
pub fn expand_design(points: &[[f64; 2]]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), N_PARAMS, |i, k| expand_point(points[i])[k])
}

/// Two-factor central composite design: the `2^2` factorial, four axial
/// points at `axial_distance`, and `center_runs` center points.
///
/// `axial_distance = sqrt(2)` gives the rotatable design, `1.0` the
/// face-centered one.
pub fn ccd_design(center_runs: usize, axial_distance: f64) -> Result<Vec<[f64; 2]>> {
    if center_runs < 1 {
        return Err(Error::InvalidInput(
            "a CCD needs at least one center run".into(),
        ));
    }
    if !(axial_distance.is_finite() && axial_distance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "axial distance must be positive, got {axial_distance}"
        )));
    }
    let a = axial_distance;
    let mut pts = vec![
        [-1.0, -1.0],
        [1.0, -1.0],
        [-1.0, 1.0],
        [1.0, 1.0],
        [-a, 0.0],
        [a, 0.0],
        [0.0, -a],
        [0.0, a],
    ];
    pts.extend(std::iter::repeat_n([0.0, 0.0], center_runs));
    Ok(pts)
}

/// `design` stacked `replicates` times.
pub fn replicate_design(design: &[[f64; 2]], replicates: usize) -> Vec<[f64; 2]> {
    design
        .iter()
        .copied()
        .cycle()
        .take(design.len() * replicates)
        .collect()
}

/// A least-squares fit, plus the pieces needed to refit new responses on the
/// same design without refactoring it.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: QuadraticModel,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `residual / sqrt(1 - leverage)`.
    pub std_residuals: Vec<f64>,
    pub leverage: Vec<f64>,
    /// `RSS / (n - 6)`; `NaN` for a saturated design.
    pub sigma2_hat: f64,
    pub rss: f64,
    pub design_matrix: DMatrix<f64>,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
    /// `R^-1 Q'` from the thin QR of the design, so `theta = projector * y`.
    projector: DMatrix<f64>,
    /// `(X'X)^-1 = R^-1 R^-T`.
    xtx_inv: DMatrix<f64>,
    y_norm2: f64,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// Least-squares coefficients for new responses on the same design.
    pub fn refit(&self, y: &[f64]) -> QuadraticModel {
        assert_eq!(y.len(), self.n(), "response length must match the design");
        let mut c = [0.0; N_PARAMS];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = self
                .projector
                .row(k)
                .iter()
                .zip(y)
                .map(|(p, yi)| p * yi)
                .sum();
        }
        QuadraticModel::from_coefficients(c)
    }

    pub fn xtx_inverse(&self) -> &DMatrix<f64> {
        &self.xtx_inv
    }
}

/// Ordinary least squares on the expanded second-order design, by a thin QR
/// factorization of `X`.
pub fn fit(experiment: &Experiment) -> Result<FitResult> {
    let n = experiment.n();
    if n < N_PARAMS {
        return Err(Error::InsufficientRuns { n });
    }
    let x = expand_design(&experiment.points);
    let y = DVector::from_column_slice(&experiment.responses);

    let sv = x.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient { condition });
    }

    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let projector = r
        .solve_upper_triangular(&q.transpose())
        .ok_or(Error::RankDeficient { condition })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(N_PARAMS, N_PARAMS))
        .ok_or(Error::RankDeficient { condition })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let theta = &projector * &y;
    let fitted_v = &x * &theta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
    let leverage: Vec<f64> = (0..n).map(|i| q.row(i).norm_squared()).collect();
    let std_residuals = residuals
        .iter()
        .zip(&leverage)
        .map(|(e, h)| {
            let s = 1.0 - h;
            // A leverage-one run is fitted exactly; its residual is zero.
            if s > 1e-12 {
                e / s.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2_hat = if n > N_PARAMS {
        rss / (n - N_PARAMS) as f64
    } else {
        f64::NAN
    };

    let mut c = [0.0; N_PARAMS];
    c.copy_from_slice(theta.as_slice());

    Ok(FitResult {
        model: QuadraticModel::from_coefficients(c),
        fitted,
        residuals,
        std_residuals,
        leverage,
        sigma2_hat,
        rss,
        design_matrix: x,
        condition,
        projector,
        xtx_inv,
        y_norm2: y.norm_squared(),
    })
}

/// Solution of `beta + 2 B x = 0`, i.e. `-B^-1 beta / 2`.
pub fn stationary_point(model: &QuadraticModel) -> Result<[f64; 2]> {
    if model.is_b_singular() {
        return Err(Error::SingularB { det: model.det_b() });
    }
    let [[a, c], [_, d]] = model.b_matrix();
    let det = model.det_b();
    let [b1, b2] = model.beta;
    // B^-1 = [[d, -c], [-c, a]] / det
    Ok([
        -0.5 * (d * b1 - c * b2) / det,
        -0.5 * (-c * b1 + a * b2) / det,
    ])
}

/// Eigenvalues of the symmetric `B`, ascending, with the sign classification.
pub fn eigen_b(model: &QuadraticModel) -> ([f64; 2], SurfaceKind) {
    let [[a, c], [_, d]] = model.b_matrix();
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(c);
    let eig = [mean - radius, mean + radius];
    let kind = if eig[1] < 0.0 {
        SurfaceKind::ConcaveDown
    } else if eig[0] > 0.0 {
        SurfaceKind::ConcaveUp
    } else {
        SurfaceKind::Saddle
    };
    (eig, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTest {
    pub f: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
}

/// F test of `H0: C theta = 0` against the unrestricted fit.
///
/// Uses the identity `RSS_restricted - RSS_full = (C theta)' [C (X'X)^-1 C']^-1 (C theta)`.
pub fn linear_hypothesis_test(fit: &FitResult, constraints: &DMatrix<f64>) -> Result<FTest> {
    let m = constraints.nrows();
    let n = fit.n();
    if constraints.ncols() != N_PARAMS || m == 0 {
        return Err(Error::InvalidInput(format!(
            "constraint matrix must be m x {N_PARAMS} with m >= 1, got {} x {}",
            m,
            constraints.ncols()
        )));
    }
    if n <= N_PARAMS {
        return Err(Error::InsufficientRuns { n });
    }
    let sv = constraints.clone().singular_values();
    if m > N_PARAMS || !(sv.min() > RANK_TOL * sv.max()) {
        let condition = if sv.min() > 0.0 {
            sv.max() / sv.min()
        } else {
            f64::INFINITY
        };
        return Err(Error::RankDeficient { condition });
    }

    let theta = DVector::from_column_slice(&fit.model.coefficients());
    let d = constraints * theta;
    let middle = constraints * &fit.xtx_inv * constraints.transpose();
    let chol = middle.cholesky().ok_or(Error::RankDeficient {
        condition: f64::INFINITY,
    })?;
    let extra_rss = d.dot(&chol.solve(&d)).max(0.0);

    let df_den = n - N_PARAMS;
    // Noise-free data leaves both sums of squares at rounding level.
    let tiny = 1e-20 * fit.y_norm2.max(1.0);
    let f = if extra_rss <= tiny {
        0.0
    } else if fit.rss <= tiny {
        f64::INFINITY
    } else {
        (extra_rss / m as f64) / (fit.rss / df_den as f64)
    };
    let p_value = if f == 0.0 {
        1.0
    } else if f.is_infinite() {
        0.0
    } else {
        let dist = FisherSnedecor::new(m as f64, df_den as f64)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        dist.sf(f)
    };
    Ok(FTest {
        f,
        df_num: m,
        df_den,
        p_value,
    })
}

/// Constraints for the symmetric-surface hypothesis `beta1 = beta2 = 0,
/// beta11 = beta22`, under which the constrained maximum need not be unique.
pub fn symmetry_constraints() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        N_PARAMS,
        &[
            0.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, 1.0, -1.0,
        ],
    )
}
