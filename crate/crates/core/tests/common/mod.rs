//! Shared helpers for integration tests.

#![allow(dead_code)]

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Iterated adaptive Simpson over a rectangle. Each axis is split at
/// `breaks` first so kernel edges fall on panel boundaries.
pub fn integrate_2d(
    f: &dyn Fn([f64; 2]) -> f64,
    lo: [f64; 2],
    hi: [f64; 2],
    breaks: [&[f64]; 2],
    tol: f64,
) -> f64 {
    let panels = |j: usize| {
        let mut cuts: Vec<f64> = breaks[j]
            .iter()
            .copied()
            .filter(|c| *c > lo[j] && *c < hi[j])
            .collect();
        cuts.push(lo[j]);
        cuts.push(hi[j]);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
    };
    let px = panels(0);
    let py = panels(1);
    let n = (px.len() * py.len()) as f64;
    let inner = |y: f64| {
        px.iter()
            .map(|&(a, b)| adaptive_simpson(&|x| f([x, y]), a, b, tol / n))
            .sum::<f64>()
    };
    py.iter()
        .map(|&(a, b)| adaptive_simpson(&inner, a, b, tol))
        .sum()
}
