//! Numerical integration: globally adaptive Gauss-Kronrod (7/15) and
//! fixed-order Gauss-Legendre panels over a cell grid.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::model::GridSpec;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, bisecting the
/// panel with the largest error estimate until the summed estimate meets it.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let mut panels = vec![kronrod15(&f, a, b)];
    loop {
        let total_error: f64 = panels.iter().map(|p| p.error).sum();
        // Rounding floor: no point refining below a few ulps of the result.
        let total: f64 = panels.iter().map(|p| p.value).sum();
        if total_error <= tol.max(50.0 * f64::EPSILON * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                a,
                b,
                error: total_error,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(kronrod15(&f, p.a, mid));
        panels.push(kronrod15(&f, mid, p.b));
    }
}

/// Gauss-Legendre rule applied on every cell of a grid, with optional
/// breakpoints (kinks of the integrand) that split the cells they fall in.
pub struct CellQuadrature {
    rule: GaussLegendre,
}

impl CellQuadrature {
    pub fn new(points: usize) -> Self {
        let degree = std::num::NonZeroUsize::new(points.max(1)).expect("nonzero");
        Self {
            rule: GaussLegendre::new(degree),
        }
    }

    pub fn integrate_interval(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.rule.integrate(a, b, f)
    }

    /// Integral of `f` over each cell of `grid`.
    pub fn per_cell(&self, grid: &GridSpec, breakpoints: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..grid.n_cells())
            .map(|i| {
                let lo = grid.left_edge(i);
                let hi = grid.left_edge(i + 1);
                let mut cuts: Vec<f64> = breakpoints
                    .iter()
                    .copied()
                    .filter(|&x| x > lo && x < hi)
                    .collect();
                cuts.sort_by(f64::total_cmp);
                let mut acc = 0.0;
                let mut left = lo;
                for c in cuts.into_iter().chain(std::iter::once(hi)) {
                    acc += self.rule.integrate(left, c, &f);
                    left = c;
                }
                acc
            })
            .collect()
    }

    /// Integral of `f` over `[0, 1]` assembled cell by cell.
    pub fn over_grid(&self, grid: &GridSpec, breakpoints: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        crate::model::compensated_sum(self.per_cell(grid, breakpoints, f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((v - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // \int_0^1 ln x dx = -1
        let v = integrate(|x: f64| x.ln(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v + 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(|x: f64| x.exp(), 1.0, 0.0, 1e-13).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn cell_quadrature_splits_at_kinks() {
        let g = GridSpec::new(10).unwrap();
        let q = CellQuadrature::new(4);
        let kink = 0.537;
        let v = q.over_grid(&g, &[kink], |x| (x - kink).max(0.0));
        assert!((v - 0.5 * (1.0 - kink) * (1.0 - kink)).abs() < 1e-15);
    }
}
