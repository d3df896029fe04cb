//! Numerical checks of the functional inequalities behind the global
//! existence results and of the counterexample family showing that the
//! exponential embedding cannot hold with a small constant.
//!
//! Functions are cell samples; derivatives are face differences and
//! integrals are `h * sum`.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compensated_sum, CellField, GridSpec};
use crate::quad::CellQuadrature;

/// Relative slack of the `ok` verdict.
pub const MARGIN_TOLERANCE: f64 = 1e-12;

/// Largest observed `|f|_4^4 / (|f|_{1,2}^2 |f|_1^2)` over the calibration
/// corpus ([`gn_calibration_corpus`] with [`GN_CALIBRATION_SEED`]), rounded up
/// (observed 1.028424011).
pub const GN_RATIO_MAX: f64 = 1.0285;
/// Gagliardo-Nirenberg constant used by the `L log L` interpolation check.
pub const GN_CONSTANT: f64 = 1.1 * GN_RATIO_MAX;
pub const GN_CALIBRATION_SEED: u64 = 0x6e5f_ca1b;
pub const GN_CALIBRATION_SAMPLES: usize = 10_000;

/// A function on `[0, 1]` represented by its cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSample {
    pub grid: GridSpec,
    pub values: CellField,
}

impl FunctionSample {
    pub fn new(grid: GridSpec, values: CellField) -> Result<Self> {
        values.check_grid(&grid)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, CellField::new(grid.centers().map(f).collect())?)
    }

    fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, CellField::new(self.values.iter().map(|&x| f(x)).collect())?)
    }

    pub fn integral_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.h() * compensated_sum(self.values.iter().map(|&x| f(x)))
    }

    pub fn integral(&self) -> f64 {
        self.integral_of(|x| x)
    }

    pub fn l1(&self) -> f64 {
        self.integral_of(f64::abs)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `int |f_x|^2`.
    pub fn grad_energy(&self) -> f64 {
        let h = self.h();
        compensated_sum(self.values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0]) / h))
    }

    /// `int |f_x|`.
    pub fn grad_l1(&self) -> f64 {
        compensated_sum(self.values.windows(2).map(|w| (w[1] - w[0]).abs()))
    }

    /// `|f|_{1,2}^2 = int |f_x|^2 + int f^2`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.grad_energy() + self.integral_of(|x| x * x)
    }

    /// `int |f log |f||`.
    pub fn llogl_norm(&self) -> f64 {
        self.integral_of(|x| if x == 0.0 { 0.0 } else { (x * x.abs().ln()).abs() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub ok: bool,
    pub params: Vec<(String, f64)>,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64, params: &[(&str, f64)]) -> Self {
        let margin = rhs - lhs;
        Self {
            lhs,
            rhs,
            margin,
            ok: margin >= -MARGIN_TOLERANCE * (1.0 + rhs.abs()),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// `int e^{2m} <= (1+nu)/4 (int e^m)^2 int |m_x|^2 + (1 + 1/nu)(int e^m)^2`.
pub fn verify_exp_embedding(m: &FunctionSample, nu: f64) -> Result<InequalityReport> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::InputDomain {
            what: "nu",
            value: nu,
            expected: "finite and > 0",
        });
    }
    let m_max = m.values.max();
    let limit = 0.5 * f64::MAX.ln();
    if m_max > limit {
        return Err(Error::OutOfRange {
            x: m_max,
            lo: f64::NEG_INFINITY,
            hi: limit,
        });
    }
    let lhs = m.integral_of(|x| (2.0 * x).exp());
    let e1 = m.integral_of(f64::exp);
    let rhs = 0.25 * (1.0 + nu) * e1 * e1 * m.grad_energy() + (1.0 + 1.0 / nu) * e1 * e1;
    Ok(InequalityReport::new(lhs, rhs, &[("nu", nu)]))
}

/// `sup |m| <= int |m_x| + int |m|`.
pub fn sobolev_embedding_check(m: &FunctionSample) -> InequalityReport {
    InequalityReport::new(m.sup_abs(), m.grad_l1() + m.l1(), &[])
}

/// `0` on `|s| <= N`, `2(|s| - N)` on `(N, 2N]`, `|s|` beyond.
pub fn cutoff_eta(s: f64, n: f64) -> f64 {
    let a = s.abs();
    if a <= n {
        0.0
    } else if a <= 2.0 * n {
        2.0 * (a - n)
    } else {
        a
    }
}

/// The chained bound `|w|_4^4 <= 64 N^3 |w|_1^4 + 32 K |w|_{1,2}^2 (log N)^-2
/// |w|_{L log L}^2` together with its intermediate steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloglReport {
    pub display: InequalityReport,
    /// `|eta(w)|_4^4 <= K |eta(w)|_{1,2}^2 |eta(w)|_1^2`.
    pub gagliardo_nirenberg: InequalityReport,
    /// `|eta(w)|_{1,2}^2 <= 4 |w|_{1,2}^2`.
    pub cutoff_energy: InequalityReport,
    /// `|eta(w)|_1 <= (log N)^-1 |w|_{L log L}`.
    pub cutoff_mass: InequalityReport,
    /// `|w - eta(w)|_4^4 <= 8 N^3 |w|_1^4`.
    pub remainder: InequalityReport,
}

impl LloglReport {
    pub fn all_ok(&self) -> bool {
        self.display.ok && self.gagliardo_nirenberg.ok && self.cutoff_energy.ok && self.cutoff_mass.ok && self.remainder.ok
    }
}

pub fn verify_llogl_interpolation(w: &FunctionSample, n: f64, k: f64) -> Result<LloglReport> {
    if !(n.is_finite() && n > std::f64::consts::E) {
        return Err(Error::InputDomain {
            what: "N",
            value: n,
            expected: "finite and > e",
        });
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InputDomain {
            what: "K",
            value: k,
            expected: "finite and > 0",
        });
    }
    let params = [("N", n), ("K", k)];
    let eta = w.map(|x| cutoff_eta(x, n))?;
    let rest = FunctionSample::new(
        w.grid,
        CellField::new(w.values.iter().zip(eta.values.iter()).map(|(a, b)| a - b).collect())?,
    )?;
    let log_n = n.ln();
    let w_l1 = w.l1();
    let w_h1 = w.h1_norm_sq();
    let w_llogl = w.llogl_norm();

    let lhs = w.integral_of(|x| x.powi(4));
    let rhs = 64.0 * n.powi(3) * w_l1.powi(4) + 32.0 * k * w_h1 * (w_llogl / log_n).powi(2);
    let eta_l4 = eta.integral_of(|x| x.powi(4));
    let eta_h1 = eta.h1_norm_sq();
    let eta_l1 = eta.l1();
    Ok(LloglReport {
        display: InequalityReport::new(lhs, rhs, &params),
        gagliardo_nirenberg: InequalityReport::new(eta_l4, k * eta_h1 * eta_l1 * eta_l1, &params),
        cutoff_energy: InequalityReport::new(eta_h1, 4.0 * w_h1, &params),
        cutoff_mass: InequalityReport::new(eta_l1, w_llogl / log_n, &params),
        remainder: InequalityReport::new(
            rest.integral_of(|x| x.powi(4)),
            8.0 * n.powi(3) * w_l1.powi(4),
            &params,
        ),
    })
}

/// `|f|_4^4 / (|f|_{1,2}^2 |f|_1^2)`, or 0 for `f = 0`.
pub fn gn_ratio(f: &FunctionSample) -> f64 {
    let den = f.h1_norm_sq() * f.l1().powi(2);
    if den == 0.0 {
        0.0
    } else {
        f.integral_of(|x| x.powi(4)) / den
    }
}

/// Truncated Fourier sum `c_0 + sum_k a_k cos(k pi x) + b_k sin(k pi x)` with
/// `1..=max_modes` modes and coefficients uniform in `[-amplitude, amplitude]`.
pub fn random_fourier(rng: &mut impl Rng, grid: GridSpec, max_modes: usize, amplitude: f64) -> FunctionSample {
    let modes = rng.random_range(1..=max_modes.max(1));
    let c0 = rng.random_range(-amplitude..=amplitude);
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|_| {
            (
                rng.random_range(-amplitude..=amplitude),
                rng.random_range(-amplitude..=amplitude),
            )
        })
        .collect();
    let values = grid
        .centers()
        .map(|x| {
            c0 + coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = (k + 1) as f64 * std::f64::consts::PI * x;
                    a * w.cos() + b * w.sin()
                })
                .sum::<f64>()
        })
        .collect();
    FunctionSample {
        grid,
        values: CellField::from_vec_unchecked(values),
    }
}

/// Positive density `mass * e^f / int e^f` with `f` from [`random_fourier`].
pub fn random_density(rng: &mut impl Rng, grid: GridSpec, mass: f64) -> FunctionSample {
    let f = random_fourier(rng, grid, CORPUS_MODES, CORPUS_AMPLITUDE);
    let top = f.values.max();
    let shifted = f.map(|x| (x - top).exp()).expect("finite");
    let total = shifted.integral();
    shifted.map(|x| mass * x / total).expect("finite")
}

pub const CORPUS_MODES: usize = 12;
pub const CORPUS_AMPLITUDE: f64 = 2.0;
pub const CORPUS_CELLS: usize = 1024;

fn corpus_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeded corpus of exponents `m` for the exponential and Sobolev checks.
pub fn fourier_corpus(seed: u64, count: usize, grid: GridSpec) -> Vec<FunctionSample> {
    let mut rng = corpus_rng(seed);
    (0..count)
        .map(|_| random_fourier(&mut rng, grid, CORPUS_MODES, CORPUS_AMPLITUDE))
        .collect()
}

/// Seeded corpus `w = 1 + u`, `u` a random density whose mass is
/// log-uniform in `[0.1, 1000]`.
pub fn shifted_density_corpus(seed: u64, count: usize, grid: GridSpec) -> Vec<FunctionSample> {
    let mut rng = corpus_rng(seed);
    (0..count)
        .map(|_| {
            let mass = 10f64.powf(rng.random_range(-1.0..=3.0));
            random_density(&mut rng, grid, mass).map(|u| 1.0 + u).expect("finite")
        })
        .collect()
}

/// Calibration corpus for the Gagliardo-Nirenberg ratio: raw Fourier sums,
/// positive densities and their `eta_N` cutoffs.
pub fn gn_calibration_corpus(seed: u64, count: usize, grid: GridSpec) -> impl Iterator<Item = FunctionSample> {
    let mut rng = corpus_rng(seed);
    (0..count).map(move |i| match i % 3 {
        0 => random_fourier(&mut rng, grid, CORPUS_MODES, CORPUS_AMPLITUDE),
        1 => {
            let mass = 10f64.powf(rng.random_range(-1.0..=3.0));
            random_density(&mut rng, grid, mass).map(|u| 1.0 + u).expect("finite")
        }
        _ => {
            let mass = 10f64.powf(rng.random_range(-1.0..=3.0));
            let w = random_density(&mut rng, grid, mass).map(|u| 1.0 + u).expect("finite");
            let n = rng.random_range(1.0..=w.sup_abs().max(1.0));
            w.map(|x| cutoff_eta(x, n)).expect("finite")
        }
    })
}

/// Largest [`gn_ratio`] over [`gn_calibration_corpus`].
pub fn calibrate_gn(seed: u64, count: usize, grid: GridSpec) -> f64 {
    gn_calibration_corpus(seed, count, grid).map(|f| gn_ratio(&f)).fold(0.0, f64::max)
}

/// The Prop. 5 instance with `m = log(1 + u)`: with `int u = M` and
/// `nu = 4 (1 - 1e-6) / ((M+1)^2 chi) - 1`,
/// `chi int u^2 <= (1 - 1e-6) int |m_x|^2 + chi [(1 + 1/nu)(M+1)^2 - 2M - 1]`.
pub fn verify_log_density_bound(u: &FunctionSample, chi: f64) -> Result<InequalityReport> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::InputDomain {
            what: "chi",
            value: chi,
            expected: "finite and > 0",
        });
    }
    if u.values.min() < 0.0 {
        return Err(Error::Validation("density must be nonnegative".into()));
    }
    let mass = u.integral();
    let gap = 1.0 - 1e-6;
    let nu = 4.0 * gap / ((mass + 1.0).powi(2) * chi) - 1.0;
    if !(nu > 0.0) {
        return Err(Error::InputDomain {
            what: "mass",
            value: mass,
            expected: "(M+1)^2 chi < 4",
        });
    }
    let m = u.map(f64::ln_1p)?;
    let lhs = chi * u.integral_of(|x| x * x);
    let rhs = gap * m.grad_energy() + chi * ((1.0 + 1.0 / nu) * (mass + 1.0).powi(2) - 2.0 * mass - 1.0);
    Ok(InequalityReport::new(lhs, rhs, &[("nu", nu), ("M", mass), ("chi", chi)]))
}

/// `2 / sqrt(chi) - 1`.
pub fn critical_mass_threshold(chi: f64) -> Result<f64> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::InputDomain {
            what: "chi",
            value: chi,
            expected: "finite and > 0",
        });
    }
    Ok(2.0 / chi.sqrt() - 1.0)
}

/// Quantities of `e^{m} = eps (1+eps) M / (x + eps)^2`, by Gauss-Legendre
/// quadrature and in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleResult {
    pub eps: f64,
    pub mass: f64,
    /// `int e^m`.
    pub mass_quadrature: f64,
    pub mass_closed: f64,
    /// `int |m_x|^2`.
    pub grad_energy_quadrature: f64,
    pub grad_energy_closed: f64,
    /// `int e^{2m}`.
    pub lhs_quadrature: f64,
    pub lhs_closed: f64,
}

impl CounterexampleResult {
    /// `delta M^2 int |m_x|^2 + h0` (closed form).
    pub fn rhs_at(&self, delta: f64, h0: f64) -> f64 {
        delta * self.mass * self.mass * self.grad_energy_closed + h0
    }
}

fn counterexample_closed(eps: f64, mass: f64) -> (f64, f64, f64) {
    let grad = 4.0 / (eps * (1.0 + eps));
    let lhs = mass * mass / 3.0 * ((1.0 + eps).powi(3) - eps.powi(3)) / (eps * (1.0 + eps));
    (mass, grad, lhs)
}

fn check_family_args(eps: f64, mass: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InputDomain {
            what: "eps",
            value: eps,
            expected: "in (0, 1]",
        });
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InputDomain {
            what: "mass",
            value: mass,
            expected: "finite and > 0",
        });
    }
    Ok(())
}

pub fn counterexample_family(eps: f64, mass: f64, grid: &GridSpec) -> Result<CounterexampleResult> {
    check_family_args(eps, mass)?;
    if grid.h() > eps / 8.0 {
        return Err(Error::Resolution {
            what: "boundary layer of the counterexample",
            detail: format!("h = {} > eps/8 = {}", grid.h(), eps / 8.0),
        });
    }
    let quad = CellQuadrature::new(10);
    let c = eps * (1.0 + eps) * mass;
    let (mass_closed, grad_closed, lhs_closed) = counterexample_closed(eps, mass);
    Ok(CounterexampleResult {
        eps,
        mass,
        mass_quadrature: quad.over_grid(grid, &[], |x| c / ((x + eps) * (x + eps))),
        mass_closed,
        grad_energy_quadrature: quad.over_grid(grid, &[], |x| 4.0 / ((x + eps) * (x + eps))),
        grad_energy_closed: grad_closed,
        lhs_quadrature: quad.over_grid(grid, &[], |x| c * c / (x + eps).powi(4)),
        lhs_closed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub lhs: f64,
    pub grad_energy: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSweep {
    pub delta: f64,
    pub mass: f64,
    pub h0: f64,
    pub rows: Vec<SweepRow>,
    /// Some `eps` gives `int e^{2m} > delta M^2 int |m_x|^2 + h0`.
    pub violated: bool,
    /// Least-squares slope of `log gap` against `log(1/eps)` over rows with
    /// positive gap, reported when `delta < 1/12`.
    pub fitted_exponent: Option<f64>,
}

/// Closed-form sweep of `gap(eps) = int e^{2m} - (delta M^2 int |m_x|^2 + h0)`.
pub fn counterexample_sweep(delta: f64, mass: f64, h0: f64, eps_grid: &[f64]) -> Result<CounterexampleSweep> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InputDomain {
            what: "delta",
            value: delta,
            expected: "finite and > 0",
        });
    }
    if !h0.is_finite() {
        return Err(Error::InputDomain {
            what: "h0",
            value: h0,
            expected: "finite",
        });
    }
    if eps_grid.is_empty() {
        return Err(Error::Validation("empty eps grid".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation("eps grid must be strictly decreasing".into()));
    }
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            check_family_args(eps, mass)?;
            let (_, grad, lhs) = counterexample_closed(eps, mass);
            let rhs = delta * mass * mass * grad + h0;
            Ok(SweepRow {
                eps,
                lhs,
                grad_energy: grad,
                rhs,
                gap: lhs - rhs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violated = rows.iter().any(|r| r.gap > 0.0);
    let fitted_exponent = if delta < 1.0 / 12.0 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.gap > 0.0)
            .map(|r| ((1.0 / r.eps).ln(), r.gap.ln()))
            .collect();
        least_squares_slope(&pts)
    } else {
        None
    };
    Ok(CounterexampleSweep {
        delta,
        mass,
        h0,
        rows,
        violated,
        fitted_exponent,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `count` values log-spaced from `hi` down to `lo`.
pub fn log_grid_decreasing(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}
