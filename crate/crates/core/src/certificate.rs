//! Blowup certificates: the tail function `g(r) = r int_r^inf a`, its concave
//! sublinear majorant `B`, the functional `A_{B,q}`, the explicit initial data
//! and the mass-threshold search.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{lyapunov, moment_l, DiagnosticsRecord, MomentConfig};
use crate::diffusion::DiffusionModel;
use crate::entropy::EntropyProfile;
use crate::error::{Error, Result};
use crate::model::{CellField, GridSpec, State};

/// Samples per decade of the `g` grid.
pub const SAMPLES_PER_DECADE: usize = 32;
/// First sampled radius after the origin.
pub const SAMPLE_FLOOR: f64 = 1e-6;
/// Sampling stops once `g(r)/r` drops below this ...
pub const TAIL_RATIO: f64 = 1e-6;
/// ... or at this radius.
pub const SAMPLE_CAP: f64 = 1e200;

/// Piecewise-linear concave, nondecreasing majorant with a power-law tail
/// `B(R) (x/R)^theta` beyond the last breakpoint `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcaveEnvelope {
    x: Vec<f64>,
    y: Vec<f64>,
    tail_theta: f64,
}

/// Decay model of `g` beyond the sampled range: `a(r) ~ c r^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailDecay {
    pub exponent: f64,
}

impl ConcaveEnvelope {
    /// `B = 0`, the envelope of the degenerate diffusion `a = 0`.
    pub fn zero() -> Self {
        Self {
            x: vec![0.0, 1.0],
            y: vec![0.0, 0.0],
            tail_theta: 0.0,
        }
    }

    /// Samples `g` for `model` and builds its majorant.
    pub fn for_model(model: &DiffusionModel) -> Result<Self> {
        let samples = sample_tail_function(model)?;
        concave_majorant(
            &samples,
            TailDecay {
                exponent: model.tail_exponent(),
            },
        )
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.x
            .windows(2)
            .zip(self.y.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect()
    }

    pub fn tail_theta(&self) -> f64 {
        self.tail_theta
    }

    pub fn is_zero(&self) -> bool {
        self.y.iter().all(|&y| y == 0.0)
    }

    /// `B(x)` for `x >= 0`.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.x.len() - 1;
        if x >= self.x[last] {
            let (r, b) = (self.x[last], self.y[last]);
            if x == r || self.tail_theta == 0.0 {
                return b;
            }
            return b * (x / r).powf(self.tail_theta);
        }
        let k = self.x.partition_point(|&p| p <= x).saturating_sub(1).min(last - 1);
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let w = (x - x0) / (x1 - x0);
        self.y[k] + w * (self.y[k + 1] - self.y[k])
    }

    /// `beta(x) = B(x)/x`; `beta(inf) = 0`.
    pub fn beta(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::InputDomain {
                what: "beta argument",
                value: x,
                expected: "> 0",
            });
        }
        if x.is_infinite() {
            return Ok(0.0);
        }
        Ok(self.eval(x) / x)
    }
}

/// `(r, g(r))` on `{0} U` a log grid from [`SAMPLE_FLOOR`] until `g(r)/r <
/// TAIL_RATIO` (or [`SAMPLE_CAP`]).
pub fn sample_tail_function(model: &DiffusionModel) -> Result<Vec<(f64, f64)>> {
    if !model.is_integrable() {
        return Err(Error::CannotCertify(format!(
            "{model} is not integrable on (0, inf); blowup certificates need a in C[0,inf) and L^1(R+)"
        )));
    }
    let mut out = vec![(0.0, 0.0)];
    let mut k = 0;
    loop {
        let r = SAMPLE_FLOOR * 10f64.powf(k as f64 / SAMPLES_PER_DECADE as f64);
        let g = model.tail_mass(r)?;
        out.push((r, g));
        if g / r < TAIL_RATIO || r >= SAMPLE_CAP {
            break;
        }
        k += 1;
    }
    Ok(out)
}

/// Least concave majorant of the samples, made nondecreasing past its
/// maximum, extended by `B(R)(x/R)^theta` with `theta = min(max(0, 2 - p),
/// s_last R / B(R))` so that `B` stays concave and `B(x)/x -> 0`.
pub fn concave_majorant(samples: &[(f64, f64)], tail: TailDecay) -> Result<ConcaveEnvelope> {
    if !(tail.exponent > 1.0) {
        return Err(Error::CannotCertify(format!(
            "tail exponent {} <= 1: g(r)/r does not decay; blowup certificates need a in C[0,inf) and L^1(R+)",
            tail.exponent
        )));
    }
    let mut pts: Vec<(f64, f64)> = samples.to_vec();
    if let Some(&(x, g)) = pts.iter().find(|(x, g)| !(x.is_finite() && *x >= 0.0 && g.is_finite() && *g >= 0.0)) {
        return Err(Error::Validation(format!("invalid tail sample ({x}, {g})")));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Validation("tail samples must be strictly increasing in r".into()));
    }
    if pts.first().map(|p| p.0 > 0.0).unwrap_or(true) {
        pts.insert(0, (0.0, 0.0));
    }
    if pts.len() < 2 {
        return Err(Error::Validation("need at least one positive sample".into()));
    }

    // Upper hull, monotone chain from the left.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // Past the maximum, a concave B >= 0 on (0, inf) cannot decrease.
    let peak = hull
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.1 > hull[best].1 { i } else { best });
    let g_max = hull[peak].1;
    let last_x = pts.last().expect("non-empty").0;
    hull.truncate(peak + 1);
    if hull[peak].0 < last_x {
        hull.push((last_x, g_max));
    }

    let (x, y): (Vec<f64>, Vec<f64>) = hull.into_iter().unzip();
    let n = x.len();
    let s_last = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    let tail_theta = if y[n - 1] > 0.0 {
        (2.0 - tail.exponent).max(0.0).min(s_last * x[n - 1] / y[n - 1]).max(0.0)
    } else {
        0.0
    };
    Ok(ConcaveEnvelope { x, y, tail_theta })
}

/// `A_{B,q}(L)`, evaluated term by term; `L = 0` uses `beta(inf) = 0`.
pub fn certificate_a(envelope: &ConcaveEnvelope, q: f64, mass: f64, eps: f64, l: f64) -> Result<f64> {
    if !(q.is_finite() && q > 2.0) {
        return Err(Error::InputDomain {
            what: "q",
            value: q,
            expected: "finite and > 2",
        });
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InputDomain {
            what: "mass",
            value: mass,
            expected: "finite and > 0",
        });
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InputDomain {
            what: "eps",
            value: eps,
            expected: "finite and > 0",
        });
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::InputDomain {
            what: "L",
            value: l,
            expected: "finite and >= 0",
        });
    }
    let m_q1 = mass.powf(q + 1.0);
    let beta = if l == 0.0 {
        0.0
    } else {
        envelope.beta(m_q1 / (l * q * (q + 1.0)))?
    };
    let e = (q - 2.0) / q;
    let first = (q - 1.0) * envelope.eval(mass).powf(2.0 / q) * (m_q1 / (q + 1.0)).powf(e) * beta.powf(e);
    let second = mass * l * (1.0 + eps * mass.powf(q - 1.0) / (4.0 * q));
    Ok(first + second - m_q1 / (q * (q + 1.0)))
}

/// Minimum number of cell centres inside the support of the ramp data.
pub const MIN_SUPPORT_CELLS: usize = 8;

/// `u0 = 2M^3 (x + 1/M - 1)` on `[1 - 1/M, 1]` (exact cell averages),
/// `v0 = M x - M/2` at the cell centres.
pub fn blowup_initial_data(mass: f64, grid: &GridSpec) -> Result<State> {
    if !(mass.is_finite() && mass > 1.0) {
        return Err(Error::InputDomain {
            what: "mass",
            value: mass,
            expected: "finite and > 1",
        });
    }
    let x0 = 1.0 - 1.0 / mass;
    let inside = grid.centers().filter(|&x| x >= x0).count();
    if inside < MIN_SUPPORT_CELLS {
        return Err(Error::Resolution {
            what: "support of the ramp initial data",
            detail: format!(
                "{inside} cell centres in [{x0}, 1], need {MIN_SUPPORT_CELLS} (n_cells >= {})",
                (MIN_SUPPORT_CELLS as f64 * mass).ceil()
            ),
        });
    }
    let h = grid.h();
    let m3 = mass * mass * mass;
    let u: Vec<f64> = (0..grid.n_cells())
        .map(|i| {
            let lo = grid.left_edge(i).max(x0);
            let hi = grid.left_edge(i + 1);
            if hi <= x0 {
                0.0
            } else {
                m3 * ((hi - x0) * (hi - x0) - (lo - x0) * (lo - x0)) / h
            }
        })
        .collect();
    let v: Vec<f64> = grid.centers().map(|x| mass * x - 0.5 * mass).collect();
    Ok(State::new(0.0, CellField::new(u)?, CellField::new(v)?))
}

/// Result of evaluating the blowup condition at the ramp data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub q: f64,
    #[serde(rename = "M")]
    pub mass: f64,
    pub eps_choice: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    pub lambda0: f64,
    #[serde(rename = "Phi0")]
    pub phi0: f64,
    #[serde(rename = "A_at_Phi0")]
    pub a_at_phi0: f64,
    pub certified: bool,
    #[serde(rename = "M0_search_trace")]
    pub m0_search_trace: Option<Vec<SearchStep>>,
    #[serde(skip)]
    pub n_cells: usize,
    #[serde(skip)]
    pub entropy_extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    #[serde(rename = "M")]
    pub mass: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub certified: bool,
}

/// Grid used for a given mass: `max(base, ceil(16 M))` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub base: usize,
}

impl GridPolicy {
    pub fn grid_for(&self, mass: f64) -> Result<GridSpec> {
        let n = self.base.max((2.0 * MIN_SUPPORT_CELLS as f64 * mass).ceil() as usize);
        GridSpec::new(n)
    }
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { base: 4096 }
    }
}

/// Reusable certificate evaluator for one diffusion and one `q`.
#[derive(Debug, Clone)]
pub struct Certifier {
    envelope: ConcaveEnvelope,
    profile: EntropyProfile,
    moment: MomentConfig,
    pub grid_policy: GridPolicy,
    /// `None` selects `eps = M^(1-q)`.
    pub eps_override: Option<f64>,
}

impl Certifier {
    pub fn new(model: &DiffusionModel, profile: EntropyProfile, q: f64) -> Result<Self> {
        Self::with_envelope(ConcaveEnvelope::for_model(model)?, profile, q)
    }

    /// Uses a given envelope and entropy (e.g. the degenerate pair `B = 0`, `b = 0`).
    pub fn with_envelope(envelope: ConcaveEnvelope, profile: EntropyProfile, q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 4.0) {
            return Err(Error::InputDomain {
                what: "q",
                value: q,
                expected: "finite and > 4",
            });
        }
        Ok(Self {
            envelope,
            profile,
            moment: MomentConfig::new(q)?,
            grid_policy: GridPolicy::default(),
            eps_override: None,
        })
    }

    pub fn envelope(&self) -> &ConcaveEnvelope {
        &self.envelope
    }

    pub fn q(&self) -> f64 {
        self.moment.q()
    }

    pub fn eps_for(&self, mass: f64) -> f64 {
        self.eps_override.unwrap_or_else(|| mass.powf(1.0 - self.q()))
    }

    pub fn certify(&self, mass: f64) -> Result<CertificateReport> {
        let grid = self.grid_policy.grid_for(mass)?;
        let state = blowup_initial_data(mass, &grid)?;
        let l0 = moment_l(&state, self.moment, &grid)?;
        let lambda = lyapunov(&state, &self.profile, &grid)?;
        let phi0 = l0 + lambda.value + 0.5 * mass * mass;
        let eps = self.eps_for(mass);
        let a = certificate_a(&self.envelope, self.q(), mass, eps, phi0.max(0.0))?;
        Ok(CertificateReport {
            q: self.q(),
            mass,
            eps_choice: eps,
            l0,
            lambda0: lambda.value,
            phi0,
            a_at_phi0: a,
            certified: a < 0.0,
            m0_search_trace: None,
            n_cells: grid.n_cells(),
            entropy_extrapolated: lambda.extrapolated,
        })
    }

    /// Bisection in `log M` for the sign change of `A(Phi(0))` on `[lo, hi]`.
    pub fn search_threshold(&self, lo: f64, hi: f64, rel_tol: f64) -> Result<ThresholdSearch> {
        if !(lo.is_finite() && hi.is_finite() && lo > 1.0) {
            return Err(Error::Validation(format!("mass range [{lo}, {hi}] must lie in (1, inf)")));
        }
        if hi < lo {
            return Err(Error::Validation(format!("empty mass range [{lo}, {hi}]")));
        }
        let mut trace = Vec::new();
        let mut eval = |m: f64| -> Result<SearchStep> {
            let r = self.certify(m)?;
            let s = SearchStep {
                mass: m,
                a: r.a_at_phi0,
                certified: r.certified,
            };
            trace.push(s);
            Ok(s)
        };
        let at_lo = eval(lo)?;
        let at_hi = eval(hi)?;
        if at_lo.certified || !at_hi.certified {
            return Ok(ThresholdSearch {
                outcome: SearchOutcome::Inconclusive { a_lo: at_lo.a, a_hi: at_hi.a },
                trace,
            });
        }
        let (mut a, mut b) = (lo.ln(), hi.ln());
        while b - a > rel_tol {
            let mid = 0.5 * (a + b);
            if eval(mid.exp())?.certified {
                b = mid;
            } else {
                a = mid;
            }
        }
        let m0 = b.exp();
        let mut validation = Vec::with_capacity(VALIDATION_MASSES);
        for k in 1..=VALIDATION_MASSES {
            let m = m0 * (hi / m0).powf(k as f64 / VALIDATION_MASSES as f64).max(1.0 + 1e-3);
            let r = self.certify(m)?;
            validation.push(SearchStep {
                mass: m,
                a: r.a_at_phi0,
                certified: r.certified,
            });
        }
        let monotone = validation.iter().all(|s| s.certified);
        Ok(ThresholdSearch {
            outcome: SearchOutcome::Found { m0, monotone, validation },
            trace,
        })
    }
}

/// Number of masses above `M0` checked for monotonicity.
pub const VALIDATION_MASSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SearchOutcome {
    Found {
        m0: f64,
        monotone: bool,
        validation: Vec<SearchStep>,
    },
    Inconclusive {
        a_lo: f64,
        a_hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub outcome: SearchOutcome,
    pub trace: Vec<SearchStep>,
}

impl ThresholdSearch {
    pub fn m0(&self) -> Option<f64> {
        match self.outcome {
            SearchOutcome::Found { m0, .. } => Some(m0),
            SearchOutcome::Inconclusive { .. } => None,
        }
    }
}

/// One-shot certificate at mass `M` with the default grid policy.
pub fn certify(mass: f64, q: f64, model: &DiffusionModel, profile: &EntropyProfile) -> Result<CertificateReport> {
    Certifier::new(model, profile.clone(), q)?.certify(mass)
}

/// One-shot threshold search on `[lo, hi]` to relative width `1e-10`.
pub fn search_mass_threshold(q: f64, model: &DiffusionModel, profile: &EntropyProfile, lo: f64, hi: f64) -> Result<ThresholdSearch> {
    Certifier::new(model, profile.clone(), q)?.search_threshold(lo, hi, 1e-10)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub t: f64,
    pub phi: f64,
    pub a_of_phi: f64,
    /// Forward slope to the next row (`NaN` on the last row).
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PhiViolation {
    Slope { index: usize, slope: f64, bound: f64 },
    Negative { index: usize, phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupMonitor {
    pub rows: Vec<PhiRow>,
    pub violations: Vec<PhiViolation>,
}

/// Checks `dPhi/dt <= A(Phi)` along sampled rows with
/// `Phi = L + lambda + M^2/2`. Between rows `k` and `k+1` the slope is compared
/// with `max(A(Phi_k), A(Phi_{k+1})) + c_tol (1 + |Phi_k|) dt`.
pub fn monitor_phi(
    rows: &[DiagnosticsRecord],
    envelope: &ConcaveEnvelope,
    q: f64,
    mass: f64,
    eps: f64,
    c_tol: f64,
) -> Result<BlowupMonitor> {
    let phis: Vec<f64> = rows.iter().map(|r| r.l_q + r.lambda + 0.5 * mass * mass).collect();
    let a: Vec<f64> = phis
        .iter()
        .map(|&p| certificate_a(envelope, q, mass, eps, p.max(0.0)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(rows.len());
    let mut violations = Vec::new();
    for k in 0..rows.len() {
        if phis[k] < -1e-8 {
            violations.push(PhiViolation::Negative { index: k, phi: phis[k] });
        }
        let slope = if k + 1 < rows.len() && rows[k + 1].t > rows[k].t {
            let s = (phis[k + 1] - phis[k]) / (rows[k + 1].t - rows[k].t);
            let bound = a[k].max(a[k + 1]) + c_tol * (1.0 + phis[k].abs()) * rows[k + 1].dt;
            if s > bound {
                violations.push(PhiViolation::Slope {
                    index: k + 1,
                    slope: s,
                    bound,
                });
            }
            s
        } else {
            f64::NAN
        };
        out.push(PhiRow {
            t: rows[k].t,
            phi: phis[k],
            a_of_phi: a[k],
            slope,
        });
    }
    Ok(BlowupMonitor { rows: out, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_envelope_closed_form() {
        let a = certificate_a(&ConcaveEnvelope::zero(), 5.0, 1.0, 1.0, 1.0).unwrap();
        assert!((a - 61.0 / 60.0).abs() < 1e-15);
        let a0 = certificate_a(&ConcaveEnvelope::zero(), 5.0, 2.0, 1.0, 0.0).unwrap();
        assert!((a0 + 64.0 / 30.0).abs() < 1e-14);
        assert!(certificate_a(&ConcaveEnvelope::zero(), 5.0, 2.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn concave_input_is_reproduced() {
        let model = DiffusionModel::power_law(2.0).unwrap();
        let samples = sample_tail_function(&model).unwrap();
        let env = concave_majorant(&samples, TailDecay { exponent: 2.0 }).unwrap();
        for &(r, g) in &samples {
            assert!((env.eval(r) - g).abs() <= 1e-15 * (1.0 + g), "r={r}");
        }
        assert!((env.beta(1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_r_one_is_its_own_majorant() {
        let samples: Vec<(f64, f64)> = (0..=40).map(|k| (0.1 * k as f64, (0.1 * k as f64).min(1.0))).collect();
        let env = concave_majorant(&samples, TailDecay { exponent: 3.0 }).unwrap();
        for &(r, g) in &samples {
            assert!((env.eval(r) - g).abs() < 1e-15);
        }
    }

    #[test]
    fn non_integrable_diffusion_cannot_be_certified() {
        let model = DiffusionModel::power_law(1.0).unwrap();
        assert!(matches!(ConcaveEnvelope::for_model(&model), Err(Error::CannotCertify(_))));
    }

    #[test]
    fn ramp_data_domain_and_resolution() {
        let g = GridSpec::new(64).unwrap();
        assert!(matches!(blowup_initial_data(1.0, &g), Err(Error::InputDomain { .. })));
        assert!(matches!(blowup_initial_data(10.0, &g), Err(Error::Resolution { .. })));
        let s = blowup_initial_data(2.0, &g).unwrap();
        assert!((s.mass(&g) - 2.0).abs() < 1e-12);
        assert!(s.v_mean(&g).abs() < 1e-12);
    }
}
