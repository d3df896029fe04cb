//! Monitored functionals and the Liapunov dissipation check.

use serde::{Deserialize, Serialize};

use crate::discretization::{assemble_v_rhs, cumulative_integral};
use crate::entropy::EntropyProfile;
use crate::error::{Error, Result};
use crate::model::{compensated_sum, GridSpec, Params, State};

/// Default tolerance factor of [`dissipation_check`].
pub const DEFAULT_C_TOL: f64 = 10.0;

/// Moment exponent `q > 2` of `L = (1/q) int |U|^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    q: f64,
}

impl MomentConfig {
    pub fn new(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 2.0) {
            return Err(Error::InputDomain {
                what: "moment exponent q",
                value: q,
                expected: "finite and > 2",
            });
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

pub fn mass(state: &State, grid: &GridSpec) -> f64 {
    state.mass(grid)
}

/// Value of the Liapunov functional and whether any `b` evaluation fell
/// outside the entropy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    pub value: f64,
    pub extrapolated: bool,
}

/// Face-difference energy `sum_k ((f_{k+1} - f_k)/h)^2 h`.
pub fn face_energy(f: &[f64], h: f64) -> f64 {
    compensated_sum(f.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0]) / h))
}

/// `h sum [b(u) - u v] + 1/2 sum_faces |dv/h|^2 h`.
pub fn lyapunov(state: &State, profile: &EntropyProfile, grid: &GridSpec) -> Result<LyapunovValue> {
    lyapunov_weighted(state, profile, 1.0, 1.0, grid)
}

/// `h sum [b(u) - chi u v] + (chi D / 2) sum_faces |dv/h|^2 h`.
///
/// For `gamma = 0` this is nonincreasing along solutions with
/// `d/dt <= -chi eps |v_t|^2` and bounded below by `-chi M^2 / (2D)`;
/// with `chi = D = 1` it is the usual functional.
pub fn lyapunov_weighted(state: &State, profile: &EntropyProfile, chi: f64, d: f64, grid: &GridSpec) -> Result<LyapunovValue> {
    state.u.check_grid(grid)?;
    state.v.check_grid(grid)?;
    let h = grid.h();
    let mut extrapolated = false;
    let mut terms = Vec::with_capacity(state.u.len());
    for (i, (&u, &v)) in state.u.iter().zip(state.v.iter()).enumerate() {
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::NumericState { field: "u", index: i });
        }
        let (b, flag) = profile.b_extended(u);
        extrapolated |= flag;
        terms.push(b - chi * u * v);
    }
    let value = h * compensated_sum(terms) + 0.5 * chi * d * face_energy(&state.v, h);
    Ok(LyapunovValue { value, extrapolated })
}

/// Lower bound `-chi M^2 / (2D)` of [`lyapunov_weighted`].
pub fn lyapunov_floor(params: &Params) -> f64 {
    -params.chi * params.mass * params.mass / (2.0 * params.d)
}

/// `(1/q) int_0^1 |U|^q` with `U` the piecewise-linear interpolant of the
/// cumulative mass at the cell edges, integrated exactly on each cell.
pub fn moment_l(state: &State, q: MomentConfig, grid: &GridSpec) -> Result<f64> {
    let u_cum = cumulative_integral(&state.u, grid)?;
    Ok(moment_of_cumulative(&u_cum, q.q(), grid.h()))
}

pub(crate) fn moment_of_cumulative(u_cum: &[f64], q: f64, h: f64) -> f64 {
    let mut left = 0.0;
    let mut parts = Vec::with_capacity(u_cum.len());
    for &right in u_cum {
        parts.push(power_integral(left, right, q, h));
        left = right;
    }
    compensated_sum(parts) / q
}

/// `int |l + (r - l) s|^q` over a cell of width `h`.
fn power_integral(l: f64, r: f64, q: f64, h: f64) -> f64 {
    if l == r {
        return h * l.abs().powf(q);
    }
    if l.signum() * r.signum() < 0.0 {
        let s = l / (l - r);
        return power_integral(l, 0.0, q, s * h) + power_integral(0.0, r, q, (1.0 - s) * h);
    }
    let (a, b) = (l.abs(), r.abs());
    let scale = a.max(b);
    if (b - a).abs() < 1e-3 * scale {
        // Nearly constant: Simpson avoids the cancellation below.
        let m = 0.5 * (a + b);
        return h * (a.powf(q) + 4.0 * m.powf(q) + b.powf(q)) / 6.0;
    }
    h * (b.powf(q + 1.0) - a.powf(q + 1.0)) / ((q + 1.0) * (b - a))
}

/// `(h sum |f|^p)^(1/p)`.
pub fn lp_norm(f: &[f64], p: f64, grid: &GridSpec) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InputDomain {
            what: "Lebesgue exponent p",
            value: p,
            expected: "finite and >= 1",
        });
    }
    let s = grid.h() * compensated_sum(f.iter().map(|x| x.abs().powf(p)));
    Ok(s.powf(1.0 / p))
}

/// `int (u+1) log(u+1)`.
pub fn llogl(state: &State, grid: &GridSpec) -> f64 {
    grid.h() * compensated_sum(state.u.iter().map(|&u| (u + 1.0) * u.ln_1p()))
}

/// `int |(log(1+u))_x|^2` by face differences.
pub fn grad_log_energy(state: &State, grid: &GridSpec) -> f64 {
    let logs: Vec<f64> = state.u.iter().map(|u| u.ln_1p()).collect();
    face_energy(&logs, grid.h())
}

/// `|v_t|_2` with `v_t` from the assembled right-hand side.
pub fn vt_l2(state: &State, params: &Params, grid: &GridSpec) -> Result<f64> {
    let rate = assemble_v_rhs(state, params, grid)?;
    lp_norm(&rate, 2.0, grid)
}

/// One sampled row of monitored quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Largest step taken since the previous row.
    pub dt: f64,
    pub mass: f64,
    pub v_mean: f64,
    pub u_max: f64,
    pub lambda: f64,
    pub lambda_extrapolated: bool,
    pub l_q: f64,
    pub l2: f64,
    pub l3: f64,
    /// `|u + 1|_3`.
    pub l3_shifted: f64,
    pub llogl: f64,
    pub grad_log_energy: f64,
    pub vt_l2: f64,
    /// `L + lambda + M^2/2`.
    pub phi: f64,
}

/// Configuration of the per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub profile: EntropyProfile,
    pub moment: MomentConfig,
}

impl Diagnostics {
    pub fn new(profile: EntropyProfile, moment: MomentConfig) -> Self {
        Self { profile, moment }
    }

    pub fn record(&self, state: &State, dt: f64, params: &Params, grid: &GridSpec) -> Result<DiagnosticsRecord> {
        let lambda = lyapunov_weighted(state, &self.profile, params.chi, params.d, grid)?;
        let l_q = moment_l(state, self.moment, grid)?;
        let shifted: Vec<f64> = state.u.iter().map(|u| u + 1.0).collect();
        Ok(DiagnosticsRecord {
            t: state.t,
            dt,
            mass: state.mass(grid),
            v_mean: state.v_mean(grid),
            u_max: state.u.max(),
            lambda: lambda.value,
            lambda_extrapolated: lambda.extrapolated,
            l_q,
            l2: lp_norm(&state.u, 2.0, grid)?,
            l3: lp_norm(&state.u, 3.0, grid)?,
            l3_shifted: lp_norm(&shifted, 3.0, grid)?,
            llogl: llogl(state, grid),
            grad_log_energy: grad_log_energy(state, grid),
            vt_l2: vt_l2(state, params, grid)?,
            phi: l_q + lambda.value + 0.5 * params.mass * params.mass,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DissipationViolation {
    /// `(lambda_{k+1} - lambda_k)/dt` exceeded its bound between rows `k` and `k+1`.
    Slope { index: usize, slope: f64, bound: f64 },
    /// `lambda_k` fell below the lower bound.
    Floor { index: usize, lambda: f64, floor: f64 },
}

/// Checks `d/dt lambda <= -chi eps |v_t|^2` between consecutive rows (with
/// tolerance `c_tol (1 + |lambda_k|) dt`) and `lambda >= -chi M^2 / (2D)`.
pub fn dissipation_check(rows: &[DiagnosticsRecord], params: &Params, c_tol: f64) -> Vec<DissipationViolation> {
    let floor = lyapunov_floor(params);
    let mut out = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        if row.lambda < floor - 1e-8 {
            out.push(DissipationViolation::Floor {
                index: k,
                lambda: row.lambda,
                floor,
            });
        }
    }
    for (k, w) in rows.windows(2).enumerate() {
        let span = w[1].t - w[0].t;
        if span <= 0.0 {
            continue;
        }
        let slope = (w[1].lambda - w[0].lambda) / span;
        let vt2 = w[0].vt_l2.powi(2).min(w[1].vt_l2.powi(2));
        let bound = -params.chi * params.eps * vt2 + c_tol * (1.0 + w[0].lambda.abs()) * w[1].dt;
        if slope > bound {
            out.push(DissipationViolation::Slope { index: k + 1, slope, bound });
        }
    }
    out
}

/// Trapezoidal `int |v_t|_2^2 dt` over the samples.
pub fn vt_l2_time_integral(rows: &[DiagnosticsRecord]) -> f64 {
    compensated_sum(
        rows.windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].vt_l2.powi(2) + w[1].vt_l2.powi(2))),
    )
}

/// Cumulative version of [`vt_l2_time_integral`], one entry per row.
pub fn vt_l2_running_integral(rows: &[DiagnosticsRecord]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(rows.len());
    out.push(0.0);
    for w in rows.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (w[0].vt_l2.powi(2) + w[1].vt_l2.powi(2));
        out.push(acc);
    }
    out
}
