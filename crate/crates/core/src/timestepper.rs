//! Linearly implicit IMEX time stepping with adaptive step control and
//! blowup detection.
//!
//! One step of size `dt`:
//!
//! ```text
//! f     = u + dt * (upwind transport of u by chi v_x)
//! u_new = (I - dt L_{a(u_face)})^{-1} f
//! g     = v + dt (u_new - M + gamma v) / eps
//! v_new = (I - dt (D/eps) lap)^{-1} g
//! ```
//!
//! Face coefficients are frozen at the old state, so each field costs one
//! tridiagonal solve. Under `dt <= h / (2 max|chi v_x|)` every stage maps
//! nonnegative data to nonnegative data.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostics, DiagnosticsRecord};
use crate::diffusion::DiffusionModel;
use crate::discretization::{advective_flux, face_diffusivity, max_advective_speed, relative_residual, Tridiagonal};
use crate::error::{ensure_finite, Error, Result};
use crate::model::{compensated_sum, CellField, GridSpec, Params, State};

/// Largest accepted `||(I - dt L) x - f||_inf / (1 + ||f||_inf)`.
pub const SOLVER_TOLERANCE: f64 = 1e-10;
/// Negative entries of `u` with magnitude below this are clipped to zero.
pub const CLIP_TOLERANCE: f64 = 1e-13;
/// Largest factor by which the nominal step may grow after an accepted step.
pub const MAX_GROWTH: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Fraction of `h / max|chi v_x|` allowed per step; at most 1/2 keeps `u >= 0`.
    pub cfl_safety: f64,
    /// Largest relative change of `max u` targeted per step.
    pub growth_cap: f64,
    pub max_steps: usize,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 1e-2,
            cfl_safety: 0.4,
            growth_cap: 0.1,
            max_steps: 10_000_000,
        }
    }
}

impl StepController {
    /// Constant step `dt` (no adaptation beyond the CFL bound).
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            growth_cap: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InputDomain {
                    what,
                    value,
                    expected: "finite and > 0",
                })
            }
        };
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Validation(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InputDomain {
                what: "cfl_safety",
                value: self.cfl_safety,
                expected: "in (0, 1]",
            });
        }
        if !(self.growth_cap > 0.0) {
            return Err(Error::InputDomain {
                what: "growth_cap",
                value: self.growth_cap,
                expected: "> 0",
            });
        }
        if self.max_steps == 0 {
            return Err(Error::Validation("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Advective CFL limit `cfl_safety h / max|chi v_x|` (infinite without transport).
    pub fn cfl_limit(&self, state: &State, chi: f64, grid: &GridSpec) -> f64 {
        let speed = max_advective_speed(&state.v, chi, grid.h());
        if speed > 0.0 {
            self.cfl_safety * grid.h() / speed
        } else {
            f64::INFINITY
        }
    }
}

/// Why a step attempt was refused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rejection {
    Residual,
    Undershoot { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub dt_used: f64,
    pub u_max_before: f64,
    pub u_max_after: f64,
    pub solver_residual: f64,
    pub positivity_clips: usize,
    /// Factor applied to `u` to restore the pre-step mass (1 up to rounding).
    pub mass_correction: f64,
    pub accepted: bool,
    pub rejection: Option<Rejection>,
}

/// One IMEX step. The `v` source uses `params.mass` as `M`.
pub fn step(state: &State, dt: f64, params: &Params, model: &DiffusionModel, grid: &GridSpec) -> Result<(State, StepReport)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InputDomain {
            what: "dt",
            value: dt,
            expected: "finite and > 0",
        });
    }
    ensure_finite(&state.u, "u")?;
    ensure_finite(&state.v, "v")?;
    state.u.check_grid(grid)?;
    state.v.check_grid(grid)?;
    let h = grid.h();
    let n = grid.n_cells();
    let (u, v) = (&state.u[..], &state.v[..]);

    let transport = advective_flux(u, v, params.chi, h);
    let mut f = u.to_vec();
    for (k, &j) in transport.iter().enumerate() {
        f[k] -= dt * j / h;
        f[k + 1] += dt * j / h;
    }
    let u_system = Tridiagonal::implicit_diffusion(&face_diffusivity(u, model), dt, h);
    let mut u_new = u_system.solve(&f)?;
    ensure_finite(&u_new, "u")?;
    let mut residual = relative_residual(&u_system, &u_new, &f);

    let mut clips = 0;
    let mut rejection = None;
    for (i, x) in u_new.iter_mut().enumerate() {
        if *x < 0.0 {
            if *x > -CLIP_TOLERANCE {
                *x = 0.0;
                clips += 1;
            } else if rejection.is_none() {
                rejection = Some(Rejection::Undershoot { index: i, value: *x });
            }
        }
    }

    // The tridiagonal solve conserves mass only up to rounding, and with a
    // constant coefficient the rounding is biased. Rescale to the old mass.
    let mass_before = compensated_sum(u.iter().copied());
    let mass_after = compensated_sum(u_new.iter().copied());
    let mass_correction = if mass_after > 0.0 { mass_before / mass_after } else { 1.0 };
    if mass_correction != 1.0 {
        u_new.iter_mut().for_each(|x| *x *= mass_correction);
    }

    let g: Vec<f64> = (0..n)
        .map(|i| v[i] + dt * (u_new[i] - params.mass + params.gamma * v[i]) / params.eps)
        .collect();
    let v_system = Tridiagonal::implicit_diffusion(&vec![params.d / params.eps; n - 1], dt, h);
    let mut v_new = v_system.solve(&g)?;
    ensure_finite(&v_new, "v")?;
    residual = residual.max(relative_residual(&v_system, &v_new, &g));
    if params.gamma == 0.0 {
        let mean = compensated_sum(v_new.iter().copied()) / n as f64;
        v_new.iter_mut().for_each(|x| *x -= mean);
    }

    if rejection.is_none() && residual > SOLVER_TOLERANCE {
        rejection = Some(Rejection::Residual);
    }
    let u_max_after = u_new.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = StepReport {
        dt_used: dt,
        u_max_before: state.u.max(),
        u_max_after,
        solver_residual: residual,
        positivity_clips: clips,
        mass_correction,
        accepted: rejection.is_none(),
        rejection,
    };
    let next = State::new(
        state.t + dt,
        CellField::from_vec_unchecked(u_new),
        CellField::from_vec_unchecked(v_new),
    );
    Ok((next, report))
}

/// Next nominal step after an attempt of nominal size `dt_nominal`.
///
/// Accepted: `min(dt_max, CFL limit at `state`, dt_used * growth_cap / rel.
/// change of max u, 1.2 dt_nominal)`. Rejected: half the attempted step.
/// Never below `dt_min`.
pub fn adapt_dt(report: &StepReport, controller: &StepController, state: &State, chi: f64, grid: &GridSpec, dt_nominal: f64) -> f64 {
    let next = if report.accepted {
        let mut next = controller.dt_max.min(MAX_GROWTH * dt_nominal);
        next = next.min(controller.cfl_limit(state, chi, grid));
        let scale = report.u_max_before.abs().max(f64::MIN_POSITIVE);
        let change = (report.u_max_after - report.u_max_before).abs() / scale;
        if change > 0.0 {
            next = next.min(report.dt_used * controller.growth_cap / change);
        }
        next
    } else {
        0.5 * report.dt_used
    };
    next.max(controller.dt_min)
}

/// Blowup detection rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCriteria {
    /// Flag once `max u` reaches this value.
    pub threshold: f64,
    /// Flag after this many consecutive rejections at `dt_min`.
    pub rejection_window: usize,
    /// Optional: flag once a single cell holds this fraction of the total mass.
    pub collapse_fraction: Option<f64>,
}

impl Default for BlowupCriteria {
    fn default() -> Self {
        Self {
            threshold: 1e8,
            rejection_window: 5,
            collapse_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlowupReason {
    Threshold,
    StepCollapse,
    MassCollapse,
}

/// `Some(reason)` if the state or the step history indicates blowup.
pub fn detect_blowup(
    state: &State,
    dt: f64,
    consecutive_rejections: usize,
    controller: &StepController,
    criteria: &BlowupCriteria,
    grid: &GridSpec,
) -> Option<BlowupReason> {
    let u_max = state.u.max();
    if u_max >= criteria.threshold {
        return Some(BlowupReason::Threshold);
    }
    if dt <= controller.dt_min && consecutive_rejections >= criteria.rejection_window {
        return Some(BlowupReason::StepCollapse);
    }
    if let Some(fraction) = criteria.collapse_fraction {
        let mass = state.mass(grid);
        if mass > 0.0 && u_max * grid.h() >= fraction * mass {
            return Some(BlowupReason::MassCollapse);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Bounded { t_end: f64 },
    NumericalBlowup { t_est: f64, u_max_final: f64, reason: BlowupReason },
    StepLimit { steps: usize, t: f64 },
}

impl Outcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::NumericalBlowup { .. })
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Outcome::Bounded { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStatistics {
    pub accepted: usize,
    pub rejected: usize,
    pub positivity_clips: usize,
    pub max_residual: f64,
    /// Largest `|mass_correction - 1|` over accepted steps.
    pub max_mass_correction: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticsRecord>,
    pub final_state: State,
    pub outcome: Outcome,
    pub stats: StepStatistics,
}

/// Everything a run needs besides the initial state.
#[derive(Debug, Clone)]
pub struct RunSetup<'a> {
    pub params: Params,
    pub model: &'a DiffusionModel,
    pub grid: GridSpec,
    pub controller: StepController,
    pub blowup: BlowupCriteria,
    pub diagnostics: &'a Diagnostics,
    pub t_end: f64,
    /// Time between rows; the stepper lands exactly on every sample time.
    pub sample_cadence: f64,
}

/// Largest allowed `|h sum v0|`.
pub const V_MEAN_TOLERANCE: f64 = 1e-10;

/// Advances `initial` to `t_end`, numerical blowup or the step limit.
///
/// The `v` source uses the discrete mass of `initial`, which must agree with
/// `params.mass` to 1e-9 relative.
pub fn run(initial: &State, setup: &RunSetup<'_>) -> Result<Trajectory> {
    let grid = setup.grid;
    let controller = &setup.controller;
    setup.params.validate()?;
    controller.validate()?;
    initial.validate(&grid)?;
    if !(setup.t_end.is_finite() && setup.t_end >= 0.0) {
        return Err(Error::InputDomain {
            what: "t_end",
            value: setup.t_end,
            expected: "finite and >= 0",
        });
    }
    if !(setup.sample_cadence.is_finite() && setup.sample_cadence > 0.0) {
        return Err(Error::InputDomain {
            what: "sample_cadence",
            value: setup.sample_cadence,
            expected: "finite and > 0",
        });
    }
    let v_mean = initial.v_mean(&grid);
    if v_mean.abs() > V_MEAN_TOLERANCE {
        return Err(Error::Validation(format!(
            "initial v must have zero mean (|mean| <= {V_MEAN_TOLERANCE:e}), got {v_mean:e}"
        )));
    }
    let discrete_mass = initial.mass(&grid);
    if (discrete_mass - setup.params.mass).abs() > 1e-9 * setup.params.mass {
        return Err(Error::Validation(format!(
            "initial mass {discrete_mass} does not match params.mass {}",
            setup.params.mass
        )));
    }
    let params = setup.params.with_mass(discrete_mass);

    let mut state = initial.clone();
    let mut rows = vec![setup.diagnostics.record(&state, 0.0, &params, &grid)?];
    let mut stats = StepStatistics::default();
    let mut dt_nominal = controller.dt_init.min(controller.cfl_limit(&state, params.chi, &grid)).max(controller.dt_min);
    let mut dt_since_row = 0.0_f64;
    let mut sample_index = 1_u64;
    let mut consecutive_rejections = 0;
    let mut steps = 0;

    let outcome = loop {
        if state.t >= setup.t_end {
            break Outcome::Bounded { t_end: state.t };
        }
        if steps >= controller.max_steps {
            break Outcome::StepLimit { steps, t: state.t };
        }
        let next_sample = (sample_index as f64 * setup.sample_cadence).min(setup.t_end);
        let remaining = next_sample - state.t;
        // Land on the sample time rather than leave a sliver behind.
        let (dt, lands) = if dt_nominal >= remaining * (1.0 - 1e-12) {
            (remaining, true)
        } else {
            (dt_nominal, false)
        };
        steps += 1;
        let (mut next, report) = step(&state, dt, &params, setup.model, &grid)?;
        stats.max_residual = stats.max_residual.max(report.solver_residual);
        if report.accepted {
            if lands {
                next.t = next_sample;
            }
            stats.accepted += 1;
            stats.positivity_clips += report.positivity_clips;
            stats.max_mass_correction = stats.max_mass_correction.max((report.mass_correction - 1.0).abs());
            consecutive_rejections = 0;
            dt_since_row = dt_since_row.max(dt);
            dt_nominal = adapt_dt(&report, controller, &next, params.chi, &grid, dt_nominal.max(dt));
            state = next;
            if lands {
                rows.push(setup.diagnostics.record(&state, dt_since_row, &params, &grid)?);
                dt_since_row = 0.0;
                while (sample_index as f64) * setup.sample_cadence <= state.t * (1.0 + 1e-12) {
                    sample_index += 1;
                }
            }
            if let Some(reason) = detect_blowup(&state, dt_nominal, 0, controller, &setup.blowup, &grid) {
                break Outcome::NumericalBlowup {
                    t_est: state.t,
                    u_max_final: state.u.max(),
                    reason,
                };
            }
        } else {
            stats.rejected += 1;
            consecutive_rejections += 1;
            dt_nominal = adapt_dt(&report, controller, &state, params.chi, &grid, dt_nominal);
            if let Some(reason) = detect_blowup(&state, dt, consecutive_rejections, controller, &setup.blowup, &grid) {
                break Outcome::NumericalBlowup {
                    t_est: state.t,
                    u_max_final: state.u.max(),
                    reason,
                };
            }
        }
    };
    if rows.last().map(|r| r.t < state.t).unwrap_or(true) {
        rows.push(setup.diagnostics.record(&state, dt_since_row, &params, &grid)?);
    }
    Ok(Trajectory {
        rows,
        final_state: state,
        outcome,
        stats,
    })
}
