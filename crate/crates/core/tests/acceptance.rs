//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`). The process exits
//! non-zero on failures only when `KS1D_ACCEPTANCE_STRICT=1`.

use std::f64::consts::{E, PI};
use std::time::Instant;

use ks1d_core::certificate::{
    blowup_initial_data, concave_majorant, monitor_phi, sample_tail_function, search_mass_threshold,
    SearchOutcome, TailDecay,
};
use ks1d_core::diagnostics::{dissipation_check, lyapunov_floor, moment_l, vt_l2_running_integral, DEFAULT_C_TOL};
use ks1d_core::inequality::{
    calibrate_gn, counterexample_family, counterexample_sweep, fourier_corpus, log_grid_decreasing,
    shifted_density_corpus, sobolev_embedding_check, verify_exp_embedding, verify_llogl_interpolation,
    CORPUS_CELLS, GN_CALIBRATION_SAMPLES, GN_CALIBRATION_SEED, GN_CONSTANT, GN_RATIO_MAX,
};
use ks1d_core::quad::CellQuadrature;
use ks1d_core::timestepper::{self, BlowupReason};
use ks1d_core::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUITE_SEED: u64 = 0x0acc_e97a;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

struct RunRecord {
    label: String,
    mass: f64,
    steps: usize,
    drift: f64,
    v_mean: f64,
    clips: usize,
}

impl RunRecord {
    fn of(label: impl Into<String>, tr: &Trajectory, mass: f64) -> Self {
        let drift = tr
            .rows
            .iter()
            .map(|r| (r.mass - mass).abs() / mass)
            .fold(0.0, f64::max);
        let v_mean = tr.rows.iter().map(|r| r.v_mean.abs()).fold(0.0, f64::max);
        Self {
            label: label.into(),
            mass,
            steps: tr.stats.accepted,
            drift,
            v_mean,
            clips: tr.stats.positivity_clips,
        }
    }
}

#[derive(Clone, Copy)]
struct RunSpec {
    alpha: f64,
    chi: f64,
    eps: f64,
    n: usize,
    t_end: f64,
    samples: usize,
    q: f64,
}

fn simulate(spec: RunSpec, initial: State, controller: StepController, blowup: BlowupCriteria) -> (Trajectory, Params) {
    let model = DiffusionModel::power_law(spec.alpha).expect("alpha");
    let profile = EntropyProfile::new(&model).expect("entropy");
    let diagnostics = Diagnostics::new(profile, MomentConfig::new(spec.q).expect("q"));
    let grid = GridSpec::new(spec.n).expect("grid");
    let mass = initial.u.integral(&grid);
    let params = Params::new(spec.chi, spec.eps, 1.0, 0.0, mass).expect("params");
    let setup = RunSetup {
        params,
        model: &model,
        grid,
        controller,
        blowup,
        diagnostics: &diagnostics,
        t_end: spec.t_end,
        sample_cadence: spec.t_end / spec.samples as f64,
    };
    (timestepper::run(&initial, &setup).expect("run"), params)
}

fn cosine_data(mass: f64, n: usize) -> State {
    let g = GridSpec::new(n).unwrap();
    State::new(
        0.0,
        CellField::from_centers(&g, |x| mass * (1.0 + 0.5 * (PI * x).cos())),
        CellField::zeros(&g),
    )
}

fn sup_over(rows: &[DiagnosticsRecord], lo: f64, hi: f64, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    rows.iter()
        .filter(|r| r.t >= lo && r.t <= hi)
        .map(f)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn fixed_point(runs: &mut Vec<RunRecord>) -> Line {
    let (n, mass, dt) = (128, 2.0, 1e-3);
    let g = GridSpec::new(n).unwrap();
    let init = State::new(0.0, CellField::constant(&g, mass), CellField::zeros(&g));
    let spec = RunSpec { alpha: 0.5, chi: 1.0, eps: 1.0, n, t_end: 1000.0 * dt, samples: 10, q: 3.0 };
    let (tr, _) = simulate(spec, init, StepController::fixed(dt), BlowupCriteria::default());
    let du = tr.final_state.u.iter().map(|x| (x - mass).abs()).fold(0.0, f64::max);
    let dv = tr.final_state.v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    runs.push(RunRecord::of("fixed point", &tr, mass));
    Line {
        id: "2",
        pass: tr.stats.accepted >= 1000 && du <= 1e-14 && dv <= 1e-14,
        detail: format!("{} steps, max|u-M| = {du:.2e}, max|v| = {dv:.2e}", tr.stats.accepted),
    }
}

fn heat_limit(runs: &mut Vec<RunRecord>) -> Line {
    let start = Instant::now();
    let mass = 2.0;
    let t_end = 0.1;
    let mut errors = Vec::new();
    for (n, dt) in [(64usize, 1e-3), (128, 2.5e-4), (256, 6.25e-5)] {
        let g = GridSpec::new(n).unwrap();
        let init = State::new(0.0, CellField::from_centers(&g, |x| mass + (PI * x).cos()), CellField::zeros(&g));
        let spec = RunSpec { alpha: 0.0, chi: 0.0, eps: 1.0, n, t_end, samples: 1, q: 3.0 };
        let (tr, _) = simulate(spec, init, StepController::fixed(dt), BlowupCriteria::default());
        let decay = (-PI * PI * t_end).exp();
        let err = g
            .centers()
            .zip(tr.final_state.u.iter())
            .map(|(x, u)| (u - mass - decay * (PI * x).cos()).abs())
            .fold(0.0, f64::max);
        errors.push(err);
        runs.push(RunRecord::of(format!("heat n={n}"), &tr, mass));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let elapsed = start.elapsed().as_secs_f64();
    Line {
        id: "3",
        pass: orders.iter().all(|&p| p >= 1.9) && elapsed < 10.0,
        detail: format!(
            "Linf errors {:.3e} {:.3e} {:.3e}, orders {:.3} {:.3}, {elapsed:.2} s",
            errors[0], errors[1], errors[2], orders[0], orders[1]
        ),
    }
}

fn liapunov(runs: &mut Vec<RunRecord>) -> Line {
    let spec = RunSpec { alpha: 0.5, chi: 1.0, eps: 1.0, n: 256, t_end: 20.0, samples: 1000, q: 3.0 };
    let (tr, params) = simulate(spec, cosine_data(3.0, spec.n), StepController::default(), BlowupCriteria::default());
    let violations = dissipation_check(&tr.rows, &params, DEFAULT_C_TOL);
    let floor = lyapunov_floor(&params);
    let min_lambda = tr.rows.iter().map(|r| r.lambda).fold(f64::INFINITY, f64::min);
    let running = vt_l2_running_integral(&tr.rows);
    let total = *running.last().unwrap();
    let k = tr.rows.iter().position(|r| r.t >= 0.9 * spec.t_end).unwrap();
    let tail = if total > 0.0 { (total - running[k]) / total } else { 0.0 };
    runs.push(RunRecord::of("liapunov", &tr, params.mass));
    Line {
        id: "4",
        pass: tr.outcome.is_bounded() && violations.is_empty() && min_lambda >= floor - 1e-8 && tail < 0.05,
        detail: format!(
            "{:?}, {} dissipation violations, min lambda {min_lambda:.4} (floor {floor:.4}), \
             int |v_t|^2 = {total:.4e} with final-10% share {tail:.2e}",
            tr.outcome,
            violations.len()
        ),
    }
}

fn subcritical_grid(runs: &mut Vec<RunRecord>) -> Line {
    let start = Instant::now();
    let cases: Vec<(f64, f64)> = [0.0, 0.5, 0.9]
        .iter()
        .flat_map(|&a| [1.0, 5.0, 10.0].map(move |m| (a, m)))
        .collect();
    let results: Vec<(f64, f64, Trajectory, Params)> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .map(|&(alpha, mass)| {
                s.spawn(move || {
                    let spec = RunSpec { alpha, chi: 1.0, eps: 1.0, n: 256, t_end: 50.0, samples: 1000, q: 3.0 };
                    let (tr, p) = simulate(spec, cosine_data(mass, spec.n), StepController::default(), BlowupCriteria::default());
                    (alpha, mass, tr, p)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread")).collect()
    });
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (alpha, mass, tr, p) in &results {
        let first = sup_over(&tr.rows, 0.0, 25.0, |r| r.u_max);
        let second = sup_over(&tr.rows, 25.0, 50.0, |r| r.u_max);
        let ratio = second / first;
        worst = worst.max(ratio);
        pass &= tr.outcome.is_bounded() && ratio <= 1.05;
        if !tr.outcome.is_bounded() {
            parts.push(format!("alpha={alpha} M={mass}: {:?}", tr.outcome));
        }
        runs.push(RunRecord::of(format!("subcritical alpha={alpha} M={mass}"), tr, p.mass));
    }
    Line {
        id: "5",
        pass,
        detail: format!(
            "9 runs, worst late/early sup u_max ratio {worst:.4}{}, {:.1} s",
            if parts.is_empty() { String::new() } else { format!("; {}", parts.join("; ")) },
            start.elapsed().as_secs_f64()
        ),
    }
}

fn critical(runs: &mut Vec<RunRecord>) -> Line {
    let spec = RunSpec { alpha: 1.0, chi: 1.0, eps: 1.0, n: 256, t_end: 50.0, samples: 1000, q: 3.0 };
    let (tr, p) = simulate(spec, cosine_data(0.9, spec.n), StepController::default(), BlowupCriteria::default());
    let half = 0.5 * spec.t_end;
    let ratio = |f: fn(&DiagnosticsRecord) -> f64| sup_over(&tr.rows, half, spec.t_end, f) / sup_over(&tr.rows, 0.0, half, f);
    let (ru, rl, r3) = (ratio(|r| r.u_max), ratio(|r| r.llogl), ratio(|r| r.l3_shifted));
    runs.push(RunRecord::of("critical", &tr, p.mass));
    Line {
        id: "6",
        pass: tr.outcome.is_bounded() && ru <= 1.05 && rl <= 1.05 && r3 <= 1.05,
        detail: format!(
            "M = {:.4} < {}, {:?}, late/early sup ratios: u_max {ru:.4}, llogl {rl:.4}, |u+1|_3 {r3:.4}",
            p.mass,
            inequality::critical_mass_threshold(1.0).unwrap(),
            tr.outcome
        ),
    }
}

fn threshold() -> (f64, bool, f64) {
    let model = DiffusionModel::power_law(2.0).unwrap();
    let profile = EntropyProfile::new(&model).unwrap();
    let search = search_mass_threshold(5.0, &model, &profile, 1.5, 1e4).expect("search");
    match search.outcome {
        SearchOutcome::Found { m0, monotone, .. } => {
            let up = certificate::certify(m0 * 1.01, 5.0, &model, &profile).unwrap().certified;
            let down = certificate::certify(m0 * 0.99, 5.0, &model, &profile).unwrap().certified;
            (m0, monotone, if up && !down { 1.0 } else { 0.0 })
        }
        SearchOutcome::Inconclusive { .. } => (f64::NAN, false, 0.0),
    }
}

fn blowup(m0: f64, runs: &mut Vec<RunRecord>) -> Vec<Line> {
    let q = 5.0;
    let eps = m0.powf(1.0 - q);
    let model = DiffusionModel::power_law(2.0).unwrap();
    let envelope = ConcaveEnvelope::for_model(&model).unwrap();
    let controller = StepController {
        dt_init: 1e-6,
        ..StepController::default()
    };
    let criteria = BlowupCriteria {
        collapse_fraction: Some(0.5),
        ..BlowupCriteria::default()
    };
    let mut outcomes = Vec::new();
    for n in [512usize, 1024] {
        let g = GridSpec::new(n).unwrap();
        let init = blowup_initial_data(m0, &g).unwrap();
        let spec = RunSpec { alpha: 2.0, chi: 1.0, eps, n, t_end: 1.0, samples: 1000, q };
        let (tr, p) = simulate(spec, init, controller, criteria);
        let early: Vec<DiagnosticsRecord> = tr.rows.iter().take_while(|r| r.u_max <= 1e3).cloned().collect();
        let monitor = monitor_phi(&early, &envelope, q, p.mass, eps, DEFAULT_C_TOL).unwrap();
        runs.push(RunRecord::of(format!("blowup n={n}"), &tr, p.mass));
        outcomes.push((n, tr.outcome, monitor.violations.len(), early.len()));
    }
    let describe = |o: &Outcome| match o {
        Outcome::NumericalBlowup { t_est, u_max_final, reason } => {
            let why = match reason {
                BlowupReason::Threshold => "threshold",
                BlowupReason::StepCollapse => "step collapse",
                BlowupReason::MassCollapse => "mass collapse",
            };
            format!("blowup at t = {t_est:.5} ({why}, u_max {u_max_final:.1})")
        }
        other => format!("{other:?}"),
    };
    let all_blowup = outcomes.iter().all(|o| o.1.is_blowup());
    let u_max: Vec<f64> = outcomes
        .iter()
        .map(|o| match o.1 {
            Outcome::NumericalBlowup { u_max_final, .. } => u_max_final,
            _ => 0.0,
        })
        .collect();
    let times: Vec<f64> = outcomes
        .iter()
        .map(|o| match o.1 {
            Outcome::NumericalBlowup { t_est, .. } => t_est,
            _ => f64::NAN,
        })
        .collect();
    let change = (times[1] - times[0]).abs() / times[0];
    vec![
        Line {
            id: "7a",
            pass: all_blowup,
            detail: format!(
                "M0 = {m0:.9}, eps = M0^-4; n=512: {}; n=1024: {}",
                describe(&outcomes[0].1),
                describe(&outcomes[1].1)
            ),
        },
        Line {
            id: "7b",
            pass: u_max.iter().all(|&u| u >= 1e6),
            detail: format!(
                "final u_max {:.1} / {:.1} against 1e6; a cell average cannot exceed M*n = {:.0} / {:.0}",
                u_max[0],
                u_max[1],
                m0 * 512.0,
                m0 * 1024.0
            ),
        },
        Line {
            id: "7c",
            pass: change.is_finite() && change <= 0.25,
            detail: format!("blowup time {:.5} -> {:.5}, relative change {change:.2e}", times[0], times[1]),
        },
        Line {
            id: "7d",
            pass: outcomes.iter().all(|o| o.2 == 0),
            detail: outcomes
                .iter()
                .map(|o| format!("n={}: {} violations over {} rows with u_max <= 1e3", o.0, o.2, o.3))
                .collect::<Vec<_>>()
                .join("; "),
        },
    ]
}

fn zero_envelope_threshold() -> (f64, f64) {
    let mut c = Certifier::with_envelope(ConcaveEnvelope::zero(), EntropyProfile::vanishing(), 5.0).unwrap();
    c.grid_policy.base = 1 << 21;
    let discrete = c.search_threshold(1.5, 10.0, 1e-10).unwrap().m0().unwrap_or(f64::NAN);
    // 1.05 M Phi0 - M^6/30 with Phi0 = M^4/55 + M/3 + M^2/2
    let f = |m: f64| 1.05 * m * (m.powi(4) / 55.0 + m / 3.0 + 0.5 * m * m) - m.powi(6) / 30.0;
    let (mut lo, mut hi) = (1.5f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (discrete, 0.5 * (lo + hi))
}

fn paper_quadrature() -> (Line, String) {
    let g = GridSpec::new(4096).unwrap();
    let gl = CellQuadrature::new(10);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for mass in [2.0, 10.0] {
        let x0 = 1.0 - 1.0 / mass;
        let u0 = |x: f64| if x < x0 { 0.0 } else { 2.0 * mass.powi(3) * (x - x0) };
        let v0 = |x: f64| mass * x - 0.5 * mass;
        let int_u = gl.over_grid(&g, &[x0], u0);
        let int_u2 = gl.over_grid(&g, &[x0], |x| u0(x) * u0(x));
        let v_h1 = gl.over_grid(&g, &[], |x| v0(x) * v0(x) + mass * mass);
        let errs = [
            (int_u - mass).abs() / mass,
            (int_u2 - 4.0 / 3.0 * mass.powi(3)).abs() / (4.0 / 3.0 * mass.powi(3)),
            (v_h1 - 13.0 / 12.0 * mass * mass).abs() / (13.0 / 12.0 * mass * mass),
        ];
        worst = errs.iter().copied().fold(worst, f64::max);
        parts.push(format!("M={mass}: rel errors {:.1e} {:.1e} {:.1e}", errs[0], errs[1], errs[2]));
    }

    let mut log = Vec::new();
    for (mass, q) in [(2.0f64, 3.0f64), (2.0, 5.0), (10.0, 5.0)] {
        let x0 = 1.0 - 1.0 / mass;
        let oracle = gl.over_grid(&g, &[x0], |x| {
            if x < x0 {
                0.0
            } else {
                (mass.powi(3) * (x - x0) * (x - x0)).powf(q)
            }
        }) / q;
        let state = blowup_initial_data(mass, &g).unwrap();
        let code = moment_l(&state, MomentConfig::new(q).unwrap(), &g).unwrap();
        let plain = mass.powf(q - 1.0) / (q * (2.0 * q + 1.0));
        let stated = 2f64.powf(q) * plain;
        log.push(format!(
            "L(0) at M={mass}, q={q}: quadrature {oracle:.10}, code {code:.10}, M^(q-1)/(q(2q+1)) = {plain:.10}, \
             2^q M^(q-1)/(q(2q+1)) = {stated:.10}"
        ));
    }
    log.push("resolved constant: L(0) = M^(q-1)/(q(2q+1)), without the factor 2^q".into());
    (
        Line {
            id: "9",
            pass: worst <= 1e-8,
            detail: parts.join("; "),
        },
        log.join("\n            "),
    )
}

fn lemma4() -> Line {
    let g = GridSpec::new(4096).unwrap();
    let r = counterexample_family(1.0, 1.0, &g).unwrap();
    let e_grad = (r.grad_energy_quadrature - 2.0).abs();
    let e_lhs = (r.lhs_quadrature - 7.0 / 6.0).abs();
    let sweep = counterexample_sweep(1.0 / 24.0, 1.0, 0.0, &log_grid_decreasing(1e-2, 1e-4, 21)).unwrap();
    let slope = sweep.fitted_exponent.unwrap_or(f64::NAN);
    Line {
        id: "10",
        pass: e_grad <= 1e-10 && e_lhs <= 1e-10 && sweep.violated && (slope - 1.0).abs() <= 0.05,
        detail: format!(
            "|int m_x^2 - 2| = {e_grad:.1e}, |int e^2m - 7/6| = {e_lhs:.1e}, delta=1/24 violated = {}, \
             fitted exponent {slope:.4}",
            sweep.violated
        ),
    }
}

fn proposition5() -> Line {
    let g = GridSpec::new(CORPUS_CELLS).unwrap();
    let corpus = fourier_corpus(SUITE_SEED, 1000, g);
    let mut exp_viol = 0;
    let mut min_margin = f64::INFINITY;
    for m in &corpus {
        for nu in [0.1, 1.0, 10.0] {
            let r = verify_exp_embedding(m, nu).unwrap();
            exp_viol += usize::from(!r.ok);
            min_margin = min_margin.min(r.margin / r.rhs);
        }
    }
    let sob_viol = corpus.iter().filter(|m| !sobolev_embedding_check(m).ok).count();
    Line {
        id: "11",
        pass: exp_viol == 0 && sob_viol == 0,
        detail: format!(
            "3000 exponential checks: {exp_viol} violations (min relative margin {min_margin:.3e}); \
             1000 sup-norm checks: {sob_viol} violations"
        ),
    }
}

fn proposition6() -> Line {
    let g = GridSpec::new(CORPUS_CELLS).unwrap();
    let ratio = calibrate_gn(GN_CALIBRATION_SEED, GN_CALIBRATION_SAMPLES, g);
    let corpus = shifted_density_corpus(SUITE_SEED, 200, g);
    let (mut display, mut mass_sub, mut rem_sub, mut other) = (0, 0, 0, 0);
    for w in &corpus {
        for n in [E * E, 10.0, 100.0] {
            let r = verify_llogl_interpolation(w, n, GN_CONSTANT).unwrap();
            display += usize::from(!r.display.ok);
            mass_sub += usize::from(!r.cutoff_mass.ok);
            rem_sub += usize::from(!r.remainder.ok);
            other += usize::from(!(r.gagliardo_nirenberg.ok && r.cutoff_energy.ok));
        }
    }
    let calibrated = ratio <= GN_RATIO_MAX && GN_RATIO_MAX - ratio <= 1e-3;
    Line {
        id: "12",
        pass: calibrated && display == 0 && mass_sub == 0 && rem_sub == 0,
        detail: format!(
            "recomputed GN ratio {ratio:.9} (pinned {GN_RATIO_MAX}, K = {GN_CONSTANT:.6}); 600 checks: display {display}, \
             cutoff-mass {mass_sub}, remainder {rem_sub}, other sub-steps {other} violations"
        ),
    }
}

fn random_table(rng: &mut ChaCha8Rng) -> DiffusionModel {
    let k = rng.random_range(4..=12);
    let mut r: Vec<f64> = (1..k).map(|_| 10f64.powf(rng.random_range(-2.0..=2.0))).collect();
    r.push(0.0);
    r.sort_by(f64::total_cmp);
    r.dedup();
    let a: Vec<f64> = r.iter().map(|_| 10f64.powf(rng.random_range(-2.0..=0.5))).collect();
    let p = rng.random_range(1.3..=4.0);
    DiffusionModel::Tabulated(TabulatedDiffusion::new(r, a, p).unwrap())
}

fn chord_oracle(pts: &[(f64, f64)]) -> Vec<f64> {
    let peak = pts
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if p.1 > pts[b].1 { i } else { b });
    let flat: Vec<(f64, f64)> = pts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| if i >= peak { (x, pts[peak].1) } else { (x, y) })
        .collect();
    (0..flat.len())
        .map(|k| {
            let mut best = flat[k].1;
            for i in 0..=k {
                for j in k..flat.len() {
                    if i < j {
                        let w = (flat[k].0 - flat[i].0) / (flat[j].0 - flat[i].0);
                        best = best.max(flat[i].1 + w * (flat[j].1 - flat[i].1));
                    }
                }
            }
            best
        })
        .collect()
}

fn envelopes() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let (mut below, mut convex, mut beta_up) = (0, 0, 0);
    for _ in 0..100 {
        let model = random_table(&mut rng);
        let samples = sample_tail_function(&model).unwrap();
        let env = concave_majorant(&samples, TailDecay { exponent: model.tail_exponent() }).unwrap();
        below += samples
            .iter()
            .filter(|&&(x, g)| env.eval(x) < g - 1e-12 * (1.0 + g))
            .count();
        let s = env.slopes();
        convex += s.windows(2).filter(|w| w[1] > w[0] + 1e-12 * (1.0 + w[0].abs())).count();
        let top = samples.last().unwrap().0 * 10.0;
        let betas: Vec<f64> = (0..1000)
            .map(|i| env.beta(1e-6 * (top / 1e-6).powf(i as f64 / 999.0)).unwrap())
            .collect();
        beta_up += betas.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
    }

    let alpha2 = DiffusionModel::power_law(2.0).unwrap();
    let root: Vec<(f64, f64)> = (0..=200).map(|i| (i as f64 * 0.1, (i as f64 * 0.1).sqrt())).collect();
    let mut exact = true;
    for samples in [sample_tail_function(&alpha2).unwrap(), root] {
        let env = concave_majorant(&samples, TailDecay { exponent: 2.0 }).unwrap();
        exact &= env
            .breakpoints()
            .all(|(x, y)| samples.iter().any(|&(sx, sy)| sx == x && sy == y));
    }
    let ramp: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 0.05, (i as f64 * 0.05).min(1.0))).collect();
    let env = concave_majorant(&ramp, TailDecay { exponent: 2.0 }).unwrap();
    exact &= env.breakpoints().all(|(x, y)| y == x.min(1.0));

    let mut hull_err = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(3..=200);
        let mut xs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=10.0)).collect();
        xs.push(0.0);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| (x, if x == 0.0 { 0.0 } else { rng.random_range(0.0..=1.0) }))
            .collect();
        let env = concave_majorant(&pts, TailDecay { exponent: 2.0 }).unwrap();
        let oracle = chord_oracle(&pts);
        for (&(x, _), o) in pts.iter().zip(&oracle) {
            hull_err = hull_err.max((env.eval(x) - o).abs() / (1.0 + o.abs()));
        }
    }
    Line {
        id: "13",
        pass: below == 0 && convex == 0 && beta_up == 0 && exact && hull_err <= 1e-12,
        detail: format!(
            "100 random tables: {below} samples above B, {convex} slope increases, {beta_up} beta increases; \
             concave inputs reproduced exactly: {exact}; hull vs chord oracle max error {hull_err:.1e}"
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut runs = Vec::new();

    lines.push(fixed_point(&mut runs));
    lines.push(heat_limit(&mut runs));
    lines.push(liapunov(&mut runs));
    lines.push(subcritical_grid(&mut runs));
    lines.push(critical(&mut runs));
    let (m0, monotone, bracket) = threshold();
    lines.extend(blowup(m0, &mut runs));

    let (discrete, analytic) = zero_envelope_threshold();
    lines.push(Line {
        id: "8",
        pass: bracket == 1.0 && (discrete - analytic).abs() <= 1e-6,
        detail: format!(
            "alpha=2, q=5: M0 = {m0:.9} (monotone {monotone}), certified at 1.01 M0 and not at 0.99 M0: {}; \
             B = 0 model: M0 = {discrete:.9} vs analytic {analytic:.9} (diff {:.1e})",
            bracket == 1.0,
            (discrete - analytic).abs()
        ),
    });
    let (line9, l0_log) = paper_quadrature();
    lines.push(line9);
    lines.push(lemma4());
    lines.push(proposition5());
    lines.push(proposition6());
    lines.push(envelopes());

    let mut conservation = true;
    let mut worst = (0.0f64, String::new());
    let (mut v_worst, mut clips) = (0.0f64, 0);
    for r in &runs {
        let tol = 1e-12 * (r.steps as f64 / 1e4).max(1.0);
        conservation &= r.drift <= tol && r.v_mean <= 1e-10 && r.mass > 0.0;
        if r.drift > worst.0 {
            worst = (r.drift, format!("{} over {} steps", r.label, r.steps));
        }
        v_worst = v_worst.max(r.v_mean);
        clips += r.clips;
    }
    lines.insert(
        0,
        Line {
            id: "1",
            pass: conservation,
            detail: format!(
                "{} runs, worst relative mass drift {:.2e} ({}), max |mean v| {v_worst:.2e}, positivity clips {clips}",
                runs.len(),
                worst.0,
                worst.1
            ),
        },
    );
    lines.sort_by_key(|l| {
        let digits: String = l.id.chars().take_while(char::is_ascii_digit).collect();
        (digits.parse::<u32>().unwrap(), l.id.len(), l.id)
    });

    for l in &lines {
        println!("criterion {:<3} {}  {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
        if l.id == "9" {
            println!("            {l0_log}");
        }
    }
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {} of {} lines pass, failing: [{}], {:.1} s",
        lines.len() - failed.len(),
        lines.len(),
        failed.join(", "),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() && std::env::var("KS1D_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
