use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ks1d_core::certificate::{blowup_initial_data, certificate_a, monitor_phi, SearchOutcome, ThresholdSearch};
use ks1d_core::diagnostics::dissipation_check;
use ks1d_core::inequality::{
    counterexample_sweep, fourier_corpus, log_grid_decreasing, random_density, shifted_density_corpus,
    sobolev_embedding_check, verify_exp_embedding, verify_llogl_interpolation, verify_log_density_bound,
    CounterexampleSweep, InequalityReport, CORPUS_CELLS, GN_CONSTANT,
};
use ks1d_core::timestepper::{self, StepStatistics};
use ks1d_core::{
    BlowupCriteria, CellField, CertificateReport, Certifier, ConcaveEnvelope, Diagnostics, DiagnosticsRecord,
    DiffusionModel, EntropyProfile, GridSpec, MomentConfig, Outcome, Params, RunSetup, State, StepController,
    TabulatedDiffusion, Trajectory,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{InitialPreset, Scenario, ScenarioConfig, Suite};
use crate::CliError;

/// Trajectory CSV header, in column order.
pub const TRAJECTORY_COLUMNS: [&str; 14] = [
    "t",
    "dt",
    "mass",
    "v_mean",
    "u_max",
    "lambda",
    "L_q",
    "l2",
    "l3",
    "llogl",
    "grad_log_energy",
    "vt_l2",
    "phi",
    "a_of_phi",
];

/// `monitor_phi` covers rows up to this `u_max`.
pub const PHI_MONITOR_CEILING: f64 = 1e3;

/// Relative mass drift tolerated per 10^4 accepted steps.
pub const MASS_DRIFT_PER_1E4_STEPS: f64 = 1e-12;

#[derive(Debug, Clone, Default, Serialize)]
pub struct ViolationCounts {
    pub dissipation: usize,
    pub phi: usize,
    pub conservation: usize,
    pub positivity_clips: usize,
    pub inequalities: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.dissipation + self.phi + self.conservation + self.positivity_clips + self.inequalities
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: &'static str,
    pub outcome: Option<Outcome>,
    pub t_final: Option<f64>,
    pub steps: Option<StepStatistics>,
    pub mass: Option<f64>,
    pub eps: Option<f64>,
    /// `[min, max]` of every trajectory column over the sampled rows.
    pub extrema: BTreeMap<&'static str, [f64; 2]>,
    pub violations: ViolationCounts,
    pub certificate: Option<CertificateReport>,
    pub threshold: Option<f64>,
    pub lemma4: Option<CounterexampleSweep>,
    pub artifacts: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub config: ScenarioConfig,
}

impl RunSummary {
    fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario: config.scenario.name(),
            outcome: None,
            t_final: None,
            steps: None,
            mass: None,
            eps: None,
            extrema: BTreeMap::new(),
            violations: ViolationCounts::default(),
            certificate: None,
            threshold: None,
            lemma4: None,
            artifacts: Vec::new(),
            wall_time_s: 0.0,
            config: config.clone(),
        }
    }

    /// 0 on a clean run, 2 when a monitor flagged violations.
    pub fn exit_code(&self) -> i32 {
        if self.violations.total() > 0 {
            2
        } else {
            0
        }
    }
}

pub fn load_model(config: &ScenarioConfig) -> Result<DiffusionModel, CliError> {
    match (&config.diffusion_table, config.alpha) {
        (Some(path), _) => Ok(DiffusionModel::Tabulated(TabulatedDiffusion::from_csv_path(path)?)),
        (None, Some(alpha)) => Ok(DiffusionModel::power_law(alpha)?),
        (None, None) => Err(CliError::Usage("no diffusion given (alpha or diffusion_table)".into())),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Runs `config`, writing artifacts under `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut summary = RunSummary::new(config);
    match config.scenario {
        Scenario::Subcritical | Scenario::Critical | Scenario::Custom | Scenario::Blowup => {
            simulate(config, out_dir, &mut summary)?
        }
        Scenario::Certificate | Scenario::ThresholdScan => certificate(config, out_dir, &mut summary)?,
        Scenario::Inequalities => {
            let suite = config.suite.ok_or_else(|| CliError::Usage("inequalities need a suite".into()))?;
            inequalities(suite, config, out_dir, &mut summary)?
        }
    }
    summary.wall_time_s = start.elapsed().as_secs_f64();
    let path = out_dir.join("summary.json");
    summary.artifacts.push(path.clone());
    write_json(&path, &summary)?;
    Ok(summary)
}

fn certifier(config: &ScenarioConfig, model: &DiffusionModel) -> Result<Certifier, CliError> {
    let profile = EntropyProfile::new(model)?;
    Ok(Certifier::new(model, profile, config.q)?)
}

fn search(config: &ScenarioConfig, c: &Certifier) -> Result<ThresholdSearch, CliError> {
    Ok(c.search_threshold(config.search_min, config.search_max, 1e-10)?)
}

fn found_threshold(s: &ThresholdSearch) -> Result<f64, CliError> {
    match &s.outcome {
        SearchOutcome::Found { m0, .. } => Ok(*m0),
        SearchOutcome::Inconclusive { a_lo, a_hi } => Err(CliError::Usage(format!(
            "threshold search inconclusive: A = {a_lo} at search_min, {a_hi} at search_max"
        ))),
    }
}

fn certificate(config: &ScenarioConfig, out_dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let model = load_model(config)?;
    let mut c = certifier(config, &model)?;
    c.eps_override = config.eps;
    let (mass, trace) = match (config.scenario, config.mass) {
        (Scenario::Certificate, Some(m)) => (m, None),
        _ => {
            let s = search(config, &c)?;
            let m0 = found_threshold(&s);
            summary.threshold = m0.as_ref().ok().copied();
            let path = out_dir.join("threshold.json");
            write_json(&path, &s)?;
            summary.artifacts.push(path);
            (m0?, Some(s.trace))
        }
    };
    let mut report = c.certify(mass)?;
    report.m0_search_trace = trace;
    summary.mass = Some(mass);
    summary.eps = Some(report.eps_choice);
    let path = out_dir.join("certificate.json");
    write_json(&path, &report)?;
    summary.artifacts.push(path);
    summary.certificate = Some(report);
    Ok(())
}

fn read_initial_file(path: &Path, grid: &GridSpec) -> Result<State, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| CliError::Usage(e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "u" || &header[1] != "v" {
        return Err(CliError::Usage(format!("{}: expected header `u,v`", path.display())));
    }
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(e.to_string()))?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{} row {}: cannot parse `{s}`", path.display(), row + 1)))
        };
        u.push(parse(&record[0])?);
        v.push(parse(&record[1])?);
    }
    if u.len() != grid.n_cells() {
        return Err(CliError::Usage(format!(
            "{}: {} rows but n_cells = {}",
            path.display(),
            u.len(),
            grid.n_cells()
        )));
    }
    Ok(State::new(0.0, CellField::new(u)?, CellField::new(v)?))
}

fn initial_state(config: &ScenarioConfig, mass: Option<f64>, grid: &GridSpec) -> Result<State, CliError> {
    let need = || CliError::Usage("this initial preset needs a mass".into());
    Ok(match config.initial {
        InitialPreset::Constant => State::new(0.0, CellField::constant(grid, mass.ok_or_else(need)?), CellField::zeros(grid)),
        InitialPreset::Cosine => {
            let m = mass.ok_or_else(need)?;
            let a = config.amplitude;
            State::new(
                0.0,
                CellField::from_centers(grid, |x| m * (1.0 + a * (std::f64::consts::PI * x).cos())),
                CellField::zeros(grid),
            )
        }
        InitialPreset::Eq60 => blowup_initial_data(mass.ok_or_else(need)?, grid)?,
        InitialPreset::File => {
            let path = config
                .initial_file
                .as_ref()
                .ok_or_else(|| CliError::Usage("initial = file needs initial_file".into()))?;
            read_initial_file(path, grid)?
        }
    })
}

fn simulate(config: &ScenarioConfig, out_dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let model = load_model(config)?;
    let grid = GridSpec::new(config.n_cells)?;
    let blowup = config.scenario == Scenario::Blowup;

    let mut mass = config.mass;
    let envelope = if model.is_integrable() { Some(ConcaveEnvelope::for_model(&model)?) } else { None };
    if blowup {
        let c = certifier(config, &model)?;
        if mass.is_none() {
            let s = search(config, &c)?;
            let m0 = found_threshold(&s)?;
            summary.threshold = Some(m0);
            mass = Some(m0);
        }
        let mut c = c;
        c.eps_override = config.eps;
        let report = c.certify(mass.expect("mass set above"))?;
        let path = out_dir.join("certificate.json");
        write_json(&path, &report)?;
        summary.artifacts.push(path);
        summary.certificate = Some(report);
    }

    let initial = initial_state(config, mass, &grid)?;
    let measured = initial.u.integral(&grid);
    let eps = match config.eps {
        Some(e) => e,
        None if blowup => measured.powf(1.0 - config.q),
        None => 1.0,
    };
    let params = Params::new(config.chi, eps, config.d, config.gamma, measured)?;
    let profile = EntropyProfile::new(&model)?;
    let diagnostics = Diagnostics::new(profile, MomentConfig::new(config.q)?);
    let setup = RunSetup {
        params,
        model: &model,
        grid,
        controller: StepController {
            dt_init: config.dt_init,
            dt_min: config.dt_min,
            dt_max: config.dt_max,
            cfl_safety: config.cfl,
            growth_cap: config.growth_cap,
            max_steps: config.max_steps,
        },
        blowup: BlowupCriteria {
            threshold: config.blowup_threshold,
            collapse_fraction: config.collapse_fraction,
            ..BlowupCriteria::default()
        },
        diagnostics: &diagnostics,
        t_end: config.t_end,
        sample_cadence: config.sample_cadence,
    };
    let tr = timestepper::run(&initial, &setup)?;

    let a_of_phi: Vec<Option<f64>> = match &envelope {
        Some(env) => tr
            .rows
            .iter()
            .map(|r| certificate_a(env, config.q, measured, eps, r.phi.max(0.0)).ok())
            .collect(),
        None => vec![None; tr.rows.len()],
    };
    let path = out_dir.join("trajectory.csv");
    write_trajectory(&path, &tr.rows, &a_of_phi)?;
    summary.artifacts.push(path);

    let mut v = ViolationCounts {
        dissipation: dissipation_check(&tr.rows, &params, config.c_tol).len(),
        positivity_clips: tr.stats.positivity_clips,
        conservation: conservation_violations(&tr, measured),
        ..ViolationCounts::default()
    };
    if blowup {
        if let Some(env) = &envelope {
            let early: Vec<DiagnosticsRecord> =
                tr.rows.iter().take_while(|r| r.u_max <= PHI_MONITOR_CEILING).cloned().collect();
            v.phi = monitor_phi(&early, env, config.q, measured, eps, config.c_tol)?.violations.len();
        }
    }
    summary.violations = v;
    summary.outcome = Some(tr.outcome);
    summary.t_final = Some(tr.final_state.t);
    summary.steps = Some(tr.stats);
    summary.mass = Some(measured);
    summary.eps = Some(eps);
    summary.extrema = extrema(&tr.rows, &a_of_phi);
    Ok(())
}

fn conservation_violations(tr: &Trajectory, mass: f64) -> usize {
    let tol = MASS_DRIFT_PER_1E4_STEPS * (tr.stats.accepted as f64 / 1e4).max(1.0);
    tr.rows
        .iter()
        .filter(|r| (r.mass - mass).abs() > tol * mass || r.v_mean.abs() > ks1d_core::timestepper::V_MEAN_TOLERANCE)
        .count()
}

fn row_values(r: &DiagnosticsRecord) -> [f64; 13] {
    [
        r.t,
        r.dt,
        r.mass,
        r.v_mean,
        r.u_max,
        r.lambda,
        r.l_q,
        r.l2,
        r.l3,
        r.llogl,
        r.grad_log_energy,
        r.vt_l2,
        r.phi,
    ]
}

pub fn write_trajectory(path: &Path, rows: &[DiagnosticsRecord], a_of_phi: &[Option<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    w.write_record(TRAJECTORY_COLUMNS)?;
    for (r, a) in rows.iter().zip(a_of_phi) {
        let mut fields: Vec<String> = row_values(r).iter().map(|x| format!("{x:e}")).collect();
        fields.push(a.map(|x| format!("{x:e}")).unwrap_or_default());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn extrema(rows: &[DiagnosticsRecord], a_of_phi: &[Option<f64>]) -> BTreeMap<&'static str, [f64; 2]> {
    let mut out = BTreeMap::new();
    for (k, name) in TRAJECTORY_COLUMNS.iter().enumerate() {
        let values: Vec<f64> = if k < 13 {
            rows.iter().map(|r| row_values(r)[k]).collect()
        } else {
            a_of_phi.iter().flatten().copied().collect()
        };
        if values.is_empty() {
            continue;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.insert(*name, [lo, hi]);
    }
    out
}

#[derive(Serialize)]
struct ReportRow<'a> {
    suite: &'a str,
    sample: usize,
    check: &'a str,
    params: String,
    lhs: f64,
    rhs: f64,
    margin: f64,
    ok: bool,
}

fn params_text(r: &InequalityReport) -> String {
    r.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// Number of corpus samples per suite.
pub fn suite_samples(suite: Suite) -> usize {
    match suite {
        Suite::Prop5 | Suite::Sobolev | Suite::Cor4 => 1000,
        Suite::Prop6 => 200,
        Suite::Lemma4 => 21,
    }
}

fn inequalities(suite: Suite, config: &ScenarioConfig, out_dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let grid = GridSpec::new(CORPUS_CELLS)?;
    let name = suite.to_string();
    let mut rows: Vec<(usize, &'static str, InequalityReport)> = Vec::new();
    match suite {
        Suite::Prop5 => {
            for (i, m) in fourier_corpus(config.seed, suite_samples(suite), grid).iter().enumerate() {
                for nu in [0.1, 1.0, 10.0] {
                    rows.push((i, "exp-embedding", verify_exp_embedding(m, nu)?));
                }
            }
        }
        Suite::Sobolev => {
            for (i, m) in fourier_corpus(config.seed, suite_samples(suite), grid).iter().enumerate() {
                rows.push((i, "sup-norm", sobolev_embedding_check(m)));
            }
        }
        Suite::Prop6 => {
            for (i, w) in shifted_density_corpus(config.seed, suite_samples(suite), grid).iter().enumerate() {
                for n in [std::f64::consts::E.powi(2), 10.0, 100.0] {
                    let r = verify_llogl_interpolation(w, n, GN_CONSTANT)?;
                    rows.push((i, "display", r.display));
                    rows.push((i, "gagliardo-nirenberg", r.gagliardo_nirenberg));
                    rows.push((i, "cutoff-energy", r.cutoff_energy));
                    rows.push((i, "cutoff-mass", r.cutoff_mass));
                    rows.push((i, "remainder", r.remainder));
                }
            }
        }
        Suite::Cor4 => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            for i in 0..suite_samples(suite) {
                let u = random_density(&mut rng, grid, 0.9);
                rows.push((i, "log-density", verify_log_density_bound(&u, 1.0)?));
            }
        }
        Suite::Lemma4 => {
            let sweep = counterexample_sweep(config.delta, 1.0, 0.0, &log_grid_decreasing(1e-2, 1e-4, suite_samples(suite)))?;
            let path = out_dir.join("lemma4.json");
            write_json(&path, &sweep)?;
            summary.artifacts.push(path);
            summary.lemma4 = Some(sweep);
            return Ok(());
        }
    }
    let path = out_dir.join("inequalities.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    for (i, check, r) in &rows {
        w.serialize(ReportRow {
            suite: &name,
            sample: *i,
            check,
            params: params_text(r),
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            ok: r.ok,
        })?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    summary.artifacts.push(path);
    summary.violations.inequalities = rows.iter().filter(|(_, _, r)| !r.ok).count();
    Ok(())
}
