//! Command-line driver: single runs with CSV output, convergence sweeps and
//! the verification suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimators::br::{br_estimator, reconstruction_error, BrNorm};
use crate::estimators::identities::{verify_reconstruction_identities, TimeBasis};
use crate::estimators::indicators::{total_bounds, EstimateReport, EstimatorOptions};
use crate::fespace::{DiscreteField, FeSpace, MassMode, SpaceOptions};
use crate::linalg;
use crate::mesh::{Mesh1D, Window};
use crate::problem::{GaussianPulse, StandingWave};
use crate::stepper::{self, initialize, lts_substeps, shadow_energy, step, two_step, Trajectory};
use crate::timegrid::{HalfIndex, TimeGrid};

#[derive(Debug, Parser)]
#[command(
    name = "wave-apost",
    about = "Leapfrog with local time-stepping for the 1D wave equation, with a posteriori error bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write indicators, mesh and solution CSVs.
    Run(CommonArgs),
    /// Run the H sweep and fit convergence rates.
    Convergence(CommonArgs),
    /// Run the verification checks.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Coarse mesh size; for `convergence`, the first of four halvings.
    #[arg(long = "H")]
    pub h: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Time step as a multiple of H.
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Defaults, then the config file, then the flags.
pub fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(h) = args.h {
        cfg.coarse_h = h;
    }
    if let Some(t) = args.t {
        cfg.final_time = t;
    }
    if let Some(c) = args.cfl {
        cfg.cfl = c;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Fixed 17-significant-digit format shared by all CSV files.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

/// Output of a run or a sweep.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Option<Slopes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub steps: usize,
    pub rel_energy_error: f64,
    pub l2_error: f64,
    pub velocity_error: f64,
    pub bound_u: f64,
    pub bound_v: f64,
    pub eta_total: f64,
}

impl ConvergenceRow {
    fn new(h: f64, steps: usize, r: &EstimateReport) -> Self {
        let rel = if r.exact_energy_scale > 0.0 {
            r.relative_energy_error()
        } else {
            r.true_error_u
        };
        Self {
            h,
            steps,
            rel_energy_error: rel,
            l2_error: r.true_error_l2,
            velocity_error: r.true_error_v,
            bound_u: r.bound_u,
            bound_v: r.bound_v,
            eta_total: r.eta_total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    pub energy: f64,
    pub l2: f64,
    pub bound_u: f64,
    pub bound_v: f64,
}

/// Least-squares slope of `log y` against `log h`.
pub fn loglog_slope(h: &[f64], y: &[f64]) -> f64 {
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn fit_slopes(rows: &[ConvergenceRow]) -> Slopes {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Slopes {
        energy: loglog_slope(&h, &col(|r| r.rel_energy_error)),
        l2: loglog_slope(&h, &col(|r| r.l2_error)),
        bound_u: loglog_slope(&h, &col(|r| r.bound_u)),
        bound_v: loglog_slope(&h, &col(|r| r.bound_v)),
    }
}

fn indicators_csv(tr: &Trajectory, r: &EstimateReport) -> String {
    let mut s = String::from("# n,t,eps0,eps1,theta0,theta1,alpha,mu0,mu1,mu2,delta,eta\n");
    for x in &r.samples {
        let vals = [
            tr.grid.t(x.n),
            x.eps0,
            x.eps1,
            x.theta0_mean(),
            x.theta1_mean(),
            x.alpha,
            x.mu0,
            x.mu1,
            x.mu2,
            x.delta_mean(),
            x.eta_sum(),
        ];
        let cells: Vec<String> = vals.iter().map(|v| fmt(*v)).collect();
        let _ = writeln!(s, "{},{}", x.n, cells.join(","));
    }
    s
}

fn mesh_csv(tr: &Trajectory) -> String {
    let mut s = String::from("# n,t,x\n");
    for (n, st) in tr.states.iter().enumerate() {
        let t = fmt(tr.grid.t(n));
        for x in st.space().nodes() {
            let _ = writeln!(s, "{n},{t},{}", fmt(*x));
        }
    }
    s
}

fn solution_csv(tr: &Trajectory) -> String {
    let mut s = String::from("# t,x,U\n");
    for (n, st) in tr.states.iter().enumerate() {
        let t = fmt(tr.grid.t(n));
        for (x, u) in st.space().nodes().iter().zip(st.u.nodal_values()) {
            let _ = writeln!(s, "{t},{},{}", fmt(*x), fmt(u));
        }
    }
    s
}

fn summary_csv(r: &EstimateReport) -> String {
    let mut s = String::from("# quantity,value\n");
    let rows = [
        ("bound_U", r.bound_u),
        ("bound_V", r.bound_v),
        ("eta_total", r.eta_total),
        ("max_eps0", r.max_eps0),
        ("max_eps1", r.max_eps1),
        ("initial_error", r.initial_energy_error),
        ("error_U_energy", r.true_error_u),
        ("error_V", r.true_error_v),
        ("error_U_l2", r.true_error_l2),
        ("exact_energy_scale", r.exact_energy_scale),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{}", fmt(v));
    }
    s
}

fn estimator_options(cfg: &RunConfig) -> EstimatorOptions {
    EstimatorOptions {
        mu0_space: cfg.mu0_space,
        initial_error_refine: cfg.initial_error_refine,
    }
}

/// Runs, estimates and writes the per-run files into `dir`.
fn run_into(cfg: &RunConfig, dir: &Path) -> Result<(Trajectory, EstimateReport, Vec<PathBuf>)> {
    let problem = cfg.problem.build();
    let tr = stepper::run(cfg, problem.as_ref())?;
    let report = total_bounds(&tr, problem.as_ref(), &estimator_options(cfg))?;
    fs::create_dir_all(dir)?;
    let files = [
        ("indicators.csv", indicators_csv(&tr, &report)),
        ("mesh.csv", mesh_csv(&tr)),
        ("solution.csv", solution_csv(&tr)),
        ("summary.csv", summary_csv(&report)),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        write_file(&p, &text)?;
        paths.push(p);
    }
    Ok((tr, report, paths))
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    let (tr, report, files) = run_into(cfg, &cfg.out_dir)?;
    info!(
        "H = {}: {} steps, {} mesh changes, bound_U = {:.3e}, bound_V = {:.3e}",
        cfg.coarse_h,
        tr.steps(),
        tr.mesh_change_steps.len(),
        report.bound_u,
        report.bound_v
    );
    Ok(RunReport {
        files,
        rows: vec![ConvergenceRow::new(cfg.coarse_h, tr.steps(), &report)],
        slopes: None,
    })
}

/// Runs every `H` of `h_list` concurrently, each into its own
/// subdirectory, then writes `convergence.csv` and `slopes.csv`.
pub fn cmd_convergence(cfg: &RunConfig, h_list: &[f64]) -> Result<RunReport> {
    if h_list.len() < 3 {
        return Err(Error::Config(format!(
            "a sweep needs at least 3 values of H, got {}",
            h_list.len()
        )));
    }
    for w in h_list.windows(2) {
        if (w[1] - 0.5 * w[0]).abs() > 1e-9 * w[0] {
            return Err(Error::Config(format!(
                "sweep values must halve: {} then {}",
                w[0], w[1]
            )));
        }
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let results: Vec<Result<(ConvergenceRow, Vec<PathBuf>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = h_list
            .iter()
            .map(|&h| {
                scope.spawn(move || {
                    let case = RunConfig {
                        coarse_h: h,
                        ..cfg.clone()
                    };
                    case.validate()?;
                    let dir = cfg.out_dir.join(format!("H_{h}"));
                    let (tr, report, files) = run_into(&case, &dir)?;
                    info!(
                        "H = {h}: bound_U = {:.3e}, bound_V = {:.3e}",
                        report.bound_u, report.bound_v
                    );
                    Ok((ConvergenceRow::new(h, tr.steps(), &report), files))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for r in results {
        let (row, f) = r?;
        rows.push(row);
        files.extend(f);
    }
    let slopes = fit_slopes(&rows);

    let mut s =
        String::from("# H,N,energy_error_rel,l2_error,velocity_error,bound_U,bound_V,eta_total\n");
    for r in &rows {
        let cells = [
            r.rel_energy_error,
            r.l2_error,
            r.velocity_error,
            r.bound_u,
            r.bound_v,
            r.eta_total,
        ];
        let cells: Vec<String> = cells.iter().map(|v| fmt(*v)).collect();
        let _ = writeln!(s, "{},{},{}", fmt(r.h), r.steps, cells.join(","));
    }
    let p = cfg.out_dir.join("convergence.csv");
    write_file(&p, &s)?;
    files.push(p);

    let mut s = String::from("# quantity,slope\n");
    for (k, v) in [
        ("energy_error_rel", slopes.energy),
        ("l2_error", slopes.l2),
        ("bound_U", slopes.bound_u),
        ("bound_V", slopes.bound_v),
    ] {
        let _ = writeln!(s, "{k},{}", fmt(v));
    }
    let p = cfg.out_dir.join("slopes.csv");
    write_file(&p, &s)?;
    files.push(p);

    Ok(RunReport {
        files,
        rows,
        slopes: Some(slopes),
    })
}

/// One named verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl NamedCheck {
    fn below(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: value < tol,
            detail: format!("{value:.3e} (tolerance {tol:.0e})"),
        }
    }

    fn from_result(name: &str, r: Result<Self>) -> Self {
        r.unwrap_or_else(|e| Self {
            name: name.to_string(),
            passed: false,
            detail: format!("error: {e}"),
        })
    }
}

/// Knobs for the verification suite; the defaults check the real thing,
/// the others let tests show that a broken ingredient is caught.
#[derive(Clone, Copy)]
pub struct VerifyOptions {
    pub basis: TimeBasis,
    /// Mass matrix used to measure the shadow energy of the lumped scheme.
    pub drift_mass: MassMode,
    pub identity_trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            basis: TimeBasis::default(),
            drift_mass: MassMode::Lumped,
            identity_trials: 100,
        }
    }
}

pub const CHECK_BASIS: &str = "time basis partition of unity";
pub const CHECK_ASSEMBLY: &str = "assembly reproduces element integrals";
pub const CHECK_SCHEME_FORMS: &str = "system form equals two-step form";
pub const CHECK_SUBSTEPS: &str = "local time-stepping substeps equal the modified operator";
pub const CHECK_DRIFT: &str = "shadow energy drift";
pub const CHECK_BR: &str = "residual estimator reliability";
pub const CHECK_STABILITY: &str = "local time-stepping stability on the window mesh";

fn check_basis() -> Result<NamedCheck> {
    let grid = TimeGrid::uniform(1.0, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let t = rng.gen_range(0.0..1.0);
        let mut hats = 0.0;
        let mut halves = 0.0;
        for k in 0..=10 {
            hats += grid.hat(HalfIndex::int(k), t)?;
            halves += grid.hat(HalfIndex::minus_half(k + 1), t).unwrap_or(0.0);
        }
        // the half-grid hats from t_{1/2} on miss [0, t_{1/2}) and (t_{19/2}, 1]
        let inner =
            t >= grid.node(HalfIndex::minus_half(1)) && t <= grid.node(HalfIndex::minus_half(10));
        worst = worst.max((hats - 1.0).abs());
        if inner {
            worst = worst.max((halves - 1.0).abs());
        }
    }
    for k in 1..10 {
        let nu = HalfIndex::int(k);
        let peak = grid.bubble(nu, grid.node(nu))?;
        let edge = grid.bubble(nu, grid.node(nu.shift_half(1)))?;
        worst = worst.max((peak - 0.125).abs()).max(edge.abs());
    }
    Ok(NamedCheck::below(CHECK_BASIS, worst, 1e-14))
}

fn window_space(window: Window, opts: &SpaceOptions) -> Result<Arc<FeSpace>> {
    FeSpace::new(Mesh1D::build_window_mesh(0.0, 4.0, 0.25, window)?, opts)
}

fn random_field(space: &Arc<FeSpace>, rng: &mut ChaCha8Rng) -> Result<DiscreteField> {
    DiscreteField::new(
        Arc::clone(space),
        (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
}

fn rel_diff(a: &DiscreteField, b: &DiscreteField) -> Result<f64> {
    let d = DiscreteField::lincomb(1.0, a, -1.0, b)?;
    Ok(linalg::max_abs(d.coeffs()) / linalg::max_abs(b.coeffs()).max(f64::MIN_POSITIVE))
}

/// Mass and stiffness quadratic forms against `int u^2`, its trapezoidal
/// rule and `int u'^2`, element by element on a window mesh.
fn check_assembly() -> Result<NamedCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let s = window_space(Window::new(1.0, 2.0), &SpaceOptions::default())?;
    let ops = s.matrices();
    let nodes = s.nodes();
    for _ in 0..10 {
        let u = random_field(&s, &mut rng)?;
        let nv = u.nodal_values();
        let (mut exact, mut trapezoid, mut slope2) = (0.0, 0.0, 0.0);
        for e in 0..nodes.len() - 1 {
            let h = nodes[e + 1] - nodes[e];
            let (a, b) = (nv[e], nv[e + 1]);
            exact += h / 3.0 * (a * a + a * b + b * b);
            trapezoid += 0.5 * h * (a * a + b * b);
            slope2 += (b - a).powi(2) / h;
        }
        let c = u.coeffs();
        let m = ops.mass_consistent.quad_form(c, c);
        let l: f64 = c.iter().zip(&ops.mass_lumped).map(|(x, w)| w * x * x).sum();
        let k = ops.stiffness.quad_form(c, c);
        worst = worst
            .max((m - exact).abs() / exact)
            .max((l - trapezoid).abs() / trapezoid)
            .max((k - slope2).abs() / slope2);
    }
    Ok(NamedCheck::below(CHECK_ASSEMBLY, worst, 1e-12))
}

fn check_scheme_forms() -> Result<NamedCheck> {
    let s = window_space(Window::new(1.0, 2.0), &SpaceOptions::default())?;
    let grid = TimeGrid::uniform(1.0, 100)?;
    let tau = grid.tau();
    let st0 = initialize(
        &s,
        &GaussianPulse {
            center: 2.0,
            sharpness: 4.0,
        },
        &grid,
    )?;
    let f = DiscreteField::zeros(&s);
    let mut st = st0.clone();
    let mut prev = DiscreteField::lincomb(1.0, &st0.u, -tau, &st0.v)?;
    let mut cur = st0.u.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        st = step(&st, &s, &f, tau)?;
        let nxt = two_step(&prev, &cur, &f, tau)?;
        worst = worst.max(rel_diff(&st.u, &nxt)?);
        prev = cur;
        cur = nxt;
    }
    Ok(NamedCheck::below(CHECK_SCHEME_FORMS, worst, 1e-11))
}

fn check_substeps() -> Result<NamedCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for window in [Window::new(0.0, 4.0), Window::new(1.0, 2.0)] {
        let s = window_space(window, &SpaceOptions::default())?;
        let zero = DiscreteField::zeros(&s);
        for _ in 0..5 {
            let u_prev = random_field(&s, &mut rng)?;
            let u = random_field(&s, &mut rng)?;
            let a = lts_substeps(&u_prev, &u, &zero, 0.1)?;
            let b = two_step(&u_prev, &u, &zero, 0.1)?;
            worst = worst.max(rel_diff(&a, &b)?);
        }
    }
    Ok(NamedCheck::below(CHECK_SUBSTEPS, worst, 1e-12))
}

/// Largest relative change of the shadow energy of the lumped scheme over
/// `steps` steps of a standing wave, measured with the `measure` mass.
pub fn energy_drift(steps: usize, measure: MassMode) -> Result<f64> {
    let s = FeSpace::new(
        Mesh1D::build_uniform(0.0, 1.0, 0.05)?,
        &SpaceOptions::default(),
    )?;
    let wave = StandingWave {
        a: 0.0,
        length: 1.0,
        mode: 2,
    };
    let grid = TimeGrid::uniform(0.005 * steps as f64, steps)?;
    let tau = grid.tau();
    let mut st = initialize(&s, &wave, &grid)?;
    let f = DiscreteField::zeros(&s);
    let mut e0 = None;
    let mut drift: f64 = 0.0;
    for _ in 0..steps {
        let nxt = step(&st, &s, &f, tau)?;
        let e = shadow_energy(&st.u, &nxt.u, tau, measure)?;
        let e0 = *e0.get_or_insert(e);
        drift = drift.max((e - e0).abs() / e0);
        st = nxt;
    }
    Ok(drift)
}

fn check_br() -> Result<NamedCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for mass in [MassMode::Lumped, MassMode::Consistent] {
        let opts = SpaceOptions {
            mass,
            ..SpaceOptions::default()
        };
        let s = window_space(Window::new(1.0, 2.0), &opts)?;
        for _ in 0..5 {
            let w = random_field(&s, &mut rng)?;
            let err = reconstruction_error(&w, 4, BrNorm::Energy)?;
            let est = br_estimator(&w, &s, BrNorm::Energy)?;
            worst = worst.max(err / est);
        }
    }
    Ok(NamedCheck {
        name: CHECK_BR.to_string(),
        passed: worst <= 1.0,
        detail: format!("largest error / estimate {worst:.3}"),
    })
}

fn check_stability() -> Result<NamedCheck> {
    let cfg = RunConfig::default();
    let m = Mesh1D::build_window_mesh(cfg.a, cfg.b, cfg.coarse_h, cfg.window)?;
    let s = FeSpace::new(m, &cfg.space_options())?;
    let tau = cfg.final_time / stepper::step_count(&cfg) as f64;
    let (lmin, lmax) = stepper::lts_spectrum(&s, tau)?;
    let passed = stepper::check_lts_stability(&s, tau).is_ok();
    Ok(NamedCheck {
        name: CHECK_STABILITY.to_string(),
        passed,
        detail: format!(
            "spectrum of tau^2 A_lts in [{:.3e}, {:.3}] (limit 4)",
            lmin * tau * tau,
            lmax * tau * tau
        ),
    })
}

/// Runs every check and returns the named results.
pub fn verify_suite(opts: &VerifyOptions) -> Vec<NamedCheck> {
    let mut out = vec![
        NamedCheck::from_result(CHECK_BASIS, check_basis()),
        NamedCheck::from_result(CHECK_ASSEMBLY, check_assembly()),
        NamedCheck::from_result(CHECK_SCHEME_FORMS, check_scheme_forms()),
        NamedCheck::from_result(CHECK_SUBSTEPS, check_substeps()),
        NamedCheck::from_result(
            CHECK_DRIFT,
            energy_drift(1000, opts.drift_mass).map(|d| NamedCheck::below(CHECK_DRIFT, d, 1e-10)),
        ),
    ];
    let ids =
        verify_reconstruction_identities(opts.identity_trials, 10, 8, 3, 17, opts.basis, 1e-12);
    for c in ids.checks {
        out.push(NamedCheck {
            name: c.name.to_string(),
            passed: c.passed,
            detail: format!(
                "{:.3e} (worst at n = {}, t = {:.4})",
                c.max_residual, c.worst.0, c.worst.1
            ),
        });
    }
    out.push(NamedCheck::from_result(CHECK_BR, check_br()));
    out.push(NamedCheck::from_result(CHECK_STABILITY, check_stability()));
    out
}

pub fn cmd_verify(opts: &VerifyOptions) -> u8 {
    let checks = verify_suite(opts);
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if checks.iter().all(|c| c.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn print_rows(rows: &[ConvergenceRow]) {
    println!("H         N    rel energy err  L2 err      bound_U     bound_V");
    for r in rows {
        println!(
            "{:<9} {:<4} {:<15.4e} {:<11.4e} {:<11.4e} {:.4e}",
            r.h, r.steps, r.rel_energy_error, r.l2_error, r.bound_u, r.bound_v
        );
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Run(args) => load_config(args).and_then(|cfg| cmd_run(&cfg)).map(|r| {
            print_rows(&r.rows);
            EXIT_OK
        }),
        Command::Convergence(args) => load_config(args).and_then(|cfg| {
            let sweep = match args.h {
                Some(h) => (0..4).map(|k| h / f64::powi(2.0, k)).collect(),
                None => cfg.sweep.clone(),
            };
            let r = cmd_convergence(&cfg, &sweep)?;
            print_rows(&r.rows);
            if let Some(s) = r.slopes {
                println!(
                    "slopes: energy {:.3}, L2 {:.3}, bound_U {:.3}, bound_V {:.3}",
                    s.energy, s.l2, s.bound_u, s.bound_v
                );
            }
            Ok(EXIT_OK)
        }),
        Command::Verify(args) => load_config(args).map(|_| cmd_verify(&VerifyOptions::default())),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let y: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&h, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, "H = 0.15\nT = 0.5\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            t: Some(0.25),
            ..CommonArgs::default()
        };
        let cfg = load_config(&args).unwrap();
        assert_eq!((cfg.coarse_h, cfg.final_time), (0.15, 0.25));
    }

    #[test]
    fn config_errors_map_to_exit_2() {
        let args = CommonArgs {
            config: Some(PathBuf::from("/nonexistent/cfg.txt")),
            ..CommonArgs::default()
        };
        assert_eq!(exit_code(&load_config(&args).unwrap_err()), EXIT_CONFIG);
        let args = CommonArgs {
            cfl: Some(-1.0),
            ..CommonArgs::default()
        };
        assert_eq!(exit_code(&load_config(&args).unwrap_err()), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
    }

    #[test]
    fn sweep_must_halve() {
        let cfg = RunConfig::default();
        assert!(matches!(
            cmd_convergence(&cfg, &[0.3, 0.15]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            cmd_convergence(&cfg, &[0.3, 0.2, 0.1]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn energy_drift_catches_wrong_mass() {
        assert!(energy_drift(200, MassMode::Lumped).unwrap() < 1e-10);
        assert!(energy_drift(200, MassMode::Consistent).unwrap() > 1e-10);
    }
}
