//! Leapfrog time integration with local time-stepping on time-varying
//! finite element spaces.
//!
//! The scheme is used in its one-step form for the displacement `U^n` at
//! `t_n` and the velocity `V^{n-1/2}` at `t_{n-1/2}`:
//!
//! ```text
//! V^{n+1/2} = Pi_{n+1} [V^{n-1/2} + (F^n - Ã_n U^n) tau]
//! U^{n+1}   = Pi_{n+1} U^n + V^{n+1/2} tau
//! ```
//!
//! with `Pi_{n+1}` nodal interpolation onto the next space and
//! `Ã = A - (tau^2/16) A Pi_f A` the local time-stepping operator.

use std::sync::Arc;

use log::{debug, warn};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fespace::{DiscreteField, FeSpace, MassMode};
use crate::linalg;
use crate::mesh::{Mesh1D, Window};
use crate::problem::WaveProblem;
use crate::quadrature::{integrate, GAUSS3};
use crate::timegrid::{HalfIndex, TimeGrid};

/// Displacement `U^n` and velocity `V^{n-1/2}`, both in `V_n`.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub n: usize,
    pub u: DiscreteField,
    pub v: DiscreteField,
}

impl WaveState {
    pub fn space(&self) -> &Arc<FeSpace> {
        self.u.space()
    }

    /// `1/2 ||V||^2 + 1/2 a(U, U)` with the configured mass.
    pub fn energy(&self) -> f64 {
        0.5 * self.v.mass_norm().powi(2) + 0.5 * self.u.pot_norm().powi(2)
    }
}

/// Source approximation `F^n`: the projection of `f(t_n)` for sources
/// continuous in time, otherwise the projection of the average of `f` over
/// `[t_{n-1/2}, t_{n+1/2}]`.
pub fn source_approx(
    space: &Arc<FeSpace>,
    problem: &dyn WaveProblem,
    n: usize,
    grid: &TimeGrid,
) -> Result<DiscreteField> {
    if !problem.has_source() {
        return Ok(DiscreteField::zeros(space));
    }
    let tn = grid.node(HalfIndex::int(n as i64));
    if problem.source_is_continuous() {
        return space.project_fn(|x| problem.source(x, tn));
    }
    let tau = grid.tau();
    let (lo, hi) = (tn - 0.5 * tau, tn + 0.5 * tau);
    space.project_fn(|x| integrate(&GAUSS3, lo, hi, |t| problem.source(x, t)) / tau)
}

/// `U^0 = P u_0` and `V^{-1/2} = P v_0 - (F^0 - Ã U^0) tau / 2`.
pub fn initialize(
    space: &Arc<FeSpace>,
    problem: &dyn WaveProblem,
    grid: &TimeGrid,
) -> Result<WaveState> {
    let u = space.project_fn(|x| problem.u0(x))?;
    let v0 = space.project_fn(|x| problem.v0(x))?;
    let f0 = source_approx(space, problem, 0, grid)?;
    let tau = grid.tau();
    let r = DiscreteField::lincomb(1.0, &f0, -1.0, &u.apply_lts(tau))?;
    let v = DiscreteField::lincomb(1.0, &v0, -0.5 * tau, &r)?;
    Ok(WaveState { n: 0, u, v })
}

/// One step of the scheme onto `next`, given `F^n` on the current space.
pub fn step(
    state: &WaveState,
    next: &Arc<FeSpace>,
    source: &DiscreteField,
    tau: f64,
) -> Result<WaveState> {
    if !state.space().mesh().is_compatible(next.mesh()) {
        return Err(Error::Incompatible(format!(
            "step {} moves to an incompatible mesh",
            state.n
        )));
    }
    let r = DiscreteField::lincomb(1.0, source, -1.0, &state.u.apply_lts(tau))?;
    let v_half = DiscreteField::lincomb(1.0, &state.v, tau, &r)?.pass_to(next)?;
    let u_next = DiscreteField::lincomb(1.0, &state.u.pass_to(next)?, tau, &v_half)?;
    Ok(WaveState {
        n: state.n + 1,
        u: u_next,
        v: v_half,
    })
}

/// Two-step form on a fixed space: `2 U^n - U^{n-1} + (F^n - Ã U^n) tau^2`.
pub fn two_step(
    u_prev: &DiscreteField,
    u: &DiscreteField,
    source: &DiscreteField,
    tau: f64,
) -> Result<DiscreteField> {
    let r = DiscreteField::lincomb(1.0, source, -1.0, &u.apply_lts(tau))?;
    let w = DiscreteField::lincomb(2.0, u, -1.0, u_prev)?;
    DiscreteField::lincomb(1.0, &w, tau * tau, &r)
}

/// Explicit local time-stepping: the coarse part of `U^n` is frozen while
/// the fine part takes two leapfrog substeps of size `tau / 2`. Returns
/// `U^{n+1}`.
pub fn lts_substeps(
    u_prev: &DiscreteField,
    u: &DiscreteField,
    source: &DiscreteField,
    tau: f64,
) -> Result<DiscreteField> {
    let h2 = tau * tau;
    let coarse_part = DiscreteField::lincomb(1.0, u, -1.0, &u.fine_interp())?;
    let a_coarse = coarse_part.apply_elliptic();
    let r0 = DiscreteField::lincomb(1.0, source, -1.0, &u.apply_elliptic())?;
    let w_half = DiscreteField::lincomb(1.0, u, h2 / 8.0, &r0)?;
    let fine = w_half.fine_interp().apply_elliptic();
    let r1 = DiscreteField::combination(&[(1.0, source), (-1.0, &a_coarse), (-1.0, &fine)])?;
    let w_full = DiscreteField::combination(&[(2.0, &w_half), (-1.0, u), (h2 / 4.0, &r1)])?;
    DiscreteField::lincomb(2.0, &w_full, -1.0, u_prev)
}

/// `1/2 ||(U^{n+1} - U^n) / tau||^2_M + 1/2 a(U^n, U^{n+1})`, with the mass
/// matrix chosen explicitly. Conserved by the scheme on a fixed space
/// without source when `mass` matches the scheme's mass.
pub fn shadow_energy(
    u: &DiscreteField,
    u_next: &DiscreteField,
    tau: f64,
    mass: MassMode,
) -> Result<f64> {
    let d = DiscreteField::lincomb(1.0 / tau, u_next, -1.0 / tau, u)?;
    let ops = d.space().matrices();
    let kin = match mass {
        MassMode::Lumped => d
            .coeffs()
            .iter()
            .zip(&ops.mass_lumped)
            .map(|(x, m)| m * x * x)
            .sum(),
        MassMode::Consistent => ops.mass_consistent.quad_form(d.coeffs(), d.coeffs()),
    };
    Ok(0.5 * kin + 0.5 * u.energy_product(u_next)?)
}

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 10_000;

/// Dominant eigenvalue of a self-adjoint operator in the `mass` inner
/// product, by power iteration with the Rayleigh quotient.
fn power_iteration(
    dim: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    mass: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<f64> {
    if dim == 0 {
        return Ok(0.0);
    }
    // highest-frequency start, slightly perturbed so no mode is missing
    let mut x: Vec<f64> = (0..dim)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + 0.1 * (i as f64).sin()))
        .collect();
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let nrm = linalg::dot(&mass(&x), &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        let y = apply(&x);
        let lambda = linalg::dot(&mass(&y), &x);
        if (lambda - prev).abs() <= POWER_TOL * lambda.abs() {
            return Ok(lambda);
        }
        prev = lambda;
        x = y;
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {POWER_MAX_ITER} iterations"
    )))
}

/// Largest eigenvalue of `K x = lambda M x` with the configured mass.
pub fn max_eigenvalue(space: &Arc<FeSpace>) -> Result<f64> {
    let k = &space.matrices().stiffness;
    power_iteration(
        space.dim(),
        |x| space.solve_mass(&k.matvec(x)),
        |x| space.apply_mass(x),
    )
}

/// Largest stable leapfrog step `2 / sqrt(lambda_max)`.
pub fn cfl_estimate(space: &Arc<FeSpace>) -> Result<f64> {
    Ok(2.0 / max_eigenvalue(space)?.sqrt())
}

/// Smallest and largest eigenvalue of `Ã` for step `tau`.
pub fn lts_spectrum(space: &Arc<FeSpace>, tau: f64) -> Result<(f64, f64)> {
    let apply = |x: &[f64]| {
        DiscreteField::new(Arc::clone(space), x.to_vec())
            .expect("dimension matches")
            .apply_lts(tau)
            .coeffs()
            .to_vec()
    };
    let mass = |x: &[f64]| space.apply_mass(x);
    let dominant = power_iteration(space.dim(), apply, mass)?;
    // shift the spectrum onto [0, lambda_max - lambda_min] so the other end
    // becomes dominant: sign = 1 gives d - Ã, sign = -1 gives Ã - d
    let sign = if dominant >= 0.0 { 1.0 } else { -1.0 };
    let spread = power_iteration(
        space.dim(),
        |x| {
            let y = apply(x);
            x.iter()
                .zip(&y)
                .map(|(a, b)| sign * (dominant * a - b))
                .collect()
        },
        mass,
    )?;
    let other = dominant - sign * spread;
    Ok((dominant.min(other), dominant.max(other)))
}

/// Fails unless every eigenvalue `lambda` of `Ã` satisfies
/// `0 <= lambda tau^2 <= 4`, i.e. the two-step map has spectral radius 1.
pub fn check_lts_stability(space: &Arc<FeSpace>, tau: f64) -> Result<()> {
    let (lo, hi) = lts_spectrum(space, tau)?;
    let tol = 1e-8;
    let z_hi = hi * tau * tau;
    if z_hi > 4.0 * (1.0 + tol) || lo < -tol * hi.abs() {
        return Err(Error::Numerical(format!(
            "leapfrog with local time-stepping is unstable: lambda tau^2 in [{:.6}, {:.6}], stable range [0, 4]; \
             reduce cfl (tau = {tau})",
            lo * tau * tau,
            z_hi
        )));
    }
    Ok(())
}

/// Everything the estimators need from a run: the states `0..=N`, one
/// extra step past the final time on the last space, and the sources.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<WaveState>,
    pub lookahead: WaveState,
    /// `F^n` on `V_n` for `n = 0..=N`.
    pub sources: Vec<DiscreteField>,
    /// Steps `n` at which `V_n` differs from `V_{n-1}`.
    pub mesh_change_steps: Vec<usize>,
    /// Fine window used by each state.
    pub windows: Vec<Window>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// Space `V_n` for `n` in `0..=N+1`; `V_{N+1} = V_N`.
    pub fn space(&self, n: usize) -> &Arc<FeSpace> {
        if n <= self.steps() {
            self.states[n].space()
        } else {
            self.lookahead.space()
        }
    }

    /// `U^k` for `k` in `-1..=N+1`, with `U^{-1} = U^0 - tau V^{-1/2}`.
    pub fn u(&self, k: i64) -> Result<DiscreteField> {
        let n = self.steps() as i64;
        match k {
            -1 => {
                DiscreteField::lincomb(1.0, &self.states[0].u, -self.grid.tau(), &self.states[0].v)
            }
            k if (0..=n).contains(&k) => Ok(self.states[k as usize].u.clone()),
            k if k == n + 1 => Ok(self.lookahead.u.clone()),
            _ => Err(Error::Index(format!(
                "displacement index {k} outside [-1, {}]",
                n + 1
            ))),
        }
    }

    /// `V^{k-1/2}` for `k` in `0..=N+1`.
    pub fn v(&self, k: i64) -> Result<&DiscreteField> {
        let n = self.steps() as i64;
        match k {
            k if (0..=n).contains(&k) => Ok(&self.states[k as usize].v),
            k if k == n + 1 => Ok(&self.lookahead.v),
            _ => Err(Error::Index(format!(
                "velocity index {k}-1/2 outside [-1/2, {}/2]",
                2 * n + 1
            ))),
        }
    }

    /// Configured-mass energies of the recorded states.
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(WaveState::energy).collect()
    }
}

/// Number of steps for `tau = cfl * H` rounded down to divide `T`.
pub fn step_count(cfg: &RunConfig) -> usize {
    let raw = cfg.final_time / (cfg.cfl * cfg.coarse_h);
    // tolerate roundoff when T / tau is an integer
    (raw * (1.0 - 1e-12)).ceil().max(0.0) as usize
}

/// Runs the experiment described by `cfg` for `problem`.
pub fn run(cfg: &RunConfig, problem: &dyn WaveProblem) -> Result<Trajectory> {
    cfg.validate()?;
    let steps = step_count(cfg);
    let grid = if steps == 0 {
        TimeGrid::from_step(cfg.cfl * cfg.coarse_h, 0)?
    } else {
        TimeGrid::uniform(cfg.final_time, steps)?
    };
    let tau = grid.tau();
    let opts = cfg.space_options();

    let coarse = FeSpace::new(Mesh1D::build_uniform(cfg.a, cfg.b, cfg.coarse_h)?, &opts)?;
    let tau_max = cfl_estimate(&coarse)?;
    if tau > tau_max {
        warn!("tau = {tau:.6e} exceeds the coarse-mesh CFL limit {tau_max:.6e}");
    }

    let mut window = cfg.window;
    let mut space = FeSpace::new(
        Mesh1D::build_window_mesh(cfg.a, cfg.b, cfg.coarse_h, window)?,
        &opts,
    )?;
    if cfg.stability_check {
        check_lts_stability(&space, tau)?;
    }
    let mut state = initialize(&space, problem, &grid)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut sources = Vec::with_capacity(steps + 1);
    let mut windows = vec![window];
    let mut mesh_change_steps = Vec::new();
    let mut last_change = 0.0;

    for n in 0..steps {
        let t_next = grid.t(n + 1);
        let next = if cfg.move_window && !window.is_empty() && t_next - last_change > cfg.coarse_h {
            window = window.shifted(space.mesh().macro_h());
            if window.hi > cfg.b {
                window.hi = cfg.b;
            }
            last_change = t_next;
            mesh_change_steps.push(n + 1);
            debug!(
                "mesh change at step {} (t = {t_next:.4}): window [{:.4}, {:.4}]",
                n + 1,
                window.lo,
                window.hi
            );
            let s = FeSpace::new(space.mesh().advance_window(window)?, &opts)?;
            if cfg.stability_check {
                check_lts_stability(&s, tau)?;
            }
            s
        } else {
            Arc::clone(&space)
        };
        let f = source_approx(&space, problem, n, &grid)?;
        let new_state = step(&state, &next, &f, tau)?;
        if !new_state.u.coeffs().iter().all(|c| c.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite solution at step {}",
                n + 1
            )));
        }
        states.push(std::mem::replace(&mut state, new_state));
        sources.push(f);
        windows.push(window);
        space = next;
    }
    let f = source_approx(&space, problem, steps, &grid)?;
    let lookahead = step(&state, &space, &f, tau)?;
    states.push(state);
    sources.push(f);
    Ok(Trajectory {
        grid,
        states,
        lookahead,
        sources,
        mesh_change_steps,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::SpaceOptions;
    use crate::problem::{GaussianPulse, StandingWave, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window_space(all_fine: bool) -> Arc<FeSpace> {
        let w = if all_fine {
            Window::new(0.0, 4.0)
        } else {
            Window::new(1.0, 2.0)
        };
        let m = Mesh1D::build_window_mesh(0.0, 4.0, 0.25, w).unwrap();
        FeSpace::new(m, &SpaceOptions::default()).unwrap()
    }

    fn random(space: &Arc<FeSpace>, rng: &mut ChaCha8Rng) -> DiscreteField {
        DiscreteField::new(
            Arc::clone(space),
            (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn rel_diff(a: &DiscreteField, b: &DiscreteField) -> f64 {
        let d = DiscreteField::lincomb(1.0, a, -1.0, b).unwrap();
        linalg::max_abs(d.coeffs()) / linalg::max_abs(b.coeffs()).max(1e-300)
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = window_space(false);
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let mut st = initialize(&s, &Zero, &grid).unwrap();
        assert!(st.u.is_zero() && st.v.is_zero());
        let f = DiscreteField::zeros(&s);
        for _ in 0..10 {
            st = step(&st, &s, &f, grid.tau()).unwrap();
        }
        assert!(st.u.is_zero() && st.v.is_zero());
    }

    #[test]
    fn initial_velocity_without_displacement() {
        struct Kick;
        impl WaveProblem for Kick {
            fn u0(&self, _x: f64) -> f64 {
                0.0
            }
            fn v0(&self, x: f64) -> f64 {
                (x * 1.3).sin()
            }
        }
        let s = window_space(false);
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let st = initialize(&s, &Kick, &grid).unwrap();
        let pv = s.project_fn(|x| (x * 1.3).sin()).unwrap();
        assert_eq!(st.v.coeffs(), pv.coeffs());
    }

    #[test]
    fn first_step_from_rest() {
        // with v0 = 0 and f = 0: U^1 = U^0 - Ã U^0 tau^2 / 2
        struct Bump;
        impl WaveProblem for Bump {
            fn u0(&self, x: f64) -> f64 {
                (-(x - 1.5) * (x - 1.5) * 4.0).exp()
            }
            fn v0(&self, _x: f64) -> f64 {
                0.0
            }
        }
        let s = window_space(false);
        let grid = TimeGrid::uniform(0.5, 4).unwrap();
        let tau = grid.tau();
        let st = initialize(&s, &Bump, &grid).unwrap();
        let next = step(&st, &s, &DiscreteField::zeros(&s), tau).unwrap();
        let expect =
            DiscreteField::lincomb(1.0, &st.u, -0.5 * tau * tau, &st.u.apply_lts(tau)).unwrap();
        assert!(rel_diff(&next.u, &expect) < 1e-14);
    }

    #[test]
    fn system_form_matches_two_step_form() {
        let s = window_space(false);
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let tau = grid.tau();
        let p = GaussianPulse {
            center: 2.0,
            sharpness: 4.0,
        };
        let st0 = initialize(&s, &p, &grid).unwrap();
        let f = DiscreteField::zeros(&s);
        let mut st = st0.clone();
        let mut prev = DiscreteField::lincomb(1.0, &st0.u, -tau, &st0.v).unwrap();
        let mut cur = st0.u.clone();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            st = step(&st, &s, &f, tau).unwrap();
            let nxt = two_step(&prev, &cur, &f, tau).unwrap();
            worst = worst.max(rel_diff(&st.u, &nxt));
            prev = cur;
            cur = nxt;
        }
        assert!(worst < 1e-11, "{worst}");
    }

    #[test]
    fn substeps_match_lts_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let tau = 0.1;
        for all_fine in [true, false] {
            let s = window_space(all_fine);
            let u_prev = random(&s, &mut rng);
            let u = random(&s, &mut rng);
            let zero = DiscreteField::zeros(&s);
            let a = lts_substeps(&u_prev, &u, &zero, tau).unwrap();
            let b = two_step(&u_prev, &u, &zero, tau).unwrap();
            assert!(rel_diff(&a, &b) < 1e-12);
            // with a source the substeps differ by exactly -(tau^4/16) A Pi_f F
            let f = random(&s, &mut rng);
            let a = lts_substeps(&u_prev, &u, &f, tau).unwrap();
            let b = two_step(&u_prev, &u, &f, tau).unwrap();
            let extra = f.fine_interp().apply_elliptic();
            let c = DiscreteField::lincomb(1.0, &b, -tau.powi(4) / 16.0, &extra).unwrap();
            assert!(rel_diff(&a, &c) < 1e-12);
        }
    }

    #[test]
    fn identical_next_space_is_fixed_step() {
        let s = window_space(false);
        let copy = FeSpace::new(s.mesh().clone(), s.options()).unwrap();
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let st = initialize(&s, &GaussianPulse::default(), &grid).unwrap();
        let f = DiscreteField::zeros(&s);
        let a = step(&st, &s, &f, grid.tau()).unwrap();
        let b = step(&st, &copy, &f, grid.tau()).unwrap();
        assert_eq!(a.u.coeffs(), b.u.coeffs());
        assert_eq!(a.v.coeffs(), b.v.coeffs());
    }

    #[test]
    fn refinement_leaves_functions_unchanged() {
        let coarse = FeSpace::new(
            Mesh1D::build_uniform(0.0, 4.0, 0.25).unwrap(),
            &SpaceOptions::default(),
        )
        .unwrap();
        let fine = window_space(false);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let st = WaveState {
            n: 0,
            u: random(&coarse, &mut rng),
            v: random(&coarse, &mut rng),
        };
        let f = DiscreteField::zeros(&coarse);
        let tau = 0.05;
        let on_coarse = step(&st, &coarse, &f, tau).unwrap();
        let on_fine = step(&st, &fine, &f, tau).unwrap();
        for x in [0.1, 1.2, 1.33, 1.9, 3.0] {
            assert!((on_fine.u.eval(x) - on_coarse.u.eval(x)).abs() < 1e-13);
            assert!((on_fine.v.eval(x) - on_coarse.v.eval(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn shadow_energy_is_conserved() {
        let s = FeSpace::new(
            Mesh1D::build_uniform(0.0, 1.0, 0.05).unwrap(),
            &SpaceOptions::default(),
        )
        .unwrap();
        let w = StandingWave {
            a: 0.0,
            length: 1.0,
            mode: 2,
        };
        let grid = TimeGrid::uniform(5.0, 1000).unwrap();
        let mut st = initialize(&s, &w, &grid).unwrap();
        let f = DiscreteField::zeros(&s);
        let mut e0 = None;
        let mut drift: f64 = 0.0;
        for _ in 0..1000 {
            let nxt = step(&st, &s, &f, grid.tau()).unwrap();
            let e = shadow_energy(&st.u, &nxt.u, grid.tau(), MassMode::Lumped).unwrap();
            let e0 = *e0.get_or_insert(e);
            drift = drift.max((e - e0).abs() / e0);
            st = nxt;
        }
        assert!(drift < 1e-10, "{drift}");
    }

    #[test]
    fn cfl_of_uniform_mesh() {
        for h in [0.1, 0.05] {
            let s = FeSpace::new(
                Mesh1D::build_uniform(0.0, 4.0, h).unwrap(),
                &SpaceOptions::default(),
            )
            .unwrap();
            let t = cfl_estimate(&s).unwrap();
            assert!((t - h).abs() < 0.01 * h, "{t} vs {h}");
        }
    }

    #[test]
    fn lts_stabilises_window_mesh() {
        let h = 0.3;
        let m = Mesh1D::build_window_mesh(-10.0, 10.0, h, Window::new(-1.9, 3.9)).unwrap();
        let s = FeSpace::new(m, &SpaceOptions::default()).unwrap();
        let tau = 0.52 * h;
        assert!(tau > cfl_estimate(&s).unwrap());
        check_lts_stability(&s, tau).unwrap();
        let all_fine = Mesh1D::build_window_mesh(-10.0, 10.0, h, Window::new(-10.0, 10.0)).unwrap();
        let s = FeSpace::new(all_fine, &SpaceOptions::default()).unwrap();
        assert!(matches!(
            check_lts_stability(&s, tau),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn spectrum_of_uniform_mesh() {
        // lumped A on a uniform mesh of (0, 1): lambda_j = 4 / h^2 sin^2(j pi h / 2)
        let h = 0.1;
        let s = FeSpace::new(
            Mesh1D::build_uniform(0.0, 1.0, h).unwrap(),
            &SpaceOptions::default(),
        )
        .unwrap();
        let (lo, hi) = lts_spectrum(&s, 0.05).unwrap();
        let lam = |j: f64| 4.0 / (h * h) * (j * std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((lo - lam(1.0)).abs() < 1e-2 * lam(1.0), "{lo}");
        assert!((hi - lam(9.0)).abs() < 1e-4 * lam(9.0), "{hi}");
    }

    #[test]
    fn spectrum_with_negative_end() {
        let m = Mesh1D::build_window_mesh(-10.0, 10.0, 0.3, Window::new(-1.9, 3.9)).unwrap();
        let s = FeSpace::new(m, &SpaceOptions::default()).unwrap();
        let (lo, hi) = lts_spectrum(&s, 1.0).unwrap();
        assert!(lo < 0.0 && hi > 0.0, "[{lo}, {hi}]");
    }

    #[test]
    fn run_without_steps() {
        let cfg = RunConfig {
            final_time: 0.0,
            ..RunConfig::default()
        };
        let tr = run(&cfg, &GaussianPulse::default()).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert!(tr.mesh_change_steps.is_empty());
    }

    #[test]
    fn default_run_moves_window_with_pulse() {
        let cfg = RunConfig::default();
        let tr = run(&cfg, &GaussianPulse::default()).unwrap();
        assert_eq!(tr.steps(), 7);
        let changes = tr.mesh_change_steps.len() as i64;
        assert!((changes - 3).abs() <= 1, "{changes}");
        let last = tr.windows.last().unwrap();
        assert!(last.lo <= 1.5 && last.hi >= 2.5);
        let u = &tr.states.last().unwrap().u;
        let peak =
            u.space()
                .dof_coords()
                .iter()
                .zip(u.coeffs())
                .fold(
                    (0.0, f64::MIN),
                    |m, (&x, &c)| if c > m.1 { (x, c) } else { m },
                );
        assert!(
            (peak.0 - 2.0).abs() < 0.2 && (peak.1 - 1.0).abs() < 0.1,
            "{peak:?}"
        );
        let e = tr.energies();
        assert!(e.iter().all(|&x| x < 2.0 * e[0]));
    }
}
