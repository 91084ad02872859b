//! Error indicators per time step, their time accumulation and the two
//! computable upper bounds on the displacement and velocity errors.
//!
//! Indicators for step `n` need data at `n - 1` and `n + 1`. At `n = 0`
//! the scheme is extended backwards by `U^{-1} = U^0 - tau V^{-1/2}`, and at
//! `n = N` the trajectory carries one extra step on the final space, so no
//! term is dropped at either end.

use std::sync::Arc;

use crate::config::Mu0Space;
use crate::error::{Error, Result};
use crate::fespace::{DiscreteField, FeSpace};
use crate::problem::WaveProblem;
use crate::quadrature::GAUSS3;
use crate::stepper::Trajectory;
use crate::timegrid::HalfIndex;

use super::br::{br_estimator, BrNorm};

/// All indicators of one step. The time-dependent ones are sampled at the
/// 3 Gauss points of the two half intervals `[t_{n-1}, t_{n-1/2}]` and
/// `[t_{n-1/2}, t_n]`; `eta` holds the accumulated `eta_{2n-1}`,
/// `eta_{2n}`. For `n = 0` the time-dependent parts are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndicatorSample {
    pub n: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub theta0_quad: [[f64; 3]; 2],
    pub theta1_quad: [[f64; 3]; 2],
    pub delta_quad: [[f64; 3]; 2],
    pub eta: [f64; 2],
}

fn mean(q: &[[f64; 3]; 2]) -> f64 {
    // Gauss-weighted average over [t_{n-1}, t_n]
    0.5 * q
        .iter()
        .flat_map(|h| h.iter().zip(&GAUSS3).map(|(v, (_, w))| v * w))
        .sum::<f64>()
}

impl IndicatorSample {
    pub fn theta0_mean(&self) -> f64 {
        mean(&self.theta0_quad)
    }

    pub fn theta1_mean(&self) -> f64 {
        mean(&self.theta1_quad)
    }

    pub fn delta_mean(&self) -> f64 {
        mean(&self.delta_quad)
    }

    pub fn eta_sum(&self) -> f64 {
        self.eta[0] + self.eta[1]
    }

    /// `eta_m` over one half interval from its sampled integrand, given
    /// the Gauss points' values of `theta0`, `theta1` and `delta`.
    pub fn accumulate(&self, half: usize, tau: f64) -> f64 {
        let mut s = 0.0;
        for (q, &(_, w)) in GAUSS3.iter().enumerate() {
            let a = self.mu0 + self.theta0_quad[half][q];
            let b = self.alpha + self.mu1 + self.delta_quad[half][q] + self.theta1_quad[half][q];
            s += w * a.hypot(b);
        }
        s * 0.5 * tau
    }
}

#[derive(Clone, Copy)]
pub struct EstimatorOptions {
    pub mu0_space: Mu0Space,
    /// Refinements of each element for the initial-error quadrature.
    pub initial_error_refine: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            mu0_space: Mu0Space::Printed,
            initial_error_refine: 4,
        }
    }
}

/// Everything entering the two bounds, plus the true errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub samples: Vec<IndicatorSample>,
    pub eta_total: f64,
    pub max_eps0: f64,
    pub max_eps1: f64,
    /// Energy norm of `(U^0 - u_0, V^{-1/2} - v(-tau/2))`.
    pub initial_energy_error: f64,
    pub bound_u: f64,
    pub bound_v: f64,
    /// `max_n ||c (U^n - u(t_n))'||`.
    pub true_error_u: f64,
    /// `max_{n >= 1} ||V^{n-1/2} - v(t_{n-1/2})||`.
    pub true_error_v: f64,
    /// `max_n ||U^n - u(t_n)||`.
    pub true_error_l2: f64,
    /// `max_n ||c u_x(t_n)||`, for relative errors.
    pub exact_energy_scale: f64,
}

impl EstimateReport {
    pub fn relative_energy_error(&self) -> f64 {
        self.true_error_u / self.exact_energy_scale
    }

    /// Largest deviation between the stored totals and the same totals
    /// recomputed from the per-step parts, relative to the bounds.
    pub fn self_consistency(&self) -> f64 {
        let eta: f64 = self.samples.iter().map(IndicatorSample::eta_sum).sum();
        let e0 = self
            .samples
            .iter()
            .skip(1)
            .map(|s| s.eps0)
            .fold(0.0, f64::max);
        let e1 = self
            .samples
            .iter()
            .skip(1)
            .map(|s| s.eps1)
            .fold(0.0, f64::max);
        let bu = e0 + self.initial_energy_error + 2.0 * eta;
        let bv = e1 + self.initial_energy_error + 2.0 * eta;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        rel(bu, self.bound_u).max(rel(bv, self.bound_v)).max(
            if self.eta_total == 0.0 && eta == 0.0 {
                0.0
            } else {
                rel(eta, self.eta_total)
            },
        )
    }
}

fn norm_of(w: &DiscreteField, norm: BrNorm) -> f64 {
    match norm {
        BrNorm::Energy => w.pot_norm(),
        BrNorm::Pivot => w.pivot_norm(),
    }
}

/// `||(Pi - Id) w|| + E[(Pi - Id) w, target, norm]`, zero when `w` already
/// lives in `to`.
fn pass_defect(
    w: &DiscreteField,
    to: &Arc<FeSpace>,
    target: &Arc<FeSpace>,
    norm: BrNorm,
) -> Result<f64> {
    if w.space().same_as(to) {
        return Ok(0.0);
    }
    let d = DiscreteField::lincomb(1.0, &w.pass_to(to)?, -1.0, w)?;
    if d.is_zero() {
        return Ok(0.0);
    }
    Ok(norm_of(&d, norm) + br_estimator(&d, target, norm)?)
}

/// Caches `A_k U^k` and `A_k V^{k-1/2}` over the trajectory.
struct Applied {
    au: Vec<DiscreteField>,
    av: Vec<DiscreteField>,
}

impl Applied {
    fn new(tr: &Trajectory) -> Result<Self> {
        let n = tr.steps() as i64;
        let au = (-1..=n + 1)
            .map(|k| Ok(tr.u(k)?.apply_elliptic()))
            .collect::<Result<Vec<_>>>()?;
        let av = (0..=n + 1)
            .map(|k| Ok(tr.v(k)?.apply_elliptic()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { au, av })
    }

    fn au(&self, k: i64) -> &DiscreteField {
        &self.au[(k + 1) as usize]
    }

    fn av(&self, k: i64) -> &DiscreteField {
        &self.av[k as usize]
    }
}

fn second_diff(
    prev: &DiscreteField,
    here: &DiscreteField,
    next: &DiscreteField,
    tau: f64,
) -> Result<DiscreteField> {
    let s = 1.0 / (tau * tau);
    DiscreteField::combination(&[(s, next), (-2.0 * s, here), (s, prev)])
}

fn cent_diff(prev: &DiscreteField, next: &DiscreteField, tau: f64) -> Result<DiscreteField> {
    DiscreteField::lincomb(0.5 / tau, next, -0.5 / tau, prev)
}

fn indicators_with(
    tr: &Trajectory,
    applied: &Applied,
    n: usize,
    problem: &dyn WaveProblem,
    opts: &EstimatorOptions,
) -> Result<IndicatorSample> {
    let steps = tr.steps();
    if n > steps {
        return Err(Error::Index(format!(
            "step {n} beyond the final step {steps}"
        )));
    }
    let grid = &tr.grid;
    let tau = grid.tau();
    let ni = n as i64;
    let s_prev = tr.space(n.saturating_sub(1));
    let s_here = tr.space(n);
    let s_next = tr.space(n + 1);
    let u = &tr.states[n].u;
    let v = &tr.states[n].v;

    let mut out = IndicatorSample {
        n,
        ..IndicatorSample::default()
    };

    if n >= 1 {
        let target = match opts.mu0_space {
            Mu0Space::Printed => s_here.intersection(s_next)?,
            Mu0Space::Shifted => s_prev.intersection(s_here)?,
        };
        out.mu0 = pass_defect(&tr.states[n - 1].u, s_here, &target, BrNorm::Energy)? / tau;
    }
    let meet_next = s_here.intersection(s_next)?;
    out.mu1 = pass_defect(v, s_next, &meet_next, BrNorm::Pivot)? / tau;

    let au_lts = u.apply_lts(tau);
    out.mu2 = pass_defect(&au_lts, s_next, s_next, BrNorm::Pivot)?;
    if s_here.has_fine_dofs() {
        let au = u.apply_elliptic();
        out.alpha0 = tau * tau / 16.0 * au.fine_interp().apply_elliptic().pivot_norm();
    }
    out.alpha1 = br_estimator(&au_lts, s_next, BrNorm::Pivot)?;
    out.alpha = out.alpha0 + out.alpha1 + out.mu2;
    out.eps0 = br_estimator(u, s_here, BrNorm::Energy)?;
    out.eps1 = br_estimator(v, s_here, BrNorm::Pivot)?;

    if n == 0 {
        return Ok(out);
    }

    // d^2 V^{n-1/2} and its elliptic estimator on V_{n-1} ∩ V_n ∩ V_{n+1};
    // only this part of theta0 gets an estimator term
    let d2v = second_diff(tr.v(ni - 1)?, tr.v(ni)?, tr.v(ni + 1)?, tau)?;
    let meet3 = s_prev.intersection(s_here)?.intersection(s_next)?;
    let d2v_est = br_estimator(&d2v, &meet3, BrNorm::Energy)?;
    // d^0 [A_k U^k] for k = n - 1, n
    let d0au = [
        cent_diff(applied.au(ni - 2), applied.au(ni), tau)?,
        cent_diff(applied.au(ni - 1), applied.au(ni + 1), tau)?,
    ];
    // d^2 [A_k U^k] for k = n - 1, n and d^0 [A_k V^{k-1/2}] at n - 1/2
    let d2au = [
        second_diff(applied.au(ni - 2), applied.au(ni - 1), applied.au(ni), tau)?,
        second_diff(applied.au(ni - 1), applied.au(ni), applied.au(ni + 1), tau)?,
    ];
    let d0av = cent_diff(applied.av(ni - 1), applied.av(ni + 1), tau)?;

    let f = &tr.sources[n];
    let t_lo = grid.node(HalfIndex::int(ni - 1));
    for half in 0..2 {
        let a = t_lo + 0.5 * tau * half as f64;
        // k = n - 1 on the first half, n on the second
        let k = HalfIndex::int(ni - 1 + half as i64);
        for (q, &(x, _)) in GAUSS3.iter().enumerate() {
            let t = a + 0.5 * tau * x;
            let c1 = 0.5 * (grid.hat(HalfIndex::int(ni), t)? - 1.0);
            let qb = grid.bubble(k, t)?;
            let th0 = DiscreteField::lincomb(c1, &d2v, -qb, &d0au[half])?;
            out.theta0_quad[half][q] = tau * tau * (th0.pot_norm() + c1.abs() * d2v_est);

            let l = grid.hat(k, t)?;
            let qh = grid.bubble(HalfIndex::minus_half(ni), t)?;
            let th1 = DiscreteField::lincomb(0.5 * l, &d2au[half], -qh, &d0av)?;
            out.theta1_quad[half][q] = tau * tau * th1.pivot_norm();

            out.delta_quad[half][q] = if problem.has_source() {
                f.l2_error(|x| problem.source(x, t), 1)
            } else {
                0.0
            };
        }
        out.eta[half] = out.accumulate(half, tau);
    }
    Ok(out)
}

/// Indicators of step `n` in `0..=N`.
pub fn indicators_at(
    tr: &Trajectory,
    n: usize,
    problem: &dyn WaveProblem,
    opts: &EstimatorOptions,
) -> Result<IndicatorSample> {
    let applied = Applied::new(tr)?;
    indicators_with(tr, &applied, n, problem, opts)
}

/// Indicators of all steps `0..=N`, evaluated in parallel.
pub fn all_indicators(
    tr: &Trajectory,
    problem: &dyn WaveProblem,
    opts: &EstimatorOptions,
) -> Result<Vec<IndicatorSample>> {
    let applied = Applied::new(tr)?;
    let count = tr.steps() + 1;
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(count)
        .max(1);
    let chunk = count.div_ceil(workers);
    let results: Vec<Result<Vec<IndicatorSample>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let applied = &applied;
                scope.spawn(move || {
                    (w * chunk..((w + 1) * chunk).min(count))
                        .map(|n| indicators_with(tr, applied, n, problem, opts))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("indicator worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(count);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Both bounds, the initial error and the true errors; needs the exact
/// solution of `problem`.
pub fn total_bounds(
    tr: &Trajectory,
    problem: &dyn WaveProblem,
    opts: &EstimatorOptions,
) -> Result<EstimateReport> {
    let exact = problem.exact().ok_or_else(|| {
        Error::Data("bounds need the exact solution for the initial error".into())
    })?;
    let samples = all_indicators(tr, problem, opts)?;
    let grid = &tr.grid;
    let tau = grid.tau();

    let s0 = &tr.states[0];
    let sub = opts.initial_error_refine;
    let e_u = s0.u.pot_error(|x| exact.u_x(x, 0.0), sub);
    let e_v = s0.v.l2_error(|x| exact.v(x, -0.5 * tau), sub);
    let initial_energy_error = e_u.hypot(e_v);

    let eta_total: f64 = samples.iter().map(IndicatorSample::eta_sum).sum();
    let max_eps0 = samples.iter().skip(1).map(|s| s.eps0).fold(0.0, f64::max);
    let max_eps1 = samples.iter().skip(1).map(|s| s.eps1).fold(0.0, f64::max);

    let mut true_error_u: f64 = 0.0;
    let mut true_error_l2: f64 = 0.0;
    let mut true_error_v: f64 = 0.0;
    let mut exact_energy_scale: f64 = 0.0;
    for (n, st) in tr.states.iter().enumerate() {
        let t = grid.t(n);
        true_error_u = true_error_u.max(st.u.pot_error(|x| exact.u_x(x, t), 1));
        true_error_l2 = true_error_l2.max(st.u.l2_error(|x| exact.u(x, t), 1));
        exact_energy_scale = exact_energy_scale
            .max(DiscreteField::zeros(st.space()).pot_error(|x| exact.u_x(x, t), 1));
        if n >= 1 {
            let th = t - 0.5 * tau;
            true_error_v = true_error_v.max(st.v.l2_error(|x| exact.v(x, th), 1));
        }
    }

    Ok(EstimateReport {
        bound_u: max_eps0 + initial_energy_error + 2.0 * eta_total,
        bound_v: max_eps1 + initial_energy_error + 2.0 * eta_total,
        samples,
        eta_total,
        max_eps0,
        max_eps1,
        initial_energy_error,
        true_error_u,
        true_error_v,
        true_error_l2,
        exact_energy_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::mesh::Window;
    use crate::problem::{GaussianPulse, Zero};
    use crate::stepper::run;

    struct Driven;

    impl WaveProblem for Driven {
        fn u0(&self, _x: f64) -> f64 {
            0.0
        }

        fn v0(&self, _x: f64) -> f64 {
            0.0
        }

        fn source(&self, x: f64, t: f64) -> f64 {
            (-x * x).exp() * (3.0 * t).sin()
        }

        fn has_source(&self) -> bool {
            true
        }
    }

    fn samples(cfg: &RunConfig, problem: &dyn WaveProblem) -> (Trajectory, Vec<IndicatorSample>) {
        let tr = run(cfg, problem).unwrap();
        let s = all_indicators(&tr, problem, &EstimatorOptions::default()).unwrap();
        (tr, s)
    }

    #[test]
    fn fixed_mesh_has_no_mesh_change_indicators() {
        let cfg = RunConfig {
            move_window: false,
            ..RunConfig::default()
        };
        let (_, s) = samples(&cfg, &GaussianPulse::default());
        assert!(s
            .iter()
            .all(|x| x.mu0 == 0.0 && x.mu1 == 0.0 && x.mu2 == 0.0));
    }

    #[test]
    fn mesh_change_indicators_are_local() {
        let (tr, s) = samples(&RunConfig::default(), &GaussianPulse::default());
        assert!(!tr.mesh_change_steps.is_empty());
        for x in &s {
            let n = x.n;
            let changed_here = n >= 1 && !tr.space(n - 1).same_as(tr.space(n));
            let changes_next = !tr.space(n).same_as(tr.space(n + 1));
            assert_eq!(x.mu0 > 0.0, changed_here, "mu0 at {n}");
            assert_eq!(x.mu1 > 0.0, changes_next, "mu1 at {n}");
            if !changes_next {
                assert_eq!(x.mu2, 0.0);
            }
        }
    }

    #[test]
    fn no_source_means_no_data_indicator() {
        let (_, s) = samples(&RunConfig::default(), &GaussianPulse::default());
        assert!(s.iter().all(|x| x.delta_mean() == 0.0));
        let (_, s) = samples(&RunConfig::default(), &Driven);
        assert!(s.iter().skip(1).all(|x| x.delta_mean() > 0.0));
    }

    #[test]
    fn uniform_mesh_has_no_local_stepping_indicator() {
        let cfg = RunConfig {
            window: Window::empty(),
            ..RunConfig::default()
        };
        let (_, s) = samples(&cfg, &GaussianPulse::default());
        assert!(s.iter().all(|x| x.alpha0 == 0.0));
        let (_, s) = samples(&RunConfig::default(), &GaussianPulse::default());
        assert!(s.iter().any(|x| x.alpha0 > 0.0));
    }

    #[test]
    fn indicators_are_finite_and_nonnegative() {
        let (_, s) = samples(&RunConfig::default(), &Driven);
        for x in &s {
            let parts = [
                x.mu0, x.mu1, x.mu2, x.alpha0, x.alpha1, x.alpha, x.eps0, x.eps1, x.eta[0],
                x.eta[1],
            ];
            assert!(parts.iter().all(|v| v.is_finite() && *v >= 0.0), "{x:?}");
            assert!(x
                .theta0_quad
                .iter()
                .chain(&x.theta1_quad)
                .flatten()
                .all(|v| v.is_finite() && *v >= 0.0));
            assert!((x.alpha - x.alpha0 - x.alpha1 - x.mu2).abs() <= 1e-15 * x.alpha);
        }
        assert!(s[0].eta == [0.0, 0.0]);
    }

    #[test]
    fn single_step_matches_batch() {
        let cfg = RunConfig::default();
        let p = GaussianPulse::default();
        let (tr, s) = samples(&cfg, &p);
        for n in [0, 3, tr.steps()] {
            assert_eq!(
                indicators_at(&tr, n, &p, &EstimatorOptions::default()).unwrap(),
                s[n]
            );
        }
        assert!(matches!(
            indicators_at(&tr, tr.steps() + 1, &p, &EstimatorOptions::default()),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn bounds_are_self_consistent_and_reliable() {
        let p = GaussianPulse::default();
        let tr = run(&RunConfig::default(), &p).unwrap();
        let r = total_bounds(&tr, &p, &EstimatorOptions::default()).unwrap();
        assert!(r.self_consistency() < 1e-12);
        assert!(r.bound_u >= r.true_error_u);
        assert!(r.bound_v >= r.true_error_v);
        assert!(r.relative_energy_error() > 0.0);
    }

    #[test]
    fn zero_data_gives_zero_bounds() {
        let tr = run(&RunConfig::default(), &Zero).unwrap();
        let r = total_bounds(&tr, &Zero, &EstimatorOptions::default()).unwrap();
        assert_eq!((r.bound_u, r.bound_v, r.eta_total), (0.0, 0.0, 0.0));
        assert_eq!(r.self_consistency(), 0.0);
    }

    #[test]
    fn bounds_need_an_exact_solution() {
        let tr = run(&RunConfig::default(), &Driven).unwrap();
        assert!(matches!(
            total_bounds(&tr, &Driven, &EstimatorOptions::default()),
            Err(Error::Data(_))
        ));
    }
}
