//! Algebraic identities between the time reconstructions of staggered
//! sequences, checked on random data.
//!
//! For a displacement-like sequence `w^k` on the integer grid, a
//! velocity-like sequence `V^{k-1/2}` on the staggered grid and an
//! arbitrary sequence `a^k` standing for `A_k U^k`:
//!
//! * `w(t)`, `V(t)` are the piecewise linear interpolants on their own grid;
//! * `ŵ(t)`, `V̂(t)` interpolate `w`, `V` again, on the opposite grid;
//! * `w̆` on `[t_{n-1}, t_n]` integrates `V̂` from `w^{n-1}` and `V̆` on
//!   `[t_{n-1/2}, t_{n+1/2}]` integrates `-â` from `V^{n-1/2}`, each with the
//!   linear correction that makes it hit the next node value.
//!
//! The identities are linear in the node values, so vectors of any length
//! exercise them fully.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quadrature::{integrate, GAUSS2};
use crate::timegrid::{bubble_value, hat_value};

/// The time basis, in units of the step: `hat(nu, t / tau)` and
/// `bubble(nu, t / tau)`. Replaceable so that the suite can be shown to
/// catch a wrong basis.
#[derive(Clone, Copy)]
pub struct TimeBasis {
    pub hat: fn(f64, f64) -> f64,
    pub bubble: fn(f64, f64) -> f64,
}

impl Default for TimeBasis {
    fn default() -> Self {
        Self {
            hat: hat_value,
            bubble: bubble_value,
        }
    }
}

pub const STAGGERED: &str = "staggered interpolation";
pub const LINEAR_V: &str = "piecewise linear time-reconstruction residual (velocity)";
pub const LINEAR_W: &str = "piecewise linear time-reconstruction residual (displacement)";
pub const QUADRATIC_V: &str = "quadratic time-reconstruction residual (velocity)";
pub const QUADRATIC_W: &str = "quadratic time-reconstruction residual (displacement)";
pub const FULL_V: &str = "full time-reconstruction residual (velocity)";
pub const FULL_W: &str = "full time-reconstruction residual (displacement)";

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub max_residual: f64,
    /// Interval index and time of the worst residual.
    pub worst: (i64, f64),
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }
}

type Vector = Vec<f64>;

fn axpy(y: &mut Vector, a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(u, v)| *u += a * v);
}

fn combo(terms: &[(f64, &[f64])]) -> Vector {
    let mut y = vec![0.0; terms[0].1.len()];
    for (a, x) in terms {
        axpy(&mut y, *a, x);
    }
    y
}

/// Node sequences with their time reconstructions.
struct Sequences {
    tau: f64,
    basis: TimeBasis,
    /// `w^k`, `k = -2..=N+2`
    w: Vec<Vector>,
    /// `a^k`, `k = -2..=N+2`
    a: Vec<Vector>,
    /// `V^{k-1/2}`, `k = -1..=N+2`
    v: Vec<Vector>,
}

impl Sequences {
    fn w(&self, k: i64) -> &[f64] {
        &self.w[(k + 2) as usize]
    }

    fn a(&self, k: i64) -> &[f64] {
        &self.a[(k + 2) as usize]
    }

    /// `V^{k-1/2}`
    fn v(&self, k: i64) -> &[f64] {
        &self.v[(k + 1) as usize]
    }

    fn hat(&self, nu: f64, t: f64) -> f64 {
        (self.basis.hat)(nu, t / self.tau)
    }

    fn bubble(&self, nu: f64, t: f64) -> f64 {
        (self.basis.bubble)(nu, t / self.tau)
    }

    fn node_range(&self, t: f64) -> (i64, i64) {
        let s = t / self.tau;
        (s.floor() as i64 - 1, s.ceil() as i64 + 1)
    }

    /// `sum_k f(k) l_k(t)` over integer `k` near `t`.
    fn on_integers(&self, t: f64, f: impl Fn(i64) -> Vector) -> Vector {
        let (lo, hi) = self.node_range(t);
        let mut y = vec![0.0; self.w[0].len()];
        for k in lo..=hi {
            let l = self.hat(k as f64, t);
            if l != 0.0 {
                axpy(&mut y, l, &f(k));
            }
        }
        y
    }

    /// `sum_k f(k) l_{k-1/2}(t)`.
    fn on_halves(&self, t: f64, f: impl Fn(i64) -> Vector) -> Vector {
        let (lo, hi) = self.node_range(t);
        let mut y = vec![0.0; self.w[0].len()];
        for k in lo..=hi + 1 {
            let l = self.hat(k as f64 - 0.5, t);
            if l != 0.0 {
                axpy(&mut y, l, &f(k));
            }
        }
        y
    }

    fn w_lin(&self, t: f64) -> Vector {
        self.on_integers(t, |k| self.w(k).to_vec())
    }

    fn v_lin(&self, t: f64) -> Vector {
        self.on_halves(t, |k| self.v(k).to_vec())
    }

    /// `ŵ`: interpolates `w(t_{k-1/2}) = (w^{k-1} + w^k) / 2` on the half grid.
    fn w_hat(&self, t: f64) -> Vector {
        self.on_halves(t, |k| combo(&[(0.5, self.w(k - 1)), (0.5, self.w(k))]))
    }

    /// `â`, built like `ŵ` from `a`.
    fn a_hat(&self, t: f64) -> Vector {
        self.on_halves(t, |k| combo(&[(0.5, self.a(k - 1)), (0.5, self.a(k))]))
    }

    /// `V̂`: interpolates `V(t_k) = (V^{k-1/2} + V^{k+1/2}) / 2` on the integer grid.
    fn v_hat(&self, t: f64) -> Vector {
        self.on_integers(t, |k| combo(&[(0.5, self.v(k)), (0.5, self.v(k + 1))]))
    }

    /// Exact integral of a piecewise linear function of time with kinks on
    /// the half grid.
    fn integral(&self, lo: f64, hi: f64, f: impl Fn(f64) -> Vector) -> Vector {
        let dim = self.w[0].len();
        let mut out = vec![0.0; dim];
        let mut cuts = vec![lo];
        let step = 0.5 * self.tau;
        let mut c = ((lo / step).floor() + 1.0) * step;
        while c < hi {
            if c > lo {
                cuts.push(c);
            }
            c += step;
        }
        cuts.push(hi);
        for win in cuts.windows(2) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += integrate(&GAUSS2, win[0], win[1], |s| f(s)[i]);
            }
        }
        out
    }

    /// `V̆` on `[t_{n-1/2}, t_{n+1/2}]`.
    fn v_quad(&self, n: i64, t: f64) -> Vector {
        let lo = (n as f64 - 0.5) * self.tau;
        let hi = lo + self.tau;
        let full = self.integral(lo, hi, |s| self.a_hat(s));
        // slope making V̆(t_{n+1/2}) = V^{n+1/2}
        let g = combo(&[
            (1.0 / self.tau, self.v(n + 1)),
            (-1.0 / self.tau, self.v(n)),
            (1.0 / self.tau, &full),
        ]);
        let part = self.integral(lo, t, |s| self.a_hat(s));
        combo(&[(1.0, self.v(n)), (-1.0, &part), (t - lo, &g)])
    }

    /// `w̆` on `[t_{n-1}, t_n]`.
    fn w_quad(&self, n: i64, t: f64) -> Vector {
        let lo = (n - 1) as f64 * self.tau;
        let hi = lo + self.tau;
        let full = self.integral(lo, hi, |s| self.v_hat(s));
        let q = combo(&[
            (1.0 / self.tau, self.w(n)),
            (-1.0 / self.tau, self.w(n - 1)),
            (-1.0 / self.tau, &full),
        ]);
        let part = self.integral(lo, t, |s| self.v_hat(s));
        combo(&[(1.0, self.w(n - 1)), (1.0, &part), (t - lo, &q)])
    }

    fn d2(&self, prev: &[f64], here: &[f64], next: &[f64]) -> Vector {
        let s = 1.0 / (self.tau * self.tau);
        combo(&[(s, next), (-2.0 * s, here), (s, prev)])
    }

    fn d0(&self, prev: &[f64], next: &[f64]) -> Vector {
        combo(&[(0.5 / self.tau, next), (-0.5 / self.tau, prev)])
    }

    /// `1/2 (d²V^{n-1/2} l_{n-1} + d²V^{n+1/2} l_{n+1}) tau²`
    fn linear_v_rhs(&self, n: i64, t: f64) -> Vector {
        let lo = self.d2(self.v(n - 1), self.v(n), self.v(n + 1));
        let hi = self.d2(self.v(n), self.v(n + 1), self.v(n + 2));
        let t2 = self.tau * self.tau;
        combo(&[
            (0.5 * t2 * self.hat((n - 1) as f64, t), &lo),
            (0.5 * t2 * self.hat((n + 1) as f64, t), &hi),
        ])
    }

    /// `1/2 (d²w^{n-1} l_{n-3/2} + d²w^n l_{n+1/2}) tau²`
    fn linear_w_rhs(&self, n: i64, t: f64) -> Vector {
        let lo = self.d2(self.w(n - 2), self.w(n - 1), self.w(n));
        let hi = self.d2(self.w(n - 1), self.w(n), self.w(n + 1));
        let t2 = self.tau * self.tau;
        combo(&[
            (0.5 * t2 * self.hat(n as f64 - 1.5, t), &lo),
            (0.5 * t2 * self.hat(n as f64 + 0.5, t), &hi),
        ])
    }

    /// `d⁰a^n q_n tau²`
    fn quad_v_rhs(&self, n: i64, t: f64) -> Vector {
        let d = self.d0(self.a(n - 1), self.a(n + 1));
        combo(&[(self.bubble(n as f64, t) * self.tau * self.tau, &d)])
    }

    /// `-d⁰V^{n-1/2} q_{n-1/2} tau²`
    fn quad_w_rhs(&self, n: i64, t: f64) -> Vector {
        let d = self.d0(self.v(n - 1), self.v(n + 1));
        combo(&[(-self.bubble(n as f64 - 0.5, t) * self.tau * self.tau, &d)])
    }
}

struct Tally {
    name: &'static str,
    max: f64,
    worst: (i64, f64),
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            max: 0.0,
            worst: (0, 0.0),
        }
    }

    fn record(&mut self, n: i64, t: f64, lhs: &[f64], rhs: &[f64], scale: f64) {
        let err = lhs
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let r = err / scale;
        if r > self.max || r.is_nan() {
            self.max = r;
            self.worst = (n, t);
        }
    }

    fn finish(self, tol: f64) -> IdentityCheck {
        IdentityCheck {
            name: self.name,
            max_residual: self.max,
            worst: self.worst,
            passed: self.max < tol,
        }
    }
}

/// Checks every identity on `trials` random triples of sequences of
/// vectors of length `dim`, at `samples` random times per interval of a grid
/// with `steps` steps. Residuals are relative to the largest node value.
pub fn verify_reconstruction_identities(
    trials: usize,
    samples: usize,
    steps: usize,
    dim: usize,
    seed: u64,
    basis: TimeBasis,
    tol: f64,
) -> IdentityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tallies: Vec<Tally> = [
        STAGGERED,
        LINEAR_V,
        LINEAR_W,
        QUADRATIC_V,
        QUADRATIC_W,
        FULL_V,
        FULL_W,
    ]
    .into_iter()
    .map(Tally::new)
    .collect();
    let n_max = steps as i64;
    for _ in 0..trials {
        let tau = rng.gen_range(0.05..1.0);
        let mut gen = |count: usize| -> Vec<Vector> {
            (0..count)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        };
        let seqs = Sequences {
            tau,
            basis,
            w: gen(steps + 5),
            a: gen(steps + 5),
            v: gen(steps + 4),
        };
        let scale = 1.0;
        let t_at = |k: f64| k * tau;
        for n in 1..n_max {
            for _ in 0..samples {
                // staggered interpolation at the nodes themselves
                let lhs = seqs.w_hat(t_at(n as f64));
                let rhs = combo(&[
                    (0.5, &seqs.w_lin(t_at(n as f64 - 0.5))),
                    (0.5, &seqs.w_lin(t_at(n as f64 + 0.5))),
                ]);
                tallies[0].record(n, t_at(n as f64), &lhs, &rhs, scale);
                let lhs = seqs.v_hat(t_at(n as f64 - 0.5));
                let rhs = combo(&[
                    (0.5, &seqs.v_lin(t_at(n as f64 - 1.0))),
                    (0.5, &seqs.v_lin(t_at(n as f64))),
                ]);
                tallies[0].record(n, t_at(n as f64 - 0.5), &lhs, &rhs, scale);

                // [t_{n-1/2}, t_{n+1/2}] for the velocity identities
                let t = t_at(n as f64 - 0.5 + rng.gen_range(0.0..1.0));
                let lin_v = combo(&[(1.0, &seqs.v_hat(t)), (-1.0, &seqs.v_lin(t))]);
                let lin_v_rhs = seqs.linear_v_rhs(n, t);
                tallies[1].record(n, t, &lin_v, &lin_v_rhs, scale);
                let quad_v = combo(&[(1.0, &seqs.v_quad(n, t)), (-1.0, &seqs.v_lin(t))]);
                let quad_v_rhs = seqs.quad_v_rhs(n, t);
                tallies[3].record(n, t, &quad_v, &quad_v_rhs, scale);
                let full_v = combo(&[(1.0, &seqs.v_hat(t)), (-1.0, &seqs.v_quad(n, t))]);
                tallies[5].record(
                    n,
                    t,
                    &full_v,
                    &combo(&[(1.0, &lin_v_rhs), (-1.0, &quad_v_rhs)]),
                    scale,
                );

                // [t_{n-1}, t_n] for the displacement identities
                let t = t_at(n as f64 - 1.0 + rng.gen_range(0.0..1.0));
                let lin_w = combo(&[(1.0, &seqs.w_hat(t)), (-1.0, &seqs.w_lin(t))]);
                let lin_w_rhs = seqs.linear_w_rhs(n, t);
                tallies[2].record(n, t, &lin_w, &lin_w_rhs, scale);
                let quad_w = combo(&[(1.0, &seqs.w_quad(n, t)), (-1.0, &seqs.w_lin(t))]);
                let quad_w_rhs = seqs.quad_w_rhs(n, t);
                tallies[4].record(n, t, &quad_w, &quad_w_rhs, scale);
                let full_w = combo(&[(1.0, &seqs.w_hat(t)), (-1.0, &seqs.w_quad(n, t))]);
                tallies[6].record(
                    n,
                    t,
                    &full_w,
                    &combo(&[(1.0, &lin_w_rhs), (-1.0, &quad_w_rhs)]),
                    scale,
                );
            }
        }
    }
    IdentityReport {
        checks: tallies.into_iter().map(|t| t.finish(tol)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold_on_random_sequences() {
        let r = verify_reconstruction_identities(20, 10, 6, 3, 1, TimeBasis::default(), 1e-12);
        for c in &r.checks {
            assert!(
                c.passed,
                "{} residual {:e} at {:?}",
                c.name, c.max_residual, c.worst
            );
        }
    }

    #[test]
    fn wrong_bubble_sign_is_caught() {
        fn flipped(nu: f64, s: f64) -> f64 {
            -bubble_value(nu, s)
        }
        let basis = TimeBasis {
            bubble: flipped,
            ..TimeBasis::default()
        };
        let r = verify_reconstruction_identities(3, 3, 4, 2, 2, basis, 1e-12);
        let failed = r.failed();
        assert!(failed.contains(&QUADRATIC_V) && failed.contains(&QUADRATIC_W));
        assert!(!failed.contains(&LINEAR_V) && !failed.contains(&STAGGERED));
    }
}
