//! Uniform primal and staggered time grids.
//!
//! Time nodes are addressed by [`HalfIndex`], which stores twice the
//! (possibly half-integer) index so that `t_{n-1/2}` and `t_n` are both exact
//! integers in bookkeeping. The grid owns the piecewise linear hat functions
//! `ell_nu`, the quadratic bubbles `q_nu` and the finite-difference operators
//! used by the scheme and by the estimators.
//!
//! The bubble `q_nu` is supported on `[t_{nu-1/2}, t_{nu+1/2}]`, vanishes at
//! both ends and peaks at `1/8` in `t_nu`.

use crate::error::{Error, Result};

/// Integer or half-integer time index, stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfIndex {
    pub twice: i64,
}

impl HalfIndex {
    /// The integer index `n`.
    pub const fn int(n: i64) -> Self {
        Self { twice: 2 * n }
    }

    /// The staggered index `n - 1/2`.
    pub const fn minus_half(n: i64) -> Self {
        Self { twice: 2 * n - 1 }
    }

    /// The staggered index `n + 1/2`.
    pub const fn plus_half(n: i64) -> Self {
        Self { twice: 2 * n + 1 }
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// Shift by a whole number of steps (keeps the parity).
    pub fn shift(self, steps: i64) -> Self {
        Self {
            twice: self.twice + 2 * steps,
        }
    }

    /// Shift by half steps (flips parity when odd).
    pub fn shift_half(self, halves: i64) -> Self {
        Self {
            twice: self.twice + halves,
        }
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }
}

impl std::fmt::Display for HalfIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Uniform partition `0 = t_0 < ... < t_N = T` with step `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
    tau: f64,
}

impl TimeGrid {
    /// `N` steps of size `T / N`.
    pub fn uniform(final_time: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config(
                "a uniform grid needs at least one step".into(),
            ));
        }
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        Ok(Self {
            final_time,
            steps,
            tau: final_time / steps as f64,
        })
    }

    /// `N` steps of a prescribed size; `T = N tau` (allows `N = 0`).
    pub fn from_step(tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!(
                "time step must be positive, got {tau}"
            )));
        }
        Ok(Self {
            final_time: tau * steps as f64,
            steps,
            tau,
        })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn check(&self, nu: HalfIndex) -> Result<()> {
        let max = 2 * self.steps as i64 + 1;
        if nu.twice < -1 || nu.twice > max {
            return Err(Error::Index(format!(
                "time index {nu} outside [-1/2, {}/2]",
                max
            )));
        }
        Ok(())
    }

    /// `t_nu = nu * tau`, without range checks.
    pub fn node(&self, nu: HalfIndex) -> f64 {
        nu.value() * self.tau
    }

    /// `t_n` for integer `n`.
    pub fn t(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.tau
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let lo = -0.5 * self.tau * (1.0 + 1e-12);
        let hi = self.final_time + 0.5 * self.tau * (1.0 + 1e-12);
        if !(t >= lo && t <= hi) {
            return Err(Error::Range(format!("t = {t} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Piecewise linear hat `ell_nu`: one at `t_nu`, zero at `t_nu +- tau`.
    pub fn hat(&self, nu: HalfIndex, t: f64) -> Result<f64> {
        self.check(nu)?;
        self.check_time(t)?;
        Ok(hat_value(nu.value(), t / self.tau))
    }

    /// Quadratic bubble `q_nu`.
    pub fn bubble(&self, nu: HalfIndex, t: f64) -> Result<f64> {
        self.check(nu)?;
        self.check_time(t)?;
        Ok(bubble_value(nu.value(), t / self.tau))
    }
}

// Both take the index and the time in units of tau.
pub fn hat_value(nu: f64, s: f64) -> f64 {
    (1.0 - (s - nu).abs()).max(0.0)
}

pub fn bubble_value(nu: f64, s: f64) -> f64 {
    let d = s - nu;
    (0.5 * (0.5 + d) * (0.5 - d)).max(0.0)
}

/// Values that can be combined linearly: scalars, coefficient vectors.
pub trait NodeValue: Clone {
    /// `a * x + b * y`
    fn axpby(a: f64, x: &Self, b: f64, y: &Self) -> Self;
}

impl NodeValue for f64 {
    fn axpby(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        a * x + b * y
    }
}

impl NodeValue for Vec<f64> {
    fn axpby(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        crate::linalg::axpby(a, x, b, y)
    }
}

/// A sequence of values living on one of the two time grids, at consecutive
/// indices `first, first + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeq<V> {
    first: HalfIndex,
    values: Vec<V>,
}

impl<V: NodeValue> NodeSeq<V> {
    pub fn new(first: HalfIndex, values: Vec<V>) -> Self {
        Self { first, values }
    }

    pub fn first(&self) -> HalfIndex {
        self.first
    }

    pub fn last(&self) -> HalfIndex {
        self.first.shift(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn get(&self, nu: HalfIndex) -> Result<&V> {
        let d = nu.twice - self.first.twice;
        if d.rem_euclid(2) != 0 {
            return Err(Error::Index(format!(
                "index {nu} has the wrong parity for a sequence starting at {}",
                self.first
            )));
        }
        let k = d / 2;
        if k < 0 || k as usize >= self.values.len() {
            return Err(Error::Index(format!(
                "index {nu} outside sequence [{}, {}]",
                self.first,
                self.last()
            )));
        }
        Ok(&self.values[k as usize])
    }
}

/// `(phi^{nu+1} - phi^nu) / tau`
pub fn fore_diff<V: NodeValue>(seq: &NodeSeq<V>, nu: HalfIndex, tau: f64) -> Result<V> {
    let next = seq.get(nu.shift(1))?;
    let here = seq.get(nu)?;
    Ok(V::axpby(1.0 / tau, next, -1.0 / tau, here))
}

/// `(phi^{nu+1} - phi^{nu-1}) / (2 tau)`
pub fn cent_diff<V: NodeValue>(seq: &NodeSeq<V>, nu: HalfIndex, tau: f64) -> Result<V> {
    let next = seq.get(nu.shift(1))?;
    let prev = seq.get(nu.shift(-1))?;
    let s = 0.5 / tau;
    Ok(V::axpby(s, next, -s, prev))
}

/// `(phi^{nu+1} - 2 phi^nu + phi^{nu-1}) / tau^2`
pub fn second_diff<V: NodeValue>(seq: &NodeSeq<V>, nu: HalfIndex, tau: f64) -> Result<V> {
    let next = seq.get(nu.shift(1))?;
    let here = seq.get(nu)?;
    let prev = seq.get(nu.shift(-1))?;
    let s = 1.0 / (tau * tau);
    let outer = V::axpby(s, next, s, prev);
    Ok(V::axpby(1.0, &outer, -2.0 * s, here))
}

/// Continuous piecewise linear interpolation `sum_nu phi^nu ell_nu(t)`.
pub fn pw_linear_interp<V: NodeValue>(seq: &NodeSeq<V>, grid: &TimeGrid, t: f64) -> Result<V> {
    let tau = grid.tau();
    let t0 = grid.node(seq.first());
    let t1 = grid.node(seq.last());
    let slack = 1e-12 * tau;
    if !(t >= t0 - slack && t <= t1 + slack) {
        return Err(Error::Range(format!(
            "t = {t} outside sequence span [{t0}, {t1}]"
        )));
    }
    let n = seq.values().len();
    if n == 1 {
        return Ok(seq.values()[0].clone());
    }
    let s = ((t - t0) / tau).clamp(0.0, (n - 1) as f64);
    let k = (s.floor() as usize).min(n - 2);
    let w = s - k as f64;
    Ok(V::axpby(1.0 - w, &seq.values()[k], w, &seq.values()[k + 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> TimeGrid {
        TimeGrid::uniform(1.0, 10).unwrap()
    }

    #[test]
    fn hat_nodal_values() {
        let g = grid();
        for n in 0..=10 {
            let nu = HalfIndex::int(n);
            assert!((g.hat(nu, g.node(nu)).unwrap() - 1.0).abs() < 1e-14);
            if n < 10 {
                assert!(g.hat(nu, g.node(nu.shift(1))).unwrap().abs() < 1e-14);
            }
        }
        assert!(g.hat(HalfIndex::int(12), 0.5).is_err());
        assert!(g.hat(HalfIndex { twice: -2 }, 0.5).is_err());
    }

    #[test]
    fn partition_of_unity() {
        let g = TimeGrid::uniform(2.5, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let t: f64 = rng.gen_range(0.0..=2.5);
            let s: f64 = (0..=17).map(|n| g.hat(HalfIndex::int(n), t).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-14, "t={t} sum={s}");
        }
    }

    #[test]
    fn bubble_values() {
        let g = TimeGrid::from_step(1.0, 4).unwrap();
        let nu = HalfIndex::int(0);
        assert_eq!(g.bubble(nu, -0.5).unwrap(), 0.0);
        assert_eq!(g.bubble(nu, 0.5).unwrap(), 0.0);
        assert_eq!(g.bubble(nu, 0.0).unwrap(), 0.125);
        assert!((g.bubble(nu, 0.25).unwrap() - 0.09375).abs() < 1e-16);
        let nu = HalfIndex::plus_half(1);
        assert_eq!(g.bubble(nu, 1.5).unwrap(), 0.125);
        assert_eq!(g.bubble(nu, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn bubble_bounds() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let t: f64 = rng.gen_range(0.0..=1.0);
            let nu = HalfIndex {
                twice: rng.gen_range(0..=20),
            };
            let q = g.bubble(nu, t).unwrap();
            assert!((0.0..=0.125).contains(&q));
        }
    }

    #[test]
    fn difference_examples() {
        let seq = NodeSeq::new(HalfIndex::int(0), vec![0.0, 1.0, 4.0]);
        assert_eq!(fore_diff(&seq, HalfIndex::int(1), 1.0).unwrap(), 3.0);
        let seq = NodeSeq::new(HalfIndex::int(0), vec![1.0, 0.0, 1.0]);
        assert_eq!(second_diff(&seq, HalfIndex::int(1), 0.5).unwrap(), 8.0);
        assert!(second_diff(&seq, HalfIndex::int(2), 0.5).is_err());
        assert!(fore_diff(&seq, HalfIndex::plus_half(0), 0.5).is_err());

        let g = grid();
        let tau = g.tau();
        let lin = NodeSeq::new(
            HalfIndex::int(0),
            (0..=10).map(|n| g.node(HalfIndex::int(n))).collect(),
        );
        let konst = NodeSeq::new(HalfIndex::int(0), vec![3.5; 11]);
        let quad = NodeSeq::new(
            HalfIndex::int(0),
            (0..=10)
                .map(|n| g.node(HalfIndex::int(n)).powi(2))
                .collect(),
        );
        for n in 1..10 {
            let nu = HalfIndex::int(n);
            assert_eq!(fore_diff(&konst, nu, tau).unwrap(), 0.0);
            assert!((fore_diff(&lin, nu, tau).unwrap() - 1.0).abs() < 1e-13);
            assert!((cent_diff(&lin, nu, tau).unwrap() - 1.0).abs() < 1e-13);
            assert!(second_diff(&lin, nu, tau).unwrap().abs() < 1e-12 / (tau * tau));
            assert!((second_diff(&quad, nu, tau).unwrap() - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_examples() {
        let g = TimeGrid::from_step(1.0, 1).unwrap();
        let seq = NodeSeq::new(HalfIndex::int(0), vec![0.0, 2.0]);
        assert_eq!(pw_linear_interp(&seq, &g, 0.25).unwrap(), 0.5);
        assert_eq!(pw_linear_interp(&seq, &g, 1.0).unwrap(), 2.0);
        assert_eq!(pw_linear_interp(&seq, &g, 0.5).unwrap(), 1.0);
        assert!(pw_linear_interp(&seq, &g, 1.5).is_err());

        let stag = NodeSeq::new(HalfIndex::minus_half(0), vec![1.0, 3.0, -1.0]);
        assert_eq!(pw_linear_interp(&stag, &g, 0.5).unwrap(), 3.0);
        assert_eq!(pw_linear_interp(&stag, &g, 0.0).unwrap(), 2.0);
        assert!(pw_linear_interp(&stag, &g, -0.75).is_err());
    }

    #[test]
    fn interpolation_matches_hat_sum() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let seq = NodeSeq::new(HalfIndex::minus_half(0), vals.clone());
        for _ in 0..100 {
            let t: f64 = rng.gen_range(-0.0625..1.0625);
            let direct: f64 = (0..10)
                .map(|k| vals[k] * g.hat(HalfIndex::minus_half(k as i64), t).unwrap())
                .sum();
            let interp = pw_linear_interp(&seq, &g, t).unwrap();
            assert!((direct - interp).abs() < 1e-14);
        }
    }

    proptest::proptest! {
        #[test]
        fn centered_is_mean_of_forward(vals in proptest::collection::vec(-1e3f64..1e3, 3..12), tau in 1e-3f64..10.0) {
            let seq = NodeSeq::new(HalfIndex::int(0), vals.clone());
            for n in 1..vals.len() as i64 - 1 {
                let nu = HalfIndex::int(n);
                let c = cent_diff(&seq, nu, tau).unwrap();
                let f = 0.5 * (fore_diff(&seq, nu, tau).unwrap() + fore_diff(&seq, nu.shift(-1), tau).unwrap());
                let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())) / tau;
                proptest::prop_assert!((c - f).abs() <= 1e-14 * scale.max(1e-300) * 4.0);
            }
        }

        #[test]
        fn second_diff_kills_affine(a in -1e3f64..1e3, b in -1e3f64..1e3, tau in 1e-2f64..1.0) {
            let g = TimeGrid::from_step(tau, 6).unwrap();
            let vals: Vec<f64> = (0..=6).map(|n| a + b * g.node(HalfIndex::int(n))).collect();
            let inf = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let seq = NodeSeq::new(HalfIndex::int(0), vals);
            for n in 1..6 {
                let d2 = second_diff(&seq, HalfIndex::int(n), tau).unwrap();
                proptest::prop_assert!(d2.abs() <= 1e-12 * inf.max(1.0) / (tau * tau));
            }
        }
    }
}
