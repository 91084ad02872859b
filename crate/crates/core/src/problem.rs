//! Data of the wave equation `u_tt - (c^2 u_x)_x = f` and, when known, its
//! exact solution.

/// Initial displacement and velocity plus the source term.
pub trait WaveProblem: Sync {
    fn u0(&self, x: f64) -> f64;

    fn v0(&self, x: f64) -> f64;

    fn source(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    /// False for the default zero source; lets callers skip quadrature.
    fn has_source(&self) -> bool {
        false
    }

    /// Whether the source is continuous in time, so it may be sampled at
    /// the time nodes instead of averaged.
    fn source_is_continuous(&self) -> bool {
        true
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        None
    }
}

/// Closed-form solution: displacement, its space derivative and velocity.
pub trait ExactSolution: Sync {
    fn u(&self, x: f64, t: f64) -> f64;
    fn u_x(&self, x: f64, t: f64) -> f64;
    fn v(&self, x: f64, t: f64) -> f64;
}

/// Right-moving pulse `exp(-k (x - x0 - t)^2)` for unit wave speed and no
/// source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub center: f64,
    pub sharpness: f64,
}

impl Default for GaussianPulse {
    fn default() -> Self {
        Self {
            center: 1.0,
            sharpness: 4.0,
        }
    }
}

impl ExactSolution for GaussianPulse {
    fn u(&self, x: f64, t: f64) -> f64 {
        let s = x - self.center - t;
        (-self.sharpness * s * s).exp()
    }

    fn u_x(&self, x: f64, t: f64) -> f64 {
        let s = x - self.center - t;
        -2.0 * self.sharpness * s * (-self.sharpness * s * s).exp()
    }

    fn v(&self, x: f64, t: f64) -> f64 {
        -self.u_x(x, t)
    }
}

impl WaveProblem for GaussianPulse {
    fn u0(&self, x: f64) -> f64 {
        self.u(x, 0.0)
    }

    fn v0(&self, x: f64) -> f64 {
        self.v(x, 0.0)
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self)
    }
}

/// Everything zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Zero;

impl ExactSolution for Zero {
    fn u(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn u_x(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn v(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
}

impl WaveProblem for Zero {
    fn u0(&self, _x: f64) -> f64 {
        0.0
    }

    fn v0(&self, _x: f64) -> f64 {
        0.0
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self)
    }
}

/// Standing wave `sin(k (x - a)) cos(k t)` with `k = mode pi / L` on
/// `(a, a + L)`. Used for manufactured checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandingWave {
    pub a: f64,
    pub length: f64,
    pub mode: u32,
}

impl StandingWave {
    fn k(&self) -> f64 {
        self.mode as f64 * std::f64::consts::PI / self.length
    }
}

impl ExactSolution for StandingWave {
    fn u(&self, x: f64, t: f64) -> f64 {
        let k = self.k();
        (k * (x - self.a)).sin() * (k * t).cos()
    }

    fn u_x(&self, x: f64, t: f64) -> f64 {
        let k = self.k();
        k * (k * (x - self.a)).cos() * (k * t).cos()
    }

    fn v(&self, x: f64, t: f64) -> f64 {
        let k = self.k();
        -k * (k * (x - self.a)).sin() * (k * t).sin()
    }
}

impl WaveProblem for StandingWave {
    fn u0(&self, x: f64) -> f64 {
        self.u(x, 0.0)
    }

    fn v0(&self, x: f64) -> f64 {
        self.v(x, 0.0)
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self)
    }
}
