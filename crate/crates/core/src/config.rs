//! Run parameters, readable from a flat `key = value` file.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::fespace::{MassMode, SpaceOptions, WaveSpeed};
use crate::mesh::Window;
use crate::problem::{GaussianPulse, WaveProblem, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    GaussianPulse,
    Zero,
}

impl ProblemKind {
    pub fn build(self) -> Box<dyn WaveProblem> {
        match self {
            ProblemKind::GaussianPulse => Box::new(GaussianPulse::default()),
            ProblemKind::Zero => Box::new(Zero),
        }
    }
}

/// Target space of the first mesh-change indicator: `V_n ∩ V_{n+1}` as
/// printed, or `V_{n-1} ∩ V_n`, which matches the spaces its argument
/// lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mu0Space {
    Printed,
    Shifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    /// Coarse (macro) mesh size `H`.
    pub coarse_h: f64,
    /// `tau = cfl * H`, rounded down so that `T / tau` is an integer.
    pub cfl: f64,
    pub final_time: f64,
    pub window: Window,
    pub theta: f64,
    pub mass: MassMode,
    pub degree: u32,
    pub wave_speed: f64,
    pub problem: ProblemKind,
    /// Shift the fine window by one macro cell whenever more than `H` time
    /// has elapsed since the last mesh change.
    pub move_window: bool,
    /// Abort when the LTS one-step map is unstable.
    pub stability_check: bool,
    pub mu0_space: Mu0Space,
    /// Refinements of the quadrature mesh for the initial error.
    pub initial_error_refine: usize,
    pub sweep: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: -10.0,
            b: 10.0,
            coarse_h: 0.3,
            cfl: 0.52,
            final_time: 1.0,
            window: Window::new(-1.9, 3.9),
            theta: 0.75,
            mass: MassMode::Lumped,
            degree: 1,
            wave_speed: 1.0,
            problem: ProblemKind::GaussianPulse,
            move_window: true,
            stability_check: true,
            mu0_space: Mu0Space::Printed,
            initial_error_refine: 4,
            sweep: vec![0.3, 0.15, 0.075, 0.0375],
            out_dir: PathBuf::from("out"),
        }
    }
}

fn num(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got '{value}'")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got '{value}'"
        ))),
    }
}

impl RunConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "a" => self.a = num(key, value)?,
            "b" => self.b = num(key, value)?,
            "H" => self.coarse_h = num(key, value)?,
            "cfl" => self.cfl = num(key, value)?,
            "T" => self.final_time = num(key, value)?,
            "window_lo" => self.window.lo = num(key, value)?,
            "window_hi" => self.window.hi = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "c" => self.wave_speed = num(key, value)?,
            "mass" => {
                self.mass = match value {
                    "lumped" => MassMode::Lumped,
                    "consistent" => MassMode::Consistent,
                    _ => return Err(Error::Config(format!("mass: unknown mode '{value}'"))),
                }
            }
            "degree" => {
                self.degree = value.parse().map_err(|_| {
                    Error::Config(format!("degree: expected an integer, got '{value}'"))
                })?
            }
            "problem" => {
                self.problem = match value {
                    "gaussian_pulse" => ProblemKind::GaussianPulse,
                    "zero" => ProblemKind::Zero,
                    _ => return Err(Error::Config(format!("problem: unknown problem '{value}'"))),
                }
            }
            "move_window" => self.move_window = flag(key, value)?,
            "stability_check" => self.stability_check = flag(key, value)?,
            "mu0_space" => {
                self.mu0_space = match value {
                    "printed" => Mu0Space::Printed,
                    "shifted" => Mu0Space::Shifted,
                    _ => {
                        return Err(Error::Config(format!(
                            "mu0_space: unknown choice '{value}'"
                        )))
                    }
                }
            }
            "initial_error_refine" => {
                self.initial_error_refine = value.parse().map_err(|_| {
                    Error::Config(format!(
                        "initial_error_refine: expected an integer, got '{value}'"
                    ))
                })?
            }
            "sweep" => {
                self.sweep = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<Vec<_>>>()?
            }
            "out" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::Config(format!(
                "empty domain ({}, {})",
                self.a, self.b
            )));
        }
        if !(self.coarse_h > 0.0 && self.coarse_h < self.b - self.a) {
            return Err(Error::Config(format!(
                "H must lie in (0, b - a), got {}",
                self.coarse_h
            )));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(Error::Config(format!(
                "cfl must be positive, got {}",
                self.cfl
            )));
        }
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(Error::Config(format!(
                "T must be non-negative, got {}",
                self.final_time
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if !(self.wave_speed > 0.0 && self.wave_speed.is_finite()) {
            return Err(Error::Config(format!(
                "c must be positive, got {}",
                self.wave_speed
            )));
        }
        if self.degree != 1 {
            return Err(Error::Config(format!(
                "only piecewise linear elements are available, got degree {}",
                self.degree
            )));
        }
        if !self.window.is_empty() && (self.window.lo < self.a || self.window.hi > self.b) {
            return Err(Error::Config(format!(
                "window [{}, {}] not inside ({}, {})",
                self.window.lo, self.window.hi, self.a, self.b
            )));
        }
        if self.initial_error_refine == 0 {
            return Err(Error::Config(
                "initial_error_refine must be at least 1".into(),
            ));
        }
        if self.sweep.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config("sweep values must be positive".into()));
        }
        Ok(())
    }

    pub fn space_options(&self) -> SpaceOptions {
        SpaceOptions {
            theta: self.theta,
            wave_speed: WaveSpeed::Constant(self.wave_speed),
            mass: self.mass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let cfg = RunConfig::parse(
            "H = 0.15  # finer\nmass=consistent\nsweep = 0.3, 0.15,0.075\n\nmove_window = no\n",
        )
        .unwrap();
        assert_eq!(cfg.coarse_h, 0.15);
        assert_eq!(cfg.mass, MassMode::Consistent);
        assert_eq!(cfg.sweep, vec![0.3, 0.15, 0.075]);
        assert!(!cfg.move_window);
        assert_eq!(cfg.cfl, 0.52);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("H 0.1"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::parse("colour = red"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("T = soon"),
            Err(Error::Config(_))
        ));
        let cfg = RunConfig::parse("degree = 2").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = RunConfig::parse("theta = 1.5").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse("window_hi = 12").unwrap();
        assert!(cfg.validate().is_err());
    }
}
