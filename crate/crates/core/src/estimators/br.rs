//! Babuska-Rheinboldt residual estimator and a reference elliptic
//! reconstruction used to check it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fespace::{DiscreteField, FeSpace, MassMode, SpaceOptions};

/// Norm the estimator targets: the energy norm (`sigma = 1`) or the pivot
/// L2 norm (`sigma = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrNorm {
    Energy,
    Pivot,
}

impl BrNorm {
    pub fn sigma(self) -> i32 {
        match self {
            BrNorm::Energy => 1,
            BrNorm::Pivot => 2,
        }
    }
}

/// `A_V w`: the element of `V` with `(A_V w, phi) = a(w, phi)` for all
/// `phi` in `V`, using the mass mode of `V`.
pub fn discrete_elliptic_on(w: &DiscreteField, space: &Arc<FeSpace>) -> Result<DiscreteField> {
    let load = space.stiffness_load(w)?;
    DiscreteField::new(Arc::clone(space), space.solve_mass(&load))
}

/// `|| h^sigma A_V w || + ( sum_z h_z^{2 sigma - 1} [c^2 w']_z^2 )^{1/2}`.
///
/// The elementwise strong residual of a piecewise linear `w` vanishes for
/// elementwise constant `c`, so only `A_V w` enters the first term. The jumps
/// are taken at the interior nodes of the mesh of `w`; `h_z` is the width of
/// the element of `V` containing `z`, or the larger neighbour when `z` is a
/// node of `V`.
pub fn br_estimator(w: &DiscreteField, eval: &Arc<FeSpace>, norm: BrNorm) -> Result<f64> {
    if !w.space().mesh().is_compatible(eval.mesh()) {
        return Err(Error::Incompatible(
            "estimator on a foreign macro partition".into(),
        ));
    }
    if w.is_zero() {
        return Ok(0.0);
    }
    let sigma = norm.sigma();
    let av = discrete_elliptic_on(w, eval)?;
    let vals = av.nodal_values();
    let en = eval.nodes();
    let mut regular = 0.0;
    for k in 0..en.len() - 1 {
        let h = en[k + 1] - en[k];
        let (a, b) = (vals[k], vals[k + 1]);
        regular += h.powi(2 * sigma) * h / 3.0 * (a * a + a * b + b * b);
    }

    let wn = w.space().nodes();
    let c = w.space().speeds();
    let tol = 1e-12 * (en[en.len() - 1] - en[0]);
    let mut jumps = 0.0;
    for j in 1..wn.len() - 1 {
        let jump = c[j] * c[j] * w.slope(j) - c[j - 1] * c[j - 1] * w.slope(j - 1);
        if jump == 0.0 {
            continue;
        }
        let x = wn[j];
        let k = eval.locate(x);
        let h = if (x - en[k]).abs() <= tol && k > 0 {
            (en[k + 1] - en[k]).max(en[k] - en[k - 1])
        } else if (x - en[k + 1]).abs() <= tol && k + 2 < en.len() {
            (en[k + 1] - en[k]).max(en[k + 2] - en[k + 1])
        } else {
            en[k + 1] - en[k]
        };
        jumps += h.powi(2 * sigma - 1) * jump * jump;
    }
    Ok(regular.sqrt() + jumps.sqrt())
}

/// Approximates the elliptic reconstruction `R phi = A^{-1} A_n phi` by a
/// Galerkin solve on the mesh of `phi` refined `ref_refine` times, with the
/// exact L2 product on the right-hand side.
pub fn reference_reconstruction(phi: &DiscreteField, ref_refine: u32) -> Result<DiscreteField> {
    let src = phi.space();
    let opts = SpaceOptions {
        mass: MassMode::Consistent,
        ..src.options().clone()
    };
    let reference = FeSpace::new(src.mesh().refine_uniformly(ref_refine), &opts)?;
    let a_phi = phi.apply_elliptic().pass_to(&reference)?;
    let ops = reference.matrices();
    let rhs = ops.mass_consistent.matvec(a_phi.coeffs());
    let omega = ops
        .stiffness
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular reference stiffness matrix".into()))?;
    DiscreteField::new(reference, omega)
}

/// `|| R phi - phi ||` in the requested norm, with `R` from
/// [`reference_reconstruction`].
pub fn reconstruction_error(phi: &DiscreteField, ref_refine: u32, norm: BrNorm) -> Result<f64> {
    let omega = reference_reconstruction(phi, ref_refine)?;
    let diff = DiscreteField::lincomb(1.0, &omega, -1.0, phi)?;
    Ok(match norm {
        BrNorm::Energy => diff.pot_norm(),
        BrNorm::Pivot => diff.pivot_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh1D, Window};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(window: Window, mass: MassMode) -> Arc<FeSpace> {
        let m = Mesh1D::build_window_mesh(0.0, 4.0, 0.25, window).unwrap();
        let opts = SpaceOptions {
            mass,
            ..SpaceOptions::default()
        };
        FeSpace::new(m, &opts).unwrap()
    }

    fn random(space: &Arc<FeSpace>, rng: &mut ChaCha8Rng) -> DiscreteField {
        DiscreteField::new(
            Arc::clone(space),
            (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_field_has_zero_estimate() {
        let s = space(Window::new(1.0, 2.0), MassMode::Lumped);
        assert_eq!(
            br_estimator(&DiscreteField::zeros(&s), &s, BrNorm::Energy).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_hat_by_hand() {
        // h = 1/4 on (0, 1), hat at x = 1/2: slope jumps +4, -8, +4 at the
        // nodes 1/4, 1/2, 3/4. Lumped A_V w = K e / h = (-16, 32, -16).
        let s = FeSpace::new(
            Mesh1D::build_uniform(0.0, 1.0, 0.25).unwrap(),
            &SpaceOptions::default(),
        )
        .unwrap();
        let w = DiscreteField::new(Arc::clone(&s), vec![0.0, 1.0, 0.0]).unwrap();
        let h: f64 = 0.25;
        let jumps = (h * (16.0 + 64.0 + 16.0)).sqrt();
        // nodal values (0, -16, 32, -16, 0), element integrals h/3 (a^2 + ab + b^2)
        let pairs: [(f64, f64); 4] = [(0.0, -16.0), (-16.0, 32.0), (32.0, -16.0), (-16.0, 0.0)];
        let reg: f64 = pairs
            .iter()
            .map(|(a, b)| h * h * h / 3.0 * (a * a + a * b + b * b))
            .sum();
        let expect = reg.sqrt() + jumps;
        let got = br_estimator(&w, &s, BrNorm::Energy).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect, "{got} vs {expect}");
    }

    #[test]
    fn estimate_is_absolutely_homogeneous() {
        let fine = space(Window::new(1.0, 2.0), MassMode::Lumped);
        let coarse = space(Window::empty(), MassMode::Lumped);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let w = random(&fine, &mut rng);
            let a = rng.gen_range(-3.0..3.0);
            for target in [&fine, &coarse] {
                for norm in [BrNorm::Energy, BrNorm::Pivot] {
                    let one = br_estimator(&w, target, norm).unwrap();
                    let scaled = br_estimator(&w.scaled(a), target, norm).unwrap();
                    assert!((scaled - a.abs() * one).abs() < 1e-12 * one);
                }
            }
        }
    }

    #[test]
    fn reference_reconstruction_on_same_space_reproduces() {
        let s = space(Window::new(1.0, 2.0), MassMode::Consistent);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let w = random(&s, &mut rng);
        let r = reference_reconstruction(&w, 0).unwrap();
        for (a, b) in r.coeffs().iter().zip(w.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(reference_reconstruction(&DiscreteField::zeros(&s), 2)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn estimator_is_reliable() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for mass in [MassMode::Consistent, MassMode::Lumped] {
            let s = space(Window::new(1.0, 2.0), mass);
            for _ in 0..5 {
                let w = random(&s, &mut rng);
                let err = reconstruction_error(&w, 4, BrNorm::Energy).unwrap();
                let est = br_estimator(&w, &s, BrNorm::Energy).unwrap();
                assert!(err <= est, "{mass:?}: {err} > {est}");
            }
        }
    }
}
