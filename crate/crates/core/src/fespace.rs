//! Continuous piecewise linear finite element spaces with homogeneous
//! Dirichlet conditions on a [`Mesh1D`].
//!
//! A space owns its assembled stiffness and mass matrices, the fine/coarse
//! classification of its degrees of freedom and the configured mass mode.
//! Fields are value snapshots holding an `Arc` to their space, so fields on
//! different (compatible) spaces can be combined: the result lives on the
//! common refinement.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, SymTridiag};
use crate::mesh::{CoarseFineSplit, Mesh1D};
use crate::quadrature::{integrate, GAUSS3, GAUSS5};

/// Which discrete inner product defines the discrete elliptic operator and
/// the L2 projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    /// Row-sum lumped (diagonal) mass.
    Lumped,
    /// Exact L2 inner product.
    Consistent,
}

/// Wave speed `c`, constant or piecewise constant per macro element.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveSpeed {
    Constant(f64),
    PerMacro(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceOptions {
    /// Fine/coarse threshold.
    pub theta: f64,
    pub wave_speed: WaveSpeed,
    pub mass: MassMode,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        Self {
            theta: 0.75,
            wave_speed: WaveSpeed::Constant(1.0),
            mass: MassMode::Lumped,
        }
    }
}

/// Matrices on the free degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrices {
    pub stiffness: SymTridiag,
    pub mass_consistent: SymTridiag,
    pub mass_lumped: Vec<f64>,
}

/// Element-wise wave speeds of `mesh`.
pub fn element_speeds(mesh: &Mesh1D, speed: &WaveSpeed) -> Result<Vec<f64>> {
    let c: Vec<f64> = match speed {
        WaveSpeed::Constant(c) => vec![*c; mesh.element_count()],
        WaveSpeed::PerMacro(cs) => {
            if cs.len() as u64 != mesh.macro_count() {
                return Err(Error::Data(format!(
                    "{} wave speeds given for {} macro elements",
                    cs.len(),
                    mesh.macro_count()
                )));
            }
            mesh.elements()
                .iter()
                .map(|e| cs[e.macro_index() as usize])
                .collect()
        }
    };
    if let Some(bad) = c.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::Data(format!(
            "wave speed must be positive, got {bad}"
        )));
    }
    Ok(c)
}

/// Stiffness `int c^2 phi_i' phi_j'`, consistent mass and lumped mass for
/// P1 hats; the two boundary nodes are eliminated.
pub fn assemble(mesh: &Mesh1D, speeds: &[f64]) -> OperatorMatrices {
    let ne = mesh.element_count();
    let dim = ne - 1;
    let mut k = SymTridiag::zeros(dim);
    let mut m = SymTridiag::zeros(dim);
    for (e, c) in speeds.iter().enumerate().take(ne) {
        let h = mesh.width(e);
        let s = c * c / h;
        // local nodes e and e+1 are dofs e-1 and e
        let left = e.checked_sub(1);
        let right = (e < dim).then_some(e);
        if let Some(i) = left {
            k.diag[i] += s;
            m.diag[i] += h / 3.0;
        }
        if let Some(j) = right {
            k.diag[j] += s;
            m.diag[j] += h / 3.0;
        }
        if let (Some(i), Some(_)) = (left, right) {
            k.off[i] -= s;
            m.off[i] += h / 6.0;
        }
    }
    // half the patch of each interior node
    let mass_lumped = (0..dim)
        .map(|i| 0.5 * (mesh.width(i) + mesh.width(i + 1)))
        .collect();
    OperatorMatrices {
        stiffness: k,
        mass_consistent: m,
        mass_lumped,
    }
}

#[derive(Debug)]
pub struct FeSpace {
    mesh: Mesh1D,
    options: SpaceOptions,
    nodes: Vec<f64>,
    speeds: Vec<f64>,
    split: CoarseFineSplit,
    fine_dofs: Vec<bool>,
    ops: OperatorMatrices,
}

impl FeSpace {
    pub fn new(mesh: Mesh1D, options: &SpaceOptions) -> Result<Arc<Self>> {
        let speeds = element_speeds(&mesh, &options.wave_speed)?;
        let split = mesh.coarse_fine_split(options.theta)?;
        let ne = mesh.element_count();
        // dof i sits on node i+1, supported on elements i and i+1
        let fine_dofs = (0..ne - 1)
            .map(|i| split.fine[i] || split.fine[i + 1])
            .collect();
        let ops = assemble(&mesh, &speeds);
        Ok(Arc::new(Self {
            nodes: mesh.nodes(),
            mesh,
            options: options.clone(),
            speeds,
            split,
            fine_dofs,
            ops,
        }))
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn options(&self) -> &SpaceOptions {
        &self.options
    }

    pub fn mass_mode(&self) -> MassMode {
        self.options.mass
    }

    pub fn dim(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn degree(&self) -> usize {
        1
    }

    /// All mesh nodes, boundary included.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Coordinates of the free nodes.
    pub fn dof_coords(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn split(&self) -> &CoarseFineSplit {
        &self.split
    }

    pub fn fine_dofs(&self) -> &[bool] {
        &self.fine_dofs
    }

    pub fn has_fine_dofs(&self) -> bool {
        self.fine_dofs.iter().any(|&f| f)
    }

    pub fn matrices(&self) -> &OperatorMatrices {
        &self.ops
    }

    /// Same mesh and same options: fields can be combined coefficientwise.
    pub fn same_as(&self, other: &FeSpace) -> bool {
        std::ptr::eq(self, other) || (self.mesh == other.mesh && self.options == other.options)
    }

    /// Multiplication by the configured mass matrix.
    pub fn apply_mass(&self, x: &[f64]) -> Vec<f64> {
        match self.options.mass {
            MassMode::Lumped => x
                .iter()
                .zip(&self.ops.mass_lumped)
                .map(|(v, m)| v * m)
                .collect(),
            MassMode::Consistent => self.ops.mass_consistent.matvec(x),
        }
    }

    /// Solve with the configured mass matrix.
    pub fn solve_mass(&self, b: &[f64]) -> Vec<f64> {
        match self.options.mass {
            MassMode::Lumped => b
                .iter()
                .zip(&self.ops.mass_lumped)
                .map(|(v, m)| v / m)
                .collect(),
            MassMode::Consistent => self
                .ops
                .mass_consistent
                .solve(b)
                .expect("consistent mass matrix is positive definite"),
        }
    }

    /// Space with the same options on another mesh.
    pub fn with_mesh(&self, mesh: Mesh1D) -> Result<Arc<FeSpace>> {
        FeSpace::new(mesh, &self.options)
    }

    /// Common refinement of two spaces, carrying the options of `self`.
    pub fn common_refinement(self: &Arc<Self>, other: &FeSpace) -> Result<Arc<FeSpace>> {
        if self.same_as(other) {
            return Ok(Arc::clone(self));
        }
        self.with_mesh(self.mesh.common_refinement(&other.mesh)?)
    }

    /// The largest space contained in both, on the elementwise coarsest
    /// common mesh.
    pub fn intersection(self: &Arc<Self>, other: &FeSpace) -> Result<Arc<FeSpace>> {
        if self.same_as(other) {
            return Ok(Arc::clone(self));
        }
        self.with_mesh(self.mesh.coarsest_common(&other.mesh)?)
    }

    /// Element containing `x`.
    pub fn locate(&self, x: f64) -> usize {
        self.mesh.locate(x, &self.nodes)
    }

    /// Load vector `(g, phi_i)` by 5-point Gauss per element.
    pub fn load_fn(&self, g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let mut b = vec![0.0; self.dim()];
        for e in 0..self.mesh.element_count() {
            let (l, r) = (self.nodes[e], self.nodes[e + 1]);
            let h = r - l;
            let mut left = 0.0;
            let mut right = 0.0;
            for &(s, w) in &GAUSS5 {
                let v = g(l + s * h);
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite integrand at x = {}",
                        l + s * h
                    )));
                }
                left += w * h * v * (1.0 - s);
                right += w * h * v * s;
            }
            if e > 0 {
                b[e - 1] += left;
            }
            if e < self.dim() {
                b[e] += right;
            }
        }
        Ok(b)
    }

    /// Configured-mass L2 projection of a function.
    pub fn project_fn(self: &Arc<Self>, g: impl Fn(f64) -> f64) -> Result<DiscreteField> {
        let b = self.load_fn(g)?;
        Ok(DiscreteField::from_parts(
            Arc::clone(self),
            self.solve_mass(&b),
        ))
    }

    /// Configured-mass L2 projection of a field living on a compatible space.
    pub fn project_field(self: &Arc<Self>, w: &DiscreteField) -> Result<DiscreteField> {
        if self.same_as(&w.space) {
            let b = w.space.ops.mass_consistent.matvec(&w.coeffs);
            return Ok(DiscreteField::from_parts(
                Arc::clone(self),
                self.solve_mass(&b),
            ));
        }
        let common = self.mesh.common_refinement(&w.space.mesh)?;
        let mut b = vec![0.0; self.dim()];
        let cn = common.nodes();
        for e in 0..common.element_count() {
            let (l, r) = (cn[e], cn[e + 1]);
            let k = self.locate(0.5 * (l + r));
            let (xl, xr) = (self.nodes[k], self.nodes[k + 1]);
            let h = xr - xl;
            if k > 0 {
                b[k - 1] += integrate(&GAUSS3, l, r, |x| w.eval(x) * (xr - x) / h);
            }
            if k < self.dim() {
                b[k] += integrate(&GAUSS3, l, r, |x| w.eval(x) * (x - xl) / h);
            }
        }
        Ok(DiscreteField::from_parts(
            Arc::clone(self),
            self.solve_mass(&b),
        ))
    }

    /// `a(w, phi_i)` for every basis function of this space, `w` on any
    /// compatible space.
    pub fn stiffness_load(&self, w: &DiscreteField) -> Result<Vec<f64>> {
        if self.same_as(&w.space) {
            return Ok(self.ops.stiffness.matvec(&w.coeffs));
        }
        let common = self.mesh.common_refinement(&w.space.mesh)?;
        let cn = common.nodes();
        let speeds = element_speeds(&common, &self.options.wave_speed)?;
        let mut b = vec![0.0; self.dim()];
        for e in 0..common.element_count() {
            let (l, r) = (cn[e], cn[e + 1]);
            let slope = (w.eval(r) - w.eval(l)) / (r - l);
            let flux = speeds[e] * speeds[e] * slope * (r - l);
            let k = self.locate(0.5 * (l + r));
            let h = self.nodes[k + 1] - self.nodes[k];
            if k > 0 {
                b[k - 1] -= flux / h;
            }
            if k < self.dim() {
                b[k] += flux / h;
            }
        }
        Ok(b)
    }

    /// Interpolates a function at the free nodes.
    pub fn interpolate_fn(self: &Arc<Self>, g: impl Fn(f64) -> f64) -> DiscreteField {
        let coeffs = self.dof_coords().iter().map(|&x| g(x)).collect();
        DiscreteField::from_parts(Arc::clone(self), coeffs)
    }
}

/// A finite element function: coefficients with respect to the hat basis of
/// its space.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl DiscreteField {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::Data(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        Ok(Self { space, coeffs })
    }

    fn from_parts(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), space.dim());
        Self { space, coeffs }
    }

    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self::from_parts(Arc::clone(space), vec![0.0; space.dim()])
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Values at all mesh nodes, boundary zeros included.
    pub fn nodal_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.coeffs.len() + 2);
        v.push(0.0);
        v.extend_from_slice(&self.coeffs);
        v.push(0.0);
        v
    }

    fn node_value(&self, j: usize) -> f64 {
        if j == 0 || j == self.coeffs.len() + 1 {
            0.0
        } else {
            self.coeffs[j - 1]
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let nodes = &self.space.nodes;
        if x <= nodes[0] || x >= nodes[nodes.len() - 1] {
            return 0.0;
        }
        let k = self.space.locate(x);
        let (l, r) = (nodes[k], nodes[k + 1]);
        let s = (x - l) / (r - l);
        (1.0 - s) * self.node_value(k) + s * self.node_value(k + 1)
    }

    /// Derivative on element `k` of the own mesh.
    pub fn slope(&self, k: usize) -> f64 {
        let nodes = &self.space.nodes;
        (self.node_value(k + 1) - self.node_value(k)) / (nodes[k + 1] - nodes[k])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_parts(
            Arc::clone(&self.space),
            self.coeffs.iter().map(|c| a * c).collect(),
        )
    }

    /// Nodal interpolation onto a compatible space.
    pub fn pass_to(&self, to: &Arc<FeSpace>) -> Result<Self> {
        if self.space.same_as(to) {
            return Ok(Self::from_parts(Arc::clone(to), self.coeffs.clone()));
        }
        if !self.space.mesh.is_compatible(&to.mesh) {
            return Err(Error::Incompatible(
                "pass operator between different macro partitions".into(),
            ));
        }
        Ok(to.interpolate_fn(|x| self.eval(x)))
    }

    /// Representation on a refinement of the own space (exact).
    fn lift_to(&self, to: &Arc<FeSpace>) -> Self {
        if self.space.same_as(to) {
            return Self::from_parts(Arc::clone(to), self.coeffs.clone());
        }
        to.interpolate_fn(|x| self.eval(x))
    }

    /// `a * self + b * other` on the common refinement of both spaces.
    pub fn lincomb(a: f64, x: &DiscreteField, b: f64, y: &DiscreteField) -> Result<Self> {
        let space = x.space.common_refinement(&y.space)?;
        let xs = x.lift_to(&space);
        let ys = y.lift_to(&space);
        Ok(Self::from_parts(
            space,
            linalg::axpby(a, &xs.coeffs, b, &ys.coeffs),
        ))
    }

    /// `sum_i w_i f_i` on the common refinement of all spaces.
    pub fn combination(terms: &[(f64, &DiscreteField)]) -> Result<Self> {
        let (first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::Data("empty linear combination".into()))?;
        let mut space = Arc::clone(&first.1.space);
        for (_, f) in rest {
            space = space.common_refinement(&f.space)?;
        }
        let mut coeffs = vec![0.0; space.dim()];
        for (w, f) in terms {
            let lifted = f.lift_to(&space);
            for (c, v) in coeffs.iter_mut().zip(&lifted.coeffs) {
                *c += w * v;
            }
        }
        Ok(Self::from_parts(space, coeffs))
    }

    pub fn sub(&self, other: &DiscreteField) -> Result<Self> {
        Self::lincomb(1.0, self, -1.0, other)
    }

    /// Keeps the fine coefficients and zeroes the coarse ones.
    pub fn fine_interp(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&self.space.fine_dofs)
            .map(|(&c, &f)| if f { c } else { 0.0 })
            .collect();
        Self::from_parts(Arc::clone(&self.space), coeffs)
    }

    /// Orthogonal projection onto the span of the fine basis functions in
    /// the configured inner product.
    pub fn fine_projection(&self) -> Self {
        let space = &self.space;
        let b = space.apply_mass(&self.coeffs);
        let fine = &space.fine_dofs;
        let coeffs = match space.options.mass {
            MassMode::Lumped => b
                .iter()
                .zip(&space.ops.mass_lumped)
                .zip(fine)
                .map(|((v, m), &f)| if f { v / m } else { 0.0 })
                .collect(),
            MassMode::Consistent => {
                let mut m = space.ops.mass_consistent.clone();
                let mut rhs = b;
                for i in 0..m.dim() {
                    if !fine[i] {
                        m.diag[i] = 1.0;
                        rhs[i] = 0.0;
                        if i > 0 {
                            m.off[i - 1] = 0.0;
                        }
                        if i < m.off.len() {
                            m.off[i] = 0.0;
                        }
                    }
                }
                m.solve(&rhs)
                    .expect("restricted mass matrix is positive definite")
            }
        };
        Self::from_parts(Arc::clone(space), coeffs)
    }

    /// Discrete elliptic operator `A phi = M^{-1} K phi`.
    pub fn apply_elliptic(&self) -> Self {
        let k = self.space.ops.stiffness.matvec(&self.coeffs);
        Self::from_parts(Arc::clone(&self.space), self.space.solve_mass(&k))
    }

    /// Local time-stepping operator `A - (tau^2 / 16) A Pi_f A`.
    pub fn apply_lts(&self, tau: f64) -> Self {
        let a = self.apply_elliptic();
        if !self.space.has_fine_dofs() || tau == 0.0 {
            return a;
        }
        let corr = a.fine_interp().apply_elliptic();
        let s = tau * tau / 16.0;
        Self::from_parts(
            Arc::clone(&self.space),
            linalg::axpby(1.0, &a.coeffs, -s, &corr.coeffs),
        )
    }

    /// Exact L2 norm.
    pub fn pivot_norm(&self) -> f64 {
        self.space
            .ops
            .mass_consistent
            .quad_form(&self.coeffs, &self.coeffs)
            .max(0.0)
            .sqrt()
    }

    /// Norm induced by the configured mass matrix.
    pub fn mass_norm(&self) -> f64 {
        linalg::dot(&self.space.apply_mass(&self.coeffs), &self.coeffs)
            .max(0.0)
            .sqrt()
    }

    /// Potential energy norm `||c w'||`.
    pub fn pot_norm(&self) -> f64 {
        self.space
            .ops
            .stiffness
            .quad_form(&self.coeffs, &self.coeffs)
            .max(0.0)
            .sqrt()
    }

    /// `a(self, other)` on the common refinement.
    pub fn energy_product(&self, other: &DiscreteField) -> Result<f64> {
        Ok(linalg::dot(
            &other.space.stiffness_load(self)?,
            &other.coeffs,
        ))
    }

    /// `(self, other)` with the configured mass; both on the same space.
    pub fn mass_product(&self, other: &DiscreteField) -> Result<f64> {
        if !self.space.same_as(&other.space) {
            return Err(Error::Incompatible(
                "mass product of fields on different spaces".into(),
            ));
        }
        Ok(linalg::dot(
            &self.space.apply_mass(&self.coeffs),
            &other.coeffs,
        ))
    }

    /// `||self - g||_{L2}` with 5-point Gauss on `subdiv` pieces per element.
    pub fn l2_error(&self, g: impl Fn(f64) -> f64, subdiv: usize) -> f64 {
        self.elementwise(subdiv, |x, _| (self.eval(x) - g(x)).powi(2))
    }

    /// `||c (self - g)'||_{L2}` given `g'`, same quadrature as [`Self::l2_error`].
    pub fn pot_error(&self, dg: impl Fn(f64) -> f64, subdiv: usize) -> f64 {
        self.elementwise(subdiv, |x, k| {
            (self.space.speeds[k] * (self.slope(k) - dg(x))).powi(2)
        })
    }

    fn elementwise(&self, subdiv: usize, f: impl Fn(f64, usize) -> f64) -> f64 {
        let nodes = &self.space.nodes;
        let mut s = 0.0;
        for k in 0..nodes.len() - 1 {
            let h = (nodes[k + 1] - nodes[k]) / subdiv as f64;
            for j in 0..subdiv {
                let l = nodes[k] + j as f64 * h;
                s += integrate(&GAUSS5, l, l + h, |x| f(x, k));
            }
        }
        s.max(0.0).sqrt()
    }
}
