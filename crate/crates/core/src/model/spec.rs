//! Coefficient bundle of a coupled forward-backward SDE
//!
//! ```text
//! dX_t = b(t, X, Y) dt + σ(t, X, Y) dW_t,            X_0 = x
//! dY_t = -b̂(t, X, Y) dt - σ̂(t, X, Y, Z) dW_t,        Y_T = g(X_T)
//! ```
//!
//! All coefficient maps write into caller-provided output slices so that hot
//! loops (PDE stepping, path simulation) never allocate. Matrices are stored
//! row-major: σ is `n × d`, σ̂ and z are `m × d`, gradients ξ are `m × n`.

use std::fmt;
use std::sync::Arc;

use super::ModelError;

/// `(t, x, y, out)` for b (`out.len() == n`), σ (`n·d`) and b̂ (`m`).
pub type CoefficientMap = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, y, z, out)` for σ̂, `out.len() == m·d`.
pub type BackwardDiffusionMap = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, out)` terminal data, `out.len() == m`.
pub type TerminalMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, out)` space-time data (boundary values, exact fields), `out.len() == m`.
pub type FieldMap = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, out)` gradient of a space-time field, `out.len() == m·n`.
pub type GradientMap = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// Positive function of `|y|` used by the assumption checks.
pub type ScalarBound = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `(t, x, y, out)` writing an `(m·d) × (m·d)` row-major matrix.
pub type LinearOperatorMap = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Structural information about `z ↦ σ̂(t, x, y, z)` that lets the z-solver
/// skip Newton iterations.
#[derive(Clone)]
pub enum BackwardDiffusionForm {
    /// No structure known: damped Newton from `z₀ = 0`.
    General,
    /// `σ̂(z) = -z + (small perturbation)`: damped Newton from `z₀ = ξσ`.
    NearNegation,
    /// `σ̂(z) = c(t, x, y) - A(t, x, y)[z]` with `A` invertible, acting on the
    /// row-major flattening of `z`.
    Affine {
        offset: CoefficientMap,
        operator: LinearOperatorMap,
    },
}

impl fmt::Debug for BackwardDiffusionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::General => f.write_str("General"),
            Self::NearNegation => f.write_str("NearNegation"),
            Self::Affine { .. } => f.write_str("Affine"),
        }
    }
}

/// Optional growth functions ν, κ, λ, η of `|y|` from the standing
/// assumptions. Only the validator and the z-bound check read them.
#[derive(Clone, Default)]
pub struct AssumptionBounds {
    pub nu: Option<ScalarBound>,
    pub kappa: Option<ScalarBound>,
    pub lambda: Option<ScalarBound>,
    pub eta: Option<ScalarBound>,
}

impl fmt::Debug for AssumptionBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssumptionBounds")
            .field("nu", &self.nu.is_some())
            .field("kappa", &self.kappa.is_some())
            .field("lambda", &self.lambda.is_some())
            .field("eta", &self.eta.is_some())
            .finish()
    }
}

/// Which of (A1)–(A5) a problem is designed to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct AssumptionFlags {
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    pub a5: bool,
}

impl AssumptionFlags {
    pub const ALL: Self = Self {
        a1: true,
        a2: true,
        a3: true,
        a4: true,
        a5: true,
    };
}

/// An immutable FBSDE problem. Cheap to clone; every map is shared.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    n: usize,
    m: usize,
    d: usize,
    horizon: f64,
    drift: CoefficientMap,
    diffusion: CoefficientMap,
    backward_drift: CoefficientMap,
    backward_diffusion: BackwardDiffusionMap,
    backward_form: BackwardDiffusionForm,
    terminal: TerminalMap,
    dirichlet: Option<FieldMap>,
    exact: Option<FieldMap>,
    exact_gradient: Option<GradientMap>,
    alpha: f64,
    bounds: AssumptionBounds,
    reaction_lipschitz: f64,
    satisfies: AssumptionFlags,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("d", &self.d)
            .field("horizon", &self.horizon)
            .field("backward_form", &self.backward_form)
            .field("alpha", &self.alpha)
            .field("bounds", &self.bounds)
            .field("reaction_lipschitz", &self.reaction_lipschitz)
            .field("satisfies", &self.satisfies)
            .finish()
    }
}

impl ProblemSpec {
    pub fn builder(n: usize, m: usize, d: usize, horizon: f64) -> ProblemSpecBuilder {
        ProblemSpecBuilder::new(n, m, d, horizon)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn bounds(&self) -> &AssumptionBounds {
        &self.bounds
    }
    pub fn backward_form(&self) -> &BackwardDiffusionForm {
        &self.backward_form
    }
    /// Lipschitz cap of `y ↦ b̂(t, x, y)`; bounds the explicit reaction step.
    pub fn reaction_lipschitz(&self) -> f64 {
        self.reaction_lipschitz
    }
    pub fn satisfies(&self) -> AssumptionFlags {
        self.satisfies
    }
    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    #[inline]
    pub fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, y, out)
    }
    #[inline]
    pub fn diffusion(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, y, out)
    }
    #[inline]
    pub fn backward_drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.backward_drift)(t, x, y, out)
    }
    #[inline]
    pub fn backward_diffusion(&self, t: f64, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        (self.backward_diffusion)(t, x, y, z, out)
    }
    #[inline]
    pub fn terminal(&self, x: &[f64], out: &mut [f64]) {
        (self.terminal)(x, out)
    }

    /// Lateral boundary data; falls back to the (time-constant) terminal map.
    #[inline]
    pub fn boundary(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.dirichlet {
            Some(f) => f(t, x, out),
            None => (self.terminal)(x, out),
        }
    }

    pub fn has_time_dependent_boundary(&self) -> bool {
        self.dirichlet.is_some()
    }

    /// Closed-form decoupling field, when the problem has one.
    pub fn exact(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        match &self.exact {
            Some(f) => {
                f(t, x, out);
                true
            }
            None => false,
        }
    }

    pub fn exact_gradient(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        match &self.exact_gradient {
            Some(f) => {
                f(t, x, out);
                true
            }
            None => false,
        }
    }

    /// Diffusion matrix `a = ½ σσᵀ` at `(t, x, y)`, written row-major `n × n`.
    pub fn diffusion_matrix(&self, t: f64, x: &[f64], y: &[f64], sigma: &mut [f64], out: &mut [f64]) {
        self.diffusion(t, x, y, sigma);
        let (n, d) = (self.n, self.d);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..d {
                    s += sigma[i * d + k] * sigma[j * d + k];
                }
                out[i * n + j] = 0.5 * s;
            }
        }
    }

    /// Returns a copy with a different name; used by registry variants.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Builder enforcing the structural invariants of [`ProblemSpec`].
pub struct ProblemSpecBuilder {
    name: String,
    n: usize,
    m: usize,
    d: usize,
    horizon: f64,
    drift: Option<CoefficientMap>,
    diffusion: Option<CoefficientMap>,
    backward_drift: Option<CoefficientMap>,
    backward_diffusion: Option<BackwardDiffusionMap>,
    backward_form: BackwardDiffusionForm,
    terminal: Option<TerminalMap>,
    dirichlet: Option<FieldMap>,
    exact: Option<FieldMap>,
    exact_gradient: Option<GradientMap>,
    alpha: f64,
    bounds: AssumptionBounds,
    reaction_lipschitz: f64,
    satisfies: AssumptionFlags,
}

impl ProblemSpecBuilder {
    fn new(n: usize, m: usize, d: usize, horizon: f64) -> Self {
        Self {
            name: "custom".into(),
            n,
            m,
            d,
            horizon,
            drift: None,
            diffusion: None,
            backward_drift: None,
            backward_diffusion: None,
            backward_form: BackwardDiffusionForm::General,
            terminal: None,
            dirichlet: None,
            exact: None,
            exact_gradient: None,
            alpha: 1.0,
            bounds: AssumptionBounds::default(),
            reaction_lipschitz: 0.0,
            satisfies: AssumptionFlags::default(),
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn drift<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.diffusion = Some(Arc::new(f));
        self
    }

    pub fn backward_drift<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.backward_drift = Some(Arc::new(f));
        self
    }

    pub fn backward_diffusion<F>(mut self, f: F, form: BackwardDiffusionForm) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.backward_diffusion = Some(Arc::new(f));
        self.backward_form = form;
        self
    }

    /// `σ̂(t, x, y, z) = -scale · z`, declared affine.
    pub fn negated_backward_diffusion(self, scale: f64) -> Self {
        let md = self.m * self.d;
        self.backward_diffusion(
            move |_, _, _, z, out| {
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = -scale * zi;
                }
            },
            BackwardDiffusionForm::Affine {
                offset: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
                operator: Arc::new(move |_, _, _, out: &mut [f64]| {
                    out.fill(0.0);
                    for i in 0..md {
                        out[i * md + i] = scale;
                    }
                }),
            },
        )
    }

    pub fn terminal<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.terminal = Some(Arc::new(f));
        self
    }

    pub fn dirichlet<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.dirichlet = Some(Arc::new(f));
        self
    }

    pub fn exact<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(f));
        self
    }

    pub fn exact_gradient<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.exact_gradient = Some(Arc::new(f));
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn bounds(mut self, bounds: AssumptionBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn reaction_lipschitz(mut self, cap: f64) -> Self {
        self.reaction_lipschitz = cap;
        self
    }

    pub fn satisfies(mut self, flags: AssumptionFlags) -> Self {
        self.satisfies = flags;
        self
    }

    pub fn build(self) -> Result<ProblemSpec, ModelError> {
        if !(1..=2).contains(&self.n) {
            return Err(ModelError::InvalidSpec(format!(
                "forward dimension n = {} (only 1 or 2 supported)",
                self.n
            )));
        }
        if self.m == 0 || self.d == 0 {
            return Err(ModelError::InvalidSpec("m and d must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ModelError::InvalidSpec(format!("horizon T = {}", self.horizon)));
        }
        if !(1.0..2.0).contains(&self.alpha) {
            return Err(ModelError::InvalidSpec(format!(
                "alpha = {} outside [1, 2)",
                self.alpha
            )));
        }
        if !(self.reaction_lipschitz.is_finite() && self.reaction_lipschitz >= 0.0) {
            return Err(ModelError::InvalidSpec("reaction Lipschitz cap must be >= 0".into()));
        }
        let missing = |what: &str| ModelError::InvalidSpec(format!("missing coefficient {what}"));
        let (n, m) = (self.n, self.m);
        Ok(ProblemSpec {
            name: self.name,
            n: self.n,
            m: self.m,
            d: self.d,
            horizon: self.horizon,
            drift: self
                .drift
                .unwrap_or_else(|| Arc::new(move |_, _, _, out: &mut [f64]| out[..n].fill(0.0))),
            diffusion: self.diffusion.ok_or_else(|| missing("sigma"))?,
            backward_drift: self
                .backward_drift
                .unwrap_or_else(|| Arc::new(move |_, _, _, out: &mut [f64]| out[..m].fill(0.0))),
            backward_diffusion: self.backward_diffusion.ok_or_else(|| missing("sigma_hat"))?,
            backward_form: self.backward_form,
            terminal: self.terminal.ok_or_else(|| missing("g"))?,
            dirichlet: self.dirichlet,
            exact: self.exact,
            exact_gradient: self.exact_gradient,
            alpha: self.alpha,
            bounds: self.bounds,
            reaction_lipschitz: self.reaction_lipschitz,
            satisfies: self.satisfies,
        })
    }
}
