//! Reverse-mode gradients of the log-posterior.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::CellTable;
use crate::density::{CellData, DensityError, ParameterLayout};
use crate::tape::{Real, Tape, Var};

/// Log-density value with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Anything the sampler can explore.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log-density.
    fn logp_grad(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64, DensityError>;

    /// Names used in error messages.
    fn coordinate_name(&self, i: usize) -> String {
        alloc::format!("x[{i}]")
    }
}

/// A closure-backed density, mostly for tests and toy targets.
pub struct FnDensity<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> LogDensity for FnDensity<F>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn logp_grad(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64, DensityError> {
        let v = (self.f)(x, grad);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DensityError::NonFiniteDensity)
        }
    }
}

/// Log-posterior of a model on a cell table, differentiated on a reusable tape.
pub struct ModelDensity<'a> {
    layout: &'a ParameterLayout,
    data: Option<Vec<CellData>>,
    names: Vec<String>,
    tape: Tape,
    effects: Vec<f64>,
    grad_effects: Vec<f64>,
    seeds: Vec<(usize, f64)>,
}

impl<'a> ModelDensity<'a> {
    pub fn new(layout: &'a ParameterLayout, cells: &CellTable) -> Result<Self, DensityError> {
        layout.check_cells(cells)?;
        Ok(Self {
            layout,
            data: Some(CellData::from_table(cells)),
            names: layout.scalar_names(),
            tape: Tape::new(),
            effects: Vec::new(),
            grad_effects: Vec::new(),
            seeds: Vec::new(),
        })
    }

    /// Density with the likelihood switched off.
    pub fn prior_only(layout: &'a ParameterLayout) -> Self {
        Self {
            layout,
            data: None,
            names: layout.scalar_names(),
            tape: Tape::new(),
            effects: Vec::new(),
            grad_effects: Vec::new(),
            seeds: Vec::new(),
        }
    }

    pub fn layout(&self) -> &ParameterLayout {
        self.layout
    }

    /// Value only, without recording a tape.
    pub fn logp(&self, x: &[f64]) -> Result<f64, DensityError> {
        self.layout.check_point(x)?;
        let v = self.layout.forward::<f64>(x, self.data.as_deref());
        let total = v.total();
        if total.is_finite() {
            Ok(total)
        } else {
            Err(DensityError::NonFiniteDensity)
        }
    }
}

impl LogDensity for ModelDensity<'_> {
    fn dim(&self) -> usize {
        self.layout.total_dim
    }

    fn coordinate_name(&self, i: usize) -> String {
        self.names[i].clone()
    }

    fn logp_grad(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64, DensityError> {
        self.layout.check_point(x)?;
        self.tape.clear();
        let tape = &self.tape;
        let vars: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
        let latent = self.layout.latent(&vars);
        let base = latent.prior + latent.jacobian;
        // Cells are evaluated off the tape; their adjoints enter the
        // backward sweep as seeds on the component values.
        let seeds = &mut self.seeds;
        seeds.clear();
        seeds.extend(base.index().map(|i| (i, 1.0)));
        let mut likelihood = 0.0;
        if let Some(data) = &self.data {
            self.effects.clear();
            self.effects
                .extend(latent.effects.iter().flat_map(|c| c.iter().map(|v| v.value())));
            self.grad_effects.clear();
            self.grad_effects.resize(self.effects.len(), 0.0);
            let phi = latent.phi.map(|p| p.value());
            let (ll, grad_phi) = self
                .layout
                .likelihood_with_grad(&self.effects, phi, data, &mut self.grad_effects);
            likelihood = ll;
            let flat = latent.effects.iter().flatten();
            for (v, &g) in flat.zip(&self.grad_effects) {
                if let Some(i) = v.index() {
                    seeds.push((i, g));
                }
            }
            if let Some(i) = latent.phi.and_then(|p| p.index()) {
                seeds.push((i, grad_phi));
            }
        }
        let value = base.value() + likelihood;
        let adj = tape.adjoints_seeded(&self.seeds);
        for (g, v) in grad.iter_mut().zip(&vars) {
            *g = adj[v.index().expect("independent variable")];
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(DensityError::NonFinite(self.names[i].clone()));
        }
        if !value.is_finite() {
            return Err(DensityError::NonFiniteDensity);
        }
        Ok(value)
    }
}

/// Log-posterior and its gradient at `point`.
pub fn grad_log_posterior(
    layout: &ParameterLayout,
    point: &[f64],
    cells: &CellTable,
) -> Result<GradResult, DensityError> {
    let mut density = ModelDensity::new(layout, cells)?;
    let mut gradient = vec![0.0; layout.total_dim];
    let value = density.logp_grad(point, &mut gradient)?;
    Ok(GradResult { value, gradient })
}

/// Largest relative discrepancy between the analytic gradient of
/// `density` and central differences of step `h`; the denominator is
/// `max(1, |analytic|)`.
pub fn finite_diff_error<D: LogDensity + ?Sized>(
    density: &mut D,
    point: &[f64],
    h: f64,
) -> Result<f64, DensityError> {
    let d = density.dim();
    let mut grad = vec![0.0; d];
    density.logp_grad(point, &mut grad)?;
    let mut scratch = vec![0.0; d];
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..d {
        x[i] = point[i] + h;
        let up = density.logp_grad(&x, &mut scratch)?;
        x[i] = point[i] - h;
        let down = density.logp_grad(&x, &mut scratch)?;
        x[i] = point[i];
        let fd = (up - down) / (2.0 * h);
        let err = (grad[i] - fd).abs() / grad[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// [`finite_diff_error`] for the model's log-posterior.
pub fn finite_diff_check(
    layout: &ParameterLayout,
    point: &[f64],
    cells: &CellTable,
    h: f64,
) -> Result<f64, DensityError> {
    let mut density = ModelDensity::new(layout, cells)?;
    finite_diff_error(&mut density, point, h)
}
