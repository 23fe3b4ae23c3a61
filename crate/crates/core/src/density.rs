//! Compiled models: parameter layout, log-posterior, pointwise
//! log-likelihood and prior predictive simulation.
//!
//! The unconstrained vector is laid out component by component in
//! declaration order (levels, then slopes): optional location parameter,
//! optional log-scale, then the z-scores (or raw values when centered).
//! A beta-binomial dispersion `phi` (log scale) comes last.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CellTable;
use crate::modelspec::{validate_spec, LikelihoodFamily, MeanSpec, ModelSpec, PriorSpec, SpecError};
use crate::special::{digamma_unchecked, inv_logit, lgamma_unchecked, ln_choose, log_beta, LN_SQRT_2PI};
use crate::tape::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("non-finite value in parameter {0}")]
    NonFinite(String),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("layout was built for {expected} cells, got {got}")]
    CellMismatch { expected: usize, got: usize },
    #[error("invalid beta-binomial arguments k={k}, n={n}, alpha={alpha}, beta={beta}")]
    BetaBinomialDomain { k: u64, n: u64, alpha: f64, beta: f64 },
    #[error("log-density is not finite")]
    NonFiniteDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hypermean,
    Hyperscale,
    Zscore,
    /// Raw group values of a centered component.
    Effect,
    Slope,
    Dispersion,
}

/// A contiguous block of the unconstrained vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub offset: usize,
    pub size: usize,
    pub transform: Transform,
    pub prior: PriorSpec,
    pub role: Role,
    /// Element labels; empty for unindexed scalars.
    pub labels: Vec<String>,
}

impl Entry {
    pub fn scalar_name(&self, i: usize) -> String {
        if self.labels.is_empty() {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.labels[i])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Level,
    Slope,
}

#[derive(Debug, Clone, PartialEq)]
enum Location {
    Parent,
    Constant(f64),
    Param {
        entry: usize,
        per_element: bool,
        mu: f64,
        sd: f64,
        offset_by_parent: bool,
    },
}

/// A compiled level or slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    pub factors: Vec<String>,
    /// One label per element (factor labels joined by `,`).
    pub labels: Vec<String>,
    /// Element each cell maps to.
    pub cell_element: Vec<usize>,
    parent: Option<usize>,
    parent_map: Vec<usize>,
    location: Location,
    sigma: Option<(usize, PriorSpec)>,
    values: Option<usize>,
    centered: bool,
}

impl Component {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn element_name(&self, i: usize) -> String {
        if self.factors.is_empty() {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.labels[i])
        }
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Binding {
    component: usize,
    element: usize,
    /// Covariate value for slopes; `None` for levels.
    covariate: Option<f64>,
}

/// A model compiled against a specific cell table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    pub model_name: String,
    pub family: LikelihoodFamily,
    pub entries: Vec<Entry>,
    pub total_dim: usize,
    pub components: Vec<Component>,
    dispersion: Option<usize>,
    bindings: Vec<Binding>,
    binding_ranges: Vec<(usize, usize)>,
    /// `bindings` as (position in the concatenated component values, coefficient).
    flat_bindings: Vec<(u32, f64)>,
}

/// Per-cell data with the constant binomial coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellData {
    pub k: f64,
    pub n: f64,
    pub ln_choose: f64,
}

impl CellData {
    pub fn from_table(cells: &CellTable) -> Vec<CellData> {
        cells
            .cells
            .iter()
            .map(|c| CellData {
                k: c.k as f64,
                n: c.n as f64,
                ln_choose: ln_choose(c.n, c.k),
            })
            .collect()
    }
}

/// Compiles `spec` against `cells`.
pub fn build_layout(spec: &ModelSpec, cells: &CellTable) -> Result<ParameterLayout, SpecError> {
    let report = validate_spec(spec, cells);
    if !report.is_ok() {
        return Err(SpecError::Validation(report.errors.join("; ")));
    }

    let mut entries: Vec<Entry> = Vec::new();
    let mut offset = 0usize;
    let mut push = |entries: &mut Vec<Entry>, name: String, labels: Vec<String>, size: usize, transform, prior, role| {
        entries.push(Entry {
            name,
            offset,
            size,
            transform,
            prior,
            role,
            labels,
        });
        offset += size;
        entries.len() - 1
    };

    let mut components: Vec<Component> = Vec::new();
    let specs = spec
        .levels
        .iter()
        .map(|l| (ComponentKind::Level, &l.name, &l.indexed_by, &l.parent, l.mean, l.sigma_prior, l.noncentered))
        .chain(spec.slopes.iter().map(|s| {
            (ComponentKind::Slope, &s.name, &s.indexed_by, &None, s.mean, s.sigma_prior, s.noncentered)
        }));

    for (kind, name, indexed_by, parent_name, mean, sigma_prior, noncentered) in specs {
        let positions: Vec<usize> = indexed_by
            .iter()
            .map(|f| cells.factor_position(f).expect("validated factor"))
            .collect();
        let project = |codes: &[u32]| positions.iter().map(|&p| codes[p]).collect::<Vec<u32>>();
        let combos: Vec<Vec<u32>> = cells
            .cells
            .iter()
            .map(|c| project(&c.codes))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let labels: Vec<String> = combos
            .iter()
            .map(|combo| {
                combo
                    .iter()
                    .zip(&positions)
                    .map(|(&code, &p)| cells.factors[p].label(code).unwrap_or("?"))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        let cell_element: Vec<usize> = cells
            .cells
            .iter()
            .map(|c| combos.binary_search(&project(&c.codes)).expect("combo present"))
            .collect();

        let parent = parent_name
            .as_ref()
            .map(|p| components.iter().position(|c| &c.name == p).expect("checked parent"));
        let parent_map: Vec<usize> = match parent {
            Some(p) => {
                let pc = &components[p];
                let within: Vec<usize> = pc
                    .factors
                    .iter()
                    .map(|f| indexed_by.iter().position(|g| g == f).expect("checked subset"))
                    .collect();
                // Parent element of each child element, found through any cell.
                let mut map = vec![usize::MAX; combos.len()];
                for (ci, &e) in cell_element.iter().enumerate() {
                    map[e] = pc.cell_element[ci];
                }
                debug_assert!(within.len() <= indexed_by.len());
                map
            }
            None => Vec::new(),
        };

        let size = combos.len();
        let elem_labels = |n: usize| if indexed_by.is_empty() { Vec::new() } else { labels[..n].to_vec() };
        let location = match mean {
            MeanSpec::Parent => Location::Parent,
            MeanSpec::Constant { value } => Location::Constant(value),
            MeanSpec::Prior { prior, per_element } => {
                let PriorSpec::Normal { mu, sd } = prior else {
                    unreachable!("checked Normal location prior")
                };
                let (n, lab) = if per_element { (size, elem_labels(size)) } else { (1, Vec::new()) };
                let role = if kind == ComponentKind::Slope { Role::Slope } else { Role::Hypermean };
                let entry = push(&mut entries, format!("mu_{name}"), lab, n, Transform::Identity, prior, role);
                Location::Param {
                    entry,
                    per_element,
                    mu,
                    sd,
                    offset_by_parent: parent.is_some(),
                }
            }
        };
        let sigma = sigma_prior.map(|prior| {
            let e = push(&mut entries, format!("sigma_{name}"), Vec::new(), 1, Transform::Log, prior, Role::Hyperscale);
            (e, prior)
        });
        let values = sigma.map(|_| {
            let (entry_name, role) = if noncentered {
                (format!("z_{name}"), Role::Zscore)
            } else {
                (format!("v_{name}"), Role::Effect)
            };
            push(
                &mut entries,
                entry_name,
                elem_labels(size),
                size,
                Transform::Identity,
                PriorSpec::normal(0.0, 1.0),
                role,
            )
        });
        components.push(Component {
            name: name.clone(),
            kind,
            factors: indexed_by.clone(),
            labels,
            cell_element,
            parent,
            parent_map,
            location,
            sigma,
            values,
            centered: !noncentered,
        });
    }

    let dispersion = match (spec.likelihood.family, spec.likelihood.dispersion_prior) {
        (LikelihoodFamily::BetabinomialLogit, Some(prior)) => Some(push(
            &mut entries,
            "phi".to_string(),
            Vec::new(),
            1,
            Transform::Log,
            prior,
            Role::Dispersion,
        )),
        _ => None,
    };

    let mut bindings = Vec::new();
    let mut binding_ranges = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.cells.iter().enumerate() {
        let start = bindings.len();
        for term in &spec.predictor_terms {
            let c = components.iter().position(|c| &c.name == term).expect("checked term");
            let covariate = match components[c].kind {
                ComponentKind::Level => None,
                ComponentKind::Slope => {
                    let cov = &spec.slope(term).expect("slope").covariate;
                    Some(cell.covariates[cells.covariate_position(cov).expect("validated covariate")])
                }
            };
            bindings.push(Binding {
                component: c,
                element: components[c].cell_element[ci],
                covariate,
            });
        }
        binding_ranges.push((start, bindings.len()));
    }

    let mut effect_offsets = Vec::with_capacity(components.len() + 1);
    let mut acc = 0;
    for c in &components {
        effect_offsets.push(acc);
        acc += c.size();
    }
    effect_offsets.push(acc);
    let flat_bindings = bindings
        .iter()
        .map(|b| ((effect_offsets[b.component] + b.element) as u32, b.covariate.unwrap_or(1.0)))
        .collect();

    Ok(ParameterLayout {
        model_name: spec.name.clone(),
        family: spec.likelihood.family,
        total_dim: offset,
        entries,
        components,
        dispersion,
        bindings,
        binding_ranges,
        flat_bindings,
    })
}

/// Values from one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Forward<S> {
    pub prior: S,
    pub jacobian: S,
    pub likelihood: S,
    pub effects: Vec<Vec<S>>,
    pub etas: Vec<S>,
    pub phi: Option<S>,
}

pub(crate) struct Latent<S> {
    pub prior: S,
    pub jacobian: S,
    pub effects: Vec<Vec<S>>,
    pub phi: Option<S>,
}

impl<S: Real> Forward<S> {
    pub fn total(&self) -> S {
        self.prior + self.jacobian + self.likelihood
    }
}

#[inline]
fn normal_lpdf<S: Real>(x: S, loc: S, sd: f64) -> S {
    ((x - loc) * (1.0 / sd)).square() * -0.5 - (libm::log(sd) + LN_SQRT_2PI)
}

/// Log-density of a positive-support prior at `exp(u)`, excluding the
/// Jacobian.
#[inline]
fn positive_lpdf<S: Real>(prior: &PriorSpec, u: S, value: S) -> S {
    match *prior {
        PriorSpec::HalfNormal { sd } => {
            (value * (1.0 / sd)).square() * -0.5 + (core::f64::consts::LN_2 - LN_SQRT_2PI - libm::log(sd))
        }
        PriorSpec::Gamma { shape, rate } => {
            u * (shape - 1.0) - value * rate
                + (shape * libm::log(rate) - lgamma_unchecked(shape))
        }
        PriorSpec::Normal { .. } => unreachable!("positive-support prior"),
    }
}

/// Cell log-likelihood at linear predictor `eta`, written with `lgamma`.
#[cfg(test)]
pub(crate) fn cell_log_lik_reference<S: Real>(eta: S, phi: Option<S>, cell: &CellData) -> S {
    match phi {
        None => eta * cell.k - eta.softplus() * cell.n + cell.ln_choose,
        Some(phi) => {
            let alpha = eta.inv_logit() * phi;
            let beta = (-eta).inv_logit() * phi;
            (alpha + cell.k).lgamma() + (beta + (cell.n - cell.k)).lgamma() - (phi + cell.n).lgamma()
                - alpha.lgamma()
                - beta.lgamma()
                + phi.lgamma()
                + cell.ln_choose
        }
    }
}

/// Counts up to this size use exact finite sums for gamma-function ratios.
const SMALL_COUNT: f64 = 100_000.0;

/// Rising factorial `a (a+1) ... (a+m-1)` kept as `mantissa * exp(log_scale)`,
/// with the derivative ratio `ψ(a + m) - ψ(a)`.
struct Rising {
    mantissa: f64,
    log_scale: f64,
    digamma_diff: f64,
}

#[inline]
fn rising(a: f64, m: f64) -> Rising {
    if m > SMALL_COUNT {
        return Rising {
            mantissa: 1.0,
            log_scale: lgamma_unchecked(a + m) - lgamma_unchecked(a),
            digamma_diff: digamma_unchecked(a + m) - digamma_unchecked(a),
        };
    }
    // prod and its derivative in `a` advance together; their ratio is the
    // digamma difference.
    let mut prod = 1.0;
    let mut deriv = 0.0;
    let mut log_scale = 0.0;
    let mut t = a;
    for _ in 0..m as u32 {
        deriv = deriv * t + prod;
        prod *= t;
        t += 1.0;
        if !(1e-100..=1e100).contains(&prod) {
            log_scale += libm::log(prod);
            deriv /= prod;
            prod = 1.0;
        }
    }
    Rising {
        mantissa: prod,
        log_scale,
        digamma_diff: deriv / prod,
    }
}

/// Cell log-likelihood with its partial derivatives in `eta` and `phi`.
#[inline]
pub(crate) fn cell_log_lik_grad(eta: f64, phi: Option<f64>, cell: &CellData) -> (f64, f64, f64) {
    let total = phi.map(|phi| rising(phi, cell.n));
    cell_log_lik_grad_with(eta, phi, cell, total.as_ref())
}

/// As [`cell_log_lik_grad`], reusing the `phi` rising factorial of length `n`.
#[inline]
fn cell_log_lik_grad_with(eta: f64, phi: Option<f64>, cell: &CellData, total: Option<&Rising>) -> (f64, f64, f64) {
    // One exponential serves the logistic function and softplus.
    let e = libm::exp(-libm::fabs(eta));
    let (p, q) = if eta >= 0.0 {
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        (e / (1.0 + e), 1.0 / (1.0 + e))
    };
    match (phi, total) {
        (Some(phi), Some(t)) => {
            let alpha = p * phi;
            let beta = q * phi;
            let a = rising(alpha, cell.k);
            let b = rising(beta, cell.n - cell.k);
            let value = libm::log(a.mantissa * b.mantissa / t.mantissa) + (a.log_scale + b.log_scale - t.log_scale)
                + cell.ln_choose;
            let (da, db) = (a.digamma_diff, b.digamma_diff);
            let d_eta = phi * (p * q) * (da - db);
            let d_phi = p * da + q * db - t.digamma_diff;
            (value, d_eta, d_phi)
        }
        _ => {
            let softplus = if eta > 0.0 { eta + libm::log1p(e) } else { libm::log1p(e) };
            let value = eta * cell.k - softplus * cell.n + cell.ln_choose;
            (value, cell.k - cell.n * p, 0.0)
        }
    }
}

#[inline]
pub(crate) fn cell_log_lik(eta: f64, phi: Option<f64>, cell: &CellData) -> f64 {
    cell_log_lik_grad(eta, phi, cell).0
}

impl ParameterLayout {
    pub fn n_cells(&self) -> usize {
        self.binding_ranges.len()
    }

    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Names of every scalar in the unconstrained vector, in order.
    pub fn scalar_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .flat_map(|e| (0..e.size).map(move |i| e.scalar_name(i)))
            .collect()
    }

    /// Position of a named scalar.
    pub fn scalar_index(&self, name: &str) -> Option<usize> {
        self.scalar_names().iter().position(|n| n == name)
    }

    pub fn transform_of(&self, index: usize) -> Transform {
        self.entries
            .iter()
            .find(|e| index >= e.offset && index < e.offset + e.size)
            .map_or(Transform::Identity, |e| e.transform)
    }

    fn entry_of(&self, index: usize) -> &Entry {
        self.entries
            .iter()
            .find(|e| index >= e.offset && index < e.offset + e.size)
            .expect("index within layout")
    }

    /// Constrained values of the layout scalars.
    pub fn constrain_values(&self, point: &[f64]) -> Vec<f64> {
        let mut out = point.to_vec();
        for e in &self.entries {
            if e.transform == Transform::Log {
                for v in &mut out[e.offset..e.offset + e.size] {
                    *v = libm::exp(*v);
                }
            }
        }
        out
    }

    /// Inverse of [`constrain_values`](Self::constrain_values).
    pub fn unconstrain_values(&self, values: &[f64]) -> Vec<f64> {
        let mut out = values.to_vec();
        for e in &self.entries {
            if e.transform == Transform::Log {
                for v in &mut out[e.offset..e.offset + e.size] {
                    *v = libm::log(*v);
                }
            }
        }
        out
    }

    pub(crate) fn check_point(&self, point: &[f64]) -> Result<(), DensityError> {
        if point.len() != self.total_dim {
            return Err(DensityError::DimensionMismatch {
                expected: self.total_dim,
                got: point.len(),
            });
        }
        if let Some(i) = point.iter().position(|v| !v.is_finite()) {
            return Err(DensityError::NonFinite(self.entry_of(i).scalar_name(i - self.entry_of(i).offset)));
        }
        Ok(())
    }

    pub(crate) fn check_cells(&self, cells: &CellTable) -> Result<(), DensityError> {
        if cells.len() != self.n_cells() {
            return Err(DensityError::CellMismatch {
                expected: self.n_cells(),
                got: cells.len(),
            });
        }
        Ok(())
    }

    /// Shared forward pass; `data = None` skips the likelihood.
    pub(crate) fn forward<S: Real>(&self, x: &[S], data: Option<&[CellData]>) -> Forward<S> {
        let Latent {
            prior,
            jacobian,
            effects,
            phi,
        } = self.latent(x);
        let etas: Vec<S> = (0..self.n_cells()).map(|i| self.cell_eta(i, &effects)).collect();
        let mut likelihood = S::constant(0.0);
        if let Some(data) = data {
            for (&eta, cell) in etas.iter().zip(data) {
                let (v, d_eta, d_phi) = cell_log_lik_grad(eta.value(), phi.map(Real::value), cell);
                likelihood = likelihood + eta.lift2(phi, v, d_eta, d_phi);
            }
        }
        Forward {
            prior,
            jacobian,
            likelihood,
            effects,
            etas,
            phi,
        }
    }

    #[inline]
    fn cell_eta<S: Real>(&self, cell: usize, effects: &[Vec<S>]) -> S {
        let (start, end) = self.binding_ranges[cell];
        let mut eta = S::constant(0.0);
        for b in &self.bindings[start..end] {
            let v = effects[b.component][b.element];
            eta = match b.covariate {
                None => eta + v,
                Some(c) => eta + v * c,
            };
        }
        eta
    }

    /// Likelihood summed over `data` from the concatenated component values,
    /// adding its partial derivatives to `grad_effects` and returning the one
    /// for `phi`. Matches the likelihood of [`forward`](Self::forward) bit for bit.
    pub(crate) fn likelihood_with_grad(
        &self,
        effects: &[f64],
        phi: Option<f64>,
        data: &[CellData],
        grad_effects: &mut [f64],
    ) -> (f64, f64) {
        let mut total = 0.0;
        let mut grad_phi = 0.0;
        let mut cached: Option<(f64, Rising)> = None;
        for (cell, &(start, end)) in data.iter().zip(&self.binding_ranges) {
            let terms = &self.flat_bindings[start..end];
            let mut eta = 0.0;
            for &(j, c) in terms {
                eta += effects[j as usize] * c;
            }
            if let Some(phi) = phi {
                if cached.as_ref().is_none_or(|(n, _)| *n != cell.n) {
                    cached = Some((cell.n, rising(phi, cell.n)));
                }
            }
            let (v, d_eta, d_phi) = cell_log_lik_grad_with(eta, phi, cell, cached.as_ref().map(|(_, r)| r));
            total += v;
            grad_phi += d_phi;
            for &(j, c) in terms {
                grad_effects[j as usize] += d_eta * c;
            }
        }
        (total, grad_phi)
    }

    /// Prior, Jacobian, component values and dispersion.
    pub(crate) fn latent<S: Real>(&self, x: &[S]) -> Latent<S> {
        let zero = S::constant(0.0);
        let mut prior = zero;
        let mut jacobian = zero;
        let mut effects: Vec<Vec<S>> = Vec::with_capacity(self.components.len());

        for comp in &self.components {
            let size = comp.size();
            let parent_value = |i: usize, effects: &[Vec<S>]| -> S {
                let p = comp.parent.expect("component has a parent");
                effects[p][comp.parent_map[i]]
            };
            let means: Vec<S> = match comp.location {
                Location::Parent => (0..size).map(|i| parent_value(i, &effects)).collect(),
                Location::Constant(c) => vec![S::constant(c); size],
                Location::Param {
                    entry,
                    per_element,
                    mu,
                    sd,
                    offset_by_parent,
                } => {
                    let off = self.entries[entry].offset;
                    let n = if per_element { size } else { 1 };
                    let mut locs = Vec::with_capacity(n);
                    for j in 0..n {
                        let m = x[off + j];
                        let loc = if offset_by_parent {
                            let pv = if per_element {
                                parent_value(j, &effects)
                            } else {
                                effects[comp.parent.expect("parent")][0]
                            };
                            pv + mu
                        } else {
                            S::constant(mu)
                        };
                        prior = prior + normal_lpdf(m, loc, sd);
                        locs.push(m);
                    }
                    if per_element {
                        locs
                    } else {
                        vec![locs[0]; size]
                    }
                }
            };
            let values = match (comp.sigma, comp.values) {
                (Some((se, sprior)), Some(ve)) => {
                    let u = x[self.entries[se].offset];
                    let sigma = u.exp();
                    prior = prior + positive_lpdf(&sprior, u, sigma);
                    jacobian = jacobian + u;
                    let off = self.entries[ve].offset;
                    let mut vals = Vec::with_capacity(size);
                    for (i, &mean) in means.iter().enumerate() {
                        let raw = x[off + i];
                        if comp.centered {
                            // Normal(raw | mean, sigma) with a variable scale.
                            let r = (raw - mean) / sigma;
                            prior = prior + r.square() * -0.5 - u - LN_SQRT_2PI;
                            vals.push(raw);
                        } else {
                            prior = prior + raw.square() * -0.5 - LN_SQRT_2PI;
                            vals.push(mean + sigma * raw);
                        }
                    }
                    vals
                }
                _ => means,
            };
            effects.push(values);
        }

        let phi = self.dispersion.map(|d| {
            let entry = &self.entries[d];
            let u = x[entry.offset];
            let phi = u.exp();
            prior = prior + positive_lpdf(&entry.prior, u, phi);
            jacobian = jacobian + u;
            phi
        });

        Latent {
            prior,
            jacobian,
            effects,
            phi,
        }
    }

    /// Names of derived quantities: per-element effects of every component
    /// (logit scale) followed, for levels, by their probability-scale
    /// counterparts prefixed `p_`.
    pub fn derived_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for comp in &self.components {
            for i in 0..comp.size() {
                names.push(comp.element_name(i));
            }
            if comp.kind == ComponentKind::Level {
                for i in 0..comp.size() {
                    names.push(format!("p_{}", comp.element_name(i)));
                }
            }
        }
        names
    }
}

/// Named constrained values plus derived effects for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedDraw {
    /// Layout scalars on the constrained scale.
    pub values: Vec<f64>,
    /// Per component, per element, logit scale.
    pub effects: Vec<Vec<f64>>,
    pub cell_eta: Vec<f64>,
    pub cell_p: Vec<f64>,
    pub phi: Option<f64>,
}

impl ConstrainedDraw {
    /// Beta-binomial `(α, β)` of cell `i`, if the model has a dispersion.
    pub fn alpha_beta(&self, i: usize) -> Option<(f64, f64)> {
        self.phi.map(|phi| (inv_logit(self.cell_eta[i]) * phi, inv_logit(-self.cell_eta[i]) * phi))
    }

    /// Values aligned with [`ParameterLayout::derived_names`].
    pub fn derived(&self, layout: &ParameterLayout) -> Vec<f64> {
        let mut out = Vec::new();
        for (comp, eff) in layout.components.iter().zip(&self.effects) {
            out.extend_from_slice(eff);
            if comp.kind == ComponentKind::Level {
                out.extend(eff.iter().map(|&v| inv_logit(v)));
            }
        }
        out
    }
}

/// Maps an unconstrained point to named constrained values and effects.
pub fn constrain(layout: &ParameterLayout, point: &[f64]) -> Result<ConstrainedDraw, DensityError> {
    layout.check_point(point)?;
    let fwd = layout.forward::<f64>(point, None);
    Ok(ConstrainedDraw {
        values: layout.constrain_values(point),
        cell_p: fwd.etas.iter().map(|&e| inv_logit(e)).collect(),
        cell_eta: fwd.etas,
        effects: fwd.effects,
        phi: fwd.phi,
    })
}

/// Log prior, Jacobian and likelihood at an unconstrained point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPosteriorParts {
    pub prior: f64,
    pub jacobian: f64,
    pub likelihood: f64,
}

impl LogPosteriorParts {
    pub fn total(&self) -> f64 {
        self.prior + self.jacobian + self.likelihood
    }
}

pub fn log_posterior_parts(
    layout: &ParameterLayout,
    point: &[f64],
    cells: &CellTable,
) -> Result<LogPosteriorParts, DensityError> {
    layout.check_point(point)?;
    layout.check_cells(cells)?;
    let data = CellData::from_table(cells);
    let fwd = layout.forward::<f64>(point, Some(&data));
    Ok(LogPosteriorParts {
        prior: fwd.prior,
        jacobian: fwd.jacobian,
        likelihood: fwd.likelihood,
    })
}

/// Joint log-density on the unconstrained scale (prior + likelihood +
/// log-Jacobian of the log transforms).
pub fn log_posterior(layout: &ParameterLayout, point: &[f64], cells: &CellTable) -> Result<f64, DensityError> {
    log_posterior_parts(layout, point, cells).map(|p| p.total())
}

/// Log-likelihood of each cell under `draw`.
pub fn pointwise_log_lik(
    layout: &ParameterLayout,
    draw: &ConstrainedDraw,
    cells: &CellTable,
) -> Result<Vec<f64>, DensityError> {
    layout.check_cells(cells)?;
    if draw.cell_eta.len() != cells.len() {
        return Err(DensityError::DimensionMismatch {
            expected: cells.len(),
            got: draw.cell_eta.len(),
        });
    }
    let data = CellData::from_table(cells);
    Ok(draw
        .cell_eta
        .iter()
        .zip(&data)
        .map(|(&eta, cell)| cell_log_lik(eta, draw.phi, cell))
        .collect())
}

/// Pointwise log-likelihood per Bernoulli trial, grouped: for each cell a
/// success column (weight `k`) and a failure column (weight `n - k`);
/// zero-weight columns are dropped. Binomial models only.
pub fn pointwise_trial_log_lik(
    layout: &ParameterLayout,
    draw: &ConstrainedDraw,
    cells: &CellTable,
) -> Result<(Vec<f64>, Vec<f64>), DensityError> {
    layout.check_cells(cells)?;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (cell, &eta) in cells.cells.iter().zip(&draw.cell_eta) {
        if cell.k > 0 {
            values.push(-crate::special::softplus(-eta));
            weights.push(cell.k as f64);
        }
        if cell.n > cell.k {
            values.push(-crate::special::softplus(eta));
            weights.push((cell.n - cell.k) as f64);
        }
    }
    Ok((values, weights))
}

/// `ln C(n,k) + ln B(k+α, n−k+β) − ln B(α, β)`.
pub fn betabinomial_log_pmf(k: u64, n: u64, alpha: f64, beta: f64) -> Result<f64, DensityError> {
    let err = || DensityError::BetaBinomialDomain { k, n, alpha, beta };
    if k > n {
        return Err(err());
    }
    let num = log_beta(k as f64 + alpha, (n - k) as f64 + beta).map_err(|_| err())?;
    let den = log_beta(alpha, beta).map_err(|_| err())?;
    Ok(ln_choose(n, k) + num - den)
}

/// Binomial log-pmf at success probability `p`.
pub fn binomial_log_pmf(k: u64, n: u64, p: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    let mut out = ln_choose(n, k);
    if k > 0 {
        out += kf * libm::log(p);
    }
    if n > k {
        out += (nf - kf) * libm::log1p(-p);
    }
    out
}

fn sample_prior<R: Rng + ?Sized>(prior: &PriorSpec, loc_shift: f64, rng: &mut R) -> f64 {
    match *prior {
        PriorSpec::Normal { mu, sd } => {
            Normal::new(mu + loc_shift, sd).expect("checked prior").sample(rng)
        }
        PriorSpec::HalfNormal { sd } => {
            let z: f64 = StandardNormal.sample(rng);
            (z * sd).abs()
        }
        PriorSpec::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("checked prior").sample(rng),
    }
}

/// Ancestral draw from the prior followed by simulated successes per cell.
pub fn prior_predictive_draw<R: Rng + ?Sized>(
    layout: &ParameterLayout,
    cells: &CellTable,
    rng: &mut R,
) -> Result<(ConstrainedDraw, Vec<u64>), DensityError> {
    layout.check_cells(cells)?;
    let mut x = vec![0.0; layout.total_dim];
    let mut effects: Vec<Vec<f64>> = Vec::with_capacity(layout.components.len());
    for comp in &layout.components {
        let size = comp.size();
        let parent_value = |i: usize, effects: &[Vec<f64>]| effects[comp.parent.expect("parent")][comp.parent_map[i]];
        let means: Vec<f64> = match comp.location {
            Location::Parent => (0..size).map(|i| parent_value(i, &effects)).collect(),
            Location::Constant(c) => vec![c; size],
            Location::Param {
                entry,
                per_element,
                offset_by_parent,
                ..
            } => {
                let e = &layout.entries[entry];
                let n = if per_element { size } else { 1 };
                let locs: Vec<f64> = (0..n)
                    .map(|j| {
                        let shift = if !offset_by_parent {
                            0.0
                        } else if per_element {
                            parent_value(j, &effects)
                        } else {
                            effects[comp.parent.expect("parent")][0]
                        };
                        let m = sample_prior(&e.prior, shift, rng);
                        x[e.offset + j] = m;
                        m
                    })
                    .collect();
                if per_element {
                    locs
                } else {
                    vec![locs[0]; size]
                }
            }
        };
        let values = match (comp.sigma, comp.values) {
            (Some((se, sprior)), Some(ve)) => {
                let sigma = sample_prior(&sprior, 0.0, rng).max(f64::MIN_POSITIVE);
                x[layout.entries[se].offset] = libm::log(sigma);
                let off = layout.entries[ve].offset;
                means
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| {
                        let z: f64 = StandardNormal.sample(rng);
                        if comp.centered {
                            x[off + i] = m + sigma * z;
                            m + sigma * z
                        } else {
                            x[off + i] = z;
                            m + sigma * z
                        }
                    })
                    .collect()
            }
            _ => means,
        };
        effects.push(values);
    }
    if let Some(d) = layout.dispersion {
        let e = &layout.entries[d];
        let phi = sample_prior(&e.prior, 0.0, rng).max(f64::MIN_POSITIVE);
        x[e.offset] = libm::log(phi);
    }

    let draw = constrain(layout, &x)?;
    let mut ks = Vec::with_capacity(cells.len());
    for (i, cell) in cells.cells.iter().enumerate() {
        let p = match draw.alpha_beta(i) {
            Some((a, b)) => {
                let a = a.max(1e-300);
                let b = b.max(1e-300);
                Beta::new(a, b).map(|d| d.sample(rng)).unwrap_or(draw.cell_p[i])
            }
            None => draw.cell_p[i],
        };
        let p = p.clamp(0.0, 1.0);
        let k = Binomial::new(cell.n, p).map_err(|_| DensityError::NonFiniteDensity)?.sample(rng);
        ks.push(k);
    }
    Ok((draw, ks))
}
