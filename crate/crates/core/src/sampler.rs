//! Multi-chain No-U-Turn sampling with step-size and diagonal metric
//! adaptation during warmup.
//!
//! The transition uses multinomial sampling over the trajectory and the
//! generalized U-turn criterion, including the extra checks across merged
//! subtrees.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CellTable;
use crate::density::{DensityError, ParameterLayout};
use crate::gradient::{LogDensity, ModelDensity};
use crate::special::log_add_exp;

/// Energy error above which a trajectory is declared divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 2000,
            samples: 2000,
            seed: 0,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.into()));
        if self.chains < 1 {
            return bad("chains must be at least 1");
        }
        if self.warmup < 100 {
            return bad("warmup must be at least 100");
        }
        if self.samples < 1 {
            return bad("samples must be at least 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        if self.max_tree_depth < 1 {
            return bad("max_tree_depth must be at least 1");
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return bad("init_radius must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {chain}: no finite initial point found in 100 attempts ({last})")]
    Initialization { chain: usize, last: DensityError },
    #[error(
        "chain {chain}: every warmup transition diverged; try a higher target_accept or a non-centered parameterization"
    )]
    AllDivergent { chain: usize },
    #[error("chain {chain}: step size search failed: {message}")]
    StepSize { chain: usize, message: String },
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Per-transition statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub divergent: bool,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub step_size: f64,
    pub accept_stat: f64,
    pub energy: f64,
}

/// A point with its log-density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl State {
    pub fn new<D: LogDensity + ?Sized>(density: &mut D, q: Vec<f64>) -> Result<Self, DensityError> {
        let mut grad = vec![0.0; q.len()];
        let logp = density.logp_grad(&q, &mut grad)?;
        Ok(Self { q, grad, logp })
    }
}

/// One leapfrog step of size `step` under the diagonal inverse metric
/// `inv_mass`, updating `q`, `p` and `grad` in place. Returns the new
/// log-density. An error leaves the arguments in an unspecified state.
pub fn leapfrog<D: LogDensity + ?Sized>(
    density: &mut D,
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    step: f64,
    inv_mass: &[f64],
) -> Result<f64, DensityError> {
    for (pi, gi) in p.iter_mut().zip(grad.iter()) {
        *pi += 0.5 * step * gi;
    }
    for ((qi, pi), mi) in q.iter_mut().zip(p.iter()).zip(inv_mass) {
        *qi += step * mi * pi;
    }
    let logp = density.logp_grad(q, grad)?;
    for (pi, gi) in p.iter_mut().zip(grad.iter()) {
        *pi += 0.5 * step * gi;
    }
    Ok(logp)
}

#[derive(Debug, Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(pi, mi)| pi * pi * mi).sum::<f64>()
}

fn hamiltonian(z: &Point, inv_mass: &[f64]) -> f64 {
    let h = -z.logp + kinetic(&z.p, inv_mass);
    if h.is_nan() {
        f64::INFINITY
    } else {
        h
    }
}

fn sample_momentum<R: Rng + ?Sized>(p: &mut [f64], inv_mass: &[f64], rng: &mut R) {
    for (pi, mi) in p.iter_mut().zip(inv_mass) {
        let z: f64 = rng.sample(StandardNormal);
        *pi = z / mi.sqrt();
    }
}

fn sharp(p: &[f64], inv_mass: &[f64]) -> Vec<f64> {
    p.iter().zip(inv_mass).map(|(a, b)| a * b).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Trajectory<'a, D: ?Sized, R: ?Sized> {
    density: &'a mut D,
    rng: &'a mut R,
    inv_mass: &'a [f64],
    step: f64,
    h0: f64,
    z: Point,
    divergent: bool,
    n_leapfrog: usize,
    sum_metro_prob: f64,
}

impl<D: LogDensity + ?Sized, R: Rng + ?Sized> Trajectory<'_, D, R> {
    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut Vec<f64>,
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        sign: f64,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            let z = &mut self.z;
            let h = match leapfrog(&mut *self.density, &mut z.q, &mut z.p, &mut z.grad, sign * self.step, self.inv_mass) {
                Ok(logp) => {
                    z.logp = logp;
                    hamiltonian(z, self.inv_mass)
                }
                Err(_) => f64::INFINITY,
            };
            self.n_leapfrog += 1;
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_add_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro_prob += if self.h0 - h > 0.0 { 1.0 } else { libm::exp(self.h0 - h) };
            *z_propose = self.z.clone();
            *p_sharp_beg = sharp(&self.z.p, self.inv_mass);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&self.z.p) {
                *r += p;
            }
            p_beg.clone_from(&self.z.p);
            p_end.clone_from(&self.z.p);
            return !self.divergent;
        }

        let n = self.z.q.len();
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut p_sharp_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            sign,
            &mut log_sum_weight_init,
        ) {
            return false;
        }

        let mut z_propose_final = self.z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut p_sharp_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            sign,
            &mut log_sum_weight_final,
        ) {
            return false;
        }

        let log_sum_weight_subtree = log_add_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_add_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = libm::exp(log_sum_weight_final - log_sum_weight_subtree);
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &add(&rho_init, &p_final_beg));
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &add(&rho_final, &p_init_end));
        persist
    }
}

/// One NUTS transition from `state`. A divergent or otherwise invalid
/// extension stops tree building; the returned state is then the
/// multinomial sample from the valid part (possibly `state` itself).
pub fn nuts_transition<D: LogDensity + ?Sized, R: Rng + ?Sized>(
    density: &mut D,
    state: &State,
    step: f64,
    inv_mass: &[f64],
    max_depth: usize,
    rng: &mut R,
) -> (State, TransitionStats) {
    let n = state.q.len();
    let mut p = vec![0.0; n];
    sample_momentum(&mut p, inv_mass, rng);
    let z0 = Point {
        q: state.q.clone(),
        p,
        grad: state.grad.clone(),
        logp: state.logp,
    };
    let h0 = hamiltonian(&z0, inv_mass);

    let mut z_fwd = z0.clone();
    let mut z_bck = z0.clone();
    let mut z_sample = z0.clone();
    let mut z_propose = z0.clone();

    let p_sharp0 = sharp(&z0.p, inv_mass);
    let mut p_fwd_fwd = z0.p.clone();
    let mut p_sharp_fwd_fwd = p_sharp0.clone();
    let mut p_fwd_bck = z0.p.clone();
    let mut p_sharp_fwd_bck = p_sharp0.clone();
    let mut p_bck_fwd = z0.p.clone();
    let mut p_sharp_bck_fwd = p_sharp0.clone();
    let mut p_bck_bck = z0.p.clone();
    let mut p_sharp_bck_bck = p_sharp0;
    let mut rho = z0.p.clone();
    let mut log_sum_weight = 0.0;

    let mut traj = Trajectory {
        density,
        rng,
        inv_mass,
        step,
        h0,
        z: z0,
        divergent: false,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
    };

    let mut depth = 0;
    while depth < max_depth {
        let mut rho_fwd = vec![0.0; n];
        let mut rho_bck = vec![0.0; n];
        let mut log_sum_weight_subtree = f64::NEG_INFINITY;
        let valid = if traj.rng.random::<f64>() > 0.5 {
            traj.z = z_fwd.clone();
            rho_bck.clone_from(&rho);
            p_bck_fwd.clone_from(&p_fwd_bck);
            p_sharp_bck_fwd.clone_from(&p_sharp_fwd_bck);
            let v = traj.build_tree(
                depth,
                &mut z_propose,
                &mut p_sharp_fwd_bck,
                &mut p_sharp_fwd_fwd,
                &mut rho_fwd,
                &mut p_fwd_bck,
                &mut p_fwd_fwd,
                1.0,
                &mut log_sum_weight_subtree,
            );
            z_fwd = traj.z.clone();
            v
        } else {
            traj.z = z_bck.clone();
            rho_fwd.clone_from(&rho);
            p_fwd_bck.clone_from(&p_bck_fwd);
            p_sharp_fwd_bck.clone_from(&p_sharp_bck_fwd);
            let v = traj.build_tree(
                depth,
                &mut z_propose,
                &mut p_sharp_bck_fwd,
                &mut p_sharp_bck_bck,
                &mut rho_bck,
                &mut p_bck_fwd,
                &mut p_bck_bck,
                -1.0,
                &mut log_sum_weight_subtree,
            );
            z_bck = traj.z.clone();
            v
        };
        if !valid {
            break;
        }
        depth += 1;

        if log_sum_weight_subtree > log_sum_weight {
            z_sample = z_propose.clone();
        } else {
            let accept = libm::exp(log_sum_weight_subtree - log_sum_weight);
            if traj.rng.random::<f64>() < accept {
                z_sample = z_propose.clone();
            }
        }
        log_sum_weight = log_add_exp(log_sum_weight, log_sum_weight_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &add(&rho_bck, &p_fwd_bck));
        persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
        if !persist {
            break;
        }
    }

    let stats = TransitionStats {
        divergent: traj.divergent,
        tree_depth: depth,
        n_leapfrog: traj.n_leapfrog,
        step_size: step,
        accept_stat: if traj.n_leapfrog > 0 {
            traj.sum_metro_prob / traj.n_leapfrog as f64
        } else {
            0.0
        },
        energy: hamiltonian(&z_sample, inv_mass),
    };
    (
        State {
            q: z_sample.q,
            grad: z_sample.grad,
            logp: z_sample.logp,
        },
        stats,
    )
}

/// Doubles or halves `step` until a single leapfrog step crosses an
/// acceptance probability of 0.8.
fn init_stepsize<D: LogDensity + ?Sized, R: Rng + ?Sized>(
    density: &mut D,
    state: &State,
    mut step: f64,
    inv_mass: &[f64],
    rng: &mut R,
) -> Result<f64, String> {
    let log_target = libm::log(0.8);
    let mut trial = |step: f64, rng: &mut R| -> f64 {
        let mut z = Point {
            q: state.q.clone(),
            p: vec![0.0; state.q.len()],
            grad: state.grad.clone(),
            logp: state.logp,
        };
        sample_momentum(&mut z.p, inv_mass, rng);
        let h0 = hamiltonian(&z, inv_mass);
        let h = match leapfrog(density, &mut z.q, &mut z.p, &mut z.grad, step, inv_mass) {
            Ok(logp) => {
                z.logp = logp;
                hamiltonian(&z, inv_mass)
            }
            Err(_) => f64::INFINITY,
        };
        h0 - h
    };
    let direction_up = trial(step, rng) > log_target;
    loop {
        let delta = trial(step, rng);
        if direction_up && !(delta > log_target) {
            break;
        }
        if !direction_up && !(delta < log_target) {
            break;
        }
        step = if direction_up { step * 2.0 } else { step * 0.5 };
        if step > 1e7 {
            return Err("posterior appears improper (step size exceeded 1e7)".into());
        }
        if step == 0.0 {
            return Err("no acceptably small step size".into());
        }
    }
    Ok(step)
}

/// Dual-averaging step-size adaptation.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    delta: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub const GAMMA: f64 = 0.05;
    pub const T0: f64 = 10.0;
    pub const KAPPA: f64 = 0.75;

    pub fn new(step: f64, delta: f64) -> Self {
        Self {
            mu: libm::log(10.0 * step),
            delta,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Next step size after observing `accept_stat`.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - a);
        let x = self.mu - self.s_bar * libm::sqrt(self.counter) / Self::GAMMA;
        let x_eta = libm::pow(self.counter, -Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        libm::exp(x)
    }

    /// Step size to freeze after warmup.
    pub fn final_step(&self) -> f64 {
        libm::exp(self.x_bar)
    }
}

/// Expanding-window schedule for the diagonal metric: an initial
/// fast-adaptation buffer, doubling slow windows, and a terminal buffer.
#[derive(Debug, Clone)]
pub struct WindowSchedule {
    num_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl WindowSchedule {
    pub fn new(num_warmup: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75, 50, 25);
        if init + term + base > num_warmup {
            init = (0.15 * num_warmup as f64) as usize;
            term = (0.1 * num_warmup as f64) as usize;
            base = num_warmup - (init + term);
        }
        Self {
            num_warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: init + base - 1,
            counter: 0,
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.num_warmup - self.term_buffer
            && self.counter != self.num_warmup
    }

    fn window_end(&self) -> bool {
        self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn advance_window(&mut self) {
        let last = self.num_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.num_warmup - self.term_buffer {
                self.next_window = last;
            }
        }
    }

    /// Feeds one warmup position; returns `true` when `inv_mass` was
    /// updated at the end of a window.
    pub fn learn(&mut self, q: &[f64], inv_mass: &mut [f64]) -> bool {
        if self.in_window() {
            self.count += 1;
            let n = self.count as f64;
            for i in 0..q.len() {
                let d = q[i] - self.mean[i];
                self.mean[i] += d / n;
                self.m2[i] += d * (q[i] - self.mean[i]);
            }
        }
        if self.window_end() {
            self.advance_window();
            let n = self.count as f64;
            for i in 0..inv_mass.len() {
                let var = if self.count > 1 { self.m2[i] / (n - 1.0) } else { 0.0 };
                inv_mass[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
            }
            self.count = 0;
            self.mean.iter_mut().for_each(|v| *v = 0.0);
            self.m2.iter_mut().for_each(|v| *v = 0.0);
            self.counter += 1;
            return true;
        }
        self.counter += 1;
        false
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Unconstrained positions, `samples × dim` row-major.
    pub positions: Vec<f64>,
    pub stats: Vec<TransitionStats>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
}

/// Progress notification after each iteration of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub chain: usize,
    /// Iterations completed, warmup included.
    pub iteration: usize,
    pub total: usize,
}

fn initial_state<D: LogDensity + ?Sized, R: Rng + ?Sized>(
    density: &mut D,
    radius: f64,
    chain: usize,
    rng: &mut R,
) -> Result<State, SamplerError> {
    let dim = density.dim();
    let mut last = DensityError::NonFiniteDensity;
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        match State::new(density, q) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
    }
    Err(SamplerError::Initialization { chain, last })
}

/// Runs warmup and sampling for chain `chain`, seeded with
/// `config.seed + chain`.
pub fn sample_chain<D, P>(
    density: &mut D,
    config: &SamplerConfig,
    chain: usize,
    mut progress: P,
) -> Result<ChainDraws, SamplerError>
where
    D: LogDensity + ?Sized,
    P: FnMut(Progress),
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(chain as u64));
    let dim = density.dim();
    let total = config.warmup + config.samples;
    let mut state = initial_state(density, config.init_radius, chain, &mut rng)?;
    let mut inv_mass = vec![1.0; dim];
    let step_err = |message| SamplerError::StepSize { chain, message };

    let mut step = init_stepsize(density, &state, 1.0, &inv_mass, &mut rng).map_err(step_err)?;
    let mut averaging = DualAveraging::new(step, config.target_accept);
    let mut windows = WindowSchedule::new(config.warmup, dim);
    let mut warmup_divergences = 0;
    for it in 0..config.warmup {
        let (next, stats) = nuts_transition(density, &state, step, &inv_mass, config.max_tree_depth, &mut rng);
        state = next;
        warmup_divergences += stats.divergent as usize;
        step = averaging.learn(stats.accept_stat);
        if windows.learn(&state.q, &mut inv_mass) {
            step = init_stepsize(density, &state, step, &inv_mass, &mut rng).map_err(step_err)?;
            averaging = DualAveraging::new(step, config.target_accept);
        }
        progress(Progress {
            chain,
            iteration: it + 1,
            total,
        });
    }
    if warmup_divergences == config.warmup {
        return Err(SamplerError::AllDivergent { chain });
    }
    step = averaging.final_step();

    let mut positions = Vec::with_capacity(config.samples * dim);
    let mut all_stats = Vec::with_capacity(config.samples);
    for it in 0..config.samples {
        let (next, stats) = nuts_transition(density, &state, step, &inv_mass, config.max_tree_depth, &mut rng);
        state = next;
        positions.extend_from_slice(&state.q);
        all_stats.push(stats);
        progress(Progress {
            chain,
            iteration: config.warmup + it + 1,
            total,
        });
    }
    Ok(ChainDraws {
        positions,
        stats: all_stats,
        step_size: step,
        inv_metric: inv_mass,
        warmup_divergences,
    })
}

/// Post-warmup draws of all chains on both scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub dim: usize,
    pub samples: usize,
    pub chains: Vec<ChainDraws>,
    /// Constrained positions per chain, `samples × dim` row-major.
    pub constrained: Vec<Vec<f64>>,
}

impl Draws {
    /// Assembles chains whose positions live in `layout`'s space.
    pub fn from_layout(layout: &ParameterLayout, chains: Vec<ChainDraws>) -> Self {
        let dim = layout.total_dim;
        let constrained = chains
            .iter()
            .map(|c| {
                c.positions
                    .chunks(dim.max(1))
                    .flat_map(|row| layout.constrain_values(row))
                    .collect()
            })
            .collect();
        Self::assemble(layout.scalar_names(), chains, constrained)
    }

    /// Draws where both scales coincide.
    pub fn identity(names: Vec<String>, chains: Vec<ChainDraws>) -> Self {
        let constrained = chains.iter().map(|c| c.positions.clone()).collect();
        Self::assemble(names, chains, constrained)
    }

    fn assemble(names: Vec<String>, chains: Vec<ChainDraws>, constrained: Vec<Vec<f64>>) -> Self {
        let dim = names.len();
        let samples = chains.first().map_or(0, |c| c.stats.len());
        Self {
            names,
            dim,
            samples,
            chains,
            constrained,
        }
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0 || self.chains.is_empty()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Unconstrained row `iteration` of `chain`.
    pub fn position(&self, chain: usize, iteration: usize) -> &[f64] {
        &self.chains[chain].positions[iteration * self.dim..(iteration + 1) * self.dim]
    }

    /// Constrained row `iteration` of `chain`.
    pub fn constrained_row(&self, chain: usize, iteration: usize) -> &[f64] {
        &self.constrained[chain][iteration * self.dim..(iteration + 1) * self.dim]
    }

    /// Constrained series of parameter `index`, one vector per chain.
    pub fn series(&self, index: usize) -> Vec<Vec<f64>> {
        self.constrained
            .iter()
            .map(|c| (0..self.samples).map(|t| c[t * self.dim + index]).collect())
            .collect()
    }

    pub fn divergent_total(&self) -> usize {
        self.chains.iter().flat_map(|c| &c.stats).filter(|s| s.divergent).count()
    }
}

/// Runs every chain in sequence on the model posterior.
pub fn run_chains(layout: &ParameterLayout, cells: &CellTable, config: &SamplerConfig) -> Result<Draws, SamplerError> {
    config.validate()?;
    let mut chains = Vec::with_capacity(config.chains);
    for c in 0..config.chains {
        let mut density = ModelDensity::new(layout, cells)?;
        chains.push(sample_chain(&mut density, config, c, |_| {})?);
    }
    Ok(Draws::from_layout(layout, chains))
}

/// Like [`run_chains`] with the likelihood switched off.
pub fn run_prior_chains(layout: &ParameterLayout, config: &SamplerConfig) -> Result<Draws, SamplerError> {
    config.validate()?;
    let mut chains = Vec::with_capacity(config.chains);
    for c in 0..config.chains {
        let mut density = ModelDensity::prior_only(layout);
        chains.push(sample_chain(&mut density, config, c, |_| {})?);
    }
    Ok(Draws::from_layout(layout, chains))
}
