use crate::error::McmcError;

/// Energy error above which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// End point of a leapfrog trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogState {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    /// `H(end) - H(start)` with `H = -log p(q) + |p|^2 / 2`.
    pub delta_h: f64,
}

/// Kick-drift-kick leapfrog with unit mass matrix.
///
/// `log_density_and_grad` writes the gradient of the log density into its
/// second argument and returns the log density.
pub fn leapfrog<F>(
    position: &[f64],
    momentum: &[f64],
    step_size: f64,
    steps: usize,
    mut log_density_and_grad: F,
) -> Result<LeapfrogState, McmcError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if !(step_size > 0.0) || steps == 0 {
        return Err(McmcError::InvalidConfig(format!(
            "leapfrog needs step_size > 0 and steps >= 1 (got {step_size}, {steps})"
        )));
    }
    let dim = position.len();
    if momentum.len() != dim {
        return Err(McmcError::DimensionMismatch { expected: dim, got: momentum.len() });
    }
    let all: Vec<usize> = (0..dim).collect();
    let unit = vec![1.0; dim];
    let mut q = position.to_vec();
    let mut p = momentum.to_vec();
    let mut grad = vec![0.0; dim];
    let lp0 = log_density_and_grad(&q, &mut grad);
    let h0 = -lp0 + kinetic(&p, &all, &unit);
    let lp1 = integrate(&mut q, &mut p, &mut grad, &all, &unit, step_size, steps, &mut log_density_and_grad);
    let delta_h = -lp1 + kinetic(&p, &all, &unit) - h0;
    if !delta_h.is_finite() || delta_h.abs() > DIVERGENCE_THRESHOLD {
        return Err(McmcError::DivergentTrajectory { delta_h });
    }
    Ok(LeapfrogState { position: q, momentum: p, log_density: lp1, delta_h })
}

/// `|p|^2 / 2` in the metric with diagonal inverse mass `inv_mass`.
pub(crate) fn kinetic(p: &[f64], block: &[usize], inv_mass: &[f64]) -> f64 {
    0.5 * block.iter().map(|&i| p[i] * p[i] * inv_mass[i]).sum::<f64>()
}

/// Runs `steps` leapfrog steps on the coordinates in `block`, leaving the
/// others fixed. `grad` must hold the gradient at the starting `q`; on return
/// it holds the gradient at the end point. Returns the end log density.
/// Stops early (returning `-inf`) once the density stops being finite.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate<F>(
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    block: &[usize],
    inv_mass: &[f64],
    eps: f64,
    steps: usize,
    f: &mut F,
) -> f64
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut lp = f64::NEG_INFINITY;
    for _ in 0..steps {
        for &i in block {
            p[i] += 0.5 * eps * grad[i];
        }
        for &i in block {
            q[i] += eps * inv_mass[i] * p[i];
        }
        lp = f(q, grad);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        for &i in block {
            p[i] += 0.5 * eps * grad[i];
        }
    }
    lp
}

/// Nesterov dual averaging of the log step size (Hoffman & Gelman, 2014).
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    iteration: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, target: f64) -> Self {
        Self {
            target,
            mu: (10.0 * initial_step).ln(),
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            iteration: 0.0,
            h_bar: 0.0,
            log_step: initial_step.ln(),
            log_step_bar: 0.0,
        }
    }

    /// Feeds one acceptance statistic and returns the next step size to use.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.iteration += 1.0;
        let t = self.iteration;
        let eta = 1.0 / (t + self.t0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        self.log_step = self.mu - t.sqrt() / self.gamma * self.h_bar;
        let w = t.powf(-self.kappa);
        self.log_step_bar = w * self.log_step + (1.0 - w) * self.log_step_bar;
        self.log_step.exp()
    }

    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    /// The averaged step size, used once warmup ends.
    pub fn final_step(&self) -> f64 {
        if self.iteration == 0.0 {
            self.log_step.exp()
        } else {
            self.log_step_bar.exp()
        }
    }
}
