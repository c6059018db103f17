use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chain::Chain;
use crate::config::McmcConfig;
use crate::error::McmcError;
use crate::hmc::{integrate, kinetic, DualAveraging, DIVERGENCE_THRESHOLD};
use crate::model::{ProbModel, Unconstrained};

const INIT_ATTEMPTS: usize = 100;
const STEP_JITTER: f64 = 0.1;

/// Transition kernel used for one block of a Gibbs sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKernel {
    Hmc,
    /// Gaussian random walk in unconstrained space. With `adapt` set, a
    /// common multiplier on `scale` is tuned during warmup toward 0.44
    /// acceptance (one coordinate) or 0.234 (several).
    Rwmh { scale: Vec<f64>, adapt: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub indices: Vec<usize>,
    pub kernel: BlockKernel,
}

impl Block {
    pub fn hmc(indices: Vec<usize>) -> Self {
        Self { indices, kernel: BlockKernel::Hmc }
    }

    pub fn rwmh(indices: Vec<usize>, scale: Vec<f64>, adapt: bool) -> Self {
        Self { indices, kernel: BlockKernel::Rwmh { scale, adapt } }
    }
}

/// RNG for chain `chain`: ChaCha8 keyed by `seed`, on its own stream.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Random-walk Metropolis on the full parameter vector with fixed scales.
pub fn sample_rwmh<M: ProbModel>(
    model: &M,
    cfg: &McmcConfig,
    proposal_scale: &[f64],
) -> Result<Vec<Chain>, McmcError> {
    if proposal_scale.iter().any(|&s| !(s > 0.0)) {
        return Err(McmcError::InvalidConfig("proposal scales must be positive".into()));
    }
    let block = Block::rwmh((0..model.dim()).collect(), proposal_scale.to_vec(), false);
    sample_gibbs_hybrid(model, cfg, &[block])
}

/// HMC on the full parameter vector.
pub fn sample_hmc<M: ProbModel>(model: &M, cfg: &McmcConfig) -> Result<Vec<Chain>, McmcError> {
    sample_gibbs_hybrid(model, cfg, &[Block::hmc((0..model.dim()).collect())])
}

/// Metropolis-within-Gibbs: every iteration updates each block in order with
/// its own kernel, conditioning on the current values of the other blocks.
pub fn sample_gibbs_hybrid<M: ProbModel>(
    model: &M,
    cfg: &McmcConfig,
    blocks: &[Block],
) -> Result<Vec<Chain>, McmcError> {
    cfg.validate()?;
    check_partition(model.dim(), blocks)?;
    let target = Unconstrained::new(model);
    let run = |k: usize| run_chain(&target, cfg, blocks, k);
    if cfg.parallel {
        (0..cfg.num_chains).into_par_iter().map(run).collect()
    } else {
        (0..cfg.num_chains).map(run).collect()
    }
}

fn check_partition(dim: usize, blocks: &[Block]) -> Result<(), McmcError> {
    let mut seen = vec![false; dim];
    for b in blocks {
        if b.indices.is_empty() {
            return Err(McmcError::InvalidConfig("empty block".into()));
        }
        for &i in &b.indices {
            if i >= dim || seen[i] {
                return Err(McmcError::InvalidConfig(format!(
                    "blocks must partition 0..{dim}; index {i} is out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        if let BlockKernel::Rwmh { scale, .. } = &b.kernel {
            if scale.len() != b.indices.len() {
                return Err(McmcError::DimensionMismatch {
                    expected: b.indices.len(),
                    got: scale.len(),
                });
            }
            if scale.iter().any(|&s| !(s > 0.0)) {
                return Err(McmcError::InvalidConfig("proposal scales must be positive".into()));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(McmcError::InvalidConfig(format!("index {i} not covered by any block")));
    }
    Ok(())
}

enum KernelState {
    Hmc { step: f64, adapter: DualAveraging, inv_mass: Vec<f64>, moments: Moments },
    Rwmh { scale: Vec<f64>, log_mult: f64, adapt: bool, target: f64 },
}

struct Outcome {
    accept_stat: f64,
    divergent: bool,
}

fn run_chain<M: ProbModel + ?Sized>(
    target: &Unconstrained<'_, M>,
    cfg: &McmcConfig,
    blocks: &[Block],
    chain: usize,
) -> Result<Chain, McmcError> {
    let mut rng = chain_rng(cfg.seed, chain);
    let (mut x, mut lp) = initialize(target, cfg, chain, &mut rng)?;

    let mut states: Vec<KernelState> = blocks
        .iter()
        .map(|b| match &b.kernel {
            BlockKernel::Hmc => {
                let inv_mass = vec![1.0; x.len()];
                let step = cfg
                    .init_step_size
                    .unwrap_or_else(|| reasonable_step(target, &x, &b.indices, &inv_mass, &mut rng));
                KernelState::Hmc {
                    step,
                    adapter: DualAveraging::new(step, cfg.target_accept),
                    inv_mass,
                    moments: Moments::new(x.len()),
                }
            }
            BlockKernel::Rwmh { scale, adapt } => KernelState::Rwmh {
                scale: scale.clone(),
                log_mult: 0.0,
                adapt: *adapt,
                target: if scale.len() == 1 { 0.44 } else { 0.234 },
            },
        })
        .collect();

    let windows = if cfg.adapt_mass { mass_windows(cfg.num_warmup) } else { Vec::new() };
    let total = cfg.num_warmup + cfg.num_samples;
    let mut draws = Vec::with_capacity(cfg.num_samples);
    let mut accept_sums = vec![0.0; blocks.len()];
    let mut divergences = 0;

    for iter in 0..total {
        let warmup = iter < cfg.num_warmup;
        if iter == cfg.num_warmup {
            for s in states.iter_mut() {
                if let KernelState::Hmc { step, adapter, .. } = s {
                    *step = adapter.final_step();
                }
            }
        }
        for (b, (block, state)) in blocks.iter().zip(states.iter_mut()).enumerate() {
            let outcome = match state {
                KernelState::Hmc { step, adapter, inv_mass, moments } => {
                    let out = hmc_transition(
                        target,
                        &mut x,
                        &mut lp,
                        &block.indices,
                        inv_mass,
                        *step,
                        cfg.leapfrog_steps,
                        &mut rng,
                    );
                    if warmup {
                        *step = adapter.update(out.accept_stat);
                        if let Some(&(_, end)) = windows.iter().find(|(a, b)| (*a..*b).contains(&iter)) {
                            moments.push(&x);
                            if iter + 1 == end {
                                let n = moments.count as f64;
                                for &i in &block.indices {
                                    inv_mass[i] = n / (n + 5.0) * moments.variance(i) + 1e-3 * 5.0 / (n + 5.0);
                                }
                                *moments = Moments::new(x.len());
                            }
                        }
                    }
                    out
                }
                KernelState::Rwmh { scale, log_mult, adapt, target: goal } => {
                    let out = rwmh_transition(
                        target,
                        &mut x,
                        &mut lp,
                        &block.indices,
                        scale,
                        log_mult.exp(),
                        &mut rng,
                    );
                    if warmup && *adapt {
                        let rate = ((iter + 1) as f64).powf(-0.6);
                        *log_mult = (*log_mult + rate * (out.accept_stat - *goal)).clamp(-20.0, 20.0);
                    }
                    out
                }
            };
            if !warmup {
                accept_sums[b] += outcome.accept_stat;
                if outcome.divergent {
                    divergences += 1;
                }
            }
        }
        if !warmup {
            draws.push(target.constrain(&x));
        }
    }

    let n = cfg.num_samples as f64;
    let block_accept_rates: Vec<f64> = accept_sums.iter().map(|s| s / n).collect();
    let accept_rate = block_accept_rates.iter().sum::<f64>() / block_accept_rates.len() as f64;
    let step_sizes = states
        .iter()
        .map(|s| match s {
            KernelState::Hmc { step, .. } => Some(*step),
            KernelState::Rwmh { .. } => None,
        })
        .collect();

    Ok(Chain {
        param_names: target.model().param_names(),
        draws,
        accept_rate,
        block_accept_rates,
        divergences,
        step_sizes,
    })
}

/// Running per-coordinate mean and variance (Welford).
struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            1.0
        } else {
            self.m2[i] / (self.count - 1) as f64
        }
    }
}

/// Warmup windows `[start, end)` over which draws are collected to estimate
/// the diagonal mass matrix: a fast initial buffer, doubling slow windows,
/// then a terminal buffer for step size alone.
pub(crate) fn mass_windows(num_warmup: usize) -> Vec<(usize, usize)> {
    if num_warmup < 20 {
        return Vec::new();
    }
    let (init, term, base) = if num_warmup < 150 {
        let init = num_warmup * 15 / 100;
        let term = num_warmup / 10;
        (init, term, num_warmup - init - term)
    } else {
        (75, 50, 25)
    };
    let end_slow = num_warmup - term;
    let mut out = Vec::new();
    let (mut start, mut size) = (init, base);
    while start < end_slow {
        let mut end = (start + size).min(end_slow);
        if end + 2 * size > end_slow {
            end = end_slow;
        }
        out.push((start, end));
        start = end;
        size *= 2;
    }
    out
}

fn initialize<M: ProbModel + ?Sized>(
    target: &Unconstrained<'_, M>,
    cfg: &McmcConfig,
    chain: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64), McmcError> {
    let dim = target.dim();
    let center = target.model().initial_point().map(|theta| {
        assert_eq!(theta.len(), dim, "initial_point has the wrong dimension");
        target.unconstrain(&theta)
    });
    let mut last = f64::NAN;
    for _ in 0..INIT_ATTEMPTS {
        let x: Vec<f64> = match &center {
            Some(c) => c
                .iter()
                .map(|&v| v + rng.random_range(-cfg.init_radius..=cfg.init_radius))
                .collect(),
            None => (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect(),
        };
        let lp = target.log_density(&x);
        if lp.is_finite() {
            return Ok((x, lp));
        }
        last = lp;
    }
    Err(McmcError::NonFiniteDensity { chain, value: last })
}

/// Doubles or halves a trial step until a single leapfrog step's acceptance
/// ratio crosses one half.
fn reasonable_step<M: ProbModel + ?Sized>(
    target: &Unconstrained<'_, M>,
    x: &[f64],
    block: &[usize],
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut grad0 = vec![0.0; x.len()];
    let lp0 = target.log_density_and_grad(x, &mut grad0);
    let mut p0 = vec![0.0; x.len()];
    for &i in block {
        p0[i] = rng.sample::<f64, _>(StandardNormal) / inv_mass[i].sqrt();
    }
    let h0 = -lp0 + kinetic(&p0, block, inv_mass);
    let log_ratio = |eps: f64| {
        let mut q = x.to_vec();
        let mut p = p0.clone();
        let mut g = grad0.clone();
        let lp = integrate(&mut q, &mut p, &mut g, block, inv_mass, eps, 1, &mut |q: &[f64], g: &mut [f64]| {
            target.log_density_and_grad(q, g)
        });
        let r = h0 - (-lp + kinetic(&p, block, inv_mass));
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            r
        }
    };
    let mut eps = 1.0;
    let up = log_ratio(eps) > 0.5f64.ln();
    for _ in 0..60 {
        let next = if up { eps * 2.0 } else { eps * 0.5 };
        let crossed = (log_ratio(next) > 0.5f64.ln()) != up;
        if crossed {
            return if up { eps } else { next };
        }
        eps = next;
    }
    eps
}

#[allow(clippy::too_many_arguments)]
fn hmc_transition<M: ProbModel + ?Sized>(
    target: &Unconstrained<'_, M>,
    x: &mut Vec<f64>,
    lp: &mut f64,
    block: &[usize],
    inv_mass: &[f64],
    step: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    let mut grad = vec![0.0; x.len()];
    let lp0 = target.log_density_and_grad(x, &mut grad);
    let mut p = vec![0.0; x.len()];
    for &i in block {
        p[i] = rng.sample::<f64, _>(StandardNormal) / inv_mass[i].sqrt();
    }
    let h0 = -lp0 + kinetic(&p, block, inv_mass);
    let eps = step * (1.0 + STEP_JITTER * rng.random_range(-1.0..=1.0));
    let mut q = x.clone();
    let lp1 = integrate(&mut q, &mut p, &mut grad, block, inv_mass, eps, steps, &mut |q: &[f64], g: &mut [f64]| {
        target.log_density_and_grad(q, g)
    });
    let delta_h = -lp1 + kinetic(&p, block, inv_mass) - h0;
    if !delta_h.is_finite() || delta_h > DIVERGENCE_THRESHOLD {
        return Outcome { accept_stat: 0.0, divergent: true };
    }
    let accept_stat = (-delta_h).exp().min(1.0);
    if rng.random::<f64>() < accept_stat {
        *x = q;
        *lp = lp1;
    } else {
        *lp = lp0;
    }
    Outcome { accept_stat, divergent: false }
}

fn rwmh_transition<M: ProbModel + ?Sized>(
    target: &Unconstrained<'_, M>,
    x: &mut Vec<f64>,
    lp: &mut f64,
    block: &[usize],
    scale: &[f64],
    mult: f64,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    // Another block may have moved since `lp` was computed.
    let current = target.log_density(x);
    let mut proposal = x.clone();
    for (k, &i) in block.iter().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        proposal[i] += scale[k] * mult * z;
    }
    let lp_new = target.log_density(&proposal);
    let accept_stat = if lp_new.is_finite() { (lp_new - current).exp().min(1.0) } else { 0.0 };
    if rng.random::<f64>() < accept_stat {
        *x = proposal;
        *lp = lp_new;
    } else {
        *lp = current;
    }
    Outcome { accept_stat, divergent: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::Transform;

    struct StdNormal(usize);

    impl ProbModel for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density(&self, theta: &[f64]) -> f64 {
            -0.5 * theta.iter().map(|v| v * v).sum::<f64>()
        }
        fn grad_log_density(&self, theta: &[f64], grad: &mut [f64]) -> bool {
            for (g, v) in grad.iter_mut().zip(theta) {
                *g = -v;
            }
            true
        }
    }

    struct Nowhere;

    impl ProbModel for Nowhere {
        fn dim(&self) -> usize {
            1
        }
        fn transform(&self, _: usize) -> Transform {
            Transform::POSITIVE
        }
        fn log_density(&self, _: &[f64]) -> f64 {
            f64::NEG_INFINITY
        }
    }

    fn small_cfg() -> McmcConfig {
        McmcConfig { num_warmup: 200, num_samples: 200, num_chains: 2, ..Default::default() }
    }

    #[test]
    fn warmup_windows() {
        assert!(mass_windows(10).is_empty());
        assert_eq!(mass_windows(100), vec![(15, 90)]);
        assert_eq!(
            mass_windows(1000),
            vec![(75, 100), (100, 150), (150, 250), (250, 450), (450, 950)]
        );
    }

    #[test]
    fn rejects_overlapping_blocks() {
        let blocks = [Block::hmc(vec![0, 1]), Block::hmc(vec![1])];
        let err = sample_gibbs_hybrid(&StdNormal(2), &small_cfg(), &blocks).unwrap_err();
        assert!(matches!(err, McmcError::InvalidConfig(_)));
    }

    #[test]
    fn rejects_uncovered_index() {
        let err = sample_gibbs_hybrid(&StdNormal(3), &small_cfg(), &[Block::hmc(vec![0, 1])])
            .unwrap_err();
        assert!(matches!(err, McmcError::InvalidConfig(_)));
    }

    #[test]
    fn non_finite_start_is_reported() {
        let err = sample_rwmh(&Nowhere, &small_cfg(), &[0.1]).unwrap_err();
        assert!(matches!(err, McmcError::NonFiniteDensity { .. }));
    }

    #[test]
    fn rejects_non_positive_scale() {
        let err = sample_rwmh(&StdNormal(2), &small_cfg(), &[0.1, 0.0]).unwrap_err();
        assert!(matches!(err, McmcError::InvalidConfig(_)));
    }

    #[test]
    fn chains_have_requested_shape() {
        let chains = sample_hmc(&StdNormal(3), &small_cfg()).unwrap();
        assert_eq!(chains.len(), 2);
        for c in &chains {
            assert_eq!(c.len(), 200);
            assert_eq!(c.dim(), 3);
            assert!((0.0..=1.0).contains(&c.accept_rate));
        }
    }

    #[test]
    fn parallel_and_serial_runs_agree() {
        let mut cfg = small_cfg();
        let a = sample_hmc(&StdNormal(2), &cfg).unwrap();
        cfg.parallel = false;
        let b = sample_hmc(&StdNormal(2), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
