use mcmc::{
    diagnostics, leapfrog, sample_gibbs_hybrid, sample_hmc, sample_rwmh, Block, Chain,
    McmcConfig, ParamSummary, ProbModel, Transform,
};

struct Gaussian {
    dim: usize,
}

impl ProbModel for Gaussian {
    fn dim(&self) -> usize {
        self.dim
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

/// Zero-mean bivariate normal, unit variances, correlation `rho`.
struct Correlated {
    rho: f64,
}

impl ProbModel for Correlated {
    fn dim(&self) -> usize {
        2
    }
    fn log_density(&self, t: &[f64]) -> f64 {
        let r = self.rho;
        -(t[0] * t[0] - 2.0 * r * t[0] * t[1] + t[1] * t[1]) / (2.0 * (1.0 - r * r))
    }
    fn grad_log_density(&self, t: &[f64], g: &mut [f64]) -> bool {
        let r = self.rho;
        let d = 1.0 - r * r;
        g[0] = -(t[0] - r * t[1]) / d;
        g[1] = -(t[1] - r * t[0]) / d;
        true
    }
}

struct Bimodal;

impl ProbModel for Bimodal {
    fn dim(&self) -> usize {
        1
    }
    fn log_density(&self, t: &[f64]) -> f64 {
        let a = -0.5 * (t[0] - 5.0).powi(2);
        let b = -0.5 * (t[0] + 5.0).powi(2);
        a.max(b) + (-(a - b).abs()).exp().ln_1p()
    }
}

struct Beta43;

impl ProbModel for Beta43 {
    fn dim(&self) -> usize {
        1
    }
    fn transform(&self, _: usize) -> Transform {
        Transform::UNIT
    }
    fn log_density(&self, t: &[f64]) -> f64 {
        3.0 * t[0].ln() + 2.0 * (1.0 - t[0]).ln()
    }
}

fn pooled_column(chains: &[Chain], i: usize) -> Vec<f64> {
    chains.iter().flat_map(|c| c.column(i)).collect()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn rwmh_recovers_standard_normal_moments() {
    let cfg = McmcConfig { num_warmup: 1000, num_samples: 5000, seed: 11, ..Default::default() };
    let chains = sample_rwmh(&Gaussian { dim: 1 }, &cfg, &[2.4]).unwrap();
    let diag = diagnostics(&chains).unwrap();
    let draws = pooled_column(&chains, 0);
    assert_eq!(draws.len(), 20_000);
    let s = ParamSummary::from_values(&draws);
    let se = s.sd / diag.ess[0].sqrt();
    assert!(s.mean.abs() < 3.0 * se, "mean {} se {}", s.mean, se);
    assert!((variance(&draws) - 1.0).abs() < 0.1);
    assert!(diag.max_rhat() < 1.05);
}

#[test]
fn rwmh_with_tiny_steps_stays_in_one_mode() {
    // Known pathology: a 0.1-scale random walk cannot cross the gap between
    // modes at +-5, so each chain only ever reports the mode it started near.
    let cfg = McmcConfig { num_warmup: 500, num_samples: 2000, seed: 5, ..Default::default() };
    let chains = sample_rwmh(&Bimodal, &cfg, &[0.1]).unwrap();
    let mut signs = Vec::new();
    for c in &chains {
        let col = c.column(0);
        let positive = col.iter().filter(|v| **v > 0.0).count();
        assert!(positive == 0 || positive == col.len(), "chain crossed modes");
        signs.push(positive > 0);
    }
    let diag = diagnostics(&chains).unwrap();
    if signs.iter().any(|s| *s) && signs.iter().any(|s| !*s) {
        assert!(diag.rhat[0] > 1.1, "rhat should expose the split: {}", diag.rhat[0]);
    }
}

#[test]
fn rwmh_beta_through_logit_transform() {
    let cfg = McmcConfig { num_warmup: 1000, num_samples: 5000, seed: 3, ..Default::default() };
    let chains = sample_rwmh(&Beta43, &cfg, &[1.0]).unwrap();
    let mean = ParamSummary::from_chains(&chains, 0).mean;
    assert!((mean / (4.0 / 7.0) - 1.0).abs() < 0.02, "mean {mean}");
}

#[test]
fn hmc_five_dim_gaussian() {
    let cfg = McmcConfig { seed: 17, ..Default::default() };
    let chains = sample_hmc(&Gaussian { dim: 5 }, &cfg).unwrap();
    let diag = diagnostics(&chains).unwrap();
    for i in 0..5 {
        let s = ParamSummary::from_chains(&chains, i);
        let se = s.sd / diag.ess[i].sqrt();
        assert!(s.mean.abs() < 3.0 * se, "dim {i}: mean {} se {}", s.mean, se);
    }
    for c in &chains {
        assert!((0.6..=0.95).contains(&c.accept_rate), "accept {}", c.accept_rate);
        assert_eq!(c.divergences, 0);
    }
    assert!(diag.max_rhat() < 1.05);
}

#[test]
fn hmc_correlated_gaussian_covariance() {
    let cfg = McmcConfig { seed: 23, num_samples: 2000, ..Default::default() };
    let chains = sample_hmc(&Correlated { rho: 0.9 }, &cfg).unwrap();
    let a = pooled_column(&chains, 0);
    let b = pooled_column(&chains, 1);
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64;
    assert!((variance(&a) - 1.0).abs() < 0.15, "var a {}", variance(&a));
    assert!((variance(&b) - 1.0).abs() < 0.15, "var b {}", variance(&b));
    assert!((cov / 0.9 - 1.0).abs() < 0.15, "cov {cov}");
}

#[test]
fn dual_averaging_hits_target_acceptance() {
    let cfg = McmcConfig { seed: 29, target_accept: 0.8, ..Default::default() };
    let chains = sample_hmc(&Correlated { rho: 0.5 }, &cfg).unwrap();
    for c in &chains {
        assert!((0.7..=0.9).contains(&c.accept_rate), "accept {}", c.accept_rate);
    }
}

#[test]
fn single_hmc_block_is_plain_hmc() {
    let cfg = McmcConfig { seed: 31, num_samples: 500, num_warmup: 500, ..Default::default() };
    let model = Gaussian { dim: 3 };
    let a = sample_hmc(&model, &cfg).unwrap();
    let b = sample_gibbs_hybrid(&model, &cfg, &[Block::hmc(vec![0, 1, 2])]).unwrap();
    for i in 0..3 {
        let sa = ParamSummary::from_chains(&a, i);
        let sb = ParamSummary::from_chains(&b, i);
        assert!((sa.mean - sb.mean).abs() < 0.1);
        assert!((sa.sd - sb.sd).abs() < 0.1);
    }
}

#[test]
fn coordinatewise_rwmh_on_independent_gaussian() {
    let cfg = McmcConfig { seed: 37, num_samples: 4000, ..Default::default() };
    let blocks = [Block::rwmh(vec![0], vec![1.0], true), Block::rwmh(vec![1], vec![1.0], true)];
    let chains = sample_gibbs_hybrid(&Gaussian { dim: 2 }, &cfg, &blocks).unwrap();
    let diag = diagnostics(&chains).unwrap();
    for i in 0..2 {
        let s = ParamSummary::from_chains(&chains, i);
        assert!(s.mean.abs() < 3.0 * s.sd / diag.ess[i].sqrt());
        assert!((s.sd - 1.0).abs() < 0.1);
    }
    for c in &chains {
        for r in &c.block_accept_rates {
            assert!((0.3..0.6).contains(r), "adapted acceptance {r}");
        }
    }
}

#[test]
fn fixed_seed_is_bit_deterministic() {
    let cfg = McmcConfig { seed: 41, num_samples: 300, num_warmup: 300, ..Default::default() };
    let model = Correlated { rho: 0.3 };
    assert_eq!(sample_hmc(&model, &cfg).unwrap(), sample_hmc(&model, &cfg).unwrap());
    let other = McmcConfig { seed: 42, ..cfg.clone() };
    assert_ne!(sample_hmc(&model, &cfg).unwrap(), sample_hmc(&model, &other).unwrap());
}

#[test]
fn leapfrog_energy_error_is_second_order() {
    let grad = |q: &[f64], g: &mut [f64]| {
        g[0] = -q[0];
        -0.5 * q[0] * q[0]
    };
    let errors: Vec<f64> = [(0.2, 5), (0.1, 10), (0.05, 20)]
        .iter()
        .map(|&(eps, steps)| leapfrog(&[1.0], &[0.5], eps, steps, grad).unwrap().delta_h.abs())
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}
