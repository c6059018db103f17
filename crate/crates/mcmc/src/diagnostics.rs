//! Rank-normalized split-R̂ and bulk effective sample size
//! (Vehtari, Gelman, Simpson, Carpenter & Bürkner, 2021).

use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::Chain;
use crate::error::McmcError;

const MIN_SPLIT_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn diagnostics(chains: &[Chain]) -> Result<Diagnostics, McmcError> {
    if chains.len() < 2 {
        return Err(McmcError::InvalidConfig("diagnostics need at least 2 chains".into()));
    }
    let dim = chains[0].dim();
    let len = chains[0].len();
    if let Some(c) = chains.iter().find(|c| c.len() != len || c.dim() != dim) {
        return Err(McmcError::DimensionMismatch { expected: len, got: c.len() });
    }
    let mut rhat = Vec::with_capacity(dim);
    let mut ess = Vec::with_capacity(dim);
    for p in 0..dim {
        let columns: Vec<Vec<f64>> = chains.iter().map(|c| c.column(p)).collect();
        rhat.push(split_rhat(&columns)?);
        ess.push(ess_bulk(&columns)?);
    }
    Ok(Diagnostics { rhat, ess })
}

/// Rank-normalized split-R̂ of one parameter given per-chain draws.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, McmcError> {
    let z = rank_normalize(&split(chains)?);
    Ok(rhat_of(&z))
}

/// Bulk ESS: split chains, rank-normalize, then Geyer's initial monotone
/// sequence on the multi-chain autocorrelation.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64, McmcError> {
    let z = rank_normalize(&split(chains)?);
    Ok(ess_of(&z))
}

fn split(chains: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, McmcError> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    if half < MIN_SPLIT_LEN {
        return Err(McmcError::TooFewDraws { have: half, need: MIN_SPLIT_LEN });
    }
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        // odd lengths drop the middle draw
        out.push(c[..half].to_vec());
        out.push(c[n - half..n].to_vec());
    }
    Ok(out)
}

fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut indexed: Vec<(f64, usize)> = chains
        .iter()
        .flatten()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    indexed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && indexed[j + 1].0 == indexed[i].0 {
            j += 1;
        }
        // average rank (1-based) over ties
        let r = (i + j) as f64 / 2.0 + 1.0;
        for item in &indexed[i..=j] {
            ranks[item.1] = r;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let denom = total as f64 + 0.25;
    let mut out = Vec::with_capacity(chains.len());
    let mut offset = 0;
    for c in chains {
        out.push(
            (0..c.len())
                .map(|k| normal.inverse_cdf((ranks[offset + k] - 0.375) / denom))
                .collect(),
        );
        offset += c.len();
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

fn rhat_of(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let between = n * variance(&means);
    if within == 0.0 {
        // every draw identical within each chain
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

fn autocovariance(c: &[f64], m: f64, lag: usize) -> f64 {
    let n = c.len();
    (0..n - lag).map(|i| (c[i] - m) * (c[i + lag] - m)).sum::<f64>() / n as f64
}

fn ess_of(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let chain_var: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| autocovariance(c, mu, 0) * n as f64 / (n as f64 - 1.0))
        .collect();
    let mean_var = mean(&chain_var);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += variance(&means);
    }
    if var_plus == 0.0 {
        return (m * n) as f64;
    }
    let rho = |lag: usize| -> f64 {
        let acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (mean_var - acov) / var_plus
    };

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut t = 1;
    while t + 4 < n && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            rho_hat[t + 1] = even;
            rho_hat[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 && max_t + 1 < n {
        rho_hat[max_t + 1] = even;
    }
    // enforce a monotone sequence of pair sums
    let mut t = 1;
    while t + 2 <= max_t {
        let prev = rho_hat[t - 1] + rho_hat[t];
        if rho_hat[t + 1] + rho_hat[t + 2] > prev {
            rho_hat[t + 1] = prev / 2.0;
            rho_hat[t + 2] = prev / 2.0;
        }
        t += 2;
    }
    let draws = (m * n) as f64;
    let tail = if max_t + 1 < n { rho_hat[max_t + 1] } else { 0.0 };
    let tau = (-1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + tail).max(1.0 / draws.log10());
    draws / tau
}
