use std::io::{self, Write};

/// Post-warmup draws of one chain, stored in constrained space.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub param_names: Vec<String>,
    /// `num_samples` rows of `dim` values.
    pub draws: Vec<Vec<f64>>,
    /// Mean acceptance statistic over post-warmup iterations, averaged over blocks.
    pub accept_rate: f64,
    pub block_accept_rates: Vec<f64>,
    pub divergences: usize,
    /// Final (frozen) HMC step size per block; `None` for random-walk blocks.
    pub step_sizes: Vec<Option<f64>>,
}

/// Posterior mean, standard deviation and central 94% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|row| row[index]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.param_names.join(","))?;
        for row in &self.draws {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Pools every chain's draws of one parameter.
pub fn pooled(chains: &[Chain], index: usize) -> Vec<f64> {
    chains.iter().flat_map(|c| c.column(index)).collect()
}

impl ParamSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Self {
            mean,
            sd: var.sqrt(),
            lower: quantile(&sorted, 0.03),
            upper: quantile(&sorted, 0.97),
        }
    }

    pub fn from_chains(chains: &[Chain], index: usize) -> Self {
        Self::from_values(&pooled(chains, index))
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
