use crate::error::McmcError;

/// Run settings shared by every sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub num_warmup: usize,
    pub num_samples: usize,
    pub num_chains: usize,
    pub seed: u64,
    /// Dual-averaging target for the HMC acceptance statistic.
    pub target_accept: f64,
    pub leapfrog_steps: usize,
    /// Starting step size; `None` searches for a reasonable one per chain.
    pub init_step_size: Option<f64>,
    /// Half-width of the uniform jitter applied around the model's preferred
    /// starting point (unconstrained units). Without a preferred point chains
    /// start uniformly in `[-2, 2]`.
    pub init_radius: f64,
    /// Estimate a diagonal mass matrix for HMC blocks during warmup.
    pub adapt_mass: bool,
    pub parallel: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            num_warmup: 1000,
            num_samples: 1000,
            num_chains: 4,
            seed: 20200123,
            target_accept: 0.8,
            leapfrog_steps: 32,
            init_step_size: None,
            init_radius: 0.1,
            adapt_mass: true,
            parallel: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        if self.num_samples == 0 || self.num_chains == 0 {
            return Err(McmcError::InvalidConfig(
                "num_samples and num_chains must be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(McmcError::InvalidConfig(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.leapfrog_steps == 0 {
            return Err(McmcError::InvalidConfig("leapfrog_steps must be >= 1".into()));
        }
        if let Some(eps) = self.init_step_size {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(McmcError::InvalidConfig(format!("bad init_step_size {eps}")));
            }
        }
        Ok(())
    }
}
