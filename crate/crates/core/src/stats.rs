//! Log-densities used by the priors and likelihoods, written out directly so
//! gradients can be derived alongside them.

use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Normal prior given by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.mean, self.sd)
    }

    pub fn d_ln_pdf(&self, x: f64) -> f64 {
        -(x - self.mean) / (self.sd * self.sd)
    }
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Half-normal on `x >= 0` with scale `sd`.
pub fn half_normal_ln_pdf(x: f64, sd: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    normal_ln_pdf(x, 0.0, sd) + std::f64::consts::LN_2
}

pub fn lognormal_ln_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    normal_ln_pdf(x.ln(), mu, sigma) - x.ln()
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

/// Normal density truncated to `x > lower`, renormalized.
pub fn truncated_normal_ln_pdf(x: f64, mean: f64, sd: f64, lower: f64) -> f64 {
    if x <= lower {
        return f64::NEG_INFINITY;
    }
    let tail = 0.5 * statrs::function::erf::erfc((lower - mean) / (sd * std::f64::consts::SQRT_2));
    normal_ln_pdf(x, mean, sd) - tail.ln()
}

/// Student-t with `df` degrees of freedom, location `loc`, scale `scale`.
pub fn student_t_ln_pdf(x: f64, df: f64, loc: f64, scale: f64) -> f64 {
    let z = (x - loc) / scale;
    ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - scale.ln()
        - 0.5 * (df + 1.0) * (z * z / df).ln_1p()
}

/// Negative binomial in mean/dispersion form: variance = mean + mean^2 / phi.
/// `k` may be non-integer (the gamma-function continuation).
pub fn neg_binomial_ln_pmf(k: f64, mean: f64, phi: f64) -> f64 {
    if k < 0.0 || mean < 0.0 {
        return f64::NEG_INFINITY;
    }
    if mean == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_norm = ln_gamma(k + phi) - ln_gamma(phi) - ln_gamma(k + 1.0);
    ln_norm + phi * (phi / (phi + mean)).ln() + k * (mean / (phi + mean)).ln()
}
