use crate::transform::Transform;

/// A target density over a fixed-dimension parameter vector.
///
/// `log_density` is evaluated in constrained space and may be unnormalized.
/// It should return `f64::NEG_INFINITY` outside the support.
pub trait ProbModel: Sync {
    fn dim(&self) -> usize;

    fn transform(&self, _index: usize) -> Transform {
        Transform::Identity
    }

    fn log_density(&self, theta: &[f64]) -> f64;

    /// Writes the constrained-space gradient into `grad` and returns `true`,
    /// or returns `false` when no analytic gradient exists (the sampler then
    /// differentiates numerically in unconstrained space).
    fn grad_log_density(&self, _theta: &[f64], _grad: &mut [f64]) -> bool {
        false
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("theta[{i}]")).collect()
    }

    /// Preferred constrained starting point. Chains jitter around it.
    fn initial_point(&self) -> Option<Vec<f64>> {
        None
    }
}

/// View of a [`ProbModel`] on the unconstrained real vector space, with the
/// log-Jacobian of the inverse transform included.
pub struct Unconstrained<'a, M: ?Sized> {
    model: &'a M,
    transforms: Vec<Transform>,
}

impl<'a, M: ProbModel + ?Sized> Unconstrained<'a, M> {
    pub fn new(model: &'a M) -> Self {
        let transforms = (0..model.dim()).map(|i| model.transform(i)).collect();
        Self { model, transforms }
    }

    pub fn dim(&self) -> usize {
        self.transforms.len()
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn constrain(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.transforms)
            .map(|(&xi, t)| t.constrain(xi))
            .collect()
    }

    pub fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| t.unconstrain(v))
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let theta = self.constrain(x);
        let jac: f64 = x
            .iter()
            .zip(&self.transforms)
            .map(|(&xi, t)| t.log_jacobian(xi))
            .sum();
        let lp = self.model.log_density(&theta) + jac;
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Log density and its gradient in unconstrained space.
    pub fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let theta = self.constrain(x);
        if self.model.grad_log_density(&theta, grad) {
            let mut jac = 0.0;
            for (i, t) in self.transforms.iter().enumerate() {
                grad[i] = grad[i] * t.dconstrain(x[i]) + t.dlog_jacobian(x[i]);
                jac += t.log_jacobian(x[i]);
            }
            let lp = self.model.log_density(&theta) + jac;
            if lp.is_nan() {
                f64::NEG_INFINITY
            } else {
                lp
            }
        } else {
            finite_difference_gradient(|v| self.log_density(v), x, grad);
            self.log_density(x)
        }
    }
}

/// Central differences with step `1e-5 * max(1, |x_i|)`.
pub fn finite_difference_gradient<F>(f: F, x: &[f64], grad: &mut [f64])
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-5 * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
}
