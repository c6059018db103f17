/// Bijection between a constrained coordinate and the real line.
///
/// `constrain` maps unconstrained `x` to the model's parameter; the log
/// absolute derivative of that map is the Jacobian correction added to the
/// target density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `theta = lower + exp(x)`; `LowerBound(0.0)` is the usual log transform.
    LowerBound(f64),
    /// `theta = lower + (upper - lower) * sigmoid(x)`.
    Interval(f64, f64),
}

impl Transform {
    pub const POSITIVE: Transform = Transform::LowerBound(0.0);
    pub const UNIT: Transform = Transform::Interval(0.0, 1.0);

    pub fn constrain(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::LowerBound(lo) => lo + x.exp(),
            Transform::Interval(lo, hi) => lo + (hi - lo) * sigmoid(x),
        }
    }

    pub fn unconstrain(&self, theta: f64) -> f64 {
        match *self {
            Transform::Identity => theta,
            Transform::LowerBound(lo) => (theta - lo).ln(),
            Transform::Interval(lo, hi) => {
                let u = (theta - lo) / (hi - lo);
                (u / (1.0 - u)).ln()
            }
        }
    }

    /// `ln |d theta / d x|`.
    pub fn log_jacobian(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => 0.0,
            Transform::LowerBound(_) => x,
            Transform::Interval(lo, hi) => {
                // ln s + ln(1 - s) = -softplus(-x) - softplus(x)
                (hi - lo).ln() - softplus(-x) - softplus(x)
            }
        }
    }

    /// `d theta / d x`.
    pub fn dconstrain(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => 1.0,
            Transform::LowerBound(_) => x.exp(),
            Transform::Interval(lo, hi) => {
                let s = sigmoid(x);
                (hi - lo) * s * (1.0 - s)
            }
        }
    }

    /// `d log_jacobian / d x`.
    pub fn dlog_jacobian(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => 0.0,
            Transform::LowerBound(_) => 1.0,
            Transform::Interval(..) => 1.0 - 2.0 * sigmoid(x),
        }
    }

    pub fn in_support(&self, theta: f64) -> bool {
        match *self {
            Transform::Identity => theta.is_finite(),
            Transform::LowerBound(lo) => theta > lo && theta.is_finite(),
            Transform::Interval(lo, hi) => theta > lo && theta < hi,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}
