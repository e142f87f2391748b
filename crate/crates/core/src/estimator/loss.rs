use serde::{Deserialize, Serialize};

/// Huber loss and its derivative:
/// `x^2 / 2` for `|x| <= delta`, `delta * (|x| - delta / 2)` otherwise.
pub fn huber_loss(x: f64, delta: f64) -> (f64, f64) {
    if x.abs() <= delta {
        (0.5 * x * x, x)
    } else {
        (delta * (x.abs() - 0.5 * delta), delta * x.signum())
    }
}

/// `x^2 / 2`, so it shares the Huber loss's quadratic zone exactly.
pub fn l2_loss(x: f64) -> (f64, f64) {
    (0.5 * x * x, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Loss {
    Huber { delta: f64 },
    L2,
}

impl Default for Loss {
    fn default() -> Self {
        Loss::Huber { delta: 1.0 }
    }
}

impl Loss {
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Loss::Huber { delta } => huber_loss(x, delta),
            Loss::L2 => l2_loss(x),
        }
    }
}
