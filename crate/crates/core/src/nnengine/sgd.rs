use super::{CnnParams, Gradients, NnError};

/// Momentum SGD state: one velocity buffer per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub velocity: Gradients,
}

impl Sgd {
    pub fn new(params: &CnnParams, learning_rate: f64, momentum: f64) -> Result<Self, NnError> {
        check_hyper(learning_rate, momentum)?;
        Ok(Self {
            learning_rate,
            momentum,
            velocity: CnnParams::zeros(params.config),
        })
    }

    pub fn step(&mut self, params: &mut CnnParams, grads: &Gradients) -> Result<(), NnError> {
        for (((name, p), (_, g)), (_, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.velocity.tensors_mut())
        {
            if p.shape() != g.shape() || p.shape() != v.shape() {
                return Err(NnError::ShapeMismatch {
                    what: name,
                    expected: p.shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
            sgd_step(
                p.data_mut(),
                g.data(),
                self.learning_rate,
                self.momentum,
                v.data_mut(),
            );
        }
        Ok(())
    }
}

fn check_hyper(lr: f64, momentum: f64) -> Result<(), NnError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(NnError::InvalidConfig(format!("learning rate {lr} must be > 0")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(NnError::InvalidConfig(format!(
            "momentum {momentum} must lie in [0, 1)"
        )));
    }
    Ok(())
}

/// `v ← momentum·v − lr·grad; param ← param + v`, element-wise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, momentum: f64, velocity: &mut [f64]) {
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}
