//! Central-finite-difference verification of analytic gradients.

use crate::error::{Result, TensorError};
use crate::params::{Ctx, ParamId, ParamStore};
use crate::tape::{Tape, Value};

/// Compare analytic gradients of `builder`'s scalar output against central
/// finite differences over every entry of `params`.
///
/// Returns the worst relative error
/// `|analytic - fd| / max(1, |analytic|, |fd|)`. The builder must be a
/// deterministic function of the store contents; any randomness inside it has
/// to be reseeded identically on every call.
pub fn gradient_check<F>(store: &mut ParamStore, params: &[ParamId], mut builder: F, eps: f64) -> Result<f64>
where
    F: FnMut(&mut Ctx) -> Result<Value>,
{
    if eps <= 0.0 {
        return Err(TensorError::Contract(format!("eps must be positive, got {}", eps)));
    }

    let eval = |store: &ParamStore, builder: &mut F| -> Result<f64> {
        let mut tape = Tape::new();
        let mut ctx = Ctx::new(&mut tape, store);
        let root = builder(&mut ctx)?;
        if tape.numel(root) != 1 {
            return Err(TensorError::Contract(format!(
                "gradient_check builder must return a scalar, got shape {:?}",
                tape.shape(root)
            )));
        }
        let loss = tape.data(root)[0];
        if !loss.is_finite() {
            return Err(TensorError::Numeric(format!("builder produced non-finite loss {}", loss)));
        }
        Ok(loss)
    };

    // Analytic pass.
    store.zero_grads();
    let mut tape = Tape::new();
    let root = {
        let mut ctx = Ctx::new(&mut tape, store);
        builder(&mut ctx)?
    };
    if tape.numel(root) != 1 {
        return Err(TensorError::Contract(format!(
            "gradient_check builder must return a scalar, got shape {:?}",
            tape.shape(root)
        )));
    }
    if !tape.data(root)[0].is_finite() {
        return Err(TensorError::Numeric("builder produced non-finite loss".to_string()));
    }
    tape.backward(root, store)?;
    let analytic: Vec<Vec<f64>> = params.iter().map(|&id| store.grad(id).to_vec()).collect();

    let mut worst: f64 = 0.0;
    for (pi, &id) in params.iter().enumerate() {
        for k in 0..store.data(id).len() {
            let orig = store.data(id)[k];
            store.data_mut(id)[k] = orig + eps;
            let up = eval(store, &mut builder)?;
            store.data_mut(id)[k] = orig - eps;
            let down = eval(store, &mut builder)?;
            store.data_mut(id)[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            let a = analytic[pi][k];
            let rel = (a - fd).abs() / 1.0_f64.max(a.abs()).max(fd.abs());
            worst = worst.max(rel);
        }
    }
    store.zero_grads();
    Ok(worst)
}
