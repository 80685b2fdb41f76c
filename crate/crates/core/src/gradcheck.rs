//! Finite-difference validation of tape gradients.

use crate::array::RealArray;
use crate::error::{Error, Result};
use crate::tape::{NodeId, Tape};

/// Evaluates `build` on a fresh tape with `params` recorded as trainable
/// leaves, returning the scalar value and the gradient per parameter.
pub fn eval_with_gradients<F>(build: &F, params: &[RealArray]) -> Result<(f64, Vec<RealArray>)>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = build(&mut tape, &ids)?;
    let value = tape.value(out).item();
    let grads = tape.backward(out)?;
    let grads = ids
        .iter()
        .zip(params)
        .map(|(&id, p)| grads.get(id).cloned().unwrap_or_else(|| RealArray::zeros(p.shape())))
        .collect();
    Ok((value, grads))
}

fn eval_value<F>(build: &F, params: &[RealArray]) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = build(&mut tape, &ids)?;
    let value = tape.value(out);
    if !value.is_scalar() {
        return Err(Error::Contract("grad_check needs a scalar-valued function".into()));
    }
    let v = value.item();
    if !v.is_finite() {
        return Err(Error::Evaluation(format!("function value {v}")));
    }
    Ok(v)
}

/// Maximum component-wise relative discrepancy between backward-pass
/// gradients and central differences with step `h`. The denominator is
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(build: F, params: &[RealArray], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if !(h > 0.0) {
        return Err(Error::Config(format!("perturbation must be positive, got {h}")));
    }
    eval_value(&build, params)?;
    let (_, analytic) = eval_with_gradients(&build, params)?;
    let mut work: Vec<RealArray> = params.to_vec();
    let mut worst = 0.0f64;
    for p in 0..params.len() {
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            work[p].data_mut()[i] = orig + h;
            let up = eval_value(&build, &work)?;
            work[p].data_mut()[i] = orig - h;
            let down = eval_value(&build, &work)?;
            work[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[p].data()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_is_exact() {
        // f(w) = Σ (w_i − c_i)² · s
        let c = RealArray::matrix(1, 3, vec![0.3, -1.0, 2.0]).unwrap();
        let w = RealArray::matrix(1, 3, vec![1.5, 0.25, -0.75]).unwrap();
        let d = grad_check(
            |t, ids| {
                let ci = t.constant(c.clone());
                let diff = t.sub(ids[0], ci)?;
                let sq = t.square(diff);
                let s = t.sum(sq);
                Ok(t.scale(s, 0.7))
            },
            &[w],
            1e-6,
        )
        .unwrap();
        assert!(d < 1e-7, "{d}");
    }

    #[test]
    fn non_finite_value_is_an_evaluation_error() {
        let w = RealArray::scalar(-1.0);
        let r = grad_check(|t, ids| Ok(t.log(ids[0])), &[w], 1e-6);
        assert!(matches!(r, Err(Error::Evaluation(_))));
    }

    #[test]
    fn every_primitive_passes() {
        let x = RealArray::matrix(2, 3, vec![0.2, -0.4, 0.9, 1.1, -0.7, 0.3]).unwrap();
        let w = RealArray::matrix(3, 2, vec![0.5, -0.2, 0.1, 0.8, -0.6, 0.4]).unwrap();
        let b = RealArray::matrix(1, 2, vec![0.05, -0.1]).unwrap();
        let d = grad_check(
            |t, ids| {
                let a = t.affine(ids[0], ids[1], ids[2])?;
                let th = t.tanh(a);
                let sg = t.sigmoid(a);
                let lg = t.log(sg);
                let ls = t.log_sigmoid(th);
                let cl = t.clamp(a, -0.3, 0.3);
                let cat = t.concat(&[th, lg])?;
                let cat2 = t.concat(&[ls, cl])?;
                let diff = t.sub(cat, cat2)?;
                let sq = t.square(diff);
                let m = t.mean(sq);
                let s = t.sum(cat);
                let s = t.scale(s, 0.1);
                t.add(m, s)
            },
            &[x, w, b],
            1e-6,
        )
        .unwrap();
        assert!(d < 1e-5, "{d}");
    }
}
