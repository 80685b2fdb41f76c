//! Adam with bias correction.

use crate::array::RealArray;
use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<RealArray>,
    second_moment: Vec<RealArray>,
    t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed accumulators shaped like `params`, with beta1 = 0.9,
    /// beta2 = 0.999, epsilon = 1e-8.
    pub fn new(params: &[&RealArray], learning_rate: f64) -> Self {
        let zeros: Vec<RealArray> = params.iter().map(|p| RealArray::zeros(p.shape())).collect();
        Self {
            second_moment: zeros.clone(),
            first_moment: zeros,
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one Adam update to `params` in place.
    ///
    /// Gradients are validated before anything is modified, so a rejected
    /// step leaves both parameters and state untouched.
    pub fn step(&mut self, params: &mut [&mut RealArray], grads: &[RealArray]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(dim_err("adam parameter count", self.first_moment.len(), grads.len()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first_moment[i].shape() {
                return Err(dim_err(
                    format!("adam parameter {i}"),
                    format!("{:?}", p.shape()),
                    format!("{:?}", g.shape()),
                ));
            }
            if !g.all_finite() {
                return Err(Error::Divergence {
                    iteration: self.t as usize + 1,
                    reason: format!("non-finite gradient for parameter {i}"),
                    partial: Default::default(),
                });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(v: f64) -> (RealArray, AdamState) {
        let p = RealArray::filled(&[2, 3], v);
        let s = AdamState::new(&[&p], 1e-4);
        (p, s)
    }

    #[test]
    fn zero_gradient_is_identity() {
        let (mut p, mut s) = setup(0.7);
        let before = p.clone();
        s.step(&mut [&mut p], &[RealArray::zeros(&[2, 3])]).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut p, mut s) = setup(0.0);
        s.step(&mut [&mut p], &[RealArray::filled(&[2, 3], 1.0)]).unwrap();
        for &v in p.data() {
            // lr·1/(1 + 1e-8)
            assert!((v + 1e-4).abs() < 1e-11, "{v}");
        }
    }

    #[test]
    fn constant_gradient_steps_are_bounded() {
        let (mut p, mut s) = setup(0.0);
        let g = RealArray::filled(&[2, 3], 3.0);
        let mut prev = p.clone();
        for _ in 0..2 {
            s.step(&mut [&mut p], &[g.clone()]).unwrap();
            for (a, b) in p.data().iter().zip(prev.data()) {
                assert!((a - b).abs() <= 1e-4 * (1.0 + 1e-8));
            }
            prev = p.clone();
        }
    }

    #[test]
    fn non_finite_gradient_reports_iteration() {
        let (mut p, mut s) = setup(0.0);
        s.step(&mut [&mut p], &[RealArray::zeros(&[2, 3])]).unwrap();
        let mut g = RealArray::zeros(&[2, 3]);
        g.data_mut()[4] = f64::NAN;
        let before = p.clone();
        match s.step(&mut [&mut p], &[g]) {
            Err(Error::Divergence { iteration, .. }) => assert_eq!(iteration, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (mut p, mut s) = setup(0.0);
        assert!(s.step(&mut [&mut p], &[RealArray::zeros(&[3, 2])]).is_err());
    }
}
