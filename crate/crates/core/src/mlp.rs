//! Dense feed-forward networks: tanh hidden layers, affine output layer.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::array::{gemm, RealArray};
use crate::error::{dim_err, Error, Result};
use crate::rng::stream_rng;
use crate::tape::{NodeId, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `[fan_in, fan_out]`
    pub weights: RealArray,
    /// `[1, fan_out]`
    pub bias: RealArray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<Dense>,
}

/// Tape handles for one network's parameters, in layer order.
#[derive(Debug, Clone)]
pub struct MlpNodes {
    layers: Vec<(NodeId, NodeId)>,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least input and output widths, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::Config(format!("layer widths must be positive, got {widths:?}")));
    }
    Ok(())
}

/// Network with weights drawn from `N(0, 2/(fan_in + fan_out))` and zero
/// biases, fully determined by `seed`.
pub fn xavier_init(widths: &[usize], seed: u64) -> Result<Mlp> {
    xavier_init_stream(widths, seed, 0)
}

/// [`xavier_init`] on an explicit random stream of `seed`.
pub fn xavier_init_stream(widths: &[usize], seed: u64, stream: u64) -> Result<Mlp> {
    check_widths(widths)?;
    let mut rng = stream_rng(seed, stream);
    let layers = widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let data = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
            Dense {
                weights: RealArray::matrix(fan_in, fan_out, data).expect("consistent"),
                bias: RealArray::zeros(&[1, fan_out]),
            }
        })
        .collect();
    Ok(Mlp {
        widths: widths.to_vec(),
        layers,
    })
}

impl Mlp {
    /// Builds a network from explicit layers, validating that consecutive
    /// shapes chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::Config("network has no layers".into()))?;
        let mut widths = vec![first.weights.rows()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.shape().len() != 2 {
                return Err(dim_err(format!("layer {i} weights"), "2-d", format!("{:?}", l.weights.shape())));
            }
            if l.weights.rows() != *widths.last().unwrap() {
                return Err(dim_err(format!("layer {i} fan-in"), widths.last().unwrap(), l.weights.rows()));
            }
            if l.bias.len() != l.weights.cols() {
                return Err(dim_err(format!("layer {i} bias"), l.weights.cols(), l.bias.len()));
            }
            widths.push(l.weights.cols());
        }
        Ok(Self { widths, layers })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Parameter arrays in layer order: `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&RealArray> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut RealArray> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, input: &RealArray) -> Result<()> {
        if input.cols() != self.input_width() {
            return Err(dim_err("layer 0 input width", self.input_width(), input.cols()));
        }
        Ok(())
    }

    /// Evaluates the network on a `[batch, in_width]` input.
    pub fn forward(&self, input: &RealArray) -> Result<RealArray> {
        self.check_input(input)?;
        let n = input.rows();
        let mut act = input.data().to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (k, m) = (layer.weights.rows(), layer.weights.cols());
            let mut out = vec![0.0; n * m];
            for row in out.chunks_exact_mut(m) {
                row.copy_from_slice(layer.bias.data());
            }
            gemm(&act, n, k, false, layer.weights.data(), k, m, false, 1.0, &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = crate::tape::tanh(*v));
            }
            act = out;
        }
        RealArray::matrix(n, self.output_width(), act)
    }

    /// Records this network's parameters on `tape`, as trainable leaves when
    /// `trainable`, otherwise as constants.
    pub fn record(&self, tape: &mut Tape, trainable: bool) -> MlpNodes {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                if trainable {
                    (tape.param(l.weights.clone()), tape.param(l.bias.clone()))
                } else {
                    (tape.constant(l.weights.clone()), tape.constant(l.bias.clone()))
                }
            })
            .collect();
        MlpNodes { layers }
    }
}

impl MlpNodes {
    /// Rebuilds handles from ids laid out as `w0, b0, w1, b1, ...`.
    pub fn from_ids(ids: &[NodeId]) -> Result<Self> {
        if ids.is_empty() || ids.len() % 2 != 0 {
            return Err(Error::Contract(format!("expected weight/bias id pairs, got {} ids", ids.len())));
        }
        Ok(Self {
            layers: ids.chunks_exact(2).map(|c| (c[0], c[1])).collect(),
        })
    }

    /// Forward pass on the tape, mirroring [`Mlp::forward`].
    pub fn forward(&self, tape: &mut Tape, input: NodeId) -> Result<NodeId> {
        let last = self.layers.len() - 1;
        let mut h = input;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let expected = tape.value(w).rows();
            let got = tape.value(h).cols();
            if expected != got {
                return Err(dim_err(format!("layer {i} input width"), expected, got));
            }
            h = tape.affine(h, w, b)?;
            if i != last {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }

    /// Parameter ids in the same order as [`Mlp::params`].
    pub fn ids(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(layers: Vec<(Vec<f64>, usize, usize, Vec<f64>)>) -> Mlp {
        Mlp::from_layers(
            layers
                .into_iter()
                .map(|(w, r, c, b)| Dense {
                    weights: RealArray::matrix(r, c, w).unwrap(),
                    bias: RealArray::matrix(1, c, b).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_single_layer() {
        let m = net(vec![(vec![1.0, 0.0, 0.0, 1.0], 2, 2, vec![0.0, 0.0])]);
        let out = m.forward(&RealArray::matrix(1, 2, vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = net(vec![
            (vec![0.0; 6], 3, 2, vec![0.0; 2]),
            (vec![0.0; 2], 2, 1, vec![0.0]),
        ]);
        let out = m
            .forward(&RealArray::matrix(2, 3, vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]).unwrap())
            .unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn tanh_composition() {
        let m = net(vec![(vec![1.0], 1, 1, vec![0.0]), (vec![1.0], 1, 1, vec![0.0])]);
        let out = m.forward(&RealArray::matrix(1, 1, vec![0.5]).unwrap()).unwrap();
        assert!((out.item() - 0.5f64.tanh()).abs() < 1e-14);
        assert!((out.item() - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn width_mismatch_names_layer() {
        let m = xavier_init(&[3, 4, 1], 0).unwrap();
        let err = m.forward(&RealArray::zeros(&[2, 2])).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let m = xavier_init(&[3, 5, 5, 2], 11).unwrap();
        let x = RealArray::matrix(2, 3, vec![0.1, -0.3, 0.7, 1.2, 0.0, -0.4]).unwrap();
        let mut tape = Tape::new();
        let nodes = m.record(&mut tape, true);
        let xi = tape.constant(x.clone());
        let out = nodes.forward(&mut tape, xi).unwrap();
        assert_eq!(tape.value(out), &m.forward(&x).unwrap());
    }

    #[test]
    fn xavier_rejects_bad_widths() {
        assert!(matches!(xavier_init(&[], 0), Err(Error::Config(_))));
        assert!(matches!(xavier_init(&[3], 0), Err(Error::Config(_))));
        assert!(matches!(xavier_init(&[3, 0, 1], 0), Err(Error::Config(_))));
    }

    #[test]
    fn xavier_is_deterministic_with_zero_bias() {
        let a = xavier_init(&[4, 7, 3], 42).unwrap();
        let b = xavier_init(&[4, 7, 3], 42).unwrap();
        assert_eq!(a, b);
        assert!(a.layers().iter().all(|l| l.bias.data().iter().all(|&v| v == 0.0)));
        assert_ne!(a, xavier_init(&[4, 7, 3], 43).unwrap());
    }

    #[test]
    fn xavier_variance_and_mean() {
        let m = xavier_init(&[100, 100], 5).unwrap();
        let w = m.layers()[0].weights.data();
        assert_eq!(w.len(), 10_000);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.01).abs() < 0.001, "variance {var}");
        // four standard errors of the mean
        assert!(mean.abs() < 4.0 * (0.01f64 / n).sqrt(), "mean {mean}");
    }
}
