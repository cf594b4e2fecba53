use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Scalar;

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![S::zero(); inputs * outputs],
            bias: vec![S::zero(); outputs],
        }
    }

    /// Orthogonal rows (or columns, whichever is shorter) scaled by `gain`; zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let (short, long) = (inputs.min(outputs), inputs.max(outputs));
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
        while basis.len() < short {
            let mut v: Vec<f64> = (0..long).map(|_| StandardNormal.sample(rng)).collect();
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        let mut layer = Self::zeros(inputs, outputs);
        for r in 0..outputs {
            for c in 0..inputs {
                let w = if outputs <= inputs { basis[r][c] } else { basis[c][r] };
                layer.weights[r * inputs + c] = S::of(gain * w);
            }
        }
        layer
    }

    fn forward_into(&self, x: &[S], out: &mut Vec<S>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, &b)| {
            row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi)
        }));
    }
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct MlpTrace<S> {
    activations: Vec<Vec<S>>,
}

impl<S: Scalar> MlpTrace<S> {
    pub fn output(&self) -> &[S] {
        self.activations.last().expect("trace holds the input at least")
    }
}

/// Multi-layer perceptron with tanh hidden activations and a linear output.
/// Also used as the gradient accumulator of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    pub layers: Vec<Dense<S>>,
}

impl<S: Scalar> Mlp<S> {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        let last = sizes.len() - 2;
        Self {
            layers: sizes
                .windows(2)
                .enumerate()
                .map(|(i, w)| Dense::orthogonal(w[0], w[1], if i == last { output_gain } else { hidden_gain }, rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().expect("nonempty").outputs
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        self.forward_trace(x).activations.pop().expect("output")
    }

    pub fn forward_trace(&self, x: &[S]) -> MlpTrace<S> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(activations.last().expect("input"), &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        MlpTrace { activations }
    }

    /// Accumulate into `grads` the parameter gradient for an output gradient `grad_out`.
    pub fn backward(&self, trace: &MlpTrace<S>, grad_out: &[S], grads: &mut Mlp<S>) {
        let mut delta = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let g = &mut grads.layers[i];
            let input = &trace.activations[i];
            for (r, &d) in delta.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                g.bias[r] += d;
                let row = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(w, &a)| *w += d * a);
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![S::zero(); layer.inputs];
            for (r, &d) in delta.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                prev.iter_mut().zip(row).for_each(|(p, &w)| *p += w * d);
            }
            // tanh'(x) = 1 - tanh(x)^2
            prev.iter_mut().zip(input).for_each(|(p, &a)| *p *= S::one() - a * a);
            delta = prev;
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }
}
