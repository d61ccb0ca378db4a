//! Small fully connected networks with hand-written reverse mode.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Linear,
    Softmax,
    /// Final layer emits `[V, A_1..A_n]`; output is `V + A − mean(A)`.
    Dueling,
}

/// Affine layer; `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.weight.iter_rows().zip(&self.bias).map(|(row, &b)| dot(row, x) + b));
    }
}

/// Projection of activation `from` added to the pre-activation of layer `to`.
///
/// Activation 0 is the input; layer `l` maps activation `l − 1` to
/// pre-activation `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Skip<T> {
    pub from: usize,
    pub to: usize,
    pub projection: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    head: Head,
    layers: Vec<Dense<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skip: Option<Skip<T>>,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    /// `acts[0]` is the input; `acts[l]` the rectified output of layer `l`.
    acts: Vec<Vec<T>>,
    /// Pre-activations of every layer, `pre[l − 1]` for layer `l`.
    pre: Vec<Vec<T>>,
    pub output: Vec<T>,
}

impl<T> Cache<T> {
    /// Pre-activations of every layer, first hidden layer first.
    pub fn pre_activations(&self) -> &[Vec<T>] {
        &self.pre
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub layers: Vec<Dense<T>>,
    pub skip: Option<Matrix<T>>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, bound: f64) -> T {
    T::lit(rng.gen_range(-bound..=bound))
}

impl<T: Scalar> Mlp<T> {
    /// Randomly initialised network. `sizes` lists input, hidden and output
    /// widths; hidden layers use He-uniform weights, the output layer a
    /// narrower range so initial outputs stay near zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], head: Head, skip: Option<(usize, usize)>, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Model(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for l in 1..=n {
            let fan_in = sizes[l - 1];
            let outputs = layer_outputs(sizes, head, l);
            let bound = if l == n {
                0.1 * (1.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let mut d = Dense::zeros(fan_in, outputs);
            for w in d.weight.as_mut_slice() {
                *w = uniform(rng, bound);
            }
            layers.push(d);
        }
        let skip = match skip {
            None => None,
            Some((from, to)) => {
                check_skip(sizes, from, to)?;
                let rows = layer_outputs(sizes, head, to);
                let bound = 0.5 * (1.0 / sizes[from] as f64).sqrt();
                let mut projection = Matrix::zeros(rows, sizes[from]);
                for w in projection.as_mut_slice() {
                    *w = uniform(rng, bound);
                }
                Some(Skip { from, to, projection })
            }
        };
        Self::from_parts(sizes.to_vec(), head, layers, skip)
    }

    /// Assemble a network from explicit parameters, checking every shape.
    pub fn from_parts(sizes: Vec<usize>, head: Head, layers: Vec<Dense<T>>, skip: Option<Skip<T>>) -> Result<Self> {
        let net = Self {
            sizes,
            head,
            layers,
            skip,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.sizes;
        if sizes.len() < 2 || self.layers.len() != sizes.len() - 1 {
            return Err(Error::Model(format!(
                "{} layers for sizes {sizes:?}",
                self.layers.len()
            )));
        }
        for (i, d) in self.layers.iter().enumerate() {
            let l = i + 1;
            let expected = layer_outputs(sizes, self.head, l);
            if d.inputs() != sizes[l - 1] || d.outputs() != expected || d.bias.len() != expected {
                return Err(Error::Model(format!(
                    "layer {l} is {}x{} (bias {}), expected {expected}x{}",
                    d.outputs(),
                    d.inputs(),
                    d.bias.len(),
                    sizes[l - 1]
                )));
            }
            let finite = d.weight.as_slice().iter().chain(&d.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        if let Some(s) = &self.skip {
            check_skip(sizes, s.from, s.to)?;
            let rows = layer_outputs(sizes, self.head, s.to);
            if s.projection.rows() != rows || s.projection.cols() != sizes[s.from] {
                return Err(Error::Model("skip projection has wrong shape".into()));
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn skip(&self) -> Option<&Skip<T>> {
        self.skip.as_ref()
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|d| d.weight.as_slice().len() + d.bias.len())
            .sum::<usize>()
            + self.skip.as_ref().map_or(0, |s| s.projection.as_slice().len())
    }

    /// Mutable views of all parameters in a fixed order: per layer weight
    /// then bias, then the skip projection.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 1);
        for d in &mut self.layers {
            out.push(d.weight.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        if let Some(s) = &mut self.skip {
            out.push(s.projection.as_mut_slice());
        }
        out
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 1);
        for d in &self.layers {
            out.push(d.weight.as_slice());
            out.push(d.bias.as_slice());
        }
        if let Some(s) = &self.skip {
            out.push(s.projection.as_slice());
        }
        out
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(input)?.output)
    }

    pub fn forward_cached(&self, input: &[T]) -> Result<Cache<T>> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let n = self.layers.len();
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(n);
        let mut pre: Vec<Vec<T>> = Vec::with_capacity(n);
        acts.push(input.to_vec());
        for (i, d) in self.layers.iter().enumerate() {
            let l = i + 1;
            let mut z = Vec::with_capacity(d.outputs());
            d.apply(&acts[l - 1], &mut z);
            if let Some(s) = &self.skip {
                if s.to == l {
                    let src = &acts[s.from];
                    for (zi, row) in z.iter_mut().zip(s.projection.iter_rows()) {
                        *zi += dot(row, src);
                    }
                }
            }
            if l < n {
                acts.push(z.iter().map(|&v| v.max(T::zero())).collect());
            }
            pre.push(z);
        }
        let output = self.apply_head(pre.last().expect("at least one layer"));
        Ok(Cache { acts, pre, output })
    }

    fn apply_head(&self, z: &[T]) -> Vec<T> {
        match self.head {
            Head::Linear => z.to_vec(),
            Head::Softmax => softmax(z),
            Head::Dueling => {
                let v = z[0];
                let adv = &z[1..];
                let mean = adv.iter().copied().sum::<T>() / T::from_count(adv.len());
                adv.iter().map(|&a| v + a - mean).collect()
            }
        }
    }

    fn head_backward(&self, output: &[T], grad_out: &[T]) -> Vec<T> {
        match self.head {
            Head::Linear => grad_out.to_vec(),
            Head::Softmax => {
                let inner = dot(grad_out, output);
                output.iter().zip(grad_out).map(|(&p, &g)| p * (g - inner)).collect()
            }
            Head::Dueling => {
                let total: T = grad_out.iter().copied().sum();
                let mean = total / T::from_count(grad_out.len());
                std::iter::once(total).chain(grad_out.iter().map(|&g| g - mean)).collect()
            }
        }
    }

    pub fn zero_grads(&self) -> Grads<T> {
        Grads {
            layers: self.layers.iter().map(|d| Dense::zeros(d.inputs(), d.outputs())).collect(),
            skip: self
                .skip
                .as_ref()
                .map(|s| Matrix::zeros(s.projection.rows(), s.projection.cols())),
        }
    }

    pub fn backward(&self, cache: &Cache<T>, grad_out: &[T]) -> Result<Grads<T>> {
        let mut grads = self.zero_grads();
        self.backward_into(cache, grad_out, &mut grads)?;
        Ok(grads)
    }

    /// Accumulate the gradient of `⟨grad_out, output⟩` into `grads`.
    pub fn backward_into(&self, cache: &Cache<T>, grad_out: &[T], grads: &mut Grads<T>) -> Result<()> {
        if grad_out.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                what: "output gradient",
                expected: self.output_dim(),
                got: grad_out.len(),
            });
        }
        let n = self.layers.len();
        let mut g_z = self.head_backward(&cache.output, grad_out);
        let mut pending: Option<Vec<T>> = None;
        for l in (1..=n).rev() {
            let d = &self.layers[l - 1];
            let a_prev = &cache.acts[l - 1];
            let gd = &mut grads.layers[l - 1];
            for (o, &g) in g_z.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                gd.bias[o] += g;
                for (w, &a) in gd.weight.row_mut(o).iter_mut().zip(a_prev) {
                    *w += g * a;
                }
            }
            if let Some(s) = &self.skip {
                if s.to == l {
                    let src = &cache.acts[s.from];
                    let gp = grads.skip.as_mut().expect("skip gradient allocated");
                    let mut back = vec![T::zero(); src.len()];
                    for (o, &g) in g_z.iter().enumerate() {
                        if g == T::zero() {
                            continue;
                        }
                        for ((w, &a), (b, &p)) in gp
                            .row_mut(o)
                            .iter_mut()
                            .zip(src)
                            .zip(back.iter_mut().zip(s.projection.row(o)))
                        {
                            *w += g * a;
                            *b += g * p;
                        }
                    }
                    pending = Some(back);
                }
            }
            if l == 1 {
                break;
            }
            let mut g_a = vec![T::zero(); d.inputs()];
            for (o, &g) in g_z.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                for (acc, &w) in g_a.iter_mut().zip(d.weight.row(o)) {
                    *acc += g * w;
                }
            }
            if let Some(s) = &self.skip {
                if s.from == l - 1 {
                    if let Some(back) = pending.take() {
                        for (acc, b) in g_a.iter_mut().zip(back) {
                            *acc += b;
                        }
                    }
                }
            }
            let z_prev = &cache.pre[l - 2];
            g_z = g_a
                .into_iter()
                .zip(z_prev)
                .map(|(g, &z)| if z > T::zero() { g } else { T::zero() })
                .collect();
        }
        Ok(())
    }
}

impl<T: Scalar> Grads<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 1);
        for d in &self.layers {
            out.push(d.weight.as_slice());
            out.push(d.bias.as_slice());
        }
        if let Some(s) = &self.skip {
            out.push(s.as_slice());
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 1);
        for d in &mut self.layers {
            out.push(d.weight.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        if let Some(s) = &mut self.skip {
            out.push(s.as_mut_slice());
        }
        out
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.slices_mut() {
            for v in s {
                *v *= factor;
            }
        }
    }

    pub fn norm(&self) -> T {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|&v| v * v)
            .sum::<T>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|&v| v == T::zero()))
    }
}

fn layer_outputs(sizes: &[usize], head: Head, l: usize) -> usize {
    let last = sizes.len() - 1;
    if l == last && head == Head::Dueling {
        sizes[l] + 1
    } else {
        sizes[l]
    }
}

fn check_skip(sizes: &[usize], from: usize, to: usize) -> Result<()> {
    let n = sizes.len() - 1;
    if from >= to || to > n || from >= n {
        return Err(Error::Model(format!(
            "skip {from}->{to} invalid for {n} layers"
        )));
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the first maximum.
pub fn argmax_t<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_layer_is_identity() {
        let mut d = Dense::<f64>::zeros(3, 3);
        for i in 0..3 {
            d.weight.set(i, i, 1.0);
        }
        let net = Mlp::from_parts(vec![3, 3], Head::Linear, vec![d], None).unwrap();
        assert_eq!(net.forward(&[0.3, -1.2, 4.0]).unwrap(), vec![0.3, -1.2, 4.0]);
    }

    #[test]
    fn hand_computed_two_three_two() {
        let l1 = Dense {
            weight: Matrix::from_rows(&[vec![0.5, -1.0], vec![1.5, 0.25], vec![-0.75, 2.0]]).unwrap(),
            bias: vec![0.1, -0.2, 0.3],
        };
        let l2 = Dense {
            weight: Matrix::from_rows(&[vec![1.0, -0.5, 0.25], vec![0.3, 0.6, -0.9]]).unwrap(),
            bias: vec![0.05, -0.05],
        };
        let net = Mlp::from_parts(vec![2, 3, 2], Head::Linear, vec![l1, l2], None).unwrap();
        let x = [0.8f64, 0.4];
        // h = relu([0.1+0.4-0.4, -0.2+1.2+0.1, 0.3-0.6+0.8]) = [0.1, 1.1, 0.5]
        let h = [0.1, 1.1, 0.5];
        let y0 = 0.05 + 1.0 * h[0] - 0.5 * h[1] + 0.25 * h[2];
        let y1 = -0.05 + 0.3 * h[0] + 0.6 * h[1] - 0.9 * h[2];
        let out = net.forward(&x).unwrap();
        assert!((out[0] - y0).abs() < 1e-12);
        assert!((out[1] - y1).abs() < 1e-12);
    }

    #[test]
    fn softmax_head_sums_to_one() {
        let mut rng = seeded(3);
        let net = Mlp::<f64>::new(&[5, 8, 4], Head::Softmax, None, &mut rng).unwrap();
        let p = net.forward(&[0.1, 0.9, -0.3, 2.0, 0.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        let mut rng = seeded(4);
        let net = Mlp::<f64>::new(&[3, 4, 4, 2], Head::Dueling, Some((1, 3)), &mut rng).unwrap();
        let cache = net.forward_cached(&[0.2, 0.5, 0.9]).unwrap();
        assert!(net.backward(&cache, &[0.0, 0.0]).unwrap().is_zero());
    }

    #[test]
    fn wrong_input_length_is_shape_mismatch() {
        let mut rng = seeded(5);
        let net = Mlp::<f32>::new(&[3, 2], Head::Linear, None, &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn degenerate_skip_rejected() {
        let mut rng = seeded(6);
        assert!(Mlp::<f64>::new(&[3, 4, 2], Head::Linear, Some((2, 2)), &mut rng).is_err());
    }
}
