use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{OracleError, Predictor};
use crate::seq::{OneHot, Sequence, ALPHABET_SIZE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

/// Dense feed-forward network over flattened one-hot input with a
/// homoscedastic Gaussian (or, at zero variance, Dirac) noise model.
///
/// `weights[l]` is the `layer_dims[l+1] x layer_dims[l]` matrix of layer `l`
/// stored row-major, i.e. one row of input weights per output unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpOracle {
    length: usize,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    noise_variance: f64,
}

impl MlpOracle {
    pub fn new(
        length: usize,
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        noise_variance: f64,
    ) -> Result<Self, OracleError> {
        let oracle = Self { length, layer_dims, weights, biases, activation: Activation::Relu, noise_variance };
        oracle.validate()?;
        Ok(oracle)
    }

    fn validate(&self) -> Result<(), OracleError> {
        let dims = &self.layer_dims;
        let bad = |msg: String| Err(OracleError::InvalidArchitecture(msg));
        if self.length == 0 {
            return bad("length must be positive".into());
        }
        if dims.len() < 2 || dims[0] != self.length * ALPHABET_SIZE || *dims.last().unwrap() != 1 {
            return bad(format!("layer_dims {dims:?} must start at {} and end at 1", self.length * ALPHABET_SIZE));
        }
        if dims.contains(&0) {
            return bad("zero-width layer".into());
        }
        if self.weights.len() != dims.len() - 1 || self.biases.len() != dims.len() - 1 {
            return bad("one weight matrix and bias vector per layer".into());
        }
        for (l, pair) in dims.windows(2).enumerate() {
            if self.weights[l].len() != pair[0] * pair[1] {
                return bad(format!("layer {l} weights have {} entries", self.weights[l].len()));
            }
            if self.biases[l].len() != pair[1] {
                return bad(format!("layer {l} biases have {} entries", self.biases[l].len()));
            }
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(OracleError::NegativeVariance(self.noise_variance));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn with_noise_variance(mut self, variance: f64) -> Result<Self, OracleError> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(OracleError::NegativeVariance(variance));
        }
        self.noise_variance = variance;
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, OracleError> {
        let oracle: Self = serde_json::from_str(s).map_err(|e| OracleError::Format(e.to_string()))?;
        oracle.validate()?;
        Ok(oracle)
    }

    /// Dense forward pass on a flattened input of width `layer_dims[0]`.
    pub fn forward(&self, input: &[f64]) -> Result<f64, OracleError> {
        if input.len() != self.layer_dims[0] {
            return Err(OracleError::ShapeMismatch { expected: self.layer_dims[0], got: input.len() });
        }
        let mut act = input.to_vec();
        for l in 0..self.weights.len() {
            act = self.affine(l, &act);
            if l + 1 < self.weights.len() {
                relu(&mut act);
            }
        }
        Ok(act[0])
    }

    fn affine(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let width = input.len();
        self.weights[layer]
            .chunks_exact(width)
            .zip(&self.biases[layer])
            .map(|(row, &b)| row.iter().zip(input).fold(b, |acc, (w, x)| acc + w * x))
            .collect()
    }

    // First layer on a one-hot input reduces to summing one weight per
    // position; the accumulation order matches `affine`, so results agree
    // bit-for-bit with the dense path.
    fn first_layer_sparse(&self, seq: &Sequence) -> Vec<f64> {
        let width = self.layer_dims[0];
        self.weights[0]
            .chunks_exact(width)
            .zip(&self.biases[0])
            .map(|(row, &b)| {
                seq.symbols().iter().enumerate().fold(b, |acc, (pos, &s)| acc + row[pos * ALPHABET_SIZE + s as usize])
            })
            .collect()
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

impl Predictor for MlpOracle {
    fn length(&self) -> usize {
        self.length
    }

    fn mean(&self, seq: &Sequence) -> f64 {
        debug_assert_eq!(seq.len(), self.length);
        let mut act = self.first_layer_sparse(seq);
        for l in 1..self.weights.len() {
            relu(&mut act);
            act = self.affine(l, &act);
        }
        act[0]
    }

    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

/// Random dense oracle with Glorot-uniform weights and zero biases.
pub fn make_random_oracle(length: usize, hidden_dims: &[usize], seed: u64) -> Result<MlpOracle, OracleError> {
    if hidden_dims.is_empty() {
        return Err(OracleError::InvalidArchitecture("no hidden layers".into()));
    }
    let mut dims = Vec::with_capacity(hidden_dims.len() + 2);
    dims.push(length * ALPHABET_SIZE);
    dims.extend_from_slice(hidden_dims);
    dims.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = dims
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect()
        })
        .collect();
    let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
    MlpOracle::new(length, dims, weights, biases, 0.0)
}

/// Mean prediction for an explicit one-hot matrix.
pub fn mlp_mean(oracle: &MlpOracle, x: &OneHot) -> Result<f64, OracleError> {
    if x.len() != oracle.length {
        return Err(OracleError::ShapeMismatch {
            expected: oracle.length * ALPHABET_SIZE,
            got: x.len() * ALPHABET_SIZE,
        });
    }
    oracle.forward(&x.flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::encode_one_hot;

    #[test]
    fn architecture_and_support() {
        let o = make_random_oracle(8, &[50, 50], 3).unwrap();
        assert_eq!(o.layer_dims(), &[32, 50, 50, 1]);
        for (l, pair) in o.layer_dims().windows(2).enumerate() {
            let limit = (6.0 / (pair[0] + pair[1]) as f64).sqrt();
            assert!(o.weights()[l].iter().all(|w| w.abs() <= limit));
            assert!(o.biases()[l].iter().all(|&b| b == 0.0));
        }
        assert_eq!(o.noise_variance(), 0.0);
        assert!(make_random_oracle(8, &[], 3).is_err());
    }

    #[test]
    fn seeded_oracles_are_identical() {
        let a = make_random_oracle(5, &[50, 50], 99).unwrap().to_json();
        let b = make_random_oracle(5, &[50, 50], 99).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, make_random_oracle(5, &[50, 50], 100).unwrap().to_json());
    }

    #[test]
    fn zero_network_predicts_zero() {
        let o = MlpOracle::new(2, vec![8, 3, 1], vec![vec![0.0; 24], vec![0.0; 3]], vec![vec![0.0; 3], vec![0.0]], 0.0)
            .unwrap();
        for r in 0..16 {
            assert_eq!(o.mean(&Sequence::from_rank(r, 2)), 0.0);
        }
    }

    #[test]
    fn hand_computed_toy_net() {
        // length-1 net whose first two inputs carry (3, 1)
        let mut w0 = vec![0.0; 4];
        w0[0] = 1.0;
        w0[1] = -1.0;
        let o = MlpOracle::new(1, vec![4, 1, 1], vec![w0, vec![2.0]], vec![vec![0.0], vec![0.0]], 0.0).unwrap();
        assert_eq!(o.forward(&[3.0, 1.0, 0.0, 0.0]).unwrap(), 4.0);
        // rectifier clips the negative pre-activation
        assert_eq!(o.forward(&[1.0, 3.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn sparse_and_dense_paths_agree_bitwise() {
        let o = make_random_oracle(4, &[50, 50], 5).unwrap();
        for r in 0..256 {
            let s = Sequence::from_rank(r, 4);
            let dense = mlp_mean(&o, &encode_one_hot(&s)).unwrap();
            assert_eq!(dense.to_bits(), o.mean(&s).to_bits());
        }
    }

    #[test]
    fn argmax_matches_exhaustive_scan() {
        let o = make_random_oracle(4, &[50, 50], 8).unwrap();
        let dense: Vec<f64> =
            (0..256).map(|r| o.forward(&encode_one_hot(&Sequence::from_rank(r, 4)).flatten()).unwrap()).collect();
        let best = (0..256).max_by(|&a, &b| dense[a].total_cmp(&dense[b])).unwrap();
        let best_fast = (0..256u64)
            .max_by(|&a, &b| o.mean(&Sequence::from_rank(a, 4)).total_cmp(&o.mean(&Sequence::from_rank(b, 4))))
            .unwrap();
        assert_eq!(best as u64, best_fast);
    }

    #[test]
    fn shape_errors() {
        let o = make_random_oracle(4, &[5], 1).unwrap();
        let x = encode_one_hot(&"ACG".parse().unwrap());
        assert!(matches!(mlp_mean(&o, &x), Err(OracleError::ShapeMismatch { .. })));
        assert!(matches!(o.forward(&[0.0; 3]), Err(OracleError::ShapeMismatch { .. })));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let o = make_random_oracle(3, &[7, 4], 12).unwrap().with_noise_variance(0.36).unwrap();
        let text = o.to_json();
        assert!(text.contains("\"activation\": \"relu\""));
        let back = MlpOracle::from_json(&text).unwrap();
        assert_eq!(back, o);
        let broken = text.replace("\"length\": 3", "\"length\": 4");
        assert!(matches!(MlpOracle::from_json(&broken), Err(OracleError::InvalidArchitecture(_))));
        assert!(o.with_noise_variance(-1.0).is_err());
    }
}
