//! Random nonlinear projection network.
//!
//! A fixed random graph over `p = d + hidden + enhancement` nodes. Input
//! samples are written onto the first `d` nodes and pushed through the graph
//! for a few rounds:
//!
//! ```text
//! I[t+1] = relu(h[t] + W·I[t])
//! h[t+1] = h[t] + W·I[t] - I[t+1]
//! M[t+1] = M[t] + I[t+1]
//! ```
//!
//! with `I[0] = [x, 0]`, `h[0] = 0`, `M[0] = I[0]`. The accumulated outputs
//! `M[T]` are the `p` expanded features. `h` keeps whatever the rectifier cut
//! off, so a node's overall input is conserved between rounds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{matmul, matvec};

pub const DEFAULT_ROUNDS: usize = 3;
pub const DEFAULT_DENSITY: f64 = 0.1;
pub const DEFAULT_SPECTRAL_TARGET: f64 = 0.9;

const POWER_STEPS: usize = 100;
const DUMP_MAGIC: &[u8; 8] = b"EASYFSW1";

/// Default network size for `d` inputs: `min(2d, d + 1000)`.
pub fn default_size(d: usize) -> usize {
    (2 * d).min(d + 1000)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub inputs: usize,
    pub hidden: usize,
    pub enhancement: usize,
    /// Probability that an entry touching an enhancement node is kept.
    pub density: f64,
    pub seed: u64,
    /// Rescale `W` to this spectral radius; `None` keeps raw N(0, 1) weights.
    pub spectral_target: Option<f64>,
    pub rounds: usize,
}

impl NetworkParams {
    /// Splits the `size - inputs` extra nodes evenly, hidden nodes taking the odd one.
    pub fn with_size(inputs: usize, size: usize) -> Result<Self> {
        if size <= inputs {
            return Err(Error::Dimension(format!(
                "network size {size} must exceed the input count {inputs}"
            )));
        }
        let extra = size - inputs;
        let hidden = extra.div_ceil(2);
        Ok(Self {
            inputs,
            hidden,
            enhancement: extra - hidden,
            density: DEFAULT_DENSITY,
            seed: 42,
            spectral_target: Some(DEFAULT_SPECTRAL_TARGET),
            rounds: DEFAULT_ROUNDS,
        })
    }

    pub fn size(&self) -> usize {
        self.inputs + self.hidden + self.enhancement
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnpNetwork {
    weights: Array2<f64>,
    inputs: usize,
    hidden: usize,
    enhancement: usize,
    rounds: usize,
    seed: u64,
    spectral_scale: f64,
}

impl RnpNetwork {
    /// Draws `W` entrywise in row-major order from N(0, 1). Entries in a row
    /// or column of an enhancement node are additionally kept only with
    /// probability `density`. Finally `W` is rescaled to the spectral target
    /// unless its estimated radius is zero.
    pub fn build(params: &NetworkParams) -> Result<Self> {
        let NetworkParams {
            inputs,
            hidden,
            enhancement,
            density,
            seed,
            spectral_target,
            rounds,
        } = *params;
        if inputs == 0 || hidden + enhancement == 0 {
            return Err(Error::Dimension(format!(
                "need at least one input and one non-input node, got {inputs} inputs, \
                 {hidden} hidden, {enhancement} enhancement"
            )));
        }
        if !(density > 0.0 && density <= 1.0) {
            return Err(Error::InvalidConfig(format!("density {density} not in (0, 1]")));
        }
        if let Some(t) = spectral_target {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("spectral target {t} must be positive")));
            }
        }
        if rounds == 0 {
            return Err(Error::InvalidConfig("propagation needs at least one round".into()));
        }

        let p = params.size();
        let first_enh = inputs + hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Array2::<f64>::zeros((p, p));
        for ((i, j), w) in weights.indexed_iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            let sparse = i >= first_enh || j >= first_enh;
            *w = if sparse && rng.random::<f64>() >= density { 0.0 } else { z };
        }

        let mut spectral_scale = 1.0;
        if let Some(target) = spectral_target {
            let radius = spectral_radius_estimate(weights.view(), seed);
            if radius > 0.0 {
                spectral_scale = target / radius;
                weights.mapv_inplace(|w| w * spectral_scale);
            }
        }
        Ok(Self {
            weights,
            inputs,
            hidden,
            enhancement,
            rounds,
            seed,
            spectral_scale,
        })
    }

    /// Wraps an explicit adjacency matrix, e.g. a reloaded dump or a test fixture.
    pub fn from_weights(
        weights: Array2<f64>,
        inputs: usize,
        hidden: usize,
        enhancement: usize,
        rounds: usize,
    ) -> Result<Self> {
        let p = inputs + hidden + enhancement;
        if weights.dim() != (p, p) {
            return Err(Error::Dimension(format!(
                "weights are {:?}, partition implies {p}x{p}",
                weights.dim()
            )));
        }
        if inputs == 0 || rounds == 0 {
            return Err(Error::Dimension("need at least one input and one round".into()));
        }
        Ok(Self {
            weights,
            inputs,
            hidden,
            enhancement,
            rounds,
            seed: 0,
            spectral_scale: 1.0,
        })
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn enhancement(&self) -> usize {
        self.enhancement
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spectral_scale(&self) -> f64 {
        self.spectral_scale
    }

    /// Starts propagation of the columns of `x` (`d × n`).
    pub fn propagation(&self, x: ArrayView2<'_, f64>) -> Result<Propagator<'_>> {
        if x.nrows() != self.inputs {
            return Err(Error::Dimension(format!(
                "network has {} inputs, data has {} features",
                self.inputs,
                x.nrows()
            )));
        }
        let n = x.ncols();
        let mut signal = Array2::<f64>::zeros((self.size(), n));
        signal.slice_mut(s![..self.inputs, ..]).assign(&x);
        Ok(Propagator {
            net: self,
            state: PropagationState {
                output: signal.clone(),
                internal: Array2::zeros((self.size(), n)),
                signal,
                round: 0,
            },
        })
    }

    /// Expanded features `M[T]`, `p × n`.
    pub fn propagate(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut prop = self.propagation(x)?;
        for _ in 0..self.rounds {
            prop.step()?;
        }
        Ok(prop.state.output)
    }

    /// `E = |(W + I)^T|` restricted to the input columns, `p × d`.
    pub fn influence_matrix(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.size()).collect();
        self.influence_rows(&all)
    }

    /// The given rows of [`influence_matrix`](Self::influence_matrix), bit-identical
    /// to the full computation.
    ///
    /// The power is accumulated left to right, `P ← P·(W + I)`, so row `i` of
    /// the result only needs row `i` of every partial product.
    pub fn influence_rows(&self, rows: &[usize]) -> Array2<f64> {
        let p = self.size();
        let mut step = self.weights.clone();
        for i in 0..p {
            step[[i, i]] += 1.0;
        }
        let mut power = step.select(Axis(0), rows);
        if self.rounds == 1 {
            power = power.slice(s![.., ..self.inputs]).to_owned();
        }
        for round in 2..=self.rounds {
            power = if round == self.rounds {
                matmul(power.view(), step.slice(s![.., ..self.inputs]))
            } else {
                matmul(power.view(), step.view())
            };
        }
        power.mapv_inplace(f64::abs);
        power
    }

    /// Writes the network as `EASYFSW1`, then little-endian u64 inputs, hidden,
    /// enhancement, rounds, seed, then f64 spectral scale and `W` row-major.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(DUMP_MAGIC)?;
        for v in [self.inputs, self.hidden, self.enhancement, self.rounds] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.spectral_scale.to_le_bytes())?;
        for w in self.weights.iter() {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            row: 0,
            column: 0,
            message: format!("network dump: {m}"),
        };
        let mut word = [0u8; 8];
        let mut next = |input: &mut dyn Read| -> Result<[u8; 8]> {
            input.read_exact(&mut word).map_err(|_| bad("truncated file"))?;
            Ok(word)
        };
        if &next(&mut input)? != DUMP_MAGIC {
            return Err(bad("bad magic header"));
        }
        let mut header = [0usize; 4];
        for h in header.iter_mut() {
            *h = usize::try_from(u64::from_le_bytes(next(&mut input)?)).map_err(|_| bad("size overflow"))?;
        }
        let seed = u64::from_le_bytes(next(&mut input)?);
        let spectral_scale = f64::from_le_bytes(next(&mut input)?);
        let [inputs, hidden, enhancement, rounds] = header;
        let p = inputs + hidden + enhancement;
        let mut weights = Array2::<f64>::zeros((p, p));
        for w in weights.iter_mut() {
            *w = f64::from_le_bytes(next(&mut input)?);
        }
        let mut net = Self::from_weights(weights, inputs, hidden, enhancement, rounds)?;
        net.seed = seed;
        net.spectral_scale = spectral_scale;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_from(BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    /// `I[t]`, one column per sample.
    pub signal: Array2<f64>,
    /// `h[t]`.
    pub internal: Array2<f64>,
    /// `M[t]`.
    pub output: Array2<f64>,
    pub round: usize,
}

/// Round-by-round propagation; see the module docs for the update.
pub struct Propagator<'a> {
    net: &'a RnpNetwork,
    state: PropagationState,
}

impl Propagator<'_> {
    pub fn state(&self) -> &PropagationState {
        &self.state
    }

    pub fn step(&mut self) -> Result<()> {
        let st = &mut self.state;
        let drive = matmul(self.net.weights.view(), st.signal.view());
        // a = h + W·I; the rectified part moves on, the rest stays in h
        Zip::from(&mut st.internal)
            .and(&mut st.signal)
            .and(&drive)
            .for_each(|h, sig, &wi| {
                let a = *h + wi;
                let next = relu(a);
                let rest = a - next;
                debug_assert!(!a.is_finite() || rest + next == a, "telescoping identity broken");
                *sig = next;
                *h = rest;
            });
        st.output += &st.signal;
        st.round += 1;
        if st.output.iter().any(|v| !v.is_finite()) || st.internal.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { round: st.round });
        }
        Ok(())
    }

    pub fn into_state(self) -> PropagationState {
        self.state
    }
}

#[inline]
pub(crate) fn relu(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

/// Spectral radius estimate from 100 power-iteration steps.
///
/// The start vector is drawn from a dedicated stream of the network seed.
/// Complex dominant pairs make the single-step norm oscillate, so the estimate
/// is the geometric mean growth over the second half of the iteration,
/// `(‖W¹⁰⁰x‖ / ‖W⁵⁰x‖)^(1/50)`.
pub fn spectral_radius_estimate(w: ArrayView2<'_, f64>, seed: u64) -> f64 {
    let p = w.nrows();
    if p == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut x: Array1<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm0 = x.dot(&x).sqrt();
    x /= norm0;
    let tail = POWER_STEPS / 2;
    let mut log_growth = 0.0;
    for step in 0..POWER_STEPS {
        let y = matvec(w, x.view());
        let norm = y.dot(&y).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return 0.0;
        }
        if step >= POWER_STEPS - tail {
            log_growth += norm.ln();
        }
        x = y / norm;
    }
    (log_growth / tail as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn params(d: usize, hidden: usize, enh: usize, density: f64, seed: u64) -> NetworkParams {
        NetworkParams {
            inputs: d,
            hidden,
            enhancement: enh,
            density,
            seed,
            spectral_target: Some(0.9),
            rounds: 3,
        }
    }

    #[test]
    fn default_partition_sums_to_size() {
        let p = NetworkParams::with_size(10, 17).unwrap();
        assert_eq!((p.hidden, p.enhancement), (4, 3));
        assert_eq!(p.size(), 17);
        assert_eq!(default_size(10), 20);
        assert_eq!(default_size(5000), 6000);
        assert!(NetworkParams::with_size(4, 4).is_err());
    }

    #[test]
    fn full_density_has_no_forced_zeros() {
        let net = RnpNetwork::build(&params(3, 2, 2, 1.0, 5)).unwrap();
        assert!(net.weights().iter().all(|&w| w != 0.0));
    }

    #[test]
    fn block_layout_masks_only_enhancement_rows_and_columns() {
        let mut zeros_dense = 0;
        let mut zeros_sparse = 0;
        for seed in 0..50 {
            let net = RnpNetwork::build(&params(2, 1, 1, 0.3, seed)).unwrap();
            let w = net.weights();
            assert_eq!(w.dim(), (4, 4));
            for ((i, j), &v) in w.indexed_iter() {
                if v == 0.0 {
                    if i == 3 || j == 3 {
                        zeros_sparse += 1;
                    } else {
                        zeros_dense += 1;
                    }
                }
            }
        }
        assert_eq!(zeros_dense, 0);
        // 7 sparse entries per network, 70% masked on average
        assert!(zeros_sparse > 150 && zeros_sparse < 340, "{zeros_sparse}");
    }

    #[test]
    fn build_is_deterministic() {
        let a = RnpNetwork::build(&params(4, 3, 3, 0.2, 77)).unwrap();
        let b = RnpNetwork::build(&params(4, 3, 3, 0.2, 77)).unwrap();
        assert_eq!(a, b);
        let c = RnpNetwork::build(&params(4, 3, 3, 0.2, 78)).unwrap();
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn scaled_network_hits_spectral_target() {
        let net = RnpNetwork::build(&params(6, 10, 10, 0.1, 3)).unwrap();
        let est = spectral_radius_estimate(net.weights(), net.seed());
        assert!((est - 0.9).abs() < 1e-9, "{est}");
        let raw = RnpNetwork::build(&NetworkParams {
            spectral_target: None,
            ..params(6, 10, 10, 0.1, 3)
        })
        .unwrap();
        assert_eq!(raw.spectral_scale(), 1.0);
    }

    #[test]
    fn estimator_tracks_exact_radius_on_diagonalizable_cases() {
        let w = array![[0.5, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 1.0]];
        assert!((spectral_radius_estimate(w.view(), 1) - 2.0).abs() < 1e-9);
        // rotation by 90 degrees scaled by 3: complex pair of modulus 3
        let w = array![[0.0, -3.0], [3.0, 0.0]];
        assert!((spectral_radius_estimate(w.view(), 1) - 3.0).abs() < 1e-9);
        let nil = array![[0.0, 1.0], [0.0, 0.0]];
        assert_eq!(spectral_radius_estimate(nil.view(), 1), 0.0);
    }

    #[test]
    fn zero_input_stays_zero() {
        let net = RnpNetwork::build(&params(3, 4, 4, 0.5, 9)).unwrap();
        let m = net.propagate(Array2::zeros((3, 5)).view()).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_network_returns_padded_input() {
        let net = RnpNetwork::from_weights(Array2::zeros((5, 5)), 2, 2, 1, 3).unwrap();
        let x = array![[1.0, -2.0], [3.0, 0.5]];
        let m = net.propagate(x.view()).unwrap();
        assert_eq!(m.slice(s![..2, ..]), x);
        assert!(m.slice(s![2.., ..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_state_is_padded_input() {
        let net = RnpNetwork::build(&params(3, 2, 1, 0.5, 2)).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let prop = net.propagation(x.view()).unwrap();
        let st = prop.state();
        assert_eq!(st.signal.slice(s![..3, ..]), x);
        assert!(st.signal.slice(s![3.., ..]).iter().all(|&v| v == 0.0));
        assert!(st.internal.iter().all(|&v| v == 0.0));
        assert_eq!(st.output, st.signal);
        assert_eq!(st.round, 0);
    }

    #[test]
    fn propagate_rejects_wrong_feature_count() {
        let net = RnpNetwork::build(&params(3, 2, 1, 0.5, 2)).unwrap();
        assert!(matches!(net.propagate(Array2::zeros((2, 4)).view()), Err(Error::Dimension(_))));
    }

    #[test]
    fn huge_raw_weights_overflow_is_reported() {
        let w = Array2::from_elem((3, 3), 1e200);
        let net = RnpNetwork::from_weights(w, 1, 2, 0, 3).unwrap();
        let err = net.propagate(array![[1e200, 1e200]].view()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn influence_of_zero_network_is_identity_slice() {
        let net = RnpNetwork::from_weights(Array2::zeros((4, 4)), 2, 1, 1, 3).unwrap();
        let e = net.influence_matrix();
        assert_eq!(e, array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn single_round_influence_is_abs_of_w_plus_i() {
        let w = array![[0.5, -1.0, 0.0], [2.0, -3.0, 1.0], [0.0, 0.25, -0.5]];
        let net = RnpNetwork::from_weights(w, 2, 1, 0, 1).unwrap();
        assert_eq!(net.influence_matrix(), array![[1.5, 1.0], [2.0, 2.0], [0.0, 0.25]]);
    }

    #[test]
    fn influence_rows_match_full_matrix_bitwise() {
        let net = RnpNetwork::build(&params(5, 6, 5, 0.3, 12)).unwrap();
        let full = net.influence_matrix();
        let rows = [0, 3, 7, 15];
        let part = net.influence_rows(&rows);
        for (r, &i) in rows.iter().enumerate() {
            assert_eq!(part.row(r), full.row(i));
        }
        assert!(full.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn dump_round_trips() {
        let net = RnpNetwork::build(&params(3, 3, 2, 0.4, 21)).unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"EASYFSW1");
        assert_eq!(buf.len(), 8 + 6 * 8 + 64 * 8);
        let back = RnpNetwork::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert!(RnpNetwork::read_from(&buf[..20]).is_err());
    }
}
