//! The broad-learning model: random feature and enhancement mappings,
//! pseudoinverse training, incremental updates and prediction.
//!
//! Inputs are mapped through `n` groups of feature nodes (affine map of the
//! raw input) and `m` groups of enhancement nodes (affine map of all feature
//! nodes, scaled by a shrink factor), and the concatenated activations feed a
//! linear output layer solved by ridge pseudoinverse. All randomness is
//! drawn from one seeded stream, so a given architecture is reproducible
//! bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::incremental::{
    add_inputs, IncrementBatch, PinvState, UpdateError, UpdateOptions, UpdateStats,
};
use crate::linalg::{left_pinv, svd_pinv, LinalgError, RidgeParam};
use crate::matrix::{gemm_into, Matrix};

const MODEL_MAGIC: &[u8; 4] = b"BLNC";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(String),
}

/// Elementwise nonlinearity applied to a node group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, ModelError> {
        match c {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Sigmoid),
            other => Err(ModelError::Format(format!("unknown activation code {other}"))),
        }
    }
}

/// Network shape and training hyperparameters.
///
/// Defaults follow common broad-learning practice: identity feature nodes,
/// tanh enhancement nodes with shrink scale 0.8, and a ridge of 1e-8.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Architecture {
    pub feature_groups: usize,
    pub feature_nodes: usize,
    pub enhancement_groups: usize,
    pub enhancement_nodes: usize,
    pub shrink_scale: f64,
    pub feature_activation: Activation,
    pub enhancement_activation: Activation,
    pub lambda: RidgeParam,
    pub seed: u64,
}

impl Architecture {
    pub fn new(
        feature_groups: usize,
        feature_nodes: usize,
        enhancement_groups: usize,
        enhancement_nodes: usize,
        seed: u64,
    ) -> Self {
        let arch = Architecture {
            feature_groups,
            feature_nodes,
            enhancement_groups,
            enhancement_nodes,
            shrink_scale: 0.8,
            feature_activation: Activation::Identity,
            enhancement_activation: Activation::Tanh,
            lambda: RidgeParam::new(1e-8),
            seed,
        };
        assert!(arch.total_nodes() > 0, "architecture needs at least one node");
        arch
    }

    pub fn with_lambda(mut self, lambda: RidgeParam) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_shrink_scale(mut self, scale: f64) -> Self {
        self.shrink_scale = scale;
        self
    }

    pub fn with_activations(mut self, feature: Activation, enhancement: Activation) -> Self {
        self.feature_activation = feature;
        self.enhancement_activation = enhancement;
        self
    }

    /// Total node count `k` across all groups.
    pub fn total_nodes(&self) -> usize {
        self.feature_groups * self.feature_nodes
            + self.enhancement_groups * self.enhancement_nodes
    }

    /// `(total feature nodes, total enhancement nodes)`, the conventional
    /// shorthand for a broad-learning structure.
    pub fn structure(&self) -> (usize, usize) {
        (
            self.feature_groups * self.feature_nodes,
            self.enhancement_groups * self.enhancement_nodes,
        )
    }
}

/// Class scores and the argmax decision per row.
#[derive(Debug)]
pub struct Prediction {
    pub scores: Matrix,
    pub classes: Vec<usize>,
}

/// Fraction of predictions matching the integer labels.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(predicted.len(), labels.len(), "prediction/label count mismatch");
    if predicted.is_empty() {
        return 0.0;
    }
    let correct = predicted
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / predicted.len() as f64
}

/// A trained broad-learning classifier.
#[derive(Debug, Clone)]
pub struct BlsModel {
    arch: Architecture,
    input_dim: usize,
    classes: usize,
    feature_weights: Vec<Matrix>,
    enhancement_weights: Vec<Matrix>,
    state: PinvState,
    output_weights: Matrix,
}

impl BlsModel {
    /// Trains on the full batch: builds activations, solves the ridge left
    /// inverse and the output weights.
    ///
    /// When there are fewer samples than nodes the left inverse does not
    /// exist; a warning is logged and the SVD pseudoinverse is used instead.
    pub fn train_initial(arch: Architecture, x: &Matrix, y: &Matrix) -> Result<Self, ModelError> {
        if y.rows() != x.rows() {
            return Err(ModelError::Dimension(format!(
                "{} label rows for {} input rows",
                y.rows(),
                x.rows()
            )));
        }
        let input_dim = x.cols();
        let (feature_weights, enhancement_weights) = random_weights(&arch, input_dim);
        let a = build_activations(&arch, &feature_weights, &enhancement_weights, x)?;
        let k = arch.total_nodes();
        let apinv = if a.rows() >= k {
            left_pinv(&a, arch.lambda)?
        } else {
            log::warn!(
                "{} samples < {} nodes: falling back to the SVD pseudoinverse",
                a.rows(),
                k
            );
            svd_pinv(&a, None)?
        };
        let output_weights = apinv.matmul(y);
        let state = PinvState::new(a, apinv, arch.lambda)?;
        Ok(BlsModel {
            arch,
            input_dim,
            classes: y.cols(),
            feature_weights,
            enhancement_weights,
            state,
            output_weights,
        })
    }

    /// Folds a batch of new labeled inputs into the model without
    /// retraining. Returns the updated model and the update record
    /// (strategy, residual norm, per-phase timings).
    pub fn increment_inputs(
        self,
        xa: &Matrix,
        ya: &Matrix,
        opts: &UpdateOptions,
    ) -> Result<(Self, UpdateStats), ModelError> {
        if ya.cols() != self.classes {
            return Err(ModelError::Dimension(format!(
                "{} label columns, model has {} classes",
                ya.cols(),
                self.classes
            )));
        }
        let t = Instant::now();
        let ax = self.activations(xa)?;
        let activation_seconds = t.elapsed().as_secs_f64();

        let batch = IncrementBatch::new(ax, ya.clone())?;
        let outcome = add_inputs(self.state, &self.output_weights, &batch, opts)?;
        let mut stats = outcome.stats;
        stats.timings.activations = activation_seconds;

        Ok((
            BlsModel {
                state: outcome.state,
                output_weights: outcome.weights,
                ..self
            },
            stats,
        ))
    }

    /// Activation matrix for a batch of raw inputs (expected in `[0, 1]`).
    pub fn activations(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        build_activations(&self.arch, &self.feature_weights, &self.enhancement_weights, x)
    }

    /// Class scores and argmax decisions; ties break to the lowest index.
    pub fn predict(&self, x: &Matrix) -> Result<Prediction, ModelError> {
        let a = self.activations(x)?;
        let scores = a.matmul(&self.output_weights);
        let classes = (0..scores.rows()).map(|i| argmax(scores.row(i))).collect();
        Ok(Prediction { scores, classes })
    }

    /// Accuracy (fraction in `[0, 1]`) against a labeled dataset.
    pub fn evaluate(&self, data: &Dataset) -> Result<f64, ModelError> {
        let pred = self.predict(&data.x)?;
        Ok(accuracy(&pred.classes, &data.labels))
    }

    /// Releases the stored activation matrix; later increments must run with
    /// `assume_full_rank` since the residual check needs it.
    pub fn drop_input_matrix(&mut self) {
        self.state.drop_matrix();
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn state(&self) -> &PinvState {
        &self.state
    }

    pub fn output_weights(&self) -> &Matrix {
        &self.output_weights
    }

    /// Serializes the model to a version-tagged binary file: architecture,
    /// random map weights, the pseudoinverse state and the output weights.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        w.write_u64::<LittleEndian>(self.arch.feature_groups as u64)?;
        w.write_u64::<LittleEndian>(self.arch.feature_nodes as u64)?;
        w.write_u64::<LittleEndian>(self.arch.enhancement_groups as u64)?;
        w.write_u64::<LittleEndian>(self.arch.enhancement_nodes as u64)?;
        w.write_f64::<LittleEndian>(self.arch.shrink_scale)?;
        w.write_u8(self.arch.feature_activation.code())?;
        w.write_u8(self.arch.enhancement_activation.code())?;
        w.write_f64::<LittleEndian>(self.arch.lambda.value())?;
        w.write_u64::<LittleEndian>(self.arch.seed)?;
        w.write_u64::<LittleEndian>(self.input_dim as u64)?;
        w.write_u64::<LittleEndian>(self.classes as u64)?;
        for m in &self.feature_weights {
            write_matrix(&mut w, m)?;
        }
        for m in &self.enhancement_weights {
            write_matrix(&mut w, m)?;
        }
        write_matrix(&mut w, &self.output_weights)?;
        match self.state.matrix() {
            Some(a) => {
                w.write_u8(1)?;
                write_matrix(&mut w, a)?;
            }
            None => w.write_u8(0)?,
        }
        write_matrix(&mut w, self.state.pinv())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(ModelError::Format(format!(
                "bad magic {magic:02x?}, not a model file"
            )));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != MODEL_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported model version {version}"
            )));
        }
        let feature_groups = r.read_u64::<LittleEndian>()? as usize;
        let feature_nodes = r.read_u64::<LittleEndian>()? as usize;
        let enhancement_groups = r.read_u64::<LittleEndian>()? as usize;
        let enhancement_nodes = r.read_u64::<LittleEndian>()? as usize;
        let shrink_scale = r.read_f64::<LittleEndian>()?;
        let feature_activation = Activation::from_code(r.read_u8()?)?;
        let enhancement_activation = Activation::from_code(r.read_u8()?)?;
        let lambda = RidgeParam::new(r.read_f64::<LittleEndian>()?);
        let seed = r.read_u64::<LittleEndian>()?;
        let arch = Architecture {
            feature_groups,
            feature_nodes,
            enhancement_groups,
            enhancement_nodes,
            shrink_scale,
            feature_activation,
            enhancement_activation,
            lambda,
            seed,
        };
        let input_dim = r.read_u64::<LittleEndian>()? as usize;
        let classes = r.read_u64::<LittleEndian>()? as usize;
        let feature_weights = (0..feature_groups)
            .map(|_| read_matrix(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        let enhancement_weights = (0..enhancement_groups)
            .map(|_| read_matrix(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        let output_weights = read_matrix(&mut r)?;
        let has_a = r.read_u8()?;
        let a = if has_a == 1 {
            Some(read_matrix(&mut r)?)
        } else {
            None
        };
        let apinv = read_matrix(&mut r)?;
        let state = match a {
            Some(a) => PinvState::new(a, apinv, lambda)?,
            None => {
                let mut s = PinvState::new(
                    Matrix::zeros(apinv.cols(), apinv.rows()),
                    apinv,
                    lambda,
                )?;
                s.drop_matrix();
                s
            }
        };
        Ok(BlsModel {
            arch,
            input_dim,
            classes,
            feature_weights,
            enhancement_weights,
            state,
            output_weights,
        })
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Draws all random map weights from one seeded stream: feature groups in
/// order, then enhancement groups, each filled row-major with uniform(-1, 1).
fn random_weights(arch: &Architecture, input_dim: usize) -> (Vec<Matrix>, Vec<Matrix>) {
    let mut rng = ChaCha20Rng::seed_from_u64(arch.seed);
    let mut uniform = |rows: usize, cols: usize| {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    };
    let feature = (0..arch.feature_groups)
        .map(|_| uniform(input_dim + 1, arch.feature_nodes))
        .collect();
    let z_width = arch.feature_groups * arch.feature_nodes;
    let enhancement = (0..arch.enhancement_groups)
        .map(|_| uniform(z_width + 1, arch.enhancement_nodes))
        .collect();
    (feature, enhancement)
}

/// `scale · ([x 1] · w)` where the bias sits in the last row of `w`.
fn affine(x: &Matrix, w: &Matrix, scale: f64) -> Matrix {
    let d = x.cols();
    debug_assert_eq!(w.rows(), d + 1);
    let nodes = w.cols();
    let mut out = Matrix::zeros(x.rows(), nodes);
    gemm_into(scale, x.view(), w.sub_view(0, d, 0, nodes), 0.0, &mut out);
    let bias = w.row(d).to_vec();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for j in 0..nodes {
            row[j] += scale * bias[j];
        }
    }
    out
}

fn build_activations(
    arch: &Architecture,
    feature_weights: &[Matrix],
    enhancement_weights: &[Matrix],
    x: &Matrix,
) -> Result<Matrix, ModelError> {
    if feature_weights.is_empty() && enhancement_weights.is_empty() {
        return Err(ModelError::Dimension("model has no node groups".into()));
    }
    if let Some(w) = feature_weights.first() {
        if w.rows() != x.cols() + 1 {
            return Err(ModelError::Dimension(format!(
                "input has {} columns, model was built for {}",
                x.cols(),
                w.rows() - 1
            )));
        }
    }
    let mut feature_blocks = Vec::with_capacity(feature_weights.len());
    for w in feature_weights {
        let mut z = affine(x, w, 1.0);
        let act = arch.feature_activation;
        z.map_inplace(move |v| act.apply(v));
        feature_blocks.push(z);
    }
    let z = Matrix::hstack(&feature_blocks.iter().collect::<Vec<_>>());

    let mut blocks = feature_blocks;
    for w in enhancement_weights {
        let mut h = affine(&z, w, arch.shrink_scale);
        let act = arch.enhancement_activation;
        h.map_inplace(move |v| act.apply(v));
        blocks.push(h);
    }
    Ok(Matrix::hstack(&blocks.iter().collect::<Vec<_>>()))
}

fn write_matrix(w: &mut impl Write, m: &Matrix) -> Result<(), ModelError> {
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    for &v in m.data() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_matrix(r: &mut impl Read) -> Result<Matrix, ModelError> {
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| {
        ModelError::Format(format!("implausible matrix shape {rows}x{cols}"))
    })?;
    let mut data = vec![0.0f64; count];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    Ok(Matrix::from_vec(rows, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incremental::BStrategy;
    use crate::linalg::mp_conditions_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
    }

    // Identity feature nodes are affine in the input, so with d = 4 only
    // five of them can be independent; tanh keeps k = 11 full column rank.
    fn desk_arch(seed: u64) -> Architecture {
        Architecture::new(2, 3, 1, 5, seed)
            .with_lambda(RidgeParam::ZERO)
            .with_activations(Activation::Tanh, Activation::Tanh)
    }

    #[test]
    fn zero_input_identity_activation_gives_zero_feature_block() {
        let arch = Architecture::new(1, 3, 1, 2, 0);
        let fw = vec![Matrix::zeros(5, 3)]; // 4 input dims + zero bias row
        let ew = vec![Matrix::zeros(4, 2)];
        let x = Matrix::zeros(6, 4);
        let a = build_activations(&arch, &fw, &ew, &x).unwrap();
        // Feature block is exactly zero; enhancement block is tanh(0) = 0 too.
        assert_eq!(a.max_abs(), 0.0);
        assert_eq!(a.rows(), 6);
        assert_eq!(a.cols(), 5);
    }

    #[test]
    fn activations_are_deterministic_per_seed() {
        let arch = desk_arch(7);
        let x = random(10, 4, 1);
        let y = random(10, 3, 2);
        let m1 = BlsModel::train_initial(arch, &x, &y).unwrap();
        let m2 = BlsModel::train_initial(arch, &x, &y).unwrap();
        assert_eq!(m1.activations(&x).unwrap().data(), m2.activations(&x).unwrap().data());
        assert_eq!(m1.output_weights().data(), m2.output_weights().data());
    }

    #[test]
    fn activation_shape_and_enhancement_range() {
        let arch = desk_arch(3);
        let x = random(10, 4, 5);
        let y = random(10, 2, 6);
        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        let a = model.activations(&x).unwrap();
        assert_eq!(a.rows(), 10);
        assert_eq!(a.cols(), 11);
        // The last 5 columns are tanh outputs, strictly inside (-1, 1).
        for i in 0..a.rows() {
            for j in 6..11 {
                assert!(a[(i, j)].abs() < 1.0);
            }
        }
    }

    #[test]
    fn initial_training_satisfies_mp_conditions() {
        let arch = desk_arch(11); // k = 11
        let x = random(200, 4, 21);
        let y = random(200, 3, 22);
        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        let a = model.state().matrix().unwrap();
        let report = mp_conditions_check(a, model.state().pinv(), 1e-7).unwrap();
        assert!(report.all_pass(), "deviations {:?}", report.deviation);
    }

    #[test]
    fn zero_labels_give_zero_weights() {
        let arch = desk_arch(13);
        let x = random(40, 4, 31);
        let y = Matrix::zeros(40, 3);
        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        assert_eq!(model.output_weights().max_abs(), 0.0);
    }

    #[test]
    fn smaller_ridge_fits_tighter() {
        let x = random(60, 4, 41);
        let y = random(60, 3, 42);
        let fit_residual = |lambda: f64| {
            let arch = Architecture::new(2, 3, 1, 5, 17).with_lambda(RidgeParam::new(lambda));
            let model = BlsModel::train_initial(arch, &x, &y).unwrap();
            let a = model.state().matrix().unwrap();
            a.matmul(model.output_weights()).sub(&y).frobenius_norm()
        };
        assert!(fit_residual(1e-8) < fit_residual(1.0));
    }

    #[test]
    fn increment_matches_batch_retrain_even_with_duplicates() {
        let arch = desk_arch(19);
        let x = random(50, 4, 51);
        let y = random(50, 3, 52);
        let xa = x.rows_range(0..8); // duplicated rows stress the update
        let ya = y.rows_range(0..8);

        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        let (model, _) = model
            .increment_inputs(&xa, &ya, &UpdateOptions::default())
            .unwrap();

        let x_full = x.vstack(&xa);
        let y_full = y.vstack(&ya);
        let batch_model = BlsModel::train_initial(arch, &x_full, &y_full).unwrap();
        let diff = model
            .output_weights()
            .sub(batch_model.output_weights())
            .max_abs();
        assert!(diff < 1e-6, "weight drift {diff}");
    }

    #[test]
    fn single_sample_increment_matches_batch() {
        let arch = desk_arch(23);
        let x = random(50, 4, 61);
        let y = random(50, 3, 62);
        let xa = random(1, 4, 63);
        let ya = random(1, 3, 64);

        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        let (model, stats) = model
            .increment_inputs(&xa, &ya, &UpdateOptions::default())
            .unwrap();
        assert_eq!(stats.strategy_used, BStrategy::SmallQ);

        let batch_model =
            BlsModel::train_initial(arch, &x.vstack(&xa), &y.vstack(&ya)).unwrap();
        assert!(
            model
                .output_weights()
                .sub(batch_model.output_weights())
                .max_abs()
                < 1e-6
        );
    }

    #[test]
    fn strategies_yield_identical_predictions() {
        let x = random(60, 4, 71);
        let y = random(60, 3, 72);
        let xa = random(20, 4, 73);
        let ya = random(20, 3, 74);
        let x_test = random(30, 4, 75);

        let run = |strategy: BStrategy| {
            let arch = desk_arch(29);
            let model = BlsModel::train_initial(arch, &x, &y).unwrap();
            let (model, _) = model
                .increment_inputs(
                    &xa,
                    &ya,
                    &UpdateOptions {
                        strategy,
                        assume_full_rank: false,
                    },
                )
                .unwrap();
            model.predict(&x_test).unwrap().classes
        };

        assert_eq!(run(BStrategy::Existing), run(BStrategy::LargeQ));
        assert_eq!(run(BStrategy::Existing), run(BStrategy::Auto));
    }

    #[test]
    fn zero_weights_predict_first_class() {
        let arch = desk_arch(31);
        let x = random(20, 4, 81);
        let y = Matrix::zeros(20, 3);
        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        let pred = model.predict(&x).unwrap();
        assert_eq!(pred.scores.max_abs(), 0.0);
        assert!(pred.classes.iter().all(|&c| c == 0));
    }

    #[test]
    fn overparameterized_fit_memorizes_training_set() {
        let data = crate::data::synth_classification(97, 200, 20, 4);
        let arch = Architecture::new(10, 10, 1, 50, 5)
            .with_lambda(RidgeParam::ZERO)
            .with_activations(Activation::Tanh, Activation::Tanh);
        let model = BlsModel::train_initial(arch, &data.x, &data.one_hot_labels()).unwrap();
        let acc = model.evaluate(&data).unwrap();
        assert!(acc >= 0.99, "training accuracy {acc}");
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.blnc");

        let arch = desk_arch(37);
        let x = random(40, 4, 91);
        let y = random(40, 3, 92);
        let model = BlsModel::train_initial(arch, &x, &y).unwrap();
        model.save(&path).unwrap();
        let loaded = BlsModel::load(&path).unwrap();

        assert_eq!(model.output_weights(), loaded.output_weights());
        assert_eq!(model.state().pinv(), loaded.state().pinv());
        assert_eq!(model.state().matrix(), loaded.state().matrix());
        assert_eq!(model.input_dim(), loaded.input_dim());
        let x_test = random(10, 4, 93);
        assert_eq!(
            model.predict(&x_test).unwrap().classes,
            loaded.predict(&x_test).unwrap().classes
        );
    }

    #[test]
    fn load_rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"not a model").unwrap();
        assert!(matches!(BlsModel::load(&path), Err(ModelError::Format(_))));
    }

    #[test]
    fn lean_model_round_trips_without_input_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lean.blnc");

        let arch = desk_arch(41);
        let x = random(40, 4, 94);
        let y = random(40, 3, 95);
        let mut model = BlsModel::train_initial(arch, &x, &y).unwrap();
        model.drop_input_matrix();
        model.save(&path).unwrap();
        let loaded = BlsModel::load(&path).unwrap();
        assert!(loaded.state().matrix().is_none());
        assert_eq!(model.state().pinv(), loaded.state().pinv());
    }
}
