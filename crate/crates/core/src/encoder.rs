//! Corrective MLP encoder: a three-layer perceptron trained by online
//! backpropagation with momentum to map raw quantizer patterns to
//! weighted binary output codes.

use serde::{Deserialize, Serialize};

use crate::array::RawCode;
use crate::error::{Error, Result};
use crate::network::CodeWord;
use crate::rng::DetRng;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Feed-forward network with logistic units on every non-input layer.
/// `weights[l]` has shape (layer_sizes[l+1], layer_sizes[l]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEncoder {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpEncoder {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| vec![vec![0.0; w[0]]; w[1]])
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(MlpEncoder {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        check_layer_sizes(&self.layer_sizes)?;
        let n_layers = self.layer_sizes.len() - 1;
        if self.weights.len() != n_layers || self.biases.len() != n_layers {
            return Err(Error::Parameter("weight/bias layer count mismatch".into()));
        }
        for l in 0..n_layers {
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            if self.weights[l].len() != rows || self.biases[l].len() != rows {
                return Err(Error::Parameter(format!("layer {l} has wrong fan-out")));
            }
            for row in &self.weights[l] {
                if row.len() != cols {
                    return Err(Error::Parameter(format!("layer {l} has wrong fan-in")));
                }
                if row.iter().any(|w| !w.is_finite()) {
                    return Err(Error::Parameter("non-finite weight".into()));
                }
            }
            if self.biases[l].iter().any(|b| !b.is_finite()) {
                return Err(Error::Parameter("non-finite bias".into()));
            }
        }
        Ok(())
    }
}

fn check_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::Parameter(format!(
            "layer sizes must list at least input and output widths, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// Hyperparameters; the defaults are the reported training setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Stop once this fraction of rows is exactly matched (thresholded).
    pub target_exact_match: f64,
    pub seed: u64,
    /// Parameters initialize uniform in (-init_range, init_range).
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.3,
            momentum: 0.9,
            max_epochs: 20_000,
            target_exact_match: 1.0,
            seed: 42,
            init_range: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Parameter("learning_rate must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Parameter("max_epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.target_exact_match) {
            return Err(Error::Parameter(
                "target_exact_match must be in [0, 1]".into(),
            ));
        }
        if !(self.init_range > 0.0) {
            return Err(Error::Parameter("init_range must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub input: Vec<u8>,
    pub target: Vec<u8>,
}

/// Training rows; no two rows may share an input with different targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDataset {
    pub rows: Vec<DatasetRow>,
}

impl EncoderDataset {
    pub fn new(rows: Vec<DatasetRow>) -> Result<Self> {
        let ds = EncoderDataset { rows };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let in_w = self.rows[0].input.len();
        let out_w = self.rows[0].target.len();
        for row in &self.rows {
            if row.input.len() != in_w || row.target.len() != out_w {
                return Err(Error::Data("ragged dataset rows".into()));
            }
            if row.input.iter().chain(&row.target).any(|&b| b > 1) {
                return Err(Error::Data("dataset entries must be 0 or 1".into()));
            }
        }
        for (i, a) in self.rows.iter().enumerate() {
            for b in &self.rows[i + 1..] {
                if a.input == b.input && a.target != b.target {
                    return Err(Error::Data(format!(
                        "input {:?} maps to both {:?} and {:?}",
                        a.input, a.target, b.target
                    )));
                }
            }
        }
        Ok(())
    }

    /// Build the level-code dataset from a swept transfer table: one row
    /// per distinct raw code, labeled with its level rank in weighted
    /// binary. Fails when the table has more levels than the output
    /// width can encode.
    pub fn from_table(table: &crate::array::TransferTable, out_bits: usize) -> Result<Self> {
        let max_levels = 1usize << out_bits;
        let mut rows: Vec<DatasetRow> = Vec::new();
        for row in &table.rows {
            if row.level >= max_levels {
                return Err(Error::Data(format!(
                    "level {} does not fit in {out_bits} output bits",
                    row.level
                )));
            }
            let entry = DatasetRow {
                input: row.raw.bits().to_vec(),
                target: CodeWord::from_value(row.level as u64, out_bits)
                    .bits()
                    .to_vec(),
            };
            if !rows.contains(&entry) {
                rows.push(entry);
            }
        }
        EncoderDataset::new(rows)
    }
}

/// Deterministic uniform initialization in (-r, r).
pub fn init_mlp(layer_sizes: &[usize], seed: u64, init_range: f64) -> Result<MlpEncoder> {
    if !(init_range > 0.0) {
        return Err(Error::Parameter(format!(
            "init_range must be positive, got {init_range}"
        )));
    }
    let mut mlp = MlpEncoder::zeros(layer_sizes)?;
    let mut rng = DetRng::seed_from_u64(seed);
    for layer in &mut mlp.weights {
        for row in layer {
            for w in row {
                *w = rng.range(-init_range, init_range);
            }
        }
    }
    for layer in &mut mlp.biases {
        for b in layer {
            *b = rng.range(-init_range, init_range);
        }
    }
    Ok(mlp)
}

/// Forward pass; outputs lie strictly in (0, 1).
pub fn forward(mlp: &MlpEncoder, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != mlp.input_width() {
        return Err(Error::Parameter(format!(
            "input length {} does not match input width {}",
            input.len(),
            mlp.input_width()
        )));
    }
    let mut a = input.to_vec();
    for (weights, biases) in mlp.weights.iter().zip(&mlp.biases) {
        a = weights
            .iter()
            .zip(biases)
            .map(|(row, &b)| sigmoid(row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>() + b))
            .collect();
    }
    Ok(a)
}

/// Activations of every layer, input included.
fn forward_all(mlp: &MlpEncoder, input: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = vec![input.to_vec()];
    for (weights, biases) in mlp.weights.iter().zip(&mlp.biases) {
        let prev = acts.last().unwrap();
        let next: Vec<f64> = weights
            .iter()
            .zip(biases)
            .map(|(row, &b)| sigmoid(row.iter().zip(prev).map(|(w, x)| w * x).sum::<f64>() + b))
            .collect();
        acts.push(next);
    }
    acts
}

/// Gradient arrays shaped like the encoder's weights and biases.
type WeightGrads = Vec<Vec<Vec<f64>>>;
type BiasGrads = Vec<Vec<f64>>;

/// Per-parameter gradients of the squared-error loss on one row.
fn row_gradients(mlp: &MlpEncoder, input: &[f64], target: &[f64]) -> (WeightGrads, BiasGrads, f64) {
    let acts = forward_all(mlp, input);
    let n_layers = mlp.weights.len();
    let out = acts.last().unwrap();
    let loss: f64 = out
        .iter()
        .zip(target)
        .map(|(y, t)| 0.5 * (y - t).powi(2))
        .sum();
    // delta for the output layer: (y - t) * y * (1 - y)
    let mut delta: Vec<f64> = out
        .iter()
        .zip(target)
        .map(|(y, t)| (y - t) * y * (1.0 - y))
        .collect();
    let mut grad_w = vec![Vec::new(); n_layers];
    let mut grad_b = vec![Vec::new(); n_layers];
    for l in (0..n_layers).rev() {
        let below = &acts[l];
        grad_w[l] = delta
            .iter()
            .map(|&d| below.iter().map(|&a| d * a).collect())
            .collect();
        grad_b[l] = delta.clone();
        if l > 0 {
            let here = &acts[l];
            delta = (0..here.len())
                .map(|j| {
                    let back: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(k, &d)| mlp.weights[l][k][j] * d)
                        .sum();
                    back * here[j] * (1.0 - here[j])
                })
                .collect();
        }
    }
    (grad_w, grad_b, loss)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub mlp: MlpEncoder,
    /// Total squared-error loss per epoch.
    pub loss_history: Vec<f64>,
    /// Final fraction of rows whose thresholded output equals the target.
    pub exact_match: f64,
    pub epochs: usize,
}

fn exact_match_rate(mlp: &MlpEncoder, rows: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let hits = rows
        .iter()
        .filter(|(x, t)| {
            forward(mlp, x)
                .map(|y| {
                    y.iter()
                        .zip(t)
                        .all(|(yi, ti)| (if *yi >= 0.5 { 1.0 } else { 0.0 }) == *ti)
                })
                .unwrap_or(false)
        })
        .count();
    hits as f64 / rows.len() as f64
}

/// Online backpropagation with momentum, rows visited in fixed order
/// every epoch. Stops when the exact-match target is reached.
pub fn train(
    mlp: &MlpEncoder,
    dataset: &EncoderDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    dataset.validate()?;
    mlp.validate()?;
    if dataset.rows[0].input.len() != mlp.input_width()
        || dataset.rows[0].target.len() != mlp.output_width()
    {
        return Err(Error::Data(format!(
            "dataset width {}x{} does not match encoder {}x{}",
            dataset.rows[0].input.len(),
            dataset.rows[0].target.len(),
            mlp.input_width(),
            mlp.output_width()
        )));
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = dataset
        .rows
        .iter()
        .map(|r| {
            (
                r.input.iter().map(|&b| b as f64).collect(),
                r.target.iter().map(|&b| b as f64).collect(),
            )
        })
        .collect();

    let mut net = mlp.clone();
    let mut vel_w: Vec<Vec<Vec<f64>>> = net
        .weights
        .iter()
        .map(|l| l.iter().map(|r| vec![0.0; r.len()]).collect())
        .collect();
    let mut vel_b: Vec<Vec<f64>> = net.biases.iter().map(|l| vec![0.0; l.len()]).collect();
    let mut loss_history = Vec::new();
    let mut exact = exact_match_rate(&net, &rows);
    let mut epochs = 0;

    while epochs < config.max_epochs && exact < config.target_exact_match {
        let mut epoch_loss = 0.0;
        for (x, t) in &rows {
            let (grad_w, grad_b, loss) = row_gradients(&net, x, t);
            epoch_loss += loss;
            for l in 0..net.weights.len() {
                for (j, row) in net.weights[l].iter_mut().enumerate() {
                    for (i, w) in row.iter_mut().enumerate() {
                        let v = config.momentum * vel_w[l][j][i]
                            - config.learning_rate * grad_w[l][j][i];
                        vel_w[l][j][i] = v;
                        *w += v;
                    }
                    let v = config.momentum * vel_b[l][j] - config.learning_rate * grad_b[l][j];
                    vel_b[l][j] = v;
                    net.biases[l][j] += v;
                }
            }
        }
        loss_history.push(epoch_loss);
        epochs += 1;
        exact = exact_match_rate(&net, &rows);
    }
    if loss_history.is_empty() {
        // Already matching before any update; record the resting loss.
        let resting: f64 = rows.iter().map(|(x, t)| row_gradients(&net, x, t).2).sum();
        loss_history.push(resting);
    }
    Ok(TrainOutcome {
        mlp: net,
        loss_history,
        exact_match: exact,
        epochs,
    })
}

/// Forward then threshold at 0.5 (>= maps to 1). Raw codes shorter than
/// the input layer are zero-padded, longer ones truncated.
pub fn encode(mlp: &MlpEncoder, raw: &RawCode) -> CodeWord {
    let mut input: Vec<f64> = raw.bits().iter().map(|&b| b as f64).collect();
    input.resize(mlp.input_width(), 0.0);
    let out = forward(mlp, &input).expect("input resized to match");
    let bits = out.iter().map(|&y| u8::from(y >= 0.5)).collect();
    CodeWord::from_bits(bits).expect("bits are 0/1 by construction")
}

/// Batch gradient over at most `limit` rows.
pub(crate) fn batch_gradient(
    mlp: &MlpEncoder,
    dataset: &EncoderDataset,
    limit: usize,
) -> (WeightGrads, BiasGrads) {
    let mut total_w: WeightGrads = mlp
        .weights
        .iter()
        .map(|l| l.iter().map(|r| vec![0.0; r.len()]).collect())
        .collect();
    let mut total_b: Vec<Vec<f64>> = mlp.biases.iter().map(|l| vec![0.0; l.len()]).collect();
    for row in dataset.rows.iter().take(limit) {
        let x: Vec<f64> = row.input.iter().map(|&b| b as f64).collect();
        let t: Vec<f64> = row.target.iter().map(|&b| b as f64).collect();
        let (gw, gb, _) = row_gradients(mlp, &x, &t);
        for l in 0..total_w.len() {
            for j in 0..total_w[l].len() {
                for i in 0..total_w[l][j].len() {
                    total_w[l][j][i] += gw[l][j][i];
                }
                total_b[l][j] += gb[l][j];
            }
        }
    }
    (total_w, total_b)
}

pub(crate) fn batch_loss(mlp: &MlpEncoder, dataset: &EncoderDataset, limit: usize) -> f64 {
    dataset
        .rows
        .iter()
        .take(limit)
        .map(|row| {
            let x: Vec<f64> = row.input.iter().map(|&b| b as f64).collect();
            let t: Vec<f64> = row.target.iter().map(|&b| b as f64).collect();
            row_gradients(mlp, &x, &t).2
        })
        .sum()
}

const GRADIENT_CHECK_ROWS: usize = 8;

/// Central finite differences against the analytic gradient over at
/// most eight rows; returns the worst relative discrepancy.
pub fn gradient_check(mlp: &MlpEncoder, dataset: &EncoderDataset, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    dataset.validate()?;
    let (gw, gb) = batch_gradient(mlp, dataset, GRADIENT_CHECK_ROWS);
    let mut worst = 0.0f64;
    let mut probe = mlp.clone();
    for l in 0..mlp.weights.len() {
        for j in 0..mlp.weights[l].len() {
            for i in 0..mlp.weights[l][j].len() {
                let orig = probe.weights[l][j][i];
                probe.weights[l][j][i] = orig + epsilon;
                let plus = batch_loss(&probe, dataset, GRADIENT_CHECK_ROWS);
                probe.weights[l][j][i] = orig - epsilon;
                let minus = batch_loss(&probe, dataset, GRADIENT_CHECK_ROWS);
                probe.weights[l][j][i] = orig;
                let numeric = (plus - minus) / (2.0 * epsilon);
                worst = worst.max(relative_discrepancy(gw[l][j][i], numeric));
            }
            let orig = probe.biases[l][j];
            probe.biases[l][j] = orig + epsilon;
            let plus = batch_loss(&probe, dataset, GRADIENT_CHECK_ROWS);
            probe.biases[l][j] = orig - epsilon;
            let minus = batch_loss(&probe, dataset, GRADIENT_CHECK_ROWS);
            probe.biases[l][j] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_discrepancy(gb[l][j], numeric));
        }
    }
    Ok(worst)
}

pub(crate) fn relative_discrepancy(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}
