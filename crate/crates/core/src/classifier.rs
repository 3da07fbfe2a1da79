//! State-to-question relevance classifier.
//!
//! A sample pairs a scene's normalized positions with one bit per catalog
//! question: 1 iff some single push flips that question's answer. The model
//! encodes the state and each question separately, concatenates the two
//! codes and decodes a relevance score in `(0, 1)`.
//!
//! The decoder's first layer is linear in the concatenation, so it splits
//! into a state half and a question half. Training and inference compute
//! each half once per batch and only pay for the nonlinearity per
//! (state, question) pair.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::nn::{
    adam_step, bce_logit_grad, init_mlp, sigmoid, Activation, AdamConfig, AdamState, Gradients,
    Matrix, Mlp, MlpSpec, ParamTensor,
};
use crate::questions::{answer, QuestionCatalog};
use crate::rng::{derive, Fingerprint, SplitMix64};
use crate::world::{reset, step_in_place, ActionId, ArenaConfig, WorldState};

/// Random pushes applied after reset are drawn from `0..=MAX_WARMUP_ACTIONS`.
pub const MAX_WARMUP_ACTIONS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub state_features: Vec<f64>,
    pub labels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub num_objects: usize,
    pub num_questions: usize,
    pub seed: u64,
    pub config_digest: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        2 * self.meta.num_objects
    }

    /// Checks every sample against the metadata dimensions.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.state_features.len() != self.state_dim() || s.labels.len() != self.meta.num_questions {
                return Err(shape_err(format!("sample {i} does not match dataset dimensions")));
            }
            if s.labels.iter().any(|&b| b > 1) {
                return Err(shape_err(format!("sample {i} has a non-binary label")));
            }
        }
        Ok(())
    }
}

/// Digest of everything that shapes a generated dataset.
pub fn environment_digest(arena: &ArenaConfig, catalog: &QuestionCatalog) -> u64 {
    let mut fp = Fingerprint::new();
    fp.f64(arena.half_extent)
        .f64(arena.object_radius)
        .f64(arena.push_distance)
        .usize(arena.num_objects)
        .usize(arena.max_episode_steps);
    for c in catalog.colors() {
        fp.bytes(c.as_bytes());
    }
    for r in catalog.relations() {
        fp.usize(r.id());
    }
    fp.finish()
}

/// Exhaustive flip scan. Bit `i` is set iff some action changes the answer
/// to question `i`; the witness is the first such action in ascending order.
pub fn flip_labels(
    state: &WorldState,
    arena: &ArenaConfig,
    catalog: &QuestionCatalog,
) -> Result<(Vec<u8>, Vec<Option<ActionId>>)> {
    let q = catalog.len();
    let mut before = Vec::with_capacity(q);
    for question in catalog.questions() {
        before.push(answer(state, question)?);
    }
    let mut labels = vec![0u8; q];
    let mut witnesses = vec![None; q];
    let mut remaining = q;
    let mut next = state.clone();
    for a in 0..state.num_objects() * crate::world::NUM_DIRECTIONS {
        if remaining == 0 {
            break;
        }
        next.positions.copy_from_slice(&state.positions);
        step_in_place(&mut next, ActionId(a), arena)?;
        for (i, question) in catalog.questions().iter().enumerate() {
            if labels[i] == 0 && answer(&next, question)? != before[i] {
                labels[i] = 1;
                witnesses[i] = Some(ActionId(a));
                remaining -= 1;
            }
        }
    }
    Ok((labels, witnesses))
}

/// The scene behind sample `index`: a fresh reset followed by up to
/// [`MAX_WARMUP_ACTIONS`] uniform random pushes.
pub fn sample_state(arena: &ArenaConfig, base_seed: u64, index: u64) -> Result<WorldState> {
    let mut rng = SplitMix64::new(derive(base_seed, index));
    let mut state = reset(arena, rng.next_u64())?;
    let pushes = rng.below(MAX_WARMUP_ACTIONS + 1);
    for _ in 0..pushes {
        let a = rng.below(arena.num_actions());
        step_in_place(&mut state, ActionId(a), arena)?;
    }
    state.step_count = 0;
    Ok(state)
}

pub fn generate_sample(
    arena: &ArenaConfig,
    catalog: &QuestionCatalog,
    base_seed: u64,
    index: u64,
) -> Result<(LabeledSample, Vec<Option<ActionId>>)> {
    let state = sample_state(arena, base_seed, index)?;
    let (labels, witnesses) = flip_labels(&state, arena, catalog)?;
    Ok((
        LabeledSample {
            state_features: state.normalized_features(arena.half_extent),
            labels,
        },
        witnesses,
    ))
}

pub fn generate_dataset(
    arena: &ArenaConfig,
    catalog: &QuestionCatalog,
    num_samples: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_samples == 0 {
        return Err(Error::Config("dataset needs at least one sample".into()));
    }
    arena.validate_with_catalog(catalog)?;
    let mut samples = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        samples.push(generate_sample(arena, catalog, seed, i as u64)?.0);
    }
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            num_objects: arena.num_objects,
            num_questions: catalog.len(),
            seed,
            config_digest: environment_digest(arena, catalog),
        },
    })
}

/// Seeded shuffle, then the first `fraction` of samples train and the rest test.
pub fn split_dataset(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config("split fraction must lie in (0, 1)".into()));
    }
    let n = dataset.len();
    let n_train = libm::round(fraction * n as f64) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "split of {n} samples at {fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let pick = |idx: &[usize]| Dataset {
        samples: idx.iter().map(|&i| dataset.samples[i].clone()).collect(),
        meta: dataset.meta.clone(),
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub state_hidden: usize,
    pub question_hidden: usize,
    /// Width of each encoder's output code.
    pub code_width: usize,
    pub decoder_hidden: usize,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            state_hidden: 64,
            question_hidden: 32,
            code_width: 32,
            decoder_hidden: 64,
        }
    }
}

impl ClassifierHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("classifier.batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("classifier.learning_rate must be >= 0".into()));
        }
        if self.state_hidden == 0 || self.question_hidden == 0 || self.code_width == 0 || self.decoder_hidden == 0 {
            return Err(Error::Config("classifier widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn state_encoder_spec(&self, state_dim: usize) -> MlpSpec {
        MlpSpec::new(&[state_dim, self.state_hidden, self.code_width], Activation::Identity)
    }

    pub fn question_encoder_spec(&self, question_dim: usize) -> MlpSpec {
        MlpSpec::new(&[question_dim, self.question_hidden, self.code_width], Activation::Identity)
    }

    pub fn decoder_spec(&self) -> MlpSpec {
        MlpSpec::new(&[2 * self.code_width, self.decoder_hidden, 1], Activation::Sigmoid)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceModel {
    pub state_encoder: Mlp,
    pub question_encoder: Mlp,
    pub decoder: Mlp,
}

impl RelevanceModel {
    pub fn init(state_dim: usize, catalog: &QuestionCatalog, hyper: &ClassifierHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            state_encoder: init_mlp(&hyper.state_encoder_spec(state_dim), derive(seed, 0), "classifier.state")?,
            question_encoder: init_mlp(
                &hyper.question_encoder_spec(catalog.encoding_width()),
                derive(seed, 1),
                "classifier.question",
            )?,
            decoder: init_mlp(&hyper.decoder_spec(), derive(seed, 2), "classifier.decoder")?,
        })
    }

    /// Rebuilds a model from tensors named as in [`RelevanceModel::init`].
    pub fn from_tensors(
        state_dim: usize,
        catalog: &QuestionCatalog,
        hyper: &ClassifierHyper,
        tensors: &[ParamTensor],
    ) -> Result<Self> {
        let take = |prefix: &str| -> Vec<ParamTensor> {
            tensors
                .iter()
                .filter(|t| t.name.starts_with(prefix))
                .cloned()
                .collect()
        };
        Ok(Self {
            state_encoder: Mlp::from_params(&hyper.state_encoder_spec(state_dim), take("classifier.state."))?,
            question_encoder: Mlp::from_params(
                &hyper.question_encoder_spec(catalog.encoding_width()),
                take("classifier.question."),
            )?,
            decoder: Mlp::from_params(&hyper.decoder_spec(), take("classifier.decoder."))?,
        })
    }

    pub fn tensors(&self) -> Vec<ParamTensor> {
        let mut out = Vec::new();
        out.extend_from_slice(self.state_encoder.params());
        out.extend_from_slice(self.question_encoder.params());
        out.extend_from_slice(self.decoder.params());
        out
    }

    pub fn state_dim(&self) -> usize {
        self.state_encoder.spec().input_width()
    }

    fn code_width(&self) -> usize {
        self.state_encoder.spec().output_width()
    }

    fn hidden_width(&self) -> usize {
        self.decoder.spec().widths[1]
    }

    /// Splits the decoder's first weight `[hidden, 2*code]` into its state
    /// and question halves, each `[hidden, code]`.
    fn split_first_weight(&self) -> (Vec<f64>, Vec<f64>) {
        let w = &self.decoder.weight(0).values;
        let (h, c) = (self.hidden_width(), self.code_width());
        let mut ws = Vec::with_capacity(h * c);
        let mut wq = Vec::with_capacity(h * c);
        for o in 0..h {
            ws.extend_from_slice(&w[o * 2 * c..o * 2 * c + c]);
            wq.extend_from_slice(&w[o * 2 * c + c..(o + 1) * 2 * c]);
        }
        (ws, wq)
    }
}

fn question_matrix(catalog: &QuestionCatalog) -> Matrix {
    let w = catalog.encoding_width();
    let mut m = Matrix::zeros(catalog.len(), w);
    for (i, q) in catalog.questions().iter().enumerate() {
        catalog.encode(q, m.row_mut(i));
    }
    m
}

/// `codes · Wᵀ` for `W` of shape `[hidden, code]`, optionally plus a bias.
fn project(codes: &Matrix, w: &[f64], hidden: usize, bias: Option<&[f64]>) -> Matrix {
    let c = codes.cols;
    let mut out = Matrix::zeros(codes.rows, hidden);
    for r in 0..codes.rows {
        let x = codes.row(r);
        let y = out.row_mut(r);
        for o in 0..hidden {
            let dot: f64 = w[o * c..(o + 1) * c].iter().zip(x).map(|(a, b)| a * b).sum();
            y[o] = bias.map_or(0.0, |b| b[o]) + dot;
        }
    }
    out
}

#[inline]
fn pair_logit(a: &[f64], b: &[f64], w_out: &[f64], b_out: f64, hidden: &mut [f64]) -> f64 {
    let mut z = b_out;
    for k in 0..hidden.len() {
        let h = libm::tanh(a[k] + b[k]);
        hidden[k] = h;
        z += w_out[k] * h;
    }
    z
}

fn check_catalog(model: &RelevanceModel, catalog: &QuestionCatalog) -> Result<()> {
    if model.question_encoder.spec().input_width() != catalog.encoding_width() {
        return Err(shape_err(format!(
            "model expects question encodings of width {}, catalog has {}",
            model.question_encoder.spec().input_width(),
            catalog.encoding_width()
        )));
    }
    Ok(())
}

/// Score of every catalog question for one state.
pub fn predict_scores(model: &RelevanceModel, state_features: &[f64], catalog: &QuestionCatalog) -> Result<Vec<f64>> {
    QuestionScorer::new(model, catalog)?.scores(state_features)
}

/// Scores for a batch of states: one row per state, one column per question.
pub fn predict_batch(model: &RelevanceModel, states: &Matrix, catalog: &QuestionCatalog) -> Result<Matrix> {
    let scorer = QuestionScorer::new(model, catalog)?;
    let mut out = Matrix::zeros(states.rows, catalog.len());
    for r in 0..states.rows {
        let scores = scorer.scores(states.row(r))?;
        out.row_mut(r).copy_from_slice(&scores);
    }
    Ok(out)
}

/// A frozen model bound to one catalog, with the question half of the
/// decoder's first layer precomputed.
#[derive(Clone, Debug)]
pub struct QuestionScorer {
    model: RelevanceModel,
    state_weight: Vec<f64>,
    question_proj: Matrix,
}

impl QuestionScorer {
    pub fn new(model: &RelevanceModel, catalog: &QuestionCatalog) -> Result<Self> {
        check_catalog(model, catalog)?;
        let (question_codes, _) = model.question_encoder.forward(&question_matrix(catalog))?;
        let (ws, wq) = model.split_first_weight();
        let question_proj = project(&question_codes, &wq, model.hidden_width(), None);
        Ok(Self {
            model: model.clone(),
            state_weight: ws,
            question_proj,
        })
    }

    pub fn model(&self) -> &RelevanceModel {
        &self.model
    }

    pub fn num_questions(&self) -> usize {
        self.question_proj.rows
    }

    pub fn scores(&self, state_features: &[f64]) -> Result<Vec<f64>> {
        let m = &self.model;
        if state_features.len() != m.state_dim() {
            return Err(shape_err(format!(
                "state features have width {}, model expects {}",
                state_features.len(),
                m.state_dim()
            )));
        }
        let code = Matrix::row_vector(&m.state_encoder.forward_one(state_features)?);
        let hidden = m.hidden_width();
        let a = project(&code, &self.state_weight, hidden, Some(&m.decoder.bias(0).values));
        let w_out = &m.decoder.weight(1).values;
        let b_out = m.decoder.bias(1).values[0];
        let mut h = vec![0.0; hidden];
        Ok((0..self.question_proj.rows)
            .map(|j| sigmoid(pair_logit(a.row(0), self.question_proj.row(j), w_out, b_out, &mut h)))
            .collect())
    }
}

/// Per-pair scoring through the unsplit decoder on the concatenated codes.
/// Slow; exists to cross-check [`predict_scores`].
pub fn predict_scores_unfused(
    model: &RelevanceModel,
    state_features: &[f64],
    catalog: &QuestionCatalog,
) -> Result<Vec<f64>> {
    check_catalog(model, catalog)?;
    let state_code = model.state_encoder.forward_one(state_features)?;
    let mut enc = vec![0.0; catalog.encoding_width()];
    let mut out = Vec::with_capacity(catalog.len());
    for q in catalog.questions() {
        catalog.encode(q, &mut enc);
        let question_code = model.question_encoder.forward_one(&enc)?;
        let mut joint = state_code.clone();
        joint.extend_from_slice(&question_code);
        out.push(model.decoder.forward_one(&joint)?[0]);
    }
    Ok(out)
}

/// Result of [`train_classifier`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedClassifier {
    pub model: RelevanceModel,
    /// Mean element-wise BCE per epoch.
    pub loss_history: Vec<f64>,
}

pub fn train_classifier(
    train: &Dataset,
    catalog: &QuestionCatalog,
    hyper: &ClassifierHyper,
    seed: u64,
) -> Result<TrainedClassifier> {
    train_classifier_with(train, catalog, hyper, seed, |_, _| {})
}

/// As [`train_classifier`], calling `on_epoch(epoch, mean_loss)` after each epoch.
pub fn train_classifier_with(
    train: &Dataset,
    catalog: &QuestionCatalog,
    hyper: &ClassifierHyper,
    seed: u64,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedClassifier> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    train.validate()?;
    if train.meta.num_questions != catalog.len() {
        return Err(shape_err("dataset and catalog disagree on the question count"));
    }
    let mut model = RelevanceModel::init(train.state_dim(), catalog, hyper, seed)?;
    let adam = AdamConfig::with_lr(hyper.learning_rate);
    let mut opt_s = AdamState::new(model.state_encoder.params(), adam);
    let mut opt_q = AdamState::new(model.question_encoder.params(), adam);
    let mut opt_d = AdamState::new(model.decoder.params(), adam);
    let mut shuffle = SplitMix64::new(derive(seed, 3));
    let questions = question_matrix(catalog);
    let q = catalog.len();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        shuffle.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let loss = train_step(
                &mut model,
                train,
                batch,
                &questions,
                (&mut opt_s, &mut opt_q, &mut opt_d),
            )?;
            epoch_loss += loss;
        }
        let mean = epoch_loss / (train.len() * q) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                at: format!("classifier epoch {}", epoch + 1),
            });
        }
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(TrainedClassifier {
        model,
        loss_history: history,
    })
}

/// One minibatch step; returns the summed (not averaged) element loss.
fn train_step(
    model: &mut RelevanceModel,
    data: &Dataset,
    batch: &[usize],
    questions: &Matrix,
    opts: (&mut AdamState, &mut AdamState, &mut AdamState),
) -> Result<f64> {
    let (loss_sum, grads) = batch_gradients(model, data, batch, questions)?;
    let [state_grads, question_grads, dec_grads] = grads;
    let (opt_s, opt_q, opt_d) = opts;
    adam_step(model.state_encoder.params_mut(), &state_grads, opt_s)?;
    adam_step(model.question_encoder.params_mut(), &question_grads, opt_q)?;
    adam_step(model.decoder.params_mut(), &dec_grads, opt_d)?;
    Ok(loss_sum)
}

/// Summed element loss over `batch` and the gradients of its mean, for the
/// state encoder, question encoder and decoder in that order.
fn batch_gradients(
    model: &RelevanceModel,
    data: &Dataset,
    batch: &[usize],
    questions: &Matrix,
) -> Result<(f64, [Gradients; 3])> {
    let q = questions.rows;
    let dim = data.state_dim();
    let mut states = Matrix::zeros(batch.len(), dim);
    for (r, &i) in batch.iter().enumerate() {
        states.row_mut(r).copy_from_slice(&data.samples[i].state_features);
    }
    let (state_codes, state_rec) = model.state_encoder.forward(&states)?;
    let (question_codes, question_rec) = model.question_encoder.forward(questions)?;
    let (ws, wq) = model.split_first_weight();
    let hidden = model.hidden_width();
    let code = model.code_width();
    let a = project(&state_codes, &ws, hidden, Some(&model.decoder.bias(0).values));
    let b = project(&question_codes, &wq, hidden, None);
    let w_out = model.decoder.weight(1).values.clone();
    let b_out = model.decoder.bias(1).values[0];

    let scale = 1.0 / (batch.len() * q) as f64;
    let mut grad_a = Matrix::zeros(batch.len(), hidden);
    let mut grad_b = Matrix::zeros(q, hidden);
    let mut grad_w_out = vec![0.0; hidden];
    let mut grad_b_out = 0.0;
    let mut h = vec![0.0; hidden];
    let mut loss_sum = 0.0;
    for (r, &i) in batch.iter().enumerate() {
        let labels = &data.samples[i].labels;
        let ar = a.row(r);
        for j in 0..q {
            let z = pair_logit(ar, b.row(j), &w_out, b_out, &mut h);
            let p = sigmoid(z);
            let (l, dz) = bce_logit_grad(p, labels[j] as f64);
            loss_sum += l;
            let dz = dz * scale;
            grad_b_out += dz;
            let ga = grad_a.row_mut(r);
            for k in 0..hidden {
                grad_w_out[k] += dz * h[k];
                let d = dz * w_out[k] * (1.0 - h[k] * h[k]);
                ga[k] += d;
                grad_b.data[j * hidden + k] += d;
            }
        }
    }

    // Decoder gradients: first layer rebuilt from the two halves.
    let mut dec_grads = model.decoder.zero_grads();
    {
        let gw = &mut dec_grads[0];
        for o in 0..hidden {
            let row = &mut gw[o * 2 * code..(o + 1) * 2 * code];
            for r in 0..batch.len() {
                let d = grad_a.get(r, o);
                let sc = state_codes.row(r);
                for c in 0..code {
                    row[c] += d * sc[c];
                }
            }
            for j in 0..q {
                let d = grad_b.get(j, o);
                let qc = question_codes.row(j);
                for c in 0..code {
                    row[code + c] += d * qc[c];
                }
            }
        }
    }
    for r in 0..batch.len() {
        for (g, &d) in dec_grads[1].iter_mut().zip(grad_a.row(r)) {
            *g += d;
        }
    }
    dec_grads[2] = grad_w_out;
    dec_grads[3][0] = grad_b_out;

    // Back into the encoders.
    let back = |grad: &Matrix, w: &[f64]| {
        let mut out = Matrix::zeros(grad.rows, code);
        for r in 0..grad.rows {
            let g = grad.row(r);
            let o_row = out.row_mut(r);
            for o in 0..hidden {
                let d = g[o];
                for c in 0..code {
                    o_row[c] += d * w[o * code + c];
                }
            }
        }
        out
    };
    let (state_grads, _) = model.state_encoder.backward(&state_rec, &back(&grad_a, &ws))?;
    let (question_grads, _) = model.question_encoder.backward(&question_rec, &back(&grad_b, &wq))?;

    Ok((loss_sum, [state_grads, question_grads, dec_grads]))
}

/// Mean BCE over every (sample, question) element.
pub fn dataset_loss(model: &RelevanceModel, data: &Dataset, catalog: &QuestionCatalog) -> Result<f64> {
    let mut total = 0.0;
    for s in &data.samples {
        let scores = predict_scores(model, &s.state_features, catalog)?;
        for (&p, &y) in scores.iter().zip(&s.labels) {
            total += bce_logit_grad(p, y as f64).0;
        }
    }
    Ok(total / (data.len() * catalog.len()) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    /// Fraction of (sample, question) elements predicted correctly.
    pub elementwise: f64,
    /// Fraction of samples whose whole label vector is predicted correctly.
    pub exact_match: f64,
}

/// Thresholded accuracy; a score `>= threshold` predicts 1.
pub fn evaluate_accuracy(
    model: &RelevanceModel,
    test: &Dataset,
    catalog: &QuestionCatalog,
    threshold: f64,
) -> Result<Accuracy> {
    evaluate_with(test, threshold, |f| predict_scores(model, f, catalog))
}

/// Accuracy of an arbitrary scorer; used for baselines and in tests.
pub fn evaluate_with(
    test: &Dataset,
    threshold: f64,
    mut scorer: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Accuracy> {
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let mut correct = 0usize;
    let mut exact = 0usize;
    let mut total = 0usize;
    for s in &test.samples {
        let scores = scorer(&s.state_features)?;
        if scores.len() != s.labels.len() {
            return Err(shape_err("scorer returned the wrong number of scores"));
        }
        let hits = scores
            .iter()
            .zip(&s.labels)
            .filter(|(&p, &y)| (p >= threshold) == (y == 1))
            .count();
        correct += hits;
        total += s.labels.len();
        if hits == s.labels.len() {
            exact += 1;
        }
    }
    Ok(Accuracy {
        elementwise: correct as f64 / total as f64,
        exact_match: exact as f64 / test.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::questions::{build_catalog, default_catalog, Question, Relation};

    fn two_color() -> QuestionCatalog {
        build_catalog(&["red", "cyan"], &Relation::ALL).unwrap()
    }

    fn arena2() -> ArenaConfig {
        ArenaConfig {
            num_objects: 2,
            ..ArenaConfig::default()
        }
    }

    fn scene(points: &[[f64; 2]]) -> WorldState {
        WorldState {
            positions: points.to_vec(),
            color_ids: (0..points.len()).collect(),
            step_count: 0,
        }
    }

    #[test]
    fn label_flippable_by_one_push() {
        let cat = two_color();
        let s = scene(&[[0.1, 0.0], [0.0, 0.0]]);
        let (labels, witnesses) = flip_labels(&s, &arena2(), &cat).unwrap();
        let i = cat.index_of(&Question::new(0, 1, Relation::Left)).unwrap();
        assert_eq!(labels[i], 1);
        // Red pushed north-west (action 3) lands at x = 0.1 - 0.106 < 0, the
        // first flip in ascending action order.
        assert_eq!(witnesses[i], Some(ActionId(3)));
        // Cyan pushed east flips it too.
        let moved = crate::world::step(&s, ActionId(8), &arena2()).unwrap();
        assert!(!answer(&moved, &cat.questions()[i]).unwrap());
    }

    #[test]
    fn label_out_of_reach() {
        let cat = two_color();
        let s = scene(&[[-0.9, 0.0], [0.9, 0.0]]);
        let (labels, witnesses) = flip_labels(&s, &arena2(), &cat).unwrap();
        let i = cat.index_of(&Question::new(0, 1, Relation::Left)).unwrap();
        assert_eq!(labels[i], 0);
        assert_eq!(witnesses[i], None);
    }

    #[test]
    fn witnesses_replay() {
        let cat = default_catalog();
        let arena = ArenaConfig::default();
        for idx in 0..20 {
            let state = sample_state(&arena, 77, idx).unwrap();
            let (labels, witnesses) = flip_labels(&state, &arena, &cat).unwrap();
            for (i, q) in cat.questions().iter().enumerate() {
                assert_eq!(labels[i] == 1, witnesses[i].is_some());
                if let Some(a) = witnesses[i] {
                    let next = crate::world::step(&state, a, &arena).unwrap();
                    assert_ne!(answer(&next, q).unwrap(), answer(&state, q).unwrap());
                }
            }
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let cat = default_catalog();
        let arena = ArenaConfig::default();
        let a = generate_dataset(&arena, &cat, 25, 3).unwrap();
        let b = generate_dataset(&arena, &cat, 25, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(&arena, &cat, 25, 4).unwrap());
        a.validate().unwrap();
        for s in &a.samples {
            assert!(s.state_features.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn split_sizes() {
        let cat = default_catalog();
        let data = generate_dataset(&ArenaConfig::default(), &cat, 50, 1).unwrap();
        let (tr, te) = split_dataset(&data, 0.9, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (45, 5));
        let (tr2, te2) = split_dataset(&data, 0.9, 5).unwrap();
        assert_eq!((tr, te), (tr2, te2));
        assert!(split_dataset(&data, 1.0, 5).is_err());
        assert!(split_dataset(&data, 0.001, 5).is_err());
    }

    #[test]
    fn fused_scores_match_unfused_decoder() {
        let cat = default_catalog();
        let model = RelevanceModel::init(10, &cat, &ClassifierHyper::default(), 9).unwrap();
        let f = sample_state(&ArenaConfig::default(), 1, 0).unwrap().normalized_features(1.0);
        let fast = predict_scores(&model, &f, &cat).unwrap();
        let slow = predict_scores_unfused(&model, &f, &cat).unwrap();
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-12);
            assert!(*x > 0.0 && *x < 1.0);
        }
    }

    #[test]
    fn scores_follow_catalog_permutation() {
        let cat = default_catalog();
        let model = RelevanceModel::init(10, &cat, &ClassifierHyper::default(), 9).unwrap();
        let f = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 0.0];
        let base = predict_scores(&model, &f, &cat).unwrap();
        assert_eq!(base, predict_scores(&model, &f, &cat).unwrap());
        // Reversed palette gives a catalog over the same questions in another order.
        let mut colors: Vec<&str> = crate::questions::DEFAULT_PALETTE.to_vec();
        colors.reverse();
        let rev = build_catalog(&colors, &Relation::ALL).unwrap();
        // Same one-hot encodings require the same color ids, so map by name.
        let scores_rev = predict_scores(&model, &f, &rev).unwrap();
        for (j, q) in rev.questions().iter().enumerate() {
            let mut enc = [0.0; 14];
            rev.encode(q, &mut enc);
            let same = cat
                .questions()
                .iter()
                .position(|p| {
                    let mut e = [0.0; 14];
                    cat.encode(p, &mut e);
                    e == enc
                })
                .unwrap();
            assert_eq!(scores_rev[j].to_bits(), base[same].to_bits());
        }
        assert!(predict_scores(&model, &f[..8], &cat).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cat = default_catalog();
        let data = generate_dataset(&ArenaConfig::default(), &cat, 4, 1).unwrap();
        let hyper = ClassifierHyper {
            epochs: 0,
            ..ClassifierHyper::default()
        };
        let trained = train_classifier(&data, &cat, &hyper, 5).unwrap();
        assert_eq!(trained.model, RelevanceModel::init(10, &cat, &hyper, 5).unwrap());
        assert!(trained.loss_history.is_empty());
    }

    #[test]
    fn batch_gradients_match_finite_differences() {
        let cat = two_color();
        let data = generate_dataset(&arena2(), &cat, 3, 2).unwrap();
        let hyper = ClassifierHyper::default();
        let model = RelevanceModel::init(4, &cat, &hyper, 1).unwrap();
        let (loss_sum, grads) = batch_gradients(&model, &data, &[0, 1, 2], &question_matrix(&cat)).unwrap();
        let mean = dataset_loss(&model, &data, &cat).unwrap();
        assert!((loss_sum / 24.0 - mean).abs() < 1e-12);

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (net, g) in grads.iter().enumerate() {
            for k in 0..g.len() {
                for i in (0..g[k].len()).step_by(5) {
                    let bump = |delta: f64| {
                        let mut m = model.clone();
                        let target = match net {
                            0 => &mut m.state_encoder,
                            1 => &mut m.question_encoder,
                            _ => &mut m.decoder,
                        };
                        target.params_mut()[k].values[i] += delta;
                        dataset_loss(&m, &data, &cat).unwrap()
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let rel = (fd - g[k][i]).abs() / fd.abs().max(g[k][i].abs()).max(1e-6);
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn accuracy_conventions() {
        let cat = default_catalog();
        let data = generate_dataset(&ArenaConfig::default(), &cat, 10, 1).unwrap();
        let perfect = evaluate_with(&data, 0.5, |f| {
            let s = data.samples.iter().find(|s| s.state_features == f).unwrap();
            Ok(s.labels.iter().map(|&b| b as f64).collect())
        })
        .unwrap();
        assert_eq!(perfect.elementwise, 1.0);
        assert_eq!(perfect.exact_match, 1.0);

        let half = evaluate_with(&data, 0.5, |_| Ok(vec![0.5; 80])).unwrap();
        let ones: usize = data.samples.iter().map(|s| s.labels.iter().filter(|&&b| b == 1).count()).sum();
        assert!((half.elementwise - ones as f64 / 800.0).abs() < 1e-12);
    }
}
