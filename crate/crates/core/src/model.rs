//! Two spectral convolution layers, a pooling layer and a linear softmax head.
//!
//! A convolution layer maps node features `H` (`M × P_in`) to
//! `U · K(Uᵀ H)`, where `U` is the graph Fourier basis and `K` is the
//! learnable spectral kernel applied to every spectral row with shared
//! weights:
//!
//! * [`ConvMode::MlpKernel`]: `relu(row · W1 + b1) · W2 + b2`.
//! * [`ConvMode::LinearKernel`]: `row · W`. Because `U` is orthonormal this
//!   layer equals the plain linear map `H · W`; the spectral transform has no
//!   effect without a nonlinearity between `Uᵀ` and `U`.
//! * [`ConvMode::DiagonalGain`]: spectral row `k` is scaled by a learnable gain
//!   `g_k` and then mixed by `W`, i.e. a classic per-frequency filter.
//!
//! Two consequences of orthonormality are worth keeping in mind. The `U` that
//! closes layer one and the `Uᵀ` that opens layer two cancel exactly. And with
//! the combinatorial Laplacian the first eigenvector is the constant vector, so
//! sum (or mean) pooling of `U · Y` reads out only the zero-frequency row of `Y`,
//! scaled by `√M` (or `1/√M`). Max pooling sees every row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::xavier_init;
use crate::spectral::{basis_for, GraphSpec, LaplacianKind, SpectralBasis, Topology};
use crate::tensor::{PoolMode, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    MlpKernel,
    LinearKernel,
    DiagonalGain,
}

impl std::str::FromStr for ConvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mlp" | "mlp_kernel" => Ok(ConvMode::MlpKernel),
            "linear" | "linear_kernel" => Ok(ConvMode::LinearKernel),
            "diagonal" | "diagonal_gain" => Ok(ConvMode::DiagonalGain),
            other => Err(Error::Domain(format!("unknown conv mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ConvMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConvMode::MlpKernel => "mlp",
            ConvMode::LinearKernel => "linear",
            ConvMode::DiagonalGain => "diagonal",
        })
    }
}

pub fn parse_pool_mode(s: &str) -> Result<PoolMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "sum" => Ok(PoolMode::Sum),
        "mean" => Ok(PoolMode::Mean),
        "max" => Ok(PoolMode::Max),
        other => Err(Error::Domain(format!("unknown pooling '{other}'"))),
    }
}

pub fn pool_mode_name(mode: PoolMode) -> &'static str {
    match mode {
        PoolMode::Sum => "sum",
        PoolMode::Mean => "mean",
        PoolMode::Max => "max",
    }
}

/// Architecture hyperparameters.
///
/// `conv1_hidden` and `conv2_hidden` are the MLP hidden widths and are unused
/// by the other conv modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub topology: Topology,
    pub nodes: usize,
    pub laplacian: LaplacianKind,
    pub conv_mode: ConvMode,
    pub pooling: PoolMode,
    pub input_dim: usize,
    pub conv1_hidden: usize,
    pub conv1_out: usize,
    pub conv2_hidden: usize,
    pub embedding_dim: usize,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            topology: Topology::Cycle,
            nodes: 120,
            laplacian: LaplacianKind::Combinatorial,
            conv_mode: ConvMode::MlpKernel,
            pooling: PoolMode::Sum,
            input_dim: 35,
            conv1_hidden: 110,
            conv1_out: 110,
            conv2_hidden: 110,
            embedding_dim: 64,
            num_classes: 4,
        }
    }
}

impl ModelConfig {
    pub fn graph(&self) -> Result<GraphSpec> {
        GraphSpec::new(self.nodes, self.topology)
    }

    pub fn validate(&self) -> Result<()> {
        self.graph()?;
        let dims = [
            ("input_dim", self.input_dim),
            ("conv1_hidden", self.conv1_hidden),
            ("conv1_out", self.conv1_out),
            ("conv2_hidden", self.conv2_hidden),
            ("embedding_dim", self.embedding_dim),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Learnable weights of one spectral convolution layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SpectralConvLayer {
    MlpKernel {
        w1: Tensor,
        b1: Tensor,
        w2: Tensor,
        b2: Tensor,
    },
    LinearKernel {
        w: Tensor,
    },
    DiagonalGain {
        gains: Tensor,
        w: Tensor,
    },
}

impl SpectralConvLayer {
    /// Xavier-initialized weights, zero biases, unit gains.
    pub fn init<R: Rng + ?Sized>(
        mode: ConvMode,
        nodes: usize,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        match mode {
            ConvMode::MlpKernel => SpectralConvLayer::MlpKernel {
                w1: xavier_init(input, hidden, rng),
                b1: Tensor::zeros(1, hidden),
                w2: xavier_init(hidden, output, rng),
                b2: Tensor::zeros(1, output),
            },
            ConvMode::LinearKernel => SpectralConvLayer::LinearKernel {
                w: xavier_init(input, output, rng),
            },
            ConvMode::DiagonalGain => SpectralConvLayer::DiagonalGain {
                gains: Tensor::filled(nodes, 1, 1.0),
                w: xavier_init(input, output, rng),
            },
        }
    }

    pub fn mode(&self) -> ConvMode {
        match self {
            SpectralConvLayer::MlpKernel { .. } => ConvMode::MlpKernel,
            SpectralConvLayer::LinearKernel { .. } => ConvMode::LinearKernel,
            SpectralConvLayer::DiagonalGain { .. } => ConvMode::DiagonalGain,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SpectralConvLayer::MlpKernel { w1, .. } => w1.rows(),
            SpectralConvLayer::LinearKernel { w } | SpectralConvLayer::DiagonalGain { w, .. } => {
                w.rows()
            }
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SpectralConvLayer::MlpKernel { w2, .. } => w2.cols(),
            SpectralConvLayer::LinearKernel { w } | SpectralConvLayer::DiagonalGain { w, .. } => {
                w.cols()
            }
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            SpectralConvLayer::MlpKernel { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
            SpectralConvLayer::LinearKernel { w } => vec![w],
            SpectralConvLayer::DiagonalGain { gains, w } => vec![gains, w],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            SpectralConvLayer::MlpKernel { w1, b1, w2, b2 } => vec![w1, b1, w2, b2],
            SpectralConvLayer::LinearKernel { w } => vec![w],
            SpectralConvLayer::DiagonalGain { gains, w } => vec![gains, w],
        }
    }

    fn check_shapes(&self, nodes: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("inconsistent {what} in conv layer")));
        match self {
            SpectralConvLayer::MlpKernel { w1, b1, w2, b2 } => {
                if b1.shape() != (1, w1.cols()) || w2.rows() != w1.cols() {
                    return bad("hidden width");
                }
                if b2.shape() != (1, w2.cols()) {
                    return bad("output bias");
                }
            }
            SpectralConvLayer::LinearKernel { .. } => {}
            SpectralConvLayer::DiagonalGain { gains, .. } => {
                if gains.shape() != (nodes, 1) {
                    return bad("gain vector");
                }
            }
        }
        if self.tensors().iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("non-finite conv weights".into()));
        }
        Ok(())
    }

    fn record(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors()
            .into_iter()
            .map(|t| tape.param(t.clone()))
            .collect()
    }

    /// Records `U · K(Uᵀ H)` for every `M`-row block of `h`.
    fn record_forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        basis: &SpectralBasis,
        h: Var,
    ) -> Result<Var> {
        let m = basis.size();
        let u = basis.shared_u();
        let h_hat = tape.block_left_mul(u, true, h, m)?;
        let y = self.record_kernel(tape, vars, m, h_hat)?;
        tape.block_left_mul(u, false, y, m)
    }

    /// Records `K(Ĥ)` on spectral-domain rows.
    fn record_kernel(&self, tape: &mut Tape, vars: &[Var], m: usize, h_hat: Var) -> Result<Var> {
        match self {
            SpectralConvLayer::MlpKernel { .. } => {
                let (w1, b1, w2, b2) = (vars[0], vars[1], vars[2], vars[3]);
                let z = tape.affine(h_hat, w1, b1)?;
                let z = tape.relu(z);
                tape.affine(z, w2, b2)
            }
            SpectralConvLayer::LinearKernel { .. } => tape.matmul(h_hat, vars[0]),
            SpectralConvLayer::DiagonalGain { .. } => {
                let scaled = tape.scale_rows(h_hat, vars[0], m)?;
                tape.matmul(scaled, vars[1])
            }
        }
    }
}

/// Evaluates a single conv layer on one `M × P_in` signal.
pub fn conv_forward(
    layer: &SpectralConvLayer,
    basis: &SpectralBasis,
    h: &Tensor,
) -> Result<Tensor> {
    if h.rows() != basis.size() || h.cols() != layer.input_dim() {
        return Err(Error::shape(
            "conv_forward",
            (basis.size(), layer.input_dim()),
            h.shape(),
        ));
    }
    layer.check_shapes(basis.size())?;
    let mut tape = Tape::new();
    let vars = layer.record(&mut tape);
    let x = tape.constant(h.clone());
    let out = layer.record_forward(&mut tape, &vars, basis, x)?;
    Ok(tape.value(out).clone())
}

/// Column-wise pooling of one node-embedding matrix.
pub fn pool(h: &Tensor, mode: PoolMode) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(h.clone());
    let p = tape.pool(x, mode, h.rows())?;
    Ok(tape.value(p).clone())
}

/// Softmax output for one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Argmax of the probabilities, lowest index on ties.
    pub label: usize,
}

impl Prediction {
    pub fn from_logits(logits: &[f64]) -> Self {
        let lse = crate::tensor::log_sum_exp(logits);
        let probabilities: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
        let mut label = 0;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > probabilities[label] {
                label = i;
            }
        }
        Prediction {
            logits: logits.to_vec(),
            probabilities,
            label,
        }
    }
}

/// Mean cross-entropy `−log p(true class)` over a batch, from logits via
/// log-sum-exp. `labels` is a `B × C` one-hot matrix.
pub fn cross_entropy(predictions: &[Prediction], labels: &Tensor) -> Result<Tensor> {
    if predictions.is_empty() {
        return Err(Error::Domain("cross entropy of an empty batch".into()));
    }
    let c = predictions[0].logits.len();
    let mut logits = Vec::with_capacity(predictions.len() * c);
    for p in predictions {
        if p.logits.len() != c {
            return Err(Error::Domain("ragged logits in batch".into()));
        }
        logits.extend_from_slice(&p.logits);
    }
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::from_vec(predictions.len(), c, logits)?);
    let loss = tape.cross_entropy(z, labels)?;
    Ok(tape.value(loss).clone())
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Domain(format!("label {l} outside 0..{classes}")));
        }
        t.set(r, l, 1.0);
    }
    Ok(t)
}

/// Full set of learnable weights plus the fixed graph basis they act on.
#[derive(Clone, Debug)]
pub struct ModelParams {
    config: ModelConfig,
    basis: SpectralBasis,
    pub conv1: SpectralConvLayer,
    pub conv2: SpectralConvLayer,
    pub fc_w: Tensor,
    pub fc_b: Tensor,
}

/// Result of one forward/backward pass over a batch.
pub struct BatchGradients {
    pub loss: f64,
    pub logits: Tensor,
    /// One gradient per tensor in [`ModelParams::tensors`] order.
    pub grads: Vec<Tensor>,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let basis = basis_for(&config.graph()?, config.laplacian)?;
        let conv1 = SpectralConvLayer::init(
            config.conv_mode,
            config.nodes,
            config.input_dim,
            config.conv1_hidden,
            config.conv1_out,
            rng,
        );
        let conv2 = SpectralConvLayer::init(
            config.conv_mode,
            config.nodes,
            config.conv1_out,
            config.conv2_hidden,
            config.embedding_dim,
            rng,
        );
        let fc_w = xavier_init(config.embedding_dim, config.num_classes, rng);
        let fc_b = Tensor::zeros(1, config.num_classes);
        Ok(ModelParams {
            config,
            basis,
            conv1,
            conv2,
            fc_w,
            fc_b,
        })
    }

    /// Assembles a model from explicit weights, checking every shape.
    pub fn from_parts(
        config: ModelConfig,
        conv1: SpectralConvLayer,
        conv2: SpectralConvLayer,
        fc_w: Tensor,
        fc_b: Tensor,
    ) -> Result<Self> {
        config.validate()?;
        let basis = basis_for(&config.graph()?, config.laplacian)?;
        let model = ModelParams {
            config,
            basis,
            conv1,
            conv2,
            fc_w,
            fc_b,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let c = &self.config;
        let m = c.nodes;
        self.conv1.check_shapes(m)?;
        self.conv2.check_shapes(m)?;
        for layer in [&self.conv1, &self.conv2] {
            if layer.mode() != c.conv_mode {
                return Err(Error::Domain("conv layer mode disagrees with config".into()));
            }
        }
        let expect = [
            (self.conv1.input_dim(), c.input_dim, "conv1 input"),
            (self.conv1.output_dim(), c.conv1_out, "conv1 output"),
            (self.conv2.input_dim(), c.conv1_out, "conv2 input"),
            (self.conv2.output_dim(), c.embedding_dim, "conv2 output"),
            (self.fc_w.rows(), c.embedding_dim, "fc input"),
            (self.fc_w.cols(), c.num_classes, "fc output"),
        ];
        for (got, want, what) in expect {
            if got != want {
                return Err(Error::Domain(format!("{what} width {got}, expected {want}")));
            }
        }
        if self.fc_b.shape() != (1, c.num_classes) {
            return Err(Error::shape("fc bias", (1, c.num_classes), self.fc_b.shape()));
        }
        if !self.fc_w.is_finite() || !self.fc_b.is_finite() {
            return Err(Error::Numeric("non-finite classifier weights".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    /// Every learnable tensor in a fixed order: conv1, conv2, fc weight, fc bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.conv1.tensors();
        v.extend(self.conv2.tensors());
        v.push(&self.fc_w);
        v.push(&self.fc_b);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.conv1.tensors_mut();
        v.extend(self.conv2.tensors_mut());
        v.push(&mut self.fc_w);
        v.push(&mut self.fc_b);
        v
    }

    /// Number of learnable scalars.
    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let want = (self.config.nodes, self.config.input_dim);
        if x.shape() != want {
            return Err(Error::shape("model input", want, x.shape()));
        }
        Ok(())
    }

    /// Records the whole network on `tape` for a batch stacked row-wise
    /// (`B·M × P`). Returns the parameter vars and the `B × C` logits.
    fn record(&self, tape: &mut Tape, stacked: Tensor, fused: bool) -> Result<(Vec<Var>, Var)> {
        let m = self.config.nodes;
        let c1 = self.conv1.record(tape);
        let c2 = self.conv2.record(tape);
        let fw = tape.param(self.fc_w.clone());
        let fb = tape.param(self.fc_b.clone());
        let x = tape.constant(stacked);
        let g = if fused {
            // Uᵀ·U = I between the layers, and Σ_i (U·Y)_i = (1ᵀU)·Y.
            let u = self.basis.shared_u();
            let h_hat = tape.block_left_mul(u, true, x, m)?;
            let y1 = self.conv1.record_kernel(tape, &c1, m, h_hat)?;
            let y2 = self.conv2.record_kernel(tape, &c2, m, y1)?;
            match self.config.pooling {
                PoolMode::Max => {
                    let h2 = tape.block_left_mul(u, false, y2, m)?;
                    tape.pool(h2, PoolMode::Max, m)?
                }
                mode => {
                    let scale = if mode == PoolMode::Mean { 1.0 / m as f64 } else { 1.0 };
                    let weights = Tensor::from_fn(m, 1, |k, _| {
                        u.column(k).iter().sum::<f64>() * scale
                    });
                    let w = tape.constant(weights);
                    let weighted = tape.scale_rows(y2, w, m)?;
                    tape.pool(weighted, PoolMode::Sum, m)?
                }
            }
        } else {
            let h1 = self.conv1.record_forward(tape, &c1, &self.basis, x)?;
            let h2 = self.conv2.record_forward(tape, &c2, &self.basis, h1)?;
            tape.pool(h2, self.config.pooling, m)?
        };
        let logits = tape.affine(g, fw, fb)?;
        let mut vars = c1;
        vars.extend(c2);
        vars.extend([fw, fb]);
        Ok((vars, logits))
    }

    fn stack(&self, xs: &[&Tensor]) -> Result<Tensor> {
        if xs.is_empty() {
            return Err(Error::Domain("empty batch".into()));
        }
        for x in xs {
            self.check_input(x)?;
        }
        Tensor::vstack(xs)
    }

    /// Logits (`B × C`) for a batch of `M × P` feature matrices.
    pub fn logits(&self, xs: &[&Tensor]) -> Result<Tensor> {
        self.logits_with(xs, true)
    }

    /// Logits computed layer by layer, with every `U`/`Uᵀ` product carried
    /// out and pooling applied to the vertex-domain output. Agrees with
    /// [`ModelParams::logits`] up to rounding.
    pub fn reference_logits(&self, xs: &[&Tensor]) -> Result<Tensor> {
        self.logits_with(xs, false)
    }

    fn logits_with(&self, xs: &[&Tensor], fused: bool) -> Result<Tensor> {
        let stacked = self.stack(xs)?;
        let mut tape = Tape::new();
        let (_, logits) = self.record(&mut tape, stacked, fused)?;
        Ok(tape.value(logits).clone())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Prediction> {
        let z = self.logits(&[x])?;
        Ok(Prediction::from_logits(z.row(0)))
    }

    pub fn forward_batch(&self, xs: &[&Tensor]) -> Result<Vec<Prediction>> {
        let z = self.logits(xs)?;
        Ok((0..z.rows()).map(|r| Prediction::from_logits(z.row(r))).collect())
    }

    /// Mean cross-entropy over the batch and its gradient for every parameter.
    pub fn loss_and_gradients(&self, xs: &[&Tensor], labels: &[usize]) -> Result<BatchGradients> {
        if xs.len() != labels.len() {
            return Err(Error::Domain(format!(
                "{} inputs but {} labels",
                xs.len(),
                labels.len()
            )));
        }
        let targets = one_hot(labels, self.config.num_classes)?;
        let stacked = self.stack(xs)?;
        let mut tape = Tape::new();
        let (vars, logits) = self.record(&mut tape, stacked, true)?;
        let loss = tape.cross_entropy(logits, &targets)?;
        let mut grads = tape.backward(loss)?;
        let tensors = self.tensors();
        let grads = vars
            .iter()
            .zip(&tensors)
            .map(|(&v, t)| grads.take_or_zeros(v, t.shape()))
            .collect();
        Ok(BatchGradients {
            loss: tape.value(loss).get(0, 0),
            logits: tape.value(logits).clone(),
            grads,
        })
    }
}
