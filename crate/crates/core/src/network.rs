//! Fully-connected ReLU networks: parsing, exact evaluation and interval
//! (box) evaluation.
//!
//! Evaluation follows the usual pipeline: inputs are normalized per node as
//! `(x - mean) / range`, every layer applies `y_j = b_j + sum_i w_ij * x_i`,
//! hidden layers clamp with `max(0, y)`, and the final scores are mapped back
//! through `y * out_range + out_mean`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{from_json_str, Error, Result};

/// How the final layer scores are turned into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputConvention {
    Argmax,
    Argmin,
    /// Scores are consumed directly (safety properties).
    Raw,
}

/// Which score space a property is evaluated in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputSpace {
    /// After output inverse-normalization.
    #[default]
    Denormalized,
    /// Raw last-layer values, before inverse-normalization.
    Normalized,
}

/// One affine layer. Weights are stored row-major by output neuron:
/// `weights[j * inputs + i]` connects input `i` to neuron `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidNetwork("layer sizes must be >= 1".into()));
        }
        if weights.len() != inputs * outputs {
            return Err(Error::dim("layer weights", inputs * outputs, weights.len()));
        }
        if bias.len() != outputs {
            return Err(Error::dim("layer bias", outputs, bias.len()));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite weight or bias".into()));
        }
        Ok(Layer {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Weight from input `i` to neuron `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.inputs + i]
    }

    pub fn bias(&self, j: usize) -> f64 {
        self.bias[j]
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    /// Returns false if any pre-activation is non-finite (checked before
    /// ReLU, which would otherwise map NaN to zero).
    fn apply(&self, x: &[f64], out: &mut Vec<f64>, relu: bool) -> bool {
        out.clear();
        let mut finite = true;
        for j in 0..self.outputs {
            let mut acc = self.bias[j];
            for (w, v) in self.row(j).iter().zip(x) {
                acc += w * v;
            }
            finite &= acc.is_finite();
            out.push(if relu { acc.max(0.0) } else { acc });
        }
        finite
    }

    // Same summation order as `apply`, so a degenerate box reproduces the
    // point evaluation bit for bit.
    fn apply_interval(
        &self,
        lo: &[f64],
        hi: &[f64],
        out_lo: &mut Vec<f64>,
        out_hi: &mut Vec<f64>,
        relu: bool,
    ) -> bool {
        out_lo.clear();
        out_hi.clear();
        let mut finite = true;
        for j in 0..self.outputs {
            let mut acc_lo = self.bias[j];
            let mut acc_hi = self.bias[j];
            for ((w, l), h) in self.row(j).iter().zip(lo).zip(hi) {
                if *w >= 0.0 {
                    acc_lo += w * l;
                    acc_hi += w * h;
                } else {
                    acc_lo += w * h;
                    acc_hi += w * l;
                }
            }
            finite &= acc_lo.is_finite() && acc_hi.is_finite();
            if relu {
                acc_lo = acc_lo.max(0.0);
                acc_hi = acc_hi.max(0.0);
            }
            out_lo.push(acc_lo);
            out_hi.push(acc_hi);
        }
        finite
    }
}

/// Axis-aligned input region in denormalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = InputBox { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn point(x: &[f64]) -> Self {
        InputBox {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::dim("box upper bounds", self.lower.len(), self.upper.len()));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidProperty(format!(
                    "box node {i}: lower {l} exceeds upper {u}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if l == u { *l } else { l + (u - l) / 2.0 })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn is_subset_of(&self, other: &InputBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }

    /// Bisect along `dim` at the midpoint.
    pub fn bisect(&self, dim: usize) -> (InputBox, InputBox) {
        let mid = self.lower[dim] + self.width(dim) / 2.0;
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = mid;
        right.lower[dim] = mid;
        (left, right)
    }
}

/// Per-output score bounds returned by [`Network::forward_interval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl OutputBox {
    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.lower.len()
            && y
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn is_subset_of(&self, other: &OutputBox) -> bool {
        self.lower.len() == other.lower.len()
            && (0..self.lower.len())
                .all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    output_relu: bool,
    convention: OutputConvention,
    input_mean: Vec<f64>,
    input_range: Vec<f64>,
    output_mean: f64,
    output_range: f64,
    input_min: Option<Vec<f64>>,
    input_max: Option<Vec<f64>>,
}

/// Builder-style description used by both parsers.
#[derive(Debug, Clone)]
pub struct NetworkParts {
    pub layers: Vec<Layer>,
    pub output_relu: bool,
    pub convention: OutputConvention,
    pub input_mean: Vec<f64>,
    pub input_range: Vec<f64>,
    pub output_mean: f64,
    pub output_range: f64,
    pub input_min: Option<Vec<f64>>,
    pub input_max: Option<Vec<f64>>,
}

impl NetworkParts {
    /// Unit normalization, no output ReLU.
    pub fn plain(layers: Vec<Layer>, convention: OutputConvention) -> Self {
        let n0 = layers.first().map_or(0, Layer::inputs);
        NetworkParts {
            layers,
            output_relu: false,
            convention,
            input_mean: vec![0.0; n0],
            input_range: vec![1.0; n0],
            output_mean: 0.0,
            output_range: 1.0,
            input_min: None,
            input_max: None,
        }
    }
}

impl Network {
    pub fn new(parts: NetworkParts) -> Result<Self> {
        let NetworkParts {
            layers,
            output_relu,
            convention,
            input_mean,
            input_range,
            output_mean,
            output_range,
            input_min,
            input_max,
        } = parts;
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("at least one layer is required".into()));
        }
        let mut layer_sizes = vec![layers[0].inputs()];
        for (k, layer) in layers.iter().enumerate() {
            let prev = *layer_sizes.last().unwrap();
            if layer.inputs() != prev {
                return Err(Error::dim(format!("layer {} inputs", k + 1), prev, layer.inputs()));
            }
            layer_sizes.push(layer.outputs());
        }
        let n0 = layer_sizes[0];
        if input_mean.len() != n0 {
            return Err(Error::dim("input means", n0, input_mean.len()));
        }
        if input_range.len() != n0 {
            return Err(Error::dim("input ranges", n0, input_range.len()));
        }
        for (i, r) in input_range.iter().enumerate() {
            if *r == 0.0 || !r.is_finite() {
                return Err(Error::InvalidNetwork(format!("input range {i} must be finite and non-zero")));
            }
        }
        if input_mean.iter().any(|m| !m.is_finite()) || !output_mean.is_finite() {
            return Err(Error::InvalidNetwork("normalization means must be finite".into()));
        }
        if output_range == 0.0 || !output_range.is_finite() {
            return Err(Error::InvalidNetwork("output range must be finite and non-zero".into()));
        }
        for (name, v) in [("input minimums", &input_min), ("input maximums", &input_max)] {
            if let Some(v) = v {
                if v.len() != n0 {
                    return Err(Error::dim(name, n0, v.len()));
                }
            }
        }
        Ok(Network {
            layer_sizes,
            layers,
            output_relu,
            convention,
            input_mean,
            input_range,
            output_mean,
            output_range,
            input_min,
            input_max,
        })
    }

    /// Number of affine layers (hidden + output).
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn convention(&self) -> OutputConvention {
        self.convention
    }

    pub fn output_relu(&self) -> bool {
        self.output_relu
    }

    pub fn with_convention(mut self, convention: OutputConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn input_mean(&self) -> &[f64] {
        &self.input_mean
    }

    pub fn input_range(&self) -> &[f64] {
        &self.input_range
    }

    pub fn output_mean(&self) -> f64 {
        self.output_mean
    }

    pub fn output_range(&self) -> f64 {
        self.output_range
    }

    /// Declared input domain, when the source format carries one.
    pub fn input_domain(&self) -> Option<InputBox> {
        match (&self.input_min, &self.input_max) {
            (Some(lo), Some(hi)) => Some(InputBox {
                lower: lo.clone(),
                upper: hi.clone(),
            }),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.inputs() * l.outputs() + l.outputs())
            .sum()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_size() {
            return Err(Error::dim("network input", self.input_size(), len));
        }
        Ok(())
    }

    pub fn normalize_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        Ok(x.iter()
            .zip(self.input_mean.iter().zip(&self.input_range))
            .map(|(v, (m, r))| (v - m) / r)
            .collect())
    }

    /// Scores in denormalized units.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_in(x, OutputSpace::Denormalized)
    }

    pub fn forward_in(&self, x: &[f64], space: OutputSpace) -> Result<Vec<f64>> {
        let mut cur = self.normalize_input(x)?;
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: 0 });
        }
        let mut next = Vec::with_capacity(cur.len());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            if !layer.apply(&cur, &mut next, k < last || self.output_relu) {
                return Err(Error::NonFinite { layer: k + 1 });
            }
            std::mem::swap(&mut cur, &mut next);
        }
        if space == OutputSpace::Denormalized {
            for v in &mut cur {
                *v = *v * self.output_range + self.output_mean;
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: self.layers.len() });
            }
        }
        Ok(cur)
    }

    /// Decision for ARGMAX / ARGMIN networks. Ties go to the lowest index.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let scores = self.forward(x)?;
        decide(self.convention, &scores)
    }

    /// Sound bounds: for every `x` in `region`, `forward(x)` lies within the
    /// returned box componentwise.
    pub fn forward_interval(&self, region: &InputBox) -> Result<OutputBox> {
        self.forward_interval_in(region, OutputSpace::Denormalized)
    }

    pub fn forward_interval_in(&self, region: &InputBox, space: OutputSpace) -> Result<OutputBox> {
        self.check_input(region.dim())?;
        let mut lo = Vec::with_capacity(region.dim());
        let mut hi = Vec::with_capacity(region.dim());
        for i in 0..region.dim() {
            let (m, r) = (self.input_mean[i], self.input_range[i]);
            let a = (region.lower[i] - m) / r;
            let b = (region.upper[i] - m) / r;
            if r > 0.0 {
                lo.push(a);
                hi.push(b);
            } else {
                lo.push(b);
                hi.push(a);
            }
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: 0 });
        }
        let (mut nlo, mut nhi) = (Vec::new(), Vec::new());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            if !layer.apply_interval(&lo, &hi, &mut nlo, &mut nhi, k < last || self.output_relu) {
                return Err(Error::NonFinite { layer: k + 1 });
            }
            std::mem::swap(&mut lo, &mut nlo);
            std::mem::swap(&mut hi, &mut nhi);
        }
        if space == OutputSpace::Denormalized {
            let (m, r) = (self.output_mean, self.output_range);
            for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
                let a = *l * r + m;
                let b = *h * r + m;
                if r > 0.0 {
                    (*l, *h) = (a, b);
                } else {
                    (*l, *h) = (b, a);
                }
            }
        }
        Ok(OutputBox { lower: lo, upper: hi })
    }

    /// Stable content hash (hex SHA-256 of the canonical JSON form).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&NetworkJson::from(self)).expect("network serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkJson::from(self)).expect("network serializes")
    }

    /// Write in the `.nnet` text layout. Missing input bounds are written as
    /// `±f64::MAX`.
    pub fn to_nnet(&self) -> String {
        fn row(out: &mut String, vals: impl IntoIterator<Item = f64>) {
            for v in vals {
                let _ = write!(out, "{v:?},");
            }
            out.push('\n');
        }
        let n0 = self.input_size();
        let mut out = String::from("// written by nnverif\n");
        let max_size = self.layer_sizes.iter().max().copied().unwrap_or(0);
        let _ = writeln!(out, "{},{},{},{},", self.layers.len(), n0, self.output_size(), max_size);
        for s in &self.layer_sizes {
            let _ = write!(out, "{s},");
        }
        out.push_str("\n0,\n");
        let mins = self.input_min.clone().unwrap_or_else(|| vec![-f64::MAX; n0]);
        let maxs = self.input_max.clone().unwrap_or_else(|| vec![f64::MAX; n0]);
        row(&mut out, mins);
        row(&mut out, maxs);
        row(&mut out, self.input_mean.iter().copied().chain([self.output_mean]));
        row(&mut out, self.input_range.iter().copied().chain([self.output_range]));
        for layer in &self.layers {
            for j in 0..layer.outputs() {
                row(&mut out, layer.row(j).iter().copied());
            }
            for j in 0..layer.outputs() {
                row(&mut out, [layer.bias(j)]);
            }
        }
        out
    }
}

/// Apply an output convention to a score vector.
pub fn decide(convention: OutputConvention, scores: &[f64]) -> Result<usize> {
    let better: fn(f64, f64) -> bool = match convention {
        OutputConvention::Argmax => |a, b| a > b,
        OutputConvention::Argmin => |a, b| a < b,
        OutputConvention::Raw => return Err(Error::RawConvention),
    };
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if better(s, scores[best]) {
            best = j;
        }
    }
    Ok(best)
}

fn default_output_mean() -> f64 {
    0.0
}

fn default_output_range() -> f64 {
    1.0
}

fn default_convention() -> OutputConvention {
    OutputConvention::Argmax
}

/// JSON network schema, version 1.
///
/// `weights[k][j][i]` is the weight from input `i` of layer `k` to neuron
/// `j` of layer `k + 1`; `biases[k][j]` is the bias of that neuron.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkJson {
    pub format: u32,
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default)]
    pub output_relu: bool,
    #[serde(default = "default_convention")]
    pub output_convention: OutputConvention,
    pub input_mean: Vec<f64>,
    pub input_range: Vec<f64>,
    #[serde(default = "default_output_mean")]
    pub output_mean: f64,
    #[serde(default = "default_output_range")]
    pub output_range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_max: Option<Vec<f64>>,
}

impl From<&Network> for NetworkJson {
    fn from(net: &Network) -> Self {
        NetworkJson {
            format: 1,
            layer_sizes: net.layer_sizes.clone(),
            weights: net
                .layers
                .iter()
                .map(|l| (0..l.outputs()).map(|j| l.row(j).to_vec()).collect())
                .collect(),
            biases: net.layers.iter().map(|l| l.bias.clone()).collect(),
            output_relu: net.output_relu,
            output_convention: net.convention,
            input_mean: net.input_mean.clone(),
            input_range: net.input_range.clone(),
            output_mean: net.output_mean,
            output_range: net.output_range,
            input_min: net.input_min.clone(),
            input_max: net.input_max.clone(),
        }
    }
}

impl TryFrom<NetworkJson> for Network {
    type Error = Error;

    fn try_from(doc: NetworkJson) -> Result<Self> {
        let schema = |path: String, message: String| Error::Schema { path, message };
        if doc.format != 1 {
            return Err(schema("format".into(), format!("unsupported format {}", doc.format)));
        }
        if doc.layer_sizes.len() < 2 {
            return Err(schema("layer_sizes".into(), "need at least input and output sizes".into()));
        }
        let layer_count = doc.layer_sizes.len() - 1;
        if doc.weights.len() != layer_count {
            return Err(schema(
                "weights".into(),
                format!("expected {layer_count} layers, found {}", doc.weights.len()),
            ));
        }
        if doc.biases.len() != layer_count {
            return Err(schema(
                "biases".into(),
                format!("expected {layer_count} layers, found {}", doc.biases.len()),
            ));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for k in 0..layer_count {
            let (n_in, n_out) = (doc.layer_sizes[k], doc.layer_sizes[k + 1]);
            let rows = &doc.weights[k];
            if rows.len() != n_out {
                return Err(schema(
                    format!("weights[{k}]"),
                    format!("expected {n_out} rows, found {}", rows.len()),
                ));
            }
            let mut flat = Vec::with_capacity(n_in * n_out);
            for (j, r) in rows.iter().enumerate() {
                if r.len() != n_in {
                    return Err(schema(
                        format!("weights[{k}][{j}]"),
                        format!("expected {n_in} values, found {}", r.len()),
                    ));
                }
                flat.extend_from_slice(r);
            }
            let bias = doc.biases[k].clone();
            if bias.len() != n_out {
                return Err(schema(
                    format!("biases[{k}]"),
                    format!("expected {n_out} values, found {}", bias.len()),
                ));
            }
            layers.push(Layer::new(n_in, n_out, flat, bias)?);
        }
        Network::new(NetworkParts {
            layers,
            output_relu: doc.output_relu,
            convention: doc.output_convention,
            input_mean: doc.input_mean,
            input_range: doc.input_range,
            output_mean: doc.output_mean,
            output_range: doc.output_range,
            input_min: doc.input_min,
            input_max: doc.input_max,
        })
    }
}

pub fn parse_json_net(text: &str) -> Result<Network> {
    let doc: NetworkJson = from_json_str(text)?;
    Network::try_from(doc)
}

/// Parse the ACAS Xu `.nnet` text layout. The result uses the RAW output
/// convention.
pub fn parse_nnet(text: &str) -> Result<Network> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"));

    let mut next_row = |what: &str| -> Result<(usize, Vec<f64>)> {
        let (line, content) = lines.next().ok_or_else(|| Error::Parse {
            line: text.lines().count() + 1,
            message: format!("unexpected end of file while reading {what}"),
        })?;
        let vals = content
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric token `{t}` in {what}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((line, vals))
    };
    let expect_len = |line: usize, vals: &[f64], n: usize, what: &str| -> Result<()> {
        if vals.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("dimension mismatch in {what}: expected {n} values, found {}", vals.len()),
            });
        }
        Ok(())
    };
    let as_count = |line: usize, v: f64, what: &str| -> Result<usize> {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("{what} must be a positive integer, found {v}"),
            });
        }
        Ok(v as usize)
    };

    let (line, header) = next_row("header")?;
    if header.len() < 4 {
        return Err(Error::Parse {
            line,
            message: format!("malformed header: expected 4 values, found {}", header.len()),
        });
    }
    let num_layers = as_count(line, header[0], "layer count")?;
    let input_size = as_count(line, header[1], "input size")?;
    let output_size = as_count(line, header[2], "output size")?;

    let (line, sizes) = next_row("layer sizes")?;
    expect_len(line, &sizes, num_layers + 1, "layer sizes")?;
    let sizes = sizes
        .iter()
        .map(|&v| as_count(line, v, "layer size"))
        .collect::<Result<Vec<_>>>()?;
    if sizes[0] != input_size || sizes[num_layers] != output_size {
        return Err(Error::Parse {
            line,
            message: "layer sizes disagree with header input/output sizes".into(),
        });
    }

    let _symmetric = next_row("symmetric flag")?;
    let (line, mins) = next_row("input minimums")?;
    expect_len(line, &mins, input_size, "input minimums")?;
    let (line, maxs) = next_row("input maximums")?;
    expect_len(line, &maxs, input_size, "input maximums")?;
    let (line, mut means) = next_row("means")?;
    expect_len(line, &means, input_size + 1, "means")?;
    let (line, mut ranges) = next_row("ranges")?;
    expect_len(line, &ranges, input_size + 1, "ranges")?;
    let output_mean = means.pop().unwrap();
    let output_range = ranges.pop().unwrap();

    let mut layers = Vec::with_capacity(num_layers);
    for k in 1..=num_layers {
        let (n_in, n_out) = (sizes[k - 1], sizes[k]);
        let mut weights = Vec::with_capacity(n_in * n_out);
        for j in 0..n_out {
            let (line, row) = next_row(&format!("layer {k} weight row {j}"))?;
            expect_len(line, &row, n_in, &format!("layer {k} weight row {j}"))?;
            weights.extend(row);
        }
        let mut bias = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let (line, row) = next_row(&format!("layer {k} bias {j}"))?;
            expect_len(line, &row, 1, &format!("layer {k} bias {j}"))?;
            bias.push(row[0]);
        }
        layers.push(Layer::new(n_in, n_out, weights, bias)?);
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            message: "unexpected trailing data after the last layer".into(),
        });
    }

    Network::new(NetworkParts {
        layers,
        output_relu: false,
        convention: OutputConvention::Raw,
        input_mean: means,
        input_range: ranges,
        output_mean,
        output_range,
        input_min: Some(mins),
        input_max: Some(maxs),
    })
}
