//! Robustness and safety properties, counterexamples, and the ACAS Xu
//! built-in safety properties.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{from_json_str, Error, Result};
use crate::network::{InputBox, Network, OutputBox, OutputConvention, OutputSpace};

/// Relative input noise: node `i` may move by `|x_i| * percent / 100`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub percent: f64,
    /// Nodes marked `false` stay fixed at their seed value.
    pub noisy_mask: Vec<bool>,
}

impl NoiseSpec {
    pub fn new(percent: f64, noisy_mask: Vec<bool>) -> Result<Self> {
        let spec = NoiseSpec { percent, noisy_mask };
        spec.validate()?;
        Ok(spec)
    }

    /// Noise on every node.
    pub fn uniform(percent: f64, nodes: usize) -> Result<Self> {
        Self::new(percent, vec![true; nodes])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.percent.is_finite() || self.percent < 0.0 {
            return Err(Error::InvalidProperty(format!(
                "noise percent must be finite and >= 0, got {}",
                self.percent
            )));
        }
        if !self.noisy_mask.iter().any(|&m| m) {
            return Err(Error::InvalidProperty("at least one node must be noisy".into()));
        }
        Ok(())
    }

    pub fn with_percent(&self, percent: f64) -> Result<Self> {
        Self::new(percent, self.noisy_mask.clone())
    }
}

/// L-infinity box of radius `|x_i| * N / 100` around the seed. Nodes whose
/// seed value is 0 therefore receive no noise.
pub fn noise_box(seed: &[f64], spec: &NoiseSpec) -> Result<InputBox> {
    spec.validate()?;
    if seed.len() != spec.noisy_mask.len() {
        return Err(Error::dim("noise mask", seed.len(), spec.noisy_mask.len()));
    }
    let (lower, upper) = seed
        .iter()
        .zip(&spec.noisy_mask)
        .map(|(&x, &noisy)| {
            if noisy {
                let r = x.abs() * spec.percent / 100.0;
                (x - r, x + r)
            } else {
                (x, x)
            }
        })
        .unzip();
    InputBox::new(lower, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProperty {
    pub id: String,
    pub seed: Vec<f64>,
    pub expected_class: usize,
    pub noise: NoiseSpec,
    /// Inputs removed from the search space by earlier counterexamples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<Vec<f64>>,
}

impl RobustnessProperty {
    /// The expected class is the network's decision at the seed.
    pub fn new(net: &Network, id: impl Into<String>, seed: Vec<f64>, noise: NoiseSpec) -> Result<Self> {
        if seed.len() != net.input_size() {
            return Err(Error::dim("seed input", net.input_size(), seed.len()));
        }
        let expected_class = net.classify(&seed)?;
        let prop = RobustnessProperty {
            id: id.into(),
            seed,
            expected_class,
            noise,
            excluded: Vec::new(),
        };
        noise_box(&prop.seed, &prop.noise)?;
        Ok(prop)
    }

    pub fn search_box(&self) -> Result<InputBox> {
        noise_box(&self.seed, &self.noise)
    }

    pub fn with_percent(&self, percent: f64) -> Result<Self> {
        Ok(RobustnessProperty {
            noise: self.noise.with_percent(percent)?,
            excluded: Vec::new(),
            ..self.clone()
        })
    }
}

/// True iff the network still assigns the expected class at `x`.
pub fn holds_robust(net: &Network, prop: &RobustnessProperty, x: &[f64]) -> Result<bool> {
    Ok(net.classify(x)? == prop.expected_class)
}

/// Output constraint tree. Indices are 0-based output nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Constraint {
    /// `o[a] < o[b]`
    Lt { a: usize, b: usize },
    /// `o[a] > o[b]`
    Gt { a: usize, b: usize },
    /// `o[index] <= value`
    Le { index: usize, value: f64 },
    /// `o[index] >= value`
    Ge { index: usize, value: f64 },
    And { args: Vec<Constraint> },
    Or { args: Vec<Constraint> },
}

impl Constraint {
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Constraint::Lt { a, b } | Constraint::Gt { a, b } => Some(*a.max(b)),
            Constraint::Le { index, .. } | Constraint::Ge { index, .. } => Some(*index),
            Constraint::And { args } | Constraint::Or { args } => args.iter().filter_map(Constraint::max_index).max(),
        }
    }

    pub fn eval(&self, o: &[f64]) -> Result<bool> {
        let get = |i: usize| {
            o.get(i).copied().ok_or(Error::OutputIndex {
                index: i,
                outputs: o.len(),
            })
        };
        Ok(match self {
            Constraint::Lt { a, b } => get(*a)? < get(*b)?,
            Constraint::Gt { a, b } => get(*a)? > get(*b)?,
            Constraint::Le { index, value } => get(*index)? <= *value,
            Constraint::Ge { index, value } => get(*index)? >= *value,
            Constraint::And { args } => {
                for c in args {
                    if !c.eval(o)? {
                        return Ok(false);
                    }
                }
                true
            }
            Constraint::Or { args } => {
                for c in args {
                    if c.eval(o)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    /// True only if the constraint holds for every score vector in `bounds`.
    pub fn proven_by(&self, bounds: &OutputBox) -> bool {
        let (lo, hi) = (&bounds.lower, &bounds.upper);
        match self {
            Constraint::Lt { a, b } => hi[*a] < lo[*b],
            Constraint::Gt { a, b } => lo[*a] > hi[*b],
            Constraint::Le { index, value } => hi[*index] <= *value,
            Constraint::Ge { index, value } => lo[*index] >= *value,
            Constraint::And { args } => args.iter().all(|c| c.proven_by(bounds)),
            Constraint::Or { args } => args.iter().any(|c| c.proven_by(bounds)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyProperty {
    pub id: String,
    /// Valid input domain; equality pins are degenerate intervals.
    pub input_box: InputBox,
    /// Must hold for every input in the box. Verification searches for
    /// inputs where it fails.
    pub constraint: Constraint,
    #[serde(default)]
    pub output_space: OutputSpace,
}

impl SafetyProperty {
    pub fn contains_input(&self, x: &[f64]) -> bool {
        self.input_box.contains(x)
    }

    pub fn validate_for(&self, net: &Network) -> Result<()> {
        self.input_box.validate()?;
        if self.input_box.dim() != net.input_size() {
            return Err(Error::dim("safety input box", net.input_size(), self.input_box.dim()));
        }
        if let Some(i) = self.constraint.max_index() {
            if i >= net.output_size() {
                return Err(Error::OutputIndex {
                    index: i,
                    outputs: net.output_size(),
                });
            }
        }
        Ok(())
    }
}

/// Evaluate a safety constraint on raw scores.
pub fn holds_safe(outputs: &[f64], prop: &SafetyProperty) -> Result<bool> {
    prop.constraint.eval(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    Class(usize),
    Scores(Vec<f64>),
}

/// A concrete input that violates a property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub property_id: String,
    pub input: Vec<f64>,
    /// `input - seed`; robustness counterexamples only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_vector: Option<Vec<f64>>,
    pub observed: Observation,
    /// Unix time in milliseconds.
    pub timestamp: u64,
}

pub(crate) fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Either kind of property, as accepted by the engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Property {
    Robustness(RobustnessProperty),
    Safety(SafetyProperty),
}

impl From<RobustnessProperty> for Property {
    fn from(p: RobustnessProperty) -> Self {
        Property::Robustness(p)
    }
}

impl From<SafetyProperty> for Property {
    fn from(p: SafetyProperty) -> Self {
        Property::Safety(p)
    }
}

impl Property {
    pub fn id(&self) -> &str {
        match self {
            Property::Robustness(p) => &p.id,
            Property::Safety(p) => &p.id,
        }
    }

    pub fn search_box(&self) -> Result<InputBox> {
        match self {
            Property::Robustness(p) => p.search_box(),
            Property::Safety(p) => {
                p.input_box.validate()?;
                Ok(p.input_box.clone())
            }
        }
    }

    pub fn excluded(&self) -> &[Vec<f64>] {
        match self {
            Property::Robustness(p) => &p.excluded,
            Property::Safety(_) => &[],
        }
    }

    pub fn validate_for(&self, net: &Network) -> Result<()> {
        match self {
            Property::Robustness(p) => {
                if p.seed.len() != net.input_size() {
                    return Err(Error::dim("seed input", net.input_size(), p.seed.len()));
                }
                if net.convention() == OutputConvention::Raw {
                    return Err(Error::RawConvention);
                }
                if p.expected_class >= net.output_size() {
                    return Err(Error::OutputIndex {
                        index: p.expected_class,
                        outputs: net.output_size(),
                    });
                }
                p.search_box().map(|_| ())
            }
            Property::Safety(p) => p.validate_for(net),
        }
    }

    /// `Some(observation)` when `x` violates the property.
    pub fn check_point(&self, net: &Network, x: &[f64]) -> Result<Option<Observation>> {
        match self {
            Property::Robustness(p) => {
                let class = net.classify(x)?;
                Ok((class != p.expected_class).then_some(Observation::Class(class)))
            }
            Property::Safety(p) => {
                let scores = net.forward_in(x, p.output_space)?;
                Ok((!holds_safe(&scores, p)?).then_some(Observation::Scores(scores)))
            }
        }
    }

    /// True only if no input in `region` can violate the property.
    pub fn proven_on(&self, net: &Network, region: &InputBox) -> Result<bool> {
        match self {
            Property::Robustness(p) => {
                let b = net.forward_interval(region)?;
                let k = p.expected_class;
                let (lo, hi) = (&b.lower, &b.upper);
                // Lowest index wins ties, so rivals below k must be beaten strictly.
                Ok(match net.convention() {
                    OutputConvention::Argmax => (0..lo.len())
                        .filter(|&j| j != k)
                        .all(|j| if j < k { lo[k] > hi[j] } else { lo[k] >= hi[j] }),
                    OutputConvention::Argmin => (0..lo.len())
                        .filter(|&j| j != k)
                        .all(|j| if j < k { hi[k] < lo[j] } else { hi[k] <= lo[j] }),
                    OutputConvention::Raw => return Err(Error::RawConvention),
                })
            }
            Property::Safety(p) => {
                let b = net.forward_interval_in(region, p.output_space)?;
                Ok(p.constraint.proven_by(&b))
            }
        }
    }

    pub fn make_counterexample(&self, x: &[f64], observed: Observation) -> Counterexample {
        let noise_vector = match self {
            Property::Robustness(p) => Some(x.iter().zip(&p.seed).map(|(a, s)| a - s).collect()),
            Property::Safety(_) => None,
        };
        Counterexample {
            property_id: self.id().to_string(),
            input: x.to_vec(),
            noise_vector,
            observed,
            timestamp: now_millis(),
        }
    }

    /// Re-evaluate the network at the counterexample input and confirm the
    /// recorded violation.
    pub fn revalidate(&self, net: &Network, ce: &Counterexample) -> Result<()> {
        let region = self.search_box()?;
        if !region.contains(&ce.input) {
            return Err(Error::Revalidation(format!(
                "input {:?} lies outside the property's search box",
                ce.input
            )));
        }
        match self.check_point(net, &ce.input)? {
            None => Err(Error::Revalidation(format!("input {:?} satisfies the property", ce.input))),
            Some(obs) if obs != ce.observed => Err(Error::Revalidation(format!(
                "recorded observation {:?} differs from re-evaluation {:?}",
                ce.observed, obs
            ))),
            Some(_) => Ok(()),
        }
    }

    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("property serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Remove the counterexamples' inputs from the property's search space.
/// Engines treat each excluded input as an exact point (grid search) or an
/// L-infinity ball of the engine's precision (interval search).
pub fn exclude(prop: &RobustnessProperty, ces: &[Counterexample]) -> Result<RobustnessProperty> {
    let mut refined = prop.clone();
    for ce in ces {
        if ce.property_id != prop.id {
            return Err(Error::InvalidProperty(format!(
                "counterexample for `{}` cannot refine `{}`",
                ce.property_id, prop.id
            )));
        }
        if ce.input.len() != prop.seed.len() {
            return Err(Error::dim("counterexample input", prop.seed.len(), ce.input.len()));
        }
        refined.excluded.push(ce.input.clone());
    }
    Ok(refined)
}

/// Standard ACAS Xu input domain (distance, two angles, two speeds) as
/// declared in the public `.nnet` files.
// 3.141593 is the files' literal bound, not an approximation of PI.
#[allow(clippy::approx_constant)]
pub fn acas_default_domain() -> InputBox {
    InputBox {
        lower: vec![0.0, -3.141593, -3.141593, 100.0, 0.0],
        upper: vec![60760.0, 3.141593, 3.141593, 1200.0, 1200.0],
    }
}

/// ACAS Xu safety properties P1-P4. Bounds left open by the property are
/// taken from `domain`.
pub fn acas_properties(domain: &InputBox) -> Result<Vec<SafetyProperty>> {
    if domain.dim() != 5 {
        return Err(Error::dim("ACAS input domain", 5, domain.dim()));
    }
    // (lower, upper) per input; None means "open, use the domain bound".
    type Bounds = [(Option<f64>, Option<f64>); 5];
    let make = |id: &str, bounds: Bounds, constraint: Constraint| -> Result<SafetyProperty> {
        let mut lower = Vec::with_capacity(5);
        let mut upper = Vec::with_capacity(5);
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            lower.push(lo.unwrap_or(domain.lower[i]));
            upper.push(hi.unwrap_or(domain.upper[i]));
        }
        Ok(SafetyProperty {
            id: id.to_string(),
            input_box: InputBox::new(lower, upper)?,
            constraint,
            output_space: OutputSpace::Denormalized,
        })
    };
    let coc_not_max = Constraint::Or {
        args: (1..5).map(|j| Constraint::Gt { a: j, b: 0 }).collect(),
    };
    let coc_not_min = Constraint::Or {
        args: (1..5).map(|j| Constraint::Lt { a: j, b: 0 }).collect(),
    };
    let far_slow: Bounds = [
        (Some(55947.691), None),
        (None, None),
        (None, None),
        (Some(1145.0), None),
        (None, Some(60.0)),
    ];
    Ok(vec![
        make("P1", far_slow, Constraint::Le { index: 0, value: 1500.0 })?,
        make("P2", far_slow, coc_not_max)?,
        make(
            "P3",
            [
                (Some(1500.0), Some(1800.0)),
                (Some(-0.06), Some(0.06)),
                (Some(3.10), None),
                (Some(980.0), None),
                (Some(960.0), None),
            ],
            coc_not_min.clone(),
        )?,
        make(
            "P4",
            [
                (Some(1500.0), Some(1800.0)),
                (Some(-0.06), Some(0.06)),
                (Some(0.0), Some(0.0)),
                (Some(1000.0), None),
                (Some(700.0), Some(800.0)),
            ],
            coc_not_min,
        )?,
    ])
}

/// Property file as written by users. Robustness files may omit the
/// expected class (it is recomputed from the seed); safety boxes may use
/// `null` for open bounds, filled from the network's declared domain.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PropertyFile {
    Robustness {
        #[serde(default = "default_id")]
        id: String,
        seed: Vec<f64>,
        noise: NoiseFile,
        #[serde(default)]
        expected_class: Option<usize>,
    },
    Safety {
        #[serde(default = "default_id")]
        id: String,
        input_box: BoxFile,
        #[serde(default)]
        pins: Vec<Pin>,
        constraint: Constraint,
        #[serde(default)]
        output_space: OutputSpace,
    },
}

fn default_id() -> String {
    "property".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    pub percent: f64,
    #[serde(default)]
    pub noisy_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pin {
    pub node: usize,
    pub value: f64,
}

impl PropertyFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json_str(text)
    }

    pub fn resolve(self, net: &Network) -> Result<Property> {
        match self {
            PropertyFile::Robustness {
                id,
                seed,
                noise,
                expected_class,
            } => {
                let mask = noise.noisy_mask.unwrap_or_else(|| vec![true; seed.len()]);
                let mut prop = RobustnessProperty::new(net, id, seed, NoiseSpec::new(noise.percent, mask)?)?;
                if let Some(c) = expected_class {
                    if c != prop.expected_class {
                        return Err(Error::InvalidProperty(format!(
                            "expected class {c} disagrees with the network's decision {} at the seed",
                            prop.expected_class
                        )));
                    }
                }
                prop.excluded.clear();
                Ok(Property::Robustness(prop))
            }
            PropertyFile::Safety {
                id,
                input_box,
                pins,
                constraint,
                output_space,
            } => {
                let n = net.input_size();
                if input_box.lower.len() != n || input_box.upper.len() != n {
                    return Err(Error::dim("safety input box", n, input_box.lower.len().max(input_box.upper.len())));
                }
                let domain = net.input_domain();
                let fill = |v: Option<f64>, i: usize, upper: bool| -> Result<f64> {
                    match (v, &domain) {
                        (Some(v), _) => Ok(v),
                        (None, Some(d)) => Ok(if upper { d.upper[i] } else { d.lower[i] }),
                        (None, None) => Err(Error::InvalidProperty(format!(
                            "node {i} has an open bound and the network declares no input domain"
                        ))),
                    }
                };
                let mut lower = Vec::with_capacity(n);
                let mut upper = Vec::with_capacity(n);
                for i in 0..n {
                    lower.push(fill(input_box.lower[i], i, false)?);
                    upper.push(fill(input_box.upper[i], i, true)?);
                }
                for pin in pins {
                    if pin.node >= n {
                        return Err(Error::InvalidProperty(format!("pin on node {} out of range", pin.node)));
                    }
                    lower[pin.node] = pin.value;
                    upper[pin.node] = pin.value;
                }
                let prop = SafetyProperty {
                    id,
                    input_box: InputBox::new(lower, upper)?,
                    constraint,
                    output_space,
                };
                prop.validate_for(net)?;
                Ok(Property::Safety(prop))
            }
        }
    }
}
