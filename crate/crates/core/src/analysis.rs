//! Counterexample databases and the bias / sensitivity reports built on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{from_json_str, Error, Result};
use crate::network::Network;
use crate::property::{noise_box, Counterexample, NoiseSpec, Observation, Property, RobustnessProperty};

pub const DB_FORMAT: u32 = 1;
pub const DEFAULT_BIAS_RATIO: f64 = 0.25;
pub const DEFAULT_SIGN_THRESHOLD: f64 = 0.05;
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedEntry {
    pub input: Vec<f64>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeRecord {
    pub seed_id: String,
    pub true_class: usize,
    pub observed_class: usize,
    pub noise_percent: f64,
    pub input: Vec<f64>,
    pub noise_vector: Vec<f64>,
}

impl CeRecord {
    /// The network must still move `input` away from the true class to the
    /// recorded one.
    pub fn revalidate(&self, net: &Network) -> Result<()> {
        if self.noise_vector.len() != self.input.len() {
            return Err(Error::dim("noise vector", self.input.len(), self.noise_vector.len()));
        }
        if self.observed_class == self.true_class {
            return Err(Error::Revalidation(format!(
                "record for `{}` does not change the class",
                self.seed_id
            )));
        }
        let got = net.classify(&self.input)?;
        if got != self.observed_class {
            return Err(Error::Revalidation(format!(
                "record for `{}` claims class {} but the network gives {got}",
                self.seed_id, self.observed_class
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbMetadata {
    pub format: u32,
    pub net_hash: String,
    pub property_hash: String,
    pub engine: EngineConfig,
    /// Unix time in milliseconds.
    pub created: u64,
    pub class_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeDatabase {
    pub metadata: DbMetadata,
    /// Every tested seed, including those without counterexamples.
    pub seeds: BTreeMap<String, SeedEntry>,
    pub records: Vec<CeRecord>,
}

impl CeDatabase {
    pub fn new(net: &Network, prop: &Property, cfg: &EngineConfig) -> Self {
        Self::with_property_hash(net, prop.fingerprint(), cfg)
    }

    pub fn with_property_hash(net: &Network, property_hash: String, cfg: &EngineConfig) -> Self {
        CeDatabase {
            metadata: DbMetadata {
                format: DB_FORMAT,
                net_hash: net.fingerprint(),
                property_hash,
                engine: cfg.clone(),
                created: crate::property::now_millis(),
                class_count: net.output_size(),
            },
            seeds: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    /// Register the property's seed and append its counterexamples, each
    /// re-validated first.
    pub fn add_collection(&mut self, net: &Network, prop: &RobustnessProperty, ces: &[Counterexample]) -> Result<()> {
        let wrapped = Property::Robustness(prop.clone());
        self.seeds.insert(
            prop.id.clone(),
            SeedEntry {
                input: prop.seed.clone(),
                class: prop.expected_class,
            },
        );
        for ce in ces {
            wrapped.revalidate(net, ce)?;
            let Observation::Class(observed) = ce.observed else {
                return Err(Error::Revalidation("robustness counterexample without a class".into()));
            };
            self.records.push(CeRecord {
                seed_id: prop.id.clone(),
                true_class: prop.expected_class,
                observed_class: observed,
                noise_percent: prop.noise.percent,
                input: ce.input.clone(),
                noise_vector: ce.noise_vector.clone().unwrap_or_else(|| {
                    ce.input.iter().zip(&prop.seed).map(|(a, s)| a - s).collect()
                }),
            });
        }
        Ok(())
    }

    /// Check the network hash, the seeds and every record.
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.metadata.format != DB_FORMAT {
            return Err(Error::Schema {
                path: "metadata.format".into(),
                message: format!("unsupported format {}", self.metadata.format),
            });
        }
        if self.metadata.net_hash != net.fingerprint() {
            return Err(Error::Revalidation("database was built for a different network".into()));
        }
        for (id, seed) in &self.seeds {
            if net.classify(&seed.input)? != seed.class {
                return Err(Error::Revalidation(format!("seed `{id}` no longer has class {}", seed.class)));
            }
        }
        for r in &self.records {
            r.revalidate(net)?;
            let seed = self
                .seeds
                .get(&r.seed_id)
                .ok_or_else(|| Error::Revalidation(format!("record refers to unknown seed `{}`", r.seed_id)))?;
            if seed.class != r.true_class {
                return Err(Error::Revalidation(format!("record true class differs from seed `{}`", r.seed_id)));
            }
            let region = noise_box(&seed.input, &NoiseSpec::uniform(r.noise_percent, seed.input.len())?)?;
            if !region.contains(&r.input) {
                return Err(Error::Revalidation(format!(
                    "record input lies outside the {}% box of seed `{}`",
                    r.noise_percent, r.seed_id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("database serializes")
    }

    /// Parse and validate against `net`.
    pub fn from_json(text: &str, net: &Network) -> Result<Self> {
        let db: CeDatabase = from_json_str(text)?;
        db.validate(net)?;
        Ok(db)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path, net: &Network) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, net)
    }

    /// Columns: `seed_id,true_class,observed_class,noise_percent`, then
    /// `input_0..input_{n-1}`, then `noise_0..noise_{n-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_records_csv(&self.records, file)
    }
}

pub fn csv_header(nodes: usize) -> Vec<String> {
    let mut h: Vec<String> = ["seed_id", "true_class", "observed_class", "noise_percent"]
        .into_iter()
        .map(String::from)
        .collect();
    h.extend((0..nodes).map(|i| format!("input_{i}")));
    h.extend((0..nodes).map(|i| format!("noise_{i}")));
    h
}

// `{:?}` prints the shortest representation that parses back to the same f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_records_csv<W: std::io::Write>(records: &[CeRecord], out: W) -> Result<()> {
    let nodes = records.first().map_or(0, |r| r.input.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(nodes))?;
    for r in records {
        if r.input.len() != nodes || r.noise_vector.len() != nodes {
            return Err(Error::dim("record width", nodes, r.input.len()));
        }
        let mut row = vec![
            r.seed_id.clone(),
            r.true_class.to_string(),
            r.observed_class.to_string(),
            fmt_f64(r.noise_percent),
        ];
        row.extend(r.input.iter().copied().map(fmt_f64));
        row.extend(r.noise_vector.iter().copied().map(fmt_f64));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Read records written by [`write_records_csv`], re-validating each one
/// against `net`.
pub fn read_records_csv<R: std::io::Read>(input: R, net: &Network) -> Result<Vec<CeRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.len() < 4 || (header.len() - 4) % 2 != 0 {
        return Err(Error::Schema {
            path: "header".into(),
            message: "unexpected column count".into(),
        });
    }
    let nodes = (header.len() - 4) / 2;
    let expected = csv_header(nodes);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Schema {
            path: "header".into(),
            message: format!("expected {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| Error::Parse {
            line: row + 2,
            message: format!("column `{}` is not a number", expected[col]),
        };
        let num = |col: usize| rec[col].parse::<f64>().map_err(|_| bad(col));
        let int = |col: usize| rec[col].parse::<usize>().map_err(|_| bad(col));
        let r = CeRecord {
            seed_id: rec[0].to_string(),
            true_class: int(1)?,
            observed_class: int(2)?,
            noise_percent: num(3)?,
            input: (4..4 + nodes).map(num).collect::<Result<_>>()?,
            noise_vector: (4 + nodes..4 + 2 * nodes).map(num).collect::<Result<_>>()?,
        };
        r.revalidate(net)?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasVerdict {
    InsufficientData,
    NoBias,
    Biased,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    /// `counts[a][b]`: records with true class `a` observed as `b`.
    pub counts: Vec<Vec<u64>>,
    pub out_of: Vec<u64>,
    pub into: Vec<u64>,
    pub ratio_threshold: f64,
    pub verdict: BiasVerdict,
    pub biased_toward: Vec<usize>,
}

/// A class `A` counts as favored when records leaving `A` are rare relative
/// to records entering it: `out(A) / in(A) < ratio_threshold`. At least two
/// distinct seed classes are required.
pub fn bias_report(db: &CeDatabase, ratio_threshold: f64) -> BiasReport {
    let classes = db
        .records
        .iter()
        .map(|r| r.true_class.max(r.observed_class) + 1)
        .chain(db.seeds.values().map(|s| s.class + 1))
        .chain(std::iter::once(db.metadata.class_count))
        .max()
        .unwrap_or(0);
    let mut counts = vec![vec![0u64; classes]; classes];
    for r in &db.records {
        counts[r.true_class][r.observed_class] += 1;
    }
    let out_of: Vec<u64> = (0..classes).map(|a| (0..classes).filter(|&b| b != a).map(|b| counts[a][b]).sum()).collect();
    let into: Vec<u64> = (0..classes).map(|a| (0..classes).filter(|&b| b != a).map(|b| counts[b][a]).sum()).collect();
    let tested: BTreeSet<usize> = db
        .seeds
        .values()
        .map(|s| s.class)
        .chain(db.records.iter().map(|r| r.true_class))
        .collect();
    let (verdict, biased_toward) = if db.records.is_empty() || tested.len() < 2 {
        (BiasVerdict::InsufficientData, Vec::new())
    } else {
        let favored: Vec<usize> = (0..classes)
            .filter(|&a| into[a] > 0 && (out_of[a] as f64) / (into[a] as f64) < ratio_threshold)
            .collect();
        if favored.is_empty() {
            (BiasVerdict::NoBias, favored)
        } else {
            (BiasVerdict::Biased, favored)
        }
    };
    BiasReport {
        counts,
        out_of,
        into,
        ratio_threshold,
        verdict,
        biased_toward,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSensitivity {
    pub node: usize,
    pub min: f64,
    pub max: f64,
    /// `bins + 1` edges from `min` to `max`.
    pub edges: Vec<f64>,
    pub histogram: Vec<u64>,
    pub positive: f64,
    pub negative: f64,
    pub zero: f64,
    pub insensitive_to_positive: bool,
    pub insensitive_to_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub records: usize,
    pub sign_threshold: f64,
    pub nodes: Vec<NodeSensitivity>,
}

pub fn sensitivity_report(db: &CeDatabase, bins: usize, sign_threshold: f64) -> Result<SensitivityReport> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let total = db.records.len();
    let nodes = db.records.first().map_or(0, |r| r.noise_vector.len());
    let mut out = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let values: Vec<f64> = db
            .records
            .iter()
            .map(|r| {
                r.noise_vector
                    .get(node)
                    .copied()
                    .ok_or_else(|| Error::dim("noise vector", nodes, r.noise_vector.len()))
            })
            .collect::<Result<_>>()?;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (max - min) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|k| if k == bins { max } else { min + width * k as f64 })
            .collect();
        let mut histogram = vec![0u64; bins];
        for &v in &values {
            let k = if width > 0.0 { (((v - min) / width) as usize).min(bins - 1) } else { 0 };
            histogram[k] += 1;
        }
        let frac = |pred: fn(f64) -> bool| values.iter().filter(|&&v| pred(v)).count() as f64 / total as f64;
        let positive = frac(|v| v > 0.0);
        let negative = frac(|v| v < 0.0);
        let zero = frac(|v| v == 0.0);
        out.push(NodeSensitivity {
            node,
            min,
            max,
            edges,
            histogram,
            positive,
            negative,
            zero,
            insensitive_to_positive: positive < sign_threshold,
            insensitive_to_negative: negative < sign_threshold,
        });
    }
    Ok(SensitivityReport {
        records: total,
        sign_threshold,
        nodes: out,
    })
}

/// Columns: `node,bin,lower,upper,count`.
pub fn write_histogram_csv<W: std::io::Write>(report: &SensitivityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "bin", "lower", "upper", "count"])?;
    for n in &report.nodes {
        for (k, c) in n.histogram.iter().enumerate() {
            w.write_record(&[
                n.node.to_string(),
                k.to_string(),
                fmt_f64(n.edges[k]),
                fmt_f64(n.edges[k + 1]),
                c.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Columns: `true_class,observed_class,count` for every ordered pair.
pub fn write_bias_csv<W: std::io::Write>(report: &BiasReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["true_class", "observed_class", "count"])?;
    for (a, row) in report.counts.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            if a != b {
                w.write_record(&[a.to_string(), b.to_string(), c.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::engine::{collect, Engine, GridStep};
    use crate::network::{Layer, NetworkParts, OutputConvention};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(t: usize, o: usize, noise: Vec<f64>) -> CeRecord {
        CeRecord {
            seed_id: format!("s{t}"),
            true_class: t,
            observed_class: o,
            noise_percent: 10.0,
            input: vec![0.0; noise.len()],
            noise_vector: noise,
        }
    }

    pub(crate) fn synthetic_db(records: Vec<CeRecord>, seed_classes: &[usize]) -> CeDatabase {
        let net = crate::network::tests::identity_net();
        let mut db = CeDatabase::with_property_hash(&net, "synthetic".into(), &EngineConfig::default());
        db.metadata.class_count = 2;
        for &c in seed_classes {
            db.seeds.insert(format!("s{c}"), SeedEntry { input: vec![0.0], class: c });
        }
        db.records = records;
        db
    }

    fn imbalanced() -> Vec<CeRecord> {
        let mut r: Vec<CeRecord> = (0..95).map(|_| record(0, 1, vec![0.1])).collect();
        r.extend((0..5).map(|_| record(1, 0, vec![-0.1])));
        r
    }

    #[test]
    fn imbalance_marks_bias() {
        let rep = bias_report(&synthetic_db(imbalanced(), &[0, 1]), DEFAULT_BIAS_RATIO);
        assert_eq!(rep.counts, vec![vec![0, 95], vec![5, 0]]);
        assert_eq!(rep.verdict, BiasVerdict::Biased);
        assert_eq!(rep.biased_toward, vec![1]);
    }

    #[test]
    fn balanced_db_has_no_bias() {
        let mut r: Vec<CeRecord> = (0..50).map(|_| record(0, 1, vec![0.1])).collect();
        r.extend((0..50).map(|_| record(1, 0, vec![0.1])));
        let rep = bias_report(&synthetic_db(r, &[0, 1]), DEFAULT_BIAS_RATIO);
        assert_eq!(rep.verdict, BiasVerdict::NoBias);
    }

    #[test]
    fn single_class_or_empty_is_insufficient() {
        let r: Vec<CeRecord> = (0..10).map(|_| record(0, 1, vec![0.1])).collect();
        assert_eq!(bias_report(&synthetic_db(r, &[0]), 0.25).verdict, BiasVerdict::InsufficientData);
        let empty = bias_report(&synthetic_db(vec![], &[0, 1]), 0.25);
        assert_eq!(empty.verdict, BiasVerdict::InsufficientData);
        assert!(empty.counts.iter().flatten().all(|&c| c == 0));
    }

    #[test]
    fn one_sided_noise_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let records: Vec<CeRecord> = (0..200)
            .map(|k| {
                use rand::Rng;
                let sym = if k % 2 == 0 { 1.0 } else { -1.0 } * rng.gen_range(0.01..1.0);
                record(0, 1, vec![sym, sym, sym, -rng.gen_range(0.0..1.0)])
            })
            .collect();
        let rep = sensitivity_report(&synthetic_db(records, &[0, 1]), DEFAULT_BINS, DEFAULT_SIGN_THRESHOLD).unwrap();
        assert!(rep.nodes[3].insensitive_to_positive);
        assert!(!rep.nodes[3].insensitive_to_negative);
        assert!(!rep.nodes[0].insensitive_to_positive && !rep.nodes[0].insensitive_to_negative);
        for n in &rep.nodes {
            assert_eq!(n.histogram.iter().sum::<u64>(), 200);
            assert_eq!(n.edges.len(), DEFAULT_BINS + 1);
        }
        let empty = sensitivity_report(&synthetic_db(vec![], &[]), DEFAULT_BINS, 0.05).unwrap();
        assert!(empty.nodes.is_empty());
    }

    proptest! {
        #[test]
        fn reports_ignore_record_order(seed in any::<u64>()) {
            let db = synthetic_db(imbalanced(), &[0, 1]);
            let mut shuffled = db.clone();
            shuffled.records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(bias_report(&db, 0.25), bias_report(&shuffled, 0.25));
            prop_assert_eq!(
                sensitivity_report(&db, 20, 0.05).unwrap(),
                sensitivity_report(&shuffled, 20, 0.05).unwrap()
            );
        }
    }

    // ARGMIN over (x0 + x1, 2.9): class 1 iff x0 + x1 > 2.9.
    fn corner_net() -> Network {
        let layers = vec![Layer::new(2, 2, vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 2.9]).unwrap()];
        Network::new(NetworkParts::plain(layers, OutputConvention::Argmin)).unwrap()
    }

    fn collected_db() -> (Network, CeDatabase) {
        let net = corner_net();
        let prop = RobustnessProperty::new(&net, "seed-a", vec![1.0, 1.0], NoiseSpec::uniform(50.0, 2).unwrap()).unwrap();
        let cfg = EngineConfig { grid_step: GridStep::Scalar(0.1), ..EngineConfig::default() };
        let c = collect(&net, &prop, Engine::Explicit, &cfg).unwrap();
        let mut db = CeDatabase::new(&net, &Property::Robustness(prop.clone()), &cfg);
        db.add_collection(&net, &prop, &c.counterexamples).unwrap();
        (net, db)
    }

    #[test]
    fn json_round_trip_revalidates() {
        let (net, db) = collected_db();
        assert!(!db.records.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cedb.json");
        db.save_json(&path).unwrap();
        assert_eq!(CeDatabase::load_json(&path, &net).unwrap(), db);

        let mut forged = db.clone();
        forged.records[0].input = vec![1.0, 1.0];
        assert!(matches!(CeDatabase::from_json(&forged.to_json(), &net), Err(Error::Revalidation(_))));
        let other = crate::network::tests::random_net(&[2, 3, 2], 1);
        assert!(CeDatabase::from_json(&db.to_json(), &other).is_err());
        assert!(matches!(CeDatabase::load_json(&dir.path().join("missing.json"), &net), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let (net, db) = collected_db();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cedb.csv");
        db.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "seed_id,true_class,observed_class,noise_percent,input_0,input_1,noise_0,noise_1"
        );
        let back = read_records_csv(fs::File::open(&path).unwrap(), &net).unwrap();
        assert_eq!(back, db.records);
        for (a, b) in back.iter().zip(&db.records) {
            for (x, y) in a.noise_vector.iter().zip(&b.noise_vector) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn histogram_csv_columns() {
        let rep = sensitivity_report(&synthetic_db(imbalanced(), &[0, 1]), 4, 0.05).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "node,bin,lower,upper,count");
        assert_eq!(text.lines().count(), 1 + 4);
    }
}
