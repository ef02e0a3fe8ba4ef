//! Manifests, feature CSV files, fold assignment, accuracy metrics and a
//! synthetic corpus.
//!
//! # Manifest
//!
//! A CSV file whose first line declares the class names in index order,
//! followed by a header row and one row per utterance:
//!
//! ```text
//! # labels: anger,happy,neutral,sad
//! id,label,source,spontaneity,fold
//! ses01_f000,neutral,features/ses01_f000.csv,1,
//! ses01_f001,anger,audio/ses01_f001.wav,0,2
//! ```
//!
//! `source` is resolved relative to the manifest's directory and may point at
//! a WAV file or a feature CSV. `spontaneity` and `fold` may be left empty.
//!
//! # Feature CSV
//!
//! An optional `# frames: N` line (frames present before padding), a header
//! with one name per column, then `M` rows of numbers written in shortest
//! round-trip form.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub id: String,
    pub label: usize,
    /// As written in the manifest (relative paths are relative to it).
    pub source: PathBuf,
    pub spontaneity: Option<bool>,
    pub fold: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub labels: Vec<String>,
    pub records: Vec<UtteranceRecord>,
    /// Directory relative sources are resolved against.
    pub base_dir: PathBuf,
}

pub const MANIFEST_HEADER: [&str; 5] = ["id", "label", "source", "spontaneity", "fold"];

impl Manifest {
    pub fn resolve(&self, record: &UtteranceRecord) -> PathBuf {
        if record.source.is_absolute() {
            record.source.clone()
        } else {
            self.base_dir.join(&record.source)
        }
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }
}

fn parse_label_line(line: &str) -> Option<Vec<String>> {
    let rest = line.trim().strip_prefix('#')?.trim();
    let rest = rest.strip_prefix("labels")?.trim_start();
    let rest = rest.strip_prefix(':').or_else(|| rest.strip_prefix('='))?;
    Some(
        rest.split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    )
}

fn parse_optional<T: std::str::FromStr>(cell: &str) -> Option<std::result::Result<T, T::Err>> {
    let cell = cell.trim();
    (!cell.is_empty()).then(|| cell.parse())
}

/// Reads and validates a manifest. Every source file must exist.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let where_ = |line: u64| format!("{}:{line}", path.display());

    let first = text.lines().next().unwrap_or("");
    let labels = parse_label_line(first).ok_or_else(|| {
        Error::Data(format!(
            "{}: first line must declare classes, e.g. '# labels: anger,happy,neutral,sad'",
            where_(1)
        ))
    })?;
    if labels.is_empty() {
        return Err(Error::Data(format!("{}: no class labels declared", where_(1))));
    }
    let mut seen_labels = HashSet::new();
    for l in &labels {
        if !seen_labels.insert(l.as_str()) {
            return Err(Error::Data(format!("{}: duplicate class '{l}'", where_(1))));
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let columns: Vec<&str> = header.iter().collect();
    if columns.len() < 3 || columns[..3] != MANIFEST_HEADER[..3] {
        return Err(Error::Data(format!(
            "{}: header must start with id,label,source (optionally spontaneity,fold), got {columns:?}",
            path.display()
        )));
    }
    let col = |name: &str| columns.iter().position(|c| *c == name);
    let (spont_col, fold_col) = (col("spontaneity"), col("fold"));

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != columns.len() {
            return Err(Error::Data(format!(
                "{}: expected {} fields, found {}",
                where_(line),
                columns.len(),
                row.len()
            )));
        }
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::Data(format!("{}: empty id", where_(line))));
        }
        if !ids.insert(id.clone()) {
            return Err(Error::Data(format!("{}: duplicate id '{id}'", where_(line))));
        }
        let label = labels.iter().position(|l| l == &row[1]).ok_or_else(|| {
            Error::Data(format!(
                "{}: unknown label '{}' (declared: {})",
                where_(line),
                &row[1],
                labels.join(",")
            ))
        })?;
        let source = PathBuf::from(&row[2]);
        let resolved = if source.is_absolute() {
            source.clone()
        } else {
            base_dir.join(&source)
        };
        if !resolved.is_file() {
            return Err(Error::Data(format!(
                "{}: source file {} not found",
                where_(line),
                resolved.display()
            )));
        }
        let spontaneity = match spont_col.and_then(|c| parse_optional::<u8>(&row[c])) {
            None => None,
            Some(Ok(0)) => Some(false),
            Some(Ok(1)) => Some(true),
            Some(_) => {
                return Err(Error::Data(format!(
                    "{}: spontaneity must be 0, 1 or empty",
                    where_(line)
                )))
            }
        };
        let fold = match fold_col.and_then(|c| parse_optional::<usize>(&row[c])) {
            None => None,
            Some(Ok(f)) => Some(f),
            Some(Err(_)) => {
                return Err(Error::Data(format!(
                    "{}: fold must be a non-negative integer",
                    where_(line)
                )))
            }
        };
        records.push(UtteranceRecord {
            id,
            label,
            source,
            spontaneity,
            fold,
        });
    }
    Ok(Manifest {
        labels,
        records,
        base_dir,
    })
}

pub fn write_manifest(path: &Path, labels: &[String], records: &[UtteranceRecord]) -> Result<()> {
    let out = manifest_text(labels, records)?;
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// The text [`write_manifest`] writes.
pub fn manifest_text(labels: &[String], records: &[UtteranceRecord]) -> Result<String> {
    let mut out = format!("# labels: {}\n", labels.join(","));
    out.push_str(&MANIFEST_HEADER.join(","));
    out.push('\n');
    for r in records {
        let label = labels.get(r.label).ok_or_else(|| {
            Error::Data(format!("record '{}' has label index {} outside the class list", r.id, r.label))
        })?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id,
            label,
            r.source.display(),
            r.spontaneity.map(|s| u8::from(s).to_string()).unwrap_or_default(),
            r.fold.map(|f| f.to_string()).unwrap_or_default()
        ));
    }
    Ok(out)
}

/// Shortest text that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_feature_csv(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut out = format!("# frames: {}\n", features.frames);
    out.push_str(&features.names.join(","));
    out.push('\n');
    let mut line = String::new();
    for r in 0..features.values.rows() {
        line.clear();
        for (c, v) in features.values.row(r).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format_float(*v));
        }
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a feature CSV. Errors name the offending row (1-based, header = row 1)
/// and column.
pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_csv(&text).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_feature_csv(text: &str) -> Result<FeatureMatrix> {
    let mut frames = None;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    while let Some(l) = lines.peek() {
        let Some(comment) = l.trim().strip_prefix('#') else {
            break;
        };
        if let Some(n) = comment.trim().strip_prefix("frames:") {
            frames = Some(n.trim().parse::<usize>().map_err(|_| {
                Error::Data(format!("bad frame count '{}'", n.trim()))
            })?);
        }
        lines.next();
    }
    let header = lines.next().ok_or_else(|| Error::Data("no header".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(Error::Data("empty column name in header".into()));
    }
    let p = names.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, l) in lines.enumerate() {
        let row_no = i + 2;
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != p {
            return Err(Error::Data(format!(
                "row {row_no} has {} fields, header has {p}",
                cells.len()
            )));
        }
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {row_no}, column {} ('{}'): '{}' is not a number",
                    c + 1,
                    names[c],
                    cell.trim()
                ))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Data("no data rows".into()));
    }
    let values = Tensor::from_vec(rows, p, data)?;
    FeatureMatrix::new(values, frames.unwrap_or(rows), names)
}

/// Assigns each record a fold in `0..k`, stratified by class.
///
/// Records with an explicit fold keep it. The rest are shuffled per class
/// (seeded) and dealt round-robin, continuing the deal across classes so that
/// fold sizes also stay within one of each other.
pub fn stratified_kfold(records: &[UtteranceRecord], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Data("k must be at least 1".into()));
    }
    let mut folds = vec![usize::MAX; records.len()];
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        match r.fold {
            Some(f) if f >= k => {
                return Err(Error::Data(format!(
                    "record '{}' has fold {f}, but only {k} folds exist",
                    r.id
                )))
            }
            Some(f) => folds[i] = f,
            None => by_class.entry(r.label).or_default().push(i),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = 0;
    for (class, mut members) in by_class {
        if members.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} unassigned records, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(folds)
}

/// Confusion matrix (rows = truth) with weighted and unweighted accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub confusion: Vec<Vec<usize>>,
    /// Overall fraction correct.
    pub wa: f64,
    /// Mean per-class recall over classes that occur in the truth.
    pub ua: f64,
}

impl Metrics {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn recall(&self, class: usize) -> Option<f64> {
        let row = &self.confusion[class];
        let support: usize = row.iter().sum();
        (support > 0).then(|| row[class] as f64 / support as f64)
    }
}

pub fn compute_metrics(predictions: &[usize], truths: &[usize], classes: usize) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::Domain("no predictions to score".into()));
    }
    if predictions.len() != truths.len() {
        return Err(Error::Domain(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= classes || t >= classes {
            return Err(Error::Domain(format!(
                "class index outside 0..{classes} (pred {p}, truth {t})"
            )));
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let wa = correct as f64 / predictions.len() as f64;
    let mut metrics = Metrics {
        confusion,
        wa,
        ua: 0.0,
    };
    let recalls: Vec<f64> = (0..classes).filter_map(|c| metrics.recall(c)).collect();
    metrics.ua = recalls.iter().sum::<f64>() / recalls.len() as f64;
    Ok(metrics)
}

/// Parameters of the synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub per_class: usize,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            per_class: 50,
            nodes: 120,
            features: 34,
            classes: 4,
            noise: 0.1,
            seed: 0,
        }
    }
}

/// Spatial frequency (cycles over the node axis) of each class template.
/// Half-integer frequencies do not close on the cycle, so every template
/// also has a distinct nonzero node mean.
pub const SYNTHETIC_FREQUENCIES: [f64; 8] = [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5];
const TEMPLATE_SEED: u64 = 0x7e3a_91c4_05d2_b86f;

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub features: Vec<Tensor>,
}

/// Class `c` sample: `x[i, p] = sin(2π f_c i / M + φ_{c,p}) + σ·n`, with
/// template phases fixed across seeds and Gaussian noise drawn from `seed`.
/// Samples are ordered class by class.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.classes == 0 || spec.classes > SYNTHETIC_FREQUENCIES.len() {
        return Err(Error::Domain(format!(
            "synthetic corpus supports 1..={} classes, got {}",
            SYNTHETIC_FREQUENCIES.len(),
            spec.classes
        )));
    }
    if spec.nodes == 0 || spec.features == 0 {
        return Err(Error::Domain("synthetic corpus needs positive nodes and features".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Domain(format!("noise must be finite and >= 0, got {}", spec.noise)));
    }
    let mut template_rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    let phases: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.features)
                .map(|_| template_rng.random_range(0.0..std::f64::consts::TAU))
                .collect()
        })
        .collect();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.nodes as f64;
    let mut corpus = SyntheticCorpus {
        ids: Vec::new(),
        labels: Vec::new(),
        features: Vec::new(),
    };
    for class in 0..spec.classes {
        let w = std::f64::consts::TAU * SYNTHETIC_FREQUENCIES[class] / m;
        for n in 0..spec.per_class {
            let x = Tensor::from_fn(spec.nodes, spec.features, |i, p| {
                let clean = (w * i as f64 + phases[class][p]).sin();
                let noise = normal.sample(&mut rng);
                clean + spec.noise * noise
            });
            corpus.ids.push(format!("syn_c{class}_{n:04}"));
            corpus.labels.push(class);
            corpus.features.push(x);
        }
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: usize) -> UtteranceRecord {
        UtteranceRecord {
            id: id.into(),
            label,
            source: PathBuf::from(format!("{id}.csv")),
            spontaneity: None,
            fold: None,
        }
    }

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!((m.wa, m.ua), (1.0, 1.0));

        let m = compute_metrics(&[0, 0, 0, 0], &[0, 0, 0, 1], 2).unwrap();
        assert_eq!(m.wa, 0.75);
        assert_eq!(m.ua, 0.5);
        assert_eq!(m.confusion, vec![vec![3, 0], vec![1, 0]]);

        let m = compute_metrics(&[2, 2], &[2, 2], 4).unwrap();
        assert_eq!((m.wa, m.ua), (1.0, 1.0));

        assert!(matches!(compute_metrics(&[], &[], 2), Err(Error::Domain(_))));
        assert!(compute_metrics(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn kfold_balanced_counts() {
        let records: Vec<_> = (0..100).map(|i| rec(&format!("u{i}"), i % 4)).collect();
        let folds = stratified_kfold(&records, 5, 7).unwrap();
        for f in 0..5 {
            for c in 0..4 {
                let n = (0..100).filter(|&i| folds[i] == f && records[i].label == c).count();
                assert_eq!(n, 5);
            }
        }
        assert_eq!(folds, stratified_kfold(&records, 5, 7).unwrap());
        assert_eq!(stratified_kfold(&records, 1, 7).unwrap(), vec![0; 100]);
    }

    #[test]
    fn kfold_respects_explicit_folds_and_rejects_small_classes() {
        let mut records: Vec<_> = (0..8).map(|i| rec(&format!("u{i}"), i % 2)).collect();
        records[3].fold = Some(1);
        let folds = stratified_kfold(&records, 2, 0).unwrap();
        assert_eq!(folds[3], 1);

        let small: Vec<_> = (0..3).map(|i| rec(&format!("s{i}"), 0)).collect();
        assert!(matches!(stratified_kfold(&small, 5, 0), Err(Error::Data(_))));

        records[0].fold = Some(9);
        assert!(stratified_kfold(&records, 2, 0).is_err());
    }

    #[test]
    fn feature_csv_errors() {
        assert!(parse_feature_csv("").unwrap_err().to_string().contains("no header"));
        let err = parse_feature_csv("a,b\n1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        let err = parse_feature_csv("a,b\n1,x\n").unwrap_err().to_string();
        assert!(err.contains("row 2, column 2"), "{err}");
    }

    #[test]
    fn feature_csv_frames_line() {
        let fm = parse_feature_csv("# frames: 1\na,b\n1.5,2\n0.0,0.0\n").unwrap();
        assert_eq!(fm.frames, 1);
        assert_eq!(fm.values.shape(), (2, 2));
        assert_eq!(fm.names, vec!["a", "b"]);
    }

    #[test]
    fn synthetic_corpus_shape_and_determinism() {
        let spec = SyntheticSpec {
            per_class: 5,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(a.features.len(), 20);
        assert_eq!(a.features, b.features);
        assert_eq!(a.features[0].shape(), (120, 34));

        let clean = generate_synthetic_corpus(&SyntheticSpec {
            noise: 0.0,
            ..spec.clone()
        })
        .unwrap();
        assert_eq!(clean.features[0], clean.features[4]);
        assert_ne!(clean.features[0], clean.features[5]);

        let too_many = SyntheticSpec {
            classes: 9,
            ..spec
        };
        assert!(generate_synthetic_corpus(&too_many).is_err());
    }
}
