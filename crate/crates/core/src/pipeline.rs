//! The command-level workflows: featurize, train, evaluate, crossval,
//! inspect-basis and gen-synthetic.
//!
//! Each function reads and writes plain files and returns a summary. Every
//! command also writes `<command>.conf` into its output directory holding the
//! fully resolved configuration. Progress lines go to the `log` callback.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::{
    compute_metrics, format_float, generate_synthetic_corpus, load_manifest, manifest_text, read_feature_csv,
    stratified_kfold, write_feature_csv, write_manifest, Manifest, Metrics, UtteranceRecord,
};
use crate::error::{Error, Result};
use crate::features::{extract_features, read_wav, FeatureMatrix};
use crate::model::{pool_mode_name, ModelParams};
use crate::optim::{predict_labels, train_with, EpochRecord, LabeledSet};
use crate::spectral::{
    basis_for, jacobi_eigendecomposition, laplacian_of_kind,
    max_eigenvalue_deviation, max_projector_deviation, GraphSpec, LaplacianKind, Topology,
};
use crate::tensor::{PoolMode, Tensor};

/// Sink for human-readable progress lines.
pub type Log<'a> = &'a mut dyn FnMut(&str);

const PREDICT_CHUNK: usize = 64;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `contents` unless the file already holds exactly that text.
fn write_if_changed(path: &Path, contents: &str) -> Result<bool> {
    if fs::read_to_string(path).is_ok_and(|old| old == contents) {
        return Ok(false);
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(true)
}

fn echo_config(config: &RunConfig, out_dir: &Path, command: &str, log: Log) -> Result<()> {
    create_dir(out_dir)?;
    let text = config.render();
    for line in text.lines() {
        log(&format!("# {line}"));
    }
    write_if_changed(&out_dir.join(format!("{command}.conf")), &text)?;
    Ok(())
}

fn refuse_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Feature matrices for every manifest record, all of one shape.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub labels: Vec<String>,
    pub records: Vec<UtteranceRecord>,
    pub features: Vec<Tensor>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Loads the feature CSV behind every record of a manifest.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = load_manifest(manifest_path)?;
        Self::from_manifest(&manifest)
    }

    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        if manifest.records.is_empty() {
            return Err(Error::Data("manifest has no records".into()));
        }
        let mut features = Vec::with_capacity(manifest.records.len());
        let mut names: Option<Vec<String>> = None;
        for record in &manifest.records {
            let path = manifest.resolve(record);
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                return Err(Error::Data(format!(
                    "record '{}' points at audio ({}); run featurize first",
                    record.id,
                    path.display()
                )));
            }
            let m = read_feature_csv(&path)?;
            match &names {
                None => names = Some(m.names.clone()),
                Some(first) if first != &m.names => {
                    return Err(Error::Data(format!(
                        "{}: columns differ from the first feature file",
                        path.display()
                    )))
                }
                Some(_) => {}
            }
            if let Some(first) = features.first().map(Tensor::shape) {
                if m.values.shape() != first {
                    return Err(Error::Data(format!(
                        "{}: shape {:?} differs from {:?}",
                        path.display(),
                        m.values.shape(),
                        first
                    )));
                }
            }
            features.push(m.values);
        }
        Ok(Dataset {
            labels: manifest.labels.clone(),
            records: manifest.records.clone(),
            features,
            feature_names: names.unwrap_or_default(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.features[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.features[0].cols()
    }

    pub fn has_spontaneity(&self) -> bool {
        self.feature_names.last().is_some_and(|n| n == "spontaneity")
    }

    fn check_nodes(&self, config: &RunConfig) -> Result<()> {
        if self.nodes() != config.model.nodes {
            return Err(Error::Data(format!(
                "feature files have {} rows but nodes = {}",
                self.nodes(),
                config.model.nodes
            )));
        }
        Ok(())
    }

    fn subset(&self, indices: &[usize]) -> LabeledSet<'_> {
        LabeledSet::new(
            indices.iter().map(|&i| &self.features[i]).collect(),
            indices.iter().map(|&i| self.records[i].label).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizeReport {
    pub written: usize,
    pub skipped: usize,
    /// `(record id, error message)` for every record that failed.
    pub failures: Vec<(String, String)>,
    pub manifest: PathBuf,
}

/// Extracts features for every record of an audio manifest into
/// `out_dir/features/<id>.csv` and writes `out_dir/manifest.csv` pointing at
/// them. Existing feature files are kept unless `force` is set. A record that
/// fails is reported and left out of the new manifest.
pub fn featurize(
    config: &RunConfig,
    manifest_path: &Path,
    out_dir: &Path,
    force: bool,
    log: Log,
) -> Result<FeaturizeReport> {
    let manifest = load_manifest(manifest_path)?;
    if manifest.records.is_empty() {
        return Err(Error::Data(format!("{}: no records", manifest_path.display())));
    }
    echo_config(config, out_dir, "featurize", log)?;
    let feature_dir = out_dir.join("features");
    create_dir(&feature_dir)?;

    let mut report = FeaturizeReport {
        written: 0,
        skipped: 0,
        failures: Vec::new(),
        manifest: out_dir.join("manifest.csv"),
    };
    let mut kept = Vec::new();
    for record in &manifest.records {
        let relative = PathBuf::from("features").join(format!("{}.csv", record.id));
        let target = out_dir.join(&relative);
        let done = || UtteranceRecord {
            source: relative.clone(),
            ..record.clone()
        };
        if target.exists() && !force {
            report.skipped += 1;
            kept.push(done());
            continue;
        }
        let result = featurize_one(config, &manifest, record).and_then(|m| write_feature_csv(&target, &m));
        match result {
            Ok(()) => {
                report.written += 1;
                kept.push(done());
            }
            Err(e) => {
                log(&format!("{}: {e}", record.id));
                report.failures.push((record.id.clone(), e.to_string()));
            }
        }
    }
    write_if_changed(&report.manifest, &manifest_text(&manifest.labels, &kept)?)?;
    log(&format!(
        "featurize: {} written, {} skipped, {} failed",
        report.written,
        report.skipped,
        report.failures.len()
    ));
    Ok(report)
}

fn featurize_one(config: &RunConfig, manifest: &Manifest, record: &UtteranceRecord) -> Result<FeatureMatrix> {
    let wave = read_wav(&manifest.resolve(record))?;
    let spontaneity = if config.spontaneity {
        Some(record.spontaneity.ok_or_else(|| {
            Error::Data("spontaneity = true but the record has no spontaneity value".into())
        })?)
    } else {
        None
    };
    extract_features(&wave, &config.frame, config.model.nodes, spontaneity)
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub checkpoint: PathBuf,
    pub log: Vec<EpochRecord>,
    pub parameter_count: usize,
}

fn epoch_log_text(config: &RunConfig, records: &[EpochRecord]) -> String {
    let mut text: String = config.render().lines().map(|l| format!("# {l}\n")).collect();
    text.push_str(EpochRecord::CSV_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&format!("{r}\n"));
    }
    text
}

/// Trains one model on a dataset, logging every epoch.
pub fn train_model(config: &RunConfig, data: &Dataset, indices: &[usize], seed: u64, log: Log) -> Result<(ModelParams, Vec<EpochRecord>)> {
    data.check_nodes(config)?;
    let model_config = config.model_config(data.dim(), data.labels.len());
    let mut model = ModelParams::init(model_config, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let set = data.subset(indices);
    let train_config = crate::optim::TrainConfig {
        seed,
        ..config.train.clone()
    };
    let records = train_with(&mut model, &set, &train_config, None, |r| log(&format!("{r}")))?;
    Ok((model, records))
}

/// Trains on every record of the manifest and writes the checkpoint and
/// `train_log.csv` (per-epoch `epoch,lr,mean_loss,train_wa,val_wa,val_ua`).
pub fn train(config: &RunConfig, manifest_path: &Path, out_dir: &Path, force: bool, log: Log) -> Result<TrainReport> {
    let data = Dataset::load(manifest_path)?;
    let checkpoint = config
        .checkpoint
        .clone()
        .unwrap_or_else(|| out_dir.join("model.json"));
    refuse_overwrite(&checkpoint, force)?;
    echo_config(config, out_dir, "train", log)?;
    log(EpochRecord::CSV_HEADER);
    let all: Vec<usize> = (0..data.len()).collect();
    let (model, records) = train_model(config, &data, &all, config.train.seed, log)?;
    let ck = Checkpoint::new(&model, &config.frame, data.has_spontaneity(), &data.labels)?;
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    ck.save(&checkpoint)?;
    let log_path = out_dir.join("train_log.csv");
    fs::write(&log_path, epoch_log_text(config, &records)).map_err(|e| Error::io(&log_path, e))?;
    log(&format!("checkpoint: {}", checkpoint.display()));
    Ok(TrainReport {
        checkpoint,
        log: records,
        parameter_count: model.parameter_count(),
    })
}

fn metrics_text(labels: &[String], m: &Metrics) -> String {
    let mut text = format!("samples = {}\nwa = {:.6}\nua = {:.6}\n", m.total(), m.wa, m.ua);
    text.push_str(&format!("confusion,{}\n", labels.join(",")));
    for (label, row) in labels.iter().zip(&m.confusion) {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        text.push_str(&format!("{label},{}\n", cells.join(",")));
    }
    text
}

/// Scores a checkpoint on every record of a manifest. Writes
/// `predictions.csv` (`id,truth,predicted`) and `evaluation.txt`.
pub fn evaluate(config: &RunConfig, checkpoint: &Path, manifest_path: &Path, out_dir: &Path, log: Log) -> Result<Metrics> {
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.to_model()?;
    let data = Dataset::load(manifest_path)?;
    if data.labels != ck.labels {
        return Err(Error::Data(format!(
            "manifest classes [{}] differ from the checkpoint's [{}]",
            data.labels.join(","),
            ck.labels.join(",")
        )));
    }
    echo_config(config, out_dir, "evaluate", log)?;
    let refs: Vec<&Tensor> = data.features.iter().collect();
    let preds = predict_labels(&model, &refs, PREDICT_CHUNK)?;
    let truths: Vec<usize> = data.records.iter().map(|r| r.label).collect();
    let metrics = compute_metrics(&preds, &truths, data.labels.len())?;

    let mut text = String::from("id,truth,predicted\n");
    for (r, &p) in data.records.iter().zip(&preds) {
        text.push_str(&format!("{},{},{}\n", r.id, data.labels[r.label], data.labels[p]));
    }
    let path = out_dir.join("predictions.csv");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let report = metrics_text(&data.labels, &metrics);
    let path = out_dir.join("evaluation.txt");
    fs::write(&path, &report).map_err(|e| Error::io(&path, e))?;
    for line in report.lines() {
        log(line);
    }
    Ok(metrics)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossvalReport {
    pub folds: Vec<FoldResult>,
    pub mean_wa: f64,
    pub mean_ua: f64,
}

impl CrossvalReport {
    pub const CSV_HEADER: &'static str = "fold,train,test,wa,ua";

    /// One row per fold followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut text = format!("{}\n", Self::CSV_HEADER);
        for f in &self.folds {
            text.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                f.fold, f.train_size, f.test_size, f.metrics.wa, f.metrics.ua
            ));
        }
        let train: usize = self.folds.iter().map(|f| f.train_size).sum();
        let test: usize = self.folds.iter().map(|f| f.test_size).sum();
        let k = self.folds.len().max(1);
        text.push_str(&format!(
            "mean,{},{},{:.6},{:.6}\n",
            train / k,
            test / k,
            self.mean_wa,
            self.mean_ua
        ));
        text
    }
}

/// Seed for fold `fold`, derived from the master seed.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(2 + fold as u64);
    rng.next_u64()
}

/// k-fold cross-validation on an in-memory dataset. Folds come from
/// [`stratified_kfold`] (explicit manifest folds are kept); fold `i` is
/// held out while a fresh model trains on the rest.
pub fn crossval_dataset(config: &RunConfig, data: &Dataset, log: Log) -> Result<CrossvalReport> {
    data.check_nodes(config)?;
    let k = config.folds;
    let assignment = stratified_kfold(&data.records, k, config.train.seed)?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == fold);
        if test.is_empty() || train.is_empty() {
            return Err(Error::Data(format!("fold {fold} leaves an empty train or test split")));
        }
        let started = Instant::now();
        let (model, _) = train_model(config, data, &train, fold_seed(config.train.seed, fold), &mut |_| {})?;
        let held = data.subset(&test);
        let preds = predict_labels(&model, &held.features, PREDICT_CHUNK)?;
        let metrics = compute_metrics(&preds, &held.labels, data.labels.len())?;
        log(&format!(
            "fold {fold}: train {} test {} wa {:.4} ua {:.4} ({:.1} s)",
            train.len(),
            test.len(),
            metrics.wa,
            metrics.ua,
            started.elapsed().as_secs_f64()
        ));
        folds.push(FoldResult {
            fold,
            train_size: train.len(),
            test_size: test.len(),
            metrics,
        });
    }
    let mean = |f: fn(&FoldResult) -> f64| folds.iter().map(f).sum::<f64>() / k as f64;
    Ok(CrossvalReport {
        mean_wa: mean(|f| f.metrics.wa),
        mean_ua: mean(|f| f.metrics.ua),
        folds,
    })
}

/// Cross-validation from a manifest; writes `crossval.csv` and `folds.csv`
/// (`id,fold`).
pub fn crossval(config: &RunConfig, manifest_path: &Path, out_dir: &Path, log: Log) -> Result<CrossvalReport> {
    let data = Dataset::load(manifest_path)?;
    echo_config(config, out_dir, "crossval", log)?;
    let assignment = stratified_kfold(&data.records, config.folds, config.train.seed)?;
    let mut folds_text = String::from("id,fold\n");
    for (r, f) in data.records.iter().zip(&assignment) {
        folds_text.push_str(&format!("{},{f}\n", r.id));
    }
    let path = out_dir.join("folds.csv");
    fs::write(&path, folds_text).map_err(|e| Error::io(&path, e))?;
    let report = crossval_dataset(config, &data, log)?;
    let path = out_dir.join("crossval.csv");
    fs::write(&path, report.to_csv()).map_err(|e| Error::io(&path, e))?;
    log(&format!("mean wa {:.4} ua {:.4}", report.mean_wa, report.mean_ua));
    Ok(report)
}

/// Runs [`crossval_dataset`] once per pooling mode. The CSV has columns
/// `pooling,wa,ua`.
pub fn pooling_ablation(config: &RunConfig, data: &Dataset, log: Log) -> Result<(Vec<(PoolMode, CrossvalReport)>, String)> {
    let mut rows = Vec::new();
    let mut text = String::from("pooling,wa,ua\n");
    for mode in [PoolMode::Sum, PoolMode::Mean, PoolMode::Max] {
        let mut c = config.clone();
        c.model.pooling = mode;
        log(&format!("pooling = {}", pool_mode_name(mode)));
        let report = crossval_dataset(&c, data, log)?;
        text.push_str(&format!(
            "{}pool,{:.4},{:.4}\n",
            pool_mode_name(mode),
            report.mean_wa,
            report.mean_ua
        ));
        rows.push((mode, report));
    }
    Ok((rows, text))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisReport {
    pub eigenvalues: Vec<f64>,
    pub jacobi_eigenvalues: Vec<f64>,
    pub max_eigenvalue_deviation: f64,
    pub max_projector_deviation: f64,
    pub orthonormality_error: f64,
}

fn matrix_csv(t: &Tensor) -> String {
    let mut text = String::new();
    for r in 0..t.rows() {
        let cells: Vec<String> = t.row(r).iter().map(|&v| format_float(v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text
}

/// Dumps the closed-form basis and its Jacobi counterpart and reports how
/// far apart they are. Writes `basis_u.csv`, `jacobi_u.csv`,
/// `eigenvalues.csv` and `basis_report.txt`.
pub fn inspect_basis(
    topology: Topology,
    nodes: usize,
    laplacian: LaplacianKind,
    out_dir: &Path,
    log: Log,
) -> Result<BasisReport> {
    let spec = GraphSpec::new(nodes, topology)?;
    let basis = basis_for(&spec, laplacian)?;
    let matrix = laplacian_of_kind(&spec, laplacian);
    let jacobi = jacobi_eigendecomposition(&matrix)?;
    let report = BasisReport {
        eigenvalues: basis.eigenvalues().to_vec(),
        jacobi_eigenvalues: jacobi.eigenvalues().to_vec(),
        max_eigenvalue_deviation: max_eigenvalue_deviation(&basis, &jacobi),
        max_projector_deviation: max_projector_deviation(&basis, &jacobi),
        orthonormality_error: basis.orthonormality_error(),
    };
    create_dir(out_dir)?;
    let write = |name: &str, text: String| {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write("basis_u.csv", matrix_csv(basis.u()))?;
    write("jacobi_u.csv", matrix_csv(jacobi.u()))?;
    let mut eig = String::from("k,frequency,closed_form,jacobi\n");
    for k in 0..nodes {
        let freq = basis
            .frequencies()
            .map(|f| f[k].to_string())
            .unwrap_or_default();
        eig.push_str(&format!(
            "{k},{freq},{},{}\n",
            format_float(report.eigenvalues[k]),
            format_float(report.jacobi_eigenvalues[k])
        ));
    }
    write("eigenvalues.csv", eig)?;
    let text = format!(
        "topology = {topology}\nnodes = {nodes}\nlaplacian = {laplacian}\n\
         closed_form = {}\nmax_eigenvalue_deviation = {:e}\nmax_projector_deviation = {:e}\n\
         orthonormality_error = {:e}\n",
        !(laplacian == LaplacianKind::Normalized && topology == Topology::Line),
        report.max_eigenvalue_deviation,
        report.max_projector_deviation,
        report.orthonormality_error
    );
    for line in text.lines() {
        log(line);
    }
    write("basis_report.txt", text)?;
    Ok(report)
}

/// Writes the synthetic corpus as feature CSVs plus `manifest.csv`, with
/// classes named `class_0`, `class_1`, and so on.
pub fn gen_synthetic(config: &RunConfig, out_dir: &Path, force: bool, log: Log) -> Result<PathBuf> {
    let manifest_path = out_dir.join("manifest.csv");
    refuse_overwrite(&manifest_path, force)?;
    echo_config(config, out_dir, "gen-synthetic", log)?;
    let spec = config.synthetic_spec();
    let corpus = generate_synthetic_corpus(&spec)?;
    let feature_dir = out_dir.join("features");
    create_dir(&feature_dir)?;
    let names: Vec<String> = (0..spec.features).map(|i| format!("feat_{i:02}")).collect();
    let mut records = Vec::with_capacity(corpus.ids.len());
    for ((id, &label), values) in corpus.ids.iter().zip(&corpus.labels).zip(&corpus.features) {
        let relative = PathBuf::from("features").join(format!("{id}.csv"));
        let m = FeatureMatrix::new(values.clone(), spec.nodes, names.clone())?;
        write_feature_csv(&out_dir.join(&relative), &m)?;
        records.push(UtteranceRecord {
            id: id.clone(),
            label,
            source: relative,
            spontaneity: None,
            fold: None,
        });
    }
    let labels: Vec<String> = (0..spec.classes).map(|c| format!("class_{c}")).collect();
    write_manifest(&manifest_path, &labels, &records)?;
    log(&format!(
        "gen-synthetic: {} samples, {} classes, {}x{} features -> {}",
        records.len(),
        spec.classes,
        spec.nodes,
        spec.features,
        manifest_path.display()
    ));
    Ok(manifest_path)
}
