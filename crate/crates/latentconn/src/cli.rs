//! Command-line front end wiring the pipeline end to end.
//!
//! Every subcommand is a pure function of (inputs, config, seed): re-running
//! with the same arguments reproduces every output file byte for byte. A
//! `--config` JSON file supplies defaults; explicit flags override it; the
//! fully resolved configuration is echoed on stdout as one JSON line.
//! Exit codes: 0 success, 2 validation error, 3 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::analysis::{
    pairwise_complete, pearson_with_p, roc_auc, select_asd_feature, AucReport, StatsReport,
};
use crate::connectome::{
    build_connectivity, devectorize, fmt_sig, read_edges_csv, read_manifest,
    read_timeseries_csv, vectorize_upper, write_edges_csv, write_manifest, write_matrix_csv,
    Diagnosis, ManifestRow, RegionAtlas, SubjectRecord,
};
use crate::error::{Error, Result};
use crate::generator::{
    feature_delta, fcs_delta, generate_matrix, manifold_grid, shifted_code, DeltaMatrix,
};
use crate::heatmap::{write_delta_heatmap, write_manifold_sheet, write_matrix_heatmap};
use crate::synth::{self, SyntheticSpec};
use crate::vae::{load_checkpoint, save_checkpoint, train, TrainConfig};

#[derive(Parser)]
#[command(
    name = "latentconn",
    about = "Connectome feature learning: connectivity, VAE training, statistics, generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with a planted group factor
    Synth(SynthArgs),
    /// Build connectivity matrices and edge vectors from ROI time series
    Connectome(ConnectomeArgs),
    /// Train the variational autoencoder on a cohort
    Train(TrainArgs),
    /// Extract latent features and run the group statistics
    Analyze(AnalyzeArgs),
    /// Decode a feature shift into a delta matrix and strength report
    Generate(GenerateArgs),
    /// Decode a lattice of latent coordinates into a manifold sheet
    Manifold(ManifoldArgs),
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(args) => args.resolve().and_then(|c| {
            echo_config("synth", &c)?;
            cmd_synth(&c)
        }),
        Command::Connectome(args) => args.resolve().and_then(|c| {
            echo_config("connectome", &c)?;
            cmd_connectome(&c).map(|_| ())
        }),
        Command::Train(args) => args.resolve().and_then(|c| {
            echo_config("train", &c)?;
            cmd_train(&c)
        }),
        Command::Analyze(args) => args.resolve().and_then(|c| {
            echo_config("analyze", &c)?;
            cmd_analyze(&c).map(|_| ())
        }),
        Command::Generate(args) => args.resolve().and_then(|c| {
            echo_config("generate", &c)?;
            cmd_generate(&c)
        }),
        Command::Manifold(args) => args.resolve().and_then(|c| {
            echo_config("manifold", &c)?;
            cmd_manifold(&c)
        }),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            e.exit_code()
        }
    }
}

fn echo_config<T: Serialize>(command: &str, config: &T) -> Result<()> {
    let body = serde_json::to_value(config)
        .map_err(|e| Error::Parse(format!("config echo: {e}")))?;
    println!("{}", serde_json::json!({ "command": command, "config": body }));
    Ok(())
}

fn load_file_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::Validation(format!("{what} missing (flag or config file)")))
}

/// Worker cap: LATENTCONN_THREADS, else available parallelism capped at 8.
fn thread_count() -> usize {
    if let Ok(v) = std::env::var("LATENTCONN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

/// FNV-1a 64-bit hash, hex-encoded; used to stamp reports with the exact
/// checkpoint they came from.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Manifest rows joined with their edge CSVs (`<edges_dir>/<id>.csv`).
pub fn load_cohort(manifest: &Path, edges_dir: &Path) -> Result<Vec<SubjectRecord>> {
    let rows = read_manifest(manifest)?;
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "{}: manifest has no subjects",
            manifest.display()
        )));
    }
    let mut subjects = Vec::with_capacity(rows.len());
    for row in rows {
        let path = edges_dir.join(format!("{}.csv", row.id));
        let edges = read_edges_csv(&path)?;
        subjects.push(SubjectRecord {
            id: row.id,
            group: row.group,
            age: row.age,
            fiq: row.fiq,
            edges,
        });
    }
    Ok(subjects)
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn write_delta_csv(path: &Path, d: &DeltaMatrix) -> Result<()> {
    let n = d.n_regions();
    let mut out = String::with_capacity(n * n * 14);
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_sig(d.get(i, j), 9));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SynthArgs {
    /// JSON config file (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    asd_fraction: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SynthFileConfig {
    out: Option<PathBuf>,
    spec: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthConfig {
    pub out: PathBuf,
    pub spec: SyntheticSpec,
}

impl SynthArgs {
    fn resolve(self) -> Result<SynthConfig> {
        let file: SynthFileConfig = load_file_config(&self.config)?;
        let mut spec = file.spec.unwrap_or_default();
        if let Some(v) = self.subjects {
            spec.subjects = v;
        }
        if let Some(v) = self.asd_fraction {
            spec.asd_fraction = v;
        }
        if let Some(v) = self.noise_sd {
            spec.noise_sd = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        Ok(SynthConfig { out: require(self.out.or(file.out), "--out")?, spec })
    }
}

pub fn cmd_synth(config: &SynthConfig) -> Result<()> {
    let cohort = synth::generate(&config.spec)?;
    let edges_dir = config.out.join("edges");
    let matrices_dir = config.out.join("matrices");
    std::fs::create_dir_all(&edges_dir)?;
    std::fs::create_dir_all(&matrices_dir)?;

    let rows: Vec<ManifestRow> = cohort
        .subjects
        .iter()
        .map(|s| ManifestRow { id: s.id.clone(), group: s.group, age: s.age, fiq: s.fiq })
        .collect();
    write_manifest(&config.out.join("manifest.csv"), &rows)?;

    for s in &cohort.subjects {
        write_edges_csv(&edges_dir.join(format!("{}.csv", s.id)), &s.edges)?;
        write_matrix_csv(&matrices_dir.join(format!("{}.csv", s.id)), &devectorize(&s.edges))?;
    }

    // ground truth for recovery checks
    let atlas = RegionAtlas::aal90();
    let n = atlas.len();
    let mut truth = String::from("edge_index,region_i,region_j,loading\n");
    let mut pair = Vec::with_capacity(cohort.planted_edges.len());
    for i in 0..n {
        for j in (i + 1)..n {
            pair.push((i, j));
        }
    }
    for (&e, &l) in cohort.planted_edges.iter().zip(&cohort.loadings) {
        let (i, j) = pair[e];
        truth.push_str(&format!(
            "{e},{},{},{}\n",
            atlas.names()[i],
            atlas.names()[j],
            fmt_sig(l, 9)
        ));
    }
    std::fs::write(config.out.join("planted_edges.csv"), truth)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// connectome
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ConnectomeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of per-subject time-series CSVs (stem = subject id)
    #[arg(long)]
    timeseries: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConnectomeFileConfig {
    timeseries: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectomeConfig {
    pub timeseries: PathBuf,
    pub out: PathBuf,
}

impl ConnectomeArgs {
    fn resolve(self) -> Result<ConnectomeConfig> {
        let file: ConnectomeFileConfig = load_file_config(&self.config)?;
        Ok(ConnectomeConfig {
            timeseries: require(self.timeseries.or(file.timeseries), "--timeseries")?,
            out: require(self.out.or(file.out), "--out")?,
        })
    }
}

#[derive(Debug)]
pub struct ConnectomeSummary {
    pub converted: usize,
    pub rejected: Vec<(String, String)>,
}

pub fn cmd_connectome(config: &ConnectomeConfig) -> Result<ConnectomeSummary> {
    let atlas = RegionAtlas::aal90();
    let mut stems: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(&config.timeseries)? {
        let entry = entry?;
        let path = entry.path();
        if path.extension().map(|e| e == "csv").unwrap_or(false) {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Validation(format!("bad file name {}", path.display())))?
                .to_string();
            stems.push((stem, path));
        }
    }
    if stems.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no .csv time series found",
            config.timeseries.display()
        )));
    }
    stems.sort();

    let matrices_dir = config.out.join("matrices");
    let edges_dir = config.out.join("edges");
    std::fs::create_dir_all(&matrices_dir)?;
    std::fs::create_dir_all(&edges_dir)?;

    let convert = |stem: &str, path: &Path| -> Result<()> {
        let ts = read_timeseries_csv(path, &atlas)?;
        let matrix = build_connectivity(&ts)?;
        write_matrix_csv(&matrices_dir.join(format!("{stem}.csv")), &matrix)?;
        write_edges_csv(&edges_dir.join(format!("{stem}.csv")), &vectorize_upper(&matrix))?;
        Ok(())
    };

    let threads = thread_count().min(stems.len());
    let outcomes: Vec<Option<String>> = if threads <= 1 {
        stems
            .iter()
            .map(|(stem, path)| convert(stem, path).err().map(|e| e.to_string()))
            .collect()
    } else {
        let mut slots: Vec<Option<String>> = vec![None; stems.len()];
        let chunk = stems.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (slot_chunk, stem_chunk) in slots.chunks_mut(chunk).zip(stems.chunks(chunk)) {
                scope.spawn(move || {
                    for (slot, (stem, path)) in slot_chunk.iter_mut().zip(stem_chunk) {
                        *slot = convert(stem, path).err().map(|e| e.to_string());
                    }
                });
            }
        });
        slots
    };

    let mut rejected = Vec::new();
    let mut converted = 0usize;
    let mut report = String::from("subject_id,reason\n");
    for ((stem, _), outcome) in stems.iter().zip(outcomes) {
        match outcome {
            None => converted += 1,
            Some(reason) => {
                report.push_str(&format!("{},{}\n", stem, csv_quote(&reason)));
                rejected.push((stem.clone(), reason));
            }
        }
    }
    std::fs::write(config.out.join("rejects.csv"), report)?;
    for (stem, reason) in &rejected {
        eprintln!("rejected: {stem}: {reason}");
    }
    Ok(ConnectomeSummary { converted, rejected })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory of per-subject edge CSVs
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainFileConfig {
    manifest: Option<PathBuf>,
    edges: Option<PathBuf>,
    out: Option<PathBuf>,
    train: Option<TrainConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainCmdConfig {
    pub manifest: PathBuf,
    pub edges: PathBuf,
    pub out: PathBuf,
    pub train: TrainConfig,
}

impl TrainArgs {
    fn resolve(self) -> Result<TrainCmdConfig> {
        let file: TrainFileConfig = load_file_config(&self.config)?;
        let mut train = file.train.unwrap_or_default();
        if let Some(v) = self.epochs {
            train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            train.batch_size = v;
        }
        if let Some(v) = self.validation_fraction {
            train.validation_fraction = v;
        }
        if let Some(v) = self.seed {
            train.seed = v;
        }
        Ok(TrainCmdConfig {
            manifest: require(self.manifest.or(file.manifest), "--manifest")?,
            edges: require(self.edges.or(file.edges), "--edges")?,
            out: require(self.out.or(file.out), "--out")?,
            train,
        })
    }
}

pub fn cmd_train(config: &TrainCmdConfig) -> Result<()> {
    let subjects = load_cohort(&config.manifest, &config.edges)?;
    let (model, history) = train(&subjects, &config.train)?;
    std::fs::create_dir_all(&config.out)?;
    save_checkpoint(&model, &config.out.join("checkpoint.json"))?;
    let mut csv = String::from("epoch,train_total,train_recon,train_kl,val_total\n");
    for r in &history {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.train_total, r.train_reconstruction, r.train_kl, r.validation_total
        ));
    }
    std::fs::write(config.out.join("loss_history.csv"), csv)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Welch (unequal variance) t-test instead of pooled
    #[arg(long)]
    welch: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AnalyzeFileConfig {
    checkpoint: Option<PathBuf>,
    manifest: Option<PathBuf>,
    edges: Option<PathBuf>,
    out: Option<PathBuf>,
    welch: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeConfig {
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub edges: PathBuf,
    pub out: PathBuf,
    pub welch: bool,
}

impl AnalyzeArgs {
    fn resolve(self) -> Result<AnalyzeConfig> {
        let file: AnalyzeFileConfig = load_file_config(&self.config)?;
        Ok(AnalyzeConfig {
            checkpoint: require(self.checkpoint.or(file.checkpoint), "--checkpoint")?,
            manifest: require(self.manifest.or(file.manifest), "--manifest")?,
            edges: require(self.edges.or(file.edges), "--edges")?,
            out: require(self.out.or(file.out), "--out")?,
            welch: if self.welch { true } else { file.welch.unwrap_or(false) },
        })
    }
}

pub fn cmd_analyze(config: &AnalyzeConfig) -> Result<StatsReport> {
    let model = load_checkpoint(&config.checkpoint)?;
    let hash = fnv1a64_hex(&std::fs::read(&config.checkpoint)?);
    let subjects = load_cohort(&config.manifest, &config.edges)?;
    let features = crate::vae::extract_features(&model, &subjects)?;

    std::fs::create_dir_all(&config.out)?;
    let mut feature_csv = String::from("subject_id,f1,f2\n");
    for (id, f) in &features {
        let values: Vec<String> = f.iter().map(|v| format!("{v}")).collect();
        feature_csv.push_str(&format!("{},{}\n", id, values.join(",")));
    }
    std::fs::write(config.out.join("features.csv"), feature_csv)?;

    let rows: Vec<Vec<f64>> = features.iter().map(|(_, f)| f.clone()).collect();
    let labels: Vec<Diagnosis> = subjects.iter().map(|s| s.group).collect();
    let (selected, stats) = select_asd_feature(&rows, &labels, config.welch)?;

    let n_asd = labels.iter().filter(|&&l| l == Diagnosis::Asd).count();
    let iq_available = subjects.iter().filter(|s| s.fiq.is_some()).count();
    let mut iq_n_used = iq_available;
    let mut iq_correlation = None;
    let mut auc = None;
    if let Some(idx) = selected {
        let values: Vec<f64> = rows.iter().map(|r| r[idx]).collect();
        let iqs: Vec<Option<f64>> = subjects.iter().map(|s| s.fiq).collect();
        let (x, y) = pairwise_complete(&values, &iqs);
        iq_n_used = x.len();
        if x.len() >= 3 {
            let test = pearson_with_p(&x, &y)?;
            iq_correlation = Some(crate::analysis::IqCorrelation {
                r: test.r,
                p: test.p,
                n_used: test.n_used,
            });
        }
        let positives: Vec<bool> = labels.iter().map(|&l| l == Diagnosis::Asd).collect();
        let auc_value = roc_auc(&values, &positives)?;
        let asd_higher = stats[idx].asd_mean > stats[idx].nc_mean;
        auc = Some(AucReport { auc: auc_value, asd_higher });
    }

    let report = StatsReport {
        n_subjects: subjects.len(),
        n_asd,
        n_nc: subjects.len() - n_asd,
        method: if config.welch { "welch".into() } else { "pooled".into() },
        features: stats,
        selected_feature: selected,
        iq_n_used,
        iq_correlation,
        auc,
        checkpoint_hash: Some(hash),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Parse(format!("stats report: {e}")))?;
    std::fs::write(config.out.join("stats.json"), json + "\n")?;
    std::fs::write(config.out.join("stats.txt"), report.to_text())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Latent feature index (0-based)
    #[arg(long)]
    feature: Option<usize>,
    /// Shift in cohort-SD units (typically -1, 0 or 1)
    #[arg(long, allow_hyphen_values = true)]
    direction: Option<f64>,
    /// Age in years for the generative calls (defaults to cohort mean)
    #[arg(long)]
    age: Option<f64>,
    /// Annotation threshold on |delta FCS|
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GenerateFileConfig {
    checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
    feature: Option<usize>,
    direction: Option<f64>,
    age: Option<f64>,
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateConfig {
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub feature: usize,
    pub direction: f64,
    pub age: Option<f64>,
    pub threshold: f64,
}

impl GenerateArgs {
    fn resolve(self) -> Result<GenerateConfig> {
        let file: GenerateFileConfig = load_file_config(&self.config)?;
        Ok(GenerateConfig {
            checkpoint: require(self.checkpoint.or(file.checkpoint), "--checkpoint")?,
            out: require(self.out.or(file.out), "--out")?,
            feature: require(self.feature.or(file.feature), "--feature")?,
            direction: require(self.direction.or(file.direction), "--direction")?,
            age: self.age.or(file.age),
            threshold: self.threshold.or(file.threshold).unwrap_or(1.5),
        })
    }
}

pub fn cmd_generate(config: &GenerateConfig) -> Result<()> {
    let model = load_checkpoint(&config.checkpoint)?;
    let delta = feature_delta(&model, config.feature, config.direction, config.age)?;
    let strengths = fcs_delta(&model, config.feature, config.direction, config.age, config.threshold)?;
    std::fs::create_dir_all(&config.out)?;
    write_delta_csv(&config.out.join("delta.csv"), &delta)?;
    write_delta_heatmap(&config.out.join("delta.ppm"), &delta, None)?;

    // the two virtual matrices the delta is built from
    let cohort = model.cohort()?;
    let age = config.age.unwrap_or(cohort.mean_age_years);
    let mean_matrix = generate_matrix(&model, &cohort.latent_mean.clone(), age)?;
    let shifted = shifted_code(&model, config.feature, config.direction)?;
    let shifted_matrix = generate_matrix(&model, &shifted, age)?;
    write_matrix_csv(&config.out.join("mean_matrix.csv"), &mean_matrix)?;
    write_matrix_heatmap(&config.out.join("mean_matrix.ppm"), &mean_matrix)?;
    write_matrix_csv(&config.out.join("shifted_matrix.csv"), &shifted_matrix)?;
    write_matrix_heatmap(&config.out.join("shifted_matrix.ppm"), &shifted_matrix)?;

    let atlas = RegionAtlas::aal90();
    let mut csv = String::from("region,delta,annotated\n");
    for (k, d) in strengths.deltas.iter().enumerate() {
        let flag = if strengths.annotated.contains(&k) { 1 } else { 0 };
        csv.push_str(&format!("{},{},{}\n", atlas.names()[k], d, flag));
    }
    std::fs::write(config.out.join("fcs_delta.csv"), csv)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// manifold
// ---------------------------------------------------------------------------

fn parse_range(text: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected MIN,MAX, got {text:?}"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| format!("bad number {:?}", parts[0]))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| format!("bad number {:?}", parts[1]))?;
    Ok((lo, hi))
}

#[derive(Args)]
struct ManifoldArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lattice points per axis
    #[arg(long)]
    steps: Option<usize>,
    /// Latent range as MIN,MAX
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    range: Option<(f64, f64)>,
    #[arg(long)]
    age: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ManifoldFileConfig {
    checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
    steps: Option<usize>,
    range: Option<(f64, f64)>,
    age: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifoldConfig {
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    pub steps: usize,
    pub range: (f64, f64),
    pub age: Option<f64>,
}

impl ManifoldArgs {
    fn resolve(self) -> Result<ManifoldConfig> {
        let file: ManifoldFileConfig = load_file_config(&self.config)?;
        Ok(ManifoldConfig {
            checkpoint: require(self.checkpoint.or(file.checkpoint), "--checkpoint")?,
            out: require(self.out.or(file.out), "--out")?,
            steps: self.steps.or(file.steps).unwrap_or(5),
            range: self.range.or(file.range).unwrap_or((-2.0, 2.0)),
            age: self.age.or(file.age),
        })
    }
}

pub fn cmd_manifold(config: &ManifoldConfig) -> Result<()> {
    let model = load_checkpoint(&config.checkpoint)?;
    let grid = manifold_grid(&model, config.range, config.steps, config.age)?;
    std::fs::create_dir_all(&config.out)?;
    let steps = grid.coords.len();
    for (idx, cell) in grid.cells.iter().enumerate() {
        let r = idx / steps;
        let c = idx % steps;
        let name = format!(
            "cell_r{r}_c{c}_z{:+.3}_{:+.3}.csv",
            grid.coords[r], grid.coords[c]
        );
        write_delta_csv(&config.out.join(name), cell)?;
    }
    write_manifold_sheet(&config.out.join("manifold.ppm"), &grid)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_hash_reference_values() {
        // published FNV-1a test vectors
        assert_eq!(fnv1a64_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv1a64_hex(b"a"), "af63dc4c8601ec8c");
        assert_eq!(fnv1a64_hex(b"foobar"), "85944171f73967e8");
    }

    #[test]
    fn range_parser_accepts_negatives() {
        assert_eq!(parse_range("-2,2").unwrap(), (-2.0, 2.0));
        assert_eq!(parse_range(" -1.5 , 0.5 ").unwrap(), (-1.5, 0.5));
        assert!(parse_range("1").is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_quote("plain"), "plain");
        assert_eq!(csv_quote("a,b"), "\"a,b\"");
        assert_eq!(csv_quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
