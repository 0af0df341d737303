use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_training_set, derive_seed, enumerate_all, fraction_of_possible_gain, BenchError};
use crate::baselines::{
    fixed_threshold_feedback, marginal_design, marginal_design_codons, random_design, FeedbackConfig,
    LabeledTrainingSet,
};
use crate::engine::{dbas_run, quantile, DbasConfig, DesignProblem, Mode, RunRecord};
use crate::genmodels::GenModel;
use crate::oracles::{make_random_oracle, ConstraintOracle, MlpOracle, Predictor};
use crate::seq::{codons_for, Protein, Sequence};

pub const SUMMARY_HEADER: &str = "method,L,replicate,fraction_of_possible_gain,final_max,final_mean";
const CELLS_HEADER: &str = "L,replicate,oracle,train_max,global_max";
const RUNS_HEADER: &str = "method,L,replicate,dir";
const FINAL_HEADER: &str = "sample_index,sequence,score,weight";
const SPEC_HEADER: &str = "target_quantile,target,noise_variance,replicate,final_mean,final_std";
const SCATTER_HEADER: &str = "target,sample_index,predicted_score";

pub const DEFAULT_PROTEIN: &str = "SNILHPLFAVVVVHWSPLKIPSRWKIGVRQYV";

fn default_hidden() -> Vec<usize> {
    vec![50, 50]
}
fn default_train_size() -> usize {
    1000
}
fn default_cap() -> f64 {
    40.0
}
fn default_replicates() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_feedback_quantile() -> f64 {
    0.8
}
fn default_protein() -> String {
    DEFAULT_PROTEIN.to_string()
}
fn default_noise() -> f64 {
    0.36
}
fn default_spec_length() -> usize {
    20
}
fn default_noise_grid() -> Vec<f64> {
    vec![0.36, 0.05]
}
fn default_target_quantiles() -> Vec<f64> {
    vec![0.1, 0.5, 0.9]
}
fn default_reference() -> usize {
    10_000
}
fn default_sweep() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 0.95]
}
fn default_sweep_length() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    /// Noise-free random oracles at each length, scored against enumeration.
    RandomNoiseFree {
        lengths: Vec<usize>,
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_train_size")]
        train_size: usize,
        #[serde(default = "default_cap")]
        percentile_cap: f64,
    },
    /// DbAS alone at one length for each quantile in `quantiles`.
    QSweep {
        #[serde(default = "default_sweep_length")]
        length: usize,
        #[serde(default = "default_sweep")]
        quantiles: Vec<f64>,
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_train_size")]
        train_size: usize,
        #[serde(default = "default_cap")]
        percentile_cap: f64,
    },
    /// Noisy oracle over back-translations of `protein`, with the
    /// translation constraint as a side condition.
    NoisyConstrained {
        #[serde(default = "default_protein")]
        protein: String,
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_noise")]
        noise_variance: f64,
        #[serde(default = "default_train_size")]
        init_size: usize,
    },
    /// Interval targets at quantiles of the oracle's score distribution, run
    /// once per noise variance.
    Specification {
        #[serde(default = "default_spec_length")]
        length: usize,
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_noise_grid")]
        noise_variances: Vec<f64>,
        #[serde(default = "default_target_quantiles")]
        target_quantiles: Vec<f64>,
        #[serde(default = "default_reference")]
        reference_samples: usize,
    },
}

/// Which comparison methods run next to DbAS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Methods {
    #[serde(default = "default_true")]
    pub dbas: bool,
    #[serde(default = "default_true")]
    pub random: bool,
    #[serde(default = "default_true")]
    pub marginal: bool,
    #[serde(default = "default_true")]
    pub feedback: bool,
    /// Percentile of the initial scores used as the feedback threshold.
    #[serde(default = "default_feedback_quantile")]
    pub feedback_quantile: f64,
}

impl Default for Methods {
    fn default() -> Self {
        Self { dbas: true, random: true, marginal: true, feedback: true, feedback_quantile: 0.8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Master seed; every oracle, training set and run seed derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Shared run settings. `seed` and `mode` are overwritten per run.
    pub dbas: DbasConfig,
    #[serde(default)]
    pub methods: Methods,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.dbas.validate()?;
        if self.replicates == 0 {
            return Err(BenchError::InvalidConfig("replicates must be positive".into()));
        }
        let q = self.methods.feedback_quantile;
        if !(0.0..=1.0).contains(&q) {
            return Err(BenchError::InvalidConfig(format!("feedback_quantile {q} outside [0, 1]")));
        }
        match &self.experiment {
            ExperimentKind::RandomNoiseFree { lengths, .. } if lengths.is_empty() => {
                Err(BenchError::InvalidConfig("no lengths given".into()))
            }
            ExperimentKind::QSweep { quantiles, .. } if quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) => {
                Err(BenchError::InvalidConfig("sweep quantile outside [0, 1]".into()))
            }
            ExperimentKind::Specification { target_quantiles, noise_variances, .. } => {
                if target_quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
                    return Err(BenchError::InvalidConfig("target quantile outside [0, 1]".into()));
                }
                if noise_variances.iter().any(|v| !(*v >= 0.0)) {
                    return Err(BenchError::InvalidConfig("negative noise variance".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub length: usize,
    pub replicate: usize,
    pub fraction_of_possible_gain: Option<f64>,
    /// Best expected score among admitted generated sequences.
    pub final_max: Option<f64>,
    /// Mean expected score of the last batch.
    pub final_mean: f64,
}

impl SummaryRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method,
            self.length,
            self.replicate,
            opt(self.fraction_of_possible_gain),
            opt(self.final_max),
            self.final_mean
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// One (length, replicate) problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord {
    pub length: usize,
    pub replicate: usize,
    pub oracle: MlpOracle,
    pub train_max: Option<f64>,
    pub global_max: Option<f64>,
}

/// One specification run's final-batch statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecRecord {
    pub target_quantile: f64,
    pub target: f64,
    pub noise_variance: f64,
    pub replicate: usize,
    pub final_scores: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
}

/// A finished method run. `record` is absent for the one-shot marginal design.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: String,
    pub length: usize,
    pub replicate: usize,
    pub record: Option<RunRecord>,
    pub best: Option<(Sequence, f64)>,
    pub final_samples: Vec<(Sequence, f64, f64)>,
}

impl MethodRun {
    fn from_record(method: String, length: usize, replicate: usize, record: RunRecord) -> Self {
        let final_samples = record
            .final_samples
            .samples()
            .iter()
            .zip(&record.final_scores)
            .zip(record.final_samples.weights())
            .map(|((s, &y), &w)| (s.clone(), y, w))
            .collect();
        Self { method, length, replicate, best: record.best.clone(), record: Some(record), final_samples }
    }

    fn one_shot(method: &str, length: usize, replicate: usize, seq: Sequence, score: f64) -> Self {
        Self {
            method: method.into(),
            length,
            replicate,
            record: None,
            best: Some((seq.clone(), score)),
            final_samples: vec![(seq, score, 1.0)],
        }
    }

    fn dir_name(&self) -> String {
        format!("{}_L{}_r{}", self.method, self.length, self.replicate)
    }

    fn final_mean(&self) -> f64 {
        mean(self.final_samples.iter().map(|s| s.1))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<CellRecord>,
    pub runs: Vec<MethodRun>,
    pub spec: Vec<SpecRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn write_file(path: &Path, contents: &str) -> Result<(), BenchError> {
    fs::write(path, contents).map_err(|source| BenchError::Io { path: path.display().to_string(), source })
}

fn read_file(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.display().to_string(), source })
}

fn make_dir(path: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(path).map_err(|source| BenchError::Io { path: path.display().to_string(), source })
}

fn oracle_file(length: usize, replicate: usize) -> String {
    format!("oracles/L{length}_r{replicate}.json")
}

struct CellPlan {
    length: usize,
    replicate: usize,
    seed: u64,
}

impl CellPlan {
    fn oracle_seed(&self) -> u64 {
        derive_seed(self.seed, 0)
    }
    fn data_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }
    fn run_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed, 2 + stream)
    }
}

fn plans(cfg: &ExperimentConfig) -> Vec<CellPlan> {
    let lengths = match &cfg.experiment {
        ExperimentKind::RandomNoiseFree { lengths, .. } => lengths.clone(),
        ExperimentKind::QSweep { length, .. } => vec![*length],
        ExperimentKind::NoisyConstrained { protein, .. } => vec![3 * protein.len()],
        ExperimentKind::Specification { length, .. } => vec![*length],
    };
    let mut out = Vec::new();
    for &length in &lengths {
        for replicate in 0..cfg.replicates {
            let index = out.len() as u64;
            out.push(CellPlan { length, replicate, seed: derive_seed(cfg.seed, index) });
        }
    }
    out
}

fn run_config(base: &DbasConfig, mode: Mode, quantile: f64, seed: u64) -> DbasConfig {
    DbasConfig { mode, quantile, seed, ..base.clone() }
}

struct CellResult {
    cell: CellRecord,
    runs: Vec<MethodRun>,
    spec: Vec<SpecRecord>,
}

fn enumerated_cell(
    cfg: &ExperimentConfig,
    plan: &CellPlan,
    hidden: &[usize],
    train_size: usize,
    percentile_cap: f64,
    sweep: Option<&[f64]>,
) -> Result<CellResult, BenchError> {
    let len = plan.length;
    let oracle = make_random_oracle(len, hidden, plan.oracle_seed())?;
    let table = enumerate_all(len, &oracle)?;
    let train = build_training_set(&table, train_size, percentile_cap, plan.data_seed())?;
    let init = train.sequences();
    let problem = DesignProblem::new(&oracle);
    let m = &cfg.methods;
    let mut runs = Vec::new();
    match sweep {
        Some(quantiles) => {
            for &q in quantiles {
                let rc = run_config(&cfg.dbas, Mode::Maximize, q, plan.run_seed(0));
                let rec = dbas_run(&rc, &problem, Some(&init))?;
                runs.push(MethodRun::from_record(format!("dbas_q{q}"), len, plan.replicate, rec));
            }
        }
        None => {
            if m.dbas {
                let rc = run_config(&cfg.dbas, Mode::Maximize, cfg.dbas.quantile, plan.run_seed(0));
                let rec = dbas_run(&rc, &problem, Some(&init))?;
                runs.push(MethodRun::from_record("dbas".into(), len, plan.replicate, rec));
            }
            if m.feedback {
                let fc = feedback_config(cfg, plan.run_seed(1));
                let rec = fixed_threshold_feedback(&fc, &problem, &init)?;
                runs.push(MethodRun::from_record("feedback".into(), len, plan.replicate, rec));
            }
            if m.random {
                let rec = random_design(len, cfg.dbas.budget, cfg.dbas.batch_size, &problem, plan.run_seed(2))?;
                runs.push(MethodRun::from_record("random".into(), len, plan.replicate, rec));
            }
            if m.marginal {
                let seq = marginal_design(&train)?;
                let score = oracle.mean(&seq);
                runs.push(MethodRun::one_shot("marginal", len, plan.replicate, seq, score));
            }
        }
    }
    let cell = CellRecord {
        length: len,
        replicate: plan.replicate,
        oracle,
        train_max: train.max_label(),
        global_max: Some(table.global_max()),
    };
    Ok(CellResult { cell, runs, spec: Vec::new() })
}

fn feedback_config(cfg: &ExperimentConfig, seed: u64) -> FeedbackConfig {
    let mut dc = cfg.dbas.clone();
    dc.seed = seed;
    let mut fc = FeedbackConfig::matching(&dc);
    fc.threshold_quantile = cfg.methods.feedback_quantile;
    fc
}

/// Uniformly random synonymous back-translations of `protein`.
pub fn random_back_translations(protein: &Protein, count: usize, seed: u64) -> Vec<Sequence> {
    let options: Vec<Vec<[u8; 3]>> = protein.residues().iter().map(|&aa| codons_for(aa)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut symbols = Vec::with_capacity(3 * options.len());
            for choices in &options {
                symbols.extend_from_slice(&choices[rng.random_range(0..choices.len())]);
            }
            Sequence::from_indices(symbols).expect("non-empty protein")
        })
        .collect()
}

fn constrained_cell(
    cfg: &ExperimentConfig,
    plan: &CellPlan,
    protein: &Protein,
    hidden: &[usize],
    noise_variance: f64,
    init_size: usize,
) -> Result<CellResult, BenchError> {
    let len = plan.length;
    let oracle = make_random_oracle(len, hidden, plan.oracle_seed())?.with_noise_variance(noise_variance)?;
    let constraint = ConstraintOracle::new(protein.clone())?;
    let problem = DesignProblem::new(&oracle).with_condition(&constraint);
    let init = random_back_translations(protein, init_size, plan.data_seed());
    let m = &cfg.methods;
    let mut runs = Vec::new();
    if m.dbas {
        let rc = run_config(&cfg.dbas, Mode::Maximize, cfg.dbas.quantile, plan.run_seed(0));
        let rec = dbas_run(&rc, &problem, Some(&init))?;
        runs.push(MethodRun::from_record("dbas".into(), len, plan.replicate, rec));
    }
    if m.feedback {
        let rec = fixed_threshold_feedback(&feedback_config(cfg, plan.run_seed(1)), &problem, &init)?;
        runs.push(MethodRun::from_record("feedback".into(), len, plan.replicate, rec));
    }
    if m.random {
        let rec = random_design(len, cfg.dbas.budget, cfg.dbas.batch_size, &problem, plan.run_seed(2))?;
        runs.push(MethodRun::from_record("random".into(), len, plan.replicate, rec));
    }
    if m.marginal {
        let pairs = init.iter().map(|s| (s.clone(), oracle.mean(s))).collect();
        let seq = marginal_design_codons(&LabeledTrainingSet::new(pairs)?, protein)?;
        let score = oracle.mean(&seq);
        runs.push(MethodRun::one_shot("marginal", len, plan.replicate, seq, score));
    }
    let cell = CellRecord { length: len, replicate: plan.replicate, oracle, train_max: None, global_max: None };
    Ok(CellResult { cell, runs, spec: Vec::new() })
}

fn spec_method(target_index: usize, variance: f64) -> String {
    format!("dbas_t{target_index}_var{variance}")
}

fn specification_cell(
    cfg: &ExperimentConfig,
    plan: &CellPlan,
    hidden: &[usize],
    noise_variances: &[f64],
    target_quantiles: &[f64],
    reference_samples: usize,
) -> Result<CellResult, BenchError> {
    let len = plan.length;
    let base = make_random_oracle(len, hidden, plan.oracle_seed())?;
    let reference: Vec<f64> = GenModel::uniform(len)
        .sample_seeded(reference_samples.max(1), plan.data_seed())
        .iter()
        .map(|s| base.mean(s))
        .collect();
    let mut runs = Vec::new();
    let mut spec = Vec::new();
    for (ti, &tq) in target_quantiles.iter().enumerate() {
        let target = quantile(&reference, tq)?;
        for &v in noise_variances {
            let oracle = base.clone().with_noise_variance(v)?;
            let problem = DesignProblem::new(&oracle);
            let rc = run_config(&cfg.dbas, Mode::Specify { target }, cfg.dbas.quantile, plan.run_seed(ti as u64));
            let rec = dbas_run(&rc, &problem, None)?;
            let scores = rec.final_scores.clone();
            let mu = mean(scores.iter().copied());
            let var = scores.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / scores.len() as f64;
            spec.push(SpecRecord {
                target_quantile: tq,
                target,
                noise_variance: v,
                replicate: plan.replicate,
                final_scores: scores,
                final_mean: mu,
                final_std: var.sqrt(),
            });
            runs.push(MethodRun::from_record(spec_method(ti, v), len, plan.replicate, rec));
        }
    }
    let cell = CellRecord { length: len, replicate: plan.replicate, oracle: base, train_max: None, global_max: None };
    Ok(CellResult { cell, runs, spec })
}

fn run_cell(cfg: &ExperimentConfig, plan: &CellPlan) -> Result<CellResult, BenchError> {
    match &cfg.experiment {
        ExperimentKind::RandomNoiseFree { hidden, train_size, percentile_cap, .. } => {
            enumerated_cell(cfg, plan, hidden, *train_size, *percentile_cap, None)
        }
        ExperimentKind::QSweep { quantiles, hidden, train_size, percentile_cap, .. } => {
            enumerated_cell(cfg, plan, hidden, *train_size, *percentile_cap, Some(quantiles))
        }
        ExperimentKind::NoisyConstrained { protein, hidden, noise_variance, init_size } => {
            let protein: Protein = protein.parse()?;
            constrained_cell(cfg, plan, &protein, hidden, *noise_variance, *init_size)
        }
        ExperimentKind::Specification { hidden, noise_variances, target_quantiles, reference_samples, .. } => {
            specification_cell(cfg, plan, hidden, noise_variances, target_quantiles, *reference_samples)
        }
    }
}

fn summarize(cell: &CellRecord, run: &MethodRun) -> Result<SummaryRow, BenchError> {
    let final_max = run.best.as_ref().map(|b| b.1);
    let fraction = match (final_max, cell.train_max, cell.global_max) {
        (Some(y), Some(t), Some(g)) => Some(fraction_of_possible_gain(y, t, g)?),
        _ => None,
    };
    Ok(SummaryRow {
        method: run.method.clone(),
        length: run.length,
        replicate: run.replicate,
        fraction_of_possible_gain: fraction,
        final_max,
        final_mean: run.final_mean(),
    })
}

fn write_run(dir: &Path, run: &MethodRun) -> Result<(), BenchError> {
    make_dir(dir)?;
    if let Some(rec) = &run.record {
        write_file(&dir.join("trajectory.csv"), &rec.to_csv())?;
        write_file(&dir.join("model.json"), &rec.final_model.to_json())?;
    }
    let mut fin = format!("{FINAL_HEADER}\n");
    for (i, (s, y, w)) in run.final_samples.iter().enumerate() {
        writeln!(fin, "{i},{s},{y},{w}").unwrap();
    }
    write_file(&dir.join("final.csv"), &fin)?;
    let mut best = String::from("sequence,score\n");
    if let Some((s, y)) = &run.best {
        writeln!(best, "{s},{y}").unwrap();
    }
    write_file(&dir.join("best.csv"), &best)
}

fn write_scatter(out: &Path, spec: &[SpecRecord]) -> Result<(), BenchError> {
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for r in spec {
        if !keys.contains(&(r.replicate, r.noise_variance)) {
            keys.push((r.replicate, r.noise_variance));
        }
    }
    for (rep, v) in keys {
        let mut text = format!("{SCATTER_HEADER}\n");
        for r in spec.iter().filter(|r| r.replicate == rep && r.noise_variance == v) {
            for (i, y) in r.final_scores.iter().enumerate() {
                writeln!(text, "{},{i},{y}", r.target).unwrap();
            }
        }
        write_file(&out.join(format!("scatter_var{v}_r{rep}.csv")), &text)?;
    }
    Ok(())
}

/// Runs every cell (in parallel), reduces in cell order, and optionally
/// writes the summary, per-cell oracle files and per-run CSVs under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    scatter: bool,
) -> Result<ExperimentOutput, BenchError> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        make_dir(&dir.join("oracles"))?;
        make_dir(&dir.join("runs"))?;
    }
    let results: Vec<CellResult> = plans(cfg)
        .par_iter()
        .map(|plan| {
            let res = run_cell(cfg, plan)?;
            if let Some(dir) = out_dir {
                write_file(&dir.join(oracle_file(plan.length, plan.replicate)), &res.cell.oracle.to_json())?;
                for run in &res.runs {
                    write_run(&dir.join("runs").join(run.dir_name()), run)?;
                }
            }
            Ok(res)
        })
        .collect::<Result<_, BenchError>>()?;

    let mut summary = Vec::new();
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    let mut spec = Vec::new();
    for res in results {
        for run in &res.runs {
            summary.push(summarize(&res.cell, run)?);
        }
        cells.push(res.cell);
        runs.extend(res.runs);
        spec.extend(res.spec);
    }

    if let Some(dir) = out_dir {
        write_file(&dir.join("summary.csv"), &summary_csv(&summary))?;
        let mut text = format!("{CELLS_HEADER}\n");
        for c in &cells {
            writeln!(
                text,
                "{},{},{},{},{}",
                c.length,
                c.replicate,
                oracle_file(c.length, c.replicate),
                opt(c.train_max),
                opt(c.global_max)
            )
            .unwrap();
        }
        write_file(&dir.join("cells.csv"), &text)?;
        let mut text = format!("{RUNS_HEADER}\n");
        for r in &runs {
            writeln!(text, "{},{},{},runs/{}", r.method, r.length, r.replicate, r.dir_name()).unwrap();
        }
        write_file(&dir.join("runs.csv"), &text)?;
        if !spec.is_empty() {
            let mut text = format!("{SPEC_HEADER}\n");
            for r in &spec {
                writeln!(
                    text,
                    "{},{},{},{},{},{}",
                    r.target_quantile, r.target, r.noise_variance, r.replicate, r.final_mean, r.final_std
                )
                .unwrap();
            }
            write_file(&dir.join("spec_summary.csv"), &text)?;
            if scatter {
                write_scatter(dir, &spec)?;
            }
        }
    }
    Ok(ExperimentOutput { summary, cells, runs, spec })
}

fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>, BenchError> {
    let text = read_file(path)?;
    let bad = |reason: String| BenchError::Format { path: path.display().to_string(), reason };
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(bad(format!("expected header {header:?}")));
    }
    let width = header.split(',').count();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let fields: Vec<String> = l.split(',').map(str::to_string).collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(bad(format!("row {l:?} has {} fields", fields.len())))
            }
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T, BenchError>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e: T::Err| BenchError::Format { path: path.display().to_string(), reason: format!("{s:?}: {e}") })
}

fn parse_opt(path: &Path, s: &str) -> Result<Option<f64>, BenchError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(path, s).map(Some)
    }
}

/// Recomputes the summary from the files `run_experiment` wrote: each run's
/// best and final sequences are re-scored with the stored oracle, and gains
/// use the stored training and global maxima.
pub fn compare_summary(out_dir: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    let cells_path = out_dir.join("cells.csv");
    let mut cells = Vec::new();
    for f in csv_rows(&cells_path, CELLS_HEADER)? {
        let length: usize = parse_field(&cells_path, &f[0])?;
        let replicate: usize = parse_field(&cells_path, &f[1])?;
        let oracle = MlpOracle::from_json(&read_file(&out_dir.join(&f[2]))?)?;
        cells.push(CellRecord {
            length,
            replicate,
            oracle,
            train_max: parse_opt(&cells_path, &f[3])?,
            global_max: parse_opt(&cells_path, &f[4])?,
        });
    }
    let runs_path = out_dir.join("runs.csv");
    let mut rows = Vec::new();
    for f in csv_rows(&runs_path, RUNS_HEADER)? {
        let length: usize = parse_field(&runs_path, &f[1])?;
        let replicate: usize = parse_field(&runs_path, &f[2])?;
        let cell = cells.iter().find(|c| c.length == length && c.replicate == replicate).ok_or_else(|| {
            BenchError::Format {
                path: runs_path.display().to_string(),
                reason: format!("no cell for L={length} replicate={replicate}"),
            }
        })?;
        let dir = out_dir.join(&f[3]);
        let best_path = dir.join("best.csv");
        let best = match csv_rows(&best_path, "sequence,score")?.first() {
            Some(b) => {
                let s: Sequence = parse_field(&best_path, &b[0])?;
                let y = cell.oracle.mean(&s);
                Some((s, y))
            }
            None => None,
        };
        let final_path = dir.join("final.csv");
        let mut final_samples = Vec::new();
        for r in csv_rows(&final_path, FINAL_HEADER)? {
            let s: Sequence = parse_field(&final_path, &r[1])?;
            let w: f64 = parse_field(&final_path, &r[3])?;
            let y = cell.oracle.mean(&s);
            final_samples.push((s, y, w));
        }
        let run = MethodRun { method: f[0].clone(), length, replicate, record: None, best, final_samples };
        rows.push(summarize(cell, &run)?);
    }
    Ok(rows)
}
