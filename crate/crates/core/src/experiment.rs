//! Hyperparameter grid runner comparing the full-data model (`Full`), the
//! sensitive-attribute-removed model (`SR`) and the debiased model (`Ours`).
//!
//! Every config splits the data with its own permutation seed, trains the
//! three models on the training part and, once all configs have finished,
//! evaluates them on the test part minus every row removed by any config's
//! debiasing step.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema, RowId, SplitSpec};
use crate::debias::{debias_data, DebiasConfig};
use crate::error::{Error, Result};
use crate::fairness::{metrics_report, SensitiveBlind, SimilarityConfig};
use crate::influence::SolverConfig;
use crate::model::{train, Classifier, Hyperparameters, Mlp};

/// Stream of the evaluation pool, kept apart from the streams used while
/// debiasing.
pub const EVAL_STREAM: u64 = 1 << 40;

/// Power of two closest to `x`; an exact midpoint goes to the larger one.
pub fn nearest_power_of_two(x: f64) -> usize {
    if !(x > 1.0) {
        return 1;
    }
    let lo = 2f64.powi(x.log2().floor() as i32);
    let hi = lo * 2.0;
    if x - lo < hi - x {
        lo as usize
    } else {
        hi as usize
    }
}

/// `[n / 10, n / 20]`, each rounded with [`nearest_power_of_two`].
pub fn batch_size_choices(rows: usize) -> Vec<usize> {
    let mut out = vec![
        nearest_power_of_two(rows as f64 / 10.0),
        nearest_power_of_two(rows as f64 / 20.0),
    ];
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub hidden1: Vec<usize>,
    pub hidden2: Vec<usize>,
    /// Empty means the first `rule_batch_choices` entries of
    /// [`batch_size_choices`] for the dataset size.
    pub batch_sizes: Vec<usize>,
    pub rule_batch_choices: usize,
    pub permutation_seeds: Vec<u64>,
    pub lambda: f64,
    pub pool_multiplier: usize,
    pub train_fraction: f64,
    pub chunk_percent: f64,
    pub max_chunks: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub solver: SolverConfig,
    pub freeze_pool: bool,
    /// Configs run in parallel; 0 uses every core.
    pub workers: usize,
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
}

impl Default for GridSpec {
    /// The 2x1x1x2 desk grid.
    fn default() -> Self {
        let hp = Hyperparameters::default();
        Self {
            hidden1: vec![16, 24],
            hidden2: vec![8],
            batch_sizes: Vec::new(),
            rule_batch_choices: 1,
            permutation_seeds: vec![0, 1],
            lambda: 0.0,
            pool_multiplier: 100,
            train_fraction: 0.8,
            chunk_percent: 1.0,
            max_chunks: 100,
            epochs: hp.epochs,
            learning_rate: hp.learning_rate,
            solver: SolverConfig::default(),
            freeze_pool: false,
            workers: 0,
            dataset: None,
            schema: None,
        }
    }
}

impl GridSpec {
    /// 3 x 2 x 2 x 20 = 240 configs.
    pub fn full_grid() -> Self {
        Self {
            hidden1: vec![16, 24, 32],
            hidden2: vec![8, 12],
            rule_batch_choices: 2,
            permutation_seeds: (0..20).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden1.is_empty() || self.hidden2.is_empty() || self.permutation_seeds.is_empty()
        {
            return Err(Error::InvalidConfig(
                "every grid axis needs at least one choice".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        self.similarity(0).validate()?;
        self.solver.validate()
    }

    pub fn similarity(&self, rng_seed: u64) -> SimilarityConfig {
        SimilarityConfig {
            pool_multiplier: self.pool_multiplier,
            ..SimilarityConfig::for_lambda(self.lambda, rng_seed)
        }
    }

    /// The expanded grid, in the order seeds, hidden1, hidden2, batch size
    /// (batch size varies fastest).
    pub fn configs(&self, rows: usize) -> Vec<GridConfig> {
        let batches = if self.batch_sizes.is_empty() {
            let mut b = batch_size_choices(rows);
            b.truncate(self.rule_batch_choices.max(1));
            b
        } else {
            self.batch_sizes.clone()
        };
        let mut out = Vec::new();
        for &seed in &self.permutation_seeds {
            for &h1 in &self.hidden1 {
                for &h2 in &self.hidden2 {
                    for &b in &batches {
                        out.push(GridConfig {
                            index: out.len(),
                            hidden1: h1,
                            hidden2: h2,
                            batch_size: b,
                            permutation_seed: seed,
                        });
                    }
                }
            }
        }
        out
    }

    fn hyperparameters(&self, c: &GridConfig) -> Hyperparameters {
        Hyperparameters {
            hidden1: c.hidden1,
            hidden2: c.hidden2,
            batch_size: c.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            weight_init_seed: c.permutation_seed,
        }
    }

    fn debias_config(&self, c: &GridConfig) -> DebiasConfig {
        DebiasConfig {
            chunk_percent: self.chunk_percent,
            max_chunks: self.max_chunks,
            similarity: self.similarity(c.permutation_seed),
            hp: self.hyperparameters(c),
            solver: self.solver,
            freeze_pool: self.freeze_pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub index: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub batch_size: usize,
    pub permutation_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technique {
    Full,
    #[serde(rename = "SR")]
    Sr,
    Ours,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::Full, Technique::Sr, Technique::Ours];
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technique::Full => "Full",
            Technique::Sr => "SR",
            Technique::Ours => "Ours",
        })
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Full" => Ok(Technique::Full),
            "SR" => Ok(Technique::Sr),
            "Ours" => Ok(Technique::Ours),
            other => Err(Error::InvalidConfig(format!("unknown technique `{other}`"))),
        }
    }
}

/// Metrics of one technique under one config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub config: GridConfig,
    pub technique: Technique,
    pub individual_discrimination: f64,
    pub accuracy: f64,
    pub statistical_parity_difference: Option<f64>,
    pub removed_fraction: f64,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFailure {
    pub config: GridConfig,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Ordered by config index, then technique.
    pub records: Vec<ConfigRecord>,
    pub failures: Vec<ConfigFailure>,
    pub unfair_points: Vec<RowId>,
}

impl ExperimentResult {
    pub fn records_for(&self, t: Technique) -> impl Iterator<Item = &ConfigRecord> {
        self.records.iter().filter(move |r| r.technique == t)
    }

    pub fn picks(&self) -> Result<Picks> {
        picks(&self.records)
    }
}

pub fn unfair_points_union<'a>(removals: impl IntoIterator<Item = &'a [RowId]>) -> BTreeSet<RowId> {
    removals.into_iter().flatten().copied().collect()
}

/// `test` without the rows listed in `unfair`.
pub fn debiased_test_set(test: &Dataset, unfair: &BTreeSet<RowId>) -> Result<Dataset> {
    let ids: HashSet<RowId> = test
        .row_ids()
        .iter()
        .filter(|id| unfair.contains(id))
        .copied()
        .collect();
    let out = test.without_ids(&ids);
    if out.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(out)
}

struct Trained {
    config: GridConfig,
    test: Dataset,
    full: Mlp,
    sr: SensitiveBlind<Mlp>,
    ours: Mlp,
    removed: Vec<RowId>,
    removed_fraction: f64,
}

fn train_config(spec: &GridSpec, d: &Dataset, c: &GridConfig) -> Result<Trained> {
    let (train_set, test) = d.split(&SplitSpec {
        permutation_seed: c.permutation_seed,
        train_fraction: spec.train_fraction,
    })?;
    let hp = spec.hyperparameters(c);
    let full = train(&train_set, &hp)?;
    let sr = SensitiveBlind::new(train(&train_set.drop_sensitive()?, &hp)?, d.layout())?;
    let outcome = debias_data(&train_set, &spec.debias_config(c), train)?;
    Ok(Trained {
        config: *c,
        test,
        full,
        sr,
        ours: outcome.model,
        removed_fraction: outcome.report.removed_fraction(train_set.len()),
        removed: outcome.report.removed_row_ids,
    })
}

fn evaluate(
    spec: &GridSpec,
    d: &Dataset,
    t: &Trained,
    unfair: &BTreeSet<RowId>,
) -> Result<Vec<ConfigRecord>> {
    let test = debiased_test_set(&t.test, unfair)?;
    let sim = spec.similarity(t.config.permutation_seed);
    let models: [(Technique, &dyn Classifier, f64); 3] = [
        (Technique::Full, &t.full, 0.0),
        (Technique::Sr, &t.sr, 0.0),
        (Technique::Ours, &t.ours, t.removed_fraction),
    ];
    models
        .into_iter()
        .map(|(technique, m, removed_fraction)| {
            let r = metrics_report(&m, d, &test, &sim, EVAL_STREAM)?;
            Ok(ConfigRecord {
                config: t.config,
                technique,
                individual_discrimination: r.individual_discrimination,
                accuracy: r.accuracy,
                statistical_parity_difference: r.statistical_parity_difference,
                removed_fraction,
                test_rows: test.len(),
            })
        })
        .collect()
}

/// Loads the dataset and schema named in `spec` and runs the grid.
pub fn run_grid(spec: &GridSpec) -> Result<ExperimentResult> {
    let (Some(data), Some(schema)) = (&spec.dataset, &spec.schema) else {
        return Err(Error::InvalidConfig(
            "grid needs both a dataset and a schema path".into(),
        ));
    };
    let schema = FeatureSchema::from_path(schema)?;
    let d = Dataset::load(data, &schema)?;
    run_grid_on(spec, &d)
}

pub fn run_grid_on(spec: &GridSpec, d: &Dataset) -> Result<ExperimentResult> {
    spec.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let configs = spec.configs(d.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;

    let trained: Vec<Result<Trained>> =
        pool.install(|| configs.par_iter().map(|c| train_config(spec, d, c)).collect());

    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (c, t) in configs.iter().zip(trained) {
        match t {
            Ok(t) => ok.push(t),
            Err(e) => failures.push(ConfigFailure {
                config: *c,
                error: e.to_string(),
            }),
        }
    }
    let unfair = unfair_points_union(ok.iter().map(|t| t.removed.as_slice()));

    let evaluated: Vec<Result<Vec<ConfigRecord>>> =
        pool.install(|| ok.par_iter().map(|t| evaluate(spec, d, t, &unfair)).collect());
    let mut records = Vec::new();
    for (t, r) in ok.iter().zip(evaluated) {
        match r {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(ConfigFailure {
                config: t.config,
                error: e.to_string(),
            }),
        }
    }
    failures.sort_by_key(|f| f.config.index);

    Ok(ExperimentResult {
        records,
        failures,
        unfair_points: unfair.into_iter().collect(),
    })
}

/// Records chosen per technique by one criterion.
pub type PickTable = BTreeMap<Technique, ConfigRecord>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Picks {
    /// Lowest discrimination; ties go to higher accuracy, then lower config index.
    pub least_discrimination: PickTable,
    /// Highest accuracy; ties go to lower discrimination, then lower config index.
    pub highest_accuracy: PickTable,
    /// Lowest parity difference among records that have one; ties go to
    /// higher accuracy, then lower config index.
    pub least_parity: PickTable,
}

fn pick_by<F>(records: &[ConfigRecord], t: Technique, better: F) -> Option<ConfigRecord>
where
    F: Fn(&ConfigRecord, &ConfigRecord) -> std::cmp::Ordering,
{
    records
        .iter()
        .filter(|r| r.technique == t)
        .min_by(|a, b| better(a, b).then(a.config.index.cmp(&b.config.index)))
        .cloned()
}

pub fn picks(records: &[ConfigRecord]) -> Result<Picks> {
    if records.is_empty() {
        return Err(Error::EmptyResult);
    }
    let mut out = Picks {
        least_discrimination: BTreeMap::new(),
        highest_accuracy: BTreeMap::new(),
        least_parity: BTreeMap::new(),
    };
    for t in Technique::ALL {
        if let Some(r) = pick_by(records, t, |a, b| {
            a.individual_discrimination
                .total_cmp(&b.individual_discrimination)
                .then(b.accuracy.total_cmp(&a.accuracy))
        }) {
            out.least_discrimination.insert(t, r);
        }
        if let Some(r) = pick_by(records, t, |a, b| {
            b.accuracy
                .total_cmp(&a.accuracy)
                .then(a.individual_discrimination.total_cmp(&b.individual_discrimination))
        }) {
            out.highest_accuracy.insert(t, r);
        }
        let with_spd: Vec<ConfigRecord> = records
            .iter()
            .filter(|r| r.statistical_parity_difference.is_some())
            .cloned()
            .collect();
        if let Some(r) = pick_by(&with_spd, t, |a, b| {
            let (pa, pb) = (
                a.statistical_parity_difference.unwrap_or(f64::INFINITY),
                b.statistical_parity_difference.unwrap_or(f64::INFINITY),
            );
            pa.total_cmp(&pb).then(b.accuracy.total_cmp(&a.accuracy))
        }) {
            out.least_parity.insert(t, r);
        }
    }
    Ok(out)
}

/// Five-number summary of one metric for one technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub technique: Technique,
    pub metric: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const METRICS: [&str; 3] = [
    "individual_discrimination",
    "accuracy",
    "statistical_parity_difference",
];

pub fn box_stats(records: &[ConfigRecord]) -> Vec<BoxStats> {
    let mut out = Vec::new();
    for t in Technique::ALL {
        for metric in METRICS {
            let mut v: Vec<f64> = records
                .iter()
                .filter(|r| r.technique == t)
                .filter_map(|r| match metric {
                    "individual_discrimination" => Some(r.individual_discrimination),
                    "accuracy" => Some(r.accuracy),
                    _ => r.statistical_parity_difference,
                })
                .collect();
            if v.is_empty() {
                continue;
            }
            v.sort_by(f64::total_cmp);
            out.push(BoxStats {
                technique: t,
                metric: metric.to_string(),
                count: v.len(),
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
            });
        }
    }
    out
}

const CONFIG_HEADER: [&str; 11] = [
    "config_id",
    "hidden1",
    "hidden2",
    "batch_size",
    "permutation_seed",
    "technique",
    "individual_discrimination",
    "accuracy",
    "statistical_parity_difference",
    "removed_fraction",
    "test_rows",
];

pub fn write_records_csv<W: Write>(records: &[ConfigRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CONFIG_HEADER)?;
    for r in records {
        wtr.write_record([
            r.config.index.to_string(),
            r.config.hidden1.to_string(),
            r.config.hidden2.to_string(),
            r.config.batch_size.to_string(),
            r.config.permutation_seed.to_string(),
            r.technique.to_string(),
            r.individual_discrimination.to_string(),
            r.accuracy.to_string(),
            r.statistical_parity_difference
                .map_or_else(String::new, |v| v.to_string()),
            r.removed_fraction.to_string(),
            r.test_rows.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or_default();
    raw.parse().map_err(|_| Error::Parse {
        row: rec.position().map_or(0, |p| p.line() as usize),
        column: CONFIG_HEADER[i].to_string(),
        value: raw.to_string(),
    })
}

/// Parses the output of [`write_records_csv`].
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<ConfigRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CONFIG_HEADER) {
        return Err(Error::SchemaMismatch(format!(
            "expected header {}",
            CONFIG_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let spd = rec.get(8).unwrap_or_default();
        out.push(ConfigRecord {
            config: GridConfig {
                index: field(&rec, 0)?,
                hidden1: field(&rec, 1)?,
                hidden2: field(&rec, 2)?,
                batch_size: field(&rec, 3)?,
                permutation_seed: field(&rec, 4)?,
            },
            technique: field(&rec, 5)?,
            individual_discrimination: field(&rec, 6)?,
            accuracy: field(&rec, 7)?,
            statistical_parity_difference: if spd.is_empty() {
                None
            } else {
                Some(field(&rec, 8)?)
            },
            removed_fraction: field(&rec, 9)?,
            test_rows: field(&rec, 10)?,
        });
    }
    Ok(out)
}

pub fn write_box_csv<W: Write>(stats: &[BoxStats], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["technique", "metric", "count", "min", "q1", "median", "q3", "max"])?;
    for s in stats {
        wtr.write_record([
            s.technique.to_string(),
            s.metric.clone(),
            s.count.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub configs: usize,
    pub picks: Picks,
    pub failures: Vec<ConfigFailure>,
    pub unfair_points: usize,
}

/// Paths written by [`emit_reports`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub configs_csv: PathBuf,
    pub summary_json: PathBuf,
    pub boxplot_csv: PathBuf,
}

/// Summary and box-plot files derived from `records` alone, so a stored
/// `configs.csv` can be re-reported.
pub fn emit_summary(
    records: &[ConfigRecord],
    failures: &[ConfigFailure],
    unfair_points: usize,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let picks = picks(records)?;
    fs::create_dir_all(out_dir)?;
    let configs: BTreeSet<usize> = records.iter().map(|r| r.config.index).collect();
    let summary = Summary {
        configs: configs.len(),
        picks,
        failures: failures.to_vec(),
        unfair_points,
    };
    let summary_json = out_dir.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&summary)? + "\n")?;
    let boxplot_csv = out_dir.join("boxplot.csv");
    write_box_csv(&box_stats(records), fs::File::create(&boxplot_csv)?)?;
    Ok((summary_json, boxplot_csv))
}

pub fn emit_reports(result: &ExperimentResult, out_dir: impl AsRef<Path>) -> Result<ReportFiles> {
    let out_dir = out_dir.as_ref();
    if result.records.is_empty() {
        return Err(Error::EmptyResult);
    }
    fs::create_dir_all(out_dir)?;
    let configs_csv = out_dir.join("configs.csv");
    write_records_csv(&result.records, fs::File::create(&configs_csv)?)?;
    let (summary_json, boxplot_csv) = emit_summary(
        &result.records,
        &result.failures,
        result.unfair_points.len(),
        out_dir,
    )?;
    Ok(ReportFiles {
        configs_csv,
        summary_json,
        boxplot_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_two_rounding() {
        assert_eq!(nearest_power_of_two(100.0), 128);
        assert_eq!(nearest_power_of_two(50.0), 64);
        assert_eq!(nearest_power_of_two(40.0), 32);
        assert_eq!(nearest_power_of_two(48.0), 64);
        assert_eq!(nearest_power_of_two(0.7), 1);
        assert_eq!(batch_size_choices(1000), vec![128, 64]);
        assert_eq!(batch_size_choices(7), vec![1]);
    }

    #[test]
    fn grid_expansion() {
        let spec = GridSpec::default();
        let c = spec.configs(1000);
        assert_eq!(c.len(), 2 * 2);
        assert_eq!(GridSpec::full_grid().configs(1000).len(), 240);
        assert!(c.iter().enumerate().all(|(i, c)| c.index == i));
    }

    #[test]
    fn union_of_removals() {
        let a = [RowId(1), RowId(2)];
        let b = [RowId(2), RowId(3)];
        let u = unfair_points_union([&a[..], &b[..]]);
        assert_eq!(u.into_iter().collect::<Vec<_>>(), vec![RowId(1), RowId(2), RowId(3)]);
        assert!(unfair_points_union(Vec::<&[RowId]>::new()).is_empty());
    }

    fn rec(index: usize, t: Technique, disc: f64, acc: f64, spd: Option<f64>) -> ConfigRecord {
        ConfigRecord {
            config: GridConfig {
                index,
                hidden1: 16,
                hidden2: 8,
                batch_size: 4,
                permutation_seed: index as u64,
            },
            technique: t,
            individual_discrimination: disc,
            accuracy: acc,
            statistical_parity_difference: spd,
            removed_fraction: 0.0,
            test_rows: 10,
        }
    }

    #[test]
    fn pick_tie_breaks() {
        let records = vec![
            rec(0, Technique::Ours, 0.0, 0.7, Some(0.1)),
            rec(1, Technique::Ours, 0.0, 0.8, None),
            rec(2, Technique::Ours, 0.1, 0.8, Some(0.1)),
        ];
        let p = picks(&records).unwrap();
        assert_eq!(p.least_discrimination[&Technique::Ours].config.index, 1);
        assert_eq!(p.highest_accuracy[&Technique::Ours].config.index, 1);
        assert_eq!(p.least_parity[&Technique::Ours].config.index, 2);
        assert!(!p.least_discrimination.contains_key(&Technique::Full));
        assert!(matches!(picks(&[]), Err(Error::EmptyResult)));
    }

    #[test]
    fn records_csv_roundtrip() {
        let records = vec![
            rec(0, Technique::Full, 0.25, 0.75, Some(0.125)),
            rec(0, Technique::Sr, 0.0, 0.5, None),
        ];
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        assert_eq!(read_records_csv(&buf[..]).unwrap(), records);
    }

    #[test]
    fn box_summary() {
        let records: Vec<_> = [0.0, 0.1, 0.2, 0.3, 0.4]
            .iter()
            .enumerate()
            .map(|(i, &d)| rec(i, Technique::Full, d, 0.5, None))
            .collect();
        let b = box_stats(&records);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].metric, "individual_discrimination");
        assert!((b[0].q1 - 0.1).abs() < 1e-12 && (b[0].median - 0.2).abs() < 1e-12);
        assert_eq!(b[0].max, 0.4);
    }
}
