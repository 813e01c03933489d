use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport, Weighting};
use crate::corpus::{split_dev, stable_hash, subsample_with, DomainDataset, SubsampleMode};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::text::EmbeddingTable;
use crate::training::{train, DomainSplit, TrainConfig, Trained};

/// Fraction of each in-domain subsample held out for model selection.
pub const DEV_FRACTION: f64 = 0.2;

fn find<'a>(datasets: &'a [DomainDataset], domain: &str) -> Result<&'a DomainDataset> {
    datasets
        .iter()
        .find(|d| d.name() == domain)
        .ok_or_else(|| Error::Schema(format!("no dataset for domain '{domain}'")))
}

/// Trains a concept tagger on every domain except `target` and scores it on
/// `target`'s test set using nothing but the target schema.
pub fn zero_shot_eval(
    target: &str,
    datasets: &[DomainDataset],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
    weighting: Weighting,
) -> Result<(MetricsReport, Trained)> {
    if cfg.kind != ModelKind::Ct {
        return Err(Error::Unsupported(format!(
            "{} has no output layer for an unseen domain; only ct can tag with zero in-domain samples",
            cfg.kind
        )));
    }
    let target_ds = find(datasets, target)?;
    let splits: Vec<DomainSplit> = datasets
        .iter()
        .filter(|d| d.name() != target)
        .map(|d| DomainSplit::new(d.schema.clone(), d.train.clone(), Vec::new()))
        .collect();
    let trained = train(&splits, table, cfg)?;
    let report = evaluate(&trained.model, &target_ds.schema, &target_ds.test, table, weighting)?;
    Ok((report, trained))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    pub points: Vec<usize>,
    pub runs: usize,
    pub kinds: Vec<ModelKind>,
    /// Base training setup; `kind` is overridden per cell and `seed` mixed
    /// with the cell key.
    pub train: TrainConfig,
    pub weighting: Weighting,
    pub subsample: SubsampleMode,
}

impl CurveOptions {
    pub fn new(train: TrainConfig) -> Self {
        CurveOptions {
            points: vec![0, 5, 20, 100, 1000],
            runs: 10,
            kinds: ModelKind::ALL.to_vec(),
            train,
            weighting: Weighting::Support,
            subsample: SubsampleMode::Blocks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    pub domain: String,
    pub point: usize,
    pub kind: ModelKind,
    pub mean: f64,
    /// One weighted F1 per run, in run order.
    pub runs: Vec<f64>,
}

/// Mean weighted F1 per (target domain, in-domain sample count, model kind).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub domains: Vec<String>,
    pub points: Vec<usize>,
    pub kinds: Vec<ModelKind>,
    pub runs: usize,
    /// Sorted by (domain order, point, kind).
    pub cells: Vec<CurveCell>,
}

impl CurveTable {
    pub fn get(&self, domain: &str, point: usize, kind: ModelKind) -> Option<&CurveCell> {
        self.cells
            .iter()
            .find(|c| c.domain == domain && c.point == point && c.kind == kind)
    }
}

/// Only the concept tagger can be evaluated without in-domain data.
pub fn kind_available(kind: ModelKind, point: usize) -> bool {
    point > 0 || kind == ModelKind::Ct
}

/// For every target, point `n` and run `r`: take `n` in-domain samples
/// (block `r` of `runs`), hold out the last 20% as dev, train each kind
/// (single-task on in-domain data only, the others with every other domain's
/// full training set too) and score on the target's test set.
pub fn learning_curve(
    targets: &[String],
    datasets: &[DomainDataset],
    table: &EmbeddingTable,
    opts: &CurveOptions,
) -> Result<CurveTable> {
    if opts.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let mut points: Vec<usize> = opts.points.clone();
    points.sort_unstable();
    points.dedup();
    let mut kinds = opts.kinds.clone();
    kinds.sort();
    kinds.dedup();
    let mut cells: BTreeMap<(usize, usize, ModelKind), Vec<f64>> = BTreeMap::new();
    let mut used_points = Vec::new();
    for (ti, target) in targets.iter().enumerate() {
        let target_ds = find(datasets, target)?;
        for &n in &points {
            if n > target_ds.train.len() {
                warn!("{target}: skipping point {n}, only {} training samples", target_ds.train.len());
                continue;
            }
            if !used_points.contains(&n) {
                used_points.push(n);
            }
            for run in 0..opts.runs {
                let sample = subsample_with(&target_ds.train, n, run, opts.runs, opts.subsample)?;
                let (in_train, in_dev) = split_dev(&sample, DEV_FRACTION);
                let target_split = DomainSplit::new(target_ds.schema.clone(), in_train, in_dev);
                for &kind in kinds.iter().filter(|&&k| kind_available(k, n)) {
                    let mut cfg = opts.train.clone();
                    cfg.kind = kind;
                    cfg.seed = opts.train.seed ^ stable_hash(&format!("{target}/{n}/{kind}/{run}"));
                    let splits: Vec<DomainSplit> = if kind == ModelKind::St {
                        vec![target_split.clone()]
                    } else {
                        datasets
                            .iter()
                            .filter(|d| d.name() != target)
                            .map(|d| DomainSplit::new(d.schema.clone(), d.train.clone(), Vec::new()))
                            .chain(std::iter::once(target_split.clone()))
                            .collect()
                    };
                    let trained = train(&splits, table, &cfg)?;
                    let report = evaluate(&trained.model, &target_ds.schema, &target_ds.test, table, opts.weighting)?;
                    let score = report.weighted()?;
                    info!("{target} n={n} {kind} run {run}: {score:.4} (seed {})", cfg.seed);
                    cells.entry((ti, n, kind)).or_default().push(score);
                }
            }
        }
    }
    used_points.sort_unstable();
    Ok(CurveTable {
        domains: targets.to_vec(),
        points: used_points,
        kinds,
        runs: opts.runs,
        cells: cells
            .into_iter()
            .map(|((ti, point, kind), runs)| CurveCell {
                domain: targets[ti].clone(),
                point,
                kind,
                mean: runs.iter().sum::<f64>() / runs.len() as f64,
                runs,
            })
            .collect(),
    })
}
