//! Sweep-based evaluation: MAE per station on the bike scale over grids of
//! horizons and model sizes, plus cross-model comparison tables.

mod synthetic;

pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticSummary};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{
    build_region_rows, build_rows, chronological_split, inverse_target, EncodingSchema,
    EventEncoding, RowBuildConfig, WeatherIndex,
};
use crate::graph::{NeighborSet, RegionPartition};
use crate::ingest::{ChangeEvent, StationMeta};
use crate::plsr::{select_components, PlsrModel, PlsrOptions};
use crate::rng::cell_seed;
use crate::trees::{BoostModel, ForestModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Rf,
    Lsboost,
    Plsr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rf, ModelKind::Lsboost, ModelKind::Plsr];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Lsboost => "lsboost",
            ModelKind::Plsr => "plsr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" => Ok(ModelKind::Rf),
            "lsboost" => Ok(ModelKind::Lsboost),
            "plsr" => Ok(ModelKind::Plsr),
            other => Err(Error::Validation(format!("unknown model `{other}`"))),
        }
    }
}

/// The evaluation grid: horizons in minutes, ensemble sizes, model subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepGrid {
    pub horizons: Vec<u32>,
    pub tree_counts: Vec<u32>,
    pub models: Vec<ModelKind>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            horizons: vec![15, 30, 60, 90, 120],
            tree_counts: vec![20, 60, 100, 140, 180],
            models: ModelKind::ALL.to_vec(),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("horizons", &self.horizons), ("tree_counts", &self.tree_counts)] {
            if list.is_empty() {
                return Err(Error::Validation(format!("{name} grid is empty")));
            }
            if list[0] == 0 || !list.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Validation(format!(
                    "{name} must be strictly increasing and positive: {list:?}"
                )));
            }
        }
        if self.models.is_empty() {
            return Err(Error::Validation("no models selected".into()));
        }
        Ok(())
    }

    fn has(&self, model: ModelKind) -> bool {
        self.models.contains(&model)
    }
}

/// Per-station MAE on both scales.
#[derive(Debug, Clone, PartialEq)]
pub struct StationMae {
    pub station_id: u32,
    pub mae_bikes: f64,
    pub mae_log: f64,
    pub n_rows: usize,
}

/// Bike-scale and log-scale MAE per station. Predictions and truths arrive
/// on the log scale and are inverted row by row before the error is taken.
pub fn mae_per_station(
    predictions_log: &[f64],
    truths_log: &[f64],
    station_per_row: &[u32],
) -> Result<Vec<StationMae>> {
    if predictions_log.is_empty()
        || predictions_log.len() != truths_log.len()
        || predictions_log.len() != station_per_row.len()
    {
        return Err(Error::Validation(format!(
            "prediction, truth, and station vectors must have one common nonzero length, got {}, {}, {}",
            predictions_log.len(),
            truths_log.len(),
            station_per_row.len()
        )));
    }
    let mut acc: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    for ((&p, &t), &s) in predictions_log
        .iter()
        .zip(truths_log.iter())
        .zip(station_per_row.iter())
    {
        let bike_err = (inverse_target(p) - inverse_target(t)).abs();
        let log_err = (p - t).abs();
        let slot = acc.entry(s).or_insert((0.0, 0.0, 0));
        slot.0 += bike_err;
        slot.1 += log_err;
        slot.2 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(station_id, (bikes, log, n))| StationMae {
            station_id,
            mae_bikes: bikes / n as f64,
            mae_log: log / n as f64,
            n_rows: n,
        })
        .collect())
}

/// Row-count-weighted aggregate over stations: (mae_bikes, mae_log, rows).
pub fn weighted_aggregate<'a>(
    entries: impl IntoIterator<Item = &'a StationMae>,
) -> Option<(f64, f64, usize)> {
    let mut bikes = 0.0;
    let mut log = 0.0;
    let mut rows = 0usize;
    for e in entries {
        bikes += e.mae_bikes * e.n_rows as f64;
        log += e.mae_log * e.n_rows as f64;
        rows += e.n_rows;
    }
    (rows > 0).then(|| (bikes / rows as f64, log / rows as f64, rows))
}

/// Plain mean over stations, each station counting once.
pub fn unweighted_aggregate<'a>(
    entries: impl IntoIterator<Item = &'a StationMae>,
) -> Option<(f64, f64)> {
    let mut bikes = 0.0;
    let mut log = 0.0;
    let mut n = 0usize;
    for e in entries {
        bikes += e.mae_bikes;
        log += e.mae_log;
        n += 1;
    }
    (n > 0).then(|| (bikes / n as f64, log / n as f64))
}

/// One report cell: a model at a horizon and size, scored on one station.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeEntry {
    pub model: ModelKind,
    pub delta_minutes: u32,
    /// Tree count for the ensembles, component count for the linear model.
    pub model_size: u32,
    pub station_id: u32,
    pub mae_bikes: f64,
    pub mae_log: f64,
    pub n_test_rows: usize,
}

/// A station or region that produced no cells, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipNote {
    pub subject: String,
    pub delta_minutes: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MaeReport {
    pub entries: Vec<MaeEntry>,
    pub skipped: Vec<SkipNote>,
    pub seed: u64,
    pub config_hash: u64,
}

impl MaeReport {
    /// Weighted aggregate over stations for one (model, Δ, size) cell.
    pub fn aggregate(&self, model: ModelKind, delta: u32, size: u32) -> Option<(f64, f64, usize)> {
        let stations: Vec<StationMae> = self
            .entries
            .iter()
            .filter(|e| e.model == model && e.delta_minutes == delta && e.model_size == size)
            .map(|e| StationMae {
                station_id: e.station_id,
                mae_bikes: e.mae_bikes,
                mae_log: e.mae_log,
                n_rows: e.n_test_rows,
            })
            .collect();
        weighted_aggregate(stations.iter())
    }

    /// Best (smallest) weighted bike-scale MAE over sizes for (model, Δ).
    pub fn best_cell(&self, model: ModelKind, delta: u32) -> Option<f64> {
        let sizes: BTreeSet<u32> = self
            .entries
            .iter()
            .filter(|e| e.model == model && e.delta_minutes == delta)
            .map(|e| e.model_size)
            .collect();
        sizes
            .into_iter()
            .filter_map(|s| self.aggregate(model, delta, s).map(|(b, _, _)| b))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn models(&self) -> BTreeSet<ModelKind> {
        self.entries.iter().map(|e| e.model).collect()
    }

    pub fn horizons(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.delta_minutes).collect()
    }

    fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            (a.model, a.delta_minutes, a.model_size, a.station_id).cmp(&(
                b.model,
                b.delta_minutes,
                b.model_size,
                b.station_id,
            ))
        });
        self.skipped.sort_by(|a, b| {
            (a.subject.as_str(), a.delta_minutes).cmp(&(b.subject.as_str(), b.delta_minutes))
        });
    }
}

/// Everything the sweeps need from the earlier pipeline stages.
#[derive(Debug, Clone)]
pub struct SweepData {
    pub events: BTreeMap<u32, Vec<ChangeEvent>>,
    pub weather: WeatherIndex,
    pub stations: Vec<StationMeta>,
    pub neighbors: HashMap<u32, NeighborSet>,
}

impl SweepData {
    fn zip_of(&self, station: u32) -> String {
        self.stations
            .iter()
            .find(|s| s.station_id == station)
            .map(|s| s.zip_code.clone())
            .unwrap_or_default()
    }

    fn zips(&self) -> HashMap<u32, String> {
        self.stations
            .iter()
            .map(|s| (s.station_id, s.zip_code.clone()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid_step_minutes: u32,
    pub train_fraction: f64,
    /// Cells with fewer usable train/test rows are skipped and listed.
    pub min_train_rows: usize,
    pub min_test_rows: usize,
    /// Growth limits shared by both tree learners.
    pub tree: TrainConfig,
    pub seed: u64,
    pub cv_folds: usize,
    pub max_components: usize,
    pub config_hash: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid_step_minutes: 15,
            train_fraction: 0.8,
            min_train_rows: 20,
            min_test_rows: 5,
            tree: TrainConfig::default(),
            seed: 0,
            cv_folds: 5,
            max_components: 10,
            config_hash: 0,
        }
    }
}

/// Train and score the univariate models per station over the grid.
///
/// Forests and boosting models are trained once per cell at the largest tree
/// count; smaller counts are scored as prefixes, which is identical to
/// training them separately because tree `i` only ever depends on
/// `(seed, i)` (forests) or on stages before it (boosting).
pub fn run_univariate_sweep(
    data: &SweepData,
    grid: &SweepGrid,
    config: &SweepConfig,
) -> Result<MaeReport> {
    grid.validate()?;
    let station_ids: Vec<u32> = data
        .stations
        .iter()
        .map(|s| s.station_id)
        .filter(|id| data.neighbors.contains_key(id) && data.events.contains_key(id))
        .collect();
    if station_ids.len() < 2 {
        return Err(Error::Validation(
            "univariate sweep needs at least two stations with events and neighbors".into(),
        ));
    }
    let mut cells: Vec<(u32, u32)> = Vec::new();
    for &station in &station_ids {
        for &delta in &grid.horizons {
            cells.push((station, delta));
        }
    }

    let results: Result<Vec<(Vec<MaeEntry>, Option<SkipNote>)>> = cells
        .par_iter()
        .map(|&(station, delta)| univariate_cell(data, grid, config, station, delta))
        .collect();

    let mut report = MaeReport {
        seed: config.seed,
        config_hash: config.config_hash,
        ..Default::default()
    };
    for (entries, skip) in results? {
        report.entries.extend(entries);
        report.skipped.extend(skip);
    }
    report.sort();
    Ok(report)
}

fn univariate_cell(
    data: &SweepData,
    grid: &SweepGrid,
    config: &SweepConfig,
    station: u32,
    delta: u32,
) -> Result<(Vec<MaeEntry>, Option<SkipNote>)> {
    let skip = |reason: String| {
        Ok((
            Vec::new(),
            Some(SkipNote {
                subject: format!("station {station}"),
                delta_minutes: delta,
                reason,
            }),
        ))
    };
    let neighbors = &data.neighbors[&station];
    let rows = build_rows(
        &data.events,
        &data.weather,
        neighbors,
        station,
        &data.zip_of(station),
        &RowBuildConfig::new(config.grid_step_minutes, delta),
    )?;
    if rows.len() < config.min_train_rows + config.min_test_rows {
        return skip(format!("only {} rows", rows.len()));
    }
    let schema = EncodingSchema::univariate(station, neighbors, EventEncoding::Ordinal);
    let split = match chronological_split(rows, config.train_fraction) {
        Ok(split) => split,
        Err(Error::DegenerateSplit(reason)) => return skip(reason),
        Err(e) => return Err(e),
    };
    if split.train.len() < config.min_train_rows || split.test.len() < config.min_test_rows {
        return skip(format!(
            "split too small: {} train / {} test",
            split.train.len(),
            split.test.len()
        ));
    }
    let (x_train, y_train) = schema.encode_univariate(&split.train)?;
    let (x_test, y_test) = schema.encode_univariate(&split.test)?;
    let stations_per_row = vec![station; split.test.len()];
    let max_trees = *grid.tree_counts.last().unwrap() as usize;

    let mut entries = Vec::new();
    for model in [ModelKind::Rf, ModelKind::Lsboost] {
        if !grid.has(model) {
            continue;
        }
        let seed = cell_seed(config.seed, &format!("{model}:st={station}:d={delta}"));
        let tree_config = config
            .tree
            .with_n_trees(max_trees)
            .with_seed(seed)
            .with_bootstrap(model == ModelKind::Rf && config.tree.bootstrap);
        let per_count: Vec<Array1<f64>> = match model {
            ModelKind::Rf => {
                let forest = ForestModel::fit(x_train.view(), y_train.as_slice().unwrap(), &tree_config)?;
                forest_prefix_predictions(&forest, x_test.view(), &grid.tree_counts)
            }
            ModelKind::Lsboost => {
                let boost = BoostModel::fit(x_train.view(), y_train.as_slice().unwrap(), &tree_config)?;
                boost_prefix_predictions(&boost, x_test.view(), &grid.tree_counts)
            }
            ModelKind::Plsr => unreachable!(),
        };
        for (&count, pred) in grid.tree_counts.iter().zip(per_count) {
            let stats = mae_per_station(
                pred.as_slice().unwrap(),
                y_test.as_slice().unwrap(),
                &stations_per_row,
            )?;
            for s in stats {
                entries.push(MaeEntry {
                    model,
                    delta_minutes: delta,
                    model_size: count,
                    station_id: s.station_id,
                    mae_bikes: s.mae_bikes,
                    mae_log: s.mae_log,
                    n_test_rows: s.n_rows,
                });
            }
        }
    }
    Ok((entries, None))
}

/// Mean of the first `k` trees for each requested `k`, accumulated in index
/// order; bit-identical to separately trained `k`-tree forests.
pub fn forest_prefix_predictions(
    forest: &ForestModel,
    x: ArrayView2<f64>,
    tree_counts: &[u32],
) -> Vec<Array1<f64>> {
    let n = x.nrows();
    let mut sums = vec![0.0f64; n];
    let mut out = Vec::with_capacity(tree_counts.len());
    let mut consumed = 0usize;
    for &count in tree_counts {
        let take = (count as usize).min(forest.trees().len());
        for tree in &forest.trees()[consumed..take] {
            for (i, row) in x.rows().into_iter().enumerate() {
                sums[i] += tree.predict_row(row);
            }
        }
        consumed = consumed.max(take);
        let k = take as f64;
        out.push(Array1::from_iter(sums.iter().map(|s| s / k)));
    }
    out
}

/// Cumulative boosting predictions after the first `k` stages for each
/// requested `k` (early-stopped models saturate at their stage count).
pub fn boost_prefix_predictions(
    boost: &BoostModel,
    x: ArrayView2<f64>,
    tree_counts: &[u32],
) -> Vec<Array1<f64>> {
    let n = x.nrows();
    let mut current = vec![boost.initial; n];
    let mut out = Vec::with_capacity(tree_counts.len());
    let mut consumed = 0usize;
    for &count in tree_counts {
        let take = (count as usize).min(boost.stages().len());
        for stage in &boost.stages()[consumed..take] {
            for (i, row) in x.rows().into_iter().enumerate() {
                current[i] += boost.shrinkage * stage.beta * stage.tree.predict_row(row);
            }
        }
        consumed = consumed.max(take);
        out.push(Array1::from_vec(current.clone()));
    }
    out
}

/// Train one multivariate model per region per horizon, with the component
/// count chosen by chronological cross-validation on the train block, and
/// extract per-station MAE from the response columns.
pub fn run_multivariate_sweep(
    data: &SweepData,
    partition: &RegionPartition,
    grid: &SweepGrid,
    config: &SweepConfig,
) -> Result<MaeReport> {
    grid.validate()?;
    if !grid.has(ModelKind::Plsr) {
        return Ok(MaeReport {
            seed: config.seed,
            config_hash: config.config_hash,
            ..Default::default()
        });
    }
    let zips = data.zips();
    let mut cells: Vec<(usize, u32)> = Vec::new();
    for region_index in 0..partition.regions.len() {
        for &delta in &grid.horizons {
            cells.push((region_index, delta));
        }
    }
    let results: Result<Vec<(Vec<MaeEntry>, Option<SkipNote>)>> = cells
        .par_iter()
        .map(|&(region_index, delta)| {
            multivariate_cell(data, partition, config, &zips, region_index, delta)
        })
        .collect();

    let mut report = MaeReport {
        seed: config.seed,
        config_hash: config.config_hash,
        ..Default::default()
    };
    for (entries, skip) in results? {
        report.entries.extend(entries);
        report.skipped.extend(skip);
    }
    report.sort();
    Ok(report)
}

fn multivariate_cell(
    data: &SweepData,
    partition: &RegionPartition,
    config: &SweepConfig,
    zips: &HashMap<u32, String>,
    region_index: usize,
    delta: u32,
) -> Result<(Vec<MaeEntry>, Option<SkipNote>)> {
    let skip = |reason: String| {
        Ok((
            Vec::new(),
            Some(SkipNote {
                subject: format!("region {region_index}"),
                delta_minutes: delta,
                reason,
            }),
        ))
    };
    let region = &partition.regions[region_index];
    let dataset = build_region_rows(
        &data.events,
        &data.weather,
        region,
        &data.neighbors,
        zips,
        &RowBuildConfig::new(config.grid_step_minutes, delta),
    )?;
    if dataset.rows.len() < config.min_train_rows + config.min_test_rows {
        return skip(format!("only {} rows", dataset.rows.len()));
    }
    let schema = EncodingSchema::multivariate(
        &dataset.predictor_stations,
        &dataset.region_stations,
        EventEncoding::OneHot,
    );
    let region_stations = dataset.region_stations.clone();
    let split = match chronological_split(dataset.rows, config.train_fraction) {
        Ok(split) => split,
        Err(Error::DegenerateSplit(reason)) => return skip(reason),
        Err(e) => return Err(e),
    };
    if split.train.len() < config.min_train_rows || split.test.len() < config.min_test_rows {
        return skip(format!(
            "split too small: {} train / {} test",
            split.train.len(),
            split.test.len()
        ));
    }
    let (x_train, y_train) = schema.encode_region(&split.train)?;
    let (x_test, y_test) = schema.encode_region(&split.test)?;

    let folds = config.cv_folds.max(2).min(x_train.nrows() / 2);
    if folds < 2 {
        return skip("too few train rows for cross-validation".into());
    }
    let opts = PlsrOptions::default();
    let selection = match select_components(
        x_train.view(),
        y_train.view(),
        folds,
        config.max_components,
        &opts,
    ) {
        Ok(sel) => sel,
        Err(Error::Validation(reason)) => return skip(reason),
        Err(e) => return Err(e),
    };
    let model = PlsrModel::fit_with(x_train.view(), y_train.view(), selection.chosen, &opts)?;
    let predictions = model.predict(x_test.view())?;

    // Flatten the response block column by column into per-row triples.
    let mut pred = Vec::with_capacity(predictions.len());
    let mut truth = Vec::with_capacity(predictions.len());
    let mut station_per_row = Vec::with_capacity(predictions.len());
    for (col, &station) in region_stations.iter().enumerate() {
        for r in 0..predictions.nrows() {
            pred.push(predictions[[r, col]]);
            truth.push(y_test[[r, col]]);
            station_per_row.push(station);
        }
    }
    let stats = mae_per_station(&pred, &truth, &station_per_row)?;
    let entries = stats
        .into_iter()
        .map(|s| MaeEntry {
            model: ModelKind::Plsr,
            delta_minutes: delta,
            model_size: selection.chosen as u32,
            station_id: s.station_id,
            mae_bikes: s.mae_bikes,
            mae_log: s.mae_log,
            n_test_rows: s.n_rows,
        })
        .collect();
    Ok((entries, None))
}

/// Cross-model table: one row per horizon, one column per model, each cell
/// the model's best weighted MAE at that horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub horizons: Vec<u32>,
    pub models: Vec<ModelKind>,
    /// `cells[h][m]` pairs with `horizons[h]` and `models[m]`.
    pub cells: Vec<Vec<f64>>,
}

/// Align reports into a comparison table. Every model must cover every
/// horizon appearing anywhere; gaps are an alignment error listing the
/// missing cells.
pub fn compare_models(reports: &[&MaeReport]) -> Result<ComparisonTable> {
    let mut horizons: BTreeSet<u32> = BTreeSet::new();
    let mut models: BTreeSet<ModelKind> = BTreeSet::new();
    for report in reports {
        horizons.extend(report.horizons());
        models.extend(report.models());
    }
    if horizons.is_empty() || models.is_empty() {
        return Err(Error::Validation("no report cells to compare".into()));
    }
    let horizons: Vec<u32> = horizons.into_iter().collect();
    let models: Vec<ModelKind> = models.into_iter().collect();
    let mut cells = vec![vec![f64::NAN; models.len()]; horizons.len()];
    let mut missing = Vec::new();
    for (hi, &delta) in horizons.iter().enumerate() {
        for (mi, &model) in models.iter().enumerate() {
            let best = reports.iter().filter_map(|r| r.best_cell(model, delta)).min_by(
                |a, b| a.partial_cmp(b).unwrap(),
            );
            match best {
                Some(v) => cells[hi][mi] = v,
                None => missing.push(format!("{model}@{delta}min")),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Alignment(missing.join(", ")));
    }
    Ok(ComparisonTable {
        horizons,
        models,
        cells,
    })
}

impl ComparisonTable {
    pub fn write_csv(&self, mut sink: impl Write) -> Result<()> {
        let header: Vec<String> = std::iter::once("delta_minutes".to_string())
            .chain(self.models.iter().map(|m| format!("mae_bikes_{m}")))
            .collect();
        writeln!(sink, "{}", header.join(",")).map_err(|e| Error::io("comparison", e))?;
        for (hi, &delta) in self.horizons.iter().enumerate() {
            let row: Vec<String> = std::iter::once(delta.to_string())
                .chain(self.cells[hi].iter().map(|v| v.to_string()))
                .collect();
            writeln!(sink, "{}", row.join(",")).map_err(|e| Error::io("comparison", e))?;
        }
        Ok(())
    }

    /// Fixed-width console rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>6}", "delta"));
        for m in &self.models {
            out.push_str(&format!("{:>12}", m.name()));
        }
        out.push('\n');
        for (hi, &delta) in self.horizons.iter().enumerate() {
            out.push_str(&format!("{delta:>6}"));
            for v in &self.cells[hi] {
                out.push_str(&format!("{v:>12.4}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Persist per-station report entries with the seed/config stamp.
pub fn write_report_csv(path: &Path, report: &MaeReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "# seed={} config_hash={:016x}",
        report.seed, report.config_hash
    )
    .map_err(|e| Error::io(path, e))?;
    writeln!(
        w,
        "model,delta_minutes,trees_or_components,station_id,mae_bikes,mae_log,n_test_rows"
    )
    .map_err(|e| Error::io(path, e))?;
    for e in &report.entries {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.model, e.delta_minutes, e.model_size, e.station_id, e.mae_bikes, e.mae_log,
            e.n_test_rows
        )
        .map_err(|e| Error::io(path, e))?;
    }
    for s in &report.skipped {
        writeln!(w, "# skipped {} at delta={}: {}", s.subject, s.delta_minutes, s.reason)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Persist the aggregate summary (weighted and unweighted station means).
pub fn write_aggregate_csv(path: &Path, report: &MaeReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "# seed={} config_hash={:016x}",
        report.seed, report.config_hash
    )
    .map_err(|e| Error::io(path, e))?;
    writeln!(
        w,
        "model,delta_minutes,trees_or_components,mae_bikes_weighted,mae_bikes_unweighted,mae_log_weighted,n_test_rows,n_stations"
    )
    .map_err(|e| Error::io(path, e))?;
    let mut keys: BTreeSet<(ModelKind, u32, u32)> = BTreeSet::new();
    for e in &report.entries {
        keys.insert((e.model, e.delta_minutes, e.model_size));
    }
    for (model, delta, size) in keys {
        let stations: Vec<StationMae> = report
            .entries
            .iter()
            .filter(|e| e.model == model && e.delta_minutes == delta && e.model_size == size)
            .map(|e| StationMae {
                station_id: e.station_id,
                mae_bikes: e.mae_bikes,
                mae_log: e.mae_log,
                n_rows: e.n_test_rows,
            })
            .collect();
        let (wb, wl, rows) = weighted_aggregate(stations.iter()).unwrap();
        let (ub, _) = unweighted_aggregate(stations.iter()).unwrap();
        writeln!(
            w,
            "{model},{delta},{size},{wb},{ub},{wl},{rows},{}",
            stations.len()
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a persisted report back (used by the comparison command).
pub fn read_report_csv(path: &Path) -> Result<MaeReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut report = MaeReport::default();
    for line in text.lines() {
        if let Some(stamp) = line.strip_prefix("# seed=") {
            if let Some((seed, hash)) = stamp.split_once(" config_hash=") {
                report.seed = seed.parse().unwrap_or(0);
                report.config_hash = u64::from_str_radix(hash.trim(), 16).unwrap_or(0);
            }
            continue;
        }
        if line.starts_with('#') || line.starts_with("model,") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Validation(format!("bad report row: {line}")));
        }
        report.entries.push(MaeEntry {
            model: fields[0].parse()?,
            delta_minutes: parse_field(fields[1], line)?,
            model_size: parse_field(fields[2], line)?,
            station_id: parse_field(fields[3], line)?,
            mae_bikes: parse_field(fields[4], line)?,
            mae_log: parse_field(fields[5], line)?,
            n_test_rows: parse_field(fields[6], line)?,
        });
    }
    Ok(report)
}

fn parse_field<T: FromStr>(s: &str, line: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Validation(format!("bad report row: {line}")))
}
