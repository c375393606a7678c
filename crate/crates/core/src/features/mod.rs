//! Predictor/target assembly on a regular time grid.
//!
//! Rows pair the stocks of a station and its neighbors (plus calendar and
//! daily weather) at grid time `t` with the log-scale stock at `t + Δ`.
//! Region datasets share one predictor block across a region's stations and
//! carry one target column per station.

mod schema;

pub use schema::{
    write_design_csv, EncodingSchema, EventEncoding, FeatureColumn, FeatureKind,
};

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike};

use crate::error::{Error, Result};
use crate::graph::NeighborSet;
use crate::ingest::{stock_at, ChangeEvent, DailyWeather, WeatherEvent};

/// The retained daily weather variables attached to a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherValues {
    pub mean_temperature: f64,
    pub mean_humidity: f64,
    pub mean_visibility: f64,
    pub mean_wind_speed: f64,
    pub precipitation: f64,
    pub event: WeatherEvent,
}

impl From<&DailyWeather> for WeatherValues {
    fn from(w: &DailyWeather) -> Self {
        WeatherValues {
            mean_temperature: w.mean_temperature,
            mean_humidity: w.mean_humidity,
            mean_visibility: w.mean_visibility,
            mean_wind_speed: w.mean_wind_speed,
            precipitation: w.precipitation,
            event: w.event,
        }
    }
}

/// One univariate training row for a station.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub station_id: u32,
    pub t: NaiveDateTime,
    pub own_stock: u32,
    /// Stocks of the k neighbors, in neighbor-rank order.
    pub neighbor_stocks: Vec<u32>,
    pub month: u32,
    pub day_of_week: u32,
    /// Minutes since midnight, 0–1439.
    pub time_of_day: u32,
    pub weather: Option<WeatherValues>,
    /// log1p of the stock at `target_time`.
    pub target_log: f64,
    pub target_time: NaiveDateTime,
}

/// One multivariate training row for a region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub t: NaiveDateTime,
    /// Stocks of the deduplicated predictor stations, in block order.
    pub stocks: Vec<u32>,
    pub month: u32,
    pub day_of_week: u32,
    pub time_of_day: u32,
    pub weather: Option<WeatherValues>,
    /// log1p targets, one per region station (ascending id).
    pub targets_log: Vec<f64>,
    pub target_time: NaiveDateTime,
}

/// Region rows plus the station orders they were built with.
#[derive(Debug, Clone)]
pub struct RegionDataset {
    /// Region members, ascending; target column order.
    pub region_stations: Vec<u32>,
    /// Deduplicated predictor stations in block order: each region station
    /// followed by its neighbors, first occurrence wins.
    pub predictor_stations: Vec<u32>,
    /// ZIP used for the weather join (the region's modal ZIP).
    pub zip_used: String,
    pub rows: Vec<RegionRow>,
}

/// Grid/horizon configuration for row building.
#[derive(Debug, Clone, Copy)]
pub struct RowBuildConfig {
    pub grid_step_minutes: u32,
    pub delta_minutes: u32,
    /// Keep rows whose date has no weather record (flagged with
    /// `weather: None`) instead of dropping them.
    pub keep_missing_weather: bool,
}

impl RowBuildConfig {
    pub fn new(grid_step_minutes: u32, delta_minutes: u32) -> Self {
        RowBuildConfig {
            grid_step_minutes,
            delta_minutes,
            keep_missing_weather: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_step_minutes == 0 || self.delta_minutes == 0 {
            return Err(Error::Validation(
                "grid step and horizon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Lookup key for daily weather: (calendar date, ZIP).
pub type WeatherIndex = HashMap<(NaiveDate, String), DailyWeather>;

pub fn weather_index(records: &[DailyWeather]) -> WeatherIndex {
    records
        .iter()
        .map(|w| ((w.date, w.zip_code.clone()), w.clone()))
        .collect()
}

pub fn log1p_target(stock: u32) -> f64 {
    (f64::from(stock)).ln_1p()
}

/// Invert the log-scale target back to a bike count estimate, floored at 0.
pub fn inverse_target(z: f64) -> f64 {
    (z.exp() - 1.0).max(0.0)
}

/// All grids share one anchor: midnight of the earliest event date in the
/// map. With a common anchor, rows for different stations (and for regions)
/// land on the same instants whenever the step divides a day.
fn grid_anchor(events: &BTreeMap<u32, Vec<ChangeEvent>>) -> Option<NaiveDateTime> {
    events
        .values()
        .filter_map(|list| list.first())
        .map(|e| e.timestamp)
        .min()
        .map(|t| t.date().and_hms_opt(0, 0, 0).unwrap())
}

fn first_grid_at_or_after(anchor: NaiveDateTime, t: NaiveDateTime, step: TimeDelta) -> NaiveDateTime {
    if t <= anchor {
        return anchor;
    }
    let offset = (t - anchor).num_minutes();
    let step_min = step.num_minutes();
    let k = (offset + step_min - 1) / step_min;
    anchor + TimeDelta::minutes(k * step_min)
}

fn calendar_fields(t: NaiveDateTime) -> (u32, u32, u32) {
    (
        t.month(),
        t.weekday().number_from_monday(),
        t.hour() * 60 + t.minute(),
    )
}

/// Build univariate rows for `station` at horizon `delta`.
///
/// One row per grid instant where the station and all its neighbors have a
/// defined stock at `t` and the station has one at `t + Δ` (targets stay
/// inside the station's observed span). Weather is joined on the calendar
/// date of `t` and the station's ZIP.
pub fn build_rows(
    events: &BTreeMap<u32, Vec<ChangeEvent>>,
    weather: &WeatherIndex,
    neighbors: &NeighborSet,
    station: u32,
    zip: &str,
    cfg: &RowBuildConfig,
) -> Result<Vec<FeatureRow>> {
    cfg.validate()?;
    if neighbors.station_id != station {
        return Err(Error::Validation(format!(
            "neighbor set belongs to station {}, not {station}",
            neighbors.station_id
        )));
    }
    let Some(own) = events.get(&station).filter(|l| !l.is_empty()) else {
        return Ok(Vec::new());
    };
    let Some(anchor) = grid_anchor(events) else {
        return Ok(Vec::new());
    };
    let step = TimeDelta::minutes(i64::from(cfg.grid_step_minutes));
    let delta = TimeDelta::minutes(i64::from(cfg.delta_minutes));
    let first = own.first().unwrap().timestamp;
    let last = own.last().unwrap().timestamp;

    let neighbor_events: Vec<&[ChangeEvent]> = neighbors
        .neighbors
        .iter()
        .map(|id| events.get(id).map(Vec::as_slice).unwrap_or(&[]))
        .collect();

    let mut rows = Vec::new();
    let mut t = first_grid_at_or_after(anchor, first, step);
    while t + delta <= last {
        if let Some(row) = assemble_univariate(
            own,
            &neighbor_events,
            weather,
            station,
            zip,
            t,
            delta,
            cfg.keep_missing_weather,
        ) {
            rows.push(row);
        }
        t += step;
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn assemble_univariate(
    own: &[ChangeEvent],
    neighbor_events: &[&[ChangeEvent]],
    weather: &WeatherIndex,
    station: u32,
    zip: &str,
    t: NaiveDateTime,
    delta: TimeDelta,
    keep_missing_weather: bool,
) -> Option<FeatureRow> {
    let own_stock = stock_at(own, t)?;
    let mut neighbor_stocks = Vec::with_capacity(neighbor_events.len());
    for list in neighbor_events {
        neighbor_stocks.push(stock_at(list, t)?);
    }
    let target_time = t + delta;
    let target_stock = stock_at(own, target_time)?;
    let weather_values = weather
        .get(&(t.date(), zip.to_string()))
        .map(WeatherValues::from);
    if weather_values.is_none() && !keep_missing_weather {
        return None;
    }
    let (month, day_of_week, time_of_day) = calendar_fields(t);
    Some(FeatureRow {
        station_id: station,
        t,
        own_stock,
        neighbor_stocks,
        month,
        day_of_week,
        time_of_day,
        weather: weather_values,
        target_log: log1p_target(target_stock),
        target_time,
    })
}

/// Build the shared-predictor multivariate rows for one region.
///
/// The predictor block concatenates each region station's own and neighbor
/// stocks, deduplicated by station. One row per grid instant where every
/// predictor station has a defined stock at `t` and every region station's
/// target at `t + Δ` stays inside its observed span.
pub fn build_region_rows(
    events: &BTreeMap<u32, Vec<ChangeEvent>>,
    weather: &WeatherIndex,
    region: &[u32],
    neighbor_map: &HashMap<u32, NeighborSet>,
    station_zips: &HashMap<u32, String>,
    cfg: &RowBuildConfig,
) -> Result<RegionDataset> {
    cfg.validate()?;
    if region.is_empty() {
        return Err(Error::Validation("region has no stations".into()));
    }
    let mut region_stations: Vec<u32> = region.to_vec();
    region_stations.sort_unstable();
    region_stations.dedup();

    let mut predictor_stations = Vec::new();
    for &s in &region_stations {
        let set = neighbor_map
            .get(&s)
            .ok_or_else(|| Error::Validation(format!("no neighbor set for station {s}")))?;
        if !predictor_stations.contains(&s) {
            predictor_stations.push(s);
        }
        for &n in &set.neighbors {
            if !predictor_stations.contains(&n) {
                predictor_stations.push(n);
            }
        }
    }

    // Modal ZIP over the region's members; ties break toward the smaller
    // label for determinism.
    let mut zip_tally: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &region_stations {
        if let Some(z) = station_zips.get(s) {
            *zip_tally.entry(z.as_str()).or_default() += 1;
        }
    }
    let zip_used = zip_tally
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(z, _)| (*z).to_string())
        .unwrap_or_default();

    let empty = RegionDataset {
        region_stations: region_stations.clone(),
        predictor_stations: predictor_stations.clone(),
        zip_used: zip_used.clone(),
        rows: Vec::new(),
    };

    let Some(anchor) = grid_anchor(events) else {
        return Ok(empty);
    };
    let mut start = NaiveDateTime::MIN;
    for s in &predictor_stations {
        match events.get(s).and_then(|l| l.first()) {
            Some(e) => start = start.max(e.timestamp),
            None => return Ok(empty),
        }
    }
    let mut end = NaiveDateTime::MAX;
    for s in &region_stations {
        match events.get(s).and_then(|l| l.last()) {
            Some(e) => end = end.min(e.timestamp),
            None => return Ok(empty),
        }
    }

    let step = TimeDelta::minutes(i64::from(cfg.grid_step_minutes));
    let delta = TimeDelta::minutes(i64::from(cfg.delta_minutes));
    let predictor_events: Vec<&[ChangeEvent]> = predictor_stations
        .iter()
        .map(|id| events.get(id).map(Vec::as_slice).unwrap_or(&[]))
        .collect();
    let target_events: Vec<&[ChangeEvent]> = region_stations
        .iter()
        .map(|id| events.get(id).map(Vec::as_slice).unwrap_or(&[]))
        .collect();

    let mut rows = Vec::new();
    let mut t = first_grid_at_or_after(anchor, start, step);
    while t + delta <= end {
        let row = (|| -> Option<RegionRow> {
            let mut stocks = Vec::with_capacity(predictor_events.len());
            for list in &predictor_events {
                stocks.push(stock_at(list, t)?);
            }
            let target_time = t + delta;
            let mut targets_log = Vec::with_capacity(target_events.len());
            for list in &target_events {
                targets_log.push(log1p_target(stock_at(list, target_time)?));
            }
            let weather_values = weather
                .get(&(t.date(), zip_used.clone()))
                .map(WeatherValues::from);
            if weather_values.is_none() && !cfg.keep_missing_weather {
                return None;
            }
            let (month, day_of_week, time_of_day) = calendar_fields(t);
            Some(RegionRow {
                t,
                stocks,
                month,
                day_of_week,
                time_of_day,
                weather: weather_values,
                targets_log,
                target_time,
            })
        })();
        if let Some(row) = row {
            rows.push(row);
        }
        t += step;
    }
    Ok(RegionDataset {
        region_stations,
        predictor_stations,
        zip_used,
        rows,
    })
}

/// Anything with a grid time and a target time can be split
/// chronologically.
pub trait TimedRow {
    fn grid_time(&self) -> NaiveDateTime;
    fn target_time(&self) -> NaiveDateTime;
}

impl TimedRow for FeatureRow {
    fn grid_time(&self) -> NaiveDateTime {
        self.t
    }
    fn target_time(&self) -> NaiveDateTime {
        self.target_time
    }
}

impl TimedRow for RegionRow {
    fn grid_time(&self) -> NaiveDateTime {
        self.t
    }
    fn target_time(&self) -> NaiveDateTime {
        self.target_time
    }
}

/// A chronological train/test split with its boundary instant.
#[derive(Debug, Clone)]
pub struct DatasetSplit<R> {
    pub train: Vec<R>,
    pub test: Vec<R>,
    pub split_time: NaiveDateTime,
    /// Train rows dropped because their target time reached the boundary.
    pub leakage_dropped: usize,
}

/// Split rows at the instant separating the earliest `⌈train_fraction·n⌉`
/// rows from the rest, then drop train rows whose target time crosses the
/// boundary. Every train `t` (and target time) ends up strictly before
/// `split_time`, every test `t` at or after it.
pub fn chronological_split<R: TimedRow>(
    mut rows: Vec<R>,
    train_fraction: f64,
) -> Result<DatasetSplit<R>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if rows.is_empty() {
        return Err(Error::Validation("cannot split an empty row set".into()));
    }
    rows.sort_by_key(TimedRow::grid_time);
    let n = rows.len();
    let k = ((train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let split_time = rows[k].grid_time();
    if rows[0].grid_time() == split_time {
        return Err(Error::DegenerateSplit(
            "all candidate train rows share the boundary grid time".into(),
        ));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut leakage_dropped = 0;
    for row in rows {
        if row.grid_time() < split_time {
            if row.target_time() < split_time {
                train.push(row);
            } else {
                leakage_dropped += 1;
            }
        } else {
            test.push(row);
        }
    }
    if train.is_empty() {
        return Err(Error::DegenerateSplit(
            "no train rows survive the leakage guard".into(),
        ));
    }
    Ok(DatasetSplit {
        train,
        test,
        split_time,
        leakage_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(minute: i64) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2014, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
            + TimeDelta::minutes(minute)
    }

    fn ev(station: u32, minute: i64, bikes: u32) -> ChangeEvent {
        ChangeEvent { station_id: station, timestamp: ts(minute), bikes_available: bikes }
    }

    fn day_weather(zip: &str) -> DailyWeather {
        DailyWeather {
            date: NaiveDate::from_ymd_opt(2014, 3, 1).unwrap(),
            zip_code: zip.into(),
            mean_temperature: 62.0,
            mean_humidity: 70.0,
            mean_visibility: 10.0,
            mean_wind_speed: 8.0,
            precipitation: 0.0,
            event: WeatherEvent::None,
        }
    }

    fn neighbor_set(station: u32, neighbors: &[u32]) -> NeighborSet {
        NeighborSet { station_id: station, neighbors: neighbors.to_vec() }
    }

    #[test]
    fn constant_stock_row_has_log1p_target() {
        let mut events = BTreeMap::new();
        events.insert(1, vec![ev(1, 0, 4), ev(1, 60, 4)]);
        events.insert(2, vec![ev(2, 0, 7)]);
        let weather = weather_index(&[day_weather("94107")]);
        let rows = build_rows(
            &events,
            &weather,
            &neighbor_set(1, &[2]),
            1,
            "94107",
            &RowBuildConfig::new(15, 15),
        )
        .unwrap();
        assert!(!rows.is_empty());
        let row = &rows[0];
        assert_eq!(row.own_stock, 4);
        assert_eq!(row.neighbor_stocks, vec![7]);
        assert!((row.target_log - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn instants_before_a_neighbor_first_event_are_skipped() {
        let mut events = BTreeMap::new();
        events.insert(1, vec![ev(1, 0, 4), ev(1, 120, 5)]);
        // Neighbor only comes online at minute 60.
        events.insert(2, vec![ev(2, 60, 7)]);
        let weather = weather_index(&[day_weather("94107")]);
        let rows = build_rows(
            &events,
            &weather,
            &neighbor_set(1, &[2]),
            1,
            "94107",
            &RowBuildConfig::new(15, 15),
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.t >= ts(60)));
        assert!(!rows.is_empty());
    }

    #[test]
    fn rows_missing_weather_are_dropped_by_default_and_kept_on_request() {
        let mut events = BTreeMap::new();
        events.insert(1, vec![ev(1, 0, 4), ev(1, 60, 4)]);
        let weather = WeatherIndex::new();
        let nbrs = neighbor_set(1, &[]);
        let cfg = RowBuildConfig::new(15, 15);
        let rows = build_rows(&events, &weather, &nbrs, 1, "94107", &cfg).unwrap();
        assert!(rows.is_empty());
        let mut keep = cfg;
        keep.keep_missing_weather = true;
        let rows = build_rows(&events, &weather, &nbrs, 1, "94107", &keep).unwrap();
        assert!(!rows.is_empty());
        assert!(rows[0].weather.is_none());
    }

    /// Independent replay oracle: enumerate grid instants by hand, compute
    /// every field from the raw event lists, and compare the full rows.
    #[test]
    fn rows_match_brute_force_replay() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut events: BTreeMap<u32, Vec<ChangeEvent>> = BTreeMap::new();
        for station in 1..=3u32 {
            let mut list = Vec::new();
            let mut minute = rng.random_range(0..30i64);
            let mut bikes = rng.random_range(0..12u32);
            while minute < 24 * 60 {
                list.push(ev(station, minute, bikes));
                minute += rng.random_range(3..40i64);
                let next = loop {
                    let b = rng.random_range(0..12u32);
                    if b != bikes {
                        break b;
                    }
                };
                bikes = next;
            }
            events.insert(station, list);
        }
        let weather = weather_index(&[day_weather("94107")]);
        let nbrs = neighbor_set(1, &[3, 2]);
        let cfg = RowBuildConfig::new(15, 15);
        let rows = build_rows(&events, &weather, &nbrs, 1, "94107", &cfg).unwrap();

        // Oracle: walk every 15-minute instant of the day from midnight.
        let own = &events[&1];
        let mut expected = Vec::new();
        for k in 0..(24 * 4) {
            let t = ts(k * 15);
            let target_time = t + TimeDelta::minutes(15);
            if t < own[0].timestamp || target_time > own.last().unwrap().timestamp {
                continue;
            }
            let locf = |list: &[ChangeEvent], at: NaiveDateTime| -> Option<u32> {
                list.iter()
                    .filter(|e| e.timestamp <= at)
                    .next_back()
                    .map(|e| e.bikes_available)
            };
            let (Some(own_stock), Some(n3), Some(n2), Some(target)) = (
                locf(own, t),
                locf(&events[&3], t),
                locf(&events[&2], t),
                locf(own, target_time),
            ) else {
                continue;
            };
            expected.push(FeatureRow {
                station_id: 1,
                t,
                own_stock,
                neighbor_stocks: vec![n3, n2],
                month: 3,
                day_of_week: 6, // 2014-03-01 is a Saturday
                time_of_day: (k * 15) as u32,
                weather: Some(WeatherValues::from(&day_weather("94107"))),
                target_log: (f64::from(target)).ln_1p(),
                target_time,
            });
        }
        assert_eq!(rows, expected);
        assert!(!rows.is_empty());
    }

    #[test]
    fn grid_coverage_is_bounded_by_span() {
        let mut events = BTreeMap::new();
        events.insert(1, vec![ev(1, 7, 4), ev(1, 700, 5)]);
        let weather = weather_index(&[day_weather("94107")]);
        let rows = build_rows(
            &events,
            &weather,
            &neighbor_set(1, &[]),
            1,
            "94107",
            &RowBuildConfig::new(15, 30),
        )
        .unwrap();
        let span_minutes = 700 - 7;
        assert!(rows.len() <= (span_minutes / 15 + 1) as usize);
    }

    #[test]
    fn single_station_region_equals_univariate_targets() {
        let mut events = BTreeMap::new();
        events.insert(1, vec![ev(1, 0, 4), ev(1, 30, 6), ev(1, 90, 2), ev(1, 240, 5)]);
        events.insert(2, vec![ev(2, 0, 7), ev(2, 100, 3)]);
        let weather = weather_index(&[day_weather("94107")]);
        let mut neighbor_map = HashMap::new();
        neighbor_map.insert(1, neighbor_set(1, &[2]));
        let mut zips = HashMap::new();
        zips.insert(1, "94107".to_string());
        zips.insert(2, "94107".to_string());
        let cfg = RowBuildConfig::new(15, 15);
        let region = build_region_rows(&events, &weather, &[1], &neighbor_map, &zips, &cfg).unwrap();
        let uni = build_rows(&events, &weather, &neighbor_set(1, &[2]), 1, "94107", &cfg).unwrap();
        assert_eq!(region.region_stations, vec![1]);
        assert_eq!(region.predictor_stations, vec![1, 2]);
        assert_eq!(region.rows.len(), uni.len());
        for (r, u) in region.rows.iter().zip(&uni) {
            assert_eq!(r.targets_log.len(), 1);
            assert_eq!(r.targets_log[0], u.target_log);
            assert_eq!(r.stocks, vec![u.own_stock, u.neighbor_stocks[0]]);
        }
    }

    #[test]
    fn two_station_region_single_instant() {
        let mut events = BTreeMap::new();
        events.insert(1, vec![ev(1, 0, 4), ev(1, 15, 5)]);
        events.insert(2, vec![ev(2, 0, 7), ev(2, 15, 6)]);
        let weather = weather_index(&[day_weather("94107")]);
        let mut neighbor_map = HashMap::new();
        neighbor_map.insert(1, neighbor_set(1, &[2]));
        neighbor_map.insert(2, neighbor_set(2, &[1]));
        let mut zips = HashMap::new();
        zips.insert(1, "94107".to_string());
        zips.insert(2, "94107".to_string());
        let cfg = RowBuildConfig::new(15, 15);
        let ds = build_region_rows(&events, &weather, &[1, 2], &neighbor_map, &zips, &cfg).unwrap();
        assert_eq!(ds.rows.len(), 1);
        assert_eq!(ds.rows[0].targets_log.len(), 2);
        assert_eq!(ds.predictor_stations, vec![1, 2]);
    }

    /// Independent replay of the multivariate constructor over a synthetic
    /// four-station region.
    #[test]
    fn region_rows_match_brute_force_replay() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let mut events: BTreeMap<u32, Vec<ChangeEvent>> = BTreeMap::new();
        for station in 1..=4u32 {
            let mut list = Vec::new();
            let mut minute = rng.random_range(0..20i64);
            while minute < 24 * 60 {
                list.push(ev(station, minute, rng.random_range(0..10)));
                minute += rng.random_range(10..90i64);
            }
            events.insert(station, list);
        }
        let weather = weather_index(&[day_weather("94107")]);
        let mut neighbor_map = HashMap::new();
        for s in 1..=4u32 {
            let nbrs: Vec<u32> = (1..=4).filter(|&x| x != s).collect();
            neighbor_map.insert(s, neighbor_set(s, &nbrs));
        }
        let zips: HashMap<u32, String> =
            (1..=4).map(|s| (s, "94107".to_string())).collect();
        let cfg = RowBuildConfig::new(30, 60);
        let region = [1u32, 2, 3, 4];
        let ds =
            build_region_rows(&events, &weather, &region, &neighbor_map, &zips, &cfg).unwrap();

        let locf = |list: &[ChangeEvent], at: NaiveDateTime| -> Option<u32> {
            list.iter()
                .filter(|e| e.timestamp <= at)
                .next_back()
                .map(|e| e.bikes_available)
        };
        let start = events.values().map(|l| l[0].timestamp).max().unwrap();
        let end = events.values().map(|l| l.last().unwrap().timestamp).min().unwrap();
        let mut expected = 0usize;
        let mut i = 0;
        for k in 0..(24 * 2) {
            let t = ts(k * 30);
            let target_time = t + TimeDelta::minutes(60);
            if t < start || target_time > end {
                continue;
            }
            expected += 1;
            let row = &ds.rows[i];
            assert_eq!(row.t, t);
            for (pos, s) in ds.predictor_stations.iter().enumerate() {
                assert_eq!(row.stocks[pos], locf(&events[s], t).unwrap());
            }
            for (pos, s) in ds.region_stations.iter().enumerate() {
                let stock = locf(&events[s], target_time).unwrap();
                assert_eq!(row.targets_log[pos], f64::from(stock).ln_1p());
            }
            i += 1;
        }
        assert_eq!(ds.rows.len(), expected);
        assert!(expected > 0);
    }

    fn bare_row(minute: i64, target_offset: i64) -> FeatureRow {
        FeatureRow {
            station_id: 1,
            t: ts(minute),
            own_stock: 1,
            neighbor_stocks: vec![],
            month: 3,
            day_of_week: 6,
            time_of_day: 0,
            weather: None,
            target_log: 0.0,
            target_time: ts(minute + target_offset),
        }
    }

    #[test]
    fn split_counts_match_fraction() {
        let rows: Vec<FeatureRow> = (0..10).map(|i| bare_row(i, 1)).collect();
        let split = chronological_split(rows, 0.8).unwrap();
        assert_eq!(split.train.len() + split.leakage_dropped, 8);
        assert_eq!(split.test.len(), 2);
        assert_eq!(split.split_time, ts(8));
    }

    #[test]
    fn split_drops_leaking_train_rows() {
        // Rows at minutes 6 and 7 have targets at or beyond split_time 8.
        let rows: Vec<FeatureRow> = (0..10).map(|i| bare_row(i, 2)).collect();
        let split = chronological_split(rows, 0.8).unwrap();
        assert_eq!(split.leakage_dropped, 2);
        assert!(split.train.iter().all(|r| r.target_time < split.split_time));
    }

    #[test]
    fn split_rejects_uniform_times() {
        let rows: Vec<FeatureRow> = (0..5).map(|_| bare_row(3, 1)).collect();
        assert!(matches!(
            chronological_split(rows, 0.5),
            Err(Error::DegenerateSplit(_))
        ));
    }

    #[test]
    fn inverse_target_examples() {
        assert!((inverse_target(5f64.ln()) - 4.0).abs() < 1e-12);
        assert_eq!(inverse_target(0.0), 0.0);
        assert_eq!(inverse_target(-3.0), 0.0);
    }

    proptest! {
        #[test]
        fn inverse_target_roundtrip(y in 0u32..10_000) {
            let z = log1p_target(y);
            prop_assert!((inverse_target(z) - f64::from(y)).abs() < 1e-9 * (1.0 + f64::from(y)));
        }

        #[test]
        fn split_orders_train_before_test(
            minutes in prop::collection::hash_set(0i64..5_000, 2..120),
            fraction in 0.1f64..0.9,
        ) {
            let rows: Vec<FeatureRow> = minutes.iter().map(|&m| bare_row(m, 15)).collect();
            match chronological_split(rows, fraction) {
                Ok(split) => {
                    let max_train = split.train.iter().map(|r| r.t).max().unwrap();
                    let min_test = split.test.iter().map(|r| r.t).min().unwrap();
                    prop_assert!(max_train < min_test);
                    prop_assert!(split.train.iter().all(|r| r.target_time < split.split_time));
                }
                Err(Error::DegenerateSplit(_)) => {}
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            }
        }
    }
}
