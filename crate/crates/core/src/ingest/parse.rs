//! Header-keyed CSV parsers for the four raw file kinds.
//!
//! Files are schema-compatible with the public Bay Area release: columns are
//! located by header name (a few aliases are accepted), extra columns are
//! ignored, and malformed data lines are skipped and counted rather than
//! aborting the parse.

use std::collections::HashSet;
use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime};

use super::{zip_for_city, DailyWeather, StationMeta, StatusSnapshot, TripRecord, WeatherEvent};
use crate::error::{Error, Result};

/// Per-file skip counters accumulated while parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    /// Lines dropped because a required field failed to parse.
    pub skipped: usize,
    /// Weather rows whose event label fell outside the known set.
    pub unknown_events: usize,
    /// Trips dropped because a station id was not in the metadata.
    pub unresolved: usize,
    /// Duplicate (date, zip) weather rows dropped (first wins).
    pub duplicates: usize,
}

/// Parsed records plus skip counters.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub stats: ParseStats,
}

const DATETIME_FORMATS: [&str; 6] = [
    "%Y/%m/%d %H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y/%m/%d %H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
];

const DATE_FORMATS: [&str; 3] = ["%m/%d/%Y", "%Y-%m-%d", "%Y/%m/%d"];

/// Parse a timestamp in any accepted layout, truncated to minute resolution.
pub(crate) fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return dt.with_nanosecond_zeroed();
        }
    }
    None
}

trait MinuteTruncate {
    fn with_nanosecond_zeroed(self) -> Option<NaiveDateTime>;
}

impl MinuteTruncate for NaiveDateTime {
    fn with_nanosecond_zeroed(self) -> Option<NaiveDateTime> {
        use chrono::Timelike;
        self.with_second(0).and_then(|d| d.with_nanosecond(0))
    }
}

pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(s, fmt).ok())
}

/// Resolve one required column index from a header row, trying aliases in
/// order.
fn column(file: &str, headers: &csv::StringRecord, names: &[&str]) -> Result<usize> {
    for name in names {
        if let Some(idx) = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
        {
            return Ok(idx);
        }
    }
    Err(Error::MissingColumn {
        file: file.to_string(),
        column: names[0].to_string(),
    })
}

fn optional_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    names.iter().find_map(|name| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    })
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize) -> Option<&'r str> {
    record.get(idx).map(str::trim)
}

/// Parse station metadata. Duplicate station ids are a validation error;
/// otherwise malformed lines are skipped and counted.
pub fn parse_stations(source: impl Read) -> Result<Parsed<StationMeta>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let id = column("station file", &headers, &["id", "station_id"])?;
    let name = column("station file", &headers, &["name"])?;
    let lat = column("station file", &headers, &["lat", "latitude"])?;
    let long = column("station file", &headers, &["long", "lon", "longitude"])?;
    let docks = column("station file", &headers, &["dock_count", "docks"])?;
    let city = column("station file", &headers, &["city"])?;
    let zip = optional_column(&headers, &["zip_code", "zip"]);

    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let parsed = (|| -> Option<StationMeta> {
            let station_id: u32 = field(&record, id)?.parse().ok()?;
            let zip_code = match zip.and_then(|z| field(&record, z)).filter(|z| !z.is_empty()) {
                Some(z) => z.to_string(),
                None => {
                    let city_name = field(&record, city)?;
                    zip_for_city(city_name).unwrap_or("").to_string()
                }
            };
            Some(StationMeta {
                station_id,
                name: field(&record, name)?.to_string(),
                latitude: field(&record, lat)?.parse().ok()?,
                longitude: field(&record, long)?.parse().ok()?,
                dock_count: field(&record, docks)?.parse().ok()?,
                city: field(&record, city)?.to_string(),
                zip_code,
            })
        })();
        match parsed {
            Some(meta) => {
                if !seen.insert(meta.station_id) {
                    return Err(Error::Validation(format!(
                        "duplicate station_id {} in station file",
                        meta.station_id
                    )));
                }
                out.push(meta);
            }
            None => stats.skipped += 1,
        }
    }
    Ok(Parsed {
        records: out,
        stats,
    })
}

/// Parse daily weather, keeping the six retained variables plus the event
/// category. Trace precipitation ("T") maps to 0.01 inches; unknown event
/// labels degrade to `Other` and are counted.
pub fn parse_weather(source: impl Read) -> Result<Parsed<DailyWeather>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let date = column("weather file", &headers, &["date", "pdt"])?;
    let temp = column(
        "weather file",
        &headers,
        &["mean_temperature_f", "mean_temperature"],
    )?;
    let hum = column("weather file", &headers, &["mean_humidity"])?;
    let vis = column(
        "weather file",
        &headers,
        &["mean_visibility_miles", "mean_visibility"],
    )?;
    let wind = column(
        "weather file",
        &headers,
        &["mean_wind_speed_mph", "mean_wind_speed"],
    )?;
    let precip = column(
        "weather file",
        &headers,
        &["precipitation_inches", "precipitation"],
    )?;
    let events = column("weather file", &headers, &["events", "event"])?;
    let zip = column("weather file", &headers, &["zip_code", "zip"])?;

    let mut out: Vec<DailyWeather> = Vec::new();
    let mut stats = ParseStats::default();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let mut unknown_event = false;
        let parsed = (|| -> Option<DailyWeather> {
            let date = parse_date(field(&record, date)?)?;
            let precip_raw = field(&record, precip)?;
            let precipitation = if precip_raw.eq_ignore_ascii_case("T") {
                0.01
            } else {
                precip_raw.parse().ok()?
            };
            let (event, unknown) = WeatherEvent::normalize(field(&record, events).unwrap_or(""));
            unknown_event = unknown;
            Some(DailyWeather {
                date,
                zip_code: field(&record, zip)?.to_string(),
                mean_temperature: field(&record, temp)?.parse().ok()?,
                mean_humidity: field(&record, hum)?.parse().ok()?,
                mean_visibility: field(&record, vis)?.parse().ok()?,
                mean_wind_speed: field(&record, wind)?.parse().ok()?,
                precipitation,
                event,
            })
        })();
        match parsed {
            Some(w) => {
                if unknown_event {
                    stats.unknown_events += 1;
                }
                if seen.insert((w.date, w.zip_code.clone())) {
                    out.push(w);
                } else {
                    stats.duplicates += 1;
                }
            }
            None => stats.skipped += 1,
        }
    }
    Ok(Parsed {
        records: out,
        stats,
    })
}

/// Re-serialize normalized weather records. Parsing the output again yields
/// identical records.
pub fn write_weather_csv(mut sink: impl std::io::Write, records: &[DailyWeather]) -> Result<()> {
    let mut w = csv::Writer::from_writer(&mut sink);
    w.write_record([
        "date",
        "mean_temperature_f",
        "mean_humidity",
        "mean_visibility_miles",
        "mean_wind_speed_mph",
        "precipitation_inches",
        "events",
        "zip_code",
    ])?;
    for r in records {
        w.write_record([
            r.date.format("%m/%d/%Y").to_string(),
            r.mean_temperature.to_string(),
            r.mean_humidity.to_string(),
            r.mean_visibility.to_string(),
            r.mean_wind_speed.to_string(),
            r.precipitation.to_string(),
            r.event.csv_label().to_string(),
            r.zip_code.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("weather output", e))?;
    Ok(())
}

/// Parse trips, dropping records whose station ids do not resolve against
/// the metadata or whose duration is not positive.
pub fn parse_trips(source: impl Read, known_stations: &HashSet<u32>) -> Result<Parsed<TripRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let id = column("trip file", &headers, &["id", "trip_id"])?;
    let duration = column("trip file", &headers, &["duration", "duration_seconds"])?;
    let start_date = column("trip file", &headers, &["start_date", "start_time"])?;
    let end_date = column("trip file", &headers, &["end_date", "end_time"])?;
    let start_id = column("trip file", &headers, &["start_station_id"])?;
    let end_id = column("trip file", &headers, &["end_station_id"])?;

    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    for record in reader.records() {
        let record = record?;
        let parsed = (|| -> Option<TripRecord> {
            let duration_seconds: i64 = field(&record, duration)?.parse().ok()?;
            if duration_seconds <= 0 {
                return None;
            }
            Some(TripRecord {
                trip_id: field(&record, id)?.parse().ok()?,
                duration_seconds: u32::try_from(duration_seconds).ok()?,
                start_time: parse_datetime(field(&record, start_date)?)?,
                end_time: parse_datetime(field(&record, end_date)?)?,
                start_station_id: field(&record, start_id)?.parse().ok()?,
                end_station_id: field(&record, end_id)?.parse().ok()?,
            })
        })();
        match parsed {
            Some(trip) => {
                if known_stations.contains(&trip.start_station_id)
                    && known_stations.contains(&trip.end_station_id)
                {
                    out.push(trip);
                } else {
                    stats.unresolved += 1;
                }
            }
            None => stats.skipped += 1,
        }
    }
    Ok(Parsed {
        records: out,
        stats,
    })
}

/// Parse a full status file into memory. Suitable for desk-scale files; the
/// streaming change detector in [`super::detect_changes_from_status`] avoids
/// materializing snapshots for large ones.
pub fn parse_status(source: impl Read) -> Result<Parsed<StatusSnapshot>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let idx = status_columns(&headers)?;

    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    for record in reader.records() {
        let record = record?;
        match parse_status_record(&record, idx) {
            Some(snap) => out.push(snap),
            None => stats.skipped += 1,
        }
    }
    Ok(Parsed {
        records: out,
        stats,
    })
}

pub(crate) fn status_columns(headers: &csv::StringRecord) -> Result<(usize, usize, usize, usize)> {
    Ok((
        column("status file", headers, &["station_id"])?,
        column("status file", headers, &["bikes_available"])?,
        column("status file", headers, &["docks_available"])?,
        column("status file", headers, &["time", "timestamp"])?,
    ))
}

pub(crate) fn parse_status_record(
    record: &csv::StringRecord,
    (id, bikes, docks, time): (usize, usize, usize, usize),
) -> Option<StatusSnapshot> {
    Some(StatusSnapshot {
        station_id: field(record, id)?.parse().ok()?,
        bikes_available: field(record, bikes)?.parse().ok()?,
        docks_available: field(record, docks)?.parse().ok()?,
        timestamp: parse_datetime(field(record, time)?)?,
    })
}
