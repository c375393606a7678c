//! Change detection over status streams and last-observation-carried-forward
//! stock lookup.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDateTime;

use super::parse::{parse_status_record, status_columns};
use super::{ChangeEvent, StatusSnapshot};
use crate::error::{Error, Result};

/// Compress a time-sorted status stream for one station into change events:
/// the first snapshot is always emitted, later ones only when the bike count
/// differs from the last emitted value.
pub fn detect_changes(snapshots: &[StatusSnapshot]) -> Result<Vec<ChangeEvent>> {
    let mut events: Vec<ChangeEvent> = Vec::new();
    let mut last: Option<&StatusSnapshot> = None;
    for snap in snapshots {
        if let Some(prev) = last {
            if prev.station_id != snap.station_id {
                return Err(Error::Validation(format!(
                    "mixed station ids in change detection: {} and {}",
                    prev.station_id, snap.station_id
                )));
            }
            if snap.timestamp < prev.timestamp {
                return Err(Error::Ordering(format!(
                    "status stream for station {} goes backwards at {}",
                    snap.station_id, snap.timestamp
                )));
            }
        }
        let emit = match events.last() {
            None => true,
            Some(e) => e.bikes_available != snap.bikes_available,
        };
        if emit {
            events.push(ChangeEvent {
                station_id: snap.station_id,
                timestamp: snap.timestamp,
                bikes_available: snap.bikes_available,
            });
        }
        last = Some(snap);
    }
    Ok(events)
}

/// Counters from a streaming change-detection pass over a status file.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatusStreamStats {
    pub snapshots: usize,
    pub skipped: usize,
    /// Rows where bikes + docks exceeded the station's dock count.
    pub capacity_violations: usize,
}

/// Stream a whole status file and build per-station change-event lists
/// without materializing the snapshots. Rows must be chronologically
/// non-decreasing within each station (interleaving across stations is
/// fine); a violation is an ordering error.
///
/// `capacities`, when given, is used to count (not drop) rows violating
/// `bikes + docks <= dock_count`.
pub fn detect_changes_from_status(
    source: impl Read,
    capacities: Option<&HashMap<u32, u32>>,
) -> Result<(BTreeMap<u32, Vec<ChangeEvent>>, StatusStreamStats)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let idx = status_columns(&headers)?;

    let mut events: BTreeMap<u32, Vec<ChangeEvent>> = BTreeMap::new();
    let mut last_seen: HashMap<u32, NaiveDateTime> = HashMap::new();
    let mut stats = StatusStreamStats::default();
    for record in reader.records() {
        let record = record?;
        let Some(snap) = parse_status_record(&record, idx) else {
            stats.skipped += 1;
            continue;
        };
        stats.snapshots += 1;
        if let Some(prev) = last_seen.get(&snap.station_id) {
            if snap.timestamp < *prev {
                return Err(Error::Ordering(format!(
                    "status rows for station {} are not time-sorted (saw {} after {})",
                    snap.station_id, snap.timestamp, prev
                )));
            }
        }
        last_seen.insert(snap.station_id, snap.timestamp);
        if let Some(cap) = capacities.and_then(|c| c.get(&snap.station_id)) {
            if snap.bikes_available + snap.docks_available > *cap {
                stats.capacity_violations += 1;
            }
        }
        let list = events.entry(snap.station_id).or_default();
        let emit = match list.last() {
            None => true,
            Some(e) => e.bikes_available != snap.bikes_available,
        };
        if emit {
            list.push(ChangeEvent {
                station_id: snap.station_id,
                timestamp: snap.timestamp,
                bikes_available: snap.bikes_available,
            });
        }
    }
    Ok((events, stats))
}

/// Bike count at time `t` per last observation carried forward: the value of
/// the latest event at or before `t`, or `None` if `t` precedes the first
/// event. `events` must be sorted ascending.
pub fn stock_at(events: &[ChangeEvent], t: NaiveDateTime) -> Option<u32> {
    let idx = events.partition_point(|e| e.timestamp <= t);
    if idx == 0 {
        None
    } else {
        Some(events[idx - 1].bikes_available)
    }
}

const EVENT_TIME_FORMAT: &str = "%Y-%m-%d %H:%M";

/// Persist change events as `station_id,timestamp,bikes_available`, ordered
/// by station then time.
pub fn write_events_csv(path: &Path, events: &BTreeMap<u32, Vec<ChangeEvent>>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["station_id", "timestamp", "bikes_available"])?;
    for list in events.values() {
        for e in list {
            w.write_record([
                e.station_id.to_string(),
                e.timestamp.format(EVENT_TIME_FORMAT).to_string(),
                e.bikes_available.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load change events persisted by [`write_events_csv`].
pub fn read_events_csv(path: &Path) -> Result<BTreeMap<u32, Vec<ChangeEvent>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut events: BTreeMap<u32, Vec<ChangeEvent>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let bad = || Error::Validation(format!("bad change-event row: {record:?}"));
        let station_id: u32 = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let timestamp = record
            .get(1)
            .and_then(|s| NaiveDateTime::parse_from_str(s, EVENT_TIME_FORMAT).ok())
            .ok_or_else(bad)?;
        let bikes_available: u32 = record.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        events.entry(station_id).or_default().push(ChangeEvent {
            station_id,
            timestamp,
            bikes_available,
        });
    }
    for list in events.values() {
        if !list.windows(2).all(|w| w[0].timestamp <= w[1].timestamp) {
            return Err(Error::Ordering(
                "persisted change events are not time-sorted".into(),
            ));
        }
    }
    Ok(events)
}
