//! Ingestion of the four raw file kinds (stations, status, trips, weather)
//! and compression of per-station status streams into change events.

mod changes;
mod parse;

pub use changes::{
    detect_changes, detect_changes_from_status, read_events_csv, stock_at, write_events_csv,
    StatusStreamStats,
};
pub use parse::{
    parse_stations, parse_status, parse_trips, parse_weather, write_weather_csv, ParseStats,
    Parsed,
};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

/// Static description of one dock station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationMeta {
    pub station_id: u32,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub dock_count: u32,
    pub city: String,
    /// ZIP used to join daily weather. Taken from a `zip_code` column when
    /// the file has one, otherwise looked up from the city name.
    pub zip_code: String,
}

/// One raw status record: dock occupancy of a station at a minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatusSnapshot {
    pub station_id: u32,
    pub bikes_available: u32,
    pub docks_available: u32,
    pub timestamp: NaiveDateTime,
}

/// One completed trip between two stations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripRecord {
    pub trip_id: u64,
    pub duration_seconds: u32,
    pub start_time: NaiveDateTime,
    pub end_time: NaiveDateTime,
    pub start_station_id: u32,
    pub end_station_id: u32,
}

/// Categorical daily weather event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherEvent {
    None,
    Fog,
    Rain,
    FogRain,
    Thunderstorm,
    Other,
}

impl WeatherEvent {
    pub const ALL: [WeatherEvent; 6] = [
        WeatherEvent::None,
        WeatherEvent::Fog,
        WeatherEvent::Rain,
        WeatherEvent::FogRain,
        WeatherEvent::Thunderstorm,
        WeatherEvent::Other,
    ];

    /// Position in the fixed taxonomy; doubles as the ordinal code.
    pub fn code(self) -> usize {
        match self {
            WeatherEvent::None => 0,
            WeatherEvent::Fog => 1,
            WeatherEvent::Rain => 2,
            WeatherEvent::FogRain => 3,
            WeatherEvent::Thunderstorm => 4,
            WeatherEvent::Other => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeatherEvent::None => "none",
            WeatherEvent::Fog => "fog",
            WeatherEvent::Rain => "rain",
            WeatherEvent::FogRain => "fog_rain",
            WeatherEvent::Thunderstorm => "thunderstorm",
            WeatherEvent::Other => "other",
        }
    }

    /// Label written back out when re-serializing weather files.
    pub fn csv_label(self) -> &'static str {
        match self {
            WeatherEvent::None => "",
            WeatherEvent::Fog => "Fog",
            WeatherEvent::Rain => "Rain",
            WeatherEvent::FogRain => "Fog-Rain",
            WeatherEvent::Thunderstorm => "Thunderstorm",
            WeatherEvent::Other => "Other",
        }
    }

    /// Case-insensitive normalization of a raw label. Returns the event and
    /// whether the label fell outside the known set.
    pub fn normalize(raw: &str) -> (WeatherEvent, bool) {
        let s = raw.trim().to_ascii_lowercase();
        match s.as_str() {
            "" => (WeatherEvent::None, false),
            "fog" => (WeatherEvent::Fog, false),
            "rain" => (WeatherEvent::Rain, false),
            "fog-rain" | "rain-fog" | "fog_rain" => (WeatherEvent::FogRain, false),
            "thunderstorm" | "rain-thunderstorm" | "rain_thunderstorm" => {
                (WeatherEvent::Thunderstorm, false)
            }
            "other" => (WeatherEvent::Other, false),
            _ => (WeatherEvent::Other, true),
        }
    }
}

/// Daily weather for one ZIP code, reduced to the retained variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyWeather {
    pub date: NaiveDate,
    pub zip_code: String,
    pub mean_temperature: f64,
    pub mean_humidity: f64,
    pub mean_visibility: f64,
    pub mean_wind_speed: f64,
    pub precipitation: f64,
    pub event: WeatherEvent,
}

/// A change in a station's bike count; the compressed form of the status
/// stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangeEvent {
    pub station_id: u32,
    pub timestamp: NaiveDateTime,
    pub bikes_available: u32,
}

/// Known city -> weather-ZIP assignments for the public Bay Area release,
/// whose station file carries city names but no ZIP column.
pub const CITY_ZIP_TABLE: [(&str, &str); 5] = [
    ("San Francisco", "94107"),
    ("Redwood City", "94063"),
    ("Palo Alto", "94301"),
    ("Mountain View", "94041"),
    ("San Jose", "95113"),
];

pub(crate) fn zip_for_city(city: &str) -> Option<&'static str> {
    CITY_ZIP_TABLE
        .iter()
        .find(|(c, _)| c.eq_ignore_ascii_case(city.trim()))
        .map(|(_, z)| *z)
}
