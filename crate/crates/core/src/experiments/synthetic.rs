//! Seeded synthetic bike-share network generator.
//!
//! Emits the four raw file kinds in the ingest schemas so the whole pipeline
//! can run without the public dataset. Stations sit in regional blocks with
//! per-block ZIPs; trips follow a diurnal rate with an intra-region
//! preference and conserve bikes (a departure decrements the origin, the
//! arrival increments the destination, re-routing when full); status is
//! emitted on a fixed minute resolution; daily weather follows a seasonal
//! model and damps the trip rate on rainy days.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::rng::cell_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_stations: usize,
    pub n_regions: usize,
    /// Inclusive dock-capacity range per station.
    pub dock_capacity_range: (u32, u32),
    pub span_days: u32,
    /// Minutes between status snapshots.
    pub status_resolution_minutes: u32,
    pub trips_per_station_per_day: f64,
    /// Probability a trip stays inside its origin region, in (0.5, 1].
    pub intra_region_preference: f64,
    pub rainy_day_probability: f64,
    /// Trip-rate multiplier on rainy days.
    pub rain_rate_multiplier: f64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_stations: 10,
            n_regions: 2,
            dock_capacity_range: (15, 27),
            span_days: 14,
            status_resolution_minutes: 1,
            trips_per_station_per_day: 20.0,
            intra_region_preference: 0.97,
            rainy_day_probability: 0.25,
            rain_rate_multiplier: 0.6,
            start_date: NaiveDate::from_ymd_opt(2014, 3, 1).unwrap(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n_stations == 0 {
            return Err(Error::Validation("need at least one station".into()));
        }
        if self.n_regions == 0 || self.n_regions > self.n_stations {
            return Err(Error::Validation(format!(
                "n_regions = {} must lie in 1..={}",
                self.n_regions, self.n_stations
            )));
        }
        let (lo, hi) = self.dock_capacity_range;
        if lo < 1 || lo > hi {
            return Err(Error::Validation(format!(
                "dock capacity range ({lo}, {hi}) is infeasible"
            )));
        }
        if self.span_days == 0 || self.status_resolution_minutes == 0 {
            return Err(Error::Validation(
                "span and status resolution must be positive".into(),
            ));
        }
        if !(self.intra_region_preference > 0.5 && self.intra_region_preference <= 1.0) {
            return Err(Error::Validation(format!(
                "intra-region preference must lie in (0.5, 1], got {}",
                self.intra_region_preference
            )));
        }
        if self.trips_per_station_per_day < 0.0
            || !(0.0..=1.0).contains(&self.rainy_day_probability)
            || self.rain_rate_multiplier < 0.0
        {
            return Err(Error::Validation("rate parameters out of range".into()));
        }
        Ok(())
    }
}

/// Paths and counters from one generation run.
#[derive(Debug, Clone)]
pub struct SyntheticSummary {
    pub station_path: PathBuf,
    pub status_path: PathBuf,
    pub trip_path: PathBuf,
    pub weather_path: PathBuf,
    pub n_trips: usize,
    pub n_status_rows: usize,
    /// Arrivals redirected because the planned destination was full.
    pub rerouted: usize,
    /// Departures skipped because the origin region had no bikes.
    pub unmet_demand: usize,
    /// Departures skipped because the trip would outlive the span.
    pub trimmed_at_end: usize,
}

struct StationState {
    id: u32,
    region: usize,
    capacity: u32,
    bikes: u32,
    zip: String,
    city: String,
    name: String,
    lat: f64,
    lon: f64,
}

struct PendingArrival {
    trip_id: u64,
    origin: usize,
    planned_dest: usize,
    start_minute: i64,
}

struct FinishedTrip {
    trip_id: u64,
    origin: usize,
    dest: usize,
    start_minute: i64,
    end_minute: i64,
}

/// Generate the four files into `out_dir`. The same config (seed included)
/// produces byte-identical output.
pub fn generate_synthetic(config: &SyntheticConfig, out_dir: &Path) -> Result<SyntheticSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha12Rng::seed_from_u64(cell_seed(config.seed, "synthetic"));

    // Stations in contiguous regional blocks.
    let (cap_lo, cap_hi) = config.dock_capacity_range;
    let mut stations: Vec<StationState> = Vec::with_capacity(config.n_stations);
    for i in 0..config.n_stations {
        let region = i * config.n_regions / config.n_stations;
        let capacity = rng.random_range(cap_lo..=cap_hi);
        stations.push(StationState {
            id: (i + 1) as u32,
            region,
            capacity,
            bikes: capacity / 2,
            zip: format!("9{:04}", 4000 + region),
            city: format!("District {}", region + 1),
            name: format!("Station {}", i + 1),
            lat: 37.0 + region as f64 * 0.4 + rng.random::<f64>() * 0.08,
            lon: -122.0 - region as f64 * 0.4 - rng.random::<f64>() * 0.08,
        });
    }
    let region_members: Vec<Vec<usize>> = (0..config.n_regions)
        .map(|r| {
            (0..config.n_stations)
                .filter(|&i| stations[i].region == r)
                .collect()
        })
        .collect();

    // Daily weather per region, plus the rainy-day rate damper.
    let temp_noise = Normal::new(0.0, 4.0).expect("valid normal");
    let mut weather_rows: Vec<String> = Vec::new();
    let mut rain_mult = vec![vec![1.0f64; config.n_regions]; config.span_days as usize];
    for day in 0..config.span_days {
        let date = config.start_date + TimeDelta::days(i64::from(day));
        let seasonal = 58.0 + 12.0 * (2.0 * std::f64::consts::PI * f64::from(date.ordinal()) / 365.0).sin();
        for region in 0..config.n_regions {
            let temperature = seasonal + temp_noise.sample(&mut rng);
            let humidity = (65.0 + temp_noise.sample(&mut rng) * 3.0).clamp(20.0, 100.0);
            let wind = (7.0 + temp_noise.sample(&mut rng) * 0.8).clamp(0.0, 40.0);
            let rainy = rng.random::<f64>() < config.rainy_day_probability;
            let trace = !rainy && rng.random::<f64>() < 0.05;
            let precipitation = if rainy {
                ((0.05 + rng.random::<f64>() * 0.6) * 100.0).round() / 100.0
            } else {
                0.0
            };
            let foggy = !rainy && rng.random::<f64>() < 0.08;
            let thunder = rainy && rng.random::<f64>() < 0.15;
            let visibility = if foggy {
                ((3.0 + rng.random::<f64>() * 3.0) * 10.0).round() / 10.0
            } else if rainy {
                ((6.0 + rng.random::<f64>() * 3.0) * 10.0).round() / 10.0
            } else {
                10.0
            };
            let event = match (rainy, foggy, thunder) {
                (true, _, true) => "Rain-Thunderstorm",
                (true, _, false) => "Rain",
                (false, true, _) => "Fog",
                _ => "",
            };
            if rainy {
                rain_mult[day as usize][region] = config.rain_rate_multiplier;
            }
            let precip_field = if trace {
                "T".to_string()
            } else {
                format!("{precipitation:.2}")
            };
            weather_rows.push(format!(
                "{},{temperature:.1},{humidity:.1},{visibility:.1},{wind:.1},{precip_field},{event},{}",
                date.format("%m/%d/%Y"),
                format!("9{:04}", 4000 + region),
            ));
        }
    }

    // Commute-shaped diurnal rate, normalized to mean 1 over the day.
    let diurnal = |minute_of_day: f64| -> f64 {
        let h = minute_of_day / 60.0;
        let peak = |center: f64, width: f64| (-((h - center) / width).powi(2) / 2.0).exp();
        0.25 + 2.0 * peak(8.5, 1.4) + 2.0 * peak(17.5, 1.7)
    };
    let diurnal_mean: f64 = (0..1440).map(|m| diurnal(f64::from(m))).sum::<f64>() / 1440.0;

    let span_minutes = i64::from(config.span_days) * 1440;
    let minute_to_time = |minute: i64| -> NaiveDateTime {
        config.start_date.and_hms_opt(0, 0, 0).unwrap() + TimeDelta::minutes(minute)
    };

    let mut pending: std::collections::BTreeMap<i64, Vec<PendingArrival>> = Default::default();
    let mut finished: Vec<FinishedTrip> = Vec::new();
    let mut next_trip_id: u64 = 1;
    let mut rerouted = 0usize;
    let mut unmet_demand = 0usize;
    let mut trimmed_at_end = 0usize;
    let mut status_rows = 0usize;

    let status_file = File::create(out_dir.join("status.csv"))
        .map_err(|e| Error::io(out_dir.join("status.csv"), e))?;
    let mut status_out = BufWriter::new(status_file);
    writeln!(status_out, "station_id,bikes_available,docks_available,time")
        .map_err(|e| Error::io("status.csv", e))?;

    for minute in 0..span_minutes {
        let day = (minute / 1440) as usize;
        let minute_of_day = (minute % 1440) as f64;

        // Arrivals first: dock the bike, re-routing if the planned
        // destination is full (preferring its region, then anywhere unless
        // the preference forbids cross-region travel).
        if let Some(arrivals) = pending.remove(&minute) {
            for arrival in arrivals {
                let dest = arrival.planned_dest;
                let final_dest = if stations[dest].bikes < stations[dest].capacity {
                    Some(dest)
                } else {
                    rerouted += 1;
                    let region = stations[dest].region;
                    let in_region = pick_weighted(&mut rng, &region_members[region], |i| {
                        f64::from(stations[i].capacity - stations[i].bikes)
                    });
                    match in_region {
                        Some(s) => Some(s),
                        None if config.intra_region_preference < 1.0 => {
                            pick_weighted(&mut rng, &(0..config.n_stations).collect::<Vec<_>>(), |i| {
                                f64::from(stations[i].capacity - stations[i].bikes)
                            })
                        }
                        None => None,
                    }
                };
                match final_dest {
                    Some(s) => {
                        stations[s].bikes += 1;
                        finished.push(FinishedTrip {
                            trip_id: arrival.trip_id,
                            origin: arrival.origin,
                            dest: s,
                            start_minute: arrival.start_minute,
                            end_minute: minute,
                        });
                    }
                    // Every dock in the region is occupied; circle the block
                    // for another minute.
                    None => {
                        pending
                            .entry(minute + 1)
                            .or_default()
                            .push(arrival);
                    }
                }
            }
        }

        // Departures per region.
        for region in 0..config.n_regions {
            let per_min = config.trips_per_station_per_day * region_members[region].len() as f64
                / 1440.0;
            let lambda = per_min * diurnal(minute_of_day) / diurnal_mean * rain_mult[day][region];
            if lambda <= 0.0 {
                continue;
            }
            let n_departures = Poisson::new(lambda)
                .map(|p| p.sample(&mut rng) as u64)
                .unwrap_or(0);
            for _ in 0..n_departures {
                let Some(origin) = pick_weighted(&mut rng, &region_members[region], |i| {
                    f64::from(stations[i].bikes)
                }) else {
                    unmet_demand += 1;
                    continue;
                };
                let cross = config.intra_region_preference < 1.0
                    && rng.random::<f64>() > config.intra_region_preference
                    && config.n_regions > 1;
                let dest_region = if cross {
                    let mut r = rng.random_range(0..config.n_regions - 1);
                    if r >= region {
                        r += 1;
                    }
                    r
                } else {
                    region
                };
                let duration_minutes = if dest_region == region {
                    rng.random_range(5..=25i64)
                } else {
                    rng.random_range(15..=45i64)
                };
                let candidates: Vec<usize> = region_members[dest_region]
                    .iter()
                    .copied()
                    .filter(|&s| s != origin)
                    .collect();
                let dest = pick_weighted(&mut rng, &candidates, |i| {
                    f64::from(stations[i].capacity - stations[i].bikes)
                })
                .or_else(|| candidates.first().copied());
                let Some(dest) = dest else {
                    unmet_demand += 1;
                    continue;
                };
                let end_minute = minute + duration_minutes;
                if end_minute >= span_minutes {
                    trimmed_at_end += 1;
                    continue;
                }
                stations[origin].bikes -= 1;
                pending.entry(end_minute).or_default().push(PendingArrival {
                    trip_id: next_trip_id,
                    origin,
                    planned_dest: dest,
                    start_minute: minute,
                });
                next_trip_id += 1;
            }
        }

        if minute % i64::from(config.status_resolution_minutes) == 0 {
            let time = minute_to_time(minute).format("%Y/%m/%d %H:%M:%S");
            for s in &stations {
                writeln!(
                    status_out,
                    "{},{},{},{time}",
                    s.id,
                    s.bikes,
                    s.capacity - s.bikes
                )
                .map_err(|e| Error::io("status.csv", e))?;
                status_rows += 1;
            }
        }
    }
    status_out.flush().map_err(|e| Error::io("status.csv", e))?;
    debug_assert!(pending.is_empty(), "arrivals queued beyond the span");

    // Station file.
    let station_path = out_dir.join("station.csv");
    let mut station_out = BufWriter::new(
        File::create(&station_path).map_err(|e| Error::io(&station_path, e))?,
    );
    writeln!(
        station_out,
        "id,name,lat,long,dock_count,city,installation_date,zip_code"
    )
    .map_err(|e| Error::io(&station_path, e))?;
    for s in &stations {
        writeln!(
            station_out,
            "{},{},{:.6},{:.6},{},{},{},{}",
            s.id,
            s.name,
            s.lat,
            s.lon,
            s.capacity,
            s.city,
            config.start_date.format("%m/%d/%Y"),
            s.zip
        )
        .map_err(|e| Error::io(&station_path, e))?;
    }
    station_out.flush().map_err(|e| Error::io(&station_path, e))?;

    // Trip file, ordered by trip id (spawn order).
    finished.sort_by_key(|t| t.trip_id);
    let trip_path = out_dir.join("trip.csv");
    let mut trip_out =
        BufWriter::new(File::create(&trip_path).map_err(|e| Error::io(&trip_path, e))?);
    writeln!(
        trip_out,
        "id,duration,start_date,start_station_name,start_station_id,end_date,end_station_name,end_station_id,bike_id,subscription_type,zip_code"
    )
    .map_err(|e| Error::io(&trip_path, e))?;
    for t in &finished {
        let origin = &stations[t.origin];
        let dest = &stations[t.dest];
        writeln!(
            trip_out,
            "{},{},{},{},{},{},{},{},{},Subscriber,{}",
            t.trip_id,
            (t.end_minute - t.start_minute) * 60,
            minute_to_time(t.start_minute).format("%m/%d/%Y %H:%M"),
            origin.name,
            origin.id,
            minute_to_time(t.end_minute).format("%m/%d/%Y %H:%M"),
            dest.name,
            dest.id,
            1000 + t.trip_id % 97,
            origin.zip
        )
        .map_err(|e| Error::io(&trip_path, e))?;
    }
    trip_out.flush().map_err(|e| Error::io(&trip_path, e))?;

    // Weather file.
    let weather_path = out_dir.join("weather.csv");
    let mut weather_out =
        BufWriter::new(File::create(&weather_path).map_err(|e| Error::io(&weather_path, e))?);
    writeln!(
        weather_out,
        "date,mean_temperature_f,mean_humidity,mean_visibility_miles,mean_wind_speed_mph,precipitation_inches,events,zip_code"
    )
    .map_err(|e| Error::io(&weather_path, e))?;
    for row in &weather_rows {
        writeln!(weather_out, "{row}").map_err(|e| Error::io(&weather_path, e))?;
    }
    weather_out.flush().map_err(|e| Error::io(&weather_path, e))?;

    Ok(SyntheticSummary {
        station_path,
        status_path: out_dir.join("status.csv"),
        trip_path,
        weather_path,
        n_trips: finished.len(),
        n_status_rows: status_rows,
        rerouted,
        unmet_demand,
        trimmed_at_end,
    })
}

/// Weighted draw over `candidates` with nonnegative weights; `None` when all
/// weights vanish.
fn pick_weighted(
    rng: &mut ChaCha12Rng,
    candidates: &[usize],
    weight: impl Fn(usize) -> f64,
) -> Option<usize> {
    let weights: Vec<f64> = candidates.iter().map(|&i| weight(i)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut draw = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw < 0.0 {
            return Some(candidates[i]);
        }
    }
    Some(candidates[candidates.len() - 1])
}
