//! Fixed-layout encoding of feature rows into design matrices.
//!
//! A schema is built once per dataset and applied to both train and test
//! rows, so column order and width never drift between the two. Tree models
//! take the weather event as a single ordinal code; the linear model takes a
//! one-hot expansion.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Serialize;

use super::{FeatureRow, RegionRow, WeatherValues};
use crate::error::{Error, Result};
use crate::graph::NeighborSet;
use crate::ingest::WeatherEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    OrdinalCalendar,
    OneHotCategorical,
}

/// How the weather event category enters the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventEncoding {
    /// Single column holding the taxonomy code; for tree models.
    Ordinal,
    /// Six 0/1 columns summing to one; for the linear model.
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct EncodingSchema {
    pub features: Vec<FeatureColumn>,
    pub targets: Vec<String>,
    pub target_transform: &'static str,
    #[serde(skip)]
    event_encoding: EventEncoding,
    #[serde(skip)]
    n_stocks: usize,
}

const WEATHER_COLUMNS: [&str; 5] = [
    "mean_temperature_f",
    "mean_humidity",
    "mean_visibility_miles",
    "mean_wind_speed_mph",
    "precipitation_inches",
];

impl EncodingSchema {
    /// Layout for one station's rows: own stock, neighbor stocks in rank
    /// order, calendar ordinals, weather.
    pub fn univariate(
        station: u32,
        neighbors: &NeighborSet,
        event_encoding: EventEncoding,
    ) -> Self {
        let mut features = Vec::new();
        features.push(FeatureColumn {
            name: "stock_own".into(),
            kind: FeatureKind::Numeric,
        });
        for id in &neighbors.neighbors {
            features.push(FeatureColumn {
                name: format!("stock_nbr_{id}"),
                kind: FeatureKind::Numeric,
            });
        }
        let n_stocks = features.len();
        push_tail(&mut features, event_encoding);
        EncodingSchema {
            features,
            targets: vec![format!("log1p_stock_{station}")],
            target_transform: "log1p",
            event_encoding,
            n_stocks,
        }
    }

    /// Layout for a region's shared predictor block plus one target column
    /// per region station.
    pub fn multivariate(
        predictor_stations: &[u32],
        region_stations: &[u32],
        event_encoding: EventEncoding,
    ) -> Self {
        let mut features: Vec<FeatureColumn> = predictor_stations
            .iter()
            .map(|id| FeatureColumn {
                name: format!("stock_{id}"),
                kind: FeatureKind::Numeric,
            })
            .collect();
        let n_stocks = features.len();
        push_tail(&mut features, event_encoding);
        EncodingSchema {
            features,
            targets: region_stations
                .iter()
                .map(|id| format!("log1p_stock_{id}"))
                .collect(),
            target_transform: "log1p",
            event_encoding,
            n_stocks,
        }
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|c| c.name.as_str()).collect()
    }

    /// Encode univariate rows into a design matrix and target vector.
    pub fn encode_univariate(&self, rows: &[FeatureRow]) -> Result<(Array2<f64>, Array1<f64>)> {
        let mut x = Vec::with_capacity(rows.len() * self.width());
        let mut y = Vec::with_capacity(rows.len());
        for row in rows {
            if 1 + row.neighbor_stocks.len() != self.n_stocks {
                return Err(Error::SchemaMismatch {
                    expected: self.n_stocks,
                    got: 1 + row.neighbor_stocks.len(),
                });
            }
            x.push(f64::from(row.own_stock));
            x.extend(row.neighbor_stocks.iter().map(|&s| f64::from(s)));
            self.push_tail_values(
                &mut x,
                row.month,
                row.day_of_week,
                row.time_of_day,
                row.weather.as_ref(),
            )?;
            y.push(row.target_log);
        }
        let x = Array2::from_shape_vec((rows.len(), self.width()), x)
            .expect("row width is schema width");
        Ok((x, Array1::from_vec(y)))
    }

    /// Encode region rows into a design matrix and target block.
    pub fn encode_region(&self, rows: &[RegionRow]) -> Result<(Array2<f64>, Array2<f64>)> {
        let q = self.targets.len();
        let mut x = Vec::with_capacity(rows.len() * self.width());
        let mut y = Vec::with_capacity(rows.len() * q);
        for row in rows {
            if row.stocks.len() != self.n_stocks {
                return Err(Error::SchemaMismatch {
                    expected: self.n_stocks,
                    got: row.stocks.len(),
                });
            }
            if row.targets_log.len() != q {
                return Err(Error::SchemaMismatch {
                    expected: q,
                    got: row.targets_log.len(),
                });
            }
            x.extend(row.stocks.iter().map(|&s| f64::from(s)));
            self.push_tail_values(
                &mut x,
                row.month,
                row.day_of_week,
                row.time_of_day,
                row.weather.as_ref(),
            )?;
            y.extend_from_slice(&row.targets_log);
        }
        let x = Array2::from_shape_vec((rows.len(), self.width()), x)
            .expect("row width is schema width");
        let y = Array2::from_shape_vec((rows.len(), q), y).expect("target width is q");
        Ok((x, y))
    }

    fn push_tail_values(
        &self,
        x: &mut Vec<f64>,
        month: u32,
        day_of_week: u32,
        time_of_day: u32,
        weather: Option<&WeatherValues>,
    ) -> Result<()> {
        x.push(f64::from(month));
        x.push(f64::from(day_of_week));
        x.push(f64::from(time_of_day));
        let w = weather.ok_or_else(|| {
            Error::Validation("cannot encode a row with absent weather".into())
        })?;
        x.push(w.mean_temperature);
        x.push(w.mean_humidity);
        x.push(w.mean_visibility);
        x.push(w.mean_wind_speed);
        x.push(w.precipitation);
        match self.event_encoding {
            EventEncoding::Ordinal => x.push(w.event.code() as f64),
            EventEncoding::OneHot => {
                for e in WeatherEvent::ALL {
                    x.push(if e == w.event { 1.0 } else { 0.0 });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

fn push_tail(features: &mut Vec<FeatureColumn>, event_encoding: EventEncoding) {
    for name in ["month", "day_of_week", "time_of_day"] {
        features.push(FeatureColumn {
            name: name.into(),
            kind: FeatureKind::OrdinalCalendar,
        });
    }
    for name in WEATHER_COLUMNS {
        features.push(FeatureColumn {
            name: name.into(),
            kind: FeatureKind::Numeric,
        });
    }
    match event_encoding {
        EventEncoding::Ordinal => features.push(FeatureColumn {
            name: "event".into(),
            kind: FeatureKind::Numeric,
        }),
        EventEncoding::OneHot => {
            for e in WeatherEvent::ALL {
                features.push(FeatureColumn {
                    name: format!("event_{}", e.name()),
                    kind: FeatureKind::OneHotCategorical,
                });
            }
        }
    }
}

/// Write a design matrix (plus targets) as CSV with one named column per
/// feature and target.
pub fn write_design_csv(
    path: &Path,
    schema: &EncodingSchema,
    x: &Array2<f64>,
    y: &Array2<f64>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut header: Vec<String> = schema.features.iter().map(|c| c.name.clone()).collect();
    header.extend(schema.targets.iter().cloned());
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for (xr, yr) in x.rows().into_iter().zip(y.rows()) {
        let line: Vec<String> = xr.iter().chain(yr.iter()).map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
