//! Wi-Fi association logs to building-level origin/destination counts.
//!
//! Pipeline: merge each client's consecutive pings in one building into a
//! session, drop clients seen on fewer than `min_days` days, cluster the
//! remaining clients on the mean and variance of their daily stationary
//! ratio, drop the more stationary cluster, and count building transitions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WifiLogRecord {
    pub client_id: String,
    pub building_id: String,
    pub timestamp: NaiveDateTime,
}

/// Parses an ISO-8601 timestamp; a UTC offset, if present, is dropped after
/// converting to local wall-clock time of that offset.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads `client_id,building_id,timestamp` rows. A header row with those
/// names is optional.
pub fn parse_wifi_csv<R: Read>(reader: R) -> Result<Vec<WifiLogRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::Format {
            line,
            reason: e.to_string(),
        })?;
        if line == 1 && row.get(0) == Some("client_id") {
            continue;
        }
        if row.len() != 3 {
            return Err(Error::Format {
                line,
                reason: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let (client, building, ts) = (&row[0], &row[1], &row[2]);
        if client.is_empty() || building.is_empty() {
            return Err(Error::Format {
                line,
                reason: "empty client or building id".into(),
            });
        }
        let timestamp = parse_timestamp(ts).ok_or_else(|| Error::Format {
            line,
            reason: format!("unparseable timestamp `{ts}`"),
        })?;
        out.push(WifiLogRecord {
            client_id: client.to_string(),
            building_id: building.to_string(),
            timestamp,
        });
    }
    Ok(out)
}

pub fn read_wifi_csv(path: impl AsRef<Path>) -> Result<Vec<WifiLogRecord>> {
    parse_wifi_csv(std::fs::File::open(path)?)
}

/// Consecutive pings of one client in one building on one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub building_id: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl Session {
    pub fn duration_s(&self) -> i64 {
        (self.end - self.start).num_seconds()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub min_days: usize,
    pub kmeans_seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_days: 3,
            kmeans_seed: 0,
        }
    }
}

/// Per-client summary kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientFeatures {
    pub client_id: String,
    pub days: usize,
    pub mean_stationary_ratio: f64,
    pub var_stationary_ratio: f64,
    pub mobile: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OdTable {
    /// (origin building, destination building) -> transitions.
    pub counts: BTreeMap<(String, String), u64>,
}

impl OdTable {
    pub fn get(&self, from: &str, to: &str) -> u64 {
        self.counts.get(&(from.to_string(), to.to_string())).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Crossing-site weights: each transition whose origin building maps to a
    /// site adds its count to that site.
    pub fn crossing_site_weights(&self, building_site: &BTreeMap<String, usize>, n_sites: usize) -> Vec<f64> {
        let mut w = vec![0.0; n_sites];
        for ((from, _), &c) in &self.counts {
            if let Some(&s) = building_site.get(from) {
                if s < n_sites {
                    w[s] += c as f64;
                }
            }
        }
        w
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_record(["origin", "destination", "count"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for ((a, b), c) in &self.counts {
            w.write_record([a.as_str(), b.as_str(), &c.to_string()])
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestResult {
    pub table: OdTable,
    /// Clients that passed the activity filter, with their cluster verdict.
    pub clients: Vec<ClientFeatures>,
}

/// Sessions of one client grouped by day, in time order.
pub fn sessions_by_day(records: &[&WifiLogRecord]) -> BTreeMap<NaiveDate, Vec<Session>> {
    let mut days: BTreeMap<NaiveDate, Vec<Session>> = BTreeMap::new();
    for r in records {
        let day = days.entry(r.timestamp.date()).or_default();
        match day.last_mut() {
            Some(s) if s.building_id == r.building_id => s.end = r.timestamp,
            _ => day.push(Session {
                building_id: r.building_id.clone(),
                start: r.timestamp,
                end: r.timestamp,
            }),
        }
    }
    days
}

/// Longest session over the time between the first and last ping of the
/// day; 1 for a day with no elapsed time.
pub fn stationary_ratio(day: &[Session]) -> f64 {
    let (Some(first), Some(last)) = (day.first(), day.last()) else {
        return 1.0;
    };
    let active = (last.end - first.start).num_seconds();
    if active <= 0 {
        return 1.0;
    }
    let longest = day.iter().map(Session::duration_s).max().unwrap_or(0);
    longest as f64 / active as f64
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

/// Runs the full filtering pipeline. The result does not depend on record
/// order.
pub fn ingest_wifi_logs(records: &[WifiLogRecord], cfg: &IngestConfig) -> Result<IngestResult> {
    let mut sorted: Vec<&WifiLogRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.client_id, a.timestamp, &a.building_id).cmp(&(&b.client_id, b.timestamp, &b.building_id))
    });
    sorted.dedup();

    let mut clients: Vec<(String, BTreeMap<NaiveDate, Vec<Session>>)> = Vec::new();
    for chunk in sorted.chunk_by(|a, b| a.client_id == b.client_id) {
        let days = sessions_by_day(chunk);
        if days.len() >= cfg.min_days {
            clients.push((chunk[0].client_id.clone(), days));
        }
    }

    let mut features: Vec<ClientFeatures> = clients
        .iter()
        .map(|(id, days)| {
            let ratios: Vec<f64> = days.values().map(|d| stationary_ratio(d)).collect();
            let (m, v) = mean_var(&ratios);
            ClientFeatures {
                client_id: id.clone(),
                days: days.len(),
                mean_stationary_ratio: m,
                var_stationary_ratio: v,
                mobile: true,
            }
        })
        .collect();

    if features.len() >= 2 {
        let pts: Vec<[f64; 2]> = features
            .iter()
            .map(|f| [f.mean_stationary_ratio, f.var_stationary_ratio])
            .collect();
        match kmeans_2(&pts, cfg.kmeans_seed) {
            Ok(k) => {
                let stationary = usize::from(k.centroids[1][0] > k.centroids[0][0]);
                for (f, &l) in features.iter_mut().zip(&k.labels) {
                    f.mobile = l != stationary;
                }
            }
            // Identical features: nothing to separate, keep every client.
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let keep: BTreeSet<&str> = features
        .iter()
        .filter(|f| f.mobile)
        .map(|f| f.client_id.as_str())
        .collect();
    let mut table = OdTable::default();
    for (id, days) in &clients {
        if !keep.contains(id.as_str()) {
            continue;
        }
        for day in days.values() {
            for w in day.windows(2) {
                *table
                    .counts
                    .entry((w[0].building_id.clone(), w[1].building_id.clone()))
                    .or_default() += 1;
            }
        }
    }
    Ok(IngestResult {
        table,
        clients: features,
    })
}
