//! Trip generation and Wi-Fi log processing.

mod kmeans;
mod trips;
mod wifi;

pub use kmeans::{inertia, kmeans_2, KMeans2, KMEANS_MAX_ITERS};
pub use trips::*;
pub use wifi::{
    ingest_wifi_logs, parse_timestamp, parse_wifi_csv, read_wifi_csv, sessions_by_day, stationary_ratio, ClientFeatures,
    IngestConfig, IngestResult, OdTable, Session, WifiLogRecord,
};
