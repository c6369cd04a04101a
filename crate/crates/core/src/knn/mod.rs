//! Exact and IVF nearest-neighbor search under Euclidean distance.
//!
//! Each unrealistic sample's realism score is the distance to its nearest
//! real-world neighbor. [`IndexMode::Exact`] scans everything;
//! [`IndexMode::Ivf`] clusters the reference set with k-means and scans only
//! the `nprobe` closest clusters. With `nprobe` equal to the centroid count
//! the two modes agree exactly.

mod distance;
mod index;
mod kmeans;
mod persist;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use distance::{euclidean, squared_l2};
pub use index::{build_index, default_centroid_count, IndexConfig, IndexMode, NeighborIndex};
pub use kmeans::{kmeans, KMeans};
pub use persist::{decode_index, encode_index, load_index, save_index};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub query_id: String,
    pub neighbor_id: String,
    pub distance: f64,
}

/// Relative tolerance under which two distances count as the same hit.
pub const RECALL_TOLERANCE: f64 = 1e-5;

/// Fraction of queries whose approximate distance matches the exact one
/// within [`RECALL_TOLERANCE`] (relative).
pub fn recall_at_1(approx: &[DistanceRecord], exact: &[DistanceRecord]) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::InvalidData(format!(
            "{} approximate records vs {} exact",
            approx.len(),
            exact.len()
        )));
    }
    if exact.is_empty() {
        return Err(Error::EmptyInput("recall over zero queries"));
    }
    let mut hits = 0usize;
    for (i, (a, e)) in approx.iter().zip(exact).enumerate() {
        if a.query_id != e.query_id {
            return Err(Error::IdMismatch {
                position: i,
                left: a.query_id.clone(),
                right: e.query_id.clone(),
            });
        }
        if (a.distance - e.distance).abs() <= RECALL_TOLERANCE * e.distance.abs() {
            hits += 1;
        }
    }
    Ok(hits as f64 / exact.len() as f64)
}

/// CSV with header `query_id,neighbor_id,distance`; distances with six
/// decimals.
pub fn write_records_csv<W: Write>(records: &[DistanceRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::InvalidData(format!("csv write: {e}"));
    w.write_record(["query_id", "neighbor_id", "distance"]).map_err(io)?;
    for r in records {
        w.write_record([
            r.query_id.as_str(),
            r.neighbor_id.as_str(),
            &format!("{:.6}", r.distance),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidData(format!("csv flush: {e}")))
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<DistanceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| Error::MalformedRecord {
            line: 1,
            detail: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["query_id", "neighbor_id", "distance"] {
        return Err(Error::MalformedRecord {
            line: 1,
            detail: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line,
            detail: e.to_string(),
        })?;
        let distance: f64 = rec[2].parse().map_err(|_| Error::MalformedRecord {
            line,
            detail: format!("distance {:?} is not a number", &rec[2]),
        })?;
        if !(distance >= 0.0 && distance.is_finite()) {
            return Err(Error::MalformedRecord {
                line,
                detail: format!("distance {distance} is not a finite non-negative value"),
            });
        }
        out.push(DistanceRecord {
            query_id: rec[0].to_string(),
            neighbor_id: rec[1].to_string(),
            distance,
        });
    }
    Ok(out)
}

pub fn save_records(records: &[DistanceRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_csv(records, std::io::BufWriter::new(f))
}

pub fn load_records(path: &Path) -> Result<Vec<DistanceRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records_csv(std::io::BufReader::new(f))
}
