//! Plot-ready summaries of the distance distribution and of the embedding
//! space. Everything is written as CSV preceded by `#` comment lines.

mod pca;

use std::io::Write;
use std::path::Path;

pub use pca::{pca_project, save_projection, write_projection_csv, Projection2D, PCA_MAX_ITERATIONS, PCA_TOLERANCE};

use crate::error::{Error, Result};
use crate::knn::DistanceRecord;
use crate::select::{fraction_count, select_subset};

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_PHIS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 1.0];

/// Percentiles annotated on every histogram.
pub const HISTOGRAM_PERCENTILES: [u32; 4] = [10, 25, 50, 75];

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
    /// `(p, value)` for each of [`HISTOGRAM_PERCENTILES`], using the same
    /// index rule as subset selection.
    pub percentiles: Vec<(u32, f64)>,
}

/// Equal-width bins over `[min, max]`; each bin is half-open except the last,
/// which also takes `max`. A zero-width range is widened to `[v, v + 1]`.
pub fn histogram(records: &[DistanceRecord], bins: usize) -> Result<Histogram> {
    if records.is_empty() {
        return Err(Error::EmptyInput("distance records for the histogram"));
    }
    if bins == 0 {
        return Err(Error::param("histogram needs at least one bin"));
    }
    let mut sorted: Vec<f64> = records.iter().map(|r| r.distance).collect();
    if let Some(bad) = sorted.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidData(format!("non-finite distance {bad}")));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let lo = sorted[0];
    let hi = if sorted[n - 1] > lo { sorted[n - 1] } else { lo + 1.0 };
    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    bin_edges.push(hi);
    if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidData(format!(
            "range [{lo}, {hi}] is too narrow for {bins} distinct bins"
        )));
    }

    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let mut b = (((x - lo) / width) as usize).min(bins - 1);
        // Settle rounding at the edges against the stored edge values.
        while b > 0 && x < bin_edges[b] {
            b -= 1;
        }
        while b + 1 < bins && x >= bin_edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }

    let percentiles = HISTOGRAM_PERCENTILES
        .iter()
        .map(|&p| (p, sorted[fraction_count(p as f64 / 100.0, n).min(n - 1)]))
        .collect();
    Ok(Histogram {
        bin_edges,
        counts,
        total: n,
        percentiles,
    })
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, mut w: W) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# distance histogram: {} records, {} bins\n",
        h.total,
        h.counts.len()
    ));
    for (p, v) in &h.percentiles {
        out.push_str(&format!("# p{p}={v}\n"));
    }
    out.push_str("bin_lo,bin_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{c}\n", h.bin_edges[i], h.bin_edges[i + 1]));
    }
    w.write_all(out.as_bytes())
        .map_err(|e| Error::InvalidData(format!("writing histogram: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileRow {
    pub phi: f64,
    pub threshold: f64,
    pub count: usize,
}

/// One row per phi, sorted by phi, using subset-selection semantics.
pub fn percentile_table(records: &[DistanceRecord], phis: &[f64]) -> Result<Vec<PercentileRow>> {
    let mut phis = phis.to_vec();
    phis.sort_by(f64::total_cmp);
    phis.iter()
        .map(|&phi| {
            let spec = select_subset(records, phi)?;
            Ok(PercentileRow {
                phi,
                threshold: spec.manifest.threshold,
                count: spec.manifest.selected_count,
            })
        })
        .collect()
}

pub fn write_percentile_csv<W: Write>(rows: &[PercentileRow], total: usize, mut w: W) -> Result<()> {
    let mut out = format!("# percentile thresholds over {total} records\nphi,threshold,count\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.phi, r.threshold, r.count));
    }
    w.write_all(out.as_bytes())
        .map_err(|e| Error::InvalidData(format!("writing percentile table: {e}")))
}

pub(crate) fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    crate::dataset::write_file(path, &buf)
}

pub fn save_histogram(h: &Histogram, path: &Path) -> Result<()> {
    write_with(path, |b| write_histogram_csv(h, b))
}

pub fn save_percentile_table(rows: &[PercentileRow], total: usize, path: &Path) -> Result<()> {
    write_with(path, |b| write_percentile_csv(rows, total, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn records(d: &[f64]) -> Vec<DistanceRecord> {
        d.iter()
            .enumerate()
            .map(|(i, &x)| DistanceRecord {
                query_id: format!("u{i}"),
                neighbor_id: "r".into(),
                distance: x,
            })
            .collect()
    }

    #[test]
    fn degenerate_range_single_bin() {
        let h = histogram(&records(&[1.0, 1.0, 1.0]), 1).unwrap();
        assert_eq!(h.counts, [3]);
        assert_eq!(h.bin_edges, [1.0, 2.0]);
        let h = histogram(&records(&[1.0, 1.0, 1.0]), 4).unwrap();
        assert_eq!(h.counts, [3, 0, 0, 0]);
    }

    #[test]
    fn two_bins_by_hand() {
        let h = histogram(&records(&[0.0, 1.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(h.bin_edges, [0.0, 1.5, 3.0]);
        assert_eq!(h.counts, [2, 2]);
    }

    #[test]
    fn values_on_inner_edges_go_right() {
        let h = histogram(&records(&[0.0, 1.0, 2.0, 3.0, 4.0]), 4).unwrap();
        assert_eq!(h.counts, [1, 1, 1, 2]);
    }

    #[test]
    fn percentile_annotations_and_csv() {
        let d: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let h = histogram(&records(&d), 2).unwrap();
        assert_eq!(h.percentiles, [(10, 10.0), (25, 25.0), (50, 50.0), (75, 75.0)]);
        let mut buf = Vec::new();
        write_histogram_csv(&h, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# distance histogram: 100 records, 2 bins\n# p10=10\n# p25=25\n# p50=50\n# p75=75\n\
             bin_lo,bin_hi,count\n0,49.5,50\n49.5,99,50\n"
        );
        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&records(&[1.0]), 0).is_err());
    }

    #[test]
    fn constant_distances_table() {
        let rows = percentile_table(&records(&[0.5; 9]), &[1.0, 0.1, 0.5]).unwrap();
        assert_eq!(rows.iter().map(|r| r.phi).collect::<Vec<_>>(), [0.1, 0.5, 1.0]);
        assert!(rows.iter().all(|r| r.threshold == 0.5 && r.count == 9));
        let mut buf = Vec::new();
        write_percentile_csv(&rows, 9, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .contains("phi,threshold,count\n0.1,0.5,9\n"));
    }

    proptest! {
        #[test]
        fn conservation(d in proptest::collection::vec(0.0f64..100.0, 1..300), bins in 1usize..64) {
            let h = histogram(&records(&d), bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), d.len());
            prop_assert_eq!(h.total, d.len());
            prop_assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
            // each value lies inside its bin
            for &x in &d {
                prop_assert!(x >= h.bin_edges[0] && x <= h.bin_edges[bins]);
            }
        }

        #[test]
        fn table_monotone(d in proptest::collection::vec(0.0f64..2.0, 1..300), phis in proptest::collection::vec(0.0f64..=1.0, 1..8)) {
            let rows = percentile_table(&records(&d), &phis).unwrap();
            prop_assert!(rows.windows(2).all(|w| w[0].phi <= w[1].phi && w[0].threshold <= w[1].threshold && w[0].count <= w[1].count));
        }
    }
}
