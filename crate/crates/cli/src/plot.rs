//! Comma-separated plot data. Every file starts with a `# config_hash=`
//! comment line followed by a header row.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use orthohmc::ChainRecord;

use crate::container::ChainMeta;
use crate::error::CliError;
use crate::summary::{coordinate_names, report_coordinates};

fn num(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v:?}")
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// One row per kept sample, one column per reported coordinate.
pub fn samples_csv(meta: &ChainMeta, kept: &ChainRecord) -> String {
    let mut s = format!("# config_hash={}\n", meta.config_hash);
    s.push_str("sample");
    for n in coordinate_names(meta) {
        s.push(',');
        s.push_str(&n);
    }
    s.push('\n');
    for (t, sample) in kept.samples.iter().enumerate() {
        let _ = write!(s, "{t}");
        for v in report_coordinates(meta, sample) {
            s.push(',');
            s.push_str(&num(v));
        }
        s.push('\n');
    }
    s
}

pub fn write_samples_csv(
    path: &Path,
    meta: &ChainMeta,
    kept: &ChainRecord,
) -> Result<(), CliError> {
    write(path, &samples_csv(meta, kept))
}

/// Exact draws with their mixture component, columns `mode` then entries.
pub fn oracle_csv(hash: &str, names: &[String], draws: &[(Vec<f64>, usize)]) -> String {
    let mut s = format!("# config_hash={hash}\nsample,mode");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (t, (coords, mode)) in draws.iter().enumerate() {
        let _ = write!(s, "{t},{mode}");
        for v in coords {
            s.push(',');
            s.push_str(&num(*v));
        }
        s.push('\n');
    }
    s
}

pub fn write_oracle_csv(
    path: &Path,
    hash: &str,
    names: &[String],
    draws: &[(Vec<f64>, usize)],
) -> Result<(), CliError> {
    write(path, &oracle_csv(hash, names, draws))
}

/// Per-model test RMSE and the RMSE of the running ensemble.
pub fn rmse_csv(hash: &str, single: &[f64], running: &[f64]) -> String {
    let mut s = format!("# config_hash={hash}\nmodel,single_test_rmse,ensemble_test_rmse\n");
    for (k, (a, b)) in single.iter().zip(running).enumerate() {
        let _ = writeln!(s, "{k},{},{}", num(*a), num(*b));
    }
    s
}

pub fn write_rmse_csv(
    path: &Path,
    hash: &str,
    single: &[f64],
    running: &[f64],
) -> Result<(), CliError> {
    write(path, &rmse_csv(hash, single, running))
}

/// Number of data rows (lines that are neither comments nor the header).
pub fn data_rows(csv: &str) -> usize {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.is_empty())
        .count()
}

/// Coordinates of a `(Q, R)` pair laid out as in [`report_coordinates`].
pub fn qr_coordinates(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = q.iter().copied().collect();
    for j in 0..r.ncols() {
        for i in 0..=j {
            out.push(r[(i, j)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{GroupLayout, LayoutKind};

    #[test]
    fn one_row_per_kept_sample() {
        let meta = ChainMeta {
            config_hash: "abc".into(),
            label: "ohmc".into(),
            n_burn: 0,
            groups: vec![GroupLayout {
                name: "Q".into(),
                rows: 2,
                cols: 1,
                kind: LayoutKind::Stiefel,
            }],
        };
        let mut rec = ChainRecord::with_capacity(3);
        for t in 0..3 {
            rec.samples
                .push(vec![DMatrix::from_element(2, 1, t as f64 + 0.1)]);
            rec.accepted.push(true);
            rec.hamiltonians.push((0.0, 0.0));
            rec.wall_times.push(0.0);
        }
        let csv = samples_csv(&meta, &rec);
        assert!(csv.starts_with("# config_hash=abc\nsample,Q[0,0],Q[1,0]\n"));
        assert_eq!(data_rows(&csv), 3);
        assert!(csv.contains("\n2,2.1,2.1\n"));
    }

    #[test]
    fn oracle_rows_carry_their_mode() {
        let csv = oracle_csv("h", &["a".into()], &[(vec![0.5], 3), (vec![1.0], 0)]);
        assert_eq!(csv, "# config_hash=h\nsample,mode,a\n0,3,0.5\n1,0,1.0\n");
    }
}
