use std::io::Write;

use cofactor::io::{load_csv, read_csv, select_interval, write_csv, Interval};
use cofactor::SignalMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn loads_from_disk_and_sorts_like_a_reference_sort() {
    let rows = [(5.0, 1.5, -2.0), (1.0, 3.25, 4.0), (3.0, 0.5, 8.0), (2.0, 7.0, 1.0), (4.0, 2.0, 0.0)];
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "t,x,y").unwrap();
    for (t, x, y) in rows {
        writeln!(file, "{t},{x},{y}").unwrap();
    }
    let m = load_csv(file.path(), "t", &["x".into(), "y".into()]).unwrap();

    let mut reference = rows.to_vec();
    reference.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert_eq!(m.times(), reference.iter().map(|r| r.0).collect::<Vec<_>>());
    assert_eq!(m.column(0), reference.iter().map(|r| r.1).collect::<Vec<_>>());
    assert_eq!(m.column(1), reference.iter().map(|r| r.2).collect::<Vec<_>>());
}

#[test]
fn missing_file_is_an_error() {
    assert!(load_csv(std::path::Path::new("/nonexistent/input.csv"), "t", &[]).is_err());
}

#[test]
fn interval_keeps_exact_boundary_samples() {
    let times: Vec<f64> = (0..30).map(|t| 0.5 * t as f64).collect();
    let values = DMatrix::from_fn(30, 2, |t, i| ((t * 7 + i * 3) % 11) as f64);
    let m = SignalMatrix::new(times, values, vec!["a".into(), "b".into()]).unwrap();
    let s = select_interval(&m, &Interval::new(2.0, 8.0).unwrap(), 1).unwrap();
    assert_eq!(s.times().first(), Some(&2.0));
    assert_eq!(s.times().last(), Some(&8.0));
    assert_eq!(s.n_rows(), 13);
    assert_eq!(s.column(1), m.column(1)[4..=16].to_vec());
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(
        data in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 6..60),
    ) {
        let n = data.len() / 2;
        let values = DMatrix::from_fn(n, 2, |t, i| data[2 * t + i]);
        let times: Vec<f64> = (0..n).map(|t| t as f64 * 0.1 + 1e-7).collect();
        // constant or variance-overflowing columns are rejected by the matrix itself
        let m = SignalMatrix::new(times, values, vec!["p".into(), "q".into()]);
        prop_assume!(m.is_ok());
        let m = m.unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, "time", &m).unwrap();
        let back = read_csv(buf.as_slice(), "time", &[]).unwrap();
        for (a, b) in back.values().iter().zip(m.values().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in back.times().iter().zip(m.times()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
