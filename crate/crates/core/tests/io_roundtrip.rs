use rangevol::io::{ingest_candles, write_candles};
use rangevol::simulation::{simulate_windows, IncrementLaw, WalkSpec};

#[test]
fn simulate_write_ingest_round_trip() {
    let spec = WalkSpec {
        increments_per_window: 25,
        increment_law: IncrementLaw::StudentT { df: 3.5 },
        windows: 5000,
        seed: 17,
    };
    let candles = simulate_windows(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("candles.csv");
    write_candles(std::fs::File::create(&path).unwrap(), &candles, 1_700_000_000, 60).unwrap();
    let back = ingest_candles(&path, false).unwrap();
    assert!(back.warnings.is_empty());
    assert_eq!(back.candles.len(), candles.len());
    for (a, b) in candles.iter().zip(&back.candles) {
        for (x, y) in [(a.open, b.open), (a.high, b.high), (a.low, b.low), (a.close, b.close)] {
            assert!((x - y).abs() <= 1e-12);
        }
    }
    assert!(back.timestamps.windows(2).all(|w| w[1] - w[0] == 60));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(
        ingest_candles("/nonexistent/candles.csv", false),
        Err(rangevol::Error::Io(_))
    ));
}
