use asttf::experiment::{ingest_signal, ExperimentConfig};
use asttf::signal::{read_signal, write_signal, Signal};
use asttf::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bat_style_file_with_rate_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("call.txt");
    let mut text = String::from("# sample_rate=370370.37\n");
    for n in 0..400 {
        text.push_str(&format!("{}\n", (n as f64 * 0.1).sin()));
    }
    std::fs::write(&path, text).unwrap();

    let s = read_signal(&path, None).unwrap();
    assert_eq!(s.len(), 400);
    assert!((1.0 / s.sample_rate() - 2.7e-6).abs() < 1e-12);

    let cfg = ExperimentConfig::parse(&format!("input = {}\nsample_rate = header\nmethods = stft", path.display())).unwrap();
    let via_config = ingest_signal(&cfg).unwrap();
    assert_eq!(via_config, s);

    let overridden = read_signal(&path, Some(1000.0)).unwrap();
    assert_eq!(overridden.sample_rate(), 1000.0);
}

#[test]
fn empty_file_is_a_line_one_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.txt");
    std::fs::write(&path, "").unwrap();
    match read_signal(&path, Some(1.0)) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_sample_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "# sample_rate=8\n0.5\n1.5\noops\n").unwrap();
    match read_signal(&path, None) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_rate_without_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norate.txt");
    std::fs::write(&path, "0.1\n0.2\n").unwrap();
    assert!(matches!(read_signal(&path, None), Err(Error::MissingSampleRate)));
}

#[test]
fn writer_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..20 {
        let n = rng.random_range(1..500);
        let samples: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)))
            .collect();
        let s = Signal::new(samples, rng.random_range(1.0..1e6)).unwrap();
        let path = dir.path().join(format!("rt{trial}.txt"));
        write_signal(&path, &s).unwrap();
        let back = read_signal(&path, None).unwrap();
        assert_eq!(back.sample_rate().to_bits(), s.sample_rate().to_bits());
        for (a, b) in back.samples().iter().zip(s.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
