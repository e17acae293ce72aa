mod common;

use common::random_pair;
use proptest::prelude::*;
use vortexlab::harness::{
    decode_snapshot, encode_snapshot, exit_code, read_snapshot, run_experiment, write_snapshot, Config, Experiment,
    RunManifest, SNAPSHOT_MAGIC,
};
use vortexlab::{Error, LatticeSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn snapshot_round_trip_is_bit_exact(dim in 2usize..=4, seed in any::<u64>(), eps in 0.05f64..2.0, periodic in any::<bool>()) {
        let mut spec = LatticeSpec::cube(dim, 0.3, 0.1).unwrap().with_origin(&vec![0.25; dim]).unwrap();
        if periodic {
            spec = spec.with_periodic(dim - 1).unwrap();
        }
        let fp = random_pair(&spec, eps, seed);
        let back = decode_snapshot(&encode_snapshot(&fp).unwrap()).unwrap();
        prop_assert_eq!(&back.spec, &fp.spec);
        prop_assert_eq!(back.eps.to_bits(), fp.eps.to_bits());
        prop_assert!(back.u.iter().zip(&fp.u).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        prop_assert!(back.alpha.iter().flatten().zip(fp.alpha.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn hash_ignores_layout_and_comments(a in 1u32..100, b in -5.0f64..5.0) {
        let one = Config::parse(&format!("[x]\na = {a}\nb = {b}\n[y]\nc = 1, 2\n")).unwrap();
        let two = Config::parse(&format!("# header\n[y]\n  c   =   1, 2  # trailing\n\n[x]\nb={b}\na={a}\n")).unwrap();
        prop_assert_eq!(one.hash(), two.hash());
        let three = Config::parse(&format!("[x]\na = {}\nb = {b}\n[y]\nc = 1, 2\n", a + 1)).unwrap();
        prop_assert_ne!(one.hash(), three.hash());
    }
}

fn parse_error_line(text: &str) -> usize {
    match Config::parse(text) {
        Err(Error::ConfigParse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn config_errors_carry_line_numbers() {
    assert_eq!(parse_error_line("[a]\nx = 1\n[b\n"), 3);
    assert_eq!(parse_error_line("[a]\n\njust text\n"), 3);
    assert_eq!(parse_error_line("[a]\nx = 1\nx = 2\n"), 3);
    assert_eq!(parse_error_line("[a]\nbad key = 1\n"), 2);
    let cfg = Config::parse("[a]\nx = 1.5\ny = nope\nz = 1, 2; 3, 4\n").unwrap();
    assert_eq!(cfg.require::<f64>("a", "x").unwrap(), 1.5);
    assert!(matches!(cfg.get::<f64>("a", "y"), Err(Error::ConfigParse { line: 3, .. })));
    assert_eq!(cfg.records("a", "z").unwrap().unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    let strict = Config::parse("[a]\nx = 1\nspare = 2\n").unwrap();
    strict.require::<f64>("a", "x").unwrap();
    assert!(matches!(strict.finish(), Err(Error::ConfigParse { line: 3, .. })));
}

#[test]
fn corrupted_snapshots_are_rejected() {
    let spec = LatticeSpec::cube(2, 0.3, 0.1).unwrap();
    let bytes = encode_snapshot(&random_pair(&spec, 1.0, 3)).unwrap();
    assert_eq!(&bytes[..4], SNAPSHOT_MAGIC);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_snapshot(&bad), Err(Error::BadMagic)));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(decode_snapshot(&bad), Err(Error::VersionMismatch { .. })));
    assert!(matches!(decode_snapshot(&bytes[..bytes.len() - 3]), Err(Error::TruncatedFile)));
    assert_eq!(exit_code(&Error::BadMagic), 2);
}

#[test]
fn snapshot_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = LatticeSpec::cube(3, 0.2, 0.1).unwrap();
    let fp = random_pair(&spec, 0.4, 5);
    let path = dir.path().join("pair.vxl");
    write_snapshot(&path, &fp).unwrap();
    assert_eq!(read_snapshot(&path).unwrap(), fp);
}

#[test]
fn identical_configs_reproduce_identical_outputs() {
    let text = "[lattice]\ndim = 2\nextent = 6\nspacing = 0.1\n[vortex]\neps = 1\n";
    let cfg = Config::parse(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(Experiment::SolveVortex, &cfg, &dir.path().join("a")).unwrap();
    let b = run_experiment(Experiment::SolveVortex, &Config::parse(text).unwrap(), &dir.path().join("b")).unwrap();
    assert_eq!(a.manifest.hash(), b.manifest.hash());
    assert!(!a.manifest.outputs.is_empty());
    for name in &a.manifest.outputs {
        let x = std::fs::read(a.dir.join(name)).unwrap();
        let y = std::fs::read(b.dir.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
        if name.ends_with(".csv") {
            let first = String::from_utf8(x).unwrap().lines().next().unwrap().to_string();
            assert_eq!(first, format!("# manifest {}", a.manifest.hash()));
        }
    }
    let m = RunManifest::read(&a.dir.join("manifest.json")).unwrap();
    assert_eq!(m.hash(), a.manifest.hash());
}

#[test]
fn unknown_keys_fail_the_run() {
    let cfg = Config::parse("[lattice]\ndim = 2\nextent = 6\nspacing = 0.1\n[vortex]\neps = 1\ntypo = 3\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(Experiment::SolveVortex, &cfg, dir.path()).unwrap_err();
    assert!(matches!(err, Error::ConfigParse { line: 7, .. }), "{err:?}");
    assert_eq!(exit_code(&err), 2);
}
