use std::fmt::Write as _;

use pmt::io::{fingerprint, load_pool, read_pool, write_pool, write_pool_to, PoolSchema};
use pmt::pmt_core::data::{MetricRange, IDENTITY};
use pmt::pmt_core::{InstancePool, MetricKind};
use proptest::prelude::*;

fn read(text: &str) -> pmt::Result<InstancePool> {
    read_pool(text.as_bytes(), "TRD_50", &PoolSchema::accuracy())
}

fn data_error(r: pmt::Result<InstancePool>) -> String {
    match r {
        Err(e) if e.exit_code() == 3 => e.to_string(),
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn metric_only_file() {
    let mut text = String::from("instance_id,seed,metric\n");
    for i in 0..200 {
        writeln!(text, "m{i},{i},0.99{}", i % 10).unwrap();
    }
    let pool = read(&text).unwrap();
    assert_eq!(pool.len(), 200);
    assert_eq!(pool.records()[7].seed, Some(7));
    assert_eq!(pool.records()[7].metric, 0.997);
    assert_eq!(pool.meta().mutation_operator, "TRD");
    assert_eq!(pool.meta().magnitude.as_deref(), Some("50"));
}

#[test]
fn outcomes_must_match_accuracy() {
    let cols: Vec<String> = (0..100).map(|i| format!("o_{i}")).collect();
    let cells: Vec<&str> = (0..100).map(|i| if i < 44 { "1" } else { "0" }).collect();
    let header = format!("instance_id,seed,metric,{}\n", cols.join(","));
    let bad = format!("{header}a,1,0.45,{}\n", cells.join(","));
    assert!(data_error(read(&bad)).contains("row 0"));
    let good = format!("{header}a,1,0.44,{}\n", cells.join(","));
    assert_eq!(read(&good).unwrap().records()[0].metric, 0.44);
    let derived = format!("{header}a,1,,{}\n", cells.join(","));
    assert_eq!(read(&derived).unwrap().records()[0].metric, 0.44);
}

#[test]
fn empty_inputs() {
    assert!(data_error(read("")).contains("empty pool"));
    assert!(data_error(read("instance_id,seed,metric\n")).contains("empty pool"));
    assert!(data_error(read("# only a comment\ninstance_id,seed,metric\n# another\n")).contains("empty pool"));
}

#[test]
fn row_level_errors_name_the_row() {
    let dup = data_error(read("instance_id,seed,metric\na,1,0.5\nb,2,0.5\na,3,0.5\n"));
    assert!(dup.contains("row 2") && dup.contains('a'), "{dup}");
    let missing = data_error(read("instance_id,seed,metric\na,1,0.5\n,2,0.5\n"));
    assert!(missing.contains("row 1") && missing.contains("instance_id"), "{missing}");
    for bad in ["nan", "inf", "-inf", "x"] {
        let e = data_error(read(&format!("instance_id,seed,metric\na,1,{bad}\n")));
        assert!(e.contains("row 0"), "{bad}: {e}");
    }
    let ragged = data_error(read("instance_id,seed,metric,o_0,o_1\na,1,1,1,1\nb,2,0.5,1\n"));
    assert!(ragged.contains("row 1"), "{ragged}");
    let not_binary = data_error(read("instance_id,seed,metric,o_0\na,1,1,2\n"));
    assert!(not_binary.contains("not 0 or 1"), "{not_binary}");
    assert!(data_error(read("instance_id,seed,metric\na,-1,0.5\n")).contains("seed"));
    assert!(data_error(read("id,seed,metric\na,1,0.5\n")).contains("header"));
    assert!(data_error(read("instance_id,seed,metric,o_1\na,1,1,1\n")).contains("o_0"));
}

#[test]
fn declared_range_is_enforced_not_clamped() {
    assert!(read("instance_id,seed,metric\na,1,1.0000001\n").is_err());
    let schema = PoolSchema {
        metric_kind: Some(MetricKind::Custom),
        range: Some(MetricRange { lo: 0.0, hi: 10.0 }),
        ..PoolSchema::default()
    };
    assert!(read_pool("instance_id,seed,metric\na,,11\n".as_bytes(), "p", &schema).is_err());
    let pool = read_pool("instance_id,seed,metric\na,,9.5\n".as_bytes(), "p", &schema).unwrap();
    assert_eq!(pool.records()[0].metric, 9.5);
    assert_eq!(pool.records()[0].seed, None);
}

#[test]
fn harness_style_files() {
    let dir = tempfile::tempdir().unwrap();
    let identity = dir.path().join("identity.csv");
    let trd = dir.path().join("TRD_50.csv");
    let header = "instance_id,seed,metric,o_0,o_1,o_2,o_3\n";
    std::fs::write(&identity, format!("{header}identity-0000,100,0.75,1,1,1,0\nidentity-0001,101,1,1,1,1,1\n")).unwrap();
    std::fs::write(&trd, format!("{header}TRD-0000,100,0.5,1,0,1,0\nTRD-0001,101,0.25,0,0,1,0\n")).unwrap();
    let h = load_pool(&identity, &PoolSchema::accuracy()).unwrap();
    assert!(h.is_identity());
    assert_eq!(h.meta().mutation_operator, IDENTITY);
    let m = load_pool(&trd, &PoolSchema::accuracy()).unwrap();
    assert_eq!((m.meta().mutation_operator.as_str(), m.meta().magnitude.as_deref()), ("TRD", Some("50")));
    assert_eq!(m.records()[1].outcomes.as_deref(), Some(&[false, false, true, false][..]));
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load_pool(std::path::Path::new("/nonexistent/pool.csv"), &PoolSchema::accuracy()).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}

fn pools() -> impl Strategy<Value = InstancePool> {
    (1usize..40, 0usize..6).prop_flat_map(|(n, t)| {
        let rows = prop::collection::vec(
            (any::<Option<u64>>(), 0.0f64..=1.0, prop::collection::vec(any::<bool>(), t)),
            n,
        );
        rows.prop_map(move |rows| {
            let mut text = String::from("instance_id,seed,metric");
            for i in 0..t {
                write!(text, ",o_{i}").unwrap();
            }
            text.push('\n');
            for (i, (seed, metric, outcomes)) in rows.into_iter().enumerate() {
                let metric = if t > 0 { String::new() } else { format!("{metric:e}") };
                write!(text, "id{i},{},{metric}", seed.map_or(String::new(), |s| s.to_string())).unwrap();
                for o in outcomes {
                    write!(text, ",{}", o as u8).unwrap();
                }
                text.push('\n');
            }
            read_pool(text.as_bytes(), "p", &PoolSchema::accuracy()).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn write_then_load_is_identity(pool in pools()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_pool(&pool, &path, Some("pmt test header")).unwrap();
        let back = load_pool(&path, &PoolSchema::accuracy()).unwrap();
        prop_assert_eq!(&back, &pool);
        for (a, b) in back.records().iter().zip(pool.records()) {
            prop_assert_eq!(a.metric.to_bits(), b.metric.to_bits());
        }
        prop_assert_eq!(fingerprint(&back), fingerprint(&pool));
        let (mut first, mut second) = (Vec::new(), Vec::new());
        write_pool_to(&pool, &mut first).unwrap();
        write_pool_to(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}
