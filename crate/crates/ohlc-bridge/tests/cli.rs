use std::process::{Command, Output};

fn ohlc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ohlc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn verify_quick_passes() {
    let o = ohlc(&["verify", "--level", "quick"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn feller_reports_term_counts() {
    let o = ohlc(&["feller", "--points", "2", "--xmin", "0.005", "--xmax", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,density,terms"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0.005");
    let terms: usize = first[2].parse().unwrap();
    assert!(terms > 100, "{terms}");
}

#[test]
fn table2_close_row_near_bridge_average() {
    let o = ohlc(&["table2", "--paths", "100000", "--steps", "200", "--bins", "40", "--seed", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let close = out.lines().find(|l| l.starts_with("close,")).expect("close row");
    let measured: f64 = close.split(',').nth(1).unwrap().parse().unwrap();
    assert!((measured - 1.0 / 6.0).abs() < 0.01, "{close}");
}

#[test]
fn simulate_is_reproducible_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let curves = dir.path().join(format!("{name}.csv"));
        let dump = dir.path().join(format!("{name}.bin"));
        let mut args = vec!["simulate", "--paths", "4000", "--steps", "64", "--bins", "4", "--condition", "ch", "--seed", "11"];
        args.extend_from_slice(extra);
        let (c, d) = (curves.to_str().unwrap().to_string(), dump.to_str().unwrap().to_string());
        args.extend_from_slice(&["--output", &c, "--dump", &d]);
        let o = ohlc(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (o.stdout, std::fs::read(curves).unwrap(), std::fs::read(dump).unwrap())
    };
    let a = run("a", &["--sequential"]);
    let b = run("b", &["--sequential"]);
    let c = run("c", &[]);
    assert_eq!(a, b);
    assert_eq!(a.2, c.2, "path summaries do not depend on threading");
    assert_eq!(&a.2[..8], b"OHLCSUM1");
}

#[test]
fn interpolate_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bars.csv");
    std::fs::write(&input, "date,open,high,low,close\nd1,100,103,98,101\nd2,101,102,97,98\n").unwrap();
    let o = ohlc(&["interpolate", "--input", input.to_str().unwrap(), "--sigma", "gk", "--grid", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("bar_id,t,tau,mean,variance,sigma_sq,method"));
    assert_eq!(out.lines().count(), 1 + 2 * 5);
    assert!(out.lines().nth(1).unwrap().starts_with("d1,0,0,0,0,"));
}

#[test]
fn exit_codes() {
    assert_eq!(ohlc(&["bogus"]).status.code(), Some(1));
    assert_eq!(ohlc(&["simulate", "--paths", "0"]).status.code(), Some(1));
    let o = ohlc(&["--emit", "json", "interpolate", "--input", "/nonexistent/bars.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stdout).or_else(|_| serde_json::from_slice(&o.stderr)).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);
}
