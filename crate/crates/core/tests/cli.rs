use std::process::Command;

use l1_maximal::cli::run_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("l1ml").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn count_prints_bracket() {
    let (code, out, _) = run(&["count", "--d", "4", "--t", "2", "--enumerate"]);
    assert_eq!(code, 0);
    assert!(out.starts_with(
        "sphere=24 ball=41 enumerated_sphere=24 enumerated_ball=41 ratio=17/24 in [0.5, 2.71828"
    ));
    assert!(out.trim_end().ends_with("PASS"));
}

#[test]
fn constants_report_chain() {
    let (code, out, _) = run(&["constants"]);
    assert_eq!(code, 0);
    let chain = out
        .lines()
        .find(|l| l.starts_with("chain="))
        .and_then(|l| l.split('=').nth(2))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap();
    assert!(chain <= 900.0 && chain > 899.0);
}

#[test]
fn kraw_all() {
    let (code, out, err) = run(&["kraw", "--n", "24"]);
    // the root interval is violated for degrees above n/2
    assert_eq!(code, 1);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines
        .iter()
        .any(|l| l.starts_with("roots n=24") && l.ends_with("FAIL")));
    assert!(lines.iter().filter(|l| l.ends_with("PASS")).count() == 3);
    assert!(err.contains("skipping orthogonality"));
    assert_eq!(run(&["kraw", "--n", "12", "--prop", "symmetry"]).0, 0);
    assert_eq!(run(&["kraw", "--n", "40", "--prop", "roots"]).0, 2);
}

#[test]
fn mult_prints_all_symbols() {
    let (code, out, _) = run(&["mult", "--d", "2", "--t", "1", "--xi", "0.5,0"]);
    assert_eq!(code, 0);
    assert!(out.contains("xi=-5.0000000000000000e-1;0.0000000000000000e0"));
    assert!(out.contains(" s=0.0000000000000000e0") || out.contains(" s=6.1"));
    assert!(out.trim_end().ends_with("V=1"));
    let (code, out, _) = run(&[
        "mult", "--d", "3", "--t", "2", "--random", "4", "--seed", "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn verify_csv_is_stable_and_reproducible() {
    let args = [
        "verify",
        "--id",
        "LEM_3_1",
        "--d",
        "6",
        "--t",
        "3",
        "--samples",
        "500",
        "--seed",
        "3",
    ];
    let (code, a, _) = run(&args);
    let (_, b, _) = run(&args);
    assert_eq!(code, 0);
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,d,t,strategy,seed,samples,max_lhs,max_slack,violations,witness"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[0], "LEM_3_1");
        assert_eq!(f[4], "3");
        assert_eq!(f[8], "0");
        assert_eq!(f[9].split(';').count(), 6);
    }
}

#[test]
fn verify_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    let p = path.to_str().unwrap();
    let (code, out, _) = run(&[
        "verify",
        "--id",
        "KR_EXPANSION",
        "--d",
        "8",
        "--strategy",
        "mixed",
        "--samples",
        "200",
        "--out",
        p,
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn exit_codes() {
    assert_eq!(
        run(&["verify", "--id", "COR_2_5", "--d", "3", "--t", "2"]).0,
        2
    );
    assert_eq!(
        run(&["verify", "--id", "NOPE", "--d", "6", "--t", "2"]).0,
        2
    );
    assert_eq!(
        run(&["verify", "--id", "LEM_4_5", "--d", "16", "--t", "2"]).0,
        2
    );
    assert_eq!(
        run(&["operator", "--probe", "random", "--d", "30", "--N", "3", "--trials", "1"]).0,
        3
    );
    assert_eq!(
        run(&["count", "--d", "30", "--t", "12", "--enumerate"]).0,
        3
    );
    assert_eq!(run(&["operator", "--probe", "random", "--d", "4"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn operator_probe_csv() {
    let (code, out, _) = run(&["operator", "--probe", "delta", "--d", "4"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,d,N_or_R,p,trials,seed,max_ratio,bound,pass"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], &["delta", "4", "R=0", "2"]);
    assert!((row[6].parse::<f64>().unwrap() - 0.36075947532250063).abs() < 1e-15);
    assert_eq!(row[8], "true");

    let (code, out, _) = run(&[
        "operator",
        "--probe",
        "semigroup",
        "--d",
        "3",
        "--N",
        "4",
        "--trials",
        "5",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
    let (code, out, _) = run(&[
        "operator",
        "--probe",
        "difference",
        "--d",
        "4",
        "--N",
        "5",
        "--trials",
        "3",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("difference,4,N=5,2,6,0,"));
}

#[test]
fn sweep_rows_sorted_with_ratios() {
    let (code, out, _) = run(&[
        "sweep",
        "--id",
        "COR_2_5",
        "--d-list",
        "64,16",
        "--samples",
        "300",
    ]);
    assert_eq!(code, 0);
    let rows: Vec<Vec<String>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    let keys: Vec<(usize, u64)> = rows
        .iter()
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert_eq!(
        keys,
        vec![
            (16, 1),
            (16, 2),
            (16, 4),
            (64, 1),
            (64, 2),
            (64, 4),
            (64, 8)
        ]
    );
    for r in &rows {
        let ratio: f64 = r[8].parse().unwrap();
        assert!((0.0..=1.0).contains(&ratio));
    }
}

#[test]
fn sweep_witness_replays() {
    let (_, out, _) = run(&[
        "sweep",
        "--id",
        "LEM_4_4A",
        "--d-list",
        "10",
        "--t-rule",
        "fixed:5",
        "--samples",
        "400",
        "--seed",
        "8",
    ]);
    let row: Vec<String> = out
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    let (code, replay, _) = run(&[
        "verify",
        "--id",
        "LEM_4_4A",
        "--d",
        "10",
        "--t",
        "5",
        "--strategy",
        &row[3],
        "--samples",
        "400",
        "--seed",
        "8",
    ]);
    assert_eq!(code, 0);
    assert!(replay.lines().nth(1).unwrap().starts_with("LEM_4_4A,10,5,"));
    let ratio: f64 = row[8].parse().unwrap();
    assert!(ratio <= 1.0);
}

#[test]
fn env_caps_are_honoured() {
    let bin = env!("CARGO_BIN_EXE_l1ml");
    let output = Command::new(bin)
        .args([
            "operator", "--probe", "random", "--d", "4", "--N", "5", "--trials", "1",
        ])
        .env("L1ML_GRID_CAP", "100")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let output = Command::new(bin)
        .args(["count", "--d", "4", "--t", "2", "--enumerate"])
        .env("L1ML_ENUM_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let output = Command::new(bin)
        .args(["constants"])
        .env("L1ML_ENUM_CAP", "lots")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
