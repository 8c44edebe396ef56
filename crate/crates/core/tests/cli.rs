use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn mcsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcsa")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn metrics_row(text: &str) -> Vec<String> {
    let mut lines = text.lines().skip_while(|l| !l.starts_with("seed,"));
    lines.next().expect("csv header");
    split_csv(lines.next().expect("csv row"))
}

fn split_csv(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            c => out.last_mut().unwrap().push(c),
        }
    }
    out
}

#[test]
fn run_example_under_mmin() {
    let path = data("worked_example.scn");
    let out = mcsa(&["run", "--scenario", path.to_str().unwrap(), "--bidding", "mmin"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("WS    S1, S2, S3\n"), "{text}");
    assert!(text.contains("WB    B1(10,3/3), B2(8,3/5), B3(5,1/1), B5(11,2/2), B6(9,3/4)\n"));
    assert!(text.contains("Profit 10\n"));
    let row = metrics_row(&text);
    assert_eq!(row[6], "82.000000");
    assert_eq!(row[11], "10.000000");
}

#[test]
fn run_example_under_gmax_matches_hand_computation() {
    let golden = std::fs::read_to_string(data("worked_example_gmax.golden")).unwrap();
    let path = data("worked_example.scn");
    let out = mcsa(&["run", "--scenario", path.to_str().unwrap(), "--bidding", "gmax"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in golden.lines().filter(|l| !l.starts_with('#')) {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn run_with_no_buyers_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.scn");
    std::fs::write(&path, "area 100 protect 10 seed 1\nS 1 0.5 2\n").unwrap();
    let out = mcsa(&["run", "--scenario", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Profit 0\n"));
    let row = metrics_row(&text);
    assert_eq!((row[6].as_str(), row[7].as_str(), row[9].as_str()), ("0.000000", "0.000000", ""));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    std::fs::write(&path, "area 100 protect 10 seed 1\nS 1 0 2\n").unwrap();
    let out = mcsa(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let missing = dir.path().join("missing.scn");
    assert_eq!(mcsa(&["run", "--scenario", missing.to_str().unwrap()]).status.code(), Some(2));
    assert!(!mcsa(&["run", "--pattern", "0,5,0"]).status.success());
    assert!(!mcsa(&["sweep", "--sweep", "radius", "--values", "1"]).status.success());
    let unwritable = dir.path().join("no/such/dir/out.csv");
    let out =
        mcsa(&["sweep", "--sweep", "sellers", "--values", "3", "--rounds", "1", "--out", unwritable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_then_run_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.scn");
    let flags = ["--sellers", "6", "--buyers", "25", "--pattern", "2,4,0.1", "--seed", "77"];
    let mut args = vec!["gen", "--out", path.to_str().unwrap()];
    args.extend(flags);
    assert!(mcsa(&args).status.success());
    let from_file = stdout(&mcsa(&["run", "--scenario", path.to_str().unwrap(), "--pattern", "2,4,0.1"]));
    let mut args = vec!["run"];
    args.extend(flags);
    assert_eq!(from_file, stdout(&mcsa(&args)));
}

#[test]
fn single_round_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = mcsa(&[
        "sweep",
        "--sweep",
        "sellers",
        "--values",
        "7",
        "--buyers",
        "40",
        "--rounds",
        "1",
        "--seed",
        "5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let swept = metrics_row(&text);
    // Point 0, round 0 of master seed 5.
    let seed = mcsa::rng::derive_seed(5, &[0, 0]).to_string();
    let run = metrics_row(&stdout(&mcsa(&["run", "--sellers", "7", "--buyers", "40", "--seed", &seed])));
    assert_eq!(swept[0], "5");
    assert_eq!(run[0], seed);
    assert_eq!(swept[1..], run[1..]);
}

#[test]
fn sweep_csv_schema_is_stable() {
    let out = mcsa(&["sweep", "--sweep", "pattern", "--values", "3,5,0;3,5,0.1", "--buyers", "30", "--rounds", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,mechanism,pattern,sellers,buyers,distance,alpha,nt,beta,eta,alpha_pa,phi");
    assert_eq!(lines.len(), 3);
    assert_eq!(split_csv(lines[1])[..6], ["0", "mmin", "3,5,0", "10", "30", "10"]);
    assert_eq!(split_csv(lines[2])[2], "3,5,0.1");
    for line in &lines[1..] {
        assert_eq!(split_csv(line).len(), 12);
    }
    // Same flags, same bytes.
    let again = mcsa(&["sweep", "--sweep", "pattern", "--values", "3,5,0;3,5,0.1", "--buyers", "30", "--rounds", "3"]);
    assert_eq!(text, stdout(&again));
}

#[test]
fn verify_rejects_zero_deviations() {
    let out = mcsa(&["verify", "--deviations", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("deviations"));
}

fn replay(cx: &std::path::Path) -> String {
    let file = std::fs::read_to_string(cx).unwrap();
    let replay = file.lines().find_map(|l| l.strip_prefix("# replay: ")).unwrap();
    let deviation = replay.split("--deviate ").nth(1).unwrap().to_string();
    let out = mcsa(&["run", "--scenario", cx.to_str().unwrap(), "--deviate", &deviation]);
    assert!(out.status.success());
    deviation
}

#[test]
fn verify_price_misreports_pass_and_mutant_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cx = dir.path().join("cx.scn");
    let out = mcsa(&["verify", "--scenarios", "5", "--price-only", "--counterexample", cx.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("\n0 violations\n"));
    assert!(!cx.exists());

    let out = mcsa(&[
        "verify",
        "--scenarios",
        "5",
        "--price-only",
        "--pricing-mutant",
        "--counterexample",
        cx.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(replay(&cx).starts_with('S'));
}

#[test]
fn verify_finds_demand_overstatement() {
    let dir = tempfile::tempdir().unwrap();
    let cx = dir.path().join("cx.scn");
    let out = mcsa(&["verify", "--scenarios", "5", "--counterexample", cx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    let deviation: mcsa::robustness::Deviation = replay(&cx).parse().unwrap();
    let scenario = mcsa::parse_scenario(&std::fs::read_to_string(&cx).unwrap()).unwrap();
    let mcsa::robustness::Deviation::Buyer { buyer, demand, .. } = deviation else { panic!("{deviation}") };
    assert!(demand > scenario.bid(buyer).unwrap().demand);
}
