use turnlayer::{run_with, EXIT_CONDITION, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(args.iter().copied(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn analyze_reports_passing_conditions() {
    let (code, out, _) = run(&["analyze", "--problem", "ltp1"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("all conditions pass"), "{out}");
    assert!(out.contains("p = 1, decaying directions q = 1"), "{out}");
}

#[test]
fn analyze_csv_has_one_row_per_condition() {
    let (code, out, _) = run(&["analyze", "--problem", "ntp1", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("name,verdict,witness_t,witness_value"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 6);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("pass")), "{out}");
}

#[test]
fn longer_horizon_exits_with_condition_violation() {
    let (code, out, _) = run(&["analyze", "--problem", "ltp1", "--horizon", "2"]);
    assert_eq!(code, EXIT_CONDITION, "{out}");
    assert!(out.contains("distinct_eigenvalues") && out.contains("fail"));
    let (code, _, err) = run(&["expand", "--problem", "ltp1", "--horizon", "2", "--out", "unused"]);
    assert_eq!(code, EXIT_CONDITION, "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["expand", "--problem", "nosuch"][..],
        &["analyze", "--problem", "ltp1", "--bogus"],
        &["validate"],
        &["frobnicate"],
        &["validate", "--problem", "ltp1", "--eps", "1e-2,1e-3"],
        &["residuals", "--problem", "ltp1", "--eps", "-1"],
        &["expand", "--problem", "ltp1", "--order", "9", "--out", "unused"],
        &["expand", "--problem", "ltp1", "--format", "json"],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn help_goes_to_standard_output() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("validate") && out.contains("list-problems"));
}

#[test]
fn list_problems_names_the_registry() {
    let (code, out, _) = run(&["list-problems"]);
    assert_eq!(code, EXIT_OK);
    let names: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["ltp1", "ntp1"]);
}

#[test]
fn validate_confirms_second_order() {
    let (code, out, err) = run(&["validate", "--problem", "ltp1", "--order", "1", "--eps", "1e-2,3e-3,1e-3"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let line = out.lines().find(|l| l.starts_with("error slope:")).expect("summary");
    let slope: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(slope >= 1.8, "{out}");
    assert!(out.contains("empirical confirmation only"));
    let rows: Vec<&str> = out.lines().skip(1).take_while(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 3);
    // 17 significant digits round-trip
    for r in rows {
        for field in r.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(turnlayer::format::float(v), field);
        }
    }
}

#[test]
fn expand_writes_the_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let (code, out, err) = run(&["expand", "--problem", "ntp1", "--order", "1", "--grid-nodes", "200", "--out", path]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("order 1:"));
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    let series = read("series.csv");
    let layers = read("layers.csv");
    let constants = read("constants.csv");
    assert!(series.starts_with("t,k,component,value\n"));
    assert!(layers.starts_with("stretched_time,component,value,order,side\n"));
    assert!(constants.starts_with("order,name,component,value\n"));
    // two orders, two sides, 200 nodes, 3 components
    assert_eq!(layers.lines().count(), 1 + 2 * 2 * 200 * 3);
    assert!(layers.lines().skip(1).all(|l| l.ends_with(",start") || l.ends_with(",end")));
    let leading: Vec<f64> = constants
        .lines()
        .filter(|l| l.starts_with("0,start") || l.starts_with("0,end"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(leading.len(), 3);
    assert!(leading.iter().all(|c| (c - 0.1).abs() < 1e-10), "{leading:?}");
}

#[test]
fn residuals_table_lists_every_epsilon() {
    let (code, out, err) = run(&["residuals", "--problem", "ltp1", "--eps", "1e-2,1e-3"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let rows: Vec<Vec<f64>> = out.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    // order 0: interior residual scales like ε
    let ratio = rows[0][1] / rows[1][1];
    assert!((ratio / 10.0 - 1.0).abs() < 0.3, "{rows:?}");
}
