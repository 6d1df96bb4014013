use std::process::{Command, Output};

use serde_json::Value;

fn permsft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permsft"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn json(args: &[&str]) -> Value {
    let o = permsft(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(&o)).expect("valid JSON")
}

#[test]
fn two_point_alphabet_has_zero_entropy() {
    let v = json(&["entropy", "--set", "0,1", "--windows", "2..6", "--tori", "3..5"]);
    assert_eq!(v["zero_entropy_by_support_size"], true);
    assert_eq!(v["certified_lower"].as_f64(), Some(0.0));
    assert_eq!(v["report"]["transfer"].as_f64(), Some(0.0));
    let upper = v["certified_upper"].as_f64().unwrap();
    assert!((upper - 2f64.ln() / 6.0).abs() < 1e-11);
}

#[test]
fn pressure_shifts_by_log_of_the_scale() {
    let base = json(&["pressure", "--set", "-1,0,1", "--windows", "4..6"]);
    let scaled = json(&[
        "pressure",
        "--inline",
        r#"{"dim":1,"terms":[{"exp":[-1],"coef":3},{"exp":[0],"coef":3},{"exp":[1],"coef":3}]}"#,
        "--windows",
        "4..6",
    ]);
    let t0 = base["report"]["transfer"].as_f64().unwrap();
    let t1 = scaled["report"]["transfer"].as_f64().unwrap();
    assert!((t1 - t0 - 3f64.ln()).abs() < 1e-10);
    let u0 = base["certified_upper"].as_f64().unwrap();
    let u1 = scaled["certified_upper"].as_f64().unwrap();
    assert!((u1 - u0 - 3f64.ln()).abs() < 1e-10);
}

#[test]
fn pair_tori_have_two_permutations_each() {
    let o = permsft(&["periodic", "--set", "0,1", "--tori", "4..12", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",torus,2")));
}

#[test]
fn dimer_comparison_row_brackets_the_determinant() {
    let o = permsft(&["compare", "--family", "dimer", "--params", "1,1", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("family,params,per_estimate_low,per_estimate_high,det_value,det_error_estimate")
    );
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&cells[..2], ["dimer", "1;1"]);
    let nums: Vec<f64> = cells[2..].iter().map(|c| c.parse().unwrap()).collect();
    let catalan = 0.915_965_594_177_219;
    assert!((nums[2] - catalan * 2.0 / std::f64::consts::PI).abs() < 1e-4);
    assert!(nums[0] <= nums[2] && nums[2] <= nums[1]);
}

#[test]
fn mahler_of_the_golden_trinomial() {
    let v = json(&[
        "mahler",
        "--inline",
        r#"{"dim":1,"terms":[{"exp":[2],"coef":1},{"exp":[1],"coef":1},{"exp":[0],"coef":-1}]}"#,
    ]);
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    assert!((v["jensen"].as_f64().unwrap() - golden).abs() < 1e-10);
    assert!((v["mahler"]["value"].as_f64().unwrap() - golden).abs() < 1e-6);
}

/// Admissible patterns of `{-1, 0, 1}` on `0..n` by brute force over `3^n` choices.
fn brute_admissible(n: i64) -> (usize, usize) {
    let (mut per, mut iper) = (0, 0);
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut image = Vec::new();
        for t in 0..n {
            image.push(t + (c % 3) as i64 - 1);
            c /= 3;
        }
        let mut sorted = image.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() < image.len() {
            continue;
        }
        iper += 1;
        if (1..n - 1).all(|t| image.contains(&t)) {
            per += 1;
        }
    }
    (per, iper)
}

#[test]
fn permanent_counts_are_exact() {
    let v = json(&["permanent", "--set", "-1,0,1", "--window", "6"]);
    let (per, iper) = brute_admissible(6);
    assert_eq!(v["per"]["exact"], per.to_string());
    assert_eq!(v["iper"]["exact"], iper.to_string());
    assert_eq!(v["size"], 6);
}

#[test]
fn verify_suite_passes() {
    let o = permsft(&["verify", "--seed", "7", "--cases", "15", "--format", "csv"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains(",PASS,")).count(), 9);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["entropy", "--set", "0,1", "--windows", "6..2"][..],
        &["entropy"][..],
        &["compare", "--family", "nope", "--params", "1"][..],
        &["entropy", "--set", "0,1", "--tori", "3x3"][..],
        &["frobnicate"][..],
    ] {
        assert_eq!(permsft(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn capacity_errors_exit_with_three_and_keep_partial_output() {
    let o = permsft(&["entropy", "--set", "0;1;2;3", "--windows", "3..8", "--budget", "50", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("transfer,1,"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("profile"));
}

#[test]
fn csv_output_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["entropy", "--set", "-1,0,1", "--windows", "2..9", "--tori", "3..9", "--format", "csv"];
    let a = permsft(&args).stdout;
    let b = permsft(&args).stdout;
    let mut single = args.to_vec();
    single.extend(["--threads", "1"]);
    let c = permsft(&single).stdout;
    assert_eq!(a, b);
    assert_eq!(a, c);
}
