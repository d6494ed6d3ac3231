#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn hdcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdcov"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn hdcov_ok(args: &[&str]) -> String {
    let out = hdcov(args);
    assert!(
        out.status.success(),
        "hdcov {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a CSV with a header, split on commas.
pub fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

/// Kolmogorov-Smirnov distance of a sample to Student t with `df` degrees of freedom.
pub fn ks_to_student_t(sample: &[f64], df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Binomial standard error of a rate estimated from `r` draws.
pub fn binom_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}
