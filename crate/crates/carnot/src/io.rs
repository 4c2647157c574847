//! Interchange formats: algebra files, gauge files, coordinate CSV.
//!
//! Structure constants travel as exact strings. Terminating decimals are
//! written as decimals; everything else falls back to "p/q". Both forms
//! parse back to the identical rational, so write-then-read is the identity
//! on the rational representation.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, GradedLieAlgebra, Grading};
use crate::group::GroupLaw;
use crate::metric::{HomogeneousGauge, MetricError};
use crate::Rational;

pub const FILE_SCHEMA: u64 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("unsupported schema version {0}")]
    BadSchema(u64),
    #[error("cannot parse rational literal {0:?}")]
    BadRational(String),
    #[error("csv line {line}: {msg}")]
    BadCsv { line: usize, msg: &'static str },
}

/// Exact canonical string: integer, terminating decimal, or "p/q".
pub fn rational_to_string(r: &Rational) -> String {
    let num = r.numer();
    let den = r.denom();
    if den.is_one() {
        return num.to_string();
    }
    // count the 2s and 5s; a residual factor forces the p/q form
    let mut rest = den.clone();
    let (two, five, ten) = (BigInt::from(2), BigInt::from(5), BigInt::from(10));
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{num}/{den}");
    }
    let places = twos.max(fives);
    let scaled = (num * ten.pow(places)) / den;
    let sign = if scaled.is_negative() { "-" } else { "" };
    let digits = scaled.abs().to_string();
    let digits = if digits.len() <= places as usize {
        format!("{}{}", "0".repeat(places as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let split = digits.len() - places as usize;
    format!("{sign}{}.{}", &digits[..split], &digits[split..])
}

/// Accepts an optional sign followed by an integer, a decimal, or "p/q".
pub fn rational_from_str(s: &str) -> Result<Rational, IoError> {
    let bad = || IoError::BadRational(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = t.split_once('/') {
        let num: BigInt = p.trim().parse().map_err(|_| bad())?;
        let den: BigInt = q.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let (sign, int_digits) = match int_part.as_bytes().first() {
            Some(b'-') => (-1, &int_part[1..]),
            Some(b'+') => (1, &int_part[1..]),
            _ => (1, int_part),
        };
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int_digits = if int_digits.is_empty() { "0" } else { int_digits };
        let joined: BigInt = format!("{int_digits}{frac_part}").parse().map_err(|_| bad())?;
        let den = BigInt::from(10).pow(frac_part.len() as u32);
        return Ok(Rational::new(BigInt::from(sign) * joined, den));
    }
    let num: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(num))
}

#[derive(Serialize, Deserialize)]
struct TermEntry {
    k: usize,
    c: String,
}

#[derive(Serialize, Deserialize)]
struct BracketEntry {
    i: usize,
    j: usize,
    terms: Vec<TermEntry>,
}

#[derive(Serialize, Deserialize)]
struct AlgebraFile {
    #[serde(default = "default_schema")]
    schema: u64,
    layers: Vec<usize>,
    brackets: Vec<BracketEntry>,
}

fn default_schema() -> u64 {
    FILE_SCHEMA
}

/// Canonical JSON body: brackets grouped by (i, j), 1-based, sorted.
pub fn algebra_to_json(algebra: &GradedLieAlgebra) -> String {
    let mut brackets: Vec<BracketEntry> = Vec::new();
    for t in algebra.constants() {
        let (i, j) = (t.i + 1, t.j + 1);
        let needs_new = brackets.last().map(|b| (b.i, b.j) != (i, j)).unwrap_or(true);
        if needs_new {
            brackets.push(BracketEntry { i, j, terms: Vec::new() });
        }
        brackets
            .last_mut()
            .expect("entry just pushed")
            .terms
            .push(TermEntry { k: t.k + 1, c: rational_to_string(&t.c) });
    }
    let file = AlgebraFile {
        schema: FILE_SCHEMA,
        layers: algebra.grading().layer_dims().to_vec(),
        brackets,
    };
    let mut body = serde_json::to_string_pretty(&file).expect("static schema");
    body.push('\n');
    body
}

pub fn algebra_from_json(body: &str) -> Result<GradedLieAlgebra, IoError> {
    let file: AlgebraFile = serde_json::from_str(body)?;
    if file.schema != FILE_SCHEMA {
        return Err(IoError::BadSchema(file.schema));
    }
    let grading = Grading::new(file.layers)?;
    let mut triples = Vec::new();
    for entry in &file.brackets {
        for term in &entry.terms {
            triples.push((entry.i, entry.j, term.k, rational_from_str(&term.c)?));
        }
    }
    Ok(GradedLieAlgebra::new(grading, triples)?)
}

pub fn write_algebra_file(path: &Path, algebra: &GradedLieAlgebra) -> Result<(), IoError> {
    Ok(fs::write(path, algebra_to_json(algebra))?)
}

pub fn read_algebra_file(path: &Path) -> Result<GradedLieAlgebra, IoError> {
    algebra_from_json(&fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct GaugeFile {
    #[serde(default = "default_schema")]
    schema: u64,
    sigma: Vec<f64>,
}

pub fn gauge_to_json(gauge: &HomogeneousGauge) -> String {
    let file = GaugeFile { schema: FILE_SCHEMA, sigma: gauge.sigma().to_vec() };
    let mut body = serde_json::to_string_pretty(&file).expect("static schema");
    body.push('\n');
    body
}

pub fn gauge_from_json(law: &GroupLaw<f64>, body: &str) -> Result<HomogeneousGauge, IoError> {
    let file: GaugeFile = serde_json::from_str(body)?;
    if file.schema != FILE_SCHEMA {
        return Err(IoError::BadSchema(file.schema));
    }
    Ok(HomogeneousGauge::new(law, file.sigma)?)
}

pub fn write_gauge_file(path: &Path, gauge: &HomogeneousGauge) -> Result<(), IoError> {
    Ok(fs::write(path, gauge_to_json(gauge))?)
}

pub fn read_gauge_file(path: &Path, law: &GroupLaw<f64>) -> Result<HomogeneousGauge, IoError> {
    gauge_from_json(law, &fs::read_to_string(path)?)
}

/// Header `g_1,...,g_n`, one row per element, `.` decimals, LF endings.
pub fn write_csv<W: Write>(mut w: W, samples: &[Vec<f64>]) -> Result<(), IoError> {
    let n = match samples.first() {
        Some(row) => row.len(),
        None => return Err(IoError::BadCsv { line: 0, msg: "no rows to write" }),
    };
    let header: Vec<String> = (1..=n).map(|k| format!("g_{k}")).collect();
    w.write_all(header.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    let mut line = String::new();
    for row in samples {
        line.clear();
        for (k, c) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            // shortest representation that parses back to the same f64
            line.push_str(&format!("{c:?}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, samples: &[Vec<f64>]) -> Result<(), IoError> {
    let file = fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), samples)
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            let cols = line.split(',').count();
            if !line.starts_with("g_1") {
                return Err(IoError::BadCsv { line: 1, msg: "missing g_1 header" });
            }
            width = Some(cols);
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|_| IoError::BadCsv { line: idx + 1, msg: "bad float" })?;
        if Some(row.len()) != width {
            return Err(IoError::BadCsv { line: idx + 1, msg: "ragged row" });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let file = fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{
        build_free_nilpotent, build_heisenberg, build_l2_triple_truncation,
    };

    fn rat(p: i64, q: i64) -> Rational {
        Rational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn rational_strings_are_exact_both_ways() {
        let cases = [
            (rat(1, 1), "1"),
            (rat(-3, 1), "-3"),
            (rat(1, 2), "0.5"),
            (rat(-1, 4), "-0.25"),
            (rat(1, 10), "0.1"),
            (rat(7, 40), "0.175"),
            (rat(1, 3), "1/3"),
            (rat(-5, 6), "-5/6"),
            (rat(0, 1), "0"),
        ];
        for (r, s) in cases {
            assert_eq!(rational_to_string(&r), s);
            assert_eq!(rational_from_str(s).unwrap(), r);
        }
        // alternative spellings parse to the same value
        assert_eq!(rational_from_str("2/6").unwrap(), rat(1, 3));
        assert_eq!(rational_from_str("-0.50").unwrap(), rat(-1, 2));
        assert_eq!(rational_from_str(".5").unwrap(), rat(1, 2));
        for bad in ["", "1/0", "0x2", "1.2.3", "1e3", "two"] {
            assert!(rational_from_str(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn algebra_files_round_trip_exactly() {
        for alg in [
            build_heisenberg(2, 1).unwrap(),
            build_free_nilpotent(2, 3).unwrap(),
            build_l2_triple_truncation(3).unwrap(),
        ] {
            let body = algebra_to_json(&alg);
            let back = algebra_from_json(&body).unwrap();
            assert_eq!(back, alg);
            assert_eq!(back.id(), alg.id());
            // canonical body is a fixed point of write-read-write
            assert_eq!(algebra_to_json(&back), body);
        }
    }

    #[test]
    fn algebra_file_contents_match_the_documented_shape() {
        let body = algebra_to_json(&build_heisenberg(2, 1).unwrap());
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["layers"], serde_json::json!([2, 1]));
        assert_eq!(v["brackets"][0]["i"], 1);
        assert_eq!(v["brackets"][0]["j"], 2);
        assert_eq!(v["brackets"][0]["terms"][0]["k"], 3);
        assert_eq!(v["brackets"][0]["terms"][0]["c"], "1");
    }

    #[test]
    fn thirds_survive_the_file_format() {
        // free step-3 structure constants include 1/3-type coefficients
        // only through the group law; force one through the file directly
        let grading = Grading::new(vec![2, 1, 2]).unwrap();
        let triples = vec![
            (1, 2, 3, rat(1, 3)),
            (1, 3, 4, rat(1, 1)),
            (2, 3, 5, rat(1, 1)),
        ];
        let alg = GradedLieAlgebra::new(grading, triples).unwrap();
        let back = algebra_from_json(&algebra_to_json(&alg)).unwrap();
        assert_eq!(back, alg);
    }

    #[test]
    fn wrong_schema_and_bad_bodies_are_rejected() {
        let body = r#"{"schema":2,"layers":[2,1],"brackets":[]}"#;
        assert!(matches!(algebra_from_json(body), Err(IoError::BadSchema(2))));
        assert!(algebra_from_json("{").is_err());
        let bad_rat = r#"{"layers":[2,1],"brackets":[{"i":1,"j":2,"terms":[{"k":3,"c":"x"}]}]}"#;
        assert!(matches!(algebra_from_json(bad_rat), Err(IoError::BadRational(_))));
        // grading violation surfaces as an algebra error
        let bad_layer = r#"{"layers":[3],"brackets":[{"i":1,"j":2,"terms":[{"k":3,"c":"1"}]}]}"#;
        assert!(matches!(algebra_from_json(bad_layer), Err(IoError::Algebra(_))));
    }

    #[test]
    fn gauge_files_round_trip() {
        let alg = build_heisenberg(2, 1).unwrap();
        let law = GroupLaw::<f64>::new(&alg).unwrap();
        let gauge = HomogeneousGauge::new(&law, vec![1.0, 0.375]).unwrap();
        let body = gauge_to_json(&gauge);
        let back = gauge_from_json(&law, &body).unwrap();
        assert_eq!(back.sigma(), gauge.sigma());
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["sigma"], serde_json::json!([1.0, 0.375]));
        assert!(gauge_from_json(&law, r#"{"schema":9,"sigma":[1.0,1.0]}"#).is_err());
    }

    #[test]
    fn csv_round_trips_with_header_and_lf() {
        let rows = vec![vec![1.0, -0.5, 0.1], vec![0.0, 3.25e-7, -2.0]];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("g_1,g_2,g_3\n"));
        assert!(!text.contains('\r'));
        let back = read_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, rows);
        assert!(read_csv(std::io::Cursor::new(b"h1,h2\n1,2\n".as_slice())).is_err());
        assert!(read_csv(std::io::Cursor::new(b"g_1,g_2\n1\n".as_slice())).is_err());
        assert!(write_csv(&mut Vec::new(), &[]).is_err());
    }
}
