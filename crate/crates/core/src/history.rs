//! Per-iteration records of a 2DRQI run and their CSV/JSON encodings.
//!
//! CSV columns are fixed: `k,mu,lambda,eta,c1,c2,abs_a12,branch`. Row `k`
//! holds iterate `k` and, when the iteration continued from it, the projected
//! pair built at that iterate. Floats use the C `%.17g` convention.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Indefinite projection with `a12 != 0`: two candidate updates.
    IndefiniteSimple,
    /// Indefinite projection with `a12 = 0`: one closed-form update.
    IndefiniteMultiple,
    /// Definite projection, `|c1| != |c2|`.
    DefiniteDistinct,
    /// Definite projection, `c1 = c2`: random direction.
    DefiniteEqual,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::IndefiniteSimple => "indefinite-simple",
            Self::IndefiniteMultiple => "indefinite-multiple",
            Self::DefiniteDistinct => "definite-distinct",
            Self::DefiniteEqual => "definite-equal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub mu: f64,
    pub lambda: f64,
    /// The stopping metric (`eta1`, or `eta2` for block pairs).
    pub eta: f64,
    pub eta1: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub abs_a12: Option<f64>,
    pub branch: Option<Branch>,
    /// Wall-clock seconds since the start of the run; not serialized so that
    /// outputs stay reproducible.
    #[serde(skip)]
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

pub const CSV_HEADER: &str = "k,mu,lambda,eta,c1,c2,abs_a12,branch";

impl ConvergenceHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k,
                fmt_g17(r.mu),
                fmt_g17(r.lambda),
                fmt_g17(r.eta),
                opt(r.c1),
                opt(r.c2),
                opt(r.abs_a12),
                r.branch.map(Branch::as_str).unwrap_or(""),
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("history serializes")
    }
}

/// Formats like C's `printf("%.17g", x)`, which round-trips every `f64`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let digits = (16 - exp) as usize;
        trim_zeros(&format!("{:.*}", digits, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        // reference strings from C printf("%.17g")
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-0.665101440190437, "-0.66510144019043704"),
            (1e-5, "1.0000000000000001e-05"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (2.5e-16, "2.5000000000000002e-16"),
            (0.0001, "0.0001"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g17(x), want, "{x}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[
            std::f64::consts::PI,
            -1.9778957275e-3,
            6.02214076e23,
            5e-324,
        ] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let h = ConvergenceHistory {
            records: vec![
                IterationRecord {
                    k: 0,
                    mu: 0.5,
                    lambda: -1.0,
                    eta: 0.25,
                    eta1: 0.25,
                    c1: Some(1.0),
                    c2: Some(-2.0),
                    abs_a12: Some(0.125),
                    branch: Some(Branch::IndefiniteSimple),
                    elapsed: 0.0,
                },
                IterationRecord {
                    k: 1,
                    mu: 1.0,
                    lambda: 1.0,
                    eta: 0.0,
                    eta1: 0.0,
                    c1: None,
                    c2: None,
                    abs_a12: None,
                    branch: None,
                    elapsed: 0.0,
                },
            ],
        };
        assert_eq!(
            h.to_csv(),
            "k,mu,lambda,eta,c1,c2,abs_a12,branch\n0,0.5,-1,0.25,1,-2,0.125,indefinite-simple\n1,1,1,0,,,,\n"
        );
    }
}
