//! Matrix Market (`.mtx`) reading and writing for dense complex matrices.
//!
//! Both `array` and `coordinate` layouts are accepted with `real`,
//! `integer` or `complex` fields; `symmetric`, `hermitian` and
//! `skew-symmetric` storage is expanded to the full matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::Error;
use crate::linalg::ZERO;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
    Skew,
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<Mat<C64>, Error> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_matrix_market(&text, &path.display().to_string())
}

/// Parses Matrix Market text; `origin` labels error messages.
pub fn parse_matrix_market(text: &str, origin: &str) -> Result<Mat<C64>, Error> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(hline, format!("bad header `{header}`")));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(err(hline, format!("unsupported format `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(err(hline, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(err(hline, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (sline, size) = data
        .next()
        .ok_or_else(|| err(hline + 1, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| err(sline, format!("bad size line: {e}")))?;
    let expected = if coordinate { 3 } else { 2 };
    if dims.len() != expected {
        return Err(err(sline, format!("size line needs {expected} integers")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows;
    let mut m = Mat::<C64>::zeros(n, n);

    let parse_value = |line: usize, toks: &[&str]| -> Result<C64, Error> {
        let want = if field == Field::Complex { 2 } else { 1 };
        if toks.len() != want {
            return Err(err(
                line,
                format!("expected {want} value(s), found {}", toks.len()),
            ));
        }
        let re = toks[0]
            .parse::<f64>()
            .map_err(|e| err(line, format!("bad number `{}`: {e}", toks[0])))?;
        let im = if want == 2 {
            toks[1]
                .parse::<f64>()
                .map_err(|e| err(line, format!("bad number `{}`: {e}", toks[1])))?
        } else {
            0.0
        };
        Ok(C64::new(re, im))
    };

    let mut set = |i: usize, j: usize, v: C64| {
        m[(i, j)] = v;
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => m[(j, i)] = v,
                Symmetry::Hermitian => m[(j, i)] = v.conj(),
                Symmetry::Skew => m[(j, i)] = -v,
            }
        }
    };

    let mut last_line = sline;
    if coordinate {
        let nnz = dims[2];
        for k in 0..nnz {
            let (line, text) = data
                .next()
                .ok_or_else(|| err(last_line + 1, format!("expected {nnz} entries, found {k}")))?;
            last_line = line;
            let toks: Vec<&str> = text.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(err(line, "entry needs row and column indices".into()));
            }
            let i = toks[0]
                .parse::<usize>()
                .map_err(|e| err(line, format!("bad row index: {e}")))?;
            let j = toks[1]
                .parse::<usize>()
                .map_err(|e| err(line, format!("bad column index: {e}")))?;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(err(line, format!("index ({i},{j}) out of range")));
            }
            let v = parse_value(line, &toks[2..])?;
            set(i - 1, j - 1, v);
        }
    } else {
        // column-major; only the lower triangle for symmetric storage
        for j in 0..n {
            let start = match symmetry {
                Symmetry::General => 0,
                Symmetry::Skew => j + 1,
                _ => j,
            };
            for i in start..n {
                let (line, text) = data.next().ok_or_else(|| {
                    err(
                        last_line + 1,
                        format!("missing entry ({},{})", i + 1, j + 1),
                    )
                })?;
                last_line = line;
                let toks: Vec<&str> = text.split_whitespace().collect();
                let v = parse_value(line, &toks)?;
                set(i, j, v);
            }
        }
    }
    if let Some((line, _)) = data.next() {
        return Err(err(line, "trailing data after last entry".into()));
    }
    Ok(m)
}

/// Writes `m` as a complex matrix: `coordinate hermitian` (lower triangle)
/// when `hermitian` is set, otherwise `array general`.
pub fn write_matrix_market(
    path: impl AsRef<Path>,
    m: &Mat<C64>,
    hermitian: bool,
) -> Result<(), Error> {
    fs::write(path, format_matrix_market(m, hermitian))?;
    Ok(())
}

pub fn format_matrix_market(m: &Mat<C64>, hermitian: bool) -> String {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = String::new();
    if hermitian {
        let mut entries = Vec::new();
        for j in 0..c {
            for i in j..r {
                if m[(i, j)] != ZERO {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate complex hermitian");
        let _ = writeln!(out, "{r} {c} {}", entries.len());
        for (i, j, v) in entries {
            let _ = writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im);
        }
    } else {
        let _ = writeln!(out, "%%MatrixMarket matrix array complex general");
        let _ = writeln!(out, "{r} {c}");
        for j in 0..c {
            for i in 0..r {
                let _ = writeln!(out, "{:e} {:e}", m[(i, j)].re, m[(i, j)].im);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::example61_matrices;

    #[test]
    fn array_real_roundtrip_example() {
        let (a, _) = example61_matrices();
        let mut text = String::from("%%MatrixMarket matrix array real general\n% example\n3 3\n");
        for j in 0..3 {
            for i in 0..3 {
                text.push_str(&format!("{}\n", a[(i, j)].re));
            }
        }
        let m = parse_matrix_market(&text, "mem").unwrap();
        assert_eq!(m, a);
    }

    #[test]
    fn hermitian_coordinate_expands() {
        let text =
            "%%MatrixMarket matrix coordinate complex hermitian\n3 3 2\n2 1 0.01 0.5\n3 3 -1 0\n";
        let m = parse_matrix_market(text, "mem").unwrap();
        assert_eq!(m[(1, 0)], C64::new(0.01, 0.5));
        assert_eq!(m[(0, 1)], C64::new(0.01, -0.5));
        assert_eq!(m[(2, 2)], C64::new(-1.0, 0.0));
    }

    #[test]
    fn truncated_file_names_line() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 1.0\n2 1 x\n";
        match parse_matrix_market(text, "t.mtx") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 1.0\n";
        match parse_matrix_market(text, "t.mtx") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("expected 3"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_square_rejected() {
        let text = "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n";
        assert!(matches!(
            parse_matrix_market(text, "mem"),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn write_then_read_roundtrips() {
        let m = Mat::<C64>::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(i as f64 + 0.1, 0.0)
            } else if i > j {
                C64::new(0.3 * (i + j) as f64, 1.0 / 3.0)
            } else {
                C64::new(0.3 * (i + j) as f64, -1.0 / 3.0)
            }
        });
        for herm in [true, false] {
            let back = parse_matrix_market(&format_matrix_market(&m, herm), "mem").unwrap();
            assert_eq!(back, m);
        }
    }
}
