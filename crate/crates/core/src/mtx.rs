//! MatrixMarket input and output.
//!
//! Coordinate files (`real`, `integer` or `pattern`; `general` or
//! `symmetric`) load as CSR, array files load dense. Writing uses the
//! symmetric variants and shortest round-trip float formatting, so a
//! write/read cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_path(path: &Path) -> Result<SimilarityMatrix> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

/// Parses MatrixMarket text; `origin` is only used in error messages.
pub fn parse(text: &str, origin: &Path) -> Result<SimilarityMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("unrecognized header `{header}`")));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(err(1, format!("unsupported format `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" if coordinate => Field::Pattern,
        other => return Err(err(1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = body.next().ok_or_else(|| err(1, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(size_line, format!("bad size line: {e}")))?;
    let expected_len = if coordinate { 3 } else { 2 };
    if dims.len() != expected_len {
        return Err(err(size_line, format!("expected {expected_len} integers")));
    }
    let n = dims[0];
    if dims[1] != n {
        return Err(Error::Dimension(format!("matrix is {} x {}, not square", dims[0], dims[1])));
    }

    let number = |line: usize, tok: Option<&str>| -> Result<f64> {
        let tok = tok.ok_or_else(|| err(line, "missing value".into()))?;
        tok.parse::<f64>()
            .map_err(|e| err(line, format!("bad number `{tok}`: {e}")))
    };

    if coordinate {
        let nnz = dims[2];
        let mut triplets = Vec::with_capacity(2 * nnz);
        let mut count = 0;
        for (line, l) in body {
            let mut toks = l.split_whitespace();
            let mut index = || -> Result<usize> {
                let tok = toks.next().ok_or_else(|| err(line, "missing index".into()))?;
                let k: usize = tok
                    .parse()
                    .map_err(|e| err(line, format!("bad index `{tok}`: {e}")))?;
                if k == 0 || k > n {
                    return Err(err(line, format!("index {k} out of range 1..={n}")));
                }
                Ok(k - 1)
            };
            let i = index()?;
            let j = index()?;
            let v = match field {
                Field::Pattern => 1.0,
                Field::Real => number(line, toks.next())?,
            };
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            triplets.push((i, j, v));
            if symmetry == Symmetry::Symmetric && i != j {
                triplets.push((j, i, v));
            }
            count += 1;
        }
        if count != nnz {
            return Err(err(size_line, format!("declared {nnz} entries, found {count}")));
        }
        SimilarityMatrix::csr_from_triplets(n, &triplets)
    } else {
        let mut values = Vec::new();
        for (line, l) in body {
            for tok in l.split_whitespace() {
                values.push(number(line, Some(tok))?);
            }
        }
        let mut data = vec![0.0; n * n];
        match symmetry {
            Symmetry::General => {
                if values.len() != n * n {
                    return Err(err(size_line, format!("expected {} values, found {}", n * n, values.len())));
                }
                // column-major
                for j in 0..n {
                    for i in 0..n {
                        data[i * n + j] = values[j * n + i];
                    }
                }
            }
            Symmetry::Symmetric => {
                let want = n * (n + 1) / 2;
                if values.len() != want {
                    return Err(err(size_line, format!("expected {want} values, found {}", values.len())));
                }
                // lower triangle, column by column
                let mut k = 0;
                for j in 0..n {
                    for i in j..n {
                        data[i * n + j] = values[k];
                        data[j * n + i] = values[k];
                        k += 1;
                    }
                }
            }
        }
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: k / n, col: k % n });
            }
        }
        SimilarityMatrix::dense_symmetrized(n, data)
    }
}

/// Serializes `m`: coordinate symmetric for CSR, array symmetric for dense.
pub fn to_string(m: &SimilarityMatrix) -> String {
    let n = m.n();
    let mut out = String::new();
    if m.is_sparse() {
        let mut lower = Vec::new();
        for i in 0..n {
            for (j, v) in m.row_entries(i) {
                if j <= i {
                    lower.push((i, j, v));
                }
            }
        }
        out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
        let _ = writeln!(out, "{n} {n} {}", lower.len());
        for (i, j, v) in lower {
            let _ = writeln!(out, "{} {} {:?}", i + 1, j + 1, v);
        }
    } else {
        out.push_str("%%MatrixMarket matrix array real symmetric\n");
        let _ = writeln!(out, "{n} {n}");
        for j in 0..n {
            for i in j..n {
                let _ = writeln!(out, "{:?}", m.get(i, j));
            }
        }
    }
    out
}

pub fn write_path(m: &SimilarityMatrix, path: &Path) -> Result<()> {
    fs::write(path, to_string(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
