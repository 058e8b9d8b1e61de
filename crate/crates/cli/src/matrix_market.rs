//! MatrixMarket coordinate format (`real general` on output; `real
//! general` and `real symmetric` on input).

use saddlepc_core::la::SparseMatrix;

use crate::FormatError;

pub fn write_matrix_market(a: &SparseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out += &format!("{} {} {}\n", a.n_rows(), a.n_cols(), a.nnz());
    for (i, j, v) in a.iter() {
        out += &format!("{} {} {:?}\n", i + 1, j + 1, v);
    }
    out
}

pub fn read_matrix_market(text: &str) -> Result<SparseMatrix, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, banner) = lines.next().ok_or_else(|| FormatError::parse(1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" || words[2] != "coordinate" {
        return Err(FormatError::parse(1, "expected a '%%MatrixMarket matrix coordinate' banner"));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(FormatError::parse(1, format!("unsupported field '{}'", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(FormatError::parse(1, format!("unsupported symmetry '{other}'"))),
    };
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (sline, size) = body.next().ok_or_else(|| FormatError::parse(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|f| f.parse().map_err(|_| FormatError::parse(sline, "malformed size line")))
        .collect::<Result<_, _>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(FormatError::parse(sline, "size line needs rows, columns and entries"));
    };
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for (line, entry) in body.by_ref().take(nnz) {
        let f: Vec<&str> = entry.split_whitespace().collect();
        if f.len() != 3 {
            return Err(FormatError::parse(line, "entry needs row, column and value"));
        }
        let bad = || FormatError::parse(line, format!("malformed entry '{entry}'"));
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(FormatError::IndexOutOfRange { line, index: i.max(j), count: rows.max(cols) });
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    let found = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if found != nnz {
        return Err(FormatError::parse(sline, format!("size line announces {nnz} entries, found {found}")));
    }
    Ok(SparseMatrix::from_triplets(rows, cols, &triplets)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_input_is_mirrored() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 4\n2 1 -1\n";
        let a = read_matrix_market(text).unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 0), 4.0);
    }

    #[test]
    fn rejects_dense_format_and_bad_indices() {
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n1 1\n1\n").is_err());
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(matches!(read_matrix_market(text), Err(FormatError::IndexOutOfRange { .. })));
    }
}
