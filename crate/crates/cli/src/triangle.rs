//! Triangle `.node` / `.ele` text files.
//!
//! Records are `index x y [attributes] [marker]` and `index v1 v2 v3
//! [attributes]`. Lines starting with `#` and trailing `#` comments are
//! ignored. Numbering is 0- or 1-based, detected from the first node index;
//! the `.ele` file uses the same numbering.

use saddlepc_core::mesh::Mesh;

use crate::FormatError;

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T, FormatError> {
    field.parse().map_err(|_| FormatError::parse(line, format!("cannot read {what} from '{field}'")))
}

fn header<'a>(
    it: &mut impl Iterator<Item = (usize, Vec<&'a str>)>,
    file: &str,
    min_fields: usize,
) -> Result<(usize, Vec<usize>), FormatError> {
    let (line, fields) = it.next().ok_or_else(|| FormatError::parse(0, format!("empty {file} file")))?;
    if fields.len() < min_fields {
        return Err(FormatError::parse(line, format!("malformed {file} header")));
    }
    let values = fields.iter().map(|f| parse::<usize>(f, line, "header count")).collect::<Result<_, _>>()?;
    Ok((line, values))
}

/// Reads a mesh. Triangles are reoriented counterclockwise and edges
/// re-derived.
pub fn read_triangle(node_text: &str, ele_text: &str) -> Result<Mesh, FormatError> {
    let mut nodes = records(node_text);
    let (hline, h) = header(&mut nodes, ".node", 1)?;
    let count = h[0];
    if h.get(1).is_some_and(|&d| d != 2) {
        return Err(FormatError::parse(hline, format!("only 2D nodes are supported, header says {}", h[1])));
    }
    let n_attr = h.get(2).copied().unwrap_or(0);
    let n_marker = h.get(3).copied().unwrap_or(0);
    let mut base = None;
    let mut vertices = Vec::with_capacity(count);
    for (line, f) in nodes.by_ref().take(count) {
        if f.len() < 3 + n_attr + n_marker {
            return Err(FormatError::parse(line, "node record is too short"));
        }
        let idx: usize = parse(f[0], line, "node index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 {
            return Err(FormatError::parse(line, format!("first node index must be 0 or 1, found {idx}")));
        }
        if idx != b + vertices.len() {
            return Err(FormatError::parse(line, format!("expected node index {}, found {idx}", b + vertices.len())));
        }
        vertices.push([parse(f[1], line, "x")?, parse(f[2], line, "y")?]);
    }
    if vertices.len() != count {
        return Err(FormatError::parse(hline, format!("header announces {count} nodes, found {}", vertices.len())));
    }
    let base = base.unwrap_or(0);

    let mut eles = records(ele_text);
    let (hline, h) = header(&mut eles, ".ele", 1)?;
    let count = h[0];
    let per = h.get(1).copied().unwrap_or(3);
    if per != 3 && per != 6 {
        return Err(FormatError::parse(hline, format!("triangles must have 3 or 6 nodes, header says {per}")));
    }
    let mut triangles = Vec::with_capacity(count);
    for (line, f) in eles.by_ref().take(count) {
        if f.len() < 1 + per {
            return Err(FormatError::parse(line, "triangle record is too short"));
        }
        let mut tri = [0usize; 3];
        for (j, slot) in tri.iter_mut().enumerate() {
            let v: usize = parse(f[1 + j], line, "vertex index")?;
            if v < base || v - base >= vertices.len() {
                return Err(FormatError::IndexOutOfRange { line, index: v, count: vertices.len() });
            }
            *slot = v - base;
        }
        triangles.push(tri);
    }
    if triangles.len() != count {
        return Err(FormatError::parse(
            hline,
            format!("header announces {count} triangles, found {}", triangles.len()),
        ));
    }
    Ok(Mesh::from_triangles(vertices, triangles)?)
}

/// Writes 1-based `.node` (with a boundary marker) and `.ele` texts.
/// Coordinates use the shortest representation that reads back exactly.
pub fn write_triangle(mesh: &Mesh) -> (String, String) {
    let mut node = format!("{} 2 0 1\n", mesh.vertices().len());
    for (i, (v, b)) in mesh.vertices().iter().zip(mesh.boundary_vertex()).enumerate() {
        node += &format!("{} {:?} {:?} {}\n", i + 1, v[0], v[1], u8::from(*b));
    }
    let mut ele = format!("{} 3 0\n", mesh.triangles().len());
    for (i, t) in mesh.triangles().iter().enumerate() {
        ele += &format!("{} {} {} {}\n", i + 1, t[0] + 1, t[1] + 1, t[2] + 1);
    }
    (node, ele)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_zero_based_indices() {
        let node = "# unit triangle\n3 2 0 0\n0 0 0\n1 1 0 # right\n2 0 1\n";
        let ele = "1 3 0\n0 0 1 2\n";
        let mesh = read_triangle(node, ele).unwrap();
        assert_eq!(mesh.edges().len(), 3);
        assert!(mesh.boundary_edge().iter().all(|&b| b));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let node = "3 2 0 0\n1 0 0\n2 0 1\n3 1 0\n";
        let ele = "1 3 0\n1 1 2 3\n";
        let mesh = read_triangle(node, ele).unwrap();
        assert!(mesh.signed_area(0) > 0.0);
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(read_triangle("x 2 0 0\n", "1 3 0\n1 1 2 3\n"), Err(FormatError::Parse { .. })));
        assert!(matches!(read_triangle("3 3 0 0\n", ""), Err(FormatError::Parse { .. })));
    }
}
