use saddlepc::matrix_market::{read_matrix_market, write_matrix_market};
use saddlepc::triangle::{read_triangle, write_triangle};
use saddlepc::FormatError;
use saddlepc_core::mesh::{gen_lshape, gen_square};
use saddlepc_core::saddle::SaddleSystem;

#[test]
fn triangle_round_trip_keeps_connectivity() {
    for mesh in [gen_square(1, 1.0).unwrap(), gen_square(3, 0.5).unwrap(), gen_lshape(2, 0.7).unwrap()] {
        let (node, ele) = write_triangle(&mesh);
        let back = read_triangle(&node, &ele).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.edges(), mesh.edges());
    }
}

#[test]
fn out_of_range_vertex_is_rejected() {
    let node = "4 2 0 0\n1 0 0\n2 1 0\n3 1 1\n4 0 1\n";
    let ele = "2 3 0\n1 1 2 3\n2 1 3 99\n";
    assert!(matches!(read_triangle(node, ele), Err(FormatError::IndexOutOfRange { index: 99, .. })));
}

#[test]
fn single_triangle_has_three_boundary_edges() {
    let mesh = read_triangle("3 2 0 0\n1 0 0\n2 1 0\n3 0 1\n", "1 3 0\n1 1 2 3\n").unwrap();
    assert_eq!(mesh.edges().len(), 3);
    assert!(mesh.boundary_edge().iter().all(|&b| b));
    assert_eq!(mesh.n_interior_edges(), 0);
}

#[test]
fn degenerate_triangle_is_rejected() {
    let r = read_triangle("3 2 0 0\n1 0 0\n2 1 0\n3 2 0\n", "1 3 0\n1 1 2 3\n");
    assert!(matches!(r, Err(FormatError::Core(_))));
}

#[test]
fn node_markers_and_attributes_are_skipped() {
    let node = "3 2 1 1\n1 0 0 7.5 1\n2 1 0 7.5 1\n3 0 1 7.5 1\n";
    let ele = "1 3 1\n1 1 2 3 42\n";
    assert_eq!(read_triangle(node, ele).unwrap().triangles().len(), 1);
    assert!(read_triangle("3 2 1 1\n1 0 0 1\n2 1 0 1\n3 0 1 1\n", ele).is_err());
}

#[test]
fn matrix_market_round_trip_is_exact() {
    let sys = SaddleSystem::assemble(&gen_lshape(3, 0.5).unwrap(), 0.0).unwrap();
    for a in [sys.a(), sys.mass(), sys.b(), sys.c(), sys.l()] {
        let back = read_matrix_market(&write_matrix_market(a)).unwrap();
        assert_eq!(&back, a);
    }
}
