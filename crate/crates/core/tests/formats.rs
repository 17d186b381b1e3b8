//! File-format round trips through the filesystem.

use mtcp_core::io::{read_problem, read_problem_file, read_tensor_file, write_problem_file, write_tensor_file};
use mtcp_core::{Error, GeneratorKind, GeneratorSpec};

#[test]
fn problem_and_tensor_files_round_trip() {
    let dir = std::env::temp_dir().join(format!("mtcp-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for kind in [GeneratorKind::P1, GeneratorKind::P2, GeneratorKind::P3] {
        let p = GeneratorSpec::new(kind, 4, 3, 5).generate().unwrap();
        let path = dir.join(format!("{kind}.mtcp"));
        write_problem_file(&path, &p).unwrap();
        assert_eq!(read_problem_file(&path).unwrap(), p);

        let tpath = dir.join(format!("{kind}.mtt"));
        write_tensor_file(&tpath, &p.tensor).unwrap();
        assert_eq!(read_tensor_file(&tpath).unwrap(), p.tensor);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_problem_file(std::path::Path::new("/nonexistent/problem.mtcp")).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}

#[test]
fn truncated_tensor_reports_the_last_line() {
    let text = "3 2 custom -\n1 1\n-\n1 0\n0 0\n0 0\n";
    match read_problem(text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
        other => panic!("unexpected {other:?}"),
    }
}
