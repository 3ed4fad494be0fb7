use std::path::PathBuf;

use chorc_core::{parse, Program};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every `.chor` file in the shipped corpus, sorted by name.
#[allow(dead_code)]
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "chor"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let src = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let prog = parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, prog)
        })
        .collect()
}

#[allow(dead_code)]
pub fn load(name: &str) -> Program {
    let src = std::fs::read_to_string(corpus_dir().join(format!("{name}.chor"))).unwrap();
    parse(&src).unwrap()
}
