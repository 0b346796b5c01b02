use std::path::Path;
use std::process::Command;

const HEADER: &str = include_str!("../include/ironia.h");

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15, "{exported:?}");
    for name in exported {
        assert!(HEADER.contains(&format!("{name}(")), "{name} missing from header");
    }
    for handle in ["IroniaDataset", "IroniaHead", "IroniaReviewQueue"] {
        assert!(HEADER.contains(&format!("typedef struct {handle} {handle};")), "{handle} is not opaque");
    }
    assert!(HEADER.contains("IRONIA_STATUS_OK = 0"));
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("probe.c");
    std::fs::write(
        &probe,
        "#include \"ironia.h\"\n\
         int probe(void) {\n\
           IroniaDataset *ds = 0;\n\
           size_t n = 0;\n\
           IroniaStatus st = ironia_dataset_load(\"x.jsonl\", &ds);\n\
           if (st == IRONIA_STATUS_OK) { ironia_dataset_len(ds, &n); ironia_dataset_free(ds); }\n\
           return (int)st + (int)n;\n\
         }\n",
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&probe)
        .output()
        .expect("a C compiler is available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
