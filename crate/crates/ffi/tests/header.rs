//! The C header is maintained by hand; these tests keep it in step with the
//! exported symbols and check that it compiles and links from C.

use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn exported_symbols() -> Vec<String> {
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    src.lines()
        .filter_map(|l| {
            let rest = l.strip_prefix("pub unsafe extern \"C\" fn ").or_else(|| l.strip_prefix("pub extern \"C\" fn "))?;
            Some(rest.split('(').next().unwrap().to_string())
        })
        .collect()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/rankatlas.h")).unwrap();
    let symbols = exported_symbols();
    assert!(symbols.len() >= 20, "found only {symbols:?}");
    for s in &symbols {
        assert!(header.contains(&format!(" {s}(")) || header.contains(&format!("*{s}(")), "{s} missing from header");
    }
    let declared = header.matches(" ra_").count() + header.matches("*ra_").count();
    assert_eq!(declared, symbols.len(), "header declares symbols not exported by the crate");
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("librankatlas_ffi.a");
    lib.exists().then_some(lib)
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler on PATH; skipping C smoke test");
        return;
    };
    let lib = static_lib().expect("librankatlas_ffi.a is built alongside the tests");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, SMOKE_C).unwrap();
    let exe = dir.path().join("smoke");
    let include = crate_dir().join("include");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(Path::new(&exe)).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "smoke program failed: {stdout} {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("margin 1.000000"), "{stdout}");
    assert!(stdout.contains("{5, 6}"), "{stdout}");
    assert!(stdout.contains("status 3"), "{stdout}");
}

const SMOKE_C: &str = r#"
#include <stdio.h>
#include <math.h>
#include "rankatlas.h"

int main(void) {
    RaBilinear *q = NULL;
    RaTensor *t = NULL;
    double margin = 0.0;
    int afcr = 0;
    char *text = NULL;
    double bad[3] = {1.0, 2.0, 3.0};
    RaTensor *none = NULL;
    RaStatus st;

    if (ra_bilinear_hypercomplex(4, &q) != RA_STATUS_OK) return 1;
    if (ra_bilinear_to_tensor(q, &t) != RA_STATUS_OK) return 2;
    if (ra_afcr_margin(t, 20, 7, &margin, NULL, &afcr) != RA_STATUS_OK) return 3;
    printf("afcr %d margin %.6f\n", afcr, margin);
    if (ra_classify(3, 3, 5, NULL, &text) != RA_STATUS_OK) return 4;
    printf("%s\n", text);
    ra_string_free(text);
    st = ra_tensor_new(2, 2, 2, bad, 3, &none);
    printf("status %d: %s\n", (int)st, ra_last_error_message());
    ra_tensor_free(t);
    ra_bilinear_free(q);
    return fabs(margin - 1.0) < 1e-8 ? 0 : 5;
}
"#;
