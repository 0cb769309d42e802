//! Compiles a C program against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "iddgt.h"

int main(void) {
    IddgtInstance *inst = NULL;
    IddgtTopology *topo = NULL;
    IddgtTrace *trace = NULL;
    if (iddgt_instance_toy(&inst) != IDDGT_STATUS_OK) return 10;
    if (iddgt_topology_complete(2, &topo) != IDDGT_STATUS_OK) return 11;
    IddgtRunOptions opts = {IDDGT_INNER_AGD_TOLERANCE, 0.9, 1.0, 0, 0.5, 2000, 1e-10};
    if (iddgt_run(inst, topo, &opts, &trace) != IDDGT_STATUS_OK) return 12;
    double x[2];
    if (iddgt_trace_final_x(trace, x, 2) != IDDGT_STATUS_OK) return 13;
    if (fabs(x[0] - 2.0) > 1e-8 || fabs(x[1] - 1.0) > 1e-8) return 14;
    if (iddgt_run(inst, NULL, &opts, &trace) != IDDGT_STATUS_NULL_POINTER) return 15;
    if (iddgt_last_error() == NULL) return 16;
    printf("%zu %.3f %.3f\n", iddgt_trace_len(trace), x[0], x[1]);
    iddgt_trace_free(trace);
    iddgt_topology_free(topo);
    iddgt_instance_free(inst);
    return 0;
}
"#;

fn static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libiddgt_ffi.a"))
        .find(|p| p.exists())
        .expect("libiddgt_ffi.a next to the test binary")
}

#[test]
fn c_program_links_and_runs() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("iddgt.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(static_lib())
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim_end().ends_with("2.000 1.000"), "{text}");
}
