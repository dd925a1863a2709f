//! Compiles and runs a small C program against the generated header and
//! the cdylib, proving the ABI is consumable from plain C.

use std::path::PathBuf;
use std::process::Command;

fn target_debug_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("CARGO_TARGET_DIR") {
        return PathBuf::from(dir).join("debug");
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/debug")
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "tpp.h"

int main(int argc, char** argv) {
    if (argc < 3) return 10;
    TppDatabase* db = NULL;
    if (tpp_database_load_csv(argv[1], "id", "time", "event", &db) != TppStatus_Ok) {
        fprintf(stderr, "load: %s\n", tpp_last_error_message());
        return 11;
    }
    printf("types=%llu sequences=%llu events=%llu\n",
           (unsigned long long)tpp_database_num_types(db),
           (unsigned long long)tpp_database_num_sequences(db),
           (unsigned long long)tpp_database_num_events(db));

    TppFitOptions opts = tpp_fit_options_default();
    opts.epochs = 1;
    opts.batch_size = 64;
    opts.memory_size = 8;
    TppModel* model = NULL;
    if (tpp_model_fit_preset(db, "linear-hawkes-exp", &opts, &model) != TppStatus_Ok) {
        fprintf(stderr, "fit: %s\n", tpp_last_error_message());
        return 12;
    }
    if (tpp_model_save(model, argv[2]) != TppStatus_Ok) return 13;

    TppModel* loaded = NULL;
    if (tpp_model_load(argv[2], &loaded) != TppStatus_Ok) return 14;

    double* times = NULL;
    uint32_t* types = NULL;
    uint64_t n = 0;
    if (tpp_model_simulate(loaded, 0.0, 10000.0, 20, 7, &times, &types, &n) != TppStatus_Ok) {
        fprintf(stderr, "simulate: %s\n", tpp_last_error_message());
        return 15;
    }
    printf("simulated=%llu first_type_ok=%d\n",
           (unsigned long long)n,
           n == 0 || types[0] < tpp_model_num_types(loaded));
    tpp_buffer_free_f64(times, n);
    tpp_buffer_free_u32(types, n);

    tpp_model_free(model);
    tpp_model_free(loaded);
    tpp_database_free(db);
    return 0;
}
"#;

#[test]
fn c_program_compiles_and_runs() {
    let dir = tempfile_dir();
    let src = dir.join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let libdir = target_debug_dir();
    assert!(
        libdir.join("libtpp_ffi.so").exists() || libdir.join("libtpp_ffi.a").exists(),
        "cdylib not built at {libdir:?}"
    );

    let exe = dir.join("smoke");
    let compile = Command::new("cc")
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg(format!("-I{}", include.display()))
        .arg(format!("-L{}", libdir.display()))
        .arg("-ltpp_ffi")
        .arg(format!("-Wl,-rpath,{}", libdir.display()))
        .output()
        .expect("cc runs");
    assert!(
        compile.status.success(),
        "compile failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let demo = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/linkedin_demo.csv");
    let model_path = dir.join("model.json");
    let run = Command::new(&exe)
        .arg(&demo)
        .arg(&model_path)
        .output()
        .expect("smoke runs");
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "exit {:?}: {}{}",
        run.status.code(),
        stdout,
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(stdout.contains("types=8 sequences=30 events=158"), "{stdout}");
    assert!(stdout.contains("first_type_ok=1"), "{stdout}");
    std::fs::remove_dir_all(&dir).ok();
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tpp_c_smoke_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
