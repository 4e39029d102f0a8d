//! File outputs of the run harness: MatrixMarket export, sidecars and CSV tables.

use mcs_core::condensation::double_schur;
use mcs_core::driver::{build_problem, prepare, ProblemKind};
use mcs_core::experiment::{
    export_system, read_records, run_solve, run_study, write_records, write_solve_outputs, ExportSidecar, Mode,
    RunConfig, StudyConfig,
};
use mcs_core::preconditioners::{Composition, Target};
use mcs_core::sparse::CsrMatrix;
use std::fs::File;
use std::io::BufReader;

fn read_mtx(p: &std::path::Path) -> CsrMatrix {
    CsrMatrix::read_matrix_market(BufReader::new(File::open(p).unwrap())).unwrap()
}

#[test]
fn exported_matrices_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let side = export_system(&cfg, dir.path()).unwrap();
    let pr = build_problem(cfg.problem, cfg.k, cfg.level, cfg.nu).unwrap();
    let mut cs = prepare(&pr.sys, cfg.nu, None, Target::FullS).unwrap();
    double_schur(&pr.sys, &mut cs).unwrap();
    let s = read_mtx(&dir.path().join("S.mtx"));
    assert_eq!(s.to_dense(), cs.s.to_dense());
    let sb = read_mtx(&dir.path().join("S_boundary.mtx"));
    assert_eq!(sb.to_dense(), cs.double().unwrap().s_bd.to_dense());
    let b = read_mtx(&dir.path().join("B.mtx"));
    assert_eq!(b.to_dense(), cs.b.to_dense());
    let k = read_mtx(&dir.path().join("K.mtx"));
    assert_eq!(k.nrows, side.dimension);
    assert!(k.asymmetry() == 0.0);
    let mp = read_mtx(&dir.path().join("Mp.mtx"));
    assert_eq!(mp.diagonal(), cs.mass_p);

    assert_eq!(side.blocks.iter().map(|b| b.size).sum::<usize>(), side.dimension);
    for w in side.blocks.windows(2) {
        assert_eq!(w[0].offset + w[0].size, w[1].offset);
    }
    assert_eq!(side.velocity_blocks.iter().map(|b| b.size).sum::<usize>(), s.nrows);
    assert_eq!(side.pressure, b.nrows);
    assert!(side.pressure_null_space.is_none());
    let json: ExportSidecar = serde_json::from_reader(File::open(dir.path().join("system.json")).unwrap()).unwrap();
    assert_eq!(json, side);
}

#[test]
fn pure_dirichlet_export_notes_the_pressure_null_space() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        problem: ProblemKind::Cavity,
        ..RunConfig::default()
    };
    let side = export_system(&cfg, dir.path()).unwrap();
    assert!(side.pressure_null_space.unwrap().contains("constant"));
    let elliptic = RunConfig {
        mode: Mode::Elliptic,
        ..cfg
    };
    let side = export_system(&elliptic, dir.path()).unwrap();
    assert!(side.pressure_null_space.is_none());
    assert_eq!(side.blocks.len(), 3);
    assert_eq!(side.blocks.iter().map(|b| b.size).sum::<usize>(), side.dimension);
}

#[test]
fn solve_writes_record_residuals_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.output.dir = dir.path().join("run");
    cfg.output.solution = true;
    let (rec, sol) = run_solve(&cfg).unwrap();
    let files = write_solve_outputs(&cfg, &rec, &sol).unwrap();
    assert_eq!(files.len(), 3);
    let back = read_records(File::open(&files[0]).unwrap()).unwrap();
    assert_eq!(back, vec![rec.clone()]);
    let res = std::fs::read_to_string(&files[1]).unwrap();
    assert_eq!(res.lines().count(), rec.iterations + 2);
    let json: serde_json::Value = serde_json::from_reader(File::open(&files[2]).unwrap()).unwrap();
    assert_eq!(json["velocity"].as_array().unwrap().len(), sol.velocity.len());
}

#[test]
fn study_table_has_one_row_per_point_and_composition() {
    let cfg = RunConfig {
        study: StudyConfig {
            ks: vec![2, 3],
            levels: vec![0],
            compositions: vec![Composition::Additive, Composition::Multiplicative],
            ..StudyConfig::default()
        },
        ..RunConfig::default()
    };
    let rows = run_study(&cfg);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.converged && r.error.is_none()));
    let mut buf = Vec::new();
    write_records(&mut buf, &rows).unwrap();
    let back = read_records(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 4);
    assert_eq!(
        back.iter().map(|r| (r.k, r.composition)).collect::<Vec<_>>(),
        vec![
            (2, Composition::Additive),
            (2, Composition::Multiplicative),
            (3, Composition::Additive),
            (3, Composition::Multiplicative)
        ]
    );
}
