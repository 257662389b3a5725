use std::sync::Arc;

use dualproj::experiments::{
    cmd_converge, cmd_smooth, cmd_spacetime, cmd_verify, ExperimentConfig, Operator, Preset, Refinement, VerifyOptions,
};
use dualproj::mesh::{lagrange_space, FEFunction, SimplicialMesh};
use dualproj::sz_ops::Projections;
use dualproj::timespace::{apply_pi_tensor, gauss_points_per_interval, tensor_eval, TensorFunction, TimeGrid, TimeMesh};

#[test]
fn identical_configs_give_identical_csv() {
    let cfg = ExperimentConfig {
        op: Operator::Pi,
        k: 2,
        levels: 4,
        preset: Preset::Smooth,
        ..Default::default()
    };
    let a = cmd_converge(&cfg).unwrap().to_csv().unwrap();
    let b = cmd_converge(&cfg).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn mesh_sizes_halve_per_level() {
    let cfg = ExperimentConfig {
        d: 2,
        levels: 3,
        ..Default::default()
    };
    let t = cmd_converge(&cfg).unwrap();
    for w in t.rows.windows(2) {
        assert!((w[0].h / w[1].h - 2.0).abs() < 1e-12);
    }
    assert!(t.rows[0].rate_l2.is_none() && t.rows[1].rate_l2.is_some());
}

#[test]
fn rough_data_stays_bounded() {
    for preset in [Preset::Flux, Preset::Dirac] {
        let cfg = ExperimentConfig {
            op: Operator::Pi,
            levels: 5,
            preset,
            ..Default::default()
        };
        let t = cmd_smooth(&cfg).unwrap();
        let errs: Vec<f64> = t.rows.iter().map(|r| r.err_wm1.unwrap()).collect();
        assert!(errs.iter().all(|e| e.is_finite() && *e < 1.0), "{preset:?}: {errs:?}");
        assert!(errs.windows(2).all(|w| w[1] <= w[0] * 1.01), "{preset:?}: {errs:?}");
    }
    let smooth = cmd_smooth(&ExperimentConfig {
        op: Operator::Pi,
        levels: 6,
        ..Default::default()
    })
    .unwrap();
    let r = smooth.final_rates()[2].unwrap();
    assert!((r - 3.0).abs() < 0.2, "{r}");
}

#[test]
fn dirac_needs_one_dimension() {
    let cfg = ExperimentConfig {
        d: 2,
        levels: 2,
        preset: Preset::Dirac,
        ..Default::default()
    };
    assert!(cmd_smooth(&cfg).is_err());
}

#[test]
fn space_only_refinement_saturates() {
    let cfg = ExperimentConfig {
        op: Operator::PiTensor,
        k: 2,
        k_t: 1,
        levels: 5,
        refine: Refinement::Space,
        ..Default::default()
    };
    let t = cmd_spacetime(&cfg).unwrap();
    let last = t.final_rates()[0].unwrap();
    assert!(last.abs() < 0.05, "{last}");
    let e = t.final_errors()[0].unwrap();
    assert!(e > 1e-4, "time error floor expected, got {e}");
}

#[test]
fn tensor_operator_fixes_discrete_tensor_data() {
    let tm = TimeMesh::uniform(1.0, 3, 1).unwrap();
    let xm = Arc::new(SimplicialMesh::interval(4));
    let px = Projections::new(&lagrange_space(&xm, 2).unwrap()).unwrap();
    let phi = FEFunction::from_interior(px.space(), &[0.3, -1.0, 0.5, 0.25, 0.8, -0.2, 0.1]);
    let grid = Arc::new(TimeGrid::gauss(tm.mesh(), gauss_points_per_interval(1)));
    let samples = grid
        .times
        .iter()
        .map(|&t| {
            let mut s = phi.clone();
            s.scale(1.0 + 2.0 * t);
            s
        })
        .collect();
    let v = TensorFunction::from_samples(&grid, px.space(), samples).unwrap();
    let c = apply_pi_tensor(&v, &tm, &px).unwrap();
    let pv = tensor_eval(&c, &tm, px.space(), &grid).unwrap();
    assert!(pv.max_coeff_diff(&v) < 1e-9);
}

#[test]
fn mesh_file_drives_the_base_level() {
    let dir = std::env::temp_dir().join(format!("dualproj-mesh-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("mesh.json");
    SimplicialMesh::<f64>::interval_from_points(&[0.0, 0.2, 0.5, 0.7, 1.0])
        .unwrap()
        .write_json(&path)
        .unwrap();
    let cfg = ExperimentConfig {
        levels: 2,
        mesh: Some(path.clone()),
        ..Default::default()
    };
    let t = cmd_converge(&cfg).unwrap();
    assert!((t.rows[0].h - 0.3).abs() < 1e-12);
    let wrong = ExperimentConfig { d: 2, ..cfg };
    assert!(cmd_converge(&wrong).is_err());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn envelope_is_enforced() {
    for cfg in [
        ExperimentConfig { d: 3, ..Default::default() },
        ExperimentConfig { k: 4, ..Default::default() },
        ExperimentConfig { levels: 8, ..Default::default() },
        ExperimentConfig { d: 2, levels: 6, ..Default::default() },
        ExperimentConfig { levels: 0, ..Default::default() },
    ] {
        assert!(cmd_converge(&cfg).is_err(), "{cfg:?}");
    }
}

#[test]
fn verify_runs_every_pair_and_catches_corruption() {
    let ok = cmd_verify(&VerifyOptions::default()).unwrap();
    assert!(ok.pass);
    for d in 1..=2 {
        for k in 1..=3 {
            assert!(ok.checks.iter().any(|c| c.d == d && c.k == k && c.identity == "dual_biorthogonality"));
        }
    }
    let bad = cmd_verify(&VerifyOptions {
        corrupt: Some((2, 3)),
        only: vec![(2, 3)],
    })
    .unwrap();
    assert!(!bad.pass);
    assert!(bad.failures().any(|c| c.identity == "dual_biorthogonality"));
}
