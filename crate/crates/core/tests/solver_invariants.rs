//! Solver robustness on the built-in smooth scenarios.

use latflux::harness::builtin_model;
use latflux::pde::{solve, ModelFlux, ProfileSpec};

#[test]
fn cfl_045_keeps_builtin_smooth_runs_admissible() {
    for (name, initial) in [
        ("leroux", "sine:0,0,0.4,0.1"),
        ("bricklayer", "sine:0,0,0.5,0.1"),
    ] {
        let model = builtin_model(name).unwrap();
        let flux = ModelFlux::new(&model);
        let spec = ProfileSpec::parse(initial, model.n_cons()).unwrap();
        let profile = spec.profile(256).unwrap();
        let times: Vec<f64> = (1..=5).map(|k| 0.3 * k as f64 / 5.0).collect();
        let traj = solve(&flux, &profile, 0.3, 0.45, &times)
            .unwrap_or_else(|e| panic!("{name}: solver aborted: {e}"));
        assert_eq!(traj.snapshots.len(), 6);
    }
}

#[test]
fn conservation_across_a_thousand_steps() {
    // 512 cells at cfl 0.45 needs ~1100 steps to reach t = 0.9; the
    // componentwise means must hold to 1e-13 over that window.
    let model = builtin_model("leroux").unwrap();
    let flux = ModelFlux::new(&model);
    let spec = ProfileSpec::parse("sine:0,0,0.4,0.1", 2).unwrap();
    let profile = spec.profile(512).unwrap();
    let traj = solve(&flux, &profile, 0.9, 0.45, &[0.9]).unwrap();
    let before = profile.means();
    let after = traj.snapshots.last().unwrap().means();
    for (b, a) in before.iter().zip(&after) {
        assert!((b - a).abs() < 1e-13, "mean drift {b} -> {a}");
    }
}
