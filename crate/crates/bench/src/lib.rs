//! Fixtures shared by the criterion benches in `benches/`.

use deconflict::{generate_cp, ControlBounds, InstanceSpec, ProblemInstance, ResolveConfig, Vec2};

/// Circle instance with `n` aircraft at the usual radius and speed.
pub fn cp(n: usize) -> ProblemInstance {
    generate_cp(n, 200.0, 500.0, 5.0).expect("valid circle instance")
}

/// Seeded random-circle instance.
pub fn rcp(n: usize, seed: u64) -> ProblemInstance {
    InstanceSpec::rcp(n, seed)
        .generate()
        .and_then(|f| f.to_problem(ControlBounds::default()))
        .expect("valid random-circle instance")
}

/// Relative positions and velocities spread around the unit circle.
pub fn pairs(k: usize) -> Vec<(Vec2, Vec2)> {
    (0..k)
        .map(|i| {
            let a = i as f64 * 2.399_963;
            (Vec2::from_polar(20.0 + (i % 17) as f64 * 10.0, a), Vec2::from_polar(480.0, a + 2.9))
        })
        .collect()
}

/// Pipeline settings for timing: no wall-clock fields in the report.
pub fn config() -> ResolveConfig {
    ResolveConfig {
        record_timing: false,
        ..ResolveConfig::default()
    }
}
