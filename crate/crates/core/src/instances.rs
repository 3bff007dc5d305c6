//! Circle Problem generators and the instance file format.
//!
//! CP places `n` aircraft evenly on a circle, all flying to its centre at the
//! same speed. RCP keeps the aircraft on the circle, perturbs each inbound
//! heading and draws each speed uniformly. Its positions are evenly spaced
//! by default; [`PositionLaw::Uniform`] instead draws them uniformly on the
//! circle, redrawing the whole set until every pair starts at least `d` apart.
//!
//! RCP uses `ChaCha8Rng` seeded with the instance seed. Stream 0 draws the
//! uniform positions; stream `k + 1` draws the heading jitter and then the
//! speed of aircraft `k`. ChaCha output is specified independently of the platform,
//! so files regenerate identically everywhere.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{AircraftState, Vec2};
use crate::model::{ControlBounds, ProblemInstance};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_RADIUS_NM: f64 = 200.0;
pub const DEFAULT_SPEED_KN: f64 = 500.0;
pub const DEFAULT_SPEED_RANGE_KN: (f64, f64) = (486.0, 594.0);
pub const DEFAULT_JITTER_RAD: f64 = PI / 6.0;
pub const DEFAULT_SEPARATION_NM: f64 = 5.0;
pub const MAX_REJECTION_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstanceKind {
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "RCP")]
    Rcp,
    #[serde(rename = "custom")]
    Custom,
}

/// How RCP places aircraft on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionLaw {
    /// Angles `2πk/n`, as in CP.
    #[default]
    Even,
    /// Independent uniform angles with rejection for initial separation.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub n_aircraft: usize,
    pub positions: PositionLaw,
    pub radius_nm: f64,
    /// Equal endpoints give a fixed speed.
    pub speed_range_kn: (f64, f64),
    pub heading_jitter_rad: f64,
    pub d_nm: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn cp(n: usize) -> Self {
        Self {
            kind: InstanceKind::Cp,
            n_aircraft: n,
            positions: PositionLaw::Even,
            radius_nm: DEFAULT_RADIUS_NM,
            speed_range_kn: (DEFAULT_SPEED_KN, DEFAULT_SPEED_KN),
            heading_jitter_rad: 0.0,
            d_nm: DEFAULT_SEPARATION_NM,
            seed: 0,
        }
    }

    pub fn rcp(n: usize, seed: u64) -> Self {
        Self {
            kind: InstanceKind::Rcp,
            n_aircraft: n,
            positions: PositionLaw::Even,
            radius_nm: DEFAULT_RADIUS_NM,
            speed_range_kn: DEFAULT_SPEED_RANGE_KN,
            heading_jitter_rad: DEFAULT_JITTER_RAD,
            d_nm: DEFAULT_SEPARATION_NM,
            seed,
        }
    }

    /// Short identifier such as `CP-7` or `RCP-10-s3`.
    pub fn id(&self) -> String {
        match self.kind {
            InstanceKind::Cp => format!("CP-{}", self.n_aircraft),
            InstanceKind::Rcp => format!("RCP-{}-s{}", self.n_aircraft, self.seed),
            InstanceKind::Custom => format!("custom-{}", self.n_aircraft),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.speed_range_kn;
        let ok = self.n_aircraft >= 2
            && self.d_nm > 0.0
            && self.radius_nm > self.d_nm
            && lo > 0.0
            && lo <= hi
            && hi.is_finite()
            && self.heading_jitter_rad >= 0.0
            && self.heading_jitter_rad.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!("bad generator parameters: {self:?}")))
        }
    }

    pub fn generate(&self) -> Result<InstanceFile> {
        self.validate()?;
        let aircraft = match self.kind {
            InstanceKind::Cp => cp_aircraft(self),
            InstanceKind::Rcp => rcp_aircraft(self)?,
            InstanceKind::Custom => {
                return Err(Error::InvalidInstance("custom instances are not generated".into()))
            }
        };
        Ok(InstanceFile {
            version: FORMAT_VERSION,
            kind: self.kind,
            d_nm: self.d_nm,
            aircraft,
            seed: (self.kind == InstanceKind::Rcp).then_some(self.seed),
            generator_params: Some(GeneratorParams {
                n_aircraft: self.n_aircraft,
                position_law: self.positions,
                radius_nm: self.radius_nm,
                speed_lo_kn: self.speed_range_kn.0,
                speed_hi_kn: self.speed_range_kn.1,
                heading_jitter_rad: self.heading_jitter_rad,
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub n_aircraft: usize,
    pub position_law: PositionLaw,
    pub radius_nm: f64,
    pub speed_lo_kn: f64,
    pub speed_hi_kn: f64,
    pub heading_jitter_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftRecord {
    pub id: usize,
    pub x_nm: f64,
    pub y_nm: f64,
    pub speed_kn: f64,
    pub heading_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    pub kind: InstanceKind,
    pub d_nm: f64,
    pub aircraft: Vec<AircraftRecord>,
    pub seed: Option<u64>,
    pub generator_params: Option<GeneratorParams>,
}

impl InstanceFile {
    pub fn to_problem(&self, bounds: ControlBounds) -> Result<ProblemInstance> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidInstance(format!(
                "unsupported instance version {}",
                self.version
            )));
        }
        let states = self
            .aircraft
            .iter()
            .map(|a| AircraftState::new(Vec2::new(a.x_nm, a.y_nm), a.speed_kn, a.heading_rad))
            .collect::<Result<Vec<_>>>()?;
        ProblemInstance::new(states, self.d_nm, bounds)
    }

    pub fn from_problem(inst: &ProblemInstance) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: InstanceKind::Custom,
            d_nm: inst.d,
            aircraft: inst
                .states
                .iter()
                .enumerate()
                .map(|(id, s)| AircraftRecord {
                    id,
                    x_nm: s.position.x,
                    y_nm: s.position.y,
                    speed_kn: s.speed,
                    heading_rad: s.heading,
                })
                .collect(),
            seed: None,
            generator_params: None,
        }
    }

    /// Short identifier derived from the generator parameters.
    pub fn id(&self) -> String {
        let n = self.aircraft.len();
        match (self.kind, self.seed) {
            (InstanceKind::Cp, _) => format!("CP-{n}"),
            (InstanceKind::Rcp, Some(s)) => format!("RCP-{n}-s{s}"),
            (InstanceKind::Rcp, None) => format!("RCP-{n}"),
            (InstanceKind::Custom, _) => format!("custom-{n}"),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn even_positions(n: usize, radius: f64) -> Vec<Vec2> {
    (0..n)
        .map(|k| Vec2::from_polar(radius, TAU * k as f64 / n as f64))
        .collect()
}

fn separated(positions: &[Vec2], d: f64) -> bool {
    let n = positions.len();
    (0..n).all(|i| (i + 1..n).all(|j| (positions[i] - positions[j]).norm() >= d))
}

fn cp_aircraft(spec: &InstanceSpec) -> Vec<AircraftRecord> {
    even_positions(spec.n_aircraft, spec.radius_nm)
        .into_iter()
        .enumerate()
        .map(|(k, pos)| {
            AircraftRecord {
                id: k,
                x_nm: pos.x,
                y_nm: pos.y,
                speed_kn: spec.speed_range_kn.0,
                heading_rad: inbound_heading(pos),
            }
        })
        .collect()
}

fn inbound_heading(pos: Vec2) -> f64 {
    (-pos.y).atan2(-pos.x)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn rcp_aircraft(spec: &InstanceSpec) -> Result<Vec<AircraftRecord>> {
    let n = spec.n_aircraft;
    let mut positions = Vec::with_capacity(n);
    let mut accepted = false;
    match spec.positions {
        PositionLaw::Even => {
            positions = even_positions(n, spec.radius_nm);
            accepted = separated(&positions, spec.d_nm);
        }
        PositionLaw::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for _ in 0..MAX_REJECTION_ROUNDS {
                positions.clear();
                positions.extend((0..n).map(|_| Vec2::from_polar(spec.radius_nm, rng.random_range(0.0..TAU))));
                if separated(&positions, spec.d_nm) {
                    accepted = true;
                    break;
                }
            }
        }
    }
    if !accepted {
        return Err(Error::GenerationFailure {
            rounds: MAX_REJECTION_ROUNDS,
        });
    }
    let (lo, hi) = spec.speed_range_kn;
    let jitter = spec.heading_jitter_rad;
    Ok(positions
        .iter()
        .enumerate()
        .map(|(k, &pos)| {
            let mut stream = ChaCha8Rng::seed_from_u64(spec.seed);
            stream.set_stream(k as u64 + 1);
            let dev = uniform(&mut stream, -jitter, jitter);
            let speed = uniform(&mut stream, lo, hi);
            AircraftRecord {
                id: k,
                x_nm: pos.x,
                y_nm: pos.y,
                speed_kn: speed,
                heading_rad: crate::geom::wrap_angle(inbound_heading(pos) + dev),
            }
        })
        .collect())
}

/// CP instance with default control bounds.
pub fn generate_cp(n: usize, radius_nm: f64, speed_kn: f64, d_nm: f64) -> Result<ProblemInstance> {
    let spec = InstanceSpec {
        radius_nm,
        speed_range_kn: (speed_kn, speed_kn),
        d_nm,
        ..InstanceSpec::cp(n)
    };
    spec.generate()?.to_problem(ControlBounds::default())
}

/// RCP instance with default control bounds.
pub fn generate_rcp(
    n: usize,
    radius_nm: f64,
    speed_range_kn: (f64, f64),
    jitter_rad: f64,
    d_nm: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    let spec = InstanceSpec {
        kind: InstanceKind::Rcp,
        n_aircraft: n,
        positions: PositionLaw::Even,
        radius_nm,
        speed_range_kn,
        heading_jitter_rad: jitter_rad,
        d_nm,
        seed,
    };
    spec.generate()?.to_problem(ControlBounds::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::count_conflicts;

    #[test]
    fn cp_counts_every_pair() {
        for n in 2..=20 {
            let inst = generate_cp(n, 200.0, 500.0, 5.0).unwrap();
            assert_eq!(count_conflicts(&inst.states, inst.d).unwrap(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn cp_is_rotation_invariant() {
        let n = 7;
        let inst = generate_cp(n, 200.0, 500.0, 5.0).unwrap();
        let step = TAU / n as f64;
        for k in 0..n {
            let s = inst.states[k];
            let t = inst.states[(k + 1) % n];
            let rotated = s.position.rotate(step);
            assert!((rotated - t.position).norm() < 1e-9);
            assert!((s.velocity().rotate(step) - t.velocity()).norm() < 1e-9);
        }
    }

    #[test]
    fn rcp_is_deterministic_and_separated() {
        let a = InstanceSpec::rcp(10, 42).generate().unwrap().to_json().unwrap();
        let b = InstanceSpec::rcp(10, 42).generate().unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let c = InstanceSpec::rcp(10, 43).generate().unwrap().to_json().unwrap();
        assert_ne!(a, c);
        for seed in 0..50 {
            let f = InstanceSpec::rcp(10, seed).generate().unwrap();
            for (i, p) in f.aircraft.iter().enumerate() {
                assert!((486.0..594.0).contains(&p.speed_kn));
                let inbound = (-p.y_nm).atan2(-p.x_nm);
                assert!(crate::geom::wrap_angle(p.heading_rad - inbound).abs() <= PI / 6.0 + 1e-12);
                assert!(((p.x_nm.hypot(p.y_nm)) - 200.0).abs() < 1e-9);
                for q in &f.aircraft[i + 1..] {
                    assert!((p.x_nm - q.x_nm).hypot(p.y_nm - q.y_nm) >= 5.0);
                }
            }
        }
    }

    #[test]
    fn rcp_reports_generation_failure() {
        for positions in [PositionLaw::Even, PositionLaw::Uniform] {
            let spec = InstanceSpec {
                d_nm: 150.0,
                positions,
                ..InstanceSpec::rcp(20, 1)
            };
            assert!(matches!(spec.generate(), Err(Error::GenerationFailure { .. })));
        }
    }

    #[test]
    fn uniform_positions_are_separated_and_seeded() {
        let spec = |seed| InstanceSpec {
            positions: PositionLaw::Uniform,
            ..InstanceSpec::rcp(20, seed)
        };
        let a = spec(5).generate().unwrap();
        assert_eq!(a, spec(5).generate().unwrap());
        assert_ne!(a.aircraft[0].x_nm, spec(6).generate().unwrap().aircraft[0].x_nm);
        for seed in 0..50 {
            let f = spec(seed).generate().unwrap();
            for (i, p) in f.aircraft.iter().enumerate() {
                for q in &f.aircraft[i + 1..] {
                    assert!((p.x_nm - q.x_nm).hypot(p.y_nm - q.y_nm) >= 5.0);
                }
            }
        }
    }

    #[test]
    fn file_round_trip_and_strictness() {
        let f = InstanceSpec::cp(4).generate().unwrap();
        let json = f.to_json().unwrap();
        let back = InstanceFile::from_json(&json).unwrap();
        assert_eq!(f, back);
        let p = back.to_problem(ControlBounds::default()).unwrap();
        assert_eq!(p.n_aircraft(), 4);
        let bad = json.replacen("\"version\"", "\"colour\": 1, \"version\"", 1);
        assert!(InstanceFile::from_json(&bad).is_err());
        assert!(InstanceFile::from_json("{").is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(InstanceSpec::cp(1).generate().is_err());
        let spec = InstanceSpec {
            radius_nm: 4.0,
            ..InstanceSpec::cp(4)
        };
        assert!(spec.generate().is_err());
    }
}
