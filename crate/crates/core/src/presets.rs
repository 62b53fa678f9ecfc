//! Built-in test problems with known coefficients.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{
    Backend, MatrixFamily, Pairing, Parabolic1D, ProblemSpec, StateVector, Stepper, TimeGrid,
};

/// A closed-form coefficient `gamma(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaProfile {
    Constant(f64),
    /// `mean + amplitude * sin(2 pi frequency t)`.
    Sine {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl GammaProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            GammaProfile::Constant(c) => c,
            GammaProfile::Sine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (2.0 * PI * frequency * t).sin(),
        }
    }

    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.nodes().into_iter().map(|t| self.eval(t)).collect()
    }

    /// `int_0^t gamma`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            GammaProfile::Constant(c) => c * t,
            GammaProfile::Sine {
                mean,
                amplitude,
                frequency,
            } => {
                let w = 2.0 * PI * frequency;
                if w == 0.0 {
                    mean * t
                } else {
                    mean * t + amplitude * (1.0 - (w * t).cos()) / w
                }
            }
        }
    }
}

impl std::str::FromStr for GammaProfile {
    type Err = String;

    /// `const:<c>` or `sine:<mean>,<amplitude>,<frequency>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("invalid number '{x}' in gamma profile"))
        };
        if let Some(rest) = s.strip_prefix("const:") {
            return Ok(GammaProfile::Constant(num(rest)?));
        }
        if let Some(rest) = s.strip_prefix("sine:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(format!(
                    "sine profile needs mean,amplitude,frequency, got '{rest}'"
                ));
            }
            return Ok(GammaProfile::Sine {
                mean: num(parts[0])?,
                amplitude: num(parts[1])?,
                frequency: num(parts[2])?,
            });
        }
        Err(format!(
            "unknown gamma profile '{s}' (expected const:<c> or sine:<mean>,<amp>,<freq>)"
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    /// `d = 1`, `A = -1`, `u0 = w = 1`, `f = 0`.
    ScalarDecay,
    /// `d = 1`, `A = 0`, `u0 = w = 1`, `f = 1`.
    ScalarSource,
    /// Heat equation on `[0, L]`, `u0 = w = sin(pi x / L)`, `f = 0`.
    HeatSine,
    /// `a = 1`, `b = 0.5`, `c = -0.2`, `u0 = w = sin(pi x / L)`, `f = x (L - x) / L^2`.
    AdvectionReaction,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::ScalarDecay,
        PresetName::ScalarSource,
        PresetName::HeatSine,
        PresetName::AdvectionReaction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetName::ScalarDecay => "scalar_decay",
            PresetName::ScalarSource => "scalar_source",
            PresetName::HeatSine => "heat_sine",
            PresetName::AdvectionReaction => "advection_reaction",
        }
    }

    pub fn is_parabolic(self) -> bool {
        matches!(self, PresetName::HeatSine | PresetName::AdvectionReaction)
    }

    pub fn default_gamma(self) -> GammaProfile {
        match self {
            PresetName::ScalarDecay => GammaProfile::Constant(0.5),
            PresetName::ScalarSource => GammaProfile::Constant(0.0),
            PresetName::HeatSine => GammaProfile::Sine {
                mean: 1.0,
                amplitude: 0.5,
                frequency: 1.0,
            },
            PresetName::AdvectionReaction => GammaProfile::Sine {
                mean: 0.5,
                amplitude: 0.3,
                frequency: 1.0,
            },
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset '{s}'"))
    }
}

/// Grid and discretization parameters for building a preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetParams {
    pub final_time: f64,
    pub steps: usize,
    /// Spatial interval length `L` (parabolic presets only).
    pub length: f64,
    /// Interior node count `M` (parabolic presets only).
    pub interior: usize,
    pub stepper: Stepper,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            final_time: 1.0,
            steps: 200,
            length: PI,
            interior: 64,
            stepper: Stepper::CrankNicolson,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: PresetName,
    pub spec: ProblemSpec,
    pub gamma: GammaProfile,
}

fn scalar(grid: TimeGrid, a: f64, f: f64, stepper: Stepper) -> ProblemSpec {
    ProblemSpec {
        grid,
        backend: Backend::MatrixFamily(MatrixFamily::constant(
            DMatrix::from_element(1, 1, a),
            &grid,
        )),
        u0: vec![1.0].into(),
        source: vec![vec![f].into(); grid.len()],
        pairing: Pairing::new(vec![1.0].into(), 1.0),
        stepper,
    }
}

fn parabolic(
    grid: TimeGrid,
    params: &PresetParams,
    (a, b, c): (f64, f64, f64),
    source: impl Fn(f64) -> f64,
) -> Result<ProblemSpec> {
    let (length, m) = (params.length, params.interior);
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "L must be positive, got {length}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidProblem("M must be at least 1".into()));
    }
    let op = Parabolic1D::from_fns(length, m, &grid, |_| a, |_| b, |_| c);
    let x = op.interior_points();
    let bump: StateVector = x
        .iter()
        .map(|x| (PI * x / length).sin())
        .collect::<Vec<_>>()
        .into();
    let f: StateVector = x.iter().map(|&x| source(x)).collect::<Vec<_>>().into();
    Ok(ProblemSpec {
        grid,
        u0: bump.clone(),
        source: vec![f; grid.len()],
        pairing: Pairing::new(bump, op.dx()),
        backend: Backend::Parabolic1D(op),
        stepper: params.stepper,
    })
}

pub fn build_preset(name: PresetName, params: &PresetParams) -> Result<Preset> {
    let grid = TimeGrid::new(params.final_time, params.steps)?;
    let spec = match name {
        PresetName::ScalarDecay => scalar(grid, -1.0, 0.0, params.stepper),
        PresetName::ScalarSource => scalar(grid, 0.0, 1.0, params.stepper),
        PresetName::HeatSine => parabolic(grid, params, (1.0, 0.0, 0.0), |_| 0.0)?,
        PresetName::AdvectionReaction => {
            let l = params.length;
            parabolic(grid, params, (1.0, 0.5, -0.2), move |x| {
                x * (l - x) / (l * l)
            })?
        }
    };
    Ok(Preset {
        name,
        spec,
        gamma: name.default_gamma(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_spec;

    #[test]
    fn presets_are_valid() {
        for name in PresetName::ALL {
            let p = build_preset(
                name,
                &PresetParams {
                    steps: 16,
                    interior: 9,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(validate_spec(&p.spec).is_empty(), "{}", name.name());
            assert_eq!(name.name().parse::<PresetName>().unwrap(), name);
        }
        assert!("nope".parse::<PresetName>().is_err());
    }

    #[test]
    fn profile_parsing_and_integral() {
        assert_eq!(
            "const:0.5".parse::<GammaProfile>().unwrap(),
            GammaProfile::Constant(0.5)
        );
        let s: GammaProfile = "sine:1,0.5,1".parse().unwrap();
        assert_eq!(s.eval(0.25), 1.5);
        // int_0^1 (1 + 0.5 sin 2 pi t) dt = 1.
        assert!((s.integral(1.0) - 1.0).abs() < 1e-15);
        assert!("sine:1,2".parse::<GammaProfile>().is_err());
        assert!("exp:1".parse::<GammaProfile>().is_err());
    }
}
