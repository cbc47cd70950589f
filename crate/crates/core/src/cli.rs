//! Command dispatch for the `reachkit` binary.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::boundary::{boundary_polygon_2d, weyl_grid, Coords, ReachSet};
use crate::companion::Kernel;
use crate::config::{Config, OutputFormat};
use crate::envelope::{build_envelope, InputEnvelope};
use crate::error::{ReachError, Result};
use crate::lti_model::{canonical_transform, CanonicalForm, LtiProblem};
use crate::report::{
    boundary_csv_header, boundary_csv_rows, boundary_points, svg_polygon, svg_polygons, to_json, CanonicalReport,
    ReachSetReport,
};
use crate::sim::monte_carlo_containment;
use crate::volume::{volume_of, VolumeResult};

/// Exit status when Monte Carlo endpoints fall outside the computed set.
pub const EXIT_VIOLATIONS: i32 = 3;
pub const DEFAULT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Canonical,
    Envelope,
    Boundary,
    Volume,
    Validate,
    Demo,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Canonical => "canonical",
            Self::Envelope => "envelope",
            Self::Boundary => "boundary",
            Self::Volume => "volume",
            Self::Validate => "validate",
            Self::Demo => "demo",
        })
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    /// Sets both `sigma_grid` and `lambda_grid`.
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

impl Overrides {
    pub fn apply(&self, config: &Config) -> Config {
        let mut c = config.clone();
        if let Some(dt) = self.dt {
            c.numerics.dt = dt;
        }
        if let Some(g) = self.grid {
            c.numerics.sigma_grid = g;
            c.numerics.lambda_grid = g;
        }
        if let Some(seed) = self.seed {
            c.numerics.seed = seed;
        }
        if let Some(f) = self.format {
            c.outputs.format = f;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// The first artifact is the one printed to stdout when no output directory is given.
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn ok(artifacts: Vec<Artifact>) -> Self {
        Self { exit_code: 0, artifacts }
    }

    pub fn primary(&self) -> Option<&Artifact> {
        self.artifacts.first()
    }
}

fn artifact(name: impl Into<String>, contents: String) -> Artifact {
    Artifact { name: name.into(), contents }
}

/// Canonical form, kernel and envelope for one problem, built once.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub problem: LtiProblem,
    pub canonical: CanonicalForm,
    pub kernel: Kernel,
    pub envelope: InputEnvelope,
}

impl Pipeline {
    pub fn new(problem: LtiProblem) -> Result<Self> {
        problem.validate()?;
        let canonical = canonical_transform(&problem)?;
        let kernel = Kernel::new(&canonical, problem.settings.imag_tol);
        let envelope = build_envelope(&problem, &canonical, &kernel)?;
        Ok(Self { problem, canonical, kernel, envelope })
    }

    /// Reach set at `t ≤ t_final` from the configured initial state.
    pub fn reach(&self, t: f64) -> Result<ReachSet<'_>> {
        ReachSet::new(&self.envelope, self.canonical.to_canonical(&self.problem.z0), t)
    }

    pub fn volume(&self, t: f64) -> Result<VolumeResult> {
        let s = &self.problem.settings;
        volume_of(&self.reach(t)?, self.canonical.det_m, s.sigma_grid, s.lambda_grid, s.dt)
    }
}

#[derive(Serialize)]
struct EnvelopeJson<'a> {
    s: &'a [f64],
    u_min: &'a [f64],
    u_max: &'a [f64],
    mu: &'a [f64],
    nu: &'a [f64],
    zeros: &'a [f64],
}

#[derive(Serialize)]
struct DemoVolumes {
    times: Vec<f64>,
    volumes: Vec<VolumeResult>,
}

fn demo_times(t_final: f64) -> Vec<f64> {
    (2..=6).map(|k| t_final * k as f64 / 6.0).collect()
}

/// Run `command` against `config` and return its artifacts and exit status.
pub fn run_command(command: Command, config: &Config, overrides: &Overrides) -> Result<Outcome> {
    let config = overrides.apply(config);
    let format = config.outputs.format;
    let pipeline = Pipeline::new(config.problem()?)?;
    let n = pipeline.problem.dim();
    let t_final = pipeline.problem.t_final;
    let settings = &pipeline.problem.settings;
    let canonical_report = CanonicalReport::from(&pipeline.canonical);
    match command {
        Command::Canonical => Ok(Outcome::ok(vec![artifact("canonical.json", to_json(&canonical_report))])),
        Command::Envelope => match format {
            OutputFormat::Csv => Ok(Outcome::ok(vec![artifact("envelope.csv", pipeline.envelope.to_csv())])),
            OutputFormat::Json => {
                let e = &pipeline.envelope;
                let body = EnvelopeJson {
                    s: &e.s_grid,
                    u_min: &e.u_min,
                    u_max: &e.u_max,
                    mu: &e.mu,
                    nu: &e.nu,
                    zeros: &e.zeros,
                };
                Ok(Outcome::ok(vec![artifact("envelope.json", to_json(&body))]))
            }
            OutputFormat::Svg => Err(ReachError::Validation("the envelope command emits csv or json".into())),
        },
        Command::Boundary => {
            let reach = pipeline.reach(t_final)?;
            let grid = weyl_grid(t_final, n, settings.sigma_grid)?;
            let samples = reach.sweep(&grid, Some(&pipeline.canonical))?;
            let points = boundary_points(t_final, &samples);
            let mut artifacts = Vec::new();
            let tabular = match format {
                OutputFormat::Json => {
                    let report = ReachSetReport {
                        n,
                        t: t_final,
                        settings: settings.clone(),
                        canonical: canonical_report,
                        boundary: points,
                        volume: None,
                        containment: None,
                    };
                    artifact("boundary.json", report.to_json())
                }
                _ => {
                    let mut csv = boundary_csv_header(n);
                    boundary_csv_rows(&points, &mut csv);
                    artifact("boundary.csv", csv)
                }
            };
            let svg = if n == 2 {
                let poly = boundary_polygon_2d(&reach, settings.sigma_grid, Coords::Original, Some(&pipeline.canonical))?;
                Some(artifact("boundary.svg", svg_polygon(&poly)))
            } else if format == OutputFormat::Svg {
                return Err(ReachError::WrongDimension { expected: 2, got: n });
            } else {
                None
            };
            match (format, svg) {
                (OutputFormat::Svg, Some(svg)) => artifacts.extend([svg, tabular]),
                (_, svg) => artifacts.extend(std::iter::once(tabular).chain(svg)),
            }
            Ok(Outcome::ok(artifacts))
        }
        Command::Volume => {
            let v = pipeline.volume(t_final)?;
            Ok(Outcome::ok(vec![artifact("volume.json", to_json(&v))]))
        }
        Command::Validate => {
            let samples = overrides.samples.unwrap_or(DEFAULT_SAMPLES);
            let reach = pipeline.reach(t_final)?;
            let report = monte_carlo_containment(&pipeline.problem, &pipeline.canonical, &reach, samples, settings.seed)?;
            let exit_code = if report.passed() { 0 } else { EXIT_VIOLATIONS };
            Ok(Outcome { exit_code, artifacts: vec![artifact("validate.json", to_json(&report))] })
        }
        Command::Demo => {
            let times = demo_times(t_final);
            let mut csv = boundary_csv_header(n);
            let mut polygons = Vec::new();
            let mut volumes = Vec::new();
            for &t in &times {
                let reach = pipeline.reach(t)?;
                let grid = weyl_grid(t, n, settings.sigma_grid)?;
                let samples = reach.sweep(&grid, Some(&pipeline.canonical))?;
                boundary_csv_rows(&boundary_points(t, &samples), &mut csv);
                if n == 2 {
                    polygons.push(boundary_polygon_2d(&reach, settings.sigma_grid, Coords::Original, Some(&pipeline.canonical))?);
                }
                volumes.push(pipeline.volume(t)?);
            }
            let mut artifacts = vec![
                artifact("demo_boundary.csv", csv),
                artifact("demo_volume.json", to_json(&DemoVolumes { times, volumes })),
            ];
            if n == 2 {
                let refs: Vec<&[[f64; 2]]> = polygons.iter().map(|p| p.as_slice()).collect();
                artifacts.push(artifact("demo_boundary.svg", svg_polygons(&refs)));
            }
            Ok(Outcome::ok(artifacts))
        }
    }
}

/// Write every artifact into `dir` (created if missing) and return the paths.
pub fn write_artifacts(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    outcome
        .artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const EXAMPLE: &str = include_str!("../fixtures/planar_oscillator.json");

    #[test]
    fn demo_times_hit_the_figure_instants() {
        assert_eq!(demo_times(3.0), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn overrides_take_precedence() {
        let c = parse_config(EXAMPLE).unwrap();
        let o = Overrides { dt: Some(0.02), grid: Some(50), seed: Some(3), format: Some(OutputFormat::Json), samples: None };
        let c2 = o.apply(&c);
        assert_eq!((c2.numerics.dt, c2.numerics.sigma_grid, c2.numerics.lambda_grid), (0.02, 50, 50));
        assert_eq!((c2.numerics.seed, c2.outputs.format), (3, OutputFormat::Json));
    }

    #[test]
    fn canonical_command_json() {
        let c = parse_config(EXAMPLE).unwrap();
        let out = run_command(Command::Canonical, &c, &Overrides::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.primary().unwrap().contents).unwrap();
        assert!((v["M"][0][0].as_f64().unwrap() - 20.0 / 11.0).abs() < 1e-9);
        assert!((v["det_M"].as_f64().unwrap().abs() - 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn svg_boundary_requires_plane() {
        let doc = include_str!("../fixtures/damped_three_state.json");
        let c = parse_config(doc).unwrap();
        let o = Overrides { format: Some(OutputFormat::Svg), grid: Some(10), ..Default::default() };
        assert!(matches!(run_command(Command::Boundary, &c, &o), Err(ReachError::WrongDimension { .. })));
    }
}
