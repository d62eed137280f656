use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tetspec::{Example, Preset, Tetrahedron};

use crate::output::CliError;

#[derive(Debug, Parser, Serialize)]
#[command(name = "tetspec", version, about = "Spectral-Galerkin experiments on a tetrahedron")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Error curves of the benchmark problems against the degree.
    Convergence(ConvergenceArgs),
    /// Time-step study of the heat equation at a fixed degree.
    Temporal(TemporalArgs),
    /// Eigenvalue errors, largest eigenvalue growth and reliable fractions.
    Eigen(EigenArgs),
    /// Condition numbers of the stiffness, mass and combined matrices.
    Condition(CommonArgs),
    /// Matrix Market export of stiffness and mass plus band membership.
    Sparsity(CommonArgs),
    /// Average and normalized gaps of the exact fundamental spectrum.
    Gaps(GapsArgs),
    /// Clenshaw operation counts and agreement with direct summation.
    Clenshaw(CommonArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CommonArgs {
    /// Named tetrahedron: reference, fundamental or regular.
    #[arg(long, default_value = "reference", conflicts_with = "vertices")]
    pub preset: String,
    /// Twelve comma-separated vertex coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub vertices: Option<String>,
    /// Degrees as a list `8,12,16` or a range `start:stop:step`.
    #[arg(long, default_value = "8,12,16,20")]
    pub degrees: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for randomly drawn evaluation points.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Worker threads for degree sweeps; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// example1, example2, example3 or example4.
    #[arg(long, default_value = "example1")]
    pub example: String,
    /// Time step for example4.
    #[arg(long, default_value_t = 1.0 / 1024.0)]
    pub dt: f64,
    /// Final time for example4; errors are reported at half and full time.
    #[arg(long, default_value_t = 1.0)]
    pub tfinal: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TemporalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated time steps.
    #[arg(long, value_delimiter = ',', default_value = "0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125")]
    pub dt: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tfinal: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EigenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Reliability thresholds `C`: an eigenvalue counts as reliable when its
    /// relative error is at most `C / M`.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threshold: Vec<f64>,
    /// Degree used as the reference on tetrahedra without a closed-form spectrum.
    #[arg(long)]
    pub reference_degree: Option<usize>,
    /// Allow degrees above 40 (dense eigensolves of tens of thousands of unknowns).
    #[arg(long)]
    pub large: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct GapsArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Number of exact eigenvalues.
    #[arg(long, default_value_t = 3000)]
    pub count: usize,
}

pub fn parse_degrees(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Argument(format!("cannot parse degrees '{s}'"));
    let out: Vec<usize> = if s.contains(':') {
        let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b] => (a..=b).collect(),
            [a, b, step] if step > 0 => (a..=b).step_by(step).collect(),
            _ => return Err(bad()),
        }
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

impl CommonArgs {
    pub fn degrees(&self) -> Result<Vec<usize>, CliError> {
        parse_degrees(&self.degrees)
    }

    /// The preset when one is in use, `None` for explicit vertices.
    pub fn preset(&self) -> Result<Option<Preset>, CliError> {
        match self.vertices {
            Some(_) => Ok(None),
            None => Ok(Some(self.preset.parse()?)),
        }
    }

    pub fn tetrahedron(&self) -> Result<Tetrahedron, CliError> {
        match &self.vertices {
            Some(text) => {
                let v: Vec<f64> = text
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CliError::Argument(format!("cannot parse vertices '{text}'")))?;
                if v.len() != 12 {
                    return Err(CliError::Argument(format!("expected 12 vertex coordinates, got {}", v.len())));
                }
                let mut p = [[0.0; 3]; 4];
                for (j, row) in p.iter_mut().enumerate() {
                    row.copy_from_slice(&v[3 * j..3 * j + 3]);
                }
                Ok(Tetrahedron::new(p)?)
            }
            None => Ok(self.preset.parse::<Preset>()?.tetrahedron()),
        }
    }
}

impl ConvergenceArgs {
    pub fn example(&self) -> Result<Example, CliError> {
        Ok(self.example.parse()?)
    }
}
