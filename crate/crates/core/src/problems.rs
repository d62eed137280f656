//! Manufactured benchmark problems with closed-form solutions and sources.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `prod_{k=0..3} sin(w a_k)` with `a_j = x_j` and `a_0 = 1 - x1 - x2 - x3`,
/// returned with its Laplacian.
fn sine_bubble(x: Vector3<f64>, w: f64) -> (f64, f64) {
    let a = [1.0 - x.sum(), x[0], x[1], x[2]];
    let s = a.map(|v| (w * v).sin());
    let c = a.map(|v| (w * v).cos());
    let u = s.iter().product::<f64>();
    // d_jj u = -2 w^2 (s_j s_0 + c_j c_0) prod_{k != 0, j} s_k
    let mut cross = 0.0;
    for j in 1..4 {
        let others: f64 = (1..4).filter(|&k| k != j).map(|k| s[k]).product();
        cross += c[j] * others;
    }
    (u, -2.0 * w * w * (3.0 * u + c[0] * cross))
}

/// The benchmark problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    /// `-lap u + u = f`, sine bubble with half-period scaling.
    Example1,
    /// `-lap u = f` with non-homogeneous Dirichlet data.
    Example2,
    /// `-lap u + gamma u = f` with `gamma = exp(x1 + x2 + x3 + 1)`.
    Example3,
    /// Heat equation with a decaying sine bubble.
    Example4,
}

impl std::str::FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Example::Example1),
            "example2" => Ok(Example::Example2),
            "example3" => Ok(Example::Example3),
            "example4" => Ok(Example::Example4),
            _ => Err(Error::InvalidArgument(format!("unknown example '{s}'"))),
        }
    }
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::Example1 => "example1",
            Example::Example2 => "example2",
            Example::Example3 => "example3",
            Example::Example4 => "example4",
        }
    }

    /// Whether the solution vanishes on the boundary of the reference tetrahedron.
    pub fn homogeneous_on_reference(self) -> bool {
        !matches!(self, Example::Example2)
    }

    pub fn is_time_dependent(self) -> bool {
        matches!(self, Example::Example4)
    }

    /// Reaction coefficient, `None` when it is not constant.
    pub fn constant_gamma(self) -> Option<f64> {
        match self {
            Example::Example1 => Some(1.0),
            Example::Example2 | Example::Example4 => Some(0.0),
            Example::Example3 => None,
        }
    }

    pub fn gamma(self, x: Vector3<f64>) -> f64 {
        self.constant_gamma().unwrap_or_else(|| (x.sum() + 1.0).exp())
    }

    /// Exact solution at time `t` (ignored by the steady problems).
    pub fn solution(self, x: Vector3<f64>, t: f64) -> f64 {
        match self {
            Example::Example1 | Example::Example3 => sine_bubble(x, std::f64::consts::FRAC_PI_2).0,
            Example::Example2 => (x[0] + 1.0) * (x[1] + 1.0) * (x[2] + 1.0) * (1.0 - x.sum()).exp(),
            Example::Example4 => sine_bubble(x, std::f64::consts::PI).0 * (-t).exp(),
        }
    }

    /// Source term matching `solution`.
    pub fn source(self, x: Vector3<f64>, t: f64) -> f64 {
        match self {
            Example::Example1 | Example::Example3 => {
                let (u, lap) = sine_bubble(x, std::f64::consts::FRAC_PI_2);
                -lap + self.gamma(x) * u
            }
            Example::Example2 => {
                let e = (1.0 - x.sum()).exp();
                let lap: f64 = (0..3)
                    .map(|j| (x[j] - 1.0) * (0..3).filter(|&k| k != j).map(|k| x[k] + 1.0).product::<f64>())
                    .sum();
                -e * lap
            }
            Example::Example4 => {
                let (u, lap) = sine_bubble(x, std::f64::consts::PI);
                (-t).exp() * (-u - lap)
            }
        }
    }
}
