//! Affine map from the reference tetrahedron and the metric quantities
//! entering the stiffness matrix.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koornwinder::RefPoint;

/// Tetrahedron given by its vertices `P_0..P_3`; the reference tetrahedron
/// has `P_0` at the origin and `P_j` on the `j`-th axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Tetrahedron {
    vertices: [[f64; 3]; 4],
    jacobian: Matrix3<f64>,
    inverse: Matrix3<f64>,
    volume: f64,
}

/// Named vertex sets used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Reference,
    Fundamental,
    Regular,
}

impl Preset {
    pub fn vertices(self) -> [[f64; 3]; 4] {
        match self {
            Preset::Reference => [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Preset::Fundamental => [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5], [-0.5, 0.5, 0.5]],
            Preset::Regular => {
                let (s3, s6) = (3.0_f64.sqrt(), 6.0_f64.sqrt());
                [[0.0, 0.0, s6 / 3.0], [s3 / 3.0, 0.0, 0.0], [-s3 / 6.0, 0.5, 0.0], [-s3 / 6.0, -0.5, 0.0]]
            }
        }
    }

    pub fn tetrahedron(self) -> Tetrahedron {
        Tetrahedron::new(self.vertices()).expect("presets are non-degenerate")
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Preset::Reference),
            "fundamental" => Ok(Preset::Fundamental),
            "regular" => Ok(Preset::Regular),
            _ => Err(Error::InvalidArgument(format!("unknown preset '{s}'"))),
        }
    }
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

impl Tetrahedron {
    /// Rejects volumes below `1e-12` times the cube of the longest edge.
    pub fn new(vertices: [[f64; 3]; 4]) -> Result<Self> {
        let p: Vec<Vector3<f64>> = vertices.iter().copied().map(vec3).collect();
        let jacobian = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
        let volume = jacobian.determinant().abs() / 6.0;
        let longest = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .map(|(i, j)| (p[i] - p[j]).norm())
            .fold(0.0, f64::max);
        if !(volume >= 1e-12 * longest.powi(3)) || longest == 0.0 {
            return Err(Error::DegenerateTetrahedron { volume });
        }
        let inverse = jacobian.try_inverse().ok_or(Error::DegenerateTetrahedron { volume })?;
        Ok(Self { vertices, jacobian, inverse, volume })
    }

    pub fn vertices(&self) -> [[f64; 3]; 4] {
        self.vertices
    }

    pub fn vertex(&self, j: usize) -> Vector3<f64> {
        vec3(self.vertices[j])
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn affine_map(&self, p: RefPoint) -> Vector3<f64> {
        self.vertex(0) + self.jacobian * Vector3::new(p.x1, p.x2, p.x3)
    }

    pub fn inverse_map(&self, x: Vector3<f64>) -> RefPoint {
        let r = self.inverse * (x - self.vertex(0));
        RefPoint::new(r[0], r[1], r[2])
    }

    /// `grad x^_j` for `j = 1..=3`, the rows of the inverse Jacobian.
    pub fn reference_gradient(&self, j: usize) -> Vector3<f64> {
        self.inverse.row(j - 1).transpose()
    }

    /// `G_jk = grad x^_j . grad x^_k` for `j, k = 1..=3`.
    pub fn metric(&self) -> Matrix3<f64> {
        self.inverse * self.inverse.transpose()
    }

    /// Vertices of the face opposite `P_j`, ordered by vertex number.
    pub fn face_vertices(&self, j: usize) -> [Vector3<f64>; 3] {
        let mut it = (0..4).filter(|&k| k != j).map(|k| self.vertex(k));
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    }

    pub fn face_area(&self, j: usize) -> f64 {
        let [a, b, c] = self.face_vertices(j);
        (b - a).cross(&(c - a)).norm() / 2.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..4).map(|j| self.face_area(j)).sum()
    }

    /// Outward unit normal of the face opposite `P_j`.
    pub fn outward_normal(&self, j: usize) -> Vector3<f64> {
        let [a, b, c] = self.face_vertices(j);
        let n = (b - a).cross(&(c - a)).normalize();
        if n.dot(&(self.vertex(j) - a)) > 0.0 {
            -n
        } else {
            n
        }
    }

    /// Cosine of the dihedral angle between faces `j` and `k`.
    pub fn dihedral_cos(&self, j: usize, k: usize) -> f64 {
        -self.outward_normal(j).dot(&self.outward_normal(k))
    }
}
