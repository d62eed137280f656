//! Exact Dirichlet spectrum of the fundamental tetrahedron through
//! antisymmetrized exponentials, Weyl asymptotics and gap statistics.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Integer 4-tuple with zero sum, strictly increasing entries, all congruent mod 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HomogeneousIndex(pub [i64; 4]);

impl HomogeneousIndex {
    pub fn new(k: [i64; 4]) -> Result<Self> {
        let ok = k.iter().sum::<i64>() == 0
            && k.windows(2).all(|w| w[0] < w[1])
            && k.iter().all(|v| (v - k[0]).rem_euclid(4) == 0);
        if ok {
            Ok(Self(k))
        } else {
            Err(Error::InvalidArgument(format!("{k:?} is not a lattice index")))
        }
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// `pi^2 |k|^2 / 4`.
    pub fn eigenvalue(&self) -> f64 {
        std::f64::consts::PI.powi(2) * self.norm_sq() as f64 / 4.0
    }
}

/// All lattice indices with `|k|^2 <= bound`, ordered by `(|k|^2, k)`.
pub fn enumerate_lambda0(bound: f64) -> Vec<HomogeneousIndex> {
    let reach = bound.max(0.0).sqrt().floor() as i64;
    let mut out = Vec::new();
    for residue in 0..4 {
        let start = -reach + (residue - (-reach)).rem_euclid(4);
        let values: Vec<i64> = (start..=reach).step_by(4).collect();
        for (a, &k0) in values.iter().enumerate() {
            for (b, &k1) in values.iter().enumerate().skip(a + 1) {
                for &k2 in values.iter().skip(b + 1) {
                    let k3 = -(k0 + k1 + k2);
                    if k3 <= k2 || (k3 - residue).rem_euclid(4) != 0 {
                        continue;
                    }
                    let k = HomogeneousIndex([k0, k1, k2, k3]);
                    if (k.norm_sq() as f64) <= bound {
                        out.push(k);
                    }
                }
            }
        }
    }
    out.sort_by_key(|k| (k.norm_sq(), k.0));
    out
}

/// The `n` smallest indices, with ties at the cutoff broken lexicographically.
pub fn smallest_indices(n: usize) -> Vec<HomogeneousIndex> {
    let mut bound = 100.0;
    loop {
        let all = enumerate_lambda0(bound);
        if all.len() >= n {
            return all.into_iter().take(n).collect();
        }
        bound *= 2.0;
    }
}

/// First `n` exact eigenvalues, one per lattice index.
pub fn exact_tf_spectrum(n: usize) -> Vec<f64> {
    smallest_indices(n).iter().map(HomogeneousIndex::eigenvalue).collect()
}

/// Homogeneous coordinates `(s0, s1, s2, s3)` of a physical point.
pub fn homogeneous_coords(x: Vector3<f64>) -> [f64; 4] {
    let s1 = (x[1] + x[2] - x[0]) / 2.0;
    let s2 = (x[2] + x[0] - x[1]) / 2.0;
    let s3 = (x[0] + x[1] - x[2]) / 2.0;
    [-(s1 + s2 + s3), s1, s2, s3]
}

fn permutations() -> Vec<([usize; 4], f64)> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let distinct = (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j]));
                    if distinct {
                        let inversions = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
                        out.push((p, if inversions % 2 == 0 { 1.0 } else { -1.0 }));
                    }
                }
            }
        }
    }
    out
}

/// Generalized sine `(1/24) sum_sigma sign(sigma) exp(i pi/2 (k sigma) . s)`
/// at a physical point of the fundamental tetrahedron.
pub fn ts_eval(k: &[i64; 4], x: Vector3<f64>) -> Complex64 {
    let s = homogeneous_coords(x);
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, sign) in permutations() {
        let phase: f64 = (0..4).map(|i| k[p[i]] as f64 * s[i]).sum::<f64>() * std::f64::consts::FRAC_PI_2;
        acc += sign * Complex64::from_polar(1.0, phase);
    }
    acc / 24.0
}

/// Two-term Weyl asymptotic for the `k`-th Dirichlet eigenvalue.
pub fn weyl_prediction(k: usize, volume: f64, surface_area: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let k = k as f64;
    pi * (36.0 * pi).cbrt() * volume.powf(-2.0 / 3.0) * k.powf(2.0 / 3.0)
        + pi / 2.0 * (3.0 * pi * pi / 4.0).cbrt() * surface_area / volume.powf(4.0 / 3.0) * k.cbrt()
}

/// Gap statistics of an ascending spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumStats {
    /// `(mu_{k+1} - mu_1) / k` for `k = 1..n-1`.
    pub average_gaps: Vec<f64>,
    /// Unfolded values `(mu_k |T|^{2/3} / (pi (36 pi)^{1/3}))^{3/2}`.
    pub unfolded: Vec<f64>,
    /// `y_{k+1} - y_k`.
    pub normalized_gaps: Vec<f64>,
    /// Histogram of normalized gaps: bin width and densities.
    pub histogram_width: f64,
    pub histogram: Vec<f64>,
}

pub fn gap_stats(eigenvalues: &[f64], volume: f64) -> SpectrumStats {
    let pi = std::f64::consts::PI;
    let n = eigenvalues.len();
    let average_gaps = (1..n).map(|k| (eigenvalues[k] - eigenvalues[0]) / k as f64).collect();
    let c = volume.powf(2.0 / 3.0) / (pi * (36.0 * pi).cbrt());
    let unfolded: Vec<f64> = eigenvalues.iter().map(|mu| (mu * c).powf(1.5)).collect();
    let normalized_gaps: Vec<f64> = unfolded.windows(2).map(|w| w[1] - w[0]).collect();
    let width = 0.1;
    let bins = 40;
    let mut histogram = vec![0.0; bins];
    for &g in &normalized_gaps {
        let b = ((g / width) as usize).min(bins - 1);
        histogram[b] += 1.0;
    }
    let total = normalized_gaps.len().max(1) as f64;
    histogram.iter_mut().for_each(|h| *h /= total * width);
    SpectrumStats { average_gaps, unfolded, normalized_gaps, histogram_width: width, histogram }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Preset;

    #[test]
    fn lattice_minimum() {
        let all = enumerate_lambda0(80.0);
        assert_eq!(all, vec![HomogeneousIndex([-6, -2, 2, 6])]);
        assert!(enumerate_lambda0(79.0).is_empty());
        let k = HomogeneousIndex::new([-7, -3, 1, 9]).unwrap();
        assert!((k.eigenvalue() - 35.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!(HomogeneousIndex::new([-6, -2, 2, 7]).is_err());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        let bound = 400.0;
        let mut brute = Vec::new();
        for a in -20..=20i64 {
            for b in a + 1..=20 {
                for c in b + 1..=20 {
                    let d = -(a + b + c);
                    if let Ok(k) = HomogeneousIndex::new([a, b, c, d]) {
                        if (k.norm_sq() as f64) <= bound {
                            brute.push(k);
                        }
                    }
                }
            }
        }
        brute.sort_by_key(|k| (k.norm_sq(), k.0));
        assert_eq!(enumerate_lambda0(bound), brute);
    }

    #[test]
    fn spectrum_head() {
        let s = exact_tf_spectrum(50);
        assert!((s[0] - 20.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn generalized_sines_are_dirichlet_eigenfunctions() {
        let t = Preset::Fundamental.tetrahedron();
        let ks = [[-6, -2, 2, 6], [-7, -3, 1, 9], [-10, -6, 2, 14]];
        for k in ks {
            for j in 0..4 {
                assert!(ts_eval(&k, t.vertex(j)).norm() < 1e-12);
            }
            let mu = HomogeneousIndex(k).eigenvalue();
            let h = 1e-4;
            for p in [[0.2, 0.3, 0.4], [0.1, 0.1, 0.7], [0.3, 0.2, 0.3]] {
                let x = t.affine_map(crate::koornwinder::RefPoint::new(p[0], p[1], p[2]));
                let mut lap = Complex64::new(0.0, 0.0);
                for i in 0..3 {
                    let mut e = Vector3::zeros();
                    e[i] = h;
                    lap += (ts_eval(&k, x + e) - 2.0 * ts_eval(&k, x) + ts_eval(&k, x - e)) / (h * h);
                }
                let v = ts_eval(&k, x);
                assert!((-lap - mu * v).norm() < 1e-5 * mu * v.norm().max(1e-3), "{k:?}");
            }
            // face points: the face through vertices 1, 2, 3
            let y = (t.vertex(1) + t.vertex(2) * 2.0 + t.vertex(3)) / 4.0;
            assert!(ts_eval(&k, y).norm() < 1e-12);
        }
        let swapped = ts_eval(&[-2, -6, 2, 6], Vector3::new(0.1, 0.2, 0.5));
        assert!((swapped + ts_eval(&[-6, -2, 2, 6], Vector3::new(0.1, 0.2, 0.5))).norm() < 1e-14);
    }

    #[test]
    fn weyl_properties() {
        let t = Preset::Fundamental.tetrahedron();
        let w = |k| weyl_prediction(k, t.volume(), t.surface_area());
        assert!(w(10) < w(11));
        let lead = |k: usize, v: f64| weyl_prediction(k, v, 0.0);
        assert!((lead(7, 2.0) / lead(7, 1.0) - 2f64.powf(-2.0 / 3.0)).abs() < 1e-14);
        let exact = exact_tf_spectrum(1000)[999];
        assert!((w(1000) - exact).abs() < 0.1 * exact);
    }

    #[test]
    fn gap_statistics() {
        let s = exact_tf_spectrum(3000);
        let st = gap_stats(&s, 1.0 / 12.0);
        assert_eq!(st.average_gaps[4], (s[5] - s[0]) / 5.0);
        let ks: Vec<f64> = (1..3000).map(|k| k as f64).collect();
        let slope = loglog_slope(&ks[99..], &st.average_gaps[99..]);
        assert!((slope + 1.0 / 3.0).abs() < 0.05, "{slope}");
        let below = st.normalized_gaps.iter().filter(|&&g| g < 0.25).count() as f64 / st.normalized_gaps.len() as f64;
        assert!(below > 0.5, "{below}");
    }
}
