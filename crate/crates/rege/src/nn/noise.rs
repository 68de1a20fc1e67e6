//! Radius noise and dropout masks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{RegeError, Result};
use crate::radii::RadiusVector;
use crate::seeds::{self, stream};

/// Adds zero-mean Gaussian noise to each row with variance equal to that
/// node's radius (standard deviation `sqrt(r_i)`). Deterministic for a fixed
/// seed; a zero radius leaves the row bit-identical.
pub fn inject_radius_noise(
    h: &DMatrix<f64>,
    radii: &RadiusVector,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if radii.len() != h.nrows() {
        return Err(RegeError::dimension(
            "inject_radius_noise",
            format!("{} radii", h.nrows()),
            format!("{} radii", radii.len()),
        ));
    }
    let mut rng = seeds::rng(seed, stream::NOISE);
    let mut out = h.clone();
    for i in 0..h.nrows() {
        let r = radii.get(i);
        if r < 0.0 {
            return Err(RegeError::parameter("radii", format!("negative radius {r}")));
        }
        let std = r.sqrt();
        for j in 0..h.ncols() {
            let z: f64 = rng.sample(StandardNormal);
            if std > 0.0 {
                out[(i, j)] += std * z;
            }
        }
    }
    Ok(out)
}

/// Inverted-dropout mask: entries are `1 / keep` with probability `keep`
/// (keep = 1 - p) and 0 otherwise. Multiplying by the mask both drops and
/// rescales, so eval needs no correction.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, seed: u64) -> DMatrix<f64> {
    let keep = 1.0 - p;
    let mut rng = seeds::rng(seed, stream::DROPOUT);
    let mut mask = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let u: f64 = rng.gen();
            if u < keep {
                mask[(i, j)] = 1.0 / keep;
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radii::RadiusKind;

    #[test]
    fn zero_radius_rows_unchanged() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let radii = RadiusVector::new(vec![0.0, 1.0], RadiusKind::Ddr).unwrap();
        let out = inject_radius_noise(&h, &radii, 11).unwrap();
        for j in 0..3 {
            assert_eq!(out[(0, j)], h[(0, j)]);
            assert_ne!(out[(1, j)], h[(1, j)]);
        }
    }

    #[test]
    fn noise_is_deterministic() {
        let h = DMatrix::zeros(3, 4);
        let radii = RadiusVector::new(vec![0.3, 0.7, 1.0], RadiusKind::Ddr).unwrap();
        let a = inject_radius_noise(&h, &radii, 5).unwrap();
        let b = inject_radius_noise(&h, &radii, 5).unwrap();
        assert_eq!(a, b);
        let c = inject_radius_noise(&h, &radii, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unit_radius_sample_variance() {
        // 10^6 draws from N(0, 1): sample variance within [0.99, 1.01].
        let h = DMatrix::zeros(1000, 1000);
        let radii = RadiusVector::new(vec![1.0; 1000], RadiusKind::Ddr).unwrap();
        let out = inject_radius_noise(&h, &radii, 42).unwrap();
        let mean = out.sum() / 1e6;
        let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 1e6;
        assert!(
            (0.99..=1.01).contains(&var),
            "sample variance {var} outside [0.99, 1.01]"
        );
    }

    #[test]
    fn radius_length_mismatch_rejected() {
        let h = DMatrix::zeros(2, 2);
        let radii = RadiusVector::new(vec![0.5], RadiusKind::Ddr).unwrap();
        assert!(inject_radius_noise(&h, &radii, 0).is_err());
    }

    #[test]
    fn dropout_mask_scales_kept_entries() {
        let mask = dropout_mask(50, 50, 0.5, 9);
        let mut kept = 0usize;
        for v in mask.iter() {
            assert!(*v == 0.0 || *v == 2.0);
            if *v > 0.0 {
                kept += 1;
            }
        }
        // roughly half kept
        assert!((kept as f64 - 1250.0).abs() < 150.0);
    }
}
