use super::MagnitudeSpectrogram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Denominator guard for ratio masks.
pub const RATIO_EPSILON: f64 = 1e-12;

fn same_shape(a: &MagnitudeSpectrogram, b: &MagnitudeSpectrogram) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "spectrogram shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Generalized Wiener mask of source `j` from α-power magnitudes.
///
/// Where the summed power falls below [`RATIO_EPSILON`] every source gets
/// the uniform share `1/J`.
pub fn wiener_mask(sources: &[MagnitudeSpectrogram], j: usize, alpha: f64) -> Result<MagnitudeSpectrogram> {
    let first = sources
        .first()
        .ok_or_else(|| Error::Parameter("wiener_mask needs at least one source".into()))?;
    if j >= sources.len() {
        return Err(Error::Parameter(format!(
            "source index {j} out of range for {} sources",
            sources.len()
        )));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    for s in &sources[1..] {
        same_shape(first, s)?;
    }
    let uniform = 1.0 / sources.len() as f64;
    let (rows, cols) = first.shape();
    let mut mask = Matrix::zeros(rows, cols);
    for (i, out) in mask.as_mut_slice().iter_mut().enumerate() {
        let denom: f64 = sources
            .iter()
            .map(|s| s.as_matrix().as_slice()[i].powf(alpha))
            .sum();
        *out = if denom < RATIO_EPSILON {
            uniform
        } else {
            sources[j].as_matrix().as_slice()[i].powf(alpha) / denom
        };
    }
    MagnitudeSpectrogram::new(mask)
}

/// Training target: the ideal ratio mask of the voice applied to the mixture,
/// scaled by two.
pub fn irm_target(
    voice: &MagnitudeSpectrogram,
    accomp: &MagnitudeSpectrogram,
    mix: &MagnitudeSpectrogram,
) -> Result<MagnitudeSpectrogram> {
    same_shape(voice, accomp)?;
    same_shape(voice, mix)?;
    let (rows, cols) = voice.shape();
    let v = voice.as_matrix().as_slice();
    let a = accomp.as_matrix().as_slice();
    let m = mix.as_matrix().as_slice();
    let data = (0..v.len())
        .map(|i| 2.0 * (v[i] / (v[i] + a[i] + RATIO_EPSILON)) * m[i])
        .collect();
    MagnitudeSpectrogram::new(Matrix::from_vec(rows, cols, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mag(rows: usize, cols: usize, data: Vec<f64>) -> MagnitudeSpectrogram {
        MagnitudeSpectrogram::new(Matrix::from_vec(rows, cols, data).unwrap()).unwrap()
    }

    fn constant(v: f64) -> MagnitudeSpectrogram {
        mag(1, 1, vec![v])
    }

    #[test]
    fn identical_sources_split_evenly() {
        let s = mag(2, 2, vec![0.3, 1.0, 2.0, 5.0]);
        for alpha in [0.5, 1.0, 2.0] {
            let m = wiener_mask(&[s.clone(), s.clone()], 0, alpha).unwrap();
            assert!(m.as_matrix().as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn two_to_one_power_mask() {
        // 2^2 / (2^2 + 1^2)
        let m = wiener_mask(&[constant(2.0), constant(1.0)], 0, 2.0).unwrap();
        assert!((m.as_matrix()[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn silent_source_limits() {
        let a = mag(1, 2, vec![0.0, 0.0]);
        let b = mag(1, 2, vec![1.0, 0.0]);
        let ma = wiener_mask(&[a.clone(), b.clone()], 0, 1.0).unwrap();
        let mb = wiener_mask(&[a, b], 1, 1.0).unwrap();
        assert_eq!(ma.as_matrix().as_slice(), &[0.0, 0.5]);
        assert_eq!(mb.as_matrix().as_slice(), &[1.0, 0.5]);
    }

    #[test]
    fn wiener_shape_mismatch() {
        let r = wiener_mask(&[mag(1, 2, vec![1.0, 1.0]), constant(1.0)], 0, 1.0);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn irm_cases() {
        let t = irm_target(&constant(3.0), &constant(0.0), &constant(4.0)).unwrap();
        assert!((t.as_matrix()[(0, 0)] - 8.0).abs() < 1e-9);
        let t = irm_target(&constant(1.0), &constant(1.0), &constant(1.0)).unwrap();
        assert!((t.as_matrix()[(0, 0)] - 1.0).abs() < 1e-12);
        let t = irm_target(&constant(3.0), &constant(1.0), &constant(4.0)).unwrap();
        assert!((t.as_matrix()[(0, 0)] - 6.0).abs() < 1e-9);
        assert!(irm_target(&constant(1.0), &mag(1, 2, vec![1.0, 1.0]), &constant(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn wiener_masks_partition_unity(
            vals in prop::collection::vec(0.0f64..10.0, 12),
            alpha in 0.25f64..3.0,
        ) {
            let sources: Vec<_> = vals.chunks(4).map(|c| mag(2, 2, c.to_vec())).collect();
            let masks: Vec<_> = (0..3).map(|j| wiener_mask(&sources, j, alpha).unwrap()).collect();
            for i in 0..4 {
                let total: f64 = masks.iter().map(|m| m.as_matrix().as_slice()[i]).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for m in &masks {
                    let v = m.as_matrix().as_slice()[i];
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
