use super::MagnitudeSpectrogram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Overlapping fixed-length subsequences of a magnitude spectrogram.
///
/// Subsequence `b` covers padded frames `b*(T-2L) .. b*(T-2L)+T`, where the
/// padded spectrogram has `L` leading zero frames. Dropping `L` frames from
/// each end of every subsequence leaves blocks that tile the original frames
/// in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    /// `T × N` full-band views, used by the skip-filtering connections.
    pub full_input: Vec<Matrix>,
    /// `T × F` band-limited views fed to the encoder.
    pub trunc_input: Vec<Matrix>,
    pub frame_count: usize,
    pub seq_len: usize,
    pub context: usize,
}

impl SequenceBatch {
    pub fn len(&self) -> usize {
        self.full_input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full_input.is_empty()
    }

    /// Frames kept per subsequence after context removal.
    pub fn stride(&self) -> usize {
        self.seq_len - 2 * self.context
    }
}

fn check_context(seq_len: usize, context: usize) -> Result<()> {
    if seq_len <= 2 * context {
        return Err(Error::Parameter(format!(
            "sequence length {seq_len} must exceed twice the context {context}"
        )));
    }
    Ok(())
}

pub fn segment(mag: &MagnitudeSpectrogram, seq_len: usize, context: usize, bands: usize) -> Result<SequenceBatch> {
    check_context(seq_len, context)?;
    if bands > mag.bins() {
        return Err(Error::Dimension(format!(
            "cannot keep {bands} bands of a {}-bin spectrogram",
            mag.bins()
        )));
    }
    let frames = mag.frames();
    let bins = mag.bins();
    let stride = seq_len - 2 * context;
    let count = frames.div_ceil(stride);
    let src = mag.as_matrix();

    let mut full_input = Vec::with_capacity(count);
    let mut trunc_input = Vec::with_capacity(count);
    for b in 0..count {
        let mut full = Matrix::zeros(seq_len, bins);
        for t in 0..seq_len {
            // padded frame b*stride + t is original frame b*stride + t - L
            let padded = b * stride + t;
            if padded >= context && padded - context < frames {
                full.row_mut(t).copy_from_slice(src.row(padded - context));
            }
        }
        trunc_input.push(full.leading_cols(bands));
        full_input.push(full);
    }
    Ok(SequenceBatch {
        full_input,
        trunc_input,
        frame_count: frames,
        seq_len,
        context,
    })
}

/// Drops `context` rows from both ends of `x`.
pub fn slice_context(x: &Matrix, context: usize) -> Result<Matrix> {
    check_context(x.rows(), context)?;
    Ok(x.slice_rows(context, x.rows() - context))
}

/// Concatenates de-contexted blocks in order and trims to `frames` rows.
pub fn overlap_concat(estimates: &[Matrix], frames: usize) -> Result<MagnitudeSpectrogram> {
    let refs: Vec<&Matrix> = estimates.iter().collect();
    let stacked = Matrix::vstack(&refs)?;
    if stacked.rows() < frames {
        return Err(Error::Dimension(format!(
            "{} estimated frames cannot cover {frames} frames",
            stacked.rows()
        )));
    }
    MagnitudeSpectrogram::new(stacked.slice_rows(0, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(frames: usize, bins: usize) -> MagnitudeSpectrogram {
        MagnitudeSpectrogram::new(Matrix::from_fn(frames, bins, |r, c| (r * bins + c) as f64 + 1.0))
            .unwrap()
    }

    fn round_trip(mag: &MagnitudeSpectrogram, t: usize, l: usize) -> MagnitudeSpectrogram {
        let batch = segment(mag, t, l, mag.bins()).unwrap();
        let blocks: Vec<Matrix> = batch
            .full_input
            .iter()
            .map(|b| slice_context(b, l).unwrap())
            .collect();
        overlap_concat(&blocks, batch.frame_count).unwrap()
    }

    #[test]
    fn counts_match_hand_tiling() {
        assert_eq!(segment(&ramp(40, 3), 60, 10, 2).unwrap().len(), 1);
        // ceil(81 / 40)
        assert_eq!(segment(&ramp(81, 3), 60, 10, 2).unwrap().len(), 3);
    }

    #[test]
    fn consecutive_subsequences_overlap_by_two_contexts() {
        let batch = segment(&ramp(81, 3), 60, 10, 2).unwrap();
        for b in 1..batch.len() {
            let prev = &batch.full_input[b - 1];
            let cur = &batch.full_input[b];
            for k in 0..20 {
                assert_eq!(prev.row(40 + k), cur.row(k));
            }
        }
        assert!(batch.trunc_input.iter().all(|m| m.shape() == (60, 2)));
        assert!(batch.full_input.iter().all(|m| m.shape() == (60, 3)));
    }

    #[test]
    fn zero_context_gives_disjoint_blocks() {
        let mag = ramp(7, 2);
        let batch = segment(&mag, 3, 0, 2).unwrap();
        assert_eq!(batch.len(), 3);
        assert_eq!(batch.full_input[1].row(0), mag.as_matrix().row(3));
        assert_eq!(batch.full_input[2].row(1), &[0.0, 0.0]);
    }

    #[test]
    fn leading_context_is_zero_padding() {
        let batch = segment(&ramp(5, 2), 6, 2, 2).unwrap();
        assert_eq!(batch.full_input[0].row(0), &[0.0, 0.0]);
        assert_eq!(batch.full_input[0].row(2), &[1.0, 2.0]);
    }

    #[test]
    fn bad_context_is_rejected() {
        assert!(segment(&ramp(5, 2), 4, 2, 2).is_err());
        assert!(slice_context(&Matrix::zeros(4, 1), 2).is_err());
    }

    #[test]
    fn slice_context_middle_rows() {
        let x = Matrix::from_fn(6, 1, |r, _| (r + 1) as f64);
        assert_eq!(slice_context(&x, 2).unwrap().as_slice(), &[3.0, 4.0]);
        assert_eq!(slice_context(&x, 0).unwrap(), x);
        assert_eq!(slice_context(&Matrix::zeros(60, 3), 10).unwrap().rows(), 40);
    }

    #[test]
    fn concat_trims_and_checks_coverage() {
        let blocks = vec![Matrix::filled(40, 2, 1.0); 3];
        assert_eq!(overlap_concat(&blocks, 81).unwrap().frames(), 81);
        assert!(overlap_concat(&blocks, 121).is_err());
        let single = vec![Matrix::filled(40, 2, 3.0)];
        assert_eq!(overlap_concat(&single, 40).unwrap().as_matrix(), &single[0]);
    }

    #[test]
    fn identity_model_reconstructs_input() {
        let mag = ramp(81, 4);
        assert_eq!(round_trip(&mag, 60, 10), mag);
    }

    proptest! {
        #[test]
        fn segment_concat_identity(frames in 1usize..120, t in 1usize..40, l in 0usize..15) {
            prop_assume!(t > 2 * l);
            let mag = ramp(frames, 3);
            prop_assert_eq!(round_trip(&mag, t, l), mag);
        }

        #[test]
        fn slice_context_row_count(t in 1usize..100, l in 0usize..50) {
            prop_assume!(t > 2 * l);
            prop_assert_eq!(slice_context(&Matrix::zeros(t, 2), l).unwrap().rows(), t - 2 * l);
        }
    }
}
