//! Frame sampling and clip schedules.

use crate::datamodel::VideoRecord;
use crate::error::{Error, Result};

/// `count` frame indices spread uniformly over `num_frames`:
/// `index_j = floor(j * num_frames / count)`.
///
/// Indices repeat when the video has fewer frames than requested.
pub fn uniform_sample_indices(num_frames: usize, count: usize) -> Vec<usize> {
    let (n, k) = (num_frames as u128, count as u128);
    (0..k).map(|j| (j * n / k) as usize).collect()
}

/// Uniform sampling restricted to the union of a video's action proposals.
///
/// The proposals are concatenated in the order given, `count` offsets are
/// spread over their combined length, and each offset is mapped back to an
/// absolute frame index.
pub fn proposal_sample_indices(record: &VideoRecord, count: usize) -> Result<Vec<usize>> {
    let proposals = match record.proposals.as_deref() {
        Some(p) if !p.is_empty() => p,
        _ => return Err(Error::NoProposals(record.video_id.clone())),
    };
    if let Some(bad) = proposals.iter().find(|p| p.is_empty()) {
        return Err(Error::invalid(format!(
            "video {:?}: inverted proposal [{}, {}]",
            record.video_id, bad.start_frame, bad.end_frame
        )));
    }
    let total: usize = proposals.iter().map(|p| p.len()).sum();
    let offsets = uniform_sample_indices(total, count);

    let mut out = Vec::with_capacity(count);
    let mut iv = proposals.iter();
    let mut current = iv.next().expect("non-empty");
    let mut base = 0;
    // offsets are non-decreasing, so one forward pass suffices
    for off in offsets {
        while off >= base + current.len() {
            base += current.len();
            current = iv.next().expect("offset below total length");
        }
        out.push(current.start_frame + (off - base));
    }
    Ok(out)
}

/// Start indices of fixed-length clips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipSchedule {
    pub starts: Vec<usize>,
    pub clip_len: usize,
    /// Set when the video is shorter than one clip; the single clip is
    /// completed by repeating the last frame.
    pub padded: bool,
}

impl ClipSchedule {
    /// Frame indices making up clip `i`, with short-video padding applied.
    pub fn clip_frames(&self, i: usize, num_frames: usize) -> Vec<usize> {
        let start = self.starts[i];
        let last = num_frames.saturating_sub(1);
        (start..start + self.clip_len).map(|f| f.min(last)).collect()
    }
}

/// Clip starts with stride `max(1, round(clip_len * (1 - overlap)))`, keeping
/// every start with `start + clip_len <= num_frames`.
pub fn clip_starts(num_frames: usize, clip_len: usize, overlap: f64) -> Result<ClipSchedule> {
    if clip_len == 0 {
        return Err(Error::invalid("clip length must be >= 1"));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("clip overlap {overlap} outside [0, 1)")));
    }
    if num_frames < clip_len {
        return Ok(ClipSchedule {
            starts: vec![0],
            clip_len,
            padded: true,
        });
    }
    let stride = ((clip_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let starts = (0..=num_frames - clip_len).step_by(stride).collect();
    Ok(ClipSchedule {
        starts,
        clip_len,
        padded: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Subset, TemporalInterval};
    use proptest::prelude::*;

    fn record(num_frames: usize, proposals: Option<Vec<[usize; 2]>>) -> VideoRecord {
        VideoRecord {
            video_id: "v".into(),
            subset: Subset::Test,
            label: None,
            num_frames,
            proposals: proposals.map(|p| p.into_iter().map(TemporalInterval::from).collect()),
        }
    }

    #[test]
    fn uniform_identity_and_stride() {
        assert_eq!(uniform_sample_indices(25, 25), (0..25).collect::<Vec<_>>());
        assert_eq!(
            uniform_sample_indices(100, 25),
            (0..25).map(|j| 4 * j).collect::<Vec<_>>()
        );
    }

    #[test]
    fn uniform_short_video_repeats() {
        let got = uniform_sample_indices(10, 25);
        // floor(j * 10 / 25) enumerated by hand
        let expected = [
            0, 0, 0, 1, 1, 2, 2, 2, 3, 3, 4, 4, 4, 5, 5, 6, 6, 6, 7, 7, 8, 8, 8, 9, 9,
        ];
        assert_eq!(got, expected);
    }

    #[test]
    fn proposals_map_through_concatenation() {
        let r = record(40, Some(vec![[0, 9], [20, 29]]));
        assert_eq!(proposal_sample_indices(&r, 4).unwrap(), [0, 5, 20, 25]);
    }

    #[test]
    fn whole_video_proposal_matches_uniform() {
        let r = record(137, Some(vec![[0, 136]]));
        assert_eq!(
            proposal_sample_indices(&r, 25).unwrap(),
            uniform_sample_indices(137, 25)
        );
    }

    #[test]
    fn missing_proposals_error() {
        assert!(matches!(
            proposal_sample_indices(&record(10, None), 4),
            Err(Error::NoProposals(_))
        ));
        assert!(matches!(
            proposal_sample_indices(&record(10, Some(vec![])), 4),
            Err(Error::NoProposals(_))
        ));
    }

    #[test]
    fn clip_schedules() {
        let s = clip_starts(32, 16, 0.5).unwrap();
        assert_eq!(s.starts, [0, 8, 16]);
        assert!(!s.padded);
        assert_eq!(clip_starts(16, 16, 0.5).unwrap().starts, [0]);
        let short = clip_starts(10, 16, 0.5).unwrap();
        assert_eq!(short.starts, [0]);
        assert!(short.padded);
        let frames = short.clip_frames(0, 10);
        assert_eq!(frames.len(), 16);
        assert_eq!(&frames[9..], &[9; 7]);
        assert!(clip_starts(10, 0, 0.5).is_err());
        assert!(clip_starts(10, 4, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn uniform_indices_in_range(n in 1usize..500, k in 1usize..100) {
            let idx = uniform_sample_indices(n, k);
            prop_assert_eq!(idx.len(), k);
            prop_assert!(idx.iter().all(|&i| i < n));
            prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
            if n >= k {
                prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn last_clip_fits(n in 1usize..300, len in 1usize..40, overlap in 0.0f64..0.95) {
            let s = clip_starts(n, len, overlap).unwrap();
            if n >= len {
                let last = *s.starts.last().unwrap();
                prop_assert!(last + len <= n);
                let stride = ((len as f64 * (1.0 - overlap)).round() as usize).max(1);
                // no further clip would have fit
                prop_assert!(last + stride + len > n);
            }
        }

        #[test]
        fn proposal_samples_stay_inside(a in 0usize..50, la in 1usize..30, gap in 0usize..20, lb in 1usize..30, k in 1usize..40) {
            let b = a + la + gap;
            let r = record(b + lb, Some(vec![[a, a + la - 1], [b, b + lb - 1]]));
            let idx = proposal_sample_indices(&r, k).unwrap();
            prop_assert_eq!(idx.len(), k);
            for f in idx {
                prop_assert!((a..a + la).contains(&f) || (b..b + lb).contains(&f));
            }
        }
    }
}
