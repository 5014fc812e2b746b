use latefuse_core::ingest::{
    parse_scores, read_features, read_manifest, read_scores, scores_to_csv, write_features, write_manifest,
    write_scores,
};
use latefuse_core::{DatasetManifest, FeatureSet, Matrix, ScoreMatrix, Subset, TemporalInterval, UnitKind, VideoRecord, VideoSpan};
use proptest::prelude::*;
use std::path::Path;

fn feature_set() -> impl Strategy<Value = FeatureSet> {
    (1usize..6, prop::collection::vec(0usize..4, 0..5), 0u8..3).prop_flat_map(|(dim, counts, kind)| {
        let total: usize = counts.iter().sum();
        prop::collection::vec(-1e6f32..1e6, total * dim).prop_map(move |data| {
            let mut offset = 0;
            let spans = counts
                .iter()
                .enumerate()
                .map(|(i, &count)| {
                    let s = VideoSpan { video_id: format!("vid{i}"), offset, count };
                    offset += count;
                    s
                })
                .collect();
            FeatureSet::new(UnitKind::from_code(kind).unwrap(), dim, data, spans).unwrap()
        })
    })
}

fn score_matrix() -> impl Strategy<Value = ScoreMatrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, k)| {
        prop::collection::vec(prop_oneof![-1e3f64..1e3, -1e-8f64..1e-8, Just(0.0)], n * k).prop_map(move |data| {
            let ids = (0..n).map(|i| format!("v{i}")).collect();
            ScoreMatrix::new("s", ids, Matrix::new(n, k, data).unwrap()).unwrap()
        })
    })
}

fn manifest() -> impl Strategy<Value = DatasetManifest> {
    (1usize..5, 0usize..8).prop_flat_map(|(k, n)| {
        prop::collection::vec((0u8..3, 0..k, 1usize..500, prop::option::of(prop::collection::vec((0usize..100, 0usize..100), 0..3))), n)
            .prop_map(move |videos| DatasetManifest {
                class_names: (0..k).map(|c| format!("class {c}")).collect(),
                entries: videos
                    .into_iter()
                    .enumerate()
                    .map(|(i, (subset, label, frames, props))| {
                        let subset = [Subset::Train, Subset::Validation, Subset::Test][subset as usize];
                        VideoRecord {
                            video_id: format!("v{i}"),
                            subset,
                            label: (subset != Subset::Test).then_some(label),
                            num_frames: frames,
                            proposals: props.map(|p| {
                                p.into_iter()
                                    .map(|(a, b)| {
                                        let (s, e) = (a.min(b) % frames, a.max(b) % frames);
                                        TemporalInterval::new(s.min(e), s.max(e))
                                    })
                                    .collect()
                            }),
                        }
                    })
                    .collect(),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fmat_round_trip(fs in feature_set()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.fmat");
        write_features(&fs, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let back = read_features(&p).unwrap();
        prop_assert_eq!(&back, &fs);
        write_features(&back, &p).unwrap();
        prop_assert_eq!(std::fs::read(&p).unwrap(), bytes);
    }

    #[test]
    fn scores_round_trip(s in score_matrix()) {
        let names: Vec<String> = (0..s.num_classes()).map(|c| format!("c{c}")).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.scores.csv");
        write_scores(&s, &names, &p).unwrap();
        let back = read_scores(&p, &names).unwrap();
        prop_assert_eq!(back.scores(), s.scores());
        prop_assert_eq!(back.video_ids(), s.video_ids());
        let text = scores_to_csv(&back, &names).unwrap();
        let on_disk = std::fs::read(&p).unwrap();
        prop_assert_eq!(text.as_bytes(), on_disk.as_slice());
        prop_assert!(parse_scores(&text, &names[1..], "s", Path::new("x")).is_err());
    }

    #[test]
    fn manifest_round_trip(m in manifest()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_manifest(&m, &p).unwrap();
        prop_assert_eq!(read_manifest(&p).unwrap(), m);
    }
}
