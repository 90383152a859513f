mod common;

use common::*;
use partkit_core::segmentation::run_pipeline;
use partkit_core::PipelineConfig;

/// Expected first rejection criterion per corpus shape, or `None` for accept.
const EXPECTED: &[(&str, Option<&str>)] = &[
    ("s00_chair.obj", None),
    ("s01_table.obj", Some("ratio")),
    ("s02_lamp.obj", None),
    ("s03_shelf.obj", None),
    ("s04_bed.obj", None),
    ("s05_slabs.obj", None),
    ("s06_decal.obj", Some("ratio")),
    ("s07_single.obj", Some("part_count")),
    ("s08_overlap.obj", Some("iou")),
    ("s09_dominant.obj", Some("ratio")),
    ("s10_snowman.obj", None),
    ("s11_rotated_chair.obj", None),
    ("s12_mug.obj", Some("ratio")),
    ("s13_car.obj", None),
    ("s14_scattered.obj", Some("part_count")),
    ("s15_stool.obj", Some("ratio")),
    ("s16_dumbbell.obj", None),
    ("s17_plus.obj", Some("iou")),
    ("s18_lamp.glb", None),
    ("s19_tower.obj", None),
];

#[test]
fn corpus_decisions() {
    let cfg = PipelineConfig::default();
    let paths = corpus_paths("corpus");
    assert_eq!(paths.len(), EXPECTED.len());
    for (p, (name, want)) in paths.iter().zip(EXPECTED) {
        assert_eq!(p.file_name().unwrap().to_str().unwrap(), *name);
        let out = run_pipeline(p, &cfg).unwrap();
        let got = out.decision.reasons().first().map(|r| r.name());
        assert_eq!(got, *want, "{name}: {:?}", out.decision);
        let s = &out.record.stats;
        assert_eq!(s.part_count, out.record.parts.len(), "{name}");
        assert_eq!(s.part_count, out.record.obbs.len(), "{name}");
        if out.decision.is_accept() {
            assert!((2..=16).contains(&s.part_count), "{name}");
            assert!(s.mean_part_iou <= 0.10, "{name}");
        }
    }
}

#[test]
fn segment_dir_has_one_ratio_failure() {
    let cfg = PipelineConfig::default();
    let reasons: Vec<Option<&'static str>> = corpus_paths("segment3")
        .iter()
        .map(|p| {
            run_pipeline(p, &cfg)
                .unwrap()
                .decision
                .reasons()
                .first()
                .map(|r| r.name())
        })
        .collect();
    assert_eq!(reasons, [None, None, Some("ratio")]);
}
