use super::*;
use crate::synth::{generate, Scene, SceneKind, SceneSpec};

fn small(kind: SceneKind, length: usize) -> Scene {
    generate(&SceneSpec {
        width: 96,
        height: 64,
        length,
        object_size: 12,
        parked_frames: 16,
        ..SceneSpec::new(kind)
    })
}

fn small_config(init: usize, section: usize) -> PipelineConfig {
    PipelineConfig {
        init_window: init,
        section_length: section,
        canonical_width: 96,
        canonical_height: 64,
        differencing: crate::segmenter::DifferencingParams {
            threshold: 30,
            min_blob: 10,
        },
        ..PipelineConfig::default()
    }
}

fn seq(scene: &Scene) -> FrameSequence {
    FrameSequence::new(scene.frames.clone(), "test").unwrap()
}

#[test]
fn empty_static_scene_background_is_the_median() {
    let scene = generate(&SceneSpec {
        width: 96,
        height: 64,
        length: 12,
        object_size: 0,
        ..SceneSpec::new(SceneKind::Static)
    });
    let mut p = Pipeline::new(small_config(12, 12)).unwrap();
    let records = p.initialize(&scene.frames).unwrap();
    let median = median_of(&scene.frames).unwrap();
    let bg = &p.model().unwrap().empty_background;
    assert!(bg.data().iter().zip(median.data()).all(|(a, b)| a.abs_diff(*b) <= 1));
    assert!(records.iter().all(|r| r.warm_up && r.fg_ratio == 0.0));
    assert_eq!(records.iter().filter(|r| r.bg_refreshed).count(), 1);
    assert!(records[11].bg_refreshed);
}

#[test]
fn parked_object_ghost_is_removed_from_the_background() {
    let scene = small(SceneKind::StaticGhost, 20);
    let mut p = Pipeline::new(small_config(20, 20)).unwrap();
    p.initialize(&scene.frames).unwrap();
    let bg = &p.model().unwrap().empty_background;
    let plate = &scene.plates[19];
    let close = bg
        .data()
        .chunks(3)
        .zip(plate.data().chunks(3))
        .filter(|(a, b)| a.iter().zip(*b).all(|(x, y)| x.abs_diff(*y) <= 3))
        .count();
    assert!(close as f64 >= 0.99 * (96.0 * 64.0), "{close} pixels within 3");

    // Without suppression the median's ghost is chained back in.
    let mut cfg = small_config(20, 20);
    cfg.ghost_suppression = false;
    let mut p = Pipeline::new(cfg).unwrap();
    p.initialize(&scene.frames).unwrap();
    let bg = &p.model().unwrap().empty_background;
    assert_ne!(bg, plate);
}

#[test]
fn box_on_background_gives_exact_ratio() {
    let bg = Frame::from_fn(320, 240, 3, |x, y, c| (90 + (x + 2 * y + c) % 7) as u8);
    let mut cfg = PipelineConfig {
        init_window: 4,
        ..PipelineConfig::default()
    };
    cfg.completion.window = 4;
    let mut p = Pipeline::new(cfg).unwrap();
    p.initialize(&vec![bg.clone(); 4]).unwrap();
    assert_eq!(p.detect_frame(&bg).unwrap().fg_ratio, 0.0);

    let boxed = Frame::from_fn(320, 240, 3, |x, y, c| {
        let v = bg.get(x, y, c);
        if (100..140).contains(&x) && (50..80).contains(&y) {
            v + 80
        } else {
            v
        }
    });
    let r = p.detect_frame(&boxed).unwrap();
    assert_eq!(r.mask.count_fg(), 1200);
    assert_eq!(r.fg_ratio, 0.015625);

    let all = Frame::filled(320, 240, 3, 255);
    assert_eq!(p.detect_frame(&all).unwrap().fg_ratio, 1.0);
}

#[test]
fn detection_needs_initialization() {
    let mut p = Pipeline::new(PipelineConfig::default()).unwrap();
    let f = Frame::filled(320, 240, 3, 0);
    assert!(matches!(p.detect_frame(&f), Err(Error::NotInitialized)));
    assert!(matches!(p.maybe_refresh(), Err(Error::NotInitialized)));
    assert!(p.initialize(&[f.clone(), f]).is_err());
}

#[test]
fn refresh_trigger_rules() {
    let cfg = PipelineConfig::default();
    assert_eq!(refresh_trigger(199, 99, &[0.0; 100], &cfg), Some(RefreshReason::Section));
    assert_eq!(refresh_trigger(149, 99, &[0.01; 50], &cfg), None);
    let mut ratios = vec![0.01; 20];
    ratios.extend([0.9; 10]);
    assert_eq!(refresh_trigger(129, 99, &ratios, &cfg), Some(RefreshReason::Deterioration));
    assert_eq!(refresh_trigger(129, 99, &[0.5; 10], &cfg), None);
    assert_eq!(refresh_trigger(108, 99, &[0.9; 9], &cfg), None);

    let off = PipelineConfig {
        section_length: 0,
        deterioration_fg_ratio: 1.0,
        ..cfg
    };
    assert_eq!(refresh_trigger(10_000, 99, &[1.0; 50], &off), None);
}

#[test]
fn run_refreshes_at_section_boundaries_and_is_deterministic() {
    let scene = small(SceneKind::Pan, 50);
    let cfg = small_config(20, 15);
    let a = run_video(&seq(&scene), &cfg).unwrap();
    assert_eq!(a.records.len(), 50);
    assert!(a.records.iter().enumerate().all(|(i, r)| r.frame_index == i));
    assert_eq!(a.manifest.refresh_indices(), vec![19, 34, 49]);
    let reasons: Vec<_> = a.records.iter().filter_map(|r| r.refresh_reason).collect();
    assert_eq!(
        reasons,
        vec![RefreshReason::Initialization, RefreshReason::Section, RefreshReason::Section]
    );
    assert!(a.records[..20].iter().all(|r| r.warm_up));
    assert!(a.records[20..].iter().all(|r| !r.warm_up));

    let b = run_video(&seq(&scene), &cfg).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.manifest, b.manifest);
}

#[test]
fn short_tail_is_processed_without_a_refresh() {
    let scene = small(SceneKind::Static, 26);
    let out = run_video(&seq(&scene), &small_config(20, 20)).unwrap();
    assert_eq!(out.records.len(), 26);
    assert_eq!(out.manifest.refresh_indices(), vec![19]);
    assert!(run_video(&seq(&small(SceneKind::Static, 20)), &small_config(20, 20)).is_err());
}

#[test]
fn disabled_refresh_keeps_the_initial_background() {
    let scene = small(SceneKind::Pan, 45);
    let mut cfg = small_config(15, 0);
    cfg.deterioration_fg_ratio = 1.0;
    let mut p = Pipeline::new(cfg).unwrap();
    p.initialize(&scene.frames[..15]).unwrap();
    let bg = p.model().unwrap().empty_background.clone();
    for f in &scene.frames[15..] {
        let r = p.process(f).unwrap();
        assert!(!r.bg_refreshed && r.refresh_reason.is_none());
    }
    assert_eq!(p.model().unwrap().empty_background, bg);
}

#[test]
fn drifted_background_triggers_an_early_refresh() {
    let scene = small(SceneKind::Static, 40);
    let mut p = Pipeline::new(small_config(20, 100)).unwrap();
    p.initialize(&scene.frames[..20]).unwrap();
    let mut fired = None;
    for (k, f) in scene.frames[20..].iter().enumerate() {
        // Global brightening: every pixel now differs from the background.
        let lit = Frame::from_fn(96, 64, 3, |x, y, c| f.get(x, y, c).saturating_add(60));
        let r = p.process(&lit).unwrap();
        if r.refresh_reason.is_some() {
            fired = Some((k, r.refresh_reason.unwrap()));
            break;
        }
    }
    assert_eq!(fired, Some((9, RefreshReason::Deterioration)));
}

#[test]
fn written_run_has_masks_and_manifest() {
    let scene = small(SceneKind::Static, 24);
    let out = run_video(&seq(&scene), &small_config(20, 20)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let template = crate::imaging::io::FrameTemplate::parse(crate::imaging::io::DEFAULT_MASK_TEMPLATE).unwrap();
    write_run(dir.path(), &out.records, &out.manifest, &template, false).unwrap();
    let m = crate::imaging::io::load_mask(&dir.path().join("bin000023.png")).unwrap();
    assert_eq!(m, out.records[23].mask);
    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, out.manifest);
}
