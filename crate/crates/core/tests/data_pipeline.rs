use std::collections::BTreeSet;

use proptest::prelude::*;
use rrcnn_core::arch::ArchitectureId;
use rrcnn_core::data::{
    assign_folds, augment, augment_in_place, extract_patches, gather_patches, inference_offsets, make_tiles,
    overlap_fraction, select_epochs, training_offsets, ChannelStats, LabelRaster, PatchRule, RasterStack,
    TemporalMode, AUGMENTATIONS, MAX_OVERLAP, PATCH_SIZE, SCENE_TILE_H, SCENE_TILE_W, TRAIN_STRIDE,
};
use rrcnn_core::experiment::Experiment;
use rrcnn_core::{Shape, Tensor};

fn stack_with(h: usize, w: usize, d: usize, f: impl Fn(usize, usize) -> f32) -> RasterStack {
    let plane = h * w;
    let data = (0..2 * d * plane).map(|i| f(i / plane, i % plane)).collect();
    RasterStack::new(h, w, data, (0..d).map(|t| format!("t{t}")).collect()).unwrap()
}

#[test]
fn scene_grid_has_sixty_tiles_and_reported_margins() {
    let g = make_tiles(5767, 9327, SCENE_TILE_H, SCENE_TILE_W).unwrap();
    assert_eq!((g.rows, g.cols, g.len()), (6, 10, 60));
    assert_eq!((g.tile_h, g.tile_w), (961, 932));
    assert_eq!((g.margin_h, g.margin_w), (5767 - 6 * 961, 9327 - 10 * 932));
    for t in g.tiles() {
        assert!(t.row0 + g.tile_h <= 5767 && t.col0 + g.tile_w <= 9327);
    }
}

#[test]
fn exact_and_small_grids() {
    let g = make_tiles(256, 256, 128, 128).unwrap();
    assert_eq!((g.rows, g.cols, g.margin_h, g.margin_w), (2, 2, 0, 0));
    assert!(make_tiles(100, 300, 128, 128).is_err());
}

#[test]
fn tiles_are_disjoint() {
    let g = make_tiles(300, 410, 64, 96).unwrap();
    let mut owner = vec![usize::MAX; 300 * 410];
    for (id, t) in g.tiles().enumerate() {
        for r in t.row0..t.row0 + g.tile_h {
            for c in t.col0..t.col0 + g.tile_w {
                assert_eq!(owner[r * 410 + c], usize::MAX);
                owner[r * 410 + c] = id;
            }
        }
    }
}

#[test]
fn six_fold_plan_tests_every_tile_once() {
    let plan = assign_folds(60, 6, 11).unwrap();
    let mut seen = BTreeSet::new();
    for f in 0..6 {
        let test = plan.test_tiles(f);
        assert_eq!(test.len(), 10);
        let train = plan.train_tiles(f);
        assert_eq!(train.len(), 50);
        assert!(test.iter().all(|t| !train.contains(t)));
        for t in test {
            assert!(seen.insert(t), "tile {t} tested twice");
        }
    }
    assert_eq!(seen.len(), 60);
    assert_eq!(plan, assign_folds(60, 6, 11).unwrap());
    assert_ne!(plan, assign_folds(60, 6, 12).unwrap());
}

#[test]
fn uneven_fold_split_is_near_equal() {
    let plan = assign_folds(7, 3, 0).unwrap();
    let mut sizes: Vec<usize> = (0..3).map(|f| plan.test_tiles(f).len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![2, 2, 3]);
    assert!(assign_folds(5, 6, 0).is_err());
}

#[test]
fn stride_arithmetic_respects_overlap_cap() {
    assert_eq!(TRAIN_STRIDE, 39);
    assert!((overlap_fraction(128, 39) - 89.0 / 128.0).abs() < 1e-15);
    assert!(overlap_fraction(128, 39) <= MAX_OVERLAP);
    assert!(overlap_fraction(128, 38) > MAX_OVERLAP);
    assert_eq!(PatchRule::training(PATCH_SIZE).stride, 39);
}

proptest! {
    #[test]
    fn training_offsets_stay_inside_and_apart(len in 128usize..1200, stride in 1usize..140) {
        let offs = training_offsets(len, 128, stride);
        prop_assert!(!offs.is_empty());
        for w in offs.windows(2) {
            prop_assert!(w[1] >= w[0] + stride);
        }
        prop_assert!(offs.iter().all(|&o| o + 128 <= len));
    }

    #[test]
    fn inference_offsets_cover_every_pixel(len in 16usize..700, stride in 1usize..40) {
        let offs = inference_offsets(len, 16, stride);
        let mut covered = vec![false; len];
        for &o in &offs {
            prop_assert!(o + 16 <= len);
            covered[o..o + 16].iter_mut().for_each(|c| *c = true);
        }
        prop_assert!(covered.iter().all(|&c| c));
    }
}

#[test]
fn scene_tile_offsets_never_exceed_the_overlap_cap() {
    for len in [SCENE_TILE_H, SCENE_TILE_W] {
        let offs = training_offsets(len, 128, TRAIN_STRIDE);
        for w in offs.windows(2) {
            assert!(overlap_fraction(128, w[1] - w[0]) <= 0.696);
        }
        assert_eq!(*offs.last().unwrap() + 128, len, "edge reached");
    }
}

#[test]
fn class_filter_boundary_and_all_forest_tile() {
    // two 128x128 tiles side by side; only the right one has deforestation
    let (h, w) = (128, 256);
    let mut codes = vec![0u8; h * w];
    // 328 = ceil(0.02 * 128^2) deforestation pixels in the right tile
    for q in 0..328 {
        codes[(q / 128) * w + 128 + q % 128] = 1;
    }
    let grid = make_tiles(h, w, 128, 128).unwrap();
    let rule = PatchRule::training(128);
    let keep = |codes: &Vec<u8>| extract_patches(&grid, &LabelRaster::new(h, w, codes.clone()).unwrap(), &[0, 1], &rule);
    let kept = keep(&codes);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].tile, 1);

    // one pixel short of the threshold, and past deforestation does not count
    codes[w + 128 + 71] = 2;
    assert!(keep(&codes).is_empty());
}

#[test]
fn retained_training_patches_meet_the_threshold() {
    let scene = rrcnn_core::synth::generate(&rrcnn_core::synth::SceneConfig {
        height: 192,
        width: 192,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let grid = make_tiles(192, 192, 96, 96).unwrap();
    let rule = PatchRule::training(32);
    let refs = extract_patches(&grid, &scene.labels, &[0, 1, 2, 3], &rule);
    assert!(!refs.is_empty());
    for p in &refs {
        let t = grid.tile(p.tile);
        let mut def = 0;
        for r in 0..32 {
            for c in 0..32 {
                def += usize::from(scene.labels.get(t.row0 + p.row + r, t.col0 + p.col + c) == 1);
            }
        }
        assert!(def as f64 >= 0.02 * 1024.0, "{p:?} has {def}");
        assert!(p.row + 32 <= 96 && p.col + 32 <= 96);
    }
    let mut sorted = refs.clone();
    sorted.sort();
    assert_eq!(sorted, refs);
}

#[test]
fn epoch_selection_keeps_endpoints_in_order() {
    let s = stack_with(2, 2, 7, |c, _| c as f32);
    let bi = select_epochs(&s, TemporalMode::Bitemporal).unwrap();
    assert_eq!(bi.channels(), 4);
    let firsts: Vec<f32> = (0..4).map(|c| bi.channel(c)[0]).collect();
    assert_eq!(firsts, vec![0.0, 1.0, 12.0, 13.0]);
    assert_eq!(bi.tags, vec!["t0".to_string(), "t6".to_string()]);
    let multi = select_epochs(&s, TemporalMode::Multitemporal).unwrap();
    assert_eq!(multi, s);
    let two = stack_with(2, 2, 2, |c, p| (c * 10 + p) as f32);
    assert_eq!(select_epochs(&two, TemporalMode::Bitemporal).unwrap(), two);
    assert!(select_epochs(&stack_with(2, 2, 1, |_, _| 0.0), TemporalMode::Bitemporal).is_err());
}

fn grid4() -> Tensor<f32> {
    Tensor::from_vec(Shape::new(1, 1, 4, 4), (1..=16).map(|v| v as f32).collect()).unwrap()
}

#[test]
fn quarter_turn_and_flip_match_hand_rotation() {
    let labels: Vec<u8> = (0..16).map(|q| u8::from(q == 3)).collect(); // top-right corner
    let (x, l) = augment(&grid4(), &labels, 1).unwrap();
    assert_eq!(x.data(), &[4., 8., 12., 16., 3., 7., 11., 15., 2., 6., 10., 14., 1., 5., 9., 13.]);
    assert_eq!(l.iter().position(|&v| v == 1), Some(0), "top-right turns to top-left");
    let (x, l) = augment(&grid4(), &labels, 4).unwrap();
    assert_eq!(&x.data()[..4], &[4., 3., 2., 1.]);
    assert_eq!(l.iter().position(|&v| v == 1), Some(0));
    let (x, _) = augment(&grid4(), &labels, 5).unwrap();
    assert_eq!(&x.data()[..4], &[1., 5., 9., 13.], "flip then quarter turn is the transpose");
}

#[test]
fn dihedral_group_laws() {
    let x = grid4();
    let labels: Vec<u8> = (0..16).map(|q| (q % 3) as u8).collect();
    let (id, lid) = augment(&x, &labels, 0).unwrap();
    assert_eq!((id.data(), &lid[..]), (x.data(), &labels[..]));
    let mut y = x.clone();
    let mut l = labels.clone();
    for _ in 0..4 {
        (y, l) = augment(&y, &l, 1).unwrap();
    }
    assert_eq!((y.data(), &l[..]), (x.data(), &labels[..]));
    let (f, lf) = augment(&x, &labels, 4).unwrap();
    let (ff, lff) = augment(&f, &lf, 4).unwrap();
    assert_eq!((ff.data(), &lff[..]), (x.data(), &labels[..]));
    let images: BTreeSet<Vec<u32>> = (0..AUGMENTATIONS)
        .map(|a| augment(&x, &labels, a).unwrap().0.data().iter().map(|v| v.to_bits()).collect())
        .collect();
    assert_eq!(images.len(), 8, "eight distinct transforms");
}

#[test]
fn augmentation_keeps_class_histogram_and_pairs_image_with_label() {
    let labels: Vec<u8> = (0..16).map(|q| [0, 1, 2, 1][q % 4]).collect();
    // image value encodes its label so the pairing can be checked after the transform
    let x = Tensor::from_vec(Shape::new(1, 1, 4, 4), labels.iter().map(|&l| f32::from(l)).collect()).unwrap();
    for a in 0..AUGMENTATIONS {
        let (y, l) = augment(&x, &labels, a).unwrap();
        let hist = |v: &[u8]| [0, 1, 2].map(|k| v.iter().filter(|&&c| c == k).count());
        assert_eq!(hist(&l), hist(&labels));
        assert!(y.data().iter().zip(&l).all(|(&v, &c)| v == f32::from(c)));
    }
    let mut d = vec![0.0f32; 12];
    let mut l = vec![0u8; 12];
    assert!(augment_in_place(&mut d, &mut l, 1, 3, 4, 1).is_err());
}

#[test]
fn normalisation_standardises_training_tiles_only() {
    let grid = make_tiles(64, 64, 32, 32).unwrap();
    let s = stack_with(64, 64, 2, |c, p| match c {
        3 => 5.0,
        _ => ((p * 7919 + c * 31) % 101) as f32 * 0.3 - 4.0,
    });
    let train = [0usize, 1, 2];
    let stats = ChannelStats::from_tiles(&s, &grid, &train).unwrap();
    assert!(stats.floored[3] && stats.any_floored());
    let n = stats.apply(&s).unwrap();
    for c in 0..4 {
        let vals: Vec<f64> = train
            .iter()
            .flat_map(|&t| {
                let tile = grid.tile(t);
                let plane = n.channel(c);
                (0..32).flat_map(move |r| (0..32).map(move |k| f64::from(plane[(tile.row0 + r) * 64 + tile.col0 + k])))
            })
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!(m.abs() < 1e-3, "channel {c} mean {m}");
        if c == 3 {
            assert!(vals.iter().all(|&v| v == 0.0));
        } else {
            assert!((sd - 1.0).abs() < 1e-3, "channel {c} std {sd}");
        }
    }
    // changing a held-out tile leaves the statistics alone
    let tile3 = grid.tile(3);
    let mut poked = s.clone();
    poked.data[tile3.row0 * 64 + tile3.col0] = 1e6;
    assert_eq!(ChannelStats::from_tiles(&poked, &grid, &train).unwrap(), stats);
}

#[test]
fn gathered_windows_copy_the_right_pixels() {
    let s = stack_with(8, 8, 1, |c, p| (c * 100 + p) as f32);
    let labels = LabelRaster::new(8, 8, (0..64).map(|p| (p % 3) as u8).collect()).unwrap();
    let grid = make_tiles(8, 8, 4, 4).unwrap();
    let refs = [rrcnn_core::data::PatchRef { tile: 3, row: 1, col: 2, aug: 0 }];
    let (x, l) = gather_patches(&s, &labels, &grid, &refs, 2).unwrap();
    // tile 3 starts at (4, 4); window origin (5, 6)
    assert_eq!(x.data(), &[46., 47., 54., 55., 146., 147., 154., 155.]);
    assert_eq!(l, vec![46 % 3, 47 % 3, 54 % 3, 55 % 3].into_iter().map(|v| v as u8).collect::<Vec<_>>());
}

#[test]
fn no_training_or_validation_patch_comes_from_a_test_tile() {
    let scene = rrcnn_core::synth::generate(&rrcnn_core::synth::SceneConfig {
        height: 192,
        width: 192,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let mut exp = Experiment::new(ArchitectureId::UNet, TemporalMode::Bitemporal);
    exp.tile_h = 64;
    exp.tile_w = 64;
    exp.patch_size = 32;
    let (_, grid, plan) = exp.layout(&scene.stack).unwrap();
    for f in 0..plan.folds {
        let test: BTreeSet<usize> = plan.test_tiles(f).into_iter().collect();
        let (train, val) = exp.training_patches(&grid, &scene.labels, &plan.train_tiles(f));
        assert!(!train.is_empty());
        assert!(train.iter().chain(&val).all(|p| !test.contains(&p.tile)));
        assert!(val.iter().all(|p| !train.contains(p)));
    }
}
