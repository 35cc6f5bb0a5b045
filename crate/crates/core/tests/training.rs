mod common;

use common::{images, quick, small_codec, trained};
use sicr::imaging::synth::write_synthetic_corpus;
use sicr::imaging::{build_manifest, mse, noise_map_with, Image, Normalization};
use sicr::postproc::{refine, PostprocModel, RrdbConfig};
use sicr::training::{
    build_pairs, build_pairs_from, train_base_on, train_codec, train_enh_on, train_postproc, PairSet, Target,
    TrainConfig,
};
use sicr::Error;

fn named(imgs: &[Image]) -> Vec<(String, Image)> {
    imgs.iter().enumerate().map(|(i, im)| (format!("img{i}"), im.clone())).collect()
}

#[test]
fn base_loss_decreases_on_a_toy_set() {
    let out = train_base_on(&images(0, 16, 32), &quick(Target::BaseCodec, 5), &small_codec()).unwrap();
    assert_eq!(out.log.len(), 5);
    let first = out.log[0].loss;
    let last = out.log[4].loss;
    assert!(last < first, "loss {first} -> {last}");
    assert!(out.log.iter().all(|r| r.bpp.is_some() && r.loss.is_finite()));
}

#[test]
fn seeded_training_is_reproducible() {
    let imgs = images(5, 8, 32);
    let cfg = TrainConfig {
        deterministic: true,
        ..quick(Target::BaseCodec, 2)
    };
    let a = train_base_on(&imgs, &cfg, &small_codec()).unwrap().checkpoint;
    let b = train_base_on(&imgs, &cfg, &small_codec()).unwrap().checkpoint;
    assert_eq!(a.to_bytes(), b.to_bytes());
    let c = train_base_on(&imgs, &TrainConfig { seed: 99, ..cfg }, &small_codec()).unwrap().checkpoint;
    assert_ne!(a.fingerprint(), c.fingerprint());
}

#[test]
fn enhancement_records_its_parent() {
    let t = trained();
    assert_eq!(
        t.enh_low.provenance.parent_fingerprint.as_deref(),
        Some(t.base.fingerprint().as_str())
    );
    assert_eq!(t.enh_low.provenance.lambda, Some(common::LOW));
}

#[test]
fn enhancement_without_base_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_corpus(dir.path(), 2, 32, 32, 0).unwrap();
    let manifest = build_manifest(dir.path(), "train").unwrap();
    let err = train_codec(&manifest, &quick(Target::EnhCodec, 1), &small_codec(), None).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn empty_pairs_are_rejected() {
    let empty = PairSet::new(0.01, vec![]).unwrap();
    let err = train_postproc(&empty, &quick(Target::Postproc, 1), &RrdbConfig::desk(1)).unwrap_err();
    assert!(matches!(err, Error::EmptyPairs));
}

#[test]
fn zero_epoch_postprocessor_is_identity() {
    let t = trained();
    let codec = t.codec();
    let pairs = build_pairs_from(&named(&images(40, 2, 32)), &codec, common::LOW, 32).unwrap();
    let out = train_postproc(&pairs, &quick(Target::Postproc, 0), &RrdbConfig::desk(1)).unwrap();
    assert!(out.log.is_empty());
    let model = PostprocModel::from_checkpoint(&out.checkpoint).unwrap();
    let human = codec.compress(&images(77, 1, 40)[0]).unwrap().human;
    assert_eq!(refine(&human, &model), human);
}

#[test]
fn postprocessor_overfits_a_single_pair() {
    let t = trained();
    let pairs = build_pairs_from(&named(&images(50, 1, 16)), &t.codec(), common::LOW, 16).unwrap();
    let cfg = TrainConfig {
        batch_size: 1,
        augment: false,
        ..quick(Target::Postproc, 60)
    };
    let out = train_postproc(&pairs, &cfg, &RrdbConfig::desk(1)).unwrap();
    let p = &pairs.pairs()[0];
    let model = PostprocModel::from_checkpoint(&out.checkpoint).unwrap();
    let before = mse(&p.original, &p.compressed).unwrap();
    let after = mse(&p.original, &refine(&p.compressed, &model)).unwrap();
    assert!(after < before, "mse {after} vs identity {before}");
    assert!(out.log.last().unwrap().loss < out.log[0].loss);
}

#[test]
fn pairs_tile_each_image() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_corpus(dir.path(), 10, 256, 256, 3).unwrap();
    let manifest = build_pairs_manifest(dir.path());
    let pairs = build_pairs(&manifest, &t.base, &t.enh_low, 128).unwrap();
    assert_eq!(pairs.len(), 40);
    for p in pairs.pairs() {
        assert_eq!(p.compressed.dims(), (128, 128));
        assert_eq!(p.original.dims(), (128, 128));
        assert!(p.x % 128 == 0 && p.y % 128 == 0);
    }
    assert_eq!(build_pairs(&manifest, &t.base, &t.enh_low, 128).unwrap(), pairs);

    let path = dir.path().join("pairs.bin");
    pairs.save(&path).unwrap();
    assert_eq!(PairSet::load(&path).unwrap(), pairs);
}

fn build_pairs_manifest(dir: &std::path::Path) -> sicr::imaging::DatasetManifest {
    build_manifest(dir, "train").unwrap()
}

#[test]
fn pair_patches_match_crops_of_whole_reconstructions() {
    let t = trained();
    let codec = t.codec();
    let img = images(90, 1, 64).remove(0);
    let pairs = build_pairs_from(&[("a".to_string(), img.clone())], &codec, common::LOW, 32).unwrap();
    let whole = codec.compress(&img).unwrap().human;
    let scale = Normalization::FixedScale(0.25);
    let full_map = noise_map_with(&img, &whole, scale).unwrap();
    for p in pairs.pairs() {
        assert_eq!(p.original, img.crop(p.x, p.y, 32, 32));
        assert_eq!(p.compressed, whole.crop(p.x, p.y, 32, 32));
        let patch_map = noise_map_with(&p.original, &p.compressed, scale).unwrap();
        assert_eq!(patch_map, full_map.crop(p.x, p.y, 32, 32));
    }
}

#[test]
fn enhancement_training_needs_matching_images() {
    let t = trained();
    let cfg = TrainConfig {
        lambda: 0.01,
        ..quick(Target::EnhCodec, 1)
    };
    assert!(matches!(train_enh_on(&[], &cfg, &t.base), Err(Error::EmptyDataset(_))));
}
