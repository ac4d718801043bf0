use std::sync::Arc;

use splatstream::gaussian::rasterize;
use splatstream::metrics::psnr;
use splatstream::stages::{
    ConstantDepthStage, InterImpl, MultiViewFrame, Resolution, SpatialImpl, SpatialStage, SrImpl, StageConfig,
    StageSet, SyntheticOracleStage,
};
use splatstream::synthetic::{CameraRing, SyntheticScene, SyntheticSceneSpec};
use splatstream::Error;

fn scene() -> Arc<SyntheticScene> {
    Arc::new(
        SyntheticScene::new(SyntheticSceneSpec {
            num_gaussians: 128,
            frames: 4,
            rig: CameraRing {
                num_cameras: 3,
                width: 64,
                height: 48,
                ..CameraRing::default()
            },
            ..SyntheticSceneSpec::default()
        })
        .unwrap(),
    )
}

#[test]
fn oracle_stage_reproduces_direct_renders() {
    let s = scene();
    let stage = SyntheticOracleStage::new(s.clone());
    let res = Resolution::new(40, 30).unwrap();
    let targets = [s.spec().rig.view_at(12.0).unwrap(), s.spec().rig.view_at(-70.0).unwrap()];
    for t in 0..4 {
        let out = stage.run(&s.input_frame(t).unwrap(), s.rig(), &targets, res).unwrap();
        assert_eq!(out.rendered.timestamp(), t);
        assert_eq!(out.scene.as_deref(), Some(&s.scene(t)));
        for (v, cam) in out.rendered.views().iter().zip(&targets) {
            assert_eq!(v, &rasterize(&s.scene(t), cam, 40, 30).unwrap());
        }
    }
}

#[test]
fn constant_depth_reproduces_its_source_view() {
    let s = scene();
    let stage = ConstantDepthStage::new(ConstantDepthStage::DEFAULT_DEPTH).unwrap();
    let frame = s.input_frame(0).unwrap();
    let res = Resolution::new(64, 48).unwrap();
    let out = stage.run(&frame, s.rig(), &s.rig()[..1], res).unwrap();
    assert_eq!(out.scene.as_ref().unwrap().len(), 64 * 48);
    let db = psnr(&out.rendered.views()[0], &frame.views()[0]).unwrap();
    assert!(db >= 30.0, "same-pose re-render at {db:.2} dB");
}

#[test]
fn spatial_stage_checks_its_inputs() {
    let s = scene();
    let stage = SyntheticOracleStage::new(s.clone());
    let frame = s.input_frame(0).unwrap();
    let res = Resolution::new(8, 8).unwrap();
    assert!(stage.run(&frame, &s.rig()[..2], &s.rig()[..1], res).is_err());
    assert!(stage.run(&frame, s.rig(), &[], res).is_err());
    assert!(MultiViewFrame::new(0, vec![frame.views()[0].clone()]).is_err());
}

#[test]
fn config_selects_implementations() {
    let s = scene();
    let set = StageSet::from_config(
        &StageConfig {
            spatial: SpatialImpl::ConstantDepth,
            ..StageConfig::default()
        },
        None,
    )
    .unwrap();
    assert_eq!((set.spatial.name(), set.inter.name(), set.sr.name()), ("constant_depth", "blend", "bicubic"));
    assert_eq!(StageSet::from_config(&StageConfig::default(), Some(s)).unwrap().spatial.name(), "oracle");
    let missing = StageConfig {
        inter: InterImpl::External,
        spatial: SpatialImpl::ConstantDepth,
        ..StageConfig::default()
    };
    assert!(matches!(StageSet::from_config(&missing, None), Err(Error::Config { ref key, .. }) if key == "inter.endpoint"));
    assert!(matches!("lanczos".parse::<SrImpl>(), Err(Error::Config { ref key, .. }) if key == "sr.impl"));
}
