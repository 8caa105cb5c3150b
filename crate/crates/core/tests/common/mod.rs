//! A small generated corpus and noise bank shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use ncnn::data::*;

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub corpus: PathBuf,
    pub noise: PathBuf,
    pub manifest: Manifest,
}

/// Six speakers, one take each, two of them held out for testing.
pub fn small_plan() -> SplitPlan {
    SplitPlan {
        test_speakers: 2,
        ..SplitPlan::default()
    }
}

pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus");
        let noise = dir.path().join("noise");
        let spec = CorpusSpec {
            speakers: 6,
            takes: 1,
            ..CorpusSpec::default()
        };
        assert_eq!(generate_corpus(&corpus, &spec).unwrap(), 66);
        generate_noise_bank(
            &noise,
            &NoiseBankSpec {
                seconds: 3.0,
                ..NoiseBankSpec::default()
            },
        )
        .unwrap();
        let manifest = build_splits(&corpus, &noise, &small_plan()).unwrap();
        Fixture {
            _dir: dir,
            corpus,
            noise,
            manifest,
        }
    })
}

pub fn tiny_architecture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.toml").display().to_string()
}

/// Features matching the tiny architecture's 32x32 input.
pub fn tiny_features() -> FeatureConfig {
    FeatureConfig {
        frames: 32,
        bins: 32,
        ..FeatureConfig::default()
    }
}
