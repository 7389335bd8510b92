use tundra_core::pipeline::Registry;

use crate::{
    BurstAssigner, CameraSplitter, GroupedScoreAverager, ImageFeaturizer, ImageSetAugmenter,
    ImageTransformer, LogisticRegression, LogisticRegressionModel, NetworkModel, VectorAssembler,
};

/// Every stage: the core utilities plus the learners, image and network
/// stages.
pub fn registry() -> Registry {
    let mut r = Registry::with_utilities();
    for f in [
        LogisticRegression::factory(),
        LogisticRegressionModel::factory(),
        VectorAssembler::factory(),
        BurstAssigner::factory(),
        GroupedScoreAverager::factory(),
        CameraSplitter::factory(),
        NetworkModel::factory(),
        ImageTransformer::factory(),
        ImageFeaturizer::factory(),
        ImageSetAugmenter::factory(),
    ] {
        r.register(f).expect("stage names are distinct");
    }
    r
}
