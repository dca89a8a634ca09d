#include <gtest/gtest.h>

#include "edutier/persistence.hpp"
#include "support.hpp"

using namespace edutier;
using namespace testing_support;

namespace {

const std::vector<Hyperparams> kConfigs{KnnParams{5},
                                        NaiveBayesParams{1e-3},
                                        SvmParams{10.0, 30},
                                        TreeParams{6, 2},
                                        ForestParams{20, TreeParams{6, 1}, FeatureSubsample::sqrt, true}};

}  // namespace

TEST(Persistence, RoundTripPredictionsEqual) {
  Rng rng(1);
  const auto train = signal_matrix(rng, 200, 4);
  const auto probe = random_matrix(rng, 1000, 4);
  const auto dir = scratch_dir("persistence");
  for (const auto& hp : kConfigs) {
    ModelBundle b{fit(hp, train, 17), std::nullopt};
    const auto path = dir / (family_key(family_of(hp)) + ".json");
    save_model(b, path);
    const auto back = load_model(path);
    EXPECT_EQ(back.model.family(), family_of(hp));
    EXPECT_EQ(back.model.feature_names, train.column_names);
    EXPECT_EQ(back.model.seed, 17u);
    EXPECT_EQ(describe(back.model.hyperparams()), describe(hp));
    EXPECT_EQ(predict(back.model, probe), predict(b.model, probe)) << describe(hp);
    // serialising the reloaded model gives the same document
    EXPECT_EQ(model_to_json(back).dump(), model_to_json(b).dump());
  }
}

TEST(Persistence, TransformTravelsWithModel) {
  auto cfg = default_generator_config();
  cfg.n = 120;
  const Dataset ds = generate_synthetic(cfg);
  auto [t, m] = fit_transform(ds, {"gender", "java", "attendance"});
  m.labels = derive_labels(ds);
  ModelBundle b{fit(KnnParams{3}, m, 1), t};
  const auto path = scratch_dir("persistence-transform") / "m.json";
  save_model(b, path);
  const auto back = load_model(path);
  ASSERT_TRUE(back.transform.has_value());
  EXPECT_EQ(*back.transform, t);
  EXPECT_EQ(apply_transform(*back.transform, ds), apply_transform(t, ds));
}

TEST(Persistence, RejectsForeignDocuments) {
  const auto dir = scratch_dir("persistence-bad");
  io::write_file(dir / "a.json", "{\"format\": \"something-else\", \"version\": 1}");
  EXPECT_THROW(load_model(dir / "a.json"), DataError);
  io::write_file(dir / "b.json", "not json");
  EXPECT_THROW(load_model(dir / "b.json"), DataError);
  EXPECT_THROW(load_model(dir / "missing.json"), DataError);

  Rng rng(2);
  const auto m = signal_matrix(rng, 30, 2);
  auto j = model_to_json({fit(TreeParams{3, 1}, m, 1), std::nullopt});
  j["version"] = 99;
  io::write_file(dir / "c.json", j.dump());
  EXPECT_THROW(load_model(dir / "c.json"), DataError);

  j = model_to_json({fit(TreeParams{3, 1}, m, 1), std::nullopt});
  ASSERT_GE(j["state"]["tree"][0][0].get<int>(), 0);  // root is a split
  j["state"]["tree"][0][2] = 1000;  // left child index
  io::write_file(dir / "d.json", j.dump());
  EXPECT_THROW(load_model(dir / "d.json"), DataError);
}

TEST(Persistence, StableBytes) {
  Rng rng(3);
  const auto m = signal_matrix(rng, 80, 3);
  const auto dir = scratch_dir("persistence-bytes");
  for (const auto& hp : kConfigs) {
    save_model({fit(hp, m, 2), std::nullopt}, dir / "a.json");
    save_model({fit(hp, m, 2), std::nullopt}, dir / "b.json");
    EXPECT_EQ(io::read_file(dir / "a.json"), io::read_file(dir / "b.json"));
  }
}
