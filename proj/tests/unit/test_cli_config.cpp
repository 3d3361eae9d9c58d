#include <gtest/gtest.h>

#include "config.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/mesh_io.hpp"
#include "testutil.hpp"

using namespace shapecomp;
using namespace shapecomp::cli;

TEST(CliConfig, DefaultsMatchLibrary) {
  const json t = default_config("train");
  const TrainConfig c = train_config(t["train"], 5);
  EXPECT_EQ(c.epochs, 200);
  EXPECT_EQ(c.batch_size, 20);
  EXPECT_EQ(c.latent_size, 128);
  EXPECT_EQ(c.seed, 5u);
  const CompletionConfig cc = completion_config(default_config("complete")["completion"], 1);
  EXPECT_EQ(cc.iterations, 100);
  EXPECT_EQ(cc.lr_translation, 5e-5);
  const RemeshConfig rc = remesh_config(default_config("remesh")["remesh"], 0);
  EXPECT_EQ(rc.w_edge, 15.0);
}

TEST(CliConfig, UnknownKeysListed) {
  const auto dir = testutil::temp_dir("cli_config");
  write_text_atomic(dir / "c.json", R"({"seed": 1, "bogus": 2, "train": {"epochz": 3}})");
  try {
    resolve_config("train", dir / "c.json", {});
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bogus"), std::string::npos);
    EXPECT_NE(msg.find("train.epochz"), std::string::npos);
  }
}

TEST(CliConfig, FileThenOverrides) {
  const auto dir = testutil::temp_dir("cli_override");
  write_text_atomic(dir / "c.json", R"({"seed": 1, "train": {"epochs": 3, "lr": 0.5}})");
  const json j = resolve_config("train", dir / "c.json", {"train.epochs=7", "train.online.enabled=false"});
  EXPECT_EQ(j["seed"], 1);
  EXPECT_EQ(j["train"]["epochs"], 7);
  EXPECT_EQ(j["train"]["lr"], 0.5);
  EXPECT_EQ(j["train"]["online"]["enabled"], false);
  EXPECT_EQ(j["train"]["batch_size"], 20);
}

TEST(CliConfig, OverrideValueTypes) {
  json j = default_config("complete");
  apply_override(j, "completion.chamfer_metric=squared");
  apply_override(j, "initial_latent=[0.5, 1]");
  EXPECT_EQ(j["completion"]["chamfer_metric"], "squared");
  EXPECT_EQ(j["initial_latent"].size(), 2u);
  EXPECT_EQ(completion_config(j["completion"], 0).metric, ChamferMetric::kSquared);
}

TEST(CliConfig, BadOverrides) {
  json j = default_config("train");
  EXPECT_THROW(apply_override(j, "train.nope=1"), ConfigError);
  EXPECT_THROW(apply_override(j, "noequals"), ConfigError);
}

TEST(CliConfig, WrongTypeRejected) {
  json j = default_config("complete");
  j["completion"]["chamfer_metric"] = "manhattan";
  EXPECT_THROW(completion_config(j["completion"], 0), ConfigError);
  j = default_config("train");
  j["train"]["epochs"] = "many";
  EXPECT_THROW(train_config(j["train"], 0), ConfigError);
}

TEST(CliConfig, PerturbationRoundTrip) {
  PerturbationSpec p;
  p.low_index = 2;
  p.high_max = 1.2;
  const PerturbationSpec q = perturbation_spec(perturbation_json(p), 9);
  EXPECT_EQ(q.low_index, 2);
  EXPECT_EQ(q.high_max, 1.2);
  EXPECT_EQ(q.seed, 9u);
}

TEST(CliConfig, DeformationView) {
  json j = default_config("benchmark");
  j["deformation"]["view"] = {1.0, 0.0, 0.0};
  EXPECT_EQ(deformation_spec(j["deformation"]).view, Vec3::UnitX());
}

TEST(CliConfig, UnknownCommand) {
  EXPECT_THROW(default_config("nope"), Error);
}
