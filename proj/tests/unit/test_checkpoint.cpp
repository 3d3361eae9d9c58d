#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "shapecomp/checkpoint.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/mesh_io.hpp"
#include "testutil.hpp"

using namespace shapecomp;
namespace fs = std::filesystem;

namespace {

ModelParams sample_params() {
  Architecture arch;
  arch.vertex_count = 42;
  arch.latent_size = 5;
  ModelParams p = init_model(arch, icosphere(1).topology(), 3);
  CounterRng rng(4);
  for (auto& [name, t] : p.buffers()) *t = testutil::random_tensor(t->rows(), t->cols(), rng);
  return p;
}

CheckpointError::Reason load_reason(const fs::path& path) {
  try {
    load_model_params(path);
  } catch (const CheckpointError& e) {
    return e.reason();
  }
  ADD_FAILURE() << "no error";
  return CheckpointError::Reason::kCorrupt;
}

}  // namespace

TEST(Checkpoint, RoundTripBitwise) {
  const auto dir = testutil::temp_dir("ckpt_roundtrip");
  const ModelParams p = sample_params();
  save_model(p, dir / "model.json");
  EXPECT_TRUE(fs::exists(checkpoint_data_path(dir / "model.json")));
  const ModelParams q = load_model_params(dir / "model.json");
  EXPECT_EQ(q.fingerprint, p.fingerprint);
  EXPECT_EQ(q.arch.latent_size, 5);
  const auto a = p.parameters();
  const auto b = q.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].first, b[k].first);
    EXPECT_EQ(*a[k].second, *b[k].second);
  }
  const auto ba = p.buffers();
  const auto bb = q.buffers();
  for (std::size_t k = 0; k < ba.size(); ++k) EXPECT_EQ(*ba[k].second, *bb[k].second);
}

TEST(Checkpoint, ManifestDescribesTensors) {
  const auto dir = testutil::temp_dir("ckpt_manifest");
  save_model(sample_params(), dir / "model.json");
  const auto j = nlohmann::json::parse(read_text_file(dir / "model.json"));
  EXPECT_EQ(j["format_version"], kCheckpointVersion);
  EXPECT_EQ(j["tensor_index"][0]["name"], "encoder.conv0.weight");
  EXPECT_TRUE(j.contains("normalization_statistics"));
}

TEST(Checkpoint, TruncatedPayload) {
  const auto dir = testutil::temp_dir("ckpt_trunc");
  save_model(sample_params(), dir / "model.json");
  const fs::path bin = checkpoint_data_path(dir / "model.json");
  fs::resize_file(bin, fs::file_size(bin) / 2);
  EXPECT_EQ(load_reason(dir / "model.json"), CheckpointError::Reason::kCorrupt);
}

TEST(Checkpoint, FlippedByte) {
  const auto dir = testutil::temp_dir("ckpt_flip");
  save_model(sample_params(), dir / "model.json");
  const fs::path bin = checkpoint_data_path(dir / "model.json");
  std::fstream f(bin, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(100);
  f.put('\x5a');
  f.close();
  EXPECT_EQ(load_reason(dir / "model.json"), CheckpointError::Reason::kCorrupt);
}

TEST(Checkpoint, GarbledManifest) {
  const auto dir = testutil::temp_dir("ckpt_garbled");
  save_model(sample_params(), dir / "model.json");
  const std::string text = read_text_file(dir / "model.json");
  write_text_atomic(dir / "model.json", text.substr(0, text.size() / 2));
  EXPECT_EQ(load_reason(dir / "model.json"), CheckpointError::Reason::kCorrupt);
}

TEST(Checkpoint, VersionMismatch) {
  const auto dir = testutil::temp_dir("ckpt_version");
  save_model(sample_params(), dir / "model.json");
  auto j = nlohmann::json::parse(read_text_file(dir / "model.json"));
  j["format_version"] = kCheckpointVersion + 1;
  write_text_atomic(dir / "model.json", j.dump());
  EXPECT_EQ(load_reason(dir / "model.json"), CheckpointError::Reason::kVersion);
}

TEST(Checkpoint, FingerprintMismatch) {
  const auto dir = testutil::temp_dir("ckpt_fp");
  save_model(sample_params(), dir / "model.json");
  EXPECT_NO_THROW(load_model(dir / "model.json", icosphere(1).topology_ptr()));
  try {
    load_model(dir / "model.json", icosphere(2).topology_ptr());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.reason(), CheckpointError::Reason::kFingerprint);
  }
}

TEST(Checkpoint, MissingFile) {
  EXPECT_THROW(load_model_params("/nonexistent/model.json"), Error);
}
