// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/checkpoint.h"

#include <gtest/gtest.h>

#include <filesystem>

#include "ligdoctor/error.h"
#include "ligdoctor/io.h"

namespace ligdoctor {
namespace {

Model sample_model() {
  NetworkShape shape;
  shape.code_width = 4;
  shape.hidden = 3;
  shape.layers = 2;
  shape.cell = CellKind::kLstmGoogle;
  shape.extras.duration = true;
  shape.embedding_dim = 2;
  SeededRng rng(71);
  Model m;
  m.params = init_params(shape, rng);
  m.vocab = CodeVocabulary({"1", "2", "7", "9"});
  m.descriptions = {{"1", "Tuberculosis"}};
  m.normalization = {120.5, 8760.0};
  return m;
}

TEST(Checkpoint, ByteRoundTrip) {
  const Model m = sample_model();
  const std::string bytes = serialize_model(m);
  EXPECT_EQ(bytes.substr(0, 8), "LIGDOCKP");
  const Model back = deserialize_model(bytes);
  EXPECT_EQ(back, m);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(back.describe(0), "Tuberculosis");
  EXPECT_EQ(back.describe(2), "7");
}

TEST(Checkpoint, FileRoundTripIsAtomic) {
  const auto dir = std::filesystem::temp_directory_path() / "ligdoctor_checkpoint_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.bin").string();
  save_model(path, sample_model());
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_EQ(load_model(path), sample_model());
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptContainers) {
  const std::string bytes = serialize_model(sample_model());
  EXPECT_THROW(deserialize_model(""), InputError);
  EXPECT_THROW(deserialize_model("NOTMAGIC" + bytes.substr(8)), InputError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), InputError);
  EXPECT_THROW(deserialize_model(bytes + "x"), InputError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize_model(bad_version), InputError);
  EXPECT_THROW(load_model("/nonexistent/model.bin"), InputError);
}

TEST(Io, AtomicWriteReplacesContents) {
  const auto path = (std::filesystem::temp_directory_path() / "ligdoctor_io_test.txt").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_file(path), "second");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace ligdoctor
