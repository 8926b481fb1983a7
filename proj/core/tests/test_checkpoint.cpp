#include "rovtl/checkpoint.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace rovtl;
using namespace rovtl::checkpoint;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / "rovtl_test_checkpoint";
  TempDir() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("finetune checkpoint round-trips bit for bit") {
  TempDir tmp;
  const synth::SynthDataset g = synth::generate(rovtl::testing::tiny_synth(8));
  finetune::RovtlModel model = finetune::RovtlModel::create(rovtl::testing::tiny_model(8), *g.data.schema, 3);
  model.tabular.fit_standardization(g.data.samples);
  config::KeyValues extra;
  extra.set("recipe", "rovtl");
  save(capture(model, g.data.schema, extra), tmp.path / "a.ckpt");
  const Checkpoint loaded = read(tmp.path / "a.ckpt");
  CHECK(loaded.kind == ModelKind::finetune);
  CHECK(loaded.config.get_string("recipe", "") == "rovtl");
  save(loaded, tmp.path / "b.ckpt");
  CHECK(slurp(tmp.path / "a.ckpt") == slurp(tmp.path / "b.ckpt"));

  const finetune::RovtlModel back = load_finetune(loaded, g.data.schema);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    CHECK(finetune::predict(g.data.images[i], g.data.samples[i], back) ==
          finetune::predict(g.data.images[i], g.data.samples[i], model));
  }
  save(capture(back, g.data.schema, extra), tmp.path / "c.ckpt");
  CHECK(slurp(tmp.path / "a.ckpt") == slurp(tmp.path / "c.ckpt"));
  CHECK_THROWS(load_pretrain(loaded, g.data.schema));
  CHECK_THROWS(loaded.tensor("no.such.tensor"));
}

TEST_CASE("pretrain checkpoint: strict and transfer loading") {
  TempDir tmp;
  const synth::SynthDataset g = synth::generate(rovtl::testing::tiny_synth(8));
  pretrain::PretrainModel model = pretrain::PretrainModel::create(rovtl::testing::tiny_encoders(8), *g.data.schema, 4);
  model.tabular.fit_standardization(g.data.samples);
  save(capture(model, g.data.schema), tmp.path / "p.ckpt");
  const Checkpoint c = read(tmp.path / "p.ckpt");
  CHECK(c.kind == ModelKind::pretrain);

  const pretrain::PretrainModel same = load_pretrain(c, g.data.schema);
  ag::NoGradGuard guard;
  CHECK(same.tabular.encode(g.data.samples[0]).pooled.value() == model.tabular.encode(g.data.samples[0]).pooled.value());

  synth::SynthConfig wider = rovtl::testing::tiny_synth(8);
  wider.noise = 3;
  const synth::SynthDataset other = synth::generate(wider);
  CHECK_THROWS(load_pretrain(c, other.data.schema));

  const pretrain::PretrainModel moved = load_pretrain(c, other.data.schema, LoadMode::transfer, other.data.samples);
  CHECK(moved.tabular.name_table().value() == model.tabular.name_table().value());
  CHECK(moved.tabular.standardization().count("noise_2") == 1);
  CHECK(moved.tabular.standardization().at("complementary_0").mean ==
        model.tabular.standardization().at("complementary_0").mean);
  CHECK(moved.tabular.encode(other.data.samples[0]).tokens.rows() == 8);
}

TEST_CASE("damaged files are rejected") {
  TempDir tmp;
  const synth::SynthDataset g = synth::generate(rovtl::testing::tiny_synth(4));
  const pretrain::PretrainModel model =
      pretrain::PretrainModel::create(rovtl::testing::tiny_encoders(8), *g.data.schema, 1);
  const fs::path good = tmp.path / "good.ckpt";
  save(capture(model, g.data.schema), good);
  const std::string bytes = slurp(good);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x5a;
  dump(tmp.path / "flipped.ckpt", flipped);
  CHECK_THROWS(read(tmp.path / "flipped.ckpt"));

  std::string versioned = bytes;
  versioned[8] = static_cast<char>(kFormatVersion + 1);
  dump(tmp.path / "version.ckpt", versioned);
  CHECK_THROWS_WITH_AS(read(tmp.path / "version.ckpt"), doctest::Contains("version"), std::runtime_error);

  dump(tmp.path / "short.ckpt", bytes.substr(0, bytes.size() / 3));
  CHECK_THROWS(read(tmp.path / "short.ckpt"));

  dump(tmp.path / "text.ckpt", "hello world, definitely not a model");
  CHECK_THROWS(read(tmp.path / "text.ckpt"));
  CHECK_THROWS(read(tmp.path / "missing.ckpt"));
}
