#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "handover/intent_model.hpp"
#include "handover/labels.hpp"
#include "test_util.hpp"

using namespace handover;

namespace {

ModelShape tiny_shape(int n = 2, int m = 3, int hidden = 8) {
  ModelShape s;
  s.hidden_dim = hidden;
  s.grid.n = n;
  s.grid.m = m;
  return s;
}

TrainingSequence random_sequence(std::mt19937_64& rng, const GridSpec& g, int steps) {
  TrainingSequence seq;
  for (int t = 0; t < steps; ++t) {
    FeatureVector x{};
    for (auto& v : x) v = testutil::uniform(rng, -1, 1);
    seq.inputs.push_back(x);
    Heatmap l(g);
    for (auto& v : l.values()) v = testutil::uniform(rng, 0, 1);
    seq.labels.push_back(l);
  }
  return seq;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("zero parameters give one half everywhere") {
  IntentModel model(ModelShape{});
  FeatureVector x{};
  x.fill(0.3);
  const auto out = forward(model, x, nullptr);
  CHECK(out.heatmap.grid().n == 5);
  CHECK(out.heatmap.grid().m == 10);
  for (double v : out.heatmap.values()) CHECK(v == 0.5);
}

TEST_CASE("decoder output matches the grid for many shapes") {
  for (int n = 1; n <= 7; ++n) {
    for (int m : {1, 2, 3, 5, 10, 13}) {
      auto model = IntentModel::initialized(tiny_shape(n, m), 3);
      FeatureVector x{};
      const auto out = forward(model, x, nullptr);
      CHECK(out.heatmap.size() == static_cast<std::size_t>(n * m));
      for (double v : out.heatmap.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
    }
  }
}

TEST_CASE("default decoder dimensions") {
  ModelShape s;
  CHECK(s.base_x() == 3);
  CHECK(s.base_y() == 5);
  auto model = IntentModel::initialized(s, 1);
  CHECK(model.tensor("dec.proj_w").dims == std::vector<int>{16 * 3 * 5, 64});
  CHECK(model.tensor("dec.deconv_w").dims == std::vector<int>{16, 8, 3, 4});
  CHECK(model.tensor("gru.w_z").dims == std::vector<int>{64, 28});
}

TEST_CASE("forward is deterministic and causal") {
  auto model = IntentModel::initialized(ModelShape{}, 7);
  std::mt19937_64 rng(4);
  auto seq = random_sequence(rng, model.grid(), 12);
  const auto full = forward_sequence(model, seq.inputs);
  const auto again = forward_sequence(model, seq.inputs);
  std::vector<FeatureVector> prefix(seq.inputs.begin(), seq.inputs.begin() + 5);
  const auto head = forward_sequence(model, prefix);
  for (std::size_t t = 0; t < full.size(); ++t) {
    for (std::size_t k = 0; k < full[t].size(); ++k) CHECK(full[t].values()[k] == again[t].values()[k]);
  }
  for (std::size_t t = 0; t < head.size(); ++t) {
    for (std::size_t k = 0; k < head[t].size(); ++k) CHECK(head[t].values()[k] == full[t].values()[k]);
  }
}

TEST_CASE("input and hidden sizes are checked") {
  auto model = IntentModel::initialized(ModelShape{}, 1);
  std::vector<double> short_input(27, 0.0);
  CHECK_THROWS_AS(forward(model, short_input, nullptr), Error);
  FeatureVector x{};
  HiddenState wrong(3, 0.0);
  CHECK_THROWS_AS(forward(model, x, &wrong), Error);
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(21);
  const ModelShape shape = tiny_shape();
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    auto model = IntentModel::initialized(shape, 100 + draw);
    for (auto& p : model.params()) p += testutil::uniform(rng, -0.5, 0.5);
    const auto seq = random_sequence(rng, shape.grid, 3 + draw % 4);

    std::vector<double> grad(model.param_count(), 0.0);
    const double loss = sequence_loss_and_gradient(model, seq, grad);
    CHECK(loss == doctest::Approx(sequence_loss(forward_sequence(model, seq.inputs), seq.labels)).epsilon(1e-12));

    const double h = 1e-5;
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < model.param_count(); ++i) {
      const double keep = model.params()[i];
      model.params()[i] = keep + h;
      const double up = sequence_loss_and_gradient(model, seq, {});
      model.params()[i] = keep - h;
      const double down = sequence_loss_and_gradient(model, seq, {});
      model.params()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      diff2 += (numeric - grad[i]) * (numeric - grad[i]);
      norm2 += std::max(numeric * numeric, grad[i] * grad[i]);
    }
    const double rel = std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12);
    worst = std::max(worst, rel);
  }
  MESSAGE("worst relative gradient error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("save and load are bit exact") {
  auto model = IntentModel::initialized(tiny_shape(5, 10, 16), 9);
  const auto path = temp_file("handover_model_roundtrip.bin");
  model.save(path);
  const auto back = IntentModel::load(path);
  REQUIRE(back.param_count() == model.param_count());
  for (std::size_t i = 0; i < model.param_count(); ++i) CHECK(back.params()[i] == model.params()[i]);
  CHECK(back.grid() == model.grid());
  CHECK(back.shape().hidden_dim == 16);
  REQUIRE(back.layout().size() == model.layout().size());
  for (std::size_t i = 0; i < model.layout().size(); ++i) {
    CHECK(back.layout()[i].name == model.layout()[i].name);
    CHECK(back.layout()[i].dims == model.layout()[i].dims);
  }

  // saving the loaded copy reproduces the file byte for byte
  const auto again = temp_file("handover_model_roundtrip2.bin");
  back.save(again);
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(sa.substr(0, 4) == "HOIM");
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}

TEST_CASE("corrupt model files are rejected") {
  auto model = IntentModel::initialized(tiny_shape(), 2);
  const auto path = temp_file("handover_model_bad.bin");
  model.save(path);
  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(is)), {});
  }
  auto write = [&](const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
  };
  write(bytes + "x");
  CHECK_THROWS_AS(IntentModel::load(path), Error);
  write(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(IntentModel::load(path), Error);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write(bad_magic);
  CHECK_THROWS_AS(IntentModel::load(path), Error);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  write(bad_version);
  CHECK_THROWS_AS(IntentModel::load(path), Error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(IntentModel::load(path), Error);
}
