#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cvsig/gradcheck.hpp"
#include "cvsig/model.hpp"
#include "helpers.hpp"

using namespace cvsig;
using namespace cvsig::model;

namespace {

ModelConfig tiny_config(std::size_t s = 4) {
  ModelConfig c;
  c.signature_size = s;
  c.hr_block = {1, 4, 2, {1, 2, 4}};
  c.activity_block = {3, 3, 2, {1, 2, 4}};
  c.attention_dim = 3;
  c.decoder_hidden = 5;
  return c;
}

// Same parameters plus an untied copy of the activity block under "w2dec".
ModelParams with_untied_copy(const ModelParams& m) {
  ModelParams out = m;
  for (const auto& p : m.params) {
    if (p.name.rfind("w2.", 0) == 0) out.params.add("w2dec." + p.name.substr(3), p.value);
  }
  return out;
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
  const ModelConfig c;
  CHECK(c.parameter_count() == 49089);
  CHECK(c.decoder_unique_parameter_count() == 801);
  const auto m = init_model(32, 1);
  CHECK(m.params.scalar_count() == 49089);
  for (std::size_t s : {4, 8, 64}) CHECK(init_model(s, 1).params.scalar_count() == ModelConfig::with_signature_size(s).parameter_count());
}

TEST_CASE("receptive field is 128 minutes") {
  CHECK(receptive_field(ModelConfig{}.hr_block) == 128);
  CHECK(receptive_field(ModelConfig{}.activity_block) == 128);
}

TEST_CASE("initialisation is deterministic, zero biases, bounded weights") {
  const auto a = init_model(8, 5);
  const auto b = init_model(8, 5);
  CHECK(a.params == b.params);
  CHECK_FALSE(init_model(8, 6).params == a.params);
  const auto& bias = a.params[*a.params.find("w1.l0.filter.b")].value;
  for (double v : bias.data()) CHECK(v == 0.0);
  // Glorot bound for the [32 x 32 x 2] layer weights
  const double limit = std::sqrt(6.0 / (64.0 + 64.0));
  for (double v : a.params[*a.params.find("w1.l0.filter.w")].value.data()) CHECK(std::abs(v) <= limit);
  CHECK_THROWS(init_model(0, 1));
}

TEST_CASE("wavenet block is causal with a 128-minute receptive field") {
  const auto m = init_model(8, 2);
  std::mt19937_64 rng(1);
  const std::size_t T = 300, probe = 250;
  Tensor x = testing::random_tensor({1, T}, rng);
  auto block_out = [&](const Tensor& input) {
    ad::Graph g(m.params);
    return wavenet_block(g, kHrBlock, m.config.hr_block, g.constant(input)).value();
  };
  const Tensor base = block_out(x);
  Tensor future = x;
  for (std::size_t t = probe + 1; t < T; ++t) future[t] += 5.0;
  const Tensor f = block_out(future);
  const std::size_t F = base.dim(0);
  for (std::size_t c = 0; c < F; ++c) {
    for (std::size_t t = 0; t <= probe; ++t) REQUIRE(f.at(c, t) == base.at(c, t));
  }
  Tensor far = x;
  far[probe - 128] += 5.0;  // just outside the field
  const Tensor g1 = block_out(far);
  for (std::size_t c = 0; c < F; ++c) CHECK(g1.at(c, probe) == base.at(c, probe));
  Tensor near = x;
  near[probe - 127] += 5.0;  // oldest minute inside the field
  const Tensor g2 = block_out(near);
  double diff = 0.0;
  for (std::size_t c = 0; c < F; ++c) diff += std::abs(g2.at(c, probe) - base.at(c, probe));
  CHECK(diff > 0.0);
}

TEST_CASE("decoder predictions ignore future activity") {
  const auto m = init_model(8, 3);
  const auto s = testing::random_series(400, 7);
  const auto sig = encode(m, s).signature;
  const auto base = decode(m, s.activity, sig);
  Tensor act = s.activity;
  for (std::size_t t = 201; t < 400; ++t) act.at(0, t) = 1.0;
  const auto changed = decode(m, act, sig);
  for (std::size_t t = 0; t <= 200; ++t) REQUIRE(changed[t] == base[t]);
}

TEST_CASE("attention weights form a distribution") {
  const auto m = init_model(16, 4);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = encode(m, testing::random_series(500, seed));
    double total = 0.0;
    for (double a : r.attention) {
      CHECK(a >= 0.0);
      total += a;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(r.signature.values.size() == 16);
    CHECK(r.attention.size() == 500);
  }
}

TEST_CASE("tied activity-block gradient equals the sum of untied copies") {
  const auto tied = init_model(tiny_config(), 11);
  const auto untied = with_untied_copy(tied);
  const auto s = testing::random_series(90, 5);
  auto ft = forward_loss(tied, s);
  auto fu = forward_loss(untied, s, ForwardOptions{"w2dec"});
  CHECK(ft.value() == doctest::Approx(fu.value()).epsilon(1e-14));
  const auto gt = ft.graph->backward(ft.loss);
  const auto gu = fu.graph->backward(fu.loss);
  double worst = 0.0;
  for (std::size_t i = 0; i < tied.params.size(); ++i) {
    const auto& name = tied.params[i].name;
    if (name.rfind("w2.", 0) != 0) continue;
    const auto j = *untied.params.find("w2dec." + name.substr(3));
    for (std::size_t k = 0; k < gt[i].size(); ++k) worst = std::max(worst, std::abs(gt[i][k] - (gu[i][k] + gu[j][k])));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("small model passes the gradient check") {
  const auto m = init_model(tiny_config(3), 8);
  auto fl = forward_loss(m, testing::random_series(40, 9));
  const auto report = ad::finite_diff_check(*fl.graph, fl.loss, 1e-4, 1e-5);
  for (const auto& e : report.entries) {
    INFO(e.name << " " << e.relative_error);
    CHECK(e.passed);
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dir = testing::tmp_dir("checkpoint");
  const auto m = init_model(8, 21);
  save_checkpoint(dir / "c.json", m);
  const auto back = load_checkpoint(dir / "c.json");
  CHECK(back.params == m.params);
  CHECK(back.config.signature_size == 8);
  const auto s = testing::random_series(200, 3);
  CHECK(forward_loss(back, s).value() == forward_loss(m, s).value());

  std::ofstream(dir / "bad.json") << "{\"format\": \"cvsig-checkpoint\", \"version\": 1";
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "bad.json"), doctest::Contains("corrupt checkpoint"), std::runtime_error);
  std::string text;
  {
    std::ifstream in(dir / "c.json");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto pos = text.find("w1.lift.b");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 9, "w9.lift.b");
  std::ofstream(dir / "renamed.json") << text;
  CHECK_THROWS_AS(load_checkpoint(dir / "renamed.json"), std::runtime_error);
  CHECK_THROWS(load_checkpoint(dir / "absent.json"));
}

TEST_CASE("signature CSV round trip") {
  const auto dir = testing::tmp_dir("signatures");
  std::vector<Signature> sigs = {{{0.1, -2.5, 3.0}, "P1", "w1"}, {{1e-9, 0.0, 7.25}, "P2", "w1"}};
  write_signatures_csv(dir / "s.csv", sigs);
  const auto back = read_signatures_csv(dir / "s.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].values == sigs[1].values);
  CHECK(back[0].person_id == "P1");
}

TEST_CASE("decode rejects mismatched signatures") {
  const auto m = init_model(8, 1);
  const auto s = testing::random_series(50, 1);
  CHECK_THROWS(decode(m, s.activity, Signature{{1.0, 2.0}, "x", "w"}));
}
