#include <doctest.h>

#include <fstream>

#include "gmlp/error.hpp"
#include "gmlp/model.hpp"
#include "support.hpp"

using namespace gmlp;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.hidden = 16;
  c.spatial_dim = 8;
  c.channel_dim = 32;
  c.layers = 2;
  return c;
}

}  // namespace

TEST_CASE("enum names round trip") {
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  for (Placement p : kAllPlacements) CHECK(parse_placement(to_string(p)) == p);
  for (BlockToggle t : kAllToggles) CHECK(parse_block_toggle(to_string(t)) == t);
  CHECK_THROWS_AS(parse_variant("transformer"), ValidationError);
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.hidden = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ModelConfig{};
  c.edge_types = 5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ModelConfig{};
  c.joints = 5;  // h36m_17 has 17
  CHECK_THROWS_AS(GraphMLPModel{c}, ValidationError);
}

TEST_CASE("closed-form parameter count matches the instantiated model") {
  for (Variant v : kAllVariants) {
    for (Placement p : kAllPlacements) {
      for (BlockToggle t : kAllToggles) {
        for (bool video_ln : {false, true}) {
          ModelConfig c = small_config();
          c.variant = v;
          c.placement = p;
          c.block_toggle = t;
          c.video_ln = video_ln;
          c.frames = 3;
          CAPTURE(to_string(v));
          CAPTURE(to_string(p));
          CAPTURE(to_string(t));
          CHECK(GraphMLPModel(c).parameter_count() == count_params(c));
        }
      }
    }
  }
}

TEST_CASE("default parameter count and frame delta") {
  ModelConfig c;
  CHECK(count_params(c) == 9478044);
  // Hand count per layer: LN 2*17 + spatial MLP 17*256+256+256*17+17 + GCN 4*512*512+512
  // + LN 2*512 + channel MLP 512*1024+1024+1024*512+512 + GCN 4*512*512+512.
  const std::uint64_t layer = 34 + (17 * 256 + 256 + 256 * 17 + 17) + (4 * 512 * 512 + 512) + 1024 +
                              (512 * 1024 + 1024 + 1024 * 512 + 512) + (4 * 512 * 512 + 512);
  CHECK(count_params(c) == (2 * 512 + 512) + 3 * layer + (512 * 3 + 3));
  for (std::size_t t : {27u, 81u, 243u}) {
    ModelConfig v = c;
    v.frames = t;
    CHECK(count_params(v) - count_params(c) == (2 * t - 2) * 512);
  }
  ModelConfig deep = c;
  deep.layers = 2;
  CHECK(count_params(deep) == doctest::Approx(6.33e6).epsilon(0.01));
}

TEST_CASE("forward shapes and batching") {
  ModelConfig c = small_config();
  c.frames = 3;
  GraphMLPModel m(c);
  testing::Rng rng(1);
  const Tensor batch = testing::random_tensor(rng, {4, 3, 17, 2});
  const Tensor y = forward(batch, m);
  CHECK(y.shape() == Shape{4, 17, 3});
  for (std::size_t b = 0; b < 4; ++b) {
    const Tensor one({3, 17, 2}, std::vector<double>(batch.data().begin() + b * 102, batch.data().begin() + (b + 1) * 102));
    const Tensor single = forward(one, m);
    CHECK(single.shape() == Shape{17, 3});
    CHECK(testing::max_abs_diff(single.data(), y.data().subspan(b * 51, 51)) < 1e-13);
  }
  CHECK_THROWS_AS(forward(Tensor::zeros({1, 17, 2}), m), ShapeError);
}

TEST_CASE("embedding concatenates frames frame-major") {
  ModelConfig c = small_config();
  c.frames = 2;
  GraphMLPModel m(c);
  testing::Rng rng(2);
  const Tensor in = testing::random_tensor(rng, {2, 17, 2});
  const Tensor e = embed(in, m);
  const auto ref = testing::linear(testing::embed_input(in.data(), 2, 17), m.embedding.weight, &m.embedding.bias);
  for (std::size_t n = 0; n < 17; ++n) {
    for (std::size_t k = 0; k < 16; ++k) CHECK(e.at({n, k}) == doctest::Approx(ref[n][k]).epsilon(1e-14));
  }
}

TEST_CASE("initialisation is deterministic per seed") {
  ModelConfig c = small_config();
  c.seed = 5;
  const GraphMLPModel a(c), b(c);
  c.seed = 6;
  const GraphMLPModel d(c);
  const auto pa = a.parameters(), pb = b.parameters(), pd = d.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
    differs = differs || !std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pd[i].tensor.data().begin());
    const double bound = 1.0 / std::sqrt(static_cast<double>(pa[i].tensor.dim(0)));
    if (pa[i].name.ends_with(".weight") || pa[i].name.find(".kernel") != std::string::npos) {
      for (double v : pa[i].tensor.data()) CHECK(std::abs(v) <= bound);
    }
  }
  CHECK(differs);
  CHECK(pa.front().name == "embedding.weight");
  CHECK(pa.back().name == "head.bias");
}

TEST_CASE("mlp_mixer and gcn_only reduce to their reference stacks") {
  testing::Rng rng(3);
  for (Variant v : {Variant::mlp_mixer, Variant::gcn_only}) {
    for (std::size_t frames : {1u, 3u}) {
      ModelConfig c = small_config();
      c.variant = v;
      c.frames = frames;
      c.seed = 9;
      const GraphMLPModel m(c);
      for (int trial = 0; trial < 5; ++trial) {
        const Tensor in = testing::random_tensor(rng, {frames, 17, 2});
        const Tensor y = forward(in, m);
        const auto ref = v == Variant::mlp_mixer ? testing::reference_mlp_mixer(m, in.data())
                                                 : testing::reference_gcn_only(m, in.data());
        for (std::size_t n = 0; n < 17; ++n) {
          for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(y.at({n, k}) - ref[n][k]) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("block toggle removes the matching GCN branch") {
  ModelConfig c = small_config();
  c.block_toggle = BlockToggle::sg_only;
  GraphMLPModel sg(c);
  CHECK(sg.layers[0].spatial_gcn.has_value());
  CHECK_FALSE(sg.layers[0].channel_gcn.has_value());
  c.block_toggle = BlockToggle::cg_only;
  GraphMLPModel cg(c);
  CHECK_FALSE(cg.layers[0].spatial_gcn.has_value());
  CHECK(cg.layers[0].channel_gcn.has_value());
  c.placement = Placement::after_channel;
  GraphMLPModel seq(c);
  CHECK(seq.layers[0].graph_gcn.has_value());
  CHECK_FALSE(seq.layers[0].channel_gcn.has_value());
  c.placement = Placement::parallel_spatial_gcn;
  c.block_toggle = BlockToggle::both;
  GraphMLPModel tok(c);
  CHECK(tok.layers[0].spatial_gcn->kernels[0].shape() == Shape{17, 17});
}

TEST_CASE("FLOP accounting") {
  ModelConfig c;
  const std::uint64_t f1 = count_flops(c);
  CHECK(f1 == 348064768);
  // 3 layers of spatial MLP (2*17*256*512 MACs), channel MLP (2*17*512*1024)
  // and two GCNs (4*17*512*512 + 61*512 each), plus embedding and head.
  const std::uint64_t macs = 3 * (2ull * 17 * 256 * 512 + 2ull * 17 * 512 * 1024 + 2 * (4ull * 17 * 512 * 512 + 61 * 512)) +
                             17 * 2 * 512 + 17 * 512 * 3;
  CHECK(f1 == 2 * macs);
  for (std::size_t t : {27u, 81u, 243u}) {
    ModelConfig v = c;
    v.frames = t;
    CHECK(count_flops(v) - f1 == (t - 1) * 2 * 17 * 2 * 512);
  }
}

TEST_CASE("weight file round trip and corruption") {
  ModelConfig c = small_config();
  c.frames = 3;
  c.video_ln = true;
  c.seed = 4;
  const GraphMLPModel m(c);
  const auto path = testing::temp_path("model_weights.gmlp");
  save_weights(m, path);
  const GraphMLPModel back = load_weights(path);
  CHECK(back.config() == m.config());
  const auto a = m.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }
  CHECK_NOTHROW(load_weights(path, c));

  ModelConfig wider = c;
  wider.hidden = 24;
  try {
    load_weights(path, wider);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("embedding.weight") != std::string::npos);
  }

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto trunc = testing::temp_path("model_truncated.gmlp");
  {
    std::ofstream out(trunc, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
  }
  CHECK_THROWS_AS(load_weights(trunc), FormatError);
  const auto bad = testing::temp_path("model_badmagic.gmlp");
  {
    std::ofstream out(bad, std::ios::binary);
    std::string copy = bytes;
    copy[0] = 'X';
    out << copy;
  }
  CHECK_THROWS_AS(load_weights(bad), FormatError);
  CHECK_THROWS_AS(load_weights(testing::temp_path("missing.gmlp")), IoError);
}
