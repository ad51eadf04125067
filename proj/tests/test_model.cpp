#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "dtcd/losses.hpp"
#include "support/gradcheck.hpp"

using namespace dtcd;
using dtcd::testing::random_tensor;

namespace {

using V = Var<double>;

Tensor<float> random_image(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.f, 1.f);
  Tensor<float> t(std::move(s));
  for (auto& v : t.storage()) v = d(rng);
  return t;
}

void set_all(Var<double>& v, double x) { v.mutable_value().fill(x); }

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---------------------------------------------------------------------------
// squeeze-and-excitation

TEST_CASE("se_recalibrate preserves shape", "[model][se]") {
  ParameterStore<float> store;
  Rng rng(1);
  SqueezeExcite<float> se(store, "se", 64, 16, rng);
  Var<float> f(random_image({1, 64, 32, 32}, 2));
  REQUIRE(se(f).shape() == Shape{1, 64, 32, 32});
}

TEST_CASE("se_recalibrate with zero parameters halves every channel", "[model][se]") {
  ParameterStore<double> store;
  Rng rng(1);
  SqueezeExcite<double> se(store, "se", 8, 4, rng);
  for (auto& e : store.entries()) Var<double>(e.var).mutable_value().fill(0.0);
  std::mt19937_64 g(3);
  V f(random_tensor({2, 8, 5, 5}, g));
  V out = se(f);
  for (std::size_t i = 0; i < out.numel(); ++i) REQUIRE(out.value()[i] == 0.5 * f.value()[i]);
}

TEST_CASE("se_recalibrate matches a single-channel hand computation", "[model][se]") {
  ParameterStore<double> store;
  Rng rng(1);
  SqueezeExcite<double> se(store, "se", 1, 1, rng);
  set_all(se.reduce.weight, 0.5);
  set_all(se.reduce.bias, 0.25);
  set_all(se.expand.weight, -2.0);
  set_all(se.expand.bias, 1.0);
  V f(Tensor<double>({1, 1, 3, 3}, 1.5));
  // pool = 1.5; hidden = relu(0.5*1.5 + 0.25) = 1.0; gate = logistic(-2*1 + 1)
  const double expected = 1.5 * sigmoid_ref(-1.0);
  V out = se(f);
  for (double v : out.value().storage()) REQUIRE(v == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("se reduction must divide the channel count", "[model][se]") {
  ParameterStore<float> store;
  Rng rng(1);
  REQUIRE_THROWS_AS(SqueezeExcite<float>(store, "se", 10, 4, rng), ConfigError);
  EncoderConfig e = EncoderConfig::preset("tiny");
  e.se_reduction = 3;
  REQUIRE_THROWS_AS(e.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// encoder

TEST_CASE("encode follows the stride schedule", "[model][encoder]") {
  NoGradGuard ng;
  SECTION("default preset on 256x256") {
    ParameterStore<float> store;
    Rng rng(1);
    Encoder<float> enc(store, "encoder", EncoderConfig::preset("default"), 3, rng);
    const auto p = enc(Var<float>(random_image({1, 3, 256, 256}, 1)));
    const std::array<std::size_t, 5> sizes{128, 64, 32, 16, 8}, ch{64, 64, 128, 256, 512};
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(p.stages[i].shape() == Shape{1, ch[i], sizes[i], sizes[i]});
  }
  SECTION("tiny preset on 64x64") {
    ParameterStore<float> store;
    Rng rng(1);
    Encoder<float> enc(store, "encoder", EncoderConfig::preset("tiny"), 3, rng);
    const auto p = enc(Var<float>(random_image({2, 3, 64, 64}, 1)));
    const std::array<std::size_t, 5> sizes{32, 16, 8, 4, 2};
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(p.stages[i].dim(2) == sizes[i]);
  }
}

TEST_CASE("encode is deterministic and rejects bad geometry", "[model][encoder]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(4);
  Encoder<float> enc(store, "encoder", EncoderConfig::preset("tiny"), 3, rng);
  Var<float> x(random_image({1, 3, 64, 64}, 9));
  const auto a = enc(x), b = enc(x);
  for (std::size_t i = 0; i < 5; ++i) REQUIRE(a.stages[i].value() == b.stages[i].value());
  REQUIRE_THROWS_AS(enc(Var<float>(Tensor<float>({1, 3, 48, 64}))), ShapeError);
  REQUIRE_THROWS_AS(enc(Var<float>(Tensor<float>({1, 4, 64, 64}))), ShapeError);
}

// ---------------------------------------------------------------------------
// centre block

TEST_CASE("center_spp preserves shape", "[model][spp]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(1);
  CenterSPP<float> spp(store, "center", 512, {1, 2, 3, 6}, rng);
  REQUIRE(spp(Var<float>(random_image({1, 512, 8, 8}, 3))).shape() == Shape{1, 512, 8, 8});
}

TEST_CASE("center_spp pooled branches of a constant map are that constant", "[model][spp]") {
  V f(Tensor<double>({1, 4, 6, 6}, 0.75));
  for (std::size_t b : {1u, 2u, 3u, 6u}) {
    V pooled = adaptive_avg_pool2d(f, b, b);
    for (double v : pooled.value().storage()) REQUIRE(v == Catch::Approx(0.75).epsilon(1e-15));
    V up = upsample_bilinear(pooled, 6, 6);
    for (double v : up.value().storage()) REQUIRE(v == Catch::Approx(0.75).epsilon(1e-15));
  }
}

TEST_CASE("center_spp with one bin matches a 2x2 hand oracle", "[model][spp]") {
  ParameterStore<double> store;
  Rng rng(1);
  CenterSPP<double> spp(store, "center", 2, {1}, rng);
  // identity projection; fuse = [I | I] so out = relu(f + global_mean(f))
  auto& proj = spp.projections()[0];
  proj.weight.mutable_value() = Tensor<double>({2, 2, 1, 1}, {1, 0, 0, 1});
  proj.bias.mutable_value().fill(0);
  spp.fuse().weight.mutable_value() = Tensor<double>({2, 4, 1, 1}, {1, 0, 1, 0, 0, 1, 0, 1});
  spp.fuse().bias.mutable_value().fill(0);
  V f(Tensor<double>({1, 2, 2, 2}, {1, 2, 3, 6, -4, 0, 1, -1}));
  // channel 0 mean 3 -> {4,5,6,9}; channel 1 mean -1 -> relu{-5,-1,0,-2} = 0
  const Tensor<double> expected({1, 2, 2, 2}, {4, 5, 6, 9, 0, 0, 0, 0});
  REQUIRE(max_abs_diff(spp(f).value(), expected) < 1e-14);
}

TEST_CASE("center_spp rejects bins larger than the map", "[model][spp]") {
  ParameterStore<float> store;
  Rng rng(1);
  CenterSPP<float> spp(store, "center", 8, {1, 2, 3, 6}, rng);
  REQUIRE_THROWS_AS(spp(Var<float>(Tensor<float>({1, 8, 4, 4}))), ConfigError);
}

// ---------------------------------------------------------------------------
// dual attention

TEST_CASE("dual_attention is the identity at zero scales", "[model][dam]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(1);
  DualAttention<float> dam(store, "dam", 32, 4096, rng);
  Var<float> f(random_image({2, 32, 16, 16}, 5));
  Var<float> out = dam(f);
  REQUIRE(out.shape() == Shape{2, 32, 16, 16});
  REQUIRE(out.value() == f.value());
}

TEST_CASE("dual_attention affinities are row-stochastic", "[model][dam]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(2);
  DualAttention<float> dam(store, "dam", 16, 4096, rng);
  Var<float> f(random_image({2, 16, 8, 8}, 6));
  for (const auto& a : {dam.position_affinity(f), dam.channel_affinity(f)}) {
    const std::size_t cols = a.shape().back();
    for (std::size_t r = 0; r < a.numel() / cols; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < cols; ++j) s += a.value()[r * cols + j];
      REQUIRE(std::abs(s - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("dual_attention with non-zero scales mixes positions and channels", "[model][dam]") {
  ParameterStore<double> store;
  Rng rng(3);
  DualAttention<double> dam(store, "dam", 8, 64, rng);
  set_all(dam.gamma_position(), 0.3);
  set_all(dam.gamma_channel(), -0.2);
  std::mt19937_64 g(1);
  V f(random_tensor({1, 8, 4, 4}, g));
  V out = dam(f);
  REQUIRE(max_abs_diff(out.value(), f.value()) > 1e-3);
  const Tensor<double> c = random_tensor({1, 8, 4, 4}, g);
  auto fn = [&](const std::vector<V>& in) { return testing::contract(dam(in[0]), c); };
  REQUIRE(testing::max_grad_error(fn, {V(random_tensor({1, 8, 4, 4}, g), true)}) < 1e-5);
}

TEST_CASE("dual_attention enforces the affinity budget", "[model][dam]") {
  ParameterStore<float> store;
  Rng rng(1);
  DualAttention<float> dam(store, "dam", 8, 63, rng);
  REQUIRE_THROWS_AS(dam(Var<float>(Tensor<float>({1, 8, 8, 8}))), ResourceError);
}

// ---------------------------------------------------------------------------
// decoder blocks

TEST_CASE("cd_decoder_block output geometry", "[model][decoder]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(1);
  ChangeDecoderBlock<float> blk(store, "cd", 128, 64, false, SkipFusion::concat, 4096, rng);
  Var<float> d(random_image({1, 128, 32, 32}, 1));
  Var<float> e1(random_image({1, 64, 64, 64}, 2)), e2(random_image({1, 64, 64, 64}, 3));
  REQUIRE(blk(d, e1, e2).shape() == Shape{1, 64, 64, 64});
  SECTION("skip order matters") { REQUIRE(blk(d, e1, e2).value() != blk(d, e2, e1).value()); }
  SECTION("mismatched skips are rejected") {
    REQUIRE_THROWS_AS(blk(d, e1, Var<float>(Tensor<float>({1, 64, 32, 32}))), ShapeError);
    REQUIRE_THROWS_AS(blk(d, Var<float>(Tensor<float>({1, 64, 32, 32})), Var<float>(Tensor<float>({1, 64, 32, 32}))),
                      ShapeError);
  }
}

TEST_CASE("cd_decoder_block matches a hand oracle", "[model][decoder]") {
  ParameterStore<double> store;
  Rng rng(1);
  ChangeDecoderBlock<double> blk(store, "cd", 4, 1, false, SkipFusion::concat, 4096, rng);
  // up: take channel 0, copy to every pixel of the 2x2 output
  blk.up().reduce.weight.mutable_value() = Tensor<double>({1, 4, 1, 1}, {1, 0, 0, 0});
  set_all(blk.up().reduce.bias, 0);
  blk.up().deconv.weight.mutable_value().fill(1.0);
  set_all(blk.up().deconv.bias, 0);
  set_all(blk.up().expand.weight, 1.0);
  set_all(blk.up().expand.bias, 0);
  blk.skip_fuse().weight.mutable_value() = Tensor<double>({1, 2, 1, 1}, {1, 1});
  set_all(blk.skip_fuse().bias, 0);
  V d(Tensor<double>({1, 4, 1, 1}, {0.5, 9, 9, 9}));
  V e1(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}));
  V e2(Tensor<double>({1, 1, 2, 2}, {0.25, -1, 0, 2}));
  // Each 2x2 output pixel of the 4x4/stride-2/pad-1 deconv sees 1 tap of the 1x1 input.
  const Tensor<double> expected({1, 1, 2, 2}, {1.75, 1.5, 3.5, 6.5});
  REQUIRE(max_abs_diff(blk(d, e1, e2).value(), expected) < 1e-14);
}

TEST_CASE("ssn_decoder_block geometry, zero skip and CD equivalence", "[model][decoder]") {
  SECTION("geometry") {
    NoGradGuard ng;
    ParameterStore<float> store;
    Rng rng(1);
    SegDecoderBlock<float> blk(store, "ssn", 128, 64, false, 4096, rng);
    REQUIRE(blk(Var<float>(random_image({1, 128, 32, 32}, 1)), Var<float>(random_image({1, 64, 64, 64}, 2))).shape() ==
            Shape{1, 64, 64, 64});
  }
  SECTION("zero skip gives the upsampled decoder feature") {
    ParameterStore<double> store;
    Rng rng(2);
    SegDecoderBlock<double> blk(store, "ssn", 16, 8, false, 4096, rng);
    std::mt19937_64 g(3);
    V d(random_tensor({1, 16, 4, 4}, g));
    V zero(Tensor<double>({1, 8, 8, 8}));
    REQUIRE(blk(d, zero).value() == blk.up()(d).value());
  }
  SECTION("cd block on (e, e) equals ssn block when fuse halves sum to the ssn fuse") {
    ParameterStore<double> s1, s2;
    Rng r1(5), r2(5);
    ChangeDecoderBlock<double> cd(s1, "cd", 16, 8, false, SkipFusion::concat, 4096, r1);
    SegDecoderBlock<double> ssn(s2, "ssn", 16, 8, false, 4096, r2);
    REQUIRE(cd.up().deconv.weight.value() == ssn.up().deconv.weight.value());
    const auto& wc = cd.skip_fuse().weight.value();  // (8, 16, 1, 1)
    Tensor<double> ws({8, 8, 1, 1});
    for (std::size_t o = 0; o < 8; ++o)
      for (std::size_t i = 0; i < 8; ++i) ws.at(o, i, 0, 0) = wc.at(o, i, 0, 0) + wc.at(o, i + 8, 0, 0);
    ssn.skip_fuse().weight.mutable_value() = ws;
    std::mt19937_64 g(4);
    V d(random_tensor({1, 16, 4, 4}, g)), e(random_tensor({1, 8, 8, 8}, g));
    REQUIRE(max_abs_diff(cd(d, e, e).value(), ssn(d, e).value()) < 1e-12);
  }
}

TEST_CASE("difference skip fusion is symmetric in the epochs", "[model][decoder]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(1);
  ChangeDecoderBlock<float> blk(store, "cd", 32, 16, false, SkipFusion::difference, 4096, rng);
  Var<float> d(random_image({1, 32, 4, 4}, 1)), e1(random_image({1, 16, 8, 8}, 2)), e2(random_image({1, 16, 8, 8}, 3));
  REQUIRE(blk(d, e1, e2).value() == blk(d, e2, e1).value());
}

// ---------------------------------------------------------------------------
// final block

TEST_CASE("final_block produces a full-resolution probability map", "[model][final]") {
  NoGradGuard ng;
  ParameterStore<float> store;
  Rng rng(1);
  FinalBlock<float> fin(store, "final", 64, rng);
  Var<float> out = fin(Var<float>(random_image({1, 64, 128, 128}, 1)));
  REQUIRE(out.shape() == Shape{1, 1, 256, 256});
  for (float v : out.value().storage()) REQUIRE((v > 0.f && v < 1.f));
  SECTION("a large positive bias saturates towards one") {
    fin.classifier.bias.mutable_value().fill(1e4f);
    const Var<float> sat = fin(Var<float>(random_image({1, 64, 8, 8}, 2)));
    for (float v : sat.value().storage()) {
      REQUIRE(v < 1.f);
      REQUIRE(v > 0.999999f);
    }
  }
}

TEST_CASE("final_block matches hand-computed logistic values", "[model][final]") {
  ParameterStore<double> store;
  Rng rng(1);
  FinalBlock<double> fin(store, "final", 2, rng);
  // Deconv taps (1..2, 1..2) of the 4x4 kernel implement nearest 2x upsampling of channel 0.
  auto& dw = fin.deconv.weight.mutable_value();
  dw.fill(0);
  for (std::size_t ky = 1; ky <= 2; ++ky)
    for (std::size_t kx = 1; kx <= 2; ++kx) dw.at(0, 0, ky, kx) = 1.0;
  set_all(fin.deconv.bias, 0);
  auto& cw = fin.conv.weight.mutable_value();
  cw.fill(0);
  cw.at(0, 0, 1, 1) = 1.0;
  set_all(fin.conv.bias, 0);
  set_all(fin.classifier.weight, 2.0);
  set_all(fin.classifier.bias, -1.0);
  V f(Tensor<double>({1, 2, 2, 2}, {0.1, 0.4, 0.7, 1.3, 5, 5, 5, 5}));
  V out = fin(f);
  REQUIRE(out.shape() == Shape{1, 1, 4, 4});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      const double in = f.value().at(0, 0, y / 2, x / 2);
      REQUIRE(out.value().at(0, 0, y, x) == Catch::Approx(sigmoid_ref(2 * in - 1)).epsilon(1e-13));
    }
}

// ---------------------------------------------------------------------------
// full network

TEST_CASE("forward on identical epochs gives identical segmentation maps", "[model][forward]") {
  NoGradGuard ng;
  DualTaskNetwork<float> net(ModelConfig::preset("tiny"), 11);
  Var<float> x(random_image({2, 3, 64, 64}, 1));
  auto out = net.forward(x, x);
  REQUIRE(out.has_segmentation());
  REQUIRE(out.seg_prob_t1.value() == out.seg_prob_t2.value());
  REQUIRE(out.change_prob.shape() == Shape{2, 1, 64, 64});
  for (const auto* p : {&out.change_prob, &out.seg_prob_t1})
    for (float v : p->value().storage()) REQUIRE((v > 0.f && v < 1.f));
}

TEST_CASE("default network emits deep supervision maps per CD stage", "[model][forward]") {
  NoGradGuard ng;
  ModelConfig cfg;
  cfg.use_dam = false;
  cfg.use_ssn = false;
  DualTaskNetwork<float> net(cfg, 1);
  Var<float> x(random_image({1, 3, 256, 256}, 1)), y(random_image({1, 3, 256, 256}, 2));
  auto out = net.forward(x, y);
  REQUIRE(out.change_prob.shape() == Shape{1, 1, 256, 256});
  REQUIRE(out.change_aux.size() == 4);
  const std::array<std::size_t, 4> sizes{16, 32, 64, 128};
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(out.change_aux[i].shape() == Shape{1, 1, sizes[i], sizes[i]});
  REQUIRE_FALSE(out.has_segmentation());
}

TEST_CASE("shape chain holds for 2^k inputs", "[model][forward]") {
  NoGradGuard ng;
  ModelConfig cfg = ModelConfig::preset("tiny");
  DualTaskNetwork<float> net(cfg, 3);
  for (std::size_t s : {64u, 128u}) {
    Var<float> x(random_image({1, 3, s, s}, s));
    const auto p = net.encode(x);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(p.stages[i].dim(2) == s >> (i + 1));
    auto out = net.forward(x, x);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(out.change_aux[i].dim(2) == s >> (4 - i));
    REQUIRE(out.seg_prob_t2.dim(3) == s);
  }
  SECTION("32x32 is below the pyramid's largest bin") {
    REQUIRE_THROWS_AS(net.forward(Var<float>(Tensor<float>({1, 3, 32, 32})), Var<float>(Tensor<float>({1, 3, 32, 32}))),
                      ConfigError);
  }
}

TEST_CASE("forward validates its inputs", "[model][forward]") {
  NoGradGuard ng;
  DualTaskNetwork<float> net(ModelConfig::preset("tiny"), 1);
  REQUIRE_THROWS_AS(net.forward(Var<float>(Tensor<float>({1, 3, 64, 64})), Var<float>(Tensor<float>({1, 3, 64, 96}))),
                    ShapeError);
  REQUIRE_THROWS_AS(net.forward(Var<float>(Tensor<float>({1, 3, 72, 72})), Var<float>(Tensor<float>({1, 3, 72, 72}))),
                    ShapeError);
}

TEST_CASE("use_ssn=false drops the segmentation branch", "[model][forward]") {
  NoGradGuard ng;
  ModelConfig cfg = ModelConfig::preset("tiny");
  cfg.use_ssn = false;
  DualTaskNetwork<float> net(cfg, 1);
  auto out = net.forward(Var<float>(random_image({1, 3, 64, 64}, 1)), Var<float>(random_image({1, 3, 64, 64}, 2)));
  REQUIRE_FALSE(out.seg_prob_t1.defined());
  REQUIRE_FALSE(out.seg_prob_t2.defined());
  REQUIRE(out.change_prob.shape() == Shape{1, 1, 64, 64});
}

TEST_CASE("encoder and segmentation decoder parameters exist once", "[model][sharing]") {
  ModelConfig shared = ModelConfig::preset("tiny");
  ModelConfig separate = shared;
  separate.shared_weights = false;
  DualTaskNetwork<float> a(shared, 1), b(separate, 1);
  const auto& ps = a.parameters();
  REQUIRE(ps.scalar_count() ==
          b.parameters().scalar_count() - ps.scalar_count_with_prefix("encoder.") - ps.scalar_count_with_prefix("ssn."));
  REQUIRE(ps.scalar_count_with_prefix("encoder_t2.") == 0);
  REQUIRE(ps.scalar_count_with_prefix("ssn_t2.") == 0);
  // Registered handles are distinct objects; every name appears once.
  std::set<const void*> handles;
  for (const auto& e : ps.entries()) REQUIRE(handles.insert(e.var.node().get()).second);
}

TEST_CASE("shared encoder gradient is the sum of both epochs' contributions", "[model][sharing]") {
  ModelConfig cfg = ModelConfig::preset("tiny");
  cfg.use_dam = false;
  cfg.deep_supervision = false;
  DualTaskNetwork<double> net(cfg, 2);
  std::mt19937_64 g(5);
  V x1(random_tensor({1, 3, 64, 64}, g, 0, 1)), x2(random_tensor({1, 3, 64, 64}, g, 0, 1));
  const Var<double> stem = *net.parameters().find("encoder.stem.weight");
  // which: 1 = epoch-1 map only, 2 = epoch-2 map only, 3 = both
  auto grad_of = [&](int which) {
    net.parameters().zero_grad();
    auto out = net.forward(x1, x2);
    V seg = which == 1 ? out.seg_prob_t1 : which == 2 ? out.seg_prob_t2 : add(out.seg_prob_t1, out.seg_prob_t2);
    backward(testing::contract(seg, Tensor<double>(seg.shape(), 1.0)));
    return stem.grad();
  };
  const Tensor<double> both = grad_of(3), only1 = grad_of(1), only2 = grad_of(2);
  REQUIRE(max_abs_diff(only2, Tensor<double>(only2.shape())) > 0);
  for (std::size_t i = 0; i < both.numel(); ++i)
    REQUIRE(both[i] == Catch::Approx(only1[i] + only2[i]).margin(1e-12).epsilon(1e-9));
}

TEST_CASE("every trainable parameter receives a finite non-zero gradient", "[model][gradflow]") {
  DualTaskNetwork<double> net(ModelConfig::preset("tiny"), 8);
  // Attention projections only see gradient once the residual scales move off zero.
  for (auto g : net.attention_scales()) g.mutable_value().fill(0.1);
  std::mt19937_64 rng(9);
  V x1(random_tensor({1, 3, 64, 64}, rng, 0, 1)), x2(random_tensor({1, 3, 64, 64}, rng, 0, 1));
  Tensor<double> y_cd({1, 1, 64, 64}), y1({1, 1, 64, 64}), y2({1, 1, 64, 64});
  for (std::size_t i = 0; i < y_cd.numel(); ++i) {
    y1[i] = (i / 64) < 20 ? 1 : 0;
    y2[i] = (i % 64) < 24 ? 1 : 0;
    y_cd[i] = y1[i] != y2[i] ? 1 : 0;
  }
  auto out = net.forward(x1, x2);
  auto loss = total_loss(out, y_cd, y1, y2, LossConfig{});
  backward(loss.total);
  for (const auto& e : net.parameters().entries()) {
    INFO(e.name);
    const auto& g = e.var.grad();
    REQUIRE(g.shape() == e.var.shape());
    REQUIRE(all_finite(g));
    double mx = 0;
    for (double v : g.storage()) mx = std::max(mx, std::abs(v));
    REQUIRE(mx > 0);
  }
}
