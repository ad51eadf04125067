#ifndef DTCD_MODEL_HPP
#define DTCD_MODEL_HPP

// Dual-task Siamese change-detection network: shared SE-residual encoder,
// spatial-pyramid centre block, dual-attention decoder for the change map and
// a shared single-epoch segmentation decoder.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtcd/nn.hpp"

namespace dtcd {

struct EncoderConfig {
  std::array<std::size_t, 5> stage_channels{64, 64, 128, 256, 512};
  std::array<std::size_t, 4> blocks_per_stage{3, 4, 6, 3};
  std::size_t se_reduction = 16;
  std::string preset_name = "default";

  /// "default" mirrors a 34-layer SE residual network; "tiny" is for desk-scale runs.
  static EncoderConfig preset(std::string_view name) {
    if (name == "default") return {};
    if (name == "tiny") return {{16, 16, 32, 64, 128}, {1, 1, 1, 1}, 4, "tiny"};
    throw ConfigError("unknown encoder preset: " + std::string(name));
  }

  void validate() const {
    if (se_reduction == 0) throw ConfigError("encoder.se_reduction must be positive");
    for (std::size_t c : stage_channels) {
      if (c == 0) throw ConfigError("encoder stage channels must be positive");
      if (c % se_reduction != 0)
        throw ConfigError("encoder stage channel count " + std::to_string(c) + " not divisible by se_reduction " +
                          std::to_string(se_reduction));
    }
    for (std::size_t b : blocks_per_stage)
      if (b == 0) throw ConfigError("encoder blocks_per_stage entries must be positive");
  }

  bool operator==(const EncoderConfig&) const = default;
};

enum class SkipFusion { concat, difference };

inline std::string_view to_string(SkipFusion f) { return f == SkipFusion::concat ? "concat" : "difference"; }
inline SkipFusion skip_fusion_from_string(std::string_view s) {
  if (s == "concat") return SkipFusion::concat;
  if (s == "difference") return SkipFusion::difference;
  throw ConfigError("unknown skip fusion: " + std::string(s));
}

struct ModelConfig {
  EncoderConfig encoder;
  bool use_dam = true;
  bool use_ssn = true;
  bool deep_supervision = true;
  std::vector<std::size_t> spp_bins{1, 2, 3, 6};
  std::size_t input_channels = 3;
  /// How the two temporal skips enter a change-detection block.
  SkipFusion skip_fusion = SkipFusion::concat;
  /// Largest H*W on which the attention module may build its position affinity.
  std::size_t dam_max_positions = 16384;
  /// false builds the reference construction with separate per-epoch encoder and
  /// segmentation decoder; only used to audit parameter sharing.
  bool shared_weights = true;

  /// "default" or "tiny"; the tiny network's deepest stage is only 2x2 on
  /// 64x64 tiles, so its pyramid uses bins {1,2}.
  static ModelConfig preset(std::string_view name) {
    ModelConfig m;
    m.encoder = EncoderConfig::preset(name);
    if (name == "tiny") m.spp_bins = {1, 2};
    return m;
  }

  void validate() const {
    encoder.validate();
    if (input_channels == 0) throw ConfigError("model.input_channels must be positive");
    if (spp_bins.empty()) throw ConfigError("model.spp_bins must not be empty");
    for (std::size_t i = 0; i < spp_bins.size(); ++i) {
      if (spp_bins[i] == 0) throw ConfigError("model.spp_bins entries must be positive");
      if (i && spp_bins[i] <= spp_bins[i - 1]) throw ConfigError("model.spp_bins must be strictly increasing");
    }
    if (dam_max_positions == 0) throw ConfigError("model.dam_max_positions must be positive");
  }

  /// Checks an input geometry against the stride schedule and pyramid bins.
  void validate_input(std::size_t height, std::size_t width) const {
    if (height == 0 || width == 0 || height % 32 || width % 32)
      throw ShapeError("input spatial size " + std::to_string(height) + "x" + std::to_string(width) +
                       " is not a positive multiple of 32");
    const std::size_t deepest = std::min(height, width) / 32;
    if (spp_bins.back() > deepest)
      throw ConfigError("spp bin " + std::to_string(spp_bins.back()) + " exceeds deepest stage extent " +
                        std::to_string(deepest));
  }

  bool operator==(const ModelConfig&) const = default;
};

template <std::floating_point T>
struct FeaturePyramid {
  std::array<Var<T>, 5> stages;  // shallow -> deep
};

template <std::floating_point T>
struct ModelOutput {
  Var<T> change_prob;
  std::vector<Var<T>> change_aux;  // deepest first
  Var<T> seg_prob_t1, seg_prob_t2;  // undefined without the segmentation branch
  bool has_segmentation() const { return seg_prob_t1.defined(); }
};

inline constexpr double kProbEpsilon = 1e-7;

template <std::floating_point T>
Var<T> clamp_probability(const Var<T>& p) {
  return clamp(p, static_cast<T>(kProbEpsilon), static_cast<T>(1.0 - kProbEpsilon));
}

template <std::floating_point T>
Var<T> global_avg_pool(const Var<T>& x) {
  return adaptive_avg_pool2d(x, 1, 1);
}

// ---------------------------------------------------------------------------

/// Squeeze-and-excitation channel recalibration, bottleneck C -> C/r -> C.
template <std::floating_point T>
struct SqueezeExcite {
  Conv2d<T> reduce, expand;

  SqueezeExcite() = default;
  SqueezeExcite(ParameterStore<T>& s, const std::string& name, std::size_t channels, std::size_t r, Rng& rng) {
    if (r == 0 || channels % r != 0)
      throw ConfigError("squeeze-excite: " + std::to_string(channels) + " channels not divisible by reduction " +
                        std::to_string(r));
    reduce = Conv2d<T>(s, name + ".reduce", channels, channels / r, 1, 1, 0, rng);
    expand = Conv2d<T>(s, name + ".expand", channels / r, channels, 1, 1, 0, rng);
  }

  /// Excitation weights in (0,1), shape (N,C,1,1).
  Var<T> excitation(const Var<T>& f) const { return sigmoid(expand(relu(reduce(global_avg_pool(f))))); }
  Var<T> operator()(const Var<T>& f) const { return channel_scale(f, excitation(f)); }
};

template <std::floating_point T>
struct ResidualBlock {
  Conv2d<T> conv1, conv2;
  SqueezeExcite<T> se;
  std::optional<Conv2d<T>> shortcut;

  ResidualBlock() = default;
  ResidualBlock(ParameterStore<T>& s, const std::string& name, std::size_t cin, std::size_t cout, std::size_t stride,
                std::size_t r, double branch_gain, Rng& rng) {
    conv1 = Conv2d<T>(s, name + ".conv1", cin, cout, 3, stride, 1, rng);
    conv2 = Conv2d<T>(s, name + ".conv2", cout, cout, 3, 1, 1, rng, true, branch_gain);
    se = SqueezeExcite<T>(s, name + ".se", cout, r, rng);
    if (stride != 1 || cin != cout) shortcut = Conv2d<T>(s, name + ".shortcut", cin, cout, 1, stride, 0, rng);
  }

  Var<T> operator()(const Var<T>& x) const {
    Var<T> y = se(conv2(relu(conv1(x))));
    return relu(add(y, shortcut ? (*shortcut)(x) : x));
  }
};

template <std::floating_point T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore<T>& s, const std::string& name, const EncoderConfig& cfg, std::size_t in_channels, Rng& rng)
      : cfg_(cfg) {
    cfg.validate();
    const auto& ch = cfg.stage_channels;
    std::size_t total_blocks = 0;
    for (auto b : cfg.blocks_per_stage) total_blocks += b;
    // Shrinks each residual branch so the sum over blocks stays O(1) without normalisation layers.
    const double gain = 1.0 / std::sqrt(static_cast<double>(total_blocks));
    stem_ = Conv2d<T>(s, name + ".stem", in_channels, ch[0], 7, 2, 3, rng);
    for (std::size_t st = 0; st < 4; ++st) {
      for (std::size_t b = 0; b < cfg.blocks_per_stage[st]; ++b) {
        const std::size_t cin = b == 0 ? ch[st] : ch[st + 1];
        const std::size_t stride = (b == 0 && st > 0) ? 2 : 1;
        stages_[st].emplace_back(s, name + ".stage" + std::to_string(st + 2) + ".block" + std::to_string(b), cin,
                                 ch[st + 1], stride, cfg.se_reduction, gain, rng);
      }
    }
  }

  FeaturePyramid<T> operator()(const Var<T>& img) const {
    require_rank4(img.value(), "encode");
    if (img.dim(2) % 32 || img.dim(3) % 32 || img.dim(2) == 0 || img.dim(3) == 0)
      throw ShapeError("encode: spatial size " + std::to_string(img.dim(2)) + "x" + std::to_string(img.dim(3)) +
                       " not divisible by 32");
    if (img.dim(1) != stem_.weight.dim(1))
      throw ShapeError("encode: expected " + std::to_string(stem_.weight.dim(1)) + " input channels");
    FeaturePyramid<T> p;
    p.stages[0] = relu(stem_(img));
    Var<T> x = max_pool2d(p.stages[0], 3, 2, 1);
    for (std::size_t st = 0; st < 4; ++st) {
      for (const auto& block : stages_[st]) x = block(x);
      p.stages[st + 1] = x;
    }
    return p;
  }

  const EncoderConfig& config() const noexcept { return cfg_; }

 private:
  EncoderConfig cfg_;
  Conv2d<T> stem_;
  std::array<std::vector<ResidualBlock<T>>, 4> stages_;
};

/// Pyramid pooling centre block; output shape equals input shape.
template <std::floating_point T>
class CenterSPP {
 public:
  CenterSPP() = default;
  CenterSPP(ParameterStore<T>& s, const std::string& name, std::size_t channels, std::vector<std::size_t> bins,
            Rng& rng)
      : bins_(std::move(bins)) {
    const std::size_t branch = std::max<std::size_t>(1, channels / bins_.size());
    for (std::size_t i = 0; i < bins_.size(); ++i)
      proj_.emplace_back(s, name + ".proj" + std::to_string(i), channels, branch, 1, 1, 0, rng);
    fuse_ = Conv2d<T>(s, name + ".fuse", channels + branch * bins_.size(), channels, 1, 1, 0, rng);
  }

  Var<T> operator()(const Var<T>& f) const {
    require_rank4(f.value(), "center_spp");
    const std::size_t h = f.dim(2), w = f.dim(3);
    std::vector<Var<T>> parts{f};
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      if (bins_[i] > h || bins_[i] > w)
        throw ConfigError("center_spp: bin " + std::to_string(bins_[i]) + " larger than spatial extent " +
                          std::to_string(h) + "x" + std::to_string(w));
      parts.push_back(upsample_bilinear(proj_[i](adaptive_avg_pool2d(f, bins_[i], bins_[i])), h, w));
    }
    return relu(fuse_(concat_channels(parts)));
  }

  const std::vector<std::size_t>& bins() const noexcept { return bins_; }
  std::vector<Conv2d<T>>& projections() noexcept { return proj_; }
  Conv2d<T>& fuse() noexcept { return fuse_; }

 private:
  std::vector<std::size_t> bins_;
  std::vector<Conv2d<T>> proj_;
  Conv2d<T> fuse_;
};

/// Position + channel self-attention with learnable residual scales that
/// start at zero, so the module is the identity at initialisation.
template <std::floating_point T>
class DualAttention {
 public:
  DualAttention() = default;
  DualAttention(ParameterStore<T>& s, const std::string& name, std::size_t channels, std::size_t max_positions,
                Rng& rng)
      : max_positions_(max_positions) {
    const std::size_t qk = std::max<std::size_t>(1, channels / 8);
    query_ = Conv2d<T>(s, name + ".query", channels, qk, 1, 1, 0, rng);
    key_ = Conv2d<T>(s, name + ".key", channels, qk, 1, 1, 0, rng);
    value_ = Conv2d<T>(s, name + ".value", channels, channels, 1, 1, 0, rng);
    gamma_position_ = s.zeros(name + ".gamma_position", {1});
    gamma_channel_ = s.zeros(name + ".gamma_channel", {1});
  }

  /// Row-stochastic (N, HW, HW) spatial affinity.
  Var<T> position_affinity(const Var<T>& f) const {
    check_budget(f);
    const std::size_t n = f.dim(0), hw = f.dim(2) * f.dim(3);
    Var<T> q = reshape(query_(f), {n, query_.weight.dim(0), hw});
    Var<T> k = reshape(key_(f), {n, key_.weight.dim(0), hw});
    return softmax_rows(bmm(q, k, true, false));
  }

  /// Row-stochastic (N, C, C) channel affinity.
  Var<T> channel_affinity(const Var<T>& f) const {
    const std::size_t n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
    Var<T> fr = reshape(f, {n, c, hw});
    return softmax_rows(bmm(fr, fr, false, true));
  }

  Var<T> operator()(const Var<T>& f) const {
    require_rank4(f.value(), "dual_attention");
    const std::size_t n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
    check_budget(f);
    Var<T> v = reshape(value_(f), {n, c, hw});
    Var<T> position = reshape(bmm(v, position_affinity(f), false, true), f.shape());
    Var<T> fr = reshape(f, {n, c, hw});
    Var<T> channel = reshape(bmm(channel_affinity(f), fr), f.shape());
    return add(f, add(mul_scalar(position, gamma_position_), mul_scalar(channel, gamma_channel_)));
  }

  Var<T>& gamma_position() noexcept { return gamma_position_; }
  Var<T>& gamma_channel() noexcept { return gamma_channel_; }

 private:
  void check_budget(const Var<T>& f) const {
    const std::size_t hw = f.dim(2) * f.dim(3);
    if (hw > max_positions_)
      throw ResourceError("dual_attention: " + std::to_string(hw) + " positions exceed the affinity budget of " +
                          std::to_string(max_positions_) + " (model.dam_max_positions)");
  }

  std::size_t max_positions_ = 0;
  Conv2d<T> query_, key_, value_;
  Var<T> gamma_position_, gamma_channel_;
};

/// LinkNet-style 2x upsampler: 1x1 reduce -> stride-2 transposed conv -> 1x1 expand.
template <std::floating_point T>
struct UpsampleBlock {
  Conv2d<T> reduce;
  ConvTranspose2d<T> deconv;
  Conv2d<T> expand;

  UpsampleBlock() = default;
  UpsampleBlock(ParameterStore<T>& s, const std::string& name, std::size_t cin, std::size_t cout, Rng& rng) {
    const std::size_t mid = std::max<std::size_t>(1, cin / 4);
    reduce = Conv2d<T>(s, name + ".reduce", cin, mid, 1, 1, 0, rng);
    deconv = ConvTranspose2d<T>(s, name + ".deconv", mid, mid, 4, 2, 1, rng);
    expand = Conv2d<T>(s, name + ".expand", mid, cout, 1, 1, 0, rng);
  }

  Var<T> operator()(const Var<T>& x) const { return relu(expand(relu(deconv(relu(reduce(x)))))); }
};

namespace detail {
template <std::floating_point T>
void check_skip(const Var<T>& d_prev, const Var<T>& e, const char* what) {
  require_rank4(d_prev.value(), what);
  require_rank4(e.value(), what);
  if (e.dim(0) != d_prev.dim(0) || e.dim(2) != 2 * d_prev.dim(2) || e.dim(3) != 2 * d_prev.dim(3))
    throw ShapeError(std::string(what) + ": skip " + shape_str(e.shape()) + " is not twice the size of decoder input " +
                     shape_str(d_prev.shape()));
}
}  // namespace detail

/// Decoder stage with three inputs: the previous decoder map and the two
/// same-stage encoder features of the two epochs.
template <std::floating_point T>
class ChangeDecoderBlock {
 public:
  ChangeDecoderBlock() = default;
  ChangeDecoderBlock(ParameterStore<T>& s, const std::string& name, std::size_t cin, std::size_t cskip, bool use_dam,
                     SkipFusion fusion, std::size_t max_positions, Rng& rng)
      : fusion_(fusion) {
    up_ = UpsampleBlock<T>(s, name + ".up", cin, cskip, rng);
    fuse_ = Conv2d<T>(s, name + ".skip_fuse", fusion == SkipFusion::concat ? 2 * cskip : cskip, cskip, 1, 1, 0, rng);
    if (use_dam) dam_ = DualAttention<T>(s, name + ".dam", cskip, max_positions, rng);
  }

  Var<T> operator()(const Var<T>& d_prev, const Var<T>& e_t1, const Var<T>& e_t2) const {
    if (e_t1.shape() != e_t2.shape())
      throw ShapeError("cd_decoder_block: skip shapes differ " + shape_str(e_t1.shape()) + " vs " +
                       shape_str(e_t2.shape()));
    detail::check_skip(d_prev, e_t1, "cd_decoder_block");
    Var<T> skip = fusion_ == SkipFusion::concat ? fuse_(concat_channels<T>({e_t1, e_t2})) : fuse_(abs(sub(e_t1, e_t2)));
    Var<T> out = add(up_(d_prev), skip);
    return dam_ ? (*dam_)(out) : out;
  }

  UpsampleBlock<T>& up() noexcept { return up_; }
  Conv2d<T>& skip_fuse() noexcept { return fuse_; }
  std::optional<DualAttention<T>>& dam() noexcept { return dam_; }

 private:
  SkipFusion fusion_ = SkipFusion::concat;
  UpsampleBlock<T> up_;
  Conv2d<T> fuse_;
  std::optional<DualAttention<T>> dam_;
};

/// Single-epoch decoder stage of the segmentation branch.
template <std::floating_point T>
class SegDecoderBlock {
 public:
  SegDecoderBlock() = default;
  SegDecoderBlock(ParameterStore<T>& s, const std::string& name, std::size_t cin, std::size_t cskip, bool use_dam,
                  std::size_t max_positions, Rng& rng) {
    up_ = UpsampleBlock<T>(s, name + ".up", cin, cskip, rng);
    fuse_ = Conv2d<T>(s, name + ".skip_fuse", cskip, cskip, 1, 1, 0, rng);
    if (use_dam) dam_ = DualAttention<T>(s, name + ".dam", cskip, max_positions, rng);
  }

  Var<T> operator()(const Var<T>& d_prev, const Var<T>& e) const {
    detail::check_skip(d_prev, e, "ssn_decoder_block");
    Var<T> out = add(up_(d_prev), fuse_(e));
    return dam_ ? (*dam_)(out) : out;
  }

  UpsampleBlock<T>& up() noexcept { return up_; }
  Conv2d<T>& skip_fuse() noexcept { return fuse_; }
  std::optional<DualAttention<T>>& dam() noexcept { return dam_; }

 private:
  UpsampleBlock<T> up_;
  Conv2d<T> fuse_;
  std::optional<DualAttention<T>> dam_;
};

/// Half-resolution features -> full-resolution 1-channel probability map.
template <std::floating_point T>
struct FinalBlock {
  ConvTranspose2d<T> deconv;
  Conv2d<T> conv;
  Conv2d<T> classifier;

  FinalBlock() = default;
  FinalBlock(ParameterStore<T>& s, const std::string& name, std::size_t cin, Rng& rng) {
    const std::size_t mid = std::max<std::size_t>(1, cin / 2);
    deconv = ConvTranspose2d<T>(s, name + ".deconv", cin, mid, 4, 2, 1, rng);
    conv = Conv2d<T>(s, name + ".conv", mid, mid, 3, 1, 1, rng);
    classifier = Conv2d<T>(s, name + ".classifier", mid, 1, 1, 1, 0, rng);
  }

  Var<T> operator()(const Var<T>& f) const {
    return clamp_probability(sigmoid(classifier(relu(conv(relu(deconv(f)))))));
  }
};

template <std::floating_point T>
struct SegDecoder {
  std::array<SegDecoderBlock<T>, 4> blocks;
  FinalBlock<T> final;

  SegDecoder() = default;
  SegDecoder(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg, Rng& rng) {
    const auto& ch = cfg.encoder.stage_channels;
    for (std::size_t i = 0; i < 4; ++i)
      blocks[i] = SegDecoderBlock<T>(s, name + ".block" + std::to_string(i), ch[4 - i], ch[3 - i], cfg.use_dam,
                                     cfg.dam_max_positions, rng);
    final = FinalBlock<T>(s, name + ".final", ch[0], rng);
  }

  Var<T> operator()(const Var<T>& center, const FeaturePyramid<T>& p) const {
    Var<T> d = center;
    for (std::size_t i = 0; i < 4; ++i) d = blocks[i](d, p.stages[3 - i]);
    return final(d);
  }
};

/// The full dual-task network. Parameters live in one store; the Siamese
/// encoder and the segmentation decoder are single modules applied twice.
template <std::floating_point T>
class DualTaskNetwork {
 public:
  DualTaskNetwork(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    const auto& ch = cfg.encoder.stage_channels;
    encoder_ = Encoder<T>(store_, "encoder", cfg.encoder, cfg.input_channels, rng);
    if (!cfg.shared_weights) encoder_t2_ = Encoder<T>(store_, "encoder_t2", cfg.encoder, cfg.input_channels, rng);
    center_ = CenterSPP<T>(store_, "center", ch[4], cfg.spp_bins, rng);
    center_fuse_ = Conv2d<T>(store_, "cd.center_fuse", 2 * ch[4], ch[4], 1, 1, 0, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      cd_blocks_[i] = ChangeDecoderBlock<T>(store_, "cd.block" + std::to_string(i), ch[4 - i], ch[3 - i], cfg.use_dam,
                                            cfg.skip_fusion, cfg.dam_max_positions, rng);
      if (cfg.deep_supervision)
        aux_heads_[i] = Conv2d<T>(store_, "cd.aux" + std::to_string(i), ch[3 - i], 1, 1, 1, 0, rng);
    }
    cd_final_ = FinalBlock<T>(store_, "cd.final", ch[0], rng);
    if (cfg.use_ssn) {
      ssn_ = SegDecoder<T>(store_, "ssn", cfg, rng);
      if (!cfg.shared_weights) ssn_t2_ = SegDecoder<T>(store_, "ssn_t2", cfg, rng);
    }
  }

  DualTaskNetwork(const DualTaskNetwork&) = delete;
  DualTaskNetwork& operator=(const DualTaskNetwork&) = delete;
  DualTaskNetwork(DualTaskNetwork&&) = default;

  FeaturePyramid<T> encode(const Var<T>& img) const { return encoder_(img); }

  ModelOutput<T> forward(const Var<T>& img_t1, const Var<T>& img_t2) const {
    require_rank4(img_t1.value(), "forward");
    if (img_t1.shape() != img_t2.shape())
      throw ShapeError("forward: epoch images differ in shape " + shape_str(img_t1.shape()) + " vs " +
                       shape_str(img_t2.shape()));
    cfg_.validate_input(img_t1.dim(2), img_t1.dim(3));
    if (img_t1.dim(1) != cfg_.input_channels)
      throw ShapeError("forward: expected " + std::to_string(cfg_.input_channels) + " input channels, got " +
                       std::to_string(img_t1.dim(1)));

    const FeaturePyramid<T> p1 = encoder_(img_t1);
    const FeaturePyramid<T> p2 = encoder_t2_ ? (*encoder_t2_)(img_t2) : encoder_(img_t2);
    const Var<T> c1 = center_(p1.stages[4]);
    const Var<T> c2 = center_(p2.stages[4]);

    ModelOutput<T> out;
    Var<T> d = relu(center_fuse_(concat_channels<T>({c1, c2})));
    for (std::size_t i = 0; i < 4; ++i) {
      d = cd_blocks_[i](d, p1.stages[3 - i], p2.stages[3 - i]);
      if (cfg_.deep_supervision) out.change_aux.push_back(clamp_probability(sigmoid(aux_heads_[i](d))));
    }
    out.change_prob = cd_final_(d);
    if (ssn_) {
      out.seg_prob_t1 = (*ssn_)(c1, p1);
      out.seg_prob_t2 = ssn_t2_ ? (*ssn_t2_)(c2, p2) : (*ssn_)(c2, p2);
    }
    return out;
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore<T>& parameters() noexcept { return store_; }
  const ParameterStore<T>& parameters() const noexcept { return store_; }

  Encoder<T>& encoder() noexcept { return encoder_; }
  CenterSPP<T>& center() noexcept { return center_; }
  std::array<ChangeDecoderBlock<T>, 4>& cd_blocks() noexcept { return cd_blocks_; }
  FinalBlock<T>& cd_final() noexcept { return cd_final_; }
  std::optional<SegDecoder<T>>& ssn() noexcept { return ssn_; }

  /// Scalars of every attention module in the network.
  std::vector<Var<T>> attention_scales() const {
    std::vector<Var<T>> out;
    for (const auto& e : store_.entries())
      if (e.name.find(".gamma_") != std::string::npos) out.push_back(e.var);
    return out;
  }

 private:
  ModelConfig cfg_;
  ParameterStore<T> store_;
  Encoder<T> encoder_;
  std::optional<Encoder<T>> encoder_t2_;
  CenterSPP<T> center_;
  Conv2d<T> center_fuse_;
  std::array<ChangeDecoderBlock<T>, 4> cd_blocks_;
  std::array<Conv2d<T>, 4> aux_heads_;
  FinalBlock<T> cd_final_;
  std::optional<SegDecoder<T>> ssn_, ssn_t2_;
};

}  // namespace dtcd

#endif  // DTCD_MODEL_HPP
