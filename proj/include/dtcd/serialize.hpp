#ifndef DTCD_SERIALIZE_HPP
#define DTCD_SERIALIZE_HPP

// JSON mappings for the configuration structs. Readers are strict: a key the
// struct does not know is a ConfigError naming its full dotted path.

#include <nlohmann/json.hpp>

#include <set>
#include <string>

#include "dtcd/losses.hpp"
#include "dtcd/optim.hpp"

namespace dtcd {

using json = nlohmann::json;

/// Reads fields out of a JSON object, remembering which keys were consumed.
class StrictReader {
 public:
  StrictReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  template <class V>
  void get(const std::string& key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + qualified(key) + "': " + e.what());
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Throws on the first key that was never asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown config key: " + qualified(it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json to_json(const EncoderConfig& e) {
  return {{"preset", e.preset_name},
          {"stage_channels", e.stage_channels},
          {"blocks_per_stage", e.blocks_per_stage},
          {"se_reduction", e.se_reduction}};
}

inline EncoderConfig encoder_from_json(const json& j, const std::string& path, EncoderConfig base = {}) {
  StrictReader r(j, path);
  std::string preset = base.preset_name;
  r.get("preset", preset);
  EncoderConfig e = preset == base.preset_name ? base : EncoderConfig::preset(preset);
  r.get("stage_channels", e.stage_channels);
  r.get("blocks_per_stage", e.blocks_per_stage);
  r.get("se_reduction", e.se_reduction);
  r.finish();
  e.validate();
  return e;
}

inline json to_json(const ModelConfig& m) {
  return {{"preset", m.encoder.preset_name},
          {"encoder", to_json(m.encoder)},
          {"use_dam", m.use_dam},
          {"use_ssn", m.use_ssn},
          {"deep_supervision", m.deep_supervision},
          {"spp_bins", m.spp_bins},
          {"input_channels", m.input_channels},
          {"skip_fusion", std::string(to_string(m.skip_fusion))},
          {"dam_max_positions", m.dam_max_positions},
          {"shared_weights", m.shared_weights}};
}

inline ModelConfig model_from_json(const json& j, const std::string& path, ModelConfig m = {}) {
  StrictReader r(j, path);
  // "preset" selects the starting point; every other key overrides it.
  std::string preset;
  r.get("preset", preset);
  if (!preset.empty() && preset != m.encoder.preset_name) m = ModelConfig::preset(preset);
  if (const json* enc = r.child("encoder")) m.encoder = encoder_from_json(*enc, r.qualified("encoder"), m.encoder);
  r.get("use_dam", m.use_dam);
  r.get("use_ssn", m.use_ssn);
  r.get("deep_supervision", m.deep_supervision);
  r.get("spp_bins", m.spp_bins);
  r.get("input_channels", m.input_channels);
  std::string fusion(to_string(m.skip_fusion));
  r.get("skip_fusion", fusion);
  m.skip_fusion = skip_fusion_from_string(fusion);
  r.get("dam_max_positions", m.dam_max_positions);
  r.get("shared_weights", m.shared_weights);
  r.finish();
  m.validate();
  return m;
}

inline json to_json(const LossConfig& l) {
  return {{"kind", std::string(to_string(l.kind))},
          {"delta", l.cdl.delta},
          {"theta", l.cdl.theta},
          {"alpha", l.weights.alpha},
          {"lambda_cd", l.weights.lambda_cd},
          {"focal_gamma", l.focal.gamma},
          {"focal_alpha", l.focal.alpha_t}};
}

inline LossConfig loss_from_json(const json& j, const std::string& path, LossConfig l = {}) {
  StrictReader r(j, path);
  std::string kind(to_string(l.kind));
  r.get("kind", kind);
  l.kind = loss_kind_from_string(kind);
  r.get("delta", l.cdl.delta);
  r.get("theta", l.cdl.theta);
  r.get("alpha", l.weights.alpha);
  r.get("lambda_cd", l.weights.lambda_cd);
  r.get("focal_gamma", l.focal.gamma);
  r.get("focal_alpha", l.focal.alpha_t);
  r.finish();
  l.validate();
  return l;
}

}  // namespace dtcd

#endif  // DTCD_SERIALIZE_HPP
