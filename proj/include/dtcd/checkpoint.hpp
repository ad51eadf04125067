#ifndef DTCD_CHECKPOINT_HPP
#define DTCD_CHECKPOINT_HPP

// Checkpoint archive, a single file:
//
//   magic      8 bytes   "DTCDCKP1"
//   hdr_len    u64 LE    byte length of the JSON header
//   header     JSON      {"format","version","dtype","step","model_config",
//                         "meta","optimizer","tensors":[{name,shape,offset,count}]}
//   payload    raw LE    tensors back to back, element type given by dtype
//
// Tensor names are "param/<hierarchical name>", "adam_m/<name>", "adam_v/<name>".
// Offsets are relative to the start of the payload. Files are written to a
// temporary sibling and renamed into place.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <system_error>

#include "dtcd/serialize.hpp"

namespace dtcd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'D', 'T', 'C', 'D', 'C', 'K', 'P', '1'};
inline constexpr int kCheckpointVersion = 1;

template <std::floating_point T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "float32" : "float64";
}

/// In-memory form of an archive. Values are held in double precision; the
/// file keeps the precision of the network that produced it, so a round trip
/// through a float32 network is exact.
struct Checkpoint {
  std::string dtype = "float32";
  std::uint64_t step = 0;
  ModelConfig model;
  AdamConfig adam;
  json meta = json::object();
  std::map<std::string, Tensor<double>> tensors;

  bool operator==(const Checkpoint& o) const {
    return dtype == o.dtype && step == o.step && model == o.model && adam == o.adam && meta == o.meta &&
           tensors == o.tensors;
  }
};

namespace detail {
template <class Src>
void write_payload(std::ofstream& out, const Tensor<double>& t) {
  std::vector<Src> buf(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) buf[i] = static_cast<Src>(t[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(Src)));
}
}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::size_t elem = ck.dtype == "float32" ? 4 : 8;
  if (ck.dtype != "float32" && ck.dtype != "float64") throw ConfigError("checkpoint dtype " + ck.dtype);
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ck.tensors) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.numel()}});
    offset += t.numel() * elem;
  }
  const json header = {{"format", "dtcd-checkpoint"},
                       {"version", kCheckpointVersion},
                       {"dtype", ck.dtype},
                       {"step", ck.step},
                       {"model_config", to_json(ck.model)},
                       {"optimizer",
                        {{"kind", "adam"},
                         {"lr", ck.adam.lr},
                         {"beta1", ck.adam.beta1},
                         {"beta2", ck.adam.beta2},
                         {"eps", ck.adam.eps}}},
                       {"meta", ck.meta},
                       {"tensors", tensors}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(kCheckpointMagic, 8);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ck.tensors) {
      if (elem == 4) detail::write_payload<float>(out, t);
      else detail::write_payload<double>(out, t);
    }
    out.flush();
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw DataError(path.string() + " is not a dtcd checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > std::filesystem::file_size(path)) throw DataError("truncated checkpoint header in " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header in " + path.string());
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (header.value("format", "") != "dtcd-checkpoint" || header.value("version", 0) != kCheckpointVersion)
    throw DataError("unsupported checkpoint format/version in " + path.string());

  Checkpoint ck;
  ck.dtype = header.at("dtype").get<std::string>();
  ck.step = header.at("step").get<std::uint64_t>();
  ck.model = model_from_json(header.at("model_config"), "model");
  const auto& opt = header.at("optimizer");
  ck.adam = {opt.at("lr").get<double>(), opt.at("beta1").get<double>(), opt.at("beta2").get<double>(),
             opt.at("eps").get<double>()};
  ck.meta = header.at("meta");
  const std::size_t elem = ck.dtype == "float32" ? 4 : 8;
  const std::streamoff payload = in.tellg();
  for (const auto& t : header.at("tensors")) {
    const Shape shape = t.at("shape").get<Shape>();
    const std::size_t count = t.at("count").get<std::size_t>();
    if (count != shape_numel(shape)) throw DataError("checkpoint tensor count/shape mismatch");
    if (payload + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>() + count * elem) >
        static_cast<std::streamoff>(std::filesystem::file_size(path)))
      throw DataError("truncated checkpoint payload in " + path.string());
    in.seekg(payload + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    Tensor<double> out(shape);
    if (elem == 4) {
      std::vector<float> buf(count);
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
      for (std::size_t i = 0; i < count; ++i) out[i] = buf[i];
    } else {
      in.read(reinterpret_cast<char*>(out.raw()), static_cast<std::streamsize>(count * 8));
    }
    if (!in) throw DataError("truncated checkpoint payload in " + path.string());
    ck.tensors.emplace(t.at("name").get<std::string>(), std::move(out));
  }
  return ck;
}

/// Snapshot of a network (and optionally its optimizer).
template <std::floating_point T>
Checkpoint capture(const DualTaskNetwork<T>& net, const Adam<T>* opt = nullptr) {
  Checkpoint ck;
  ck.dtype = dtype_name<T>();
  ck.model = net.config();
  const auto& entries = net.parameters().entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    ck.tensors.emplace("param/" + entries[k].name, entries[k].var.value().template cast<double>());
    if (opt) {
      ck.tensors.emplace("adam_m/" + entries[k].name, opt->first_moments()[k].template cast<double>());
      ck.tensors.emplace("adam_v/" + entries[k].name, opt->second_moments()[k].template cast<double>());
    }
  }
  if (opt) {
    ck.adam = opt->config();
    ck.step = opt->steps();
  }
  return ck;
}

/// Copies parameter (and optimizer) state from a checkpoint into a network
/// built from the same ModelConfig.
template <std::floating_point T>
void restore(const Checkpoint& ck, DualTaskNetwork<T>& net, Adam<T>* opt = nullptr) {
  if (!(ck.model == net.config())) throw ConfigError("checkpoint model config differs from the network's");
  auto& entries = net.parameters().entries();
  auto fetch = [&](const std::string& key, const Shape& shape) -> const Tensor<double>& {
    auto it = ck.tensors.find(key);
    if (it == ck.tensors.end()) throw DataError("checkpoint lacks tensor " + key);
    if (it->second.shape() != shape) throw DataError("checkpoint tensor " + key + " has the wrong shape");
    return it->second;
  };
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Var<T> v = entries[k].var;
    v.mutable_value() = fetch("param/" + entries[k].name, v.shape()).template cast<T>();
    if (opt) {
      opt->first_moments()[k] = fetch("adam_m/" + entries[k].name, v.shape()).template cast<T>();
      opt->second_moments()[k] = fetch("adam_v/" + entries[k].name, v.shape()).template cast<T>();
    }
  }
  if (opt) opt->set_steps(ck.step);
}

}  // namespace dtcd

#endif  // DTCD_CHECKPOINT_HPP
