#pragma once

// Checkpoint container, little-endian:
//   magic "TCCCKPT\0" | u32 format version | u64 header length |
//   JSON header (model kind, model config, parameter table) |
//   parameter payload (f64) | u32 CRC-32 of header and payload

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcc/dataset_io.hpp"
#include "tcc/models.hpp"

namespace tcc {

inline constexpr char kCheckpointMagic[8] = {'T', 'C', 'C', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"backbone", {{"variant", to_string(c.backbone.variant)},
                        {"input_resolution", c.backbone.input_resolution},
                        {"pretrained_weights", c.backbone.pretrained_weights}}},
          {"hidden_size", c.hidden_size},
          {"kernel_size", c.kernel_size},
          {"cascade", {{"stages", c.cascade.stages},
                       {"inner_c4_stages", c.cascade.inner_c4_stages},
                       {"tied", c.cascade.tied}}},
          {"confidence_pooling", c.confidence_pooling},
          {"init_seed", c.init_seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = parse_model_kind(j.at("kind").get<std::string>());
  const auto& b = j.at("backbone");
  c.backbone.variant = parse_backbone_variant(b.at("variant").get<std::string>());
  c.backbone.input_resolution = b.at("input_resolution").get<int>();
  c.backbone.pretrained_weights = b.value("pretrained_weights", "");
  c.hidden_size = j.at("hidden_size").get<int>();
  c.kernel_size = j.at("kernel_size").get<int>();
  const auto& cc = j.at("cascade");
  c.cascade.stages = cc.at("stages").get<int>();
  c.cascade.inner_c4_stages = cc.at("inner_c4_stages").get<int>();
  c.cascade.tied = cc.at("tied").get<bool>();
  c.confidence_pooling = j.at("confidence_pooling").get<bool>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

namespace detail {
template <typename T>
void put(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw LoadError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}
}  // namespace detail

inline std::vector<std::uint8_t> save_checkpoint(const Model& model) {
  nlohmann::json params = nlohmann::json::array();
  std::vector<double> payload;
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name}, {"dims", p.var.dims()}, {"offset", payload.size()}, {"count", p.var.size()}});
    payload.insert(payload.end(), p.var.value().begin(), p.var.value().end());
  }
  const nlohmann::json header = {{"format", "tcc-checkpoint"},
                                 {"model", to_json(model.config())},
                                 {"params", params},
                                 {"payload_values", payload.size()}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + sizeof kCheckpointMagic);
  detail::put(out, kCheckpointVersion);
  detail::put(out, static_cast<std::uint64_t>(text.size()));
  const std::size_t body = out.size();
  out.insert(out.end(), text.begin(), text.end());
  const auto* pb = reinterpret_cast<const std::uint8_t*>(payload.data());
  out.insert(out.end(), pb, pb + payload.size() * sizeof(double));
  detail::put(out, detail::crc(out.data() + body, out.size() - body));
  return out;
}

// Reads only the model configuration (validates the container fully).
inline std::pair<ModelConfig, nlohmann::json> read_checkpoint_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + 12 + 4 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw LoadError("not a checkpoint (bad magic or truncated)");
  std::size_t pos = sizeof kCheckpointMagic;
  const auto version = detail::get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw LoadError("unsupported checkpoint format version " + std::to_string(version));
  const auto header_len = detail::get<std::uint64_t>(bytes, pos);
  if (header_len > bytes.size() - pos) throw LoadError("checkpoint truncated (header)");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupted checkpoint header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("payload_values") || !header["payload_values"].is_number_unsigned())
    throw LoadError("corrupted checkpoint header");
  const std::size_t body = pos;
  const std::size_t payload_bytes = header.value("payload_values", std::size_t{0}) * sizeof(double);
  const std::size_t expected = body + header_len + payload_bytes + sizeof(std::uint32_t);
  if (bytes.size() != expected)
    throw LoadError("checkpoint size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  std::size_t crc_pos = expected - sizeof(std::uint32_t);
  const auto stored = detail::get<std::uint32_t>(bytes, crc_pos);
  if (stored != detail::crc(bytes.data() + body, expected - sizeof(std::uint32_t) - body))
    throw LoadError("checkpoint checksum mismatch");
  try {
    return {model_config_from_json(header.at("model")), header};
  } catch (const std::exception& e) {
    throw LoadError(std::string("corrupted checkpoint model config: ") + e.what());
  }
}

inline Model load_checkpoint(const std::vector<std::uint8_t>& bytes) {
  auto [cfg, header] = read_checkpoint_header(bytes);
  std::size_t pos = sizeof kCheckpointMagic + sizeof(std::uint32_t);
  const auto header_len = detail::get<std::uint64_t>(bytes, pos);
  const std::uint8_t* payload = bytes.data() + pos + header_len;
  const std::size_t payload_values = header.at("payload_values").get<std::size_t>();

  cfg.backbone.pretrained_weights.clear();
  Model model(cfg);
  std::map<std::string, const nlohmann::json*> table;
  for (const auto& p : header.at("params")) table[p.at("name").get<std::string>()] = &p;
  auto params = model.parameters();
  if (params.size() != table.size()) throw LoadError("checkpoint parameter table does not match model");
  for (auto& p : params) {
    auto it = table.find(p.name);
    if (it == table.end()) throw LoadError("checkpoint lacks parameter '" + p.name + "'");
    const auto& entry = *it->second;
    if (entry.at("dims").get<ad::Dims>() != p.var.dims())
      throw LoadError("checkpoint parameter '" + p.name + "' has wrong shape");
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (count != p.var.size() || offset + count > payload_values)
      throw LoadError("checkpoint parameter '" + p.name + "' out of range");
    auto dst = p.var.mutable_value();
    std::memcpy(dst.data(), payload + offset * sizeof(double), count * sizeof(double));
  }
  return model;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

inline void save_checkpoint_file(const Model& model, const std::filesystem::path& path) {
  write_file_bytes(path, save_checkpoint(model));
}

inline Model load_checkpoint_file(const std::filesystem::path& path) {
  try {
    return load_checkpoint(read_file_bytes(path));
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

inline std::size_t model_size_bytes(const Model& model) { return save_checkpoint(model).size(); }

// ---- weight transfer -----------------------------------------------------

// Seeds every stage of a temporal cascade with the weights of a trained
// non-cascading model of the matching submodule kind.
inline void init_cascade_from(Model& cascade, const Model& submodule) {
  if (!is_temporal_cascade(cascade.kind()) || cascade_submodule_kind(cascade.kind()) != submodule.kind())
    throw DomainError("cannot initialise " + to_string(cascade.kind()) + " from " + to_string(submodule.kind()));
  std::map<std::string, ad::Var> source;
  for (const auto& p : submodule.parameters()) source.emplace(p.name, p.var);
  for (auto& p : cascade.parameters()) {
    const auto dot = p.name.find('.');
    const std::string local = p.name.substr(dot + 1);
    auto it = source.find(local);
    if (it == source.end() || it->second.dims() != p.var.dims())
      throw DomainError("parameter '" + p.name + "' has no counterpart in the " + to_string(submodule.kind()) +
                        " checkpoint (configurations differ)");
    std::copy(it->second.value().begin(), it->second.value().end(), p.var.mutable_value().begin());
  }
}

// Backbone-local parameter name ("conv0.weight", "fire1.squeeze.bias", ...)
// or empty if the parameter is not part of a backbone.
inline std::string backbone_local_name(const std::string& name) {
  for (const char* marker : {"encoder.", "backbone."}) {
    const auto pos = name.rfind(marker);
    if (pos == std::string::npos) continue;
    std::string rest = name.substr(pos + std::strlen(marker));
    if (rest.starts_with("conv") || rest.starts_with("fire")) return rest;
  }
  return {};
}

// Copies the first backbone found in `source` into every backbone of
// `target`. Returns the number of parameters overwritten.
inline std::size_t load_backbone_weights(Model& target, const Model& source) {
  std::map<std::string, ad::Var> weights;
  for (const auto& p : source.parameters()) {
    const auto local = backbone_local_name(p.name);
    if (!local.empty()) weights.emplace(local, p.var);
  }
  std::size_t n = 0;
  for (auto& p : target.parameters()) {
    const auto local = backbone_local_name(p.name);
    auto it = weights.find(local);
    if (local.empty() || it == weights.end() || it->second.dims() != p.var.dims()) continue;
    std::copy(it->second.value().begin(), it->second.value().end(), p.var.mutable_value().begin());
    ++n;
  }
  return n;
}

// Builds a model, applying the optional pretrained-backbone hook.
inline Model make_model(const ModelConfig& cfg) {
  Model m(cfg);
  if (!cfg.backbone.pretrained_weights.empty()) {
    const Model source = load_checkpoint_file(cfg.backbone.pretrained_weights);
    if (load_backbone_weights(m, source) == 0)
      throw DomainError("pretrained weights " + cfg.backbone.pretrained_weights + " contain no compatible backbone");
  }
  return m;
}

}  // namespace tcc
