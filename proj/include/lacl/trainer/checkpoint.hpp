#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "lacl/numcore/error.hpp"
#include "lacl/trainer/model.hpp"

namespace lacl {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json encoder_to_json(const EncoderConfig& c) {
  return {{"layers", c.layers}, {"hidden", c.hidden},   {"heads", c.heads},          {"ff_mult", c.ff_mult},
          {"dropout", c.dropout}, {"max_len", c.max_len}, {"vocab_size", c.vocab_size}};
}

inline EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ff_mult = j.at("ff_mult").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  return c;
}

// Everything needed to rebuild the model, plus an optional training-config
// echo. Parameters are stored by name as {shape, data}.
inline nlohmann::json checkpoint_to_json(const Model& m, const nlohmann::json& train_config = {}) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, p] : m.params) params[name] = {{"shape", p.value.shape()}, {"data", p.value.storage()}};
  nlohmann::json doc;
  doc["version"] = kCheckpointVersion;
  doc["mode"] = to_string(m.options.mode);
  doc["variant"] = to_string(m.options.variant);
  doc["encoder"] = encoder_to_json(m.encoder);
  doc["gcl"] = {{"hidden", m.gcl.hidden}, {"sharing", to_string(m.gcl.sharing)}};
  doc["labels"] = m.label_names;
  doc["vocab"] = m.vocab.tokens();
  if (!train_config.is_null()) doc["train_config"] = train_config;
  doc["params"] = std::move(params);
  return doc;
}

inline Model checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version")) throw Error("malformed-checkpoint", "missing version field");
  if (doc.at("version") != kCheckpointVersion)
    throw Error("unsupported-checkpoint-version", doc.at("version").dump());
  try {
    ModelOptions opt;
    opt.mode = parse_mode(doc.at("mode").get<std::string>());
    opt.variant = parse_variant(doc.at("variant").get<std::string>());
    opt.sharing = parse_sharing(doc.at("gcl").at("sharing").get<std::string>());
    opt.gcl_hidden = doc.at("gcl").at("hidden").get<std::size_t>();
    Model m;
    m.encoder = encoder_from_json(doc.at("encoder"));
    m.options = opt;
    m.gcl = make_gcl_config(m.encoder, opt);
    m.vocab = Vocabulary::from_tokens(doc.at("vocab").get<std::vector<std::string>>());
    m.label_names = doc.at("labels").get<std::vector<std::string>>();
    if (m.vocab.size() != m.encoder.vocab_size) throw Error("malformed-checkpoint", "vocab size mismatch");
    m.encoder.validate();
    for (const auto& [name, p] : doc.at("params").items()) {
      Tensor t(p.at("shape").get<std::vector<std::size_t>>(), p.at("data").get<std::vector<double>>());
      m.params[name] = Parameter{t, Tensor::zeros_like(t)};
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-checkpoint", e.what());
  }
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path,
                            const nlohmann::json& train_config = {}) {
  std::ofstream out(path);
  if (!out) throw Error("write-failed", path.string());
  out << checkpoint_to_json(m, train_config).dump() << "\n";
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("file-not-found", path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-checkpoint", path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace lacl
